#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "smlp/dates.hpp"
#include "smlp/errors.hpp"

namespace smlp {

/* Event taxonomy
 * --------------
 * Six dynamic classes with fixed codes 0..5. The class of a query is relative
 * to its hitting time, so the same query can move between classes over time.
 */

enum class EventClass : int {
    Anticipated = 0,
    Breaking = 1,
    Commemorative = 2,
    Meme = 3,
    Ongoing = 4,
    Atemporal = 5,
};

inline constexpr int kClassCount = 6;

inline const char* class_name(EventClass c) {
    switch (c) {
    case EventClass::Anticipated: return "anticipated";
    case EventClass::Breaking: return "breaking";
    case EventClass::Commemorative: return "commemorative";
    case EventClass::Meme: return "meme";
    case EventClass::Ongoing: return "ongoing";
    case EventClass::Atemporal: return "atemporal";
    }
    return "?";
}

inline constexpr std::size_t class_code(EventClass c) {
    return static_cast<std::size_t>(c);
}

inline std::optional<EventClass> class_from_code(int code) {
    if (code < 0 || code >= kClassCount)
        return std::nullopt;
    return static_cast<EventClass>(code);
}

inline std::optional<EventClass> class_from_name(std::string_view name) {
    for (int c = 0; c < kClassCount; ++c)
        if (name == class_name(static_cast<EventClass>(c)))
            return static_cast<EventClass>(c);
    return std::nullopt;
}

inline constexpr std::array<EventClass, kClassCount> all_classes() {
    return {EventClass::Anticipated,   EventClass::Breaking, EventClass::Commemorative,
            EventClass::Meme,          EventClass::Ongoing,  EventClass::Atemporal};
}

/* Time series
 * -----------
 */

enum class Granularity { Daily, Monthly };

/** Evenly spaced non-negative counts. Bucket i covers epoch + i granules;
 *  monthly epochs are anchored to the first of the month. */
struct TimeSeries {
    Date epoch;
    Granularity granularity = Granularity::Daily;
    std::vector<std::int64_t> counts;

    std::size_t size() const { return counts.size(); }

    Date bucket_date(std::size_t i) const {
        return granularity == Granularity::Daily ? epoch.plus_days(static_cast<int>(i))
                                                 : epoch.plus_months(static_cast<int>(i));
    }

    /// Bucket index containing `d`, or nullopt when outside coverage.
    std::optional<std::size_t> index_of(Date d) const {
        const int i = granularity == Granularity::Daily ? days_between(epoch, d)
                                                        : months_between(epoch, d);
        if (i < 0 || static_cast<std::size_t>(i) >= counts.size())
            return std::nullopt;
        return static_cast<std::size_t>(i);
    }

    std::vector<double> as_doubles() const {
        return std::vector<double>(counts.begin(), counts.end());
    }
};

/* Normalization of query and URL strings
 * ---------------------------------------
 */

/// Lowercase, collapse internal whitespace to single spaces, trim ends.
inline std::string normalize_query(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool in_space = true; // swallows leading whitespace
    for (unsigned char ch : raw) {
        if (std::isspace(ch)) {
            in_space = true;
            continue;
        }
        if (in_space && !out.empty())
            out.push_back(' ');
        in_space = false;
        out.push_back(static_cast<char>(std::tolower(ch)));
    }
    return out;
}

/// Lowercase, strip a leading http:// or https:// scheme and any trailing slashes.
inline std::string normalize_url(std::string_view raw) {
    std::string url;
    url.reserve(raw.size());
    for (unsigned char ch : raw)
        if (!std::isspace(ch))
            url.push_back(static_cast<char>(std::tolower(ch)));
    for (std::string_view scheme : {"http://", "https://"})
        if (url.size() >= scheme.size() && std::string_view(url).substr(0, scheme.size()) == scheme) {
            url.erase(0, scheme.size());
            break;
        }
    while (!url.empty() && url.back() == '/')
        url.pop_back();
    return url;
}

/* Query instances
 * ---------------
 */

/// One clicked result attributed to a query.
struct ClickRecord {
    Date timestamp;
    std::string url;   // normalized
    std::string query; // normalized
};

/** The unit of classification: a (query, event date, hitting time) triple with
 *  its raw signals attached. `short_series` is daily query-log frequency,
 *  `long_series` monthly matching-document counts in an external collection,
 *  and `background_long_series` the whole collection's monthly volume. */
struct QueryInstance {
    std::string query; // normalized
    Date event_date;
    Date hitting_time;
    TimeSeries short_series;           // Daily
    TimeSeries long_series;            // Monthly
    TimeSeries background_long_series; // Monthly
    std::vector<ClickRecord> clicks;
    std::vector<std::pair<std::string, std::int64_t>> cluster; // includes self
};

namespace detail {

inline void check_series(const TimeSeries& ts, Granularity expected, const char* field,
                         std::vector<std::string>& out) {
    if (ts.counts.empty())
        out.push_back(std::string(field) + " empty");
    if (ts.granularity != expected)
        out.push_back(std::string(field) + " wrong granularity");
    for (std::int64_t c : ts.counts)
        if (c < 0) {
            out.push_back(std::string(field) + " negative count");
            break;
        }
}

} // namespace detail

/** Checks every QueryInstance invariant; returns one message per violation
 *  (empty means valid). Violations are data, not failures. */
inline std::vector<std::string> validate_instance(const QueryInstance& inst) {
    std::vector<std::string> v;
    if (inst.query.empty())
        v.push_back("query empty");
    else if (inst.query != normalize_query(inst.query))
        v.push_back("query not normalized");
    detail::check_series(inst.short_series, Granularity::Daily, "short_series", v);
    detail::check_series(inst.long_series, Granularity::Monthly, "long_series", v);
    detail::check_series(inst.background_long_series, Granularity::Monthly,
                         "background_long_series", v);
    if (!inst.short_series.counts.empty() && !inst.short_series.index_of(inst.hitting_time))
        v.push_back("hitting_time outside short_series");
    bool has_self = false;
    for (const auto& [q, freq] : inst.cluster) {
        if (q == inst.query)
            has_self = true;
        if (freq < 0)
            v.push_back("cluster negative frequency");
    }
    if (!has_self)
        v.push_back("cluster missing self");
    for (const ClickRecord& c : inst.clicks)
        if (c.url.empty()) {
            v.push_back("click url empty");
            break;
        }
    return v;
}

/* Feature vectors
 * ---------------
 * 28 features in canonical order: Table rows interleaved left column then
 * right column. The order is fixed so that dataset files, normalizer stats
 * and network inputs all agree.
 */

inline constexpr std::size_t kFeatureCount = 28;

enum class Feature : std::size_t {
    LongSpanAcf = 0,
    ShortSpanAcf = 1,
    LongSpanSeasonal = 2,
    ShortSpanSeasonal = 3,
    LongSpanKurtosis = 4,
    ShortSpanKurtosis = 5,
    LongSpanKlPt = 6,
    PredictionSse = 7,
    BurstLength = 8,
    TScope = 9,
    BurstWeight = 10,
    TLevel = 11,
    NoOfBursts = 12,
    AvgFreq = 13,
    IsPer = 14,
    MaxFreq = 15,
    IsLoc = 16,
    CeLong = 17,
    IsOrg = 18,
    CeShort = 19,
    IsTempEx = 20,
    CePer = 21,
    NoOfQueries = 22,
    SumCFreq = 23,
    BurstDistM = 24,
    AvgCFreq = 25,
    BurstDistL = 26,
    MaxCFreq = 27,
};

inline const std::array<const char*, kFeatureCount>& feature_names() {
    static const std::array<const char*, kFeatureCount> names = {
        "long_span_acf",   "short_span_acf", "long_span_seasonal", "short_span_seasonal",
        "long_span_kurtosis", "short_span_kurtosis", "long_span_KL_PT", "prediction_sse",
        "burstLength",     "t_scope",        "burstWeight",        "t_level",
        "noOfBursts",      "avgFreq",        "isPer",              "maxFreq",
        "isLoc",           "CElong",         "isOrg",              "CEshort",
        "isTempEx",        "CEper",          "noOfQueries",        "sumCFreq",
        "burstDistM",      "avgCFreq",       "burstDistL",         "maxCFreq",
    };
    return names;
}

struct FeatureVector {
    std::array<double, kFeatureCount> values{};

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    double& at(Feature f) { return values[static_cast<std::size_t>(f)]; }
    double at(Feature f) const { return values[static_cast<std::size_t>(f)]; }

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// FeatureVector invariant violations: finiteness, flag domain, non-negativity.
inline std::vector<std::string> check_feature_vector(const FeatureVector& fv) {
    std::vector<std::string> v;
    for (std::size_t i = 0; i < kFeatureCount; ++i)
        if (!std::isfinite(fv[i]))
            v.push_back(std::string(feature_names()[i]) + " not finite");
    for (Feature f : {Feature::IsPer, Feature::IsLoc, Feature::IsOrg, Feature::IsTempEx}) {
        const double x = fv.at(f);
        if (x != 0.0 && x != 1.0)
            v.push_back(std::string(feature_names()[static_cast<std::size_t>(f)]) +
                        " not in {0,1}");
    }
    for (Feature f :
         {Feature::CeLong, Feature::CeShort, Feature::NoOfBursts, Feature::AvgFreq,
          Feature::MaxFreq, Feature::NoOfQueries, Feature::SumCFreq, Feature::AvgCFreq,
          Feature::MaxCFreq, Feature::BurstLength, Feature::BurstWeight})
        if (fv.at(f) < 0.0)
            v.push_back(std::string(feature_names()[static_cast<std::size_t>(f)]) +
                        " negative");
    return v;
}

/* Labeled datasets and their on-disk format
 * -----------------------------------------
 * UTF-8, line oriented:
 *   #smlp-dataset v1 d=28
 *   #mean m1 ... m28          (optional, with #std)
 *   #std s1 ... s28
 *   <label code>\t<f1> <f2> ... <f28>
 * Reals are written with 17 significant digits so they round-trip bit-exactly.
 */

struct FeatureStats {
    std::array<double, kFeatureCount> mean{};
    std::array<double, kFeatureCount> stddev{};
};

struct LabeledDataset {
    std::vector<FeatureVector> features;
    std::vector<EventClass> labels;
    std::optional<FeatureStats> feature_stats;
    std::string provenance;

    std::size_t size() const { return features.size(); }
};

namespace detail {

inline void write_real(std::ostream& os, double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    os << buf;
}

inline double parse_real(std::string_view tok, const char* context) {
    char* end = nullptr;
    const std::string s(tok);
    const double x = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw DataError(std::string("malformed real in ") + context + ": '" + s + "'");
    return x;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> toks;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && line[i] == ' ')
            ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ')
            ++j;
        if (j > i)
            toks.push_back(line.substr(i, j - i));
        i = j;
    }
    return toks;
}

inline std::array<double, kFeatureCount> parse_real_row(std::string_view text,
                                                        const char* context) {
    const auto toks = split_ws(text);
    if (toks.size() != kFeatureCount)
        throw DataError(std::string(context) + ": expected 28 values, got " +
                        std::to_string(toks.size()));
    std::array<double, kFeatureCount> row{};
    for (std::size_t i = 0; i < kFeatureCount; ++i)
        row[i] = parse_real(toks[i], context);
    return row;
}

} // namespace detail

inline void save_dataset(const LabeledDataset& ds, std::ostream& os) {
    os << "#smlp-dataset v1 d=" << kFeatureCount << "\n";
    if (ds.feature_stats) {
        os << "#mean";
        for (double m : ds.feature_stats->mean) {
            os << ' ';
            detail::write_real(os, m);
        }
        os << "\n#std";
        for (double s : ds.feature_stats->stddev) {
            os << ' ';
            detail::write_real(os, s);
        }
        os << "\n";
    }
    for (std::size_t r = 0; r < ds.size(); ++r) {
        os << static_cast<int>(ds.labels[r]) << '\t';
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            if (i)
                os << ' ';
            detail::write_real(os, ds.features[r][i]);
        }
        os << "\n";
    }
}

inline void save_dataset(const LabeledDataset& ds, const std::string& path) {
    std::ofstream os(path);
    if (!os)
        throw DataError("cannot open for writing: " + path);
    save_dataset(ds, os);
    if (!os)
        throw DataError("write failed: " + path);
}

inline LabeledDataset load_dataset(std::istream& is) {
    LabeledDataset ds;
    std::string line;
    if (!std::getline(is, line) || line.rfind("#smlp-dataset v1", 0) != 0)
        throw DataError("not a dataset file: missing '#smlp-dataset v1' header");
    std::optional<std::array<double, kFeatureCount>> mean, stddev;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty())
            continue;
        if (line[0] == '#') {
            if (line.rfind("#mean", 0) == 0)
                mean = detail::parse_real_row(line.substr(5), "#mean");
            else if (line.rfind("#std", 0) == 0)
                stddev = detail::parse_real_row(line.substr(4), "#std");
            continue; // other comments ignored
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw DataError("line " + std::to_string(lineno) + ": missing tab after label");
        int code = -1;
        try {
            code = std::stoi(line.substr(0, tab));
        } catch (const std::exception&) {
            throw DataError("line " + std::to_string(lineno) + ": bad label");
        }
        const auto cls = class_from_code(code);
        if (!cls)
            throw DataError("line " + std::to_string(lineno) + ": label code out of range");
        FeatureVector fv;
        fv.values = detail::parse_real_row(std::string_view(line).substr(tab + 1), "record");
        ds.features.push_back(fv);
        ds.labels.push_back(*cls);
    }
    if (mean && stddev)
        ds.feature_stats = FeatureStats{*mean, *stddev};
    else if (mean || stddev)
        throw DataError("#mean and #std must appear together");
    return ds;
}

inline LabeledDataset load_dataset(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw DataError("cannot open dataset: " + path);
    return load_dataset(is);
}

/// Serialize to the on-disk format and parse back; identity on valid datasets.
inline LabeledDataset roundtrip_dataset(const LabeledDataset& ds) {
    std::stringstream buf;
    save_dataset(ds, buf);
    LabeledDataset back = load_dataset(buf);
    back.provenance = ds.provenance; // provenance is not part of the file format
    return back;
}

} // namespace smlp
