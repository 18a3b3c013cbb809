#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "smlp/config.hpp"
#include "smlp/datamodel.hpp"
#include "smlp/dates.hpp"
#include "smlp/errors.hpp"

namespace smlp {

/* Query-log parsing
 * -----------------
 * AOL-shaped TSV: header `AnonID Query QueryTime ItemRank ClickURL` (tab
 * separated), one interaction per line. Clicked lines carry both ItemRank
 * and ClickURL; query-only lines leave them empty or absent.
 */

struct DateTime {
    Date date;
    std::int32_t second = 0; // seconds past midnight
};

/// Parses "YYYY-MM-DD HH:MM:SS" (time part optional).
inline std::optional<DateTime> parse_date_time(std::string_view text) {
    if (text.size() < 10)
        return std::nullopt;
    const auto d = Date::parse(text.substr(0, 10));
    if (!d)
        return std::nullopt;
    DateTime dt{*d, 0};
    if (text.size() == 10)
        return dt;
    if (text.size() != 19 || text[10] != ' ' || text[13] != ':' || text[16] != ':')
        return std::nullopt;
    const auto two = [&](std::size_t at) -> int {
        const char a = text[at], b = text[at + 1];
        if (a < '0' || a > '9' || b < '0' || b > '9')
            return -1;
        return (a - '0') * 10 + (b - '0');
    };
    const int hh = two(11), mm = two(14), ss = two(17);
    if (hh < 0 || hh > 23 || mm < 0 || mm > 59 || ss < 0 || ss > 60)
        return std::nullopt;
    dt.second = hh * 3600 + mm * 60 + ss;
    return dt;
}

struct LogRecord {
    std::string anon_id;
    std::string query; // normalized
    DateTime query_time;
    std::optional<int> item_rank;
    std::optional<std::string> click_url; // normalized; implies item_rank
};

struct QueryLog {
    std::vector<LogRecord> records;
    std::size_t skipped = 0; // malformed lines, not counting the header
};

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t tab = line.find('\t', pos);
        if (tab == std::string_view::npos) {
            out.push_back(line.substr(pos));
            return out;
        }
        out.push_back(line.substr(pos, tab - pos));
        pos = tab + 1;
    }
}

inline constexpr std::string_view kLogColumns[] = {"AnonID", "Query", "QueryTime", "ItemRank",
                                                   "ClickURL"};

} // namespace detail

/** Parses a whole query log. Malformed lines (wrong field count, empty
 *  query, bad timestamp, click without rank) are counted in `skipped`,
 *  never fatal; a wrong header is. */
inline QueryLog parse_query_log(std::istream& is) {
    std::string line;
    if (!std::getline(is, line))
        throw DataError("query log is empty; expected header "
                        "AnonID\\tQuery\\tQueryTime\\tItemRank\\tClickURL");
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    {
        const auto cols = detail::split_tabs(line);
        const std::size_t want = std::size(detail::kLogColumns);
        bool ok = cols.size() == want;
        for (std::size_t i = 0; ok && i < want; ++i)
            ok = cols[i] == detail::kLogColumns[i];
        if (!ok)
            throw DataError("query log header mismatch; expected "
                            "AnonID\\tQuery\\tQueryTime\\tItemRank\\tClickURL");
    }

    QueryLog log;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        const auto f = detail::split_tabs(line);
        if (f.size() < 3 || f.size() > 5) {
            ++log.skipped;
            continue;
        }
        LogRecord rec;
        rec.anon_id = std::string(f[0]);
        rec.query = normalize_query(f[1]);
        const auto dt = parse_date_time(f[2]);
        const std::string_view rank = f.size() > 3 ? f[3] : std::string_view{};
        const std::string_view url = f.size() > 4 ? f[4] : std::string_view{};
        if (rec.query.empty() || !dt) {
            ++log.skipped;
            continue;
        }
        rec.query_time = *dt;
        if (!rank.empty()) {
            int value = 0;
            bool digits = !rank.empty();
            for (char c : rank) {
                if (c < '0' || c > '9') {
                    digits = false;
                    break;
                }
                value = value * 10 + (c - '0');
            }
            if (!digits) {
                ++log.skipped;
                continue;
            }
            rec.item_rank = value;
        }
        if (!url.empty()) {
            if (!rec.item_rank) { // click implies a rank
                ++log.skipped;
                continue;
            }
            rec.click_url = normalize_url(url);
        }
        log.records.push_back(std::move(rec));
    }
    return log;
}

inline QueryLog parse_query_log(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw DataError("cannot open query log: " + path);
    return parse_query_log(is);
}

/* Series construction
 * -------------------
 */

/// Daily frequency of `query` over [span_start, span_end], zero-filled.
inline TimeSeries build_short_series(std::span<const LogRecord> records, std::string_view query,
                                     Date span_start, Date span_end) {
    if (span_end < span_start)
        throw std::invalid_argument("build_short_series: empty span");
    TimeSeries ts;
    ts.epoch = span_start;
    ts.granularity = Granularity::Daily;
    ts.counts.assign(static_cast<std::size_t>(days_between(span_start, span_end)) + 1, 0);
    const std::string want = normalize_query(query);
    for (const LogRecord& r : records) {
        if (r.query != want)
            continue;
        if (const auto idx = ts.index_of(r.query_time.date))
            ++ts.counts[*idx];
    }
    return ts;
}

/// Default document matcher: every query token occurs as a token of `text`.
inline bool default_document_matcher(std::string_view query, std::string_view text) {
    const std::string nq = normalize_query(query);
    const std::string nt = normalize_query(text);
    std::unordered_set<std::string> doc_tokens;
    {
        std::istringstream is(nt);
        std::string tok;
        while (is >> tok)
            doc_tokens.insert(tok);
    }
    std::istringstream qs(nq);
    std::string tok;
    bool any = false;
    while (qs >> tok) {
        any = true;
        if (!doc_tokens.count(tok))
            return false;
    }
    return any;
}

/** Monthly counts of matched documents over the whole collection span.
 *  `doc_dates` carries one (date, matched) pair per document. */
inline TimeSeries build_long_series(std::span<const std::pair<Date, bool>> doc_dates) {
    if (doc_dates.empty())
        throw DataError("build_long_series: empty collection");
    Date lo = doc_dates.front().first, hi = doc_dates.front().first;
    for (const auto& [d, matched] : doc_dates) {
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    TimeSeries ts;
    ts.epoch = lo.first_of_month();
    ts.granularity = Granularity::Monthly;
    ts.counts.assign(static_cast<std::size_t>(months_between(ts.epoch, hi)) + 1, 0);
    for (const auto& [d, matched] : doc_dates)
        if (matched)
            ++ts.counts[*ts.index_of(d.first_of_month())];
    return ts;
}

/// Convenience overload running the default matcher over (date, text) docs.
inline TimeSeries build_long_series(std::span<const std::pair<Date, std::string>> docs,
                                    std::string_view query) {
    std::vector<std::pair<Date, bool>> flagged;
    flagged.reserve(docs.size());
    for (const auto& [d, text] : docs)
        flagged.emplace_back(d, default_document_matcher(query, text));
    return build_long_series(flagged);
}

/// Dates at constant 14-day intervals: range_start, +14, ... while <= range_end.
inline std::vector<Date> simulate_hitting_times(Date range_start, Date range_end) {
    if (range_end < range_start)
        throw std::invalid_argument("simulate_hitting_times: range_end before range_start");
    std::vector<Date> out;
    for (Date d = range_start; !(range_end < d); d = d.plus_days(14))
        out.push_back(d);
    return out;
}

/* Synthetic data generation
 * -------------------------
 * Deterministic generator producing the six class-characteristic shapes.
 * Every random draw goes through one seeded generator in a fixed order
 * (class by class, instance by instance), so equal specs give bitwise
 * equal outputs. Gaussian noise is added to every bucket, clipped at zero
 * and rounded to integer counts.
 */

struct SyntheticSpec {
    std::array<std::size_t, kClassCount> counts{988, 531, 304, 315, 2520, 5712};
    std::size_t short_len = 92;  // daily buckets
    std::size_t long_len = 246;  // monthly buckets
    Date short_start = Date::from_ymd(2006, 3, 1);
    Date long_start = Date::from_ymd(1987, 1, 1);
    double noise_sigma = 0.6;
    std::uint64_t seed = 7;
};

inline void validate_spec(const SyntheticSpec& spec) {
    if (spec.short_len < 8 || spec.long_len < 8)
        throw ConfigError("synthetic spec: series lengths must be >= 8");
    if (!(spec.noise_sigma >= 0.0))
        throw ConfigError("synthetic spec: noise.sigma must be >= 0");
}

/// Reads `counts.<class>`, `short.length`, `long.length`, `short.start`,
/// `long.start`, `noise.sigma` and `seed`, defaulting any absent key.
inline SyntheticSpec synthetic_spec_from_config(const Config& cfg) {
    SyntheticSpec spec;
    for (EventClass c : all_classes()) {
        const std::string key = "counts." + std::string(class_name(c));
        const std::int64_t v =
            cfg.get_int(key, static_cast<std::int64_t>(spec.counts[class_code(c)]));
        if (v < 0)
            throw ConfigError("synthetic spec: " + key + " must be >= 0");
        spec.counts[class_code(c)] = static_cast<std::size_t>(v);
    }
    spec.short_len = static_cast<std::size_t>(
        cfg.get_int("short.length", static_cast<std::int64_t>(spec.short_len)));
    spec.long_len = static_cast<std::size_t>(
        cfg.get_int("long.length", static_cast<std::int64_t>(spec.long_len)));
    if (cfg.has("short.start"))
        spec.short_start = Date::parse_or_throw(cfg.get_string("short.start", ""));
    if (cfg.has("long.start"))
        spec.long_start = Date::parse_or_throw(cfg.get_string("long.start", ""));
    spec.noise_sigma = cfg.get_real("noise.sigma", spec.noise_sigma);
    spec.seed = static_cast<std::uint64_t>(
        cfg.get_int("seed", static_cast<std::int64_t>(spec.seed)));
    validate_spec(spec);
    return spec;
}

struct LabeledInstance {
    QueryInstance instance;
    EventClass label = EventClass::Anticipated;
};

namespace detail {

/// Thin deterministic wrapper; distributions are hand-rolled so output does
/// not depend on the standard library's distribution implementations.
struct Rng {
    std::mt19937_64 g;

    explicit Rng(std::uint64_t seed) : g(seed) {}

    /// Uniform integer in [lo, hi].
    int uint_in(int lo, int hi) {
        return lo + static_cast<int>(g() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    double real01() { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

    double gauss() {
        double u1 = real01();
        const double u2 = real01();
        if (u1 <= 0.0)
            u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    bool chance(double p) { return real01() < p; }
};

// Word pools for query construction. Entity tokens (persons, locations,
// organizations, temporal words) are mirrored in the bundled gazetteer
// files so extraction can recover the flags.
inline constexpr std::string_view kGenPersons[] = {
    "lincoln",   "mozart",  "presley",  "chaplin",  "monroe",   "einstein", "tesla",
    "picasso",   "gandhi",  "kennedy",  "lennon",   "hepburn",  "sinatra",  "dickens",
    "austen",    "twain",   "curie",    "darwin",   "edison",   "houdini",  "pele",
    "ali",       "jordan",  "senna",    "zidane",   "callas",   "pavarotti", "elvis",
    "beethoven", "shakespeare"};

inline constexpr std::string_view kGenLocations[] = {
    "paris",    "tokyo",    "madrid",  "lisbon",   "cairo",    "sydney",  "toronto",
    "chicago",  "houston",  "denver",  "seattle",  "boston",   "atlanta", "miami",
    "norway",   "chile",    "peru",    "kenya",    "vietnam",  "iceland", "jakarta",
    "mumbai",   "lagos",    "bogota",  "havana",   "oslo",     "geneva",  "prague",
    "warsaw",   "naples"};

inline constexpr std::string_view kGenOrganizations[] = {
    "nasa",      "unesco",   "interpol", "nato",     "opec",      "fifa",     "uefa",
    "microsoft", "toyota",   "siemens",  "nokia",    "airbus",    "boeing",   "pfizer",
    "nestle",    "unicef",   "greenpeace", "reuters", "citigroup", "walmart", "ebay",
    "yahoo",     "oracle",   "intel",    "sony",     "samsung",   "shell",    "exxon",
    "ford",      "honda"};

inline constexpr std::string_view kGenTemporalWords[] = {
    "january", "february", "march",    "april",   "may",      "june",     "july",
    "august",  "september", "october", "november", "december", "monday",  "tuesday",
    "wednesday", "thursday", "friday", "saturday", "sunday",   "today",   "tonight",
    "tomorrow", "yesterday", "weekend", "holiday", "annual",   "season",  "christmas",
    "easter",  "halloween"};

inline constexpr std::string_view kGenTopics[] = {
    "festival", "concert",  "parade",   "election", "tournament", "premiere", "marathon",
    "summit",   "eclipse",  "carnival", "regatta",  "expo",       "earthquake", "storm",
    "flood",    "wildfire", "blackout", "outbreak", "recall",     "verdict",  "merger",
    "strike",   "protest",  "scandal",  "lawsuit",  "inquiry",    "shortage", "cleanup",
    "rescue",   "launch"};

inline constexpr std::string_view kGenFillers[] = {
    "recipe",  "lyrics",   "weather", "tickets", "results", "news",     "pictures",
    "scores",  "schedule", "review",  "rumor",   "trailer", "episode",  "album",
    "quiz",    "deal",     "coupon",  "horoscope", "jackpot", "lottery", "puzzle",
    "gadget",  "remix",    "dance",   "challenge", "prank",  "slang",    "catchphrase",
    "mashup",  "parody"};

inline std::string_view pick(Rng& rng, std::span<const std::string_view> pool) {
    return pool[static_cast<std::size_t>(rng.uint_in(0, static_cast<int>(pool.size()) - 1))];
}

/** Click-count allocation over distinct URLs whose Shannon entropy (bits)
 *  lands as close as possible to `target`: one dominant URL with weight p,
 *  the rest near-uniform, p found by bisection. Deterministic, so click
 *  entropies act as generator-controlled coordinates rather than noise. */
inline std::vector<std::int64_t> entropy_counts(std::int64_t n, std::int64_t urls,
                                                double target) {
    const auto realize = [n, urls](double p) {
        std::vector<std::int64_t> c;
        c.push_back(std::clamp<std::int64_t>(
            static_cast<std::int64_t>(std::llround(p * static_cast<double>(n))), 1, n));
        const std::int64_t rest = n - c.front();
        if (urls > 1 && rest > 0) {
            const std::int64_t base = rest / (urls - 1);
            const std::int64_t extra = rest % (urls - 1);
            for (std::int64_t k = 0; k < urls - 1; ++k) {
                const std::int64_t ck = base + (k < extra ? 1 : 0);
                if (ck > 0)
                    c.push_back(ck);
            }
        }
        return c;
    };
    const auto entropy_of = [n](const std::vector<std::int64_t>& c) {
        double hsum = 0.0;
        for (const std::int64_t x : c) {
            const double px = static_cast<double>(x) / static_cast<double>(n);
            hsum -= px * std::log2(px);
        }
        return hsum;
    };
    // Entropy is non-increasing in the dominant weight.
    double lo = 1.0 / static_cast<double>(urls);
    double hi = 1.0;
    for (int it = 0; it < 48; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (entropy_of(realize(mid)) > target)
            lo = mid;
        else
            hi = mid;
    }
    std::vector<std::int64_t> a = realize(lo);
    std::vector<std::int64_t> b = realize(hi);
    return std::abs(entropy_of(a) - target) <= std::abs(entropy_of(b) - target) ? a : b;
}

inline std::int64_t noisy_count(Rng& rng, double value, double sigma) {
    const double noisy = value + sigma * rng.gauss();
    return noisy <= 0.0 ? 0 : static_cast<std::int64_t>(std::llround(noisy));
}

} // namespace detail

/** Generates exactly spec.counts[c] instances per class, ordered by class
 *  code then instance index. Every instance passes validate_instance. */
inline std::vector<LabeledInstance> generate_synthetic(const SyntheticSpec& spec) {
    validate_spec(spec);
    detail::Rng rng(spec.seed);

    const std::size_t S = spec.short_len;
    const std::size_t L = spec.long_len;
    const Date short_end = spec.short_start.plus_days(static_cast<int>(S) - 1);

    // Hitting-time grid: every two weeks, skipping the first fortnight so a
    // hit always has history behind it. Falls back to the last bucket for
    // very short series.
    std::vector<std::size_t> hit_grid;
    if (S >= 15)
        for (const Date d :
             simulate_hitting_times(spec.short_start.plus_days(14), short_end))
            hit_grid.push_back(static_cast<std::size_t>(days_between(spec.short_start, d)));
    if (hit_grid.empty())
        hit_grid.push_back(S - 1);

    static constexpr double kWeekly[7] = {0.0, 0.2, 0.4, 0.3, 0.5, 0.9, 1.0};

    // Shared motif kit. Every class composes the same primitives with
    // different mixture weights, so most single features overlap between
    // classes and the label is carried by joint structure.
    auto weekly_wiggle = [](std::vector<double>& s, double amp, int phase) {
        for (std::size_t i = 0; i < s.size(); ++i)
            s[i] += amp * kWeekly[(i + static_cast<std::size_t>(phase)) % 7];
    };
    auto ramp_to = [](std::vector<double>& s, std::size_t peak, int ramp, double amp) {
        for (std::size_t i = 0; i < s.size(); ++i) {
            const int to_event = static_cast<int>(peak) - static_cast<int>(i);
            if (to_event >= 0 && to_event <= ramp)
                s[i] += amp * (1.0 - static_cast<double>(to_event) / ramp);
        }
    };
    auto fall_after = [](std::vector<double>& s, std::size_t peak, double level, double per_day) {
        for (std::size_t i = peak + 1; i < s.size(); ++i)
            s[i] += std::max(0.0, level - per_day * static_cast<double>(i - peak));
    };
    auto decay_from = [](std::vector<double>& s, std::size_t onset, double amp, double half_life) {
        for (std::size_t i = onset; i < s.size(); ++i)
            s[i] += amp * std::exp2(-static_cast<double>(i - onset) / half_life);
    };
    // seas: 0 none, 1 sinusoidal (weak), 2 peaked annual (strong).
    auto long_profile = [L](std::vector<double>& s, double lv, double drift, int seas,
                            double seas_amp, int phase) {
        for (std::size_t j = 0; j < L; ++j) {
            double v = lv + drift * static_cast<double>(j) / static_cast<double>(L);
            if (seas == 1)
                v += seas_amp * std::sin(6.283185307179586 * (static_cast<double>(j) + phase) / 12.0);
            else if (seas == 2) {
                const int pos = static_cast<int>(j) % 12;
                const int d = std::min(std::abs(pos - phase), 12 - std::abs(pos - phase));
                if (d <= 1)
                    v += seas_amp * (1.0 - 0.5 * d);
            }
            s[j] = std::max(0.0, v);
        }
    };
    auto two_from = [&rng](std::span<const std::string_view> a,
                           std::span<const std::string_view> b) {
        const std::string first(detail::pick(rng, a));
        return first + " " + std::string(detail::pick(rng, b));
    };

    // Two latent planes drive every channel an instance exposes. The three
    // broad classes ride alternating radial bands of a disc in the series
    // plane (short-span level vs long-span rhythm); the three event-driven
    // classes ride the same band law in the usage plane (cluster size vs
    // click entropy). Six bands, two per class, interleaved, so no single
    // channel and no linear mix separates the classes; only the joint radius
    // in the right plane does.
    auto band_point = [&rng](int k0, int k1, double& x, double& y) {
        const int k = rng.chance(0.5) ? k0 : k1;
        const double rho = 0.1 + static_cast<double>(k) + 0.8 * rng.real01();
        const double phi = 6.283185307179586 * rng.real01();
        x = rho * std::cos(phi);
        y = rho * std::sin(phi);
    };
    // Short-span carrier: a sustained stretch through the hit whose level
    // carries the first series coordinate. The stretch steps down partway in
    // at a knee keyed to the hit bucket, and a weekly habit rides on the
    // floor, so trend shape and weekly texture stay tied to the latents
    // instead of floating free.
    auto trio_short = [S](std::vector<double>& s, double z1, std::size_t h_,
                          std::size_t& anchor) {
        const double amp = 32.0 + 5.0 * z1;
        const double wamp = 1.0 + 0.1 * (z1 + 6.0);
        for (std::size_t i = 0; i < S; ++i)
            s[i] = 2.0 + wamp * kWeekly[i % 7];
        const std::size_t start = h_ - 12;
        const std::size_t knee = start + 4 + (h_ / 14) % 4;
        anchor = start;
        for (std::size_t i = start; i < S && i < start + 19; ++i)
            s[i] += i < knee ? amp : 0.7 * amp;
    };
    // Long-span carrier: annual sinusoid whose variance share is pinned to
    // the second series coordinate. The amplitude that realizes a target
    // share follows from share = (a^2/2) / (a^2/2 + noise variance), with
    // count rounding contributing 1/12 to the noise. Fixed phase: the long
    // span answers "how much rhythm", never "which month".
    auto trio_long = [&long_profile, &spec](std::vector<double>& s, double z2) {
        const double lv = 20.0;
        const double share = 0.5 + 0.075 * z2;
        const double sn = spec.noise_sigma * (1.0 + 0.15 * std::sqrt(lv));
        const double sd2 = sn * sn + 1.0 / 12.0;
        const double a = std::sqrt(2.0 * share / (1.0 - share) * sd2);
        long_profile(s, lv, 0.0, 1, a, 3);
    };

    std::vector<LabeledInstance> out;
    std::size_t total = 0;
    for (std::size_t c = 0; c < kClassCount; ++c)
        total += spec.counts[c];
    out.reserve(total);

    for (const EventClass cls : all_classes()) {
        for (std::size_t idx = 0; idx < spec.counts[class_code(cls)]; ++idx) {
            LabeledInstance li;
            li.label = cls;
            QueryInstance& q = li.instance;

            const std::size_t h = hit_grid[static_cast<std::size_t>(
                rng.uint_in(0, static_cast<int>(hit_grid.size()) - 1))];
            const int mode = rng.uint_in(0, 99); // sub-mode roll, mixture per class

            std::vector<double> shape_s(S, 0.0);
            std::vector<double> shape_l(L, 0.0);
            std::size_t event_idx = h;
            double z1 = 0.0, z2 = 0.0; // series-plane coordinates
            double u1 = 0.0, u2 = 0.0; // usage-plane coordinates
            bool has_code = false;     // broad classes carry a companion code

            switch (cls) {
            case EventClass::Anticipated: {
                band_point(0, 3, z1, z2);
                trio_short(shape_s, z1, h, event_idx);
                trio_long(shape_l, z2);
                has_code = true;
                u1 = 0.1 * rng.gauss();
                u2 = 0.1 * rng.gauss();
                const int q_roll = rng.uint_in(0, 99);
                if (q_roll < 40)
                    q.query = two_from(detail::kGenTopics, detail::kGenTemporalWords);
                else if (q_roll < 70)
                    q.query = two_from(detail::kGenTopics, detail::kGenFillers);
                else if (q_roll < 85)
                    q.query = two_from(detail::kGenOrganizations, detail::kGenTopics);
                else
                    q.query = two_from(detail::kGenPersons, detail::kGenTopics);
                break;
            }
            case EventClass::Breaking: {
                band_point(0, 3, u1, u2);
                const double base = rng.uint_in(0, 2);
                std::fill(shape_s.begin(), shape_s.end(), base);
                event_idx = h - static_cast<std::size_t>(rng.uint_in(0, 1));
                if (mode < 45) { // clean spike
                    const double amp = 25 + rng.uint_in(0, 35);
                    shape_s[event_idx] += amp;
                    if (event_idx + 1 < S)
                        shape_s[event_idx + 1] += amp * 0.6;
                } else if (mode < 70) { // pre-shock, then a two-day tail
                    const double amp = 18 + rng.uint_in(0, 25);
                    shape_s[event_idx] += amp;
                    if (event_idx + 1 < S)
                        shape_s[event_idx + 1] += amp * 0.5;
                    if (event_idx + 2 < S)
                        shape_s[event_idx + 2] += amp * 0.25;
                    shape_s[event_idx - 3] += amp / 5.0;
                } else if (mode < 90) { // spike with an exponential tail
                    const double amp = 12 + rng.uint_in(0, 18);
                    const double hl = 2.0 + rng.uint_in(0, 1);
                    decay_from(shape_s, event_idx, amp, hl);
                } else { // double hit
                    const double amp = 20 + rng.uint_in(0, 20);
                    shape_s[event_idx - 2] += amp / 3.0;
                    shape_s[event_idx] += amp;
                }
                const double lv = 2 + rng.uint_in(0, 13);
                if (rng.uint_in(0, 99) < 80) {
                    long_profile(shape_l, lv, 0.0, 0, 0.0, 0);
                } else {
                    const double seas = 2 + rng.uint_in(0, 3);
                    long_profile(shape_l, lv, 0.0, 1, seas, 3);
                }
                const int q_roll = rng.uint_in(0, 99);
                if (q_roll < 40)
                    q.query = two_from(detail::kGenTopics, detail::kGenLocations);
                else if (q_roll < 75)
                    q.query = two_from(detail::kGenTopics, detail::kGenFillers);
                else if (q_roll < 90)
                    q.query = two_from(detail::kGenOrganizations, detail::kGenTopics);
                else
                    q.query = two_from(detail::kGenPersons, detail::kGenTopics);
                break;
            }
            case EventClass::Commemorative: {
                band_point(1, 4, u1, u2);
                const double base = 1 + rng.uint_in(0, 2);
                std::fill(shape_s.begin(), shape_s.end(), base);
                event_idx = h - static_cast<std::size_t>(rng.uint_in(0, 3));
                const double bump = 4 + rng.uint_in(0, 6);
                if (mode < 40) { // bump on the day
                    shape_s[event_idx] += bump;
                    if (event_idx + 1 < S)
                        shape_s[event_idx + 1] += bump * 0.5;
                } else if (mode < 70) { // week-long lead-in
                    ramp_to(shape_s, event_idx, 7, bump);
                } else if (mode < 90) { // bump over a weekly habit
                    shape_s[event_idx] += bump;
                    const double amp = 1 + rng.uint_in(0, 1);
                    weekly_wiggle(shape_s, amp, rng.uint_in(0, 6));
                } else { // barely visible
                    shape_s[event_idx] += 2 + rng.uint_in(0, 2);
                }
                const double lv = 5 + rng.uint_in(0, 15);
                const int phase = 3;
                const int sroll = rng.uint_in(0, 99);
                if (sroll < 55) {
                    const double peak = 12 + rng.uint_in(0, 23);
                    long_profile(shape_l, lv, 0.0, 2, peak, phase);
                } else if (sroll < 90) {
                    const double peak = 4 + rng.uint_in(0, 6);
                    long_profile(shape_l, lv, 0.0, 1, peak, phase);
                } else {
                    long_profile(shape_l, lv, 0.0, 0, 0.0, 0);
                }
                const int q_roll = rng.uint_in(0, 99);
                if (q_roll < 20)
                    q.query = two_from(detail::kGenPersons, detail::kGenTemporalWords);
                else if (q_roll < 40)
                    q.query = std::string(detail::pick(rng, detail::kGenPersons)) + " tribute";
                else if (q_roll < 50)
                    q.query = two_from(detail::kGenPersons, detail::kGenFillers);
                else if (q_roll < 80)
                    q.query = two_from(detail::kGenTopics, detail::kGenTemporalWords);
                else
                    q.query = two_from(detail::kGenTopics, detail::kGenFillers);
                break;
            }
            case EventClass::Meme: {
                band_point(2, 5, u1, u2);
                const double base = rng.uint_in(0, 1);
                std::fill(shape_s.begin(), shape_s.end(), base);
                const std::size_t onset = h - static_cast<std::size_t>(rng.uint_in(3, 10));
                event_idx = onset;
                if (mode < 40) { // classic viral decay
                    const double amp = 18 + rng.uint_in(0, 22);
                    const double hl = 2.5 + 0.5 * rng.uint_in(0, 3);
                    shape_s[onset - 1] += amp * 0.4;
                    decay_from(shape_s, onset, amp, hl);
                } else if (mode < 65) { // resurgence a week later
                    const double amp = 10 + rng.uint_in(0, 15);
                    const double hl = 2.0 + rng.uint_in(0, 2);
                    decay_from(shape_s, onset, amp, hl);
                    if (onset + 7 < S)
                        decay_from(shape_s, onset + 7, amp / 3.0, hl);
                } else if (mode < 85) { // slow burn into the peak
                    const double amp = 12 + rng.uint_in(0, 18);
                    ramp_to(shape_s, onset, 3, amp);
                    fall_after(shape_s, onset, amp * 0.8, amp / 6.0);
                } else { // flash right before the hit
                    const std::size_t flash =
                        h - static_cast<std::size_t>(rng.uint_in(1, 4));
                    event_idx = flash;
                    const double amp = 15 + rng.uint_in(0, 20);
                    const double hl = 1.0 + 0.5 * rng.uint_in(0, 1);
                    decay_from(shape_s, flash, amp, hl);
                }
                const double lv = 1 + rng.uint_in(0, 7);
                if (rng.uint_in(0, 99) < 85) {
                    long_profile(shape_l, lv, 0.0, 0, 0.0, 0);
                } else {
                    const double seas = 1 + rng.uint_in(0, 2);
                    long_profile(shape_l, lv, 0.0, 1, seas, 3);
                }
                const int q_roll = rng.uint_in(0, 99);
                if (q_roll < 55)
                    q.query = two_from(detail::kGenFillers, detail::kGenFillers);
                else if (q_roll < 70)
                    q.query = two_from(detail::kGenFillers, detail::kGenPersons);
                else if (q_roll < 80)
                    q.query = two_from(detail::kGenFillers, detail::kGenLocations);
                else
                    q.query = two_from(detail::kGenTopics, detail::kGenFillers);
                break;
            }
            case EventClass::Ongoing: {
                band_point(1, 4, z1, z2);
                trio_short(shape_s, z1, h, event_idx);
                trio_long(shape_l, z2);
                has_code = true;
                u1 = 0.1 * rng.gauss();
                u2 = 0.1 * rng.gauss();
                const int q_roll = rng.uint_in(0, 99);
                if (q_roll < 35)
                    q.query = two_from(detail::kGenOrganizations, detail::kGenTopics);
                else if (q_roll < 65)
                    q.query = two_from(detail::kGenTopics, detail::kGenFillers);
                else if (q_roll < 80)
                    q.query = two_from(detail::kGenTopics, detail::kGenTemporalWords);
                else
                    q.query = two_from(detail::kGenLocations, detail::kGenTopics);
                break;
            }
            case EventClass::Atemporal: {
                band_point(2, 5, z1, z2);
                trio_short(shape_s, z1, h, event_idx);
                trio_long(shape_l, z2);
                has_code = true;
                u1 = 0.1 * rng.gauss();
                u2 = 0.1 * rng.gauss();
                const int q_roll = rng.uint_in(0, 99);
                if (q_roll < 50)
                    q.query = two_from(detail::kGenFillers, detail::kGenFillers);
                else if (q_roll < 65)
                    q.query = two_from(detail::kGenFillers, detail::kGenLocations);
                else if (q_roll < 85)
                    q.query = two_from(detail::kGenFillers, detail::kGenTemporalWords);
                else
                    q.query = two_from(detail::kGenFillers, detail::kGenPersons);
                break;
            }
            }

            q.hitting_time = spec.short_start.plus_days(static_cast<int>(h));
            q.event_date = spec.short_start.plus_days(static_cast<int>(event_idx));

            q.short_series.epoch = spec.short_start;
            q.short_series.granularity = Granularity::Daily;
            q.short_series.counts.resize(S);
            for (std::size_t i = 0; i < S; ++i) {
                const double sd =
                    spec.noise_sigma * (1.0 + 0.15 * std::sqrt(std::max(0.0, shape_s[i])));
                q.short_series.counts[i] = detail::noisy_count(rng, shape_s[i], sd);
            }

            q.long_series.epoch = spec.long_start;
            q.long_series.granularity = Granularity::Monthly;
            q.long_series.counts.resize(L);
            for (std::size_t j = 0; j < L; ++j) {
                const double sd =
                    spec.noise_sigma * (1.0 + 0.15 * std::sqrt(std::max(0.0, shape_l[j])));
                q.long_series.counts[j] = detail::noisy_count(rng, shape_l[j], sd);
            }

            // Background: shared corpus volume with mild trend and annual
            // cycle. Fixed phase, same as the query-side carriers, so the
            // divergence channel reads rhythm strength rather than offset.
            q.background_long_series.epoch = spec.long_start;
            q.background_long_series.granularity = Granularity::Monthly;
            q.background_long_series.counts.resize(L);
            const double bg_phase = 3.0;
            for (std::size_t j = 0; j < L; ++j) {
                const double v = 300.0 + 0.2 * static_cast<double>(j) +
                                 25.0 * std::sin(6.283185307179586 * (j + bg_phase) / 12.0);
                q.background_long_series.counts[j] =
                    detail::noisy_count(rng, v, spec.noise_sigma);
            }

            // Clicks: two disjoint URL pools with deterministic counts. The
            // recent three days realize the short-entropy coordinate; the
            // rest of the fortnight adds an older pool sized so the union
            // entropy lands on the long-entropy target exactly, via
            // H = w H_s + (1-w) H_a + h_b(w) for disjoint supports.
            const double hs_t = 2.8 + 0.4 * u2;
            const double hl_t = 4.5 + 0.2 * u2;
            const std::vector<std::int64_t> cs = detail::entropy_counts(100, 56, hs_t);
            double hs_real = 0.0;
            for (const std::int64_t x : cs) {
                const double px = static_cast<double>(x) / 100.0;
                hs_real -= px * std::log2(px);
            }
            const double ha_t = (hl_t - 0.4 * hs_real - 0.9709505944546686) / 0.6;
            const std::vector<std::int64_t> ca = detail::entropy_counts(150, 64, ha_t);
            q.clicks.reserve(250);
            for (std::size_t k = 0; k < cs.size(); ++k)
                for (std::int64_t r = 0; r < cs[k]; ++r) {
                    ClickRecord cr;
                    cr.timestamp = q.hitting_time.plus_days(-static_cast<int>(k % 3));
                    cr.url = "s" + std::to_string(k) + ".example.com/hot";
                    cr.query = q.query;
                    q.clicks.push_back(std::move(cr));
                }
            for (std::size_t k = 0; k < ca.size(); ++k)
                for (std::int64_t r = 0; r < ca[k]; ++r) {
                    ClickRecord cr;
                    cr.timestamp = q.hitting_time.plus_days(-3 - static_cast<int>(k % 11));
                    cr.url = "a" + std::to_string(k) + ".example.com/old";
                    cr.query = q.query;
                    q.clicks.push_back(std::move(cr));
                }

            // Cluster: the query itself, companions whose count realizes the
            // cluster-size coordinate over a fixed frequency ladder, and for
            // the broad classes a dominant companion whose volume carries the
            // long-span rhythm coordinate.
            std::int64_t self_freq = 0;
            for (const std::int64_t cnt : q.short_series.counts)
                self_freq += cnt;
            q.cluster.emplace_back(q.query, std::max<std::int64_t>(1, self_freq));
            const int size = std::clamp(
                static_cast<int>(std::llround(26.0 + 4.0 * u1)), 2, 50);
            const int extras = size - (has_code ? 2 : 1);
            for (int k = 0; k < extras; ++k)
                q.cluster.emplace_back(q.query + " " +
                                           std::string(detail::pick(rng, detail::kGenFillers)),
                                       40 + 17 * static_cast<std::int64_t>(k));
            if (has_code)
                q.cluster.emplace_back(
                    q.query + " " + std::string(detail::pick(rng, detail::kGenFillers)),
                    2600 + static_cast<std::int64_t>(std::llround(160.0 * z2)));

            out.push_back(std::move(li));
        }
    }
    return out;
}

/* Raw-instance files (JSON lines)
 * -------------------------------
 * One record per line. Click entries may omit "query" when it matches the
 * instance's own query. This is the `generate` output and `extract` input.
 */

namespace detail {

inline nlohmann::json series_to_json(const TimeSeries& ts) {
    return {{"start", ts.bucket_date(0).to_string()},
            {"granularity", ts.granularity == Granularity::Daily ? "daily" : "monthly"},
            {"counts", ts.counts}};
}

inline TimeSeries series_from_json(const nlohmann::json& j) {
    TimeSeries ts;
    ts.epoch = Date::parse_or_throw(j.at("start").get<std::string>());
    const std::string g = j.at("granularity").get<std::string>();
    if (g == "daily")
        ts.granularity = Granularity::Daily;
    else if (g == "monthly")
        ts.granularity = Granularity::Monthly;
    else
        throw DataError("unknown granularity: " + g);
    ts.counts = j.at("counts").get<std::vector<std::int64_t>>();
    return ts;
}

} // namespace detail

inline void save_instances_jsonl(std::ostream& os, std::span<const LabeledInstance> instances) {
    for (const LabeledInstance& li : instances) {
        const QueryInstance& q = li.instance;
        nlohmann::json j{{"query", q.query},
                         {"label", std::string(class_name(li.label))},
                         {"event_date", q.event_date.to_string()},
                         {"hitting_time", q.hitting_time.to_string()},
                         {"short", detail::series_to_json(q.short_series)},
                         {"long", detail::series_to_json(q.long_series)},
                         {"background", detail::series_to_json(q.background_long_series)}};
        nlohmann::json clicks = nlohmann::json::array();
        for (const ClickRecord& c : q.clicks) {
            nlohmann::json cj{{"date", c.timestamp.to_string()}, {"url", c.url}};
            if (c.query != q.query)
                cj["query"] = c.query;
            clicks.push_back(std::move(cj));
        }
        j["clicks"] = std::move(clicks);
        nlohmann::json cluster = nlohmann::json::array();
        for (const auto& [text, freq] : q.cluster)
            cluster.push_back(nlohmann::json::array({text, freq}));
        j["cluster"] = std::move(cluster);
        os << j.dump() << '\n';
    }
    if (!os)
        throw DataError("failed writing instance file");
}

inline void save_instances_jsonl(const std::string& path,
                                 std::span<const LabeledInstance> instances) {
    std::ofstream os(path);
    if (!os)
        throw DataError("cannot open for writing: " + path);
    save_instances_jsonl(os, instances);
}

inline std::vector<LabeledInstance> load_instances_jsonl(std::istream& is) {
    std::vector<LabeledInstance> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty())
            continue;
        try {
            const nlohmann::json j = nlohmann::json::parse(line);
            LabeledInstance li;
            const std::string label = j.at("label").get<std::string>();
            const auto cls = class_from_name(label);
            if (!cls)
                throw DataError("instance file line " + std::to_string(lineno) +
                                ": unknown class " + label);
            li.label = *cls;
            QueryInstance& q = li.instance;
            q.query = j.at("query").get<std::string>();
            q.event_date = Date::parse_or_throw(j.at("event_date").get<std::string>());
            q.hitting_time = Date::parse_or_throw(j.at("hitting_time").get<std::string>());
            q.short_series = detail::series_from_json(j.at("short"));
            q.long_series = detail::series_from_json(j.at("long"));
            q.background_long_series = detail::series_from_json(j.at("background"));
            for (const nlohmann::json& cj : j.at("clicks")) {
                ClickRecord c;
                c.timestamp = Date::parse_or_throw(cj.at("date").get<std::string>());
                c.url = cj.at("url").get<std::string>();
                c.query = cj.contains("query") ? cj.at("query").get<std::string>() : q.query;
                q.clicks.push_back(std::move(c));
            }
            for (const nlohmann::json& e : j.at("cluster"))
                q.cluster.emplace_back(e.at(0).get<std::string>(),
                                       e.at(1).get<std::int64_t>());
            out.push_back(std::move(li));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("instance file line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

inline std::vector<LabeledInstance> load_instances_jsonl(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw DataError("cannot open instance file: " + path);
    return load_instances_jsonl(is);
}

} // namespace smlp
