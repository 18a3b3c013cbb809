#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "smlp/datamodel.hpp"
#include "smlp/dates.hpp"
#include "smlp/errors.hpp"

namespace smlp {

/* Time-series statistics
 * ----------------------
 */

namespace detail {

inline double mean_of(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs)
        s += x;
    return s / static_cast<double>(xs.size());
}

} // namespace detail

/** Max over lags 1..max_lag of the sample autocorrelation
 *  r(k) = sum (x_t - x̄)(x_{t+k} - x̄) / sum (x_t - x̄)^2.
 *  Returns 0 for zero-variance series. Result lies in [-1, 1]. */
inline double autocorrelation(std::span<const double> xs, int max_lag) {
    const std::size_t n = xs.size();
    if (n < 2)
        throw std::invalid_argument("autocorrelation: series too short");
    if (max_lag < 1 || static_cast<std::size_t>(max_lag) >= n)
        throw std::invalid_argument("autocorrelation: max_lag must be in [1, length)");
    const double mu = detail::mean_of(xs);
    double denom = 0.0;
    for (double x : xs)
        denom += (x - mu) * (x - mu);
    if (denom == 0.0)
        return 0.0;
    double best = -1.0;
    for (int k = 1; k <= max_lag; ++k) {
        double num = 0.0;
        for (std::size_t t = 0; t + static_cast<std::size_t>(k) < n; ++t)
            num += (xs[t] - mu) * (xs[t + k] - mu);
        best = std::max(best, num / denom);
    }
    return best;
}

/** Seasonal strength via classical decomposition: centered moving-average
 *  trend (window = period, split-end weights when the period is even),
 *  period-position means of the detrended values re-centered to sum zero,
 *  then clamp(1 - Var(remainder)/Var(detrended), 0, 1) over the buckets
 *  where the trend is defined. Returns 0 when the detrended variance is 0. */
inline double seasonal_strength(std::span<const double> xs, int period) {
    const std::size_t n = xs.size();
    if (period < 2)
        throw std::invalid_argument("seasonal_strength: period must be >= 2");
    if (n < 2 * static_cast<std::size_t>(period))
        throw std::invalid_argument("seasonal_strength: series too short for period");

    const std::size_t h = static_cast<std::size_t>(period) / 2;
    const std::size_t lo = h, hi = n - 1 - h; // trend defined on [lo, hi]
    std::vector<double> detrended(n, 0.0);
    for (std::size_t i = lo; i <= hi; ++i) {
        double t = 0.0;
        if (period % 2 == 1) {
            for (std::size_t j = i - h; j <= i + h; ++j)
                t += xs[j];
            t /= period;
        } else {
            t = 0.5 * (xs[i - h] + xs[i + h]);
            for (std::size_t j = i - h + 1; j <= i + h - 1; ++j)
                t += xs[j];
            t /= period;
        }
        detrended[i] = xs[i] - t;
    }

    std::array<double, 2> acc{}; // reused below; seasonal means first
    std::vector<double> pos_sum(period, 0.0);
    std::vector<std::size_t> pos_cnt(period, 0);
    for (std::size_t i = lo; i <= hi; ++i) {
        pos_sum[i % period] += detrended[i];
        pos_cnt[i % period]++;
    }
    std::vector<double> seasonal(period, 0.0);
    double smean = 0.0;
    for (int p = 0; p < period; ++p) {
        seasonal[p] = pos_cnt[p] ? pos_sum[p] / static_cast<double>(pos_cnt[p]) : 0.0;
        smean += seasonal[p];
    }
    smean /= period;
    for (int p = 0; p < period; ++p)
        seasonal[p] -= smean;

    const std::size_t m = hi - lo + 1;
    double dmean = 0.0, rmean = 0.0;
    for (std::size_t i = lo; i <= hi; ++i) {
        dmean += detrended[i];
        rmean += detrended[i] - seasonal[i % period];
    }
    dmean /= static_cast<double>(m);
    rmean /= static_cast<double>(m);
    acc = {0.0, 0.0}; // {Var(detrended), Var(remainder)} numerators
    for (std::size_t i = lo; i <= hi; ++i) {
        const double d = detrended[i] - dmean;
        const double r = (detrended[i] - seasonal[i % period]) - rmean;
        acc[0] += d * d;
        acc[1] += r * r;
    }
    if (acc[0] == 0.0)
        return 0.0;
    return std::clamp(1.0 - acc[1] / acc[0], 0.0, 1.0);
}

/** Sample excess kurtosis g2 = m4/m2^2 - 3 with central moments m_k.
 *  Returns 0 for zero-variance series. */
inline double excess_kurtosis(std::span<const double> xs) {
    const std::size_t n = xs.size();
    if (n < 4)
        throw std::invalid_argument("kurtosis: series too short");
    const double mu = detail::mean_of(xs);
    double m2 = 0.0, m4 = 0.0;
    for (double x : xs) {
        const double d = x - mu;
        const double d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);
    if (m2 == 0.0)
        return 0.0;
    return m4 / (m2 * m2) - 3.0;
}

/** KL divergence sum p_i ln(p_i/q_i) between two count series after add-λ
 *  smoothing (λ added to every bucket before normalizing). Always finite
 *  and >= 0 for λ > 0. */
inline double kl_divergence(std::span<const double> p_counts, std::span<const double> q_counts,
                            double lambda = 0.5) {
    if (p_counts.size() != q_counts.size())
        throw std::invalid_argument("kl_divergence: length mismatch");
    if (p_counts.empty())
        throw std::invalid_argument("kl_divergence: empty series");
    const std::size_t n = p_counts.size();
    double psum = 0.0, qsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        psum += p_counts[i] + lambda;
        qsum += q_counts[i] + lambda;
    }
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = (p_counts[i] + lambda) / psum;
        const double q = (q_counts[i] + lambda) / qsum;
        if (p > 0.0)
            kl += p * std::log(p / q);
    }
    return std::max(kl, 0.0);
}

/** One-step-ahead sum of squared forecast errors under Holt's linear method
 *  with level0 = x0, trend0 = x1 - x0. Errors are accumulated from t = 2. */
inline double prediction_sse(std::span<const double> xs, double alpha = 0.3, double beta = 0.3) {
    const std::size_t n = xs.size();
    if (n < 4)
        throw std::invalid_argument("prediction_sse: series too short");
    double level = xs[0];
    double trend = xs[1] - xs[0];
    // advance the state through t = 1 (its forecast is exact by construction)
    {
        const double prev = level;
        level = alpha * xs[1] + (1.0 - alpha) * (level + trend);
        trend = beta * (level - prev) + (1.0 - beta) * trend;
    }
    double sse = 0.0;
    for (std::size_t t = 2; t < n; ++t) {
        const double forecast = level + trend;
        const double err = xs[t] - forecast;
        sse += err * err;
        const double prev = level;
        level = alpha * xs[t] + (1.0 - alpha) * (level + trend);
        trend = beta * (level - prev) + (1.0 - beta) * trend;
    }
    return sse;
}

/* Burst detection
 * ---------------
 * Two-state automaton over the bucketed count stream. State 0 emits at the
 * base rate p0 = total/length, state 1 at p1 = s * p0; emitting count c in
 * state j costs the Poisson negative log-likelihood p_j - c ln(p_j) (the
 * ln c! term is state-independent and dropped). Entering the burst state
 * costs gamma * ln(length); leaving is free. The optimal state sequence is
 * found by dynamic programming with ties broken toward state 0, and maximal
 * runs of state 1 become bursts. A burst's weight is the emission cost saved
 * by being in state 1 over its buckets.
 */

struct Burst {
    std::size_t first = 0; // inclusive
    std::size_t last = 0;  // inclusive
    double weight = 0.0;

    std::size_t duration() const { return last - first + 1; }
};

struct BurstSet {
    std::vector<Burst> bursts;
    std::size_t series_len = 0;
};

struct BurstParams {
    double scaling = 2.0; // s: burst rate / base rate
    double gamma = 1.0;   // up-transition cost multiplier
};

namespace detail {

inline constexpr double kBurstTieEps = 1e-9;

} // namespace detail

inline BurstSet detect_bursts(std::span<const double> counts, BurstParams prm = {}) {
    const std::size_t n = counts.size();
    if (n == 0)
        throw std::invalid_argument("detect_bursts: empty series");
    if (prm.scaling <= 1.0 || prm.gamma < 0.0)
        throw std::invalid_argument("detect_bursts: need scaling > 1 and gamma >= 0");
    double total = 0.0;
    for (double c : counts)
        total += c;
    BurstSet out;
    out.series_len = n;
    if (total <= 0.0)
        return out;

    const double p0 = total / static_cast<double>(n);
    const double p1 = prm.scaling * p0;
    const double ln_p0 = std::log(p0), ln_p1 = std::log(p1);
    const double tau = prm.gamma * std::log(static_cast<double>(n));
    const auto emit = [&](int state, double c) {
        return state == 0 ? p0 - c * ln_p0 : p1 - c * ln_p1;
    };

    // D[i][q]: cost of buckets i..n-1 given state q at bucket i.
    std::vector<std::array<double, 2>> suffix(n + 1, {0.0, 0.0});
    for (std::size_t i = n; i-- > 0;) {
        for (int q = 0; q < 2; ++q) {
            const double stay0 = suffix[i + 1][0];
            const double go1 = suffix[i + 1][1] + (q == 0 ? tau : 0.0);
            suffix[i][q] = emit(q, counts[i]) + std::min(stay0, go1);
        }
    }

    // Decode left to right, preferring state 0 whenever it is within the tie
    // tolerance of optimal; the sequence starts from a virtual state 0.
    std::vector<int> state(n, 0);
    int prev = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double cost0 = suffix[i][0];
        const double cost1 = suffix[i][1] + (prev == 0 ? tau : 0.0);
        state[i] = (cost1 < cost0 - detail::kBurstTieEps) ? 1 : 0;
        prev = state[i];
    }

    for (std::size_t i = 0; i < n;) {
        if (state[i] == 0) {
            ++i;
            continue;
        }
        std::size_t j = i;
        double weight = 0.0;
        while (j < n && state[j] == 1) {
            weight += emit(0, counts[j]) - emit(1, counts[j]);
            ++j;
        }
        out.bursts.push_back(Burst{i, j - 1, weight});
        i = j;
    }
    return out;
}

/** The five Table-1 burst features. Distances are signed bucket offsets from
 *  hit_index to the end of the max-weight / longest burst (0 inside the
 *  burst); with no bursts both distances take the sentinel series_len. Ties
 *  for max weight or duration go to the earliest burst. */
struct BurstSummary {
    double length = 0.0;      // burstLength
    double weight = 0.0;      // burstWeight
    double count = 0.0;       // noOfBursts
    double dist_max = 0.0;    // burstDistM
    double dist_longest = 0.0; // burstDistL
};

inline BurstSummary summarize_bursts(const BurstSet& bs, std::size_t hit_index) {
    if (hit_index >= bs.series_len)
        throw std::invalid_argument("summarize_bursts: hit_index outside series");
    BurstSummary s;
    s.count = static_cast<double>(bs.bursts.size());
    if (bs.bursts.empty()) {
        s.dist_max = s.dist_longest = static_cast<double>(bs.series_len);
        return s;
    }
    const Burst* max_w = &bs.bursts.front();
    const Burst* max_d = &bs.bursts.front();
    for (const Burst& b : bs.bursts) {
        if (b.weight > max_w->weight)
            max_w = &b;
        if (b.duration() > max_d->duration())
            max_d = &b;
    }
    s.length = static_cast<double>(max_d->duration());
    s.weight = max_w->weight;
    const auto signed_dist = [hit_index](const Burst& b) {
        if (hit_index >= b.first && hit_index <= b.last)
            return 0.0;
        return static_cast<double>(hit_index) - static_cast<double>(b.last);
    };
    s.dist_max = signed_dist(*max_w);
    s.dist_longest = signed_dist(*max_d);
    return s;
}

/* Trend, frequency, clicks, clusters
 * ----------------------------------
 */

/** Trending scope and amplitude over the window ending at hit_index.
 *  scope = (maximal suffix of the window whose trailing 3-bucket moving
 *  average is non-decreasing) / window length; level = window mean divided
 *  by the whole-series mean (0 when the series mean is 0). A window longer
 *  than the available history shrinks to it, but never below 2 buckets. */
struct TrendFeatures {
    double scope = 0.0; // t_scope
    double level = 0.0; // t_level
};

inline TrendFeatures trend_features(std::span<const double> xs, std::size_t hit_index,
                                    int window = 14) {
    if (hit_index >= xs.size())
        throw std::invalid_argument("trend_features: hit_index outside series");
    if (window < 2)
        throw std::invalid_argument("trend_features: window must be >= 2");
    const std::size_t w = std::min<std::size_t>(window, hit_index + 1);
    if (w < 2)
        throw std::invalid_argument("trend_features: not enough history before hit");
    const std::span<const double> v = xs.subspan(hit_index + 1 - w, w);

    std::vector<double> ma(w);
    for (std::size_t j = 0; j < w; ++j) {
        const std::size_t from = j >= 2 ? j - 2 : 0;
        double s = 0.0;
        for (std::size_t k = from; k <= j; ++k)
            s += v[k];
        ma[j] = s / static_cast<double>(j - from + 1);
    }
    std::size_t suffix_len = 1;
    for (std::size_t j = w - 1; j-- > 0;) {
        if (ma[j] <= ma[j + 1])
            ++suffix_len;
        else
            break;
    }

    TrendFeatures t;
    t.scope = static_cast<double>(suffix_len) / static_cast<double>(w);
    const double series_mean = detail::mean_of(xs);
    t.level = series_mean == 0.0 ? 0.0 : detail::mean_of(v) / series_mean;
    return t;
}

struct FrequencyStats {
    double avg = 0.0;
    double max = 0.0;
};

inline FrequencyStats frequency_stats(std::span<const double> xs) {
    if (xs.empty())
        throw std::invalid_argument("frequency_stats: empty series");
    FrequencyStats f;
    f.avg = detail::mean_of(xs);
    f.max = *std::max_element(xs.begin(), xs.end());
    return f;
}

/** Shannon entropy (bits) of the clicked-URL distribution within the
 *  window_days-day window ending at `hit` (inclusive). 0 when the window
 *  holds fewer than two distinct URLs. */
inline double click_entropy(std::span<const ClickRecord> clicks, Date hit, int window_days) {
    if (window_days < 1)
        throw std::invalid_argument("click_entropy: window_days must be >= 1");
    const Date from = hit.plus_days(-(window_days - 1));
    std::unordered_map<std::string, std::int64_t> counts;
    std::int64_t total = 0;
    for (const ClickRecord& c : clicks) {
        if (c.timestamp < from || hit < c.timestamp)
            continue;
        ++counts[c.url];
        ++total;
    }
    if (counts.size() < 2)
        return 0.0;
    double h = 0.0;
    for (const auto& [url, cnt] : counts) {
        const double p = static_cast<double>(cnt) / static_cast<double>(total);
        h -= p * std::log2(p);
    }
    return h;
}

/// CEshort / CElong with a zero guard on the denominator.
inline double ce_ratio(double ce_short, double ce_long) {
    return ce_long > 0.0 ? ce_short / ce_long : 0.0;
}

struct ClusterStats {
    double count = 0.0; // noOfQueries
    double sum = 0.0;   // sumCFreq
    double avg = 0.0;   // avgCFreq
    double max = 0.0;   // maxCFreq
};

inline ClusterStats
cluster_stats(std::span<const std::pair<std::string, std::int64_t>> cluster) {
    if (cluster.empty())
        throw std::invalid_argument("cluster_stats: empty cluster");
    ClusterStats s;
    s.count = static_cast<double>(cluster.size());
    double mx = static_cast<double>(cluster.front().second);
    for (const auto& [q, freq] : cluster) {
        s.sum += static_cast<double>(freq);
        mx = std::max(mx, static_cast<double>(freq));
    }
    s.avg = s.sum / s.count;
    s.max = mx;
    return s;
}

/* Entity and temporal-expression flags
 * ------------------------------------
 * Dictionary lookup against editable gazetteer files; a phrase matches when
 * its tokens appear consecutively in the query. Temporal expressions are
 * month names, weekday names, a small relative-word list, and 4-digit years
 * 1900-2099.
 */

class Gazetteer {
public:
    /// Loads person.txt, location.txt, organization.txt and temporal.txt
    /// from `dir`. One phrase per line, UTF-8, '#' comments.
    static Gazetteer load(const std::string& dir) {
        Gazetteer g;
        g.persons_ = load_phrase_file(dir + "/person.txt");
        g.locations_ = load_phrase_file(dir + "/location.txt");
        g.organizations_ = load_phrase_file(dir + "/organization.txt");
        g.temporal_words_ = load_phrase_file(dir + "/temporal.txt");
        g.max_phrase_tokens_ = 1;
        for (const auto* set : {&g.persons_, &g.locations_, &g.organizations_})
            for (const std::string& phrase : *set)
                g.max_phrase_tokens_ = std::max(
                    g.max_phrase_tokens_,
                    1 + static_cast<int>(std::count(phrase.begin(), phrase.end(), ' ')));
        g.loaded_ = true;
        return g;
    }

    bool loaded() const { return loaded_; }
    std::size_t person_count() const { return persons_.size(); }
    std::size_t location_count() const { return locations_.size(); }
    std::size_t organization_count() const { return organizations_.size(); }
    std::size_t temporal_count() const { return temporal_words_.size(); }

    bool has_person(std::span<const std::string> tokens) const {
        return contains_phrase(persons_, tokens);
    }
    bool has_location(std::span<const std::string> tokens) const {
        return contains_phrase(locations_, tokens);
    }
    bool has_organization(std::span<const std::string> tokens) const {
        return contains_phrase(organizations_, tokens);
    }

    bool has_temporal(std::span<const std::string> tokens) const {
        for (const std::string& tok : tokens) {
            if (temporal_words_.count(tok))
                return true;
            if (tok.size() == 4 && std::all_of(tok.begin(), tok.end(), [](unsigned char c) {
                    return std::isdigit(c);
                })) {
                const int year = std::stoi(tok);
                if (year >= 1900 && year <= 2099)
                    return true;
            }
        }
        return false;
    }

private:
    static std::unordered_set<std::string> load_phrase_file(const std::string& path) {
        std::ifstream is(path);
        if (!is)
            throw DataError("gazetteer not loaded: cannot open " + path);
        std::unordered_set<std::string> set;
        std::string line;
        while (std::getline(is, line)) {
            const std::string norm = normalize_query(line);
            if (norm.empty() || norm[0] == '#')
                continue;
            set.insert(norm);
        }
        if (set.empty())
            throw DataError("gazetteer not loaded: " + path + " has no entries");
        return set;
    }

    bool contains_phrase(const std::unordered_set<std::string>& set,
                         std::span<const std::string> tokens) const {
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            std::string joined;
            for (std::size_t len = 1;
                 len <= static_cast<std::size_t>(max_phrase_tokens_) && i + len <= tokens.size();
                 ++len) {
                if (len > 1)
                    joined += ' ';
                joined += tokens[i + len - 1];
                if (set.count(joined))
                    return true;
            }
        }
        return false;
    }

    std::unordered_set<std::string> persons_, locations_, organizations_, temporal_words_;
    int max_phrase_tokens_ = 1;
    bool loaded_ = false;
};

inline std::vector<std::string> tokenize_query(std::string_view query) {
    std::vector<std::string> toks;
    std::size_t i = 0;
    while (i < query.size()) {
        while (i < query.size() && query[i] == ' ')
            ++i;
        std::size_t j = i;
        while (j < query.size() && query[j] != ' ')
            ++j;
        if (j > i)
            toks.emplace_back(query.substr(i, j - i));
        i = j;
    }
    return toks;
}

struct EntityFlags {
    bool person = false;
    bool location = false;
    bool organization = false;
    bool temporal = false;
};

inline EntityFlags entity_flags(std::string_view query, const Gazetteer& gz) {
    if (!gz.loaded())
        throw DataError("gazetteer not loaded");
    const std::vector<std::string> toks = tokenize_query(query);
    EntityFlags f;
    f.person = gz.has_person(toks);
    f.location = gz.has_location(toks);
    f.organization = gz.has_organization(toks);
    f.temporal = gz.has_temporal(toks);
    return f;
}

/* Full 28-feature extraction
 * --------------------------
 */

struct ExtractOptions {
    int trend_window = 14;
    int short_period = 7;
    int long_period = 12;
    int short_max_lag = 30;
    int long_max_lag = 24;
    int ce_long_window = 14;
    int ce_short_window = 3;
    bool sse_on_long = false; // prediction error on the long series instead
    double kl_lambda = 0.5;
    BurstParams burst{};
};

namespace detail {

template <typename Fn>
auto feature_guard(const char* name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const std::exception& e) {
        throw DataError(std::string(name) + ": " + e.what());
    }
}

} // namespace detail

/** Assembles the 28 Table-1 features for one instance. Short-span statistics
 *  use the daily prefix ending at the hitting time; long-span statistics use
 *  the full monthly series. Pure: equal inputs give bitwise-equal vectors. */
inline FeatureVector extract_features(const QueryInstance& inst, const Gazetteer& gz,
                                      const ExtractOptions& opt = {}) {
    const auto hit = inst.short_series.index_of(inst.hitting_time);
    if (!hit)
        throw DataError("extract_features: hitting_time outside short_series");
    const std::vector<double> full_short = inst.short_series.as_doubles();
    const std::span<const double> prefix(full_short.data(), *hit + 1);
    const std::vector<double> long_xs = inst.long_series.as_doubles();
    const std::vector<double> background = inst.background_long_series.as_doubles();

    using detail::feature_guard;
    FeatureVector fv;

    fv.at(Feature::LongSpanAcf) = feature_guard("long_span_acf", [&] {
        return autocorrelation(long_xs,
                               std::min<int>(opt.long_max_lag, static_cast<int>(long_xs.size()) - 1));
    });
    fv.at(Feature::ShortSpanAcf) = feature_guard("short_span_acf", [&] {
        return autocorrelation(prefix,
                               std::min<int>(opt.short_max_lag, static_cast<int>(prefix.size()) - 1));
    });
    fv.at(Feature::LongSpanSeasonal) = feature_guard(
        "long_span_seasonal", [&] { return seasonal_strength(long_xs, opt.long_period); });
    fv.at(Feature::ShortSpanSeasonal) = feature_guard(
        "short_span_seasonal", [&] { return seasonal_strength(prefix, opt.short_period); });
    fv.at(Feature::LongSpanKurtosis) =
        feature_guard("long_span_kurtosis", [&] { return excess_kurtosis(long_xs); });
    fv.at(Feature::ShortSpanKurtosis) =
        feature_guard("short_span_kurtosis", [&] { return excess_kurtosis(prefix); });
    fv.at(Feature::LongSpanKlPt) = feature_guard("long_span_KL_PT", [&] {
        return kl_divergence(long_xs, background, opt.kl_lambda);
    });
    fv.at(Feature::PredictionSse) = feature_guard("prediction_sse", [&] {
        return opt.sse_on_long ? prediction_sse(long_xs) : prediction_sse(prefix);
    });

    const BurstSet bursts =
        feature_guard("burst detection", [&] { return detect_bursts(prefix, opt.burst); });
    const BurstSummary bsum = summarize_bursts(bursts, *hit);
    fv.at(Feature::BurstLength) = bsum.length;
    fv.at(Feature::BurstWeight) = bsum.weight;
    fv.at(Feature::NoOfBursts) = bsum.count;
    fv.at(Feature::BurstDistM) = bsum.dist_max;
    fv.at(Feature::BurstDistL) = bsum.dist_longest;

    const TrendFeatures trend = feature_guard("t_scope/t_level", [&] {
        return trend_features(prefix, *hit, opt.trend_window);
    });
    fv.at(Feature::TScope) = trend.scope;
    fv.at(Feature::TLevel) = trend.level;

    const FrequencyStats freq = frequency_stats(prefix);
    fv.at(Feature::AvgFreq) = freq.avg;
    fv.at(Feature::MaxFreq) = freq.max;

    const EntityFlags flags = entity_flags(inst.query, gz);
    fv.at(Feature::IsPer) = flags.person ? 1.0 : 0.0;
    fv.at(Feature::IsLoc) = flags.location ? 1.0 : 0.0;
    fv.at(Feature::IsOrg) = flags.organization ? 1.0 : 0.0;
    fv.at(Feature::IsTempEx) = flags.temporal ? 1.0 : 0.0;

    const double ce_long = click_entropy(inst.clicks, inst.hitting_time, opt.ce_long_window);
    const double ce_short = click_entropy(inst.clicks, inst.hitting_time, opt.ce_short_window);
    fv.at(Feature::CeLong) = ce_long;
    fv.at(Feature::CeShort) = ce_short;
    fv.at(Feature::CePer) = ce_ratio(ce_short, ce_long);

    const ClusterStats cs =
        feature_guard("cluster features", [&] { return cluster_stats(inst.cluster); });
    fv.at(Feature::NoOfQueries) = cs.count;
    fv.at(Feature::SumCFreq) = cs.sum;
    fv.at(Feature::AvgCFreq) = cs.avg;
    fv.at(Feature::MaxCFreq) = cs.max;

    return fv;
}

/* Z-score normalization
 * ---------------------
 */

/// Per-feature mean and population stddev; stddevs below 1e-12 become 1.
inline FeatureStats fit_normalizer(const LabeledDataset& ds) {
    if (ds.size() == 0)
        throw DataError("fit_normalizer: empty dataset");
    FeatureStats st;
    const double n = static_cast<double>(ds.size());
    for (const FeatureVector& fv : ds.features)
        for (std::size_t i = 0; i < kFeatureCount; ++i)
            st.mean[i] += fv[i];
    for (std::size_t i = 0; i < kFeatureCount; ++i)
        st.mean[i] /= n;
    for (const FeatureVector& fv : ds.features)
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            const double d = fv[i] - st.mean[i];
            st.stddev[i] += d * d;
        }
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        st.stddev[i] = std::sqrt(st.stddev[i] / n);
        if (st.stddev[i] < 1e-12)
            st.stddev[i] = 1.0;
    }
    return st;
}

/// Stats fitted over a subset of rows (e.g. the training split only).
inline FeatureStats fit_normalizer(const LabeledDataset& ds, std::span<const std::size_t> rows) {
    if (rows.empty())
        throw DataError("fit_normalizer: empty row subset");
    LabeledDataset sub;
    sub.features.reserve(rows.size());
    sub.labels.reserve(rows.size());
    for (std::size_t r : rows) {
        sub.features.push_back(ds.features.at(r));
        sub.labels.push_back(ds.labels.at(r));
    }
    return fit_normalizer(sub);
}

inline FeatureVector apply_normalizer(const FeatureVector& fv, const FeatureStats& st) {
    FeatureVector out;
    for (std::size_t i = 0; i < kFeatureCount; ++i)
        out[i] = (fv[i] - st.mean[i]) / st.stddev[i];
    return out;
}

inline FeatureVector invert_normalizer(const FeatureVector& fv, const FeatureStats& st) {
    FeatureVector out;
    for (std::size_t i = 0; i < kFeatureCount; ++i)
        out[i] = fv[i] * st.stddev[i] + st.mean[i];
    return out;
}

/// Applies `st` to every row and records it in feature_stats.
inline void normalize_dataset(LabeledDataset& ds, const FeatureStats& st) {
    for (FeatureVector& fv : ds.features)
        fv = apply_normalizer(fv, st);
    ds.feature_stats = st;
}

} // namespace smlp
