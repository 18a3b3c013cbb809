// Tour of the time-series feature extractors on one synthetic click series.

#include <cstdio>
#include <vector>

#include "smlp/features.hpp"

int main() {
    // Fourteen quiet days, a five-day burst, then decay back to baseline.
    const std::vector<double> xs = {1, 0, 2, 1, 0, 1, 2, 1, 0, 1,  1,  0, 2, 1,
                                    9, 14, 22, 17, 11, 6, 3, 2, 1, 1,  0, 1, 1, 2};

    const smlp::BurstSet bursts = smlp::detect_bursts(xs, smlp::BurstParams{});
    std::printf("series of %zu days, %zu burst(s)\n", xs.size(), bursts.bursts.size());
    for (const smlp::Burst& b : bursts.bursts)
        std::printf("  days [%zu, %zu], duration %zu, weight %.4f\n", b.first, b.last,
                    b.duration(), b.weight);

    const smlp::BurstSummary s = smlp::summarize_bursts(bursts, xs.size() - 1);
    std::printf("longest burst %.0f days, total weight %.4f, count %.0f\n", s.length, s.weight,
                s.count);
    std::printf("distance hit -> heaviest burst: %.0f, hit -> longest: %.0f\n", s.dist_max,
                s.dist_longest);

    std::printf("autocorrelation (max lag 7): %.4f\n", smlp::autocorrelation(xs, 7));
    std::printf("weekly seasonal strength:    %.4f\n", smlp::seasonal_strength(xs, 7));
    std::printf("excess kurtosis:             %.4f\n", smlp::excess_kurtosis(xs));
    std::printf("Holt one-step SSE:           %.4f\n", smlp::prediction_sse(xs));

    const smlp::TrendFeatures tf = smlp::trend_features(xs, xs.size() - 1);
    std::printf("trend scope %.4f, trend level %.4f\n", tf.scope, tf.level);
    return 0;
}
