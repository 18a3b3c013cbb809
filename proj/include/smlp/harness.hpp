#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "smlp/config.hpp"
#include "smlp/datamodel.hpp"
#include "smlp/errors.hpp"
#include "smlp/features.hpp"
#include "smlp/network.hpp"
#include "smlp/optim.hpp"

namespace smlp {

/* Dataset splitting
 * -----------------
 * 70/30 train/test, then 90/10 fit/validation inside train. Rounding rule:
 * test = floor(0.3 n), validation = floor(0.1 (n - test)), fit = rest.
 * Stratified mode applies the same rule inside every class.
 */

struct SplitManifest {
    std::vector<std::size_t> fit;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
    std::uint64_t seed = 0;
    bool stratified = false;
};

namespace detail {

/// Fisher-Yates with a hand-run index draw so the permutation does not
/// depend on the standard library's distribution internals.
inline void shuffle_indices(std::vector<std::size_t>& idx, std::mt19937_64& g) {
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[g() % i]);
}

inline void split_block(const std::vector<std::size_t>& pool, SplitManifest& m) {
    const std::size_t n = pool.size();
    const std::size_t n_test = n * 3 / 10;
    const std::size_t n_val = (n - n_test) / 10;
    std::size_t i = 0;
    for (; i < n_test; ++i)
        m.test.push_back(pool[i]);
    for (; i < n_test + n_val; ++i)
        m.validation.push_back(pool[i]);
    for (; i < n; ++i)
        m.fit.push_back(pool[i]);
}

} // namespace detail

inline SplitManifest split_dataset(const LabeledDataset& ds, std::uint64_t seed,
                                   bool stratified = false) {
    const std::size_t n = ds.size();
    if (n < 10)
        throw DataError("split: dataset too small (need at least 10 instances)");
    SplitManifest m;
    m.seed = seed;
    m.stratified = stratified;
    std::mt19937_64 g(seed);

    if (!stratified) {
        std::vector<std::size_t> pool(n);
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        detail::shuffle_indices(pool, g);
        detail::split_block(pool, m);
        return m;
    }

    for (const EventClass c : all_classes()) {
        std::vector<std::size_t> pool;
        for (std::size_t i = 0; i < n; ++i)
            if (ds.labels[i] == c)
                pool.push_back(i);
        if (pool.empty())
            continue;
        if (pool.size() < 2)
            throw DataError(std::string("split: class ") + class_name(c) +
                            " has fewer than 2 members");
        detail::shuffle_indices(pool, g);
        detail::split_block(pool, m);
    }
    return m;
}

/* Training
 * --------
 */

struct TrainConfig {
    std::size_t batch_size = 32;
    std::size_t epochs = 200;
    std::uint64_t shuffle_seed = 0;
    bool safeguard = false;      // halve the rate after 10 rising iterations
    bool weighted = false;       // inverse-frequency class weights
    std::size_t inner_k = 1;     // per-unit inner refreshes of each batch gradient
};

inline TrainConfig train_config_from_config(const Config& cfg) {
    TrainConfig tc;
    tc.batch_size = static_cast<std::size_t>(
        cfg.get_int("train.batch", static_cast<std::int64_t>(tc.batch_size)));
    tc.epochs =
        static_cast<std::size_t>(cfg.get_int("train.epochs", static_cast<std::int64_t>(tc.epochs)));
    tc.shuffle_seed = static_cast<std::uint64_t>(
        cfg.get_int("train.shuffle_seed", static_cast<std::int64_t>(tc.shuffle_seed)));
    tc.safeguard = cfg.get_bool("train.safeguard", tc.safeguard);
    tc.weighted = cfg.get_bool("train.weighted", tc.weighted);
    tc.inner_k =
        static_cast<std::size_t>(cfg.get_int("train.inner_k", static_cast<std::int64_t>(tc.inner_k)));
    if (tc.batch_size < 1)
        throw ConfigError("train.batch must be >= 1");
    if (tc.inner_k < 1)
        throw ConfigError("train.inner_k must be >= 1");
    return tc;
}

struct ConvergenceCurve {
    std::string optimizer;
    double fraction = 1.0; // share of the dataset used for fitting
    std::vector<double> losses;

    /// Mean loss over the last epoch's iterations (0 for empty curves).
    double final_loss = 0.0;
};

struct TrainReport {
    SmlpModel model;      // after the last epoch
    SmlpModel best_model; // lowest validation loss
    ConvergenceCurve curve;
    std::vector<double> val_losses; // one per epoch
    double best_val_loss = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
};

namespace detail {

inline Matrix rows_to_matrix(const LabeledDataset& ds, std::span<const std::size_t> idx) {
    Matrix X(idx.size(), kFeatureCount);
    for (std::size_t r = 0; r < idx.size(); ++r)
        std::copy(ds.features[idx[r]].values.begin(), ds.features[idx[r]].values.end(), X.row(r));
    return X;
}

inline std::vector<EventClass> rows_to_labels(const LabeledDataset& ds,
                                              std::span<const std::size_t> idx) {
    std::vector<EventClass> out(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r)
        out[r] = ds.labels[idx[r]];
    return out;
}

inline double split_loss(const SmlpModel& model, const LabeledDataset& ds,
                         std::span<const std::size_t> idx) {
    const Matrix X = rows_to_matrix(ds, idx);
    const std::vector<EventClass> y = rows_to_labels(ds, idx);
    return mean_cross_entropy(forward(model, X), y);
}

/// Zero every unit's gradient except `keep`.
inline GradientSet mask_to_unit(const GradientSet& grads, std::size_t keep) {
    GradientSet out = grads;
    for (std::size_t u = 0; u < out.units.size(); ++u) {
        if (u == keep)
            continue;
        for (LayerGrad& g : out.units[u]) {
            std::fill(g.dW.a.begin(), g.dW.a.end(), 0.0);
            std::fill(g.db.begin(), g.db.end(), 0.0);
        }
    }
    return out;
}

} // namespace detail

/// Inverse-frequency class weights over the fit split, normalized so the
/// weighted class counts sum to the split size.
inline std::array<double, kClassCount> class_weights_for(const LabeledDataset& ds,
                                                         std::span<const std::size_t> fit) {
    std::array<double, kClassCount> counts{};
    for (std::size_t i : fit)
        counts[class_code(ds.labels[i])] += 1.0;
    std::array<double, kClassCount> w{};
    const double total = static_cast<double>(fit.size());
    for (std::size_t c = 0; c < static_cast<std::size_t>(kClassCount); ++c)
        w[c] = counts[c] > 0.0 ? total / (static_cast<double>(kClassCount) * counts[c]) : 0.0;
    return w;
}

/** Mini-batch training over the manifest's fit split with per-epoch
 *  shuffling. Records the model's batch loss at every iteration and keeps
 *  the checkpoint with the lowest validation loss. Throws DivergenceError
 *  on a non-finite loss, naming the iteration. */
inline TrainReport train(SmlpModel model, const OptimizerSpec& spec, const LabeledDataset& ds,
                         const SplitManifest& manifest, const TrainConfig& cfg) {
    validate_optimizer_spec(spec);
    TrainReport report;
    report.curve.optimizer = optim_method_name(spec.method);
    report.curve.fraction =
        ds.size() ? static_cast<double>(manifest.fit.size()) / static_cast<double>(ds.size()) : 0.0;

    std::array<double, kClassCount> weights{};
    std::span<const double> wspan{};
    if (cfg.weighted) {
        weights = class_weights_for(ds, manifest.fit);
        wspan = weights;
    }

    OptimizerState state = init_state(model);
    std::mt19937_64 shuffle_rng(cfg.shuffle_seed);
    std::vector<std::size_t> order(manifest.fit.begin(), manifest.fit.end());

    double lr_scale = 1.0;
    int rising = 0;
    double prev_loss = std::numeric_limits<double>::infinity();
    std::size_t iteration = 0;
    const std::size_t iters_per_epoch =
        order.empty() ? 0 : (order.size() + cfg.batch_size - 1) / cfg.batch_size;

    report.best_model = model;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        detail::shuffle_indices(order, shuffle_rng);
        for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
            const std::size_t take = std::min(cfg.batch_size, order.size() - at);
            const std::span<const std::size_t> batch(order.data() + at, take);
            const Matrix X = detail::rows_to_matrix(ds, batch);
            const std::vector<EventClass> y = detail::rows_to_labels(ds, batch);

            const ForwardCache cache = forward(model, X);
            const double loss = mean_cross_entropy(cache, y, wspan);
            if (!std::isfinite(loss))
                throw DivergenceError("non-finite training loss at iteration " +
                                      std::to_string(iteration));

            GradientSet grads;
            if (needs_lookahead(spec)) {
                const SmlpModel ahead = lookahead_model(model, state, spec);
                const ForwardCache acache = forward(ahead, X);
                grads = backward(ahead, acache, y, wspan);
            } else {
                grads = backward(model, cache, y, wspan);
            }

            if (cfg.safeguard) {
                rising = loss > prev_loss ? rising + 1 : 0;
                if (rising >= 10) {
                    lr_scale *= 0.5;
                    rising = 0;
                }
                prev_loss = loss;
            }

            apply_update(spec, state, model, grads, lr_scale);
            for (std::size_t rep = 1; rep < cfg.inner_k; ++rep)
                for (std::size_t u = 0; u < model.units.size(); ++u)
                    apply_update(spec, state, model, detail::mask_to_unit(grads, u), lr_scale);

            report.curve.losses.push_back(loss);
            ++iteration;
        }

        if (!manifest.validation.empty()) {
            const double val = detail::split_loss(model, ds, manifest.validation);
            report.val_losses.push_back(val);
            if (val < report.best_val_loss) {
                report.best_val_loss = val;
                report.best_epoch = epoch;
                report.best_model = model;
            }
        } else {
            report.best_model = model;
        }
    }

    if (iters_per_epoch > 0 && !report.curve.losses.empty()) {
        const std::size_t last = std::min(iters_per_epoch, report.curve.losses.size());
        double sum = 0.0;
        for (std::size_t i = report.curve.losses.size() - last; i < report.curve.losses.size(); ++i)
            sum += report.curve.losses[i];
        report.curve.final_loss = sum / static_cast<double>(last);
    }
    report.model = std::move(model);
    return report;
}

/* Evaluation
 * ----------
 */

struct EvalReport {
    std::array<double, kClassCount> precision{};
    std::array<double, kClassCount> average_precision{};
    double map = 0.0;
    double macro_precision = 0.0;
    double accuracy = 0.0;
    std::array<std::array<std::int64_t, kClassCount>, kClassCount> confusion{}; // [true][pred]
    std::size_t test_count = 0;
};

/** Metrics from per-instance class scores. Row r of `scores` holds the six
 *  class scores of test instance r. Predictions take the argmax with ties
 *  toward the lowest class code; AP ranks all instances per class (stable
 *  on ties) and averages precision at every true-class hit. */
inline EvalReport evaluate_scores(const Matrix& scores, std::span<const EventClass> labels) {
    if (scores.rows == 0)
        throw DataError("evaluate: empty test split");
    if (scores.rows != labels.size() || scores.cols != static_cast<std::size_t>(kClassCount))
        throw std::invalid_argument("evaluate: score/label shape mismatch");

    EvalReport r;
    r.test_count = scores.rows;
    for (std::size_t i = 0; i < scores.rows; ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < scores.cols; ++c)
            if (scores(i, c) > scores(i, best))
                best = c;
        ++r.confusion[class_code(labels[i])][best];
    }

    std::int64_t correct = 0;
    for (std::size_t c = 0; c < static_cast<std::size_t>(kClassCount); ++c) {
        correct += r.confusion[c][c];
        std::int64_t predicted = 0;
        for (std::size_t t = 0; t < static_cast<std::size_t>(kClassCount); ++t)
            predicted += r.confusion[t][c];
        r.precision[c] =
            predicted > 0 ? static_cast<double>(r.confusion[c][c]) / static_cast<double>(predicted)
                          : 0.0;
        r.macro_precision += r.precision[c];
    }
    r.macro_precision /= static_cast<double>(kClassCount);
    r.accuracy = static_cast<double>(correct) / static_cast<double>(r.test_count);

    std::vector<std::size_t> rank(scores.rows);
    for (std::size_t c = 0; c < static_cast<std::size_t>(kClassCount); ++c) {
        std::iota(rank.begin(), rank.end(), std::size_t{0});
        std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
            return scores(a, c) > scores(b, c);
        });
        std::size_t hits = 0;
        double ap = 0.0;
        for (std::size_t k = 0; k < rank.size(); ++k)
            if (class_code(labels[rank[k]]) == c) {
                ++hits;
                ap += static_cast<double>(hits) / static_cast<double>(k + 1);
            }
        r.average_precision[c] = hits ? ap / static_cast<double>(hits) : 0.0;
        r.map += r.average_precision[c];
    }
    r.map /= static_cast<double>(kClassCount);
    return r;
}

inline EvalReport evaluate(const SmlpModel& model, const LabeledDataset& ds,
                           std::span<const std::size_t> test_idx) {
    std::vector<FeatureVector> rows;
    rows.reserve(test_idx.size());
    for (std::size_t i : test_idx)
        rows.push_back(ds.features[i]);
    const Matrix probs = predict_probs(model, rows);
    return evaluate_scores(probs, detail::rows_to_labels(ds, test_idx));
}

/* Gaussian Naive Bayes baseline
 * -----------------------------
 */

struct GaussianNb {
    std::array<double, kClassCount> prior{}; // 0 for classes absent from training
    std::array<std::array<double, kFeatureCount>, kClassCount> mean{};
    std::array<std::array<double, kFeatureCount>, kClassCount> var{}; // floored at 1e-9
};

/** Per-class feature moments over the given rows. Classes absent from the
 *  rows keep prior 0 and are never predicted; a class with exactly one
 *  member is an error. */
inline GaussianNb fit_gaussian_nb(const LabeledDataset& ds, std::span<const std::size_t> idx) {
    if (idx.empty())
        throw DataError("fit_gaussian_nb: empty training split");
    GaussianNb nb;
    std::array<std::size_t, kClassCount> count{};
    for (std::size_t i : idx)
        ++count[class_code(ds.labels[i])];
    for (std::size_t c = 0; c < static_cast<std::size_t>(kClassCount); ++c)
        if (count[c] == 1)
            throw DataError(std::string("fit_gaussian_nb: class ") +
                            class_name(*class_from_code(static_cast<int>(c))) +
                            " has fewer than 2 training members");

    for (std::size_t i : idx) {
        const std::size_t c = class_code(ds.labels[i]);
        for (std::size_t f = 0; f < kFeatureCount; ++f)
            nb.mean[c][f] += ds.features[i][f];
    }
    for (std::size_t c = 0; c < static_cast<std::size_t>(kClassCount); ++c) {
        if (!count[c])
            continue;
        nb.prior[c] = static_cast<double>(count[c]) / static_cast<double>(idx.size());
        for (std::size_t f = 0; f < kFeatureCount; ++f)
            nb.mean[c][f] /= static_cast<double>(count[c]);
    }
    for (std::size_t i : idx) {
        const std::size_t c = class_code(ds.labels[i]);
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            const double d = ds.features[i][f] - nb.mean[c][f];
            nb.var[c][f] += d * d;
        }
    }
    for (std::size_t c = 0; c < static_cast<std::size_t>(kClassCount); ++c) {
        if (!count[c])
            continue;
        for (std::size_t f = 0; f < kFeatureCount; ++f)
            nb.var[c][f] = std::max(nb.var[c][f] / static_cast<double>(count[c]), 1e-9);
    }
    return nb;
}

/// Normalized posterior over classes; absent classes get exactly 0.
inline std::array<double, kClassCount> nb_posterior(const GaussianNb& nb,
                                                    const FeatureVector& fv) {
    std::array<double, kClassCount> logp{};
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < static_cast<std::size_t>(kClassCount); ++c) {
        if (nb.prior[c] <= 0.0) {
            logp[c] = -std::numeric_limits<double>::infinity();
            continue;
        }
        double lp = std::log(nb.prior[c]);
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            const double v = nb.var[c][f];
            const double d = fv[f] - nb.mean[c][f];
            lp += -0.5 * std::log(6.283185307179586 * v) - d * d / (2.0 * v);
        }
        logp[c] = lp;
        best = std::max(best, lp);
    }
    std::array<double, kClassCount> post{};
    double sum = 0.0;
    for (std::size_t c = 0; c < static_cast<std::size_t>(kClassCount); ++c) {
        post[c] = std::isfinite(logp[c]) ? std::exp(logp[c] - best) : 0.0;
        sum += post[c];
    }
    for (double& p : post)
        p /= sum;
    return post;
}

inline EventClass predict_nb(const GaussianNb& nb, const FeatureVector& fv) {
    const auto post = nb_posterior(nb, fv);
    std::size_t bestc = 0;
    for (std::size_t c = 1; c < post.size(); ++c)
        if (post[c] > post[bestc])
            bestc = c;
    return *class_from_code(static_cast<int>(bestc));
}

inline EvalReport evaluate_nb(const GaussianNb& nb, const LabeledDataset& ds,
                              std::span<const std::size_t> test_idx) {
    Matrix scores(test_idx.size(), kClassCount);
    for (std::size_t r = 0; r < test_idx.size(); ++r) {
        const auto post = nb_posterior(nb, ds.features[test_idx[r]]);
        std::copy(post.begin(), post.end(), scores.row(r));
    }
    return evaluate_scores(scores, detail::rows_to_labels(ds, test_idx));
}

/* The optimizer-comparison experiment
 * -----------------------------------
 * For every (training fraction, method) cell: identical initial weights,
 * identical batch order, one convergence curve. Fractions are shares of
 * the whole dataset drawn from a fixed shuffled pool.
 */

struct CompareOptimizersConfig {
    std::vector<double> fractions{0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
    std::vector<OptimizerSpec> specs; // empty = all seven at defaults
    UnitShapes shapes = default_unit_shapes();
    std::size_t batch_size = 32;
    std::size_t epochs = 30;
    std::uint64_t seed = 11;
};

inline std::vector<ConvergenceCurve> compare_optimizers(const LabeledDataset& ds,
                                                        const CompareOptimizersConfig& cc) {
    std::vector<OptimizerSpec> specs = cc.specs;
    if (specs.empty())
        for (const OptimMethod m : all_optim_methods()) {
            OptimizerSpec s;
            s.method = m;
            specs.push_back(s);
        }

    std::vector<std::size_t> pool(ds.size());
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    std::mt19937_64 g(cc.seed);
    detail::shuffle_indices(pool, g);

    std::vector<ConvergenceCurve> curves;
    for (const double fraction : cc.fractions) {
        const std::size_t take = static_cast<std::size_t>(
            std::floor(fraction * static_cast<double>(ds.size())));
        if (take < 1 || take > ds.size())
            throw DataError("compare_optimizers: dataset too small for fraction " +
                            std::to_string(fraction));
        SplitManifest m;
        m.seed = cc.seed;
        m.fit.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));

        TrainConfig tc;
        tc.batch_size = cc.batch_size;
        tc.epochs = cc.epochs;
        tc.shuffle_seed = cc.seed + static_cast<std::uint64_t>(fraction * 1000.0);

        const SmlpModel init = init_model(cc.shapes, cc.seed);
        for (const OptimizerSpec& spec : specs) {
            TrainReport r = train(init, spec, ds, m, tc);
            r.curve.fraction = fraction;
            curves.push_back(std::move(r.curve));
        }
    }
    return curves;
}

/* The model-comparison experiment
 * -------------------------------
 * Gaussian NB, a single MLP unit and the default S-MLP stack, all trained
 * and evaluated on the identical split. Network models are evaluated at
 * their best-validation checkpoints.
 */

struct CompareModelsConfig {
    UnitShapes smlp_shapes = default_unit_shapes();
    UnitShapes mlp_shapes = single_mlp_shapes();
    OptimizerSpec optimizer{}; // Adam defaults
    TrainConfig train{};
    std::uint64_t seed = 7;
    bool stratified = false;
};

struct ModelComparison {
    EvalReport nb;
    EvalReport mlp;
    EvalReport smlp;
    SplitManifest manifest;
};

inline ModelComparison compare_models(const LabeledDataset& ds, const CompareModelsConfig& cc) {
    ModelComparison out;
    out.manifest = split_dataset(ds, cc.seed, cc.stratified);

    const GaussianNb nb = fit_gaussian_nb(ds, out.manifest.fit);
    out.nb = evaluate_nb(nb, ds, out.manifest.test);

    TrainConfig tc = cc.train;
    tc.shuffle_seed = cc.seed;

    const TrainReport mlp_report =
        train(init_model(cc.mlp_shapes, cc.seed), cc.optimizer, ds, out.manifest, tc);
    out.mlp = evaluate(mlp_report.best_model, ds, out.manifest.test);

    const TrainReport smlp_report =
        train(init_model(cc.smlp_shapes, cc.seed), cc.optimizer, ds, out.manifest, tc);
    out.smlp = evaluate(smlp_report.best_model, ds, out.manifest.test);
    return out;
}

/* CSV emission
 * ------------
 * All reals are written with %.17g so reruns of a deterministic pipeline
 * produce byte-identical files.
 */

inline void write_curve_csv(std::ostream& os, const ConvergenceCurve& curve) {
    os << "iteration,loss\n";
    for (std::size_t i = 0; i < curve.losses.size(); ++i) {
        os << i << ',';
        detail::write_real(os, curve.losses[i]);
        os << '\n';
    }
    if (!os)
        throw DataError("failed writing curve CSV");
}

inline void write_metrics_csv(std::ostream& os,
                              std::span<const std::pair<std::string, EvalReport>> reports) {
    os << "model,class,precision,AP,MAP,macro_precision\n";
    for (const auto& [name, r] : reports)
        for (const EventClass c : all_classes()) {
            os << name << ',' << class_name(c) << ',';
            detail::write_real(os, r.precision[class_code(c)]);
            os << ',';
            detail::write_real(os, r.average_precision[class_code(c)]);
            os << ',';
            detail::write_real(os, r.map);
            os << ',';
            detail::write_real(os, r.macro_precision);
            os << '\n';
        }
    if (!os)
        throw DataError("failed writing metrics CSV");
}

inline void write_confusion_csv(std::ostream& os, const EvalReport& r) {
    os << "true\\pred";
    for (const EventClass c : all_classes())
        os << ',' << class_name(c);
    os << '\n';
    for (const EventClass t : all_classes()) {
        os << class_name(t);
        for (const EventClass p : all_classes())
            os << ',' << r.confusion[class_code(t)][class_code(p)];
        os << '\n';
    }
    if (!os)
        throw DataError("failed writing confusion CSV");
}

} // namespace smlp
