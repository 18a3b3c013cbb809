#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "smlp/harness.hpp"

using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using namespace smlp;

namespace {

// Uniform [0,1) matching the library's GaussDraw bit recipe, so fixtures are
// stable across standard libraries.
double unit_draw(std::mt19937_64& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

/// counts[c] instances of class c. With offset > 0 feature c carries a class
/// bump, making the set linearly separable and Gaussian-friendly.
LabeledDataset make_ds(const std::array<std::size_t, 6>& counts, std::uint64_t seed,
                       double offset = 0.0) {
    LabeledDataset ds;
    std::mt19937_64 g(seed);
    for (std::size_t c = 0; c < 6; ++c)
        for (std::size_t i = 0; i < counts[c]; ++i) {
            FeatureVector fv;
            for (std::size_t f = 0; f < kFeatureCount; ++f)
                fv[f] = unit_draw(g);
            fv[c] += offset;
            ds.features.push_back(fv);
            ds.labels.push_back(*class_from_code(static_cast<int>(c)));
        }
    return ds;
}

std::vector<std::size_t> sorted_union(const SplitManifest& m) {
    std::vector<std::size_t> all;
    all.insert(all.end(), m.test.begin(), m.test.end());
    all.insert(all.end(), m.validation.begin(), m.validation.end());
    all.insert(all.end(), m.fit.begin(), m.fit.end());
    std::sort(all.begin(), all.end());
    return all;
}

double val_loss_of(const SmlpModel& model, const LabeledDataset& ds,
                   const std::vector<std::size_t>& idx) {
    const Matrix X = smlp::detail::rows_to_matrix(ds, idx);
    const std::vector<EventClass> y = smlp::detail::rows_to_labels(ds, idx);
    return mean_cross_entropy(forward(model, X), y);
}

} // namespace

TEST_CASE("split sizes follow the floor rules") {
    auto sizes = [](std::size_t n) {
        std::array<std::size_t, 6> counts{};
        counts[5] = n;
        const LabeledDataset ds = make_ds(counts, 1);
        const SplitManifest m = split_dataset(ds, 42);
        return std::array<std::size_t, 3>{m.test.size(), m.validation.size(), m.fit.size()};
    };

    REQUIRE(sizes(100) == std::array<std::size_t, 3>{30, 7, 63});
    REQUIRE(sizes(10) == std::array<std::size_t, 3>{3, 0, 7});
    REQUIRE(sizes(10370) == std::array<std::size_t, 3>{3111, 725, 6534});
}

TEST_CASE("split is a deterministic partition") {
    const LabeledDataset ds = make_ds({10, 10, 10, 10, 5, 5}, 9);
    const SplitManifest a = split_dataset(ds, 7);
    const SplitManifest b = split_dataset(ds, 7);
    const SplitManifest c = split_dataset(ds, 8);

    REQUIRE(a.seed == 7);
    REQUIRE_FALSE(a.stratified);
    REQUIRE(a.test == b.test);
    REQUIRE(a.validation == b.validation);
    REQUIRE(a.fit == b.fit);
    REQUIRE(a.test != c.test);

    std::vector<std::size_t> expect(ds.size());
    std::iota(expect.begin(), expect.end(), std::size_t{0});
    REQUIRE(sorted_union(a) == expect);
}

TEST_CASE("split rejects tiny datasets") {
    const LabeledDataset ds = make_ds({9, 0, 0, 0, 0, 0}, 1);
    REQUIRE_THROWS_AS(split_dataset(ds, 1), DataError);
}

TEST_CASE("stratified split applies the rule inside every class") {
    const LabeledDataset ds = make_ds({10, 20, 3, 2, 5, 0}, 3);
    const SplitManifest m = split_dataset(ds, 5, true);
    REQUIRE(m.stratified);

    // Per-class expectations: 10 -> 3/0/7, 20 -> 6/1/13, 3 -> 0/0/3,
    // 2 -> 0/0/2, 5 -> 1/0/4, absent class skipped.
    REQUIRE(m.test.size() == 10);
    REQUIRE(m.validation.size() == 1);
    REQUIRE(m.fit.size() == 29);

    auto count_class = [&](const std::vector<std::size_t>& part, std::size_t c) {
        return static_cast<std::size_t>(std::count_if(part.begin(), part.end(), [&](std::size_t i) {
            return class_code(ds.labels[i]) == c;
        }));
    };
    const std::array<std::size_t, 6> test_want{3, 6, 0, 0, 1, 0};
    const std::array<std::size_t, 6> val_want{0, 1, 0, 0, 0, 0};
    const std::array<std::size_t, 6> fit_want{7, 13, 3, 2, 4, 0};
    for (std::size_t c = 0; c < 6; ++c) {
        REQUIRE(count_class(m.test, c) == test_want[c]);
        REQUIRE(count_class(m.validation, c) == val_want[c]);
        REQUIRE(count_class(m.fit, c) == fit_want[c]);
    }

    std::vector<std::size_t> expect(ds.size());
    std::iota(expect.begin(), expect.end(), std::size_t{0});
    REQUIRE(sorted_union(m) == expect);
}

TEST_CASE("stratified split names a one-member class") {
    const LabeledDataset ds = make_ds({10, 1, 0, 0, 0, 0}, 3);
    REQUIRE_THROWS_WITH(split_dataset(ds, 1, true),
                        ContainsSubstring("class breaking has fewer than 2 members"));
    REQUIRE_NOTHROW(split_dataset(ds, 1, false));
}

TEST_CASE("train config reads keys and validates") {
    const TrainConfig dflt = train_config_from_config(Config{});
    REQUIRE(dflt.batch_size == 32);
    REQUIRE(dflt.epochs == 200);
    REQUIRE(dflt.shuffle_seed == 0);
    REQUIRE_FALSE(dflt.safeguard);
    REQUIRE_FALSE(dflt.weighted);
    REQUIRE(dflt.inner_k == 1);

    const Config cfg = Config::from_string("train.batch = 16\n"
                                           "train.epochs = 5\n"
                                           "train.shuffle_seed = 99\n"
                                           "train.safeguard = true\n"
                                           "train.weighted = true\n"
                                           "train.inner_k = 3\n");
    const TrainConfig tc = train_config_from_config(cfg);
    REQUIRE(tc.batch_size == 16);
    REQUIRE(tc.epochs == 5);
    REQUIRE(tc.shuffle_seed == 99);
    REQUIRE(tc.safeguard);
    REQUIRE(tc.weighted);
    REQUIRE(tc.inner_k == 3);

    REQUIRE_THROWS_AS(train_config_from_config(Config::from_string("train.batch = 0")),
                      ConfigError);
    REQUIRE_THROWS_AS(train_config_from_config(Config::from_string("train.inner_k = 0")),
                      ConfigError);
}

TEST_CASE("class weights are inverse-frequency, zero for absent classes") {
    const LabeledDataset ds = make_ds({6, 2, 2, 1, 1, 0}, 4);
    std::vector<std::size_t> fit(ds.size());
    std::iota(fit.begin(), fit.end(), std::size_t{0});
    const auto w = class_weights_for(ds, fit);
    REQUIRE(w[0] == 12.0 / 36.0);
    REQUIRE(w[1] == 1.0);
    REQUIRE(w[2] == 1.0);
    REQUIRE(w[3] == 2.0);
    REQUIRE(w[4] == 2.0);
    REQUIRE(w[5] == 0.0);
}

TEST_CASE("training on separable data: curve shape and checkpointing") {
    const LabeledDataset ds = make_ds({7, 7, 7, 7, 6, 6}, 11, 4.0);
    const SplitManifest m = split_dataset(ds, 1);
    REQUIRE(m.fit.size() == 26);
    REQUIRE(m.validation.size() == 2);

    OptimizerSpec spec;
    spec.method = OptimMethod::Adam;
    spec.alpha = 0.01;

    TrainConfig tc;
    tc.batch_size = 8;
    tc.epochs = 15;
    tc.shuffle_seed = 3;

    const SmlpModel init = init_model({{28, 6}}, 2);
    const TrainReport r = train(init, spec, ds, m, tc);

    REQUIRE(r.curve.optimizer == "adam");
    REQUIRE(r.curve.fraction == 26.0 / 40.0);
    // ceil(26 / 8) = 4 iterations per epoch.
    REQUIRE(r.curve.losses.size() == 15 * 4);
    double tail = 0.0;
    for (std::size_t i = r.curve.losses.size() - 4; i < r.curve.losses.size(); ++i)
        tail += r.curve.losses[i];
    REQUIRE(r.curve.final_loss == tail / 4.0);
    REQUIRE(r.curve.final_loss < r.curve.losses.front());

    REQUIRE(r.val_losses.size() == 15);
    const double best = *std::min_element(r.val_losses.begin(), r.val_losses.end());
    REQUIRE(r.best_val_loss == best);
    const std::size_t first_best = static_cast<std::size_t>(
        std::find(r.val_losses.begin(), r.val_losses.end(), best) - r.val_losses.begin());
    REQUIRE(r.best_epoch == first_best);
    // The stored checkpoint reproduces its validation loss bit for bit.
    REQUIRE(val_loss_of(r.best_model, ds, m.validation) == r.best_val_loss);

    const EvalReport fit_eval = evaluate(r.model, ds, m.fit);
    REQUIRE(fit_eval.accuracy >= 0.9);
}

TEST_CASE("empty validation keeps the last model as best") {
    const LabeledDataset ds = make_ds({5, 5, 5, 5, 0, 0}, 21, 3.0);
    SplitManifest m = split_dataset(ds, 2);
    m.validation.clear();

    OptimizerSpec spec;
    spec.method = OptimMethod::ConstantSGD;
    spec.alpha = 0.05;
    TrainConfig tc;
    tc.batch_size = 4;
    tc.epochs = 3;
    tc.shuffle_seed = 9;

    const TrainReport r = train(init_model({{28, 6}}, 3), spec, ds, m, tc);
    REQUIRE(r.val_losses.empty());
    REQUIRE(r.best_val_loss == std::numeric_limits<double>::infinity());

    const Matrix X = smlp::detail::rows_to_matrix(ds, m.fit);
    const ForwardCache a = forward(r.model, X);
    const ForwardCache b = forward(r.best_model, X);
    REQUIRE(a.act.back().a == b.act.back().a);
}

TEST_CASE("inner refreshes change the trajectory but not the first loss") {
    const LabeledDataset ds = make_ds({8, 8, 8, 8, 4, 4}, 31, 2.0);
    const SplitManifest m = split_dataset(ds, 3);

    OptimizerSpec spec;
    spec.method = OptimMethod::Adam;
    spec.alpha = 0.01;
    TrainConfig tc;
    tc.batch_size = 8;
    tc.epochs = 2;
    tc.shuffle_seed = 5;

    const SmlpModel init = init_model(default_unit_shapes(), 4);
    const TrainReport plain = train(init, spec, ds, m, tc);
    tc.inner_k = 2;
    const TrainReport inner = train(init, spec, ds, m, tc);

    REQUIRE(plain.curve.losses.front() == inner.curve.losses.front());
    REQUIRE(plain.curve.losses != inner.curve.losses);
}

TEST_CASE("class weighting changes the recorded losses") {
    const LabeledDataset ds = make_ds({12, 2, 2, 2, 2, 2}, 41, 2.0);
    const SplitManifest m = split_dataset(ds, 4);

    OptimizerSpec spec;
    spec.method = OptimMethod::ConstantSGD;
    spec.alpha = 0.05;
    TrainConfig tc;
    tc.batch_size = 8;
    tc.epochs = 1;
    tc.shuffle_seed = 6;

    const SmlpModel init = init_model({{28, 6}}, 5);
    const TrainReport plain = train(init, spec, ds, m, tc);
    tc.weighted = true;
    const TrainReport weighted = train(init, spec, ds, m, tc);
    REQUIRE(plain.curve.losses.front() != weighted.curve.losses.front());
}

TEST_CASE("divergent training names the iteration") {
    const LabeledDataset ds = make_ds({5, 5, 5, 5, 0, 0}, 51, 1.0);
    const SplitManifest m = split_dataset(ds, 5);

    OptimizerSpec spec;
    spec.method = OptimMethod::ConstantSGD;
    spec.alpha = 1e20;
    TrainConfig tc;
    tc.batch_size = 8;
    tc.epochs = 5;
    tc.shuffle_seed = 7;

    REQUIRE_THROWS_AS(train(init_model({{28, 6}}, 6), spec, ds, m, tc), DivergenceError);
    REQUIRE_THROWS_WITH(train(init_model({{28, 6}}, 6), spec, ds, m, tc),
                        ContainsSubstring("non-finite training loss at iteration"));
}

TEST_CASE("the safeguard halves the rate after a rising streak") {
    // Heavy momentum on a tiny fit split oscillates with long rising phases,
    // which is exactly what the safeguard watches for. Identical runs up to
    // the first halving, different after it.
    const LabeledDataset ds = make_ds({5, 5, 0, 0, 0, 0}, 61);
    SplitManifest m;
    m.fit.resize(ds.size());
    std::iota(m.fit.begin(), m.fit.end(), std::size_t{0});

    OptimizerSpec spec;
    spec.method = OptimMethod::ConstantMomentum;
    spec.alpha = 2.0;
    spec.mu = 0.95;
    TrainConfig tc;
    tc.batch_size = ds.size();
    tc.epochs = 120;
    tc.shuffle_seed = 8;

    const SmlpModel init = init_model({{28, 6}}, 7);
    const TrainReport plain = train(init, spec, ds, m, tc);
    tc.safeguard = true;
    const TrainReport guarded = train(init, spec, ds, m, tc);

    REQUIRE(guarded.curve.losses.size() == plain.curve.losses.size());
    for (double l : guarded.curve.losses)
        REQUIRE(std::isfinite(l));
    // A halving happened and had an effect.
    REQUIRE(guarded.curve.losses != plain.curve.losses);
    // Losses are recorded before updates, so the first 11 must agree.
    for (std::size_t i = 0; i < 11; ++i)
        REQUIRE(guarded.curve.losses[i] == plain.curve.losses[i]);
}

TEST_CASE("evaluate_scores on a perfect diagonal") {
    Matrix scores(6, 6);
    std::vector<EventClass> labels;
    for (std::size_t i = 0; i < 6; ++i) {
        scores(i, i) = 1.0;
        labels.push_back(*class_from_code(static_cast<int>(i)));
    }
    const EvalReport r = evaluate_scores(scores, labels);
    REQUIRE(r.test_count == 6);
    REQUIRE(r.accuracy == 1.0);
    REQUIRE(r.map == 1.0);
    REQUIRE(r.macro_precision == 1.0);
    for (std::size_t c = 0; c < 6; ++c) {
        REQUIRE(r.precision[c] == 1.0);
        REQUIRE(r.average_precision[c] == 1.0);
        for (std::size_t p = 0; p < 6; ++p)
            REQUIRE(r.confusion[c][p] == (c == p ? 1 : 0));
    }
}

TEST_CASE("evaluate_scores tie handling is stable and lowest-code") {
    Matrix scores(6, 6); // all zeros
    std::vector<EventClass> labels;
    for (std::size_t i = 0; i < 6; ++i)
        labels.push_back(*class_from_code(static_cast<int>(i)));
    const EvalReport r = evaluate_scores(scores, labels);

    // Argmax ties resolve to class 0.
    for (std::size_t t = 0; t < 6; ++t)
        REQUIRE(r.confusion[t][0] == 1);
    REQUIRE(r.accuracy == 1.0 / 6.0);
    REQUIRE(r.precision[0] == 1.0 / 6.0);
    for (std::size_t c = 1; c < 6; ++c)
        REQUIRE(r.precision[c] == 0.0); // zero predicted, guarded to 0
    REQUIRE_THAT(r.macro_precision, WithinRel(1.0 / 36.0, 1e-15));

    // Stable sort keeps row order on tied scores, so class c's single
    // positive sits at rank c + 1.
    for (std::size_t c = 0; c < 6; ++c)
        REQUIRE_THAT(r.average_precision[c], WithinRel(1.0 / (c + 1.0), 1e-15));
    REQUIRE_THAT(r.map, WithinRel(49.0 / 120.0, 1e-15));
}

TEST_CASE("evaluate_scores average precision by hand") {
    Matrix scores(4, 6);
    const double col0[4] = {0.9, 0.8, 0.7, 0.6};
    const double col1[4] = {0.1, 0.95, 0.2, 0.85};
    for (std::size_t i = 0; i < 4; ++i) {
        scores(i, 0) = col0[i];
        scores(i, 1) = col1[i];
    }
    const std::vector<EventClass> labels{EventClass::Anticipated, EventClass::Breaking,
                                         EventClass::Anticipated, EventClass::Breaking};
    const EvalReport r = evaluate_scores(scores, labels);
    REQUIRE(r.accuracy == 1.0);
    REQUIRE(r.confusion[0][0] == 2);
    REQUIRE(r.confusion[1][1] == 2);
    REQUIRE_THAT(r.average_precision[0], WithinRel(5.0 / 6.0, 1e-15));
    REQUIRE(r.average_precision[1] == 1.0);
    for (std::size_t c = 2; c < 6; ++c)
        REQUIRE(r.average_precision[c] == 0.0); // no positives
    REQUIRE_THAT(r.map, WithinRel(11.0 / 36.0, 1e-15));
    REQUIRE_THAT(r.macro_precision, WithinRel(1.0 / 3.0, 1e-15));
}

TEST_CASE("evaluate_scores rejects empty and mismatched input") {
    REQUIRE_THROWS_WITH(evaluate_scores(Matrix(0, 6), std::vector<EventClass>{}),
                        ContainsSubstring("evaluate: empty test split"));
    const std::vector<EventClass> three{EventClass::Meme, EventClass::Meme, EventClass::Meme};
    REQUIRE_THROWS_AS(evaluate_scores(Matrix(4, 6), three), std::invalid_argument);
    const std::vector<EventClass> four(4, EventClass::Meme);
    REQUIRE_THROWS_AS(evaluate_scores(Matrix(4, 5), four), std::invalid_argument);
}

TEST_CASE("gaussian NB moments, floor, and absent classes") {
    // Two classes, everything else absent. Feature 0 separates them; all
    // other features are constant zero so they cancel between classes.
    LabeledDataset ds;
    auto add = [&](EventClass c, double f0) {
        FeatureVector fv;
        fv[0] = f0;
        ds.features.push_back(fv);
        ds.labels.push_back(c);
    };
    add(EventClass::Anticipated, 1.0);
    add(EventClass::Anticipated, 3.0);
    add(EventClass::Breaking, 5.0);
    add(EventClass::Breaking, 5.0);

    std::vector<std::size_t> idx{0, 1, 2, 3};
    const GaussianNb nb = fit_gaussian_nb(ds, idx);
    REQUIRE(nb.prior[0] == 0.5);
    REQUIRE(nb.prior[1] == 0.5);
    REQUIRE(nb.mean[0][0] == 2.0);
    REQUIRE(nb.var[0][0] == 1.0);  // population variance
    REQUIRE(nb.mean[1][0] == 5.0);
    REQUIRE(nb.var[1][0] == 1e-9); // zero variance floored
    for (std::size_t c = 2; c < 6; ++c)
        REQUIRE(nb.prior[c] == 0.0);

    FeatureVector probe;
    probe[0] = 1.0;
    const auto post = nb_posterior(nb, probe);
    double sum = 0.0;
    for (double p : post)
        sum += p;
    REQUIRE_THAT(sum, WithinAbs(1.0, 1e-12));
    for (std::size_t c = 2; c < 6; ++c)
        REQUIRE(post[c] == 0.0); // absent classes exactly zero
    REQUIRE(post[0] > 0.9999);
    REQUIRE(predict_nb(nb, probe) == EventClass::Anticipated);

    probe[0] = 5.0;
    REQUIRE(predict_nb(nb, probe) == EventClass::Breaking);
}

TEST_CASE("gaussian NB rejects bad training splits") {
    const LabeledDataset ds = make_ds({3, 0, 1, 0, 0, 0}, 71);
    const std::vector<std::size_t> idx{0, 1, 2, 3};
    REQUIRE_THROWS_WITH(fit_gaussian_nb(ds, idx),
                        ContainsSubstring("class commemorative has fewer than 2"));
    REQUIRE_THROWS_WITH(fit_gaussian_nb(ds, std::vector<std::size_t>{}),
                        ContainsSubstring("empty training split"));
}

TEST_CASE("gaussian NB learns a separable problem") {
    const LabeledDataset ds = make_ds({8, 8, 8, 8, 8, 8}, 81, 4.0);
    const SplitManifest m = split_dataset(ds, 6);
    const GaussianNb nb = fit_gaussian_nb(ds, m.fit);
    const EvalReport r = evaluate_nb(nb, ds, m.test);
    REQUIRE(r.test_count == m.test.size());
    REQUIRE(r.accuracy >= 0.8);
}

TEST_CASE("compare_optimizers runs every method from identical starts") {
    const LabeledDataset ds = make_ds({10, 10, 10, 10, 10, 10}, 91, 3.0);

    CompareOptimizersConfig cc;
    cc.fractions = {0.25, 0.5};
    cc.batch_size = 16;
    cc.epochs = 2;
    cc.seed = 17;
    cc.shapes = {{28, 6}};

    const std::vector<ConvergenceCurve> curves = compare_optimizers(ds, cc);
    REQUIRE(curves.size() == 14); // 2 fractions x 7 methods

    const auto methods = all_optim_methods();
    for (std::size_t f = 0; f < 2; ++f) {
        const double fraction = cc.fractions[f];
        // floor(0.25*60) = 15 -> 1 iteration/epoch; floor(0.5*60) = 30 -> 2.
        const std::size_t want_losses = f == 0 ? 2 : 4;
        for (std::size_t k = 0; k < 7; ++k) {
            const ConvergenceCurve& c = curves[f * 7 + k];
            REQUIRE(c.optimizer == optim_method_name(methods[k]));
            REQUIRE(c.fraction == fraction);
            REQUIRE(c.losses.size() == want_losses);
            // Identical init and batch order: the first recorded loss is
            // computed before any update and must match bit for bit.
            REQUIRE(c.losses.front() == curves[f * 7].losses.front());
        }
    }
}

TEST_CASE("compare_optimizers honors explicit specs and rejects bad fractions") {
    const LabeledDataset ds = make_ds({5, 5, 5, 5, 0, 0}, 101, 2.0);

    CompareOptimizersConfig cc;
    cc.fractions = {0.5};
    cc.epochs = 1;
    cc.batch_size = 10;
    cc.shapes = {{28, 6}};
    OptimizerSpec a;
    a.method = OptimMethod::ConstantSGD;
    a.alpha = 0.1;
    OptimizerSpec b;
    b.method = OptimMethod::Adam;
    cc.specs = {a, b};
    REQUIRE(compare_optimizers(ds, cc).size() == 2);

    cc.fractions = {1.5};
    REQUIRE_THROWS_AS(compare_optimizers(ds, cc), DataError);
    cc.fractions = {0.001};
    REQUIRE_THROWS_AS(compare_optimizers(ds, cc), DataError);
}

TEST_CASE("compare_models is deterministic and shares one split") {
    const LabeledDataset ds = make_ds({10, 10, 10, 10, 10, 10}, 111, 3.0);

    CompareModelsConfig cc;
    cc.seed = 13;
    cc.train.epochs = 2;
    cc.train.batch_size = 16;
    cc.smlp_shapes = {{28, 8}, {8, 6}};
    cc.mlp_shapes = {{28, 6}};

    const ModelComparison one = compare_models(ds, cc);
    const ModelComparison two = compare_models(ds, cc);

    const SplitManifest m = split_dataset(ds, cc.seed);
    REQUIRE(one.manifest.test == m.test);
    REQUIRE(one.manifest.fit == m.fit);
    REQUIRE(one.nb.test_count == m.test.size());
    REQUIRE(one.mlp.test_count == m.test.size());
    REQUIRE(one.smlp.test_count == m.test.size());

    auto emit = [](const ModelComparison& mc) {
        const std::array<std::pair<std::string, EvalReport>, 3> rows{
            std::pair{std::string("gaussian_nb"), mc.nb},
            std::pair{std::string("mlp"), mc.mlp},
            std::pair{std::string("smlp"), mc.smlp},
        };
        std::ostringstream os;
        write_metrics_csv(os, rows);
        return os.str();
    };
    REQUIRE(emit(one) == emit(two));
}

TEST_CASE("curve CSV format is exact") {
    ConvergenceCurve c;
    c.losses = {0.5, 0.25};
    std::ostringstream os;
    write_curve_csv(os, c);
    REQUIRE(os.str() == "iteration,loss\n0,0.5\n1,0.25\n");
}

TEST_CASE("metrics CSV format is exact") {
    Matrix scores(6, 6);
    std::vector<EventClass> labels;
    for (std::size_t i = 0; i < 6; ++i) {
        scores(i, i) = 1.0;
        labels.push_back(*class_from_code(static_cast<int>(i)));
    }
    const EvalReport perfect = evaluate_scores(scores, labels);
    const std::array<std::pair<std::string, EvalReport>, 1> rows{
        std::pair{std::string("m"), perfect}};
    std::ostringstream os;
    write_metrics_csv(os, rows);
    REQUIRE(os.str() == "model,class,precision,AP,MAP,macro_precision\n"
                        "m,anticipated,1,1,1,1\n"
                        "m,breaking,1,1,1,1\n"
                        "m,commemorative,1,1,1,1\n"
                        "m,meme,1,1,1,1\n"
                        "m,ongoing,1,1,1,1\n"
                        "m,atemporal,1,1,1,1\n");
}

TEST_CASE("confusion CSV format is exact") {
    Matrix scores(6, 6);
    std::vector<EventClass> labels;
    for (std::size_t i = 0; i < 6; ++i) {
        scores(i, i) = 1.0;
        labels.push_back(*class_from_code(static_cast<int>(i)));
    }
    const EvalReport perfect = evaluate_scores(scores, labels);
    std::ostringstream os;
    write_confusion_csv(os, perfect);
    REQUIRE(os.str() == "true\\pred,anticipated,breaking,commemorative,meme,ongoing,atemporal\n"
                        "anticipated,1,0,0,0,0,0\n"
                        "breaking,0,1,0,0,0,0\n"
                        "commemorative,0,0,1,0,0,0\n"
                        "meme,0,0,0,1,0,0\n"
                        "ongoing,0,0,0,0,1,0\n"
                        "atemporal,0,0,0,0,0,1\n");
}
