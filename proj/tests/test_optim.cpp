#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "smlp/optim.hpp"

using namespace smlp;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Smallest legal stack: one linear layer, 28 -> 6.
SmlpModel tiny_model(double fill = 0.0) {
    SmlpModel m = init_model({{28, 6}}, 1);
    for (double& w : m.units[0].layers[0].W.a)
        w = fill;
    std::fill(m.units[0].layers[0].b.begin(), m.units[0].layers[0].b.end(), fill);
    return m;
}

GradientSet grads_like(const SmlpModel& m, double value) {
    GradientSet g;
    for (const MlpUnit& unit : m.units) {
        std::vector<LayerGrad> ug;
        for (const Layer& l : unit.layers) {
            LayerGrad lg;
            lg.dW = Matrix(l.W.rows, l.W.cols);
            std::fill(lg.dW.a.begin(), lg.dW.a.end(), value);
            lg.db.assign(l.b.size(), value);
            ug.push_back(std::move(lg));
        }
        g.units.push_back(std::move(ug));
    }
    return g;
}

GradientSet random_grads(const SmlpModel& m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    GradientSet g = grads_like(m, 0.0);
    for (auto& unit : g.units)
        for (auto& lg : unit) {
            for (double& x : lg.dW.a)
                x = u(rng);
            for (double& x : lg.db)
                x = u(rng);
        }
    return g;
}

} // namespace

TEST_CASE("the seven learning methods round-trip through their names") {
    REQUIRE(all_optim_methods().size() == 7);
    const char* names[] = {"constant_sgd",      "decayed_sgd",      "constant_momentum",
                           "decayed_momentum",  "constant_nesterov", "decayed_nesterov",
                           "adam"};
    std::size_t i = 0;
    for (OptimMethod m : all_optim_methods()) {
        REQUIRE(std::string(optim_method_name(m)) == names[i]);
        REQUIRE(optim_method_from_name(names[i]) == m);
        ++i;
    }
    REQUIRE_FALSE(optim_method_from_name("adagrad").has_value());
    REQUIRE_FALSE(optim_method_from_name("Adam").has_value());
}

TEST_CASE("decay and lookahead flags partition the methods") {
    REQUIRE_FALSE(is_decayed(OptimMethod::ConstantSGD));
    REQUIRE(is_decayed(OptimMethod::DecayedSGD));
    REQUIRE(is_decayed(OptimMethod::DecayedMomentum));
    REQUIRE(is_decayed(OptimMethod::DecayedNesterov));
    REQUIRE_FALSE(is_decayed(OptimMethod::Adam));

    OptimizerSpec spec;
    for (OptimMethod m : all_optim_methods()) {
        spec.method = m;
        const bool nesterov =
            m == OptimMethod::ConstantNesterov || m == OptimMethod::DecayedNesterov;
        REQUIRE(needs_lookahead(spec) == nesterov);
    }
}

TEST_CASE("learning-rate schedule follows inverse scaling only when decayed") {
    OptimizerSpec spec;
    spec.alpha = 0.05;
    spec.decay = 0.001;

    spec.method = OptimMethod::ConstantSGD;
    REQUIRE(lr_at(spec, 0) == 0.05);
    REQUIRE(lr_at(spec, 1000000) == 0.05);

    spec.method = OptimMethod::Adam;
    REQUIRE(lr_at(spec, 12345) == 0.05);

    spec.method = OptimMethod::DecayedSGD;
    REQUIRE(lr_at(spec, 0) == 0.05);
    REQUIRE_THAT(lr_at(spec, 1), WithinRel(0.05 / 1.001, 1e-15));
    REQUIRE_THAT(lr_at(spec, 1000), WithinRel(0.025, 1e-12));
}

TEST_CASE("spec validation rejects out-of-range hyperparameters") {
    OptimizerSpec spec;
    REQUIRE_NOTHROW(validate_optimizer_spec(spec));
    auto broken = [](auto&& tweak) {
        OptimizerSpec s;
        tweak(s);
        return s;
    };
    REQUIRE_THROWS_AS(validate_optimizer_spec(broken([](auto& s) { s.alpha = 0.0; })),
                      ConfigError);
    REQUIRE_THROWS_AS(validate_optimizer_spec(broken([](auto& s) { s.mu = 1.0; })), ConfigError);
    REQUIRE_THROWS_AS(validate_optimizer_spec(broken([](auto& s) { s.mu = -0.1; })), ConfigError);
    REQUIRE_THROWS_AS(validate_optimizer_spec(broken([](auto& s) { s.beta2 = 1.0; })),
                      ConfigError);
    REQUIRE_THROWS_AS(validate_optimizer_spec(broken([](auto& s) { s.epsilon = 0.0; })),
                      ConfigError);
    REQUIRE_THROWS_AS(validate_optimizer_spec(broken([](auto& s) { s.decay = -1.0; })),
                      ConfigError);
}

TEST_CASE("plain gradient descent takes the textbook step") {
    SmlpModel m = tiny_model(0.5);
    OptimizerState st = init_state(m);
    OptimizerSpec spec;
    spec.method = OptimMethod::ConstantSGD;
    spec.alpha = 0.1;

    apply_update(spec, st, m, grads_like(m, 2.0));
    REQUIRE(st.t == 1);
    for (double w : m.units[0].layers[0].W.a)
        REQUIRE_THAT(w, WithinAbs(0.5 - 0.1 * 2.0, 1e-15));
    for (double b : m.units[0].layers[0].b)
        REQUIRE_THAT(b, WithinAbs(0.3, 1e-15));

    // lr_scale rescales the step linearly.
    SmlpModel m2 = tiny_model(0.5);
    OptimizerState st2 = init_state(m2);
    apply_update(spec, st2, m2, grads_like(m2, 2.0), 0.5);
    for (double w : m2.units[0].layers[0].W.a)
        REQUIRE_THAT(w, WithinAbs(0.4, 1e-15));
}

TEST_CASE("decayed gradient descent shrinks the step with the update counter") {
    SmlpModel m = tiny_model(0.0);
    OptimizerState st = init_state(m);
    OptimizerSpec spec;
    spec.method = OptimMethod::DecayedSGD;
    spec.alpha = 0.1;
    spec.decay = 0.5; // exaggerated so the schedule is visible

    apply_update(spec, st, m, grads_like(m, 1.0)); // uses lr at t=0: 0.1
    apply_update(spec, st, m, grads_like(m, 1.0)); // uses lr at t=1: 0.1/1.5
    REQUIRE(st.t == 2);
    const double expect = -(0.1 + 0.1 / 1.5);
    for (double w : m.units[0].layers[0].W.a)
        REQUIRE_THAT(w, WithinAbs(expect, 1e-15));
}

TEST_CASE("momentum accumulates velocity by the classical recurrence") {
    SmlpModel m = tiny_model(0.0);
    OptimizerState st = init_state(m);
    OptimizerSpec spec;
    spec.method = OptimMethod::ConstantMomentum;
    spec.alpha = 0.1;
    spec.mu = 0.9;

    // Constant gradient 1: v1 = -0.1, theta1 = -0.1; v2 = -0.19, theta2 = -0.29.
    apply_update(spec, st, m, grads_like(m, 1.0));
    apply_update(spec, st, m, grads_like(m, 1.0));
    for (double w : m.units[0].layers[0].W.a)
        REQUIRE_THAT(w, WithinAbs(-0.29, 1e-15));
    for (double v : st.units[0][0].mW.a)
        REQUIRE_THAT(v, WithinAbs(-0.19, 1e-15));
}

TEST_CASE("momentum with zero coefficient is bitwise gradient descent") {
    SmlpModel a = init_model(default_unit_shapes(), 8);
    SmlpModel b = a;
    OptimizerState sa = init_state(a), sb = init_state(b);
    OptimizerSpec sgd, mom;
    sgd.method = OptimMethod::ConstantSGD;
    mom.method = OptimMethod::ConstantMomentum;
    mom.mu = 0.0;
    sgd.alpha = mom.alpha = 0.01;

    for (std::uint64_t step = 0; step < 5; ++step) {
        const GradientSet g = random_grads(a, 100 + step);
        apply_update(sgd, sa, a, g);
        apply_update(mom, sb, b, g);
    }
    for (std::size_t u = 0; u < a.units.size(); ++u)
        for (std::size_t k = 0; k < a.units[u].layers.size(); ++k) {
            REQUIRE(a.units[u].layers[k].W.a == b.units[u].layers[k].W.a);
            REQUIRE(a.units[u].layers[k].b == b.units[u].layers[k].b);
        }
}

TEST_CASE("nesterov shares the momentum recurrence and exposes the lookahead point") {
    SmlpModel m = tiny_model(1.0);
    OptimizerState st = init_state(m);
    OptimizerSpec spec;
    spec.method = OptimMethod::ConstantNesterov;
    spec.alpha = 0.1;
    spec.mu = 0.9;

    // Fresh state: lookahead equals the model itself.
    const SmlpModel ahead0 = lookahead_model(m, st, spec);
    REQUIRE(ahead0.units[0].layers[0].W.a == m.units[0].layers[0].W.a);

    apply_update(spec, st, m, grads_like(m, 1.0)); // v = -0.1 everywhere
    const SmlpModel ahead = lookahead_model(m, st, spec);
    for (std::size_t i = 0; i < m.units[0].layers[0].W.a.size(); ++i)
        REQUIRE_THAT(ahead.units[0].layers[0].W.a[i],
                     WithinAbs(m.units[0].layers[0].W.a[i] + 0.9 * -0.1, 1e-15));

    // Identical gradient streams: Nesterov's parameter trace equals momentum's.
    SmlpModel m2 = tiny_model(1.0);
    OptimizerState st2 = init_state(m2);
    OptimizerSpec mom = spec;
    mom.method = OptimMethod::ConstantMomentum;
    apply_update(mom, st2, m2, grads_like(m2, 1.0));
    REQUIRE(m2.units[0].layers[0].W.a == m.units[0].layers[0].W.a);
}

TEST_CASE("adam's first step approaches but never exceeds alpha") {
    SmlpModel m = tiny_model(0.0);
    OptimizerState st = init_state(m);
    OptimizerSpec spec; // Adam defaults: alpha 1e-3, eps 1e-8

    apply_update(spec, st, m, grads_like(m, 10.0));
    // mhat = g, vhat = g^2: step = -alpha * g / (|g| + eps)
    const double expect = -1e-3 * 10.0 / (10.0 + 1e-8);
    for (double w : m.units[0].layers[0].W.a) {
        REQUIRE_THAT(w, WithinRel(expect, 1e-12));
        REQUIRE(std::abs(w) < spec.alpha);
    }
}

TEST_CASE("adam matches a scalar reference over several steps") {
    SmlpModel m = tiny_model(0.25);
    OptimizerState st = init_state(m);
    OptimizerSpec spec;
    spec.alpha = 0.01;

    const double gs[] = {3.0, -1.5, 0.25, 7.0, -0.125};
    double theta = 0.25, mm = 0.0, vv = 0.0;
    for (int t = 1; t <= 5; ++t) {
        const double g = gs[t - 1];
        apply_update(spec, st, m, grads_like(m, g));
        mm = 0.9 * mm + 0.1 * g;
        vv = 0.999 * vv + 0.001 * g * g;
        const double mhat = mm / (1.0 - std::pow(0.9, t));
        const double vhat = vv / (1.0 - std::pow(0.999, t));
        theta -= 0.01 * mhat / (std::sqrt(vhat) + 1e-8);
        REQUIRE_THAT(m.units[0].layers[0].W.a[0], WithinRel(theta, 1e-12));
    }
    REQUIRE(st.t == 5);
}

TEST_CASE("zero gradient from a fresh state is a fixed point for every method") {
    for (OptimMethod method : all_optim_methods()) {
        SmlpModel m = init_model(default_unit_shapes(), 55);
        const SmlpModel before = m;
        OptimizerState st = init_state(m);
        OptimizerSpec spec;
        spec.method = method;
        for (int step = 0; step < 3; ++step)
            apply_update(spec, st, m, grads_like(m, 0.0));
        for (std::size_t u = 0; u < m.units.size(); ++u)
            for (std::size_t k = 0; k < m.units[u].layers.size(); ++k)
                REQUIRE(m.units[u].layers[k].W.a == before.units[u].layers[k].W.a);
    }
}

TEST_CASE("non-finite gradients raise a divergence error naming the tensor") {
    SmlpModel m = init_model(default_unit_shapes(), 2);
    OptimizerState st = init_state(m);
    OptimizerSpec spec;

    GradientSet g = grads_like(m, 0.0);
    g.units[1][0].dW.a[5] = std::numeric_limits<double>::quiet_NaN();
    try {
        apply_update(spec, st, m, g);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        const std::string msg = e.what();
        REQUIRE(msg.find("unit 1") != std::string::npos);
        REQUIRE(msg.find("layer 0") != std::string::npos);
        REQUIRE(msg.find("(W)") != std::string::npos);
    }
    REQUIRE(st.t == 0); // failed step does not advance the counter

    GradientSet gb = grads_like(m, 0.0);
    gb.units[2][1].db[3] = std::numeric_limits<double>::infinity();
    try {
        apply_update(spec, st, m, gb);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        const std::string msg = e.what();
        REQUIRE(msg.find("unit 2") != std::string::npos);
        REQUIRE(msg.find("layer 1") != std::string::npos);
        REQUIRE(msg.find("(b)") != std::string::npos);
    }
}

TEST_CASE("optimizer settings load from config with validation") {
    const Config cfg = Config::from_string("optim.method = decayed_nesterov\n"
                                           "optim.alpha = 0.2\n"
                                           "optim.mu = 0.8\n"
                                           "optim.decay = 0.01\n");
    const OptimizerSpec spec = optimizer_spec_from_config(cfg);
    REQUIRE(spec.method == OptimMethod::DecayedNesterov);
    REQUIRE(spec.alpha == 0.2);
    REQUIRE(spec.mu == 0.8);
    REQUIRE(spec.decay == 0.01);
    REQUIRE(spec.beta1 == 0.9); // untouched default

    REQUIRE_THROWS_AS(optimizer_spec_from_config(Config::from_string("optim.method = sgd\n")),
                      ConfigError);
    REQUIRE_THROWS_AS(optimizer_spec_from_config(Config::from_string("optim.alpha = -1\n")),
                      ConfigError);
}
