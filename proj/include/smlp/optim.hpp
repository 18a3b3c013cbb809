#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "smlp/config.hpp"
#include "smlp/errors.hpp"
#include "smlp/network.hpp"

namespace smlp {

/* The seven learning methods, interchangeable over GradientSets.
 */

enum class OptimMethod {
    ConstantSGD,
    DecayedSGD,
    ConstantMomentum,
    DecayedMomentum,
    ConstantNesterov,
    DecayedNesterov,
    Adam,
};

inline constexpr std::array<OptimMethod, 7> all_optim_methods() {
    return {OptimMethod::ConstantSGD,      OptimMethod::DecayedSGD,
            OptimMethod::ConstantMomentum, OptimMethod::DecayedMomentum,
            OptimMethod::ConstantNesterov, OptimMethod::DecayedNesterov,
            OptimMethod::Adam};
}

inline const char* optim_method_name(OptimMethod m) {
    switch (m) {
    case OptimMethod::ConstantSGD: return "constant_sgd";
    case OptimMethod::DecayedSGD: return "decayed_sgd";
    case OptimMethod::ConstantMomentum: return "constant_momentum";
    case OptimMethod::DecayedMomentum: return "decayed_momentum";
    case OptimMethod::ConstantNesterov: return "constant_nesterov";
    case OptimMethod::DecayedNesterov: return "decayed_nesterov";
    case OptimMethod::Adam: return "adam";
    }
    return "?";
}

inline std::optional<OptimMethod> optim_method_from_name(std::string_view name) {
    for (OptimMethod m : all_optim_methods())
        if (name == optim_method_name(m))
            return m;
    return std::nullopt;
}

struct OptimizerSpec {
    OptimMethod method = OptimMethod::Adam;
    double alpha = 1e-3;     // learning rate
    double mu = 0.9;         // momentum coefficient
    double decay = 0.001;    // inverse-scaling rate for the decayed methods
    double beta1 = 0.9;      // Adam
    double beta2 = 0.999;    // Adam
    double epsilon = 1e-8;   // Adam, added outside the square root
};

inline void validate_optimizer_spec(const OptimizerSpec& spec) {
    if (!(spec.alpha > 0.0))
        throw ConfigError("optimizer: alpha must be > 0");
    if (!(spec.mu >= 0.0 && spec.mu < 1.0))
        throw ConfigError("optimizer: mu must be in [0, 1)");
    if (!(spec.beta1 >= 0.0 && spec.beta1 < 1.0) || !(spec.beta2 >= 0.0 && spec.beta2 < 1.0))
        throw ConfigError("optimizer: betas must be in [0, 1)");
    if (!(spec.epsilon > 0.0))
        throw ConfigError("optimizer: epsilon must be > 0");
    if (!(spec.decay >= 0.0))
        throw ConfigError("optimizer: decay must be >= 0");
}

inline bool is_decayed(OptimMethod m) {
    return m == OptimMethod::DecayedSGD || m == OptimMethod::DecayedMomentum ||
           m == OptimMethod::DecayedNesterov;
}

/// True exactly for the Nesterov methods: the harness must evaluate
/// gradients at the lookahead point theta + mu * v.
inline bool needs_lookahead(const OptimizerSpec& spec) {
    return spec.method == OptimMethod::ConstantNesterov ||
           spec.method == OptimMethod::DecayedNesterov;
}

/// Learning rate at step t: alpha for constant methods and Adam,
/// alpha / (1 + decay * t) for the decayed ones.
inline double lr_at(const OptimizerSpec& spec, std::uint64_t t) {
    if (is_decayed(spec.method))
        return spec.alpha / (1.0 + spec.decay * static_cast<double>(t));
    return spec.alpha;
}

/* Optimizer state: moment buffers congruent with the model parameters.
 */

struct LayerState {
    Matrix mW, vW;              // first/second moments for W (v unused outside Adam)
    std::vector<double> mb, vb; // same for b
};

struct OptimizerState {
    std::uint64_t t = 0; // completed update steps
    std::vector<std::vector<LayerState>> units;
};

inline OptimizerState init_state(const SmlpModel& model) {
    OptimizerState st;
    st.units.reserve(model.units.size());
    for (const MlpUnit& unit : model.units) {
        std::vector<LayerState> ls;
        ls.reserve(unit.layers.size());
        for (const Layer& layer : unit.layers) {
            LayerState s;
            s.mW = Matrix(layer.W.rows, layer.W.cols);
            s.vW = Matrix(layer.W.rows, layer.W.cols);
            s.mb.assign(layer.b.size(), 0.0);
            s.vb.assign(layer.b.size(), 0.0);
            ls.push_back(std::move(s));
        }
        st.units.push_back(std::move(ls));
    }
    return st;
}

/** Returns a copy of the model shifted to the Nesterov lookahead point
 *  theta + mu * v. For fresh state (v = 0) this is the model itself. */
inline SmlpModel lookahead_model(const SmlpModel& model, const OptimizerState& state,
                                 const OptimizerSpec& spec) {
    SmlpModel ahead = model;
    for (std::size_t u = 0; u < ahead.units.size(); ++u)
        for (std::size_t k = 0; k < ahead.units[u].layers.size(); ++k) {
            Layer& layer = ahead.units[u].layers[k];
            const LayerState& s = state.units.at(u).at(k);
            for (std::size_t i = 0; i < layer.W.a.size(); ++i)
                layer.W.a[i] += spec.mu * s.mW.a[i];
            for (std::size_t i = 0; i < layer.b.size(); ++i)
                layer.b[i] += spec.mu * s.mb[i];
        }
    return ahead;
}

namespace detail {

inline void check_finite(std::span<const double> g, std::size_t unit, std::size_t layer,
                         const char* tensor) {
    for (double x : g)
        if (!std::isfinite(x))
            throw DivergenceError("non-finite gradient in unit " + std::to_string(unit) +
                                  " layer " + std::to_string(layer) + " (" + tensor + ")");
}

/// One parameter tensor under one method. t_next is the step number being
/// taken (1-based); lr already reflects any decay at the pre-update counter.
inline void update_tensor(const OptimizerSpec& spec, double lr, std::uint64_t t_next,
                          std::span<double> theta, std::span<const double> g,
                          std::span<double> m, std::span<double> v) {
    switch (spec.method) {
    case OptimMethod::ConstantSGD:
    case OptimMethod::DecayedSGD:
        for (std::size_t i = 0; i < theta.size(); ++i)
            theta[i] -= lr * g[i];
        break;
    case OptimMethod::ConstantMomentum:
    case OptimMethod::DecayedMomentum:
    case OptimMethod::ConstantNesterov:
    case OptimMethod::DecayedNesterov:
        // Nesterov uses the same recurrence; g is the lookahead gradient.
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = spec.mu * m[i] - lr * g[i];
            theta[i] += m[i];
        }
        break;
    case OptimMethod::Adam: {
        const double bc1 = 1.0 - std::pow(spec.beta1, static_cast<double>(t_next));
        const double bc2 = 1.0 - std::pow(spec.beta2, static_cast<double>(t_next));
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = spec.beta1 * m[i] + (1.0 - spec.beta1) * g[i];
            v[i] = spec.beta2 * v[i] + (1.0 - spec.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            theta[i] -= lr * mhat / (std::sqrt(vhat) + spec.epsilon);
        }
        break;
    }
    }
}

} // namespace detail

/** Applies one update step in place. `lr_scale` is the harness divergence
 *  safeguard (1 when off). Throws DivergenceError naming the layer on any
 *  non-finite gradient. */
inline void apply_update(const OptimizerSpec& spec, OptimizerState& state, SmlpModel& model,
                         const GradientSet& grads, double lr_scale = 1.0) {
    if (grads.units.size() != model.units.size() || state.units.size() != model.units.size())
        throw std::invalid_argument("apply_update: structure mismatch");
    const double lr = lr_at(spec, state.t) * lr_scale;
    const std::uint64_t t_next = state.t + 1;
    for (std::size_t u = 0; u < model.units.size(); ++u) {
        if (grads.units[u].size() != model.units[u].layers.size())
            throw std::invalid_argument("apply_update: structure mismatch");
        for (std::size_t k = 0; k < model.units[u].layers.size(); ++k) {
            Layer& layer = model.units[u].layers[k];
            const LayerGrad& g = grads.units[u][k];
            LayerState& s = state.units[u][k];
            if (!g.dW.same_shape(layer.W) || g.db.size() != layer.b.size())
                throw std::invalid_argument("apply_update: gradient shape mismatch at unit " +
                                            std::to_string(u) + " layer " + std::to_string(k));
            detail::check_finite(g.dW.a, u, k, "W");
            detail::check_finite(g.db, u, k, "b");
            detail::update_tensor(spec, lr, t_next, layer.W.a, g.dW.a, s.mW.a, s.vW.a);
            detail::update_tensor(spec, lr, t_next, layer.b, g.db, s.mb, s.vb);
        }
    }
    state.t = t_next;
}

/// Reads optim.method, optim.alpha, optim.mu, optim.decay, optim.beta1,
/// optim.beta2, optim.epsilon, defaulting any absent key.
inline OptimizerSpec optimizer_spec_from_config(const Config& cfg) {
    OptimizerSpec spec;
    const std::string name = cfg.get_string("optim.method", optim_method_name(spec.method));
    const auto m = optim_method_from_name(name);
    if (!m)
        throw ConfigError("unknown optim.method: " + name);
    spec.method = *m;
    spec.alpha = cfg.get_real("optim.alpha", spec.alpha);
    spec.mu = cfg.get_real("optim.mu", spec.mu);
    spec.decay = cfg.get_real("optim.decay", spec.decay);
    spec.beta1 = cfg.get_real("optim.beta1", spec.beta1);
    spec.beta2 = cfg.get_real("optim.beta2", spec.beta2);
    spec.epsilon = cfg.get_real("optim.epsilon", spec.epsilon);
    validate_optimizer_spec(spec);
    return spec;
}

} // namespace smlp
