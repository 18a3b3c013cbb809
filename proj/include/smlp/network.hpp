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
#include <vector>

#include "smlp/datamodel.hpp"
#include "smlp/errors.hpp"

namespace smlp {

/* Dense row-major matrix, the only tensor shape the network needs.
 */
struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return a[r * cols + c]; }

    double* row(std::size_t r) { return a.data() + r * cols; }
    const double* row(std::size_t r) const { return a.data() + r * cols; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

enum class Activation { ReLU, Identity };

struct LayerSpec {
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    Activation activation = Activation::ReLU;
};

struct Layer {
    LayerSpec spec;
    Matrix W;              // output_dim x input_dim
    std::vector<double> b; // output_dim
};

/// One MLP unit: a chain of affine+activation layers.
struct MlpUnit {
    std::vector<Layer> layers;
};

/** The stacked model. Units chain dimensionally: each takes the previous
 *  unit's output as input. The final layer is Identity; softmax lives in
 *  the loss head. */
struct SmlpModel {
    std::vector<MlpUnit> units;
    std::uint64_t seed = 0;

    std::size_t input_dim() const { return units.front().layers.front().spec.input_dim; }
    std::size_t output_dim() const { return units.back().layers.back().spec.output_dim; }

    std::size_t layer_count() const {
        std::size_t n = 0;
        for (const MlpUnit& u : units)
            n += u.layers.size();
        return n;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const MlpUnit& u : units)
            for (const Layer& l : u.layers)
                n += l.W.a.size() + l.b.size();
        return n;
    }
};

using UnitShapes = std::vector<std::vector<std::size_t>>;

inline UnitShapes default_unit_shapes() {
    return {{28, 64, 64}, {64, 64, 64}, {64, 32, 6}};
}

/// Baseline: one unit, one hidden layer.
inline UnitShapes single_mlp_shapes() {
    return {{28, 64, 6}};
}

namespace detail {

struct GaussDraw {
    std::mt19937_64 g;
    explicit GaussDraw(std::uint64_t seed) : g(seed) {}

    double operator()() {
        double u1 = static_cast<double>(g() >> 11) * 0x1.0p-53;
        const double u2 = static_cast<double>(g() >> 11) * 0x1.0p-53;
        if (u1 <= 0.0)
            u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }
};

} // namespace detail

/** He-initialized stacked model: weights Normal(0, sqrt(2/input_dim)) drawn
 *  unit by unit, layer by layer, row-major; biases zero. Hidden layers get
 *  ReLU, the final layer Identity. */
inline SmlpModel init_model(const UnitShapes& shapes, std::uint64_t seed) {
    if (shapes.empty())
        throw ConfigError("init_model: no units");
    for (const auto& dims : shapes)
        if (dims.size() < 2)
            throw ConfigError("init_model: each unit needs at least input and output dims");
    if (shapes.front().front() != kFeatureCount)
        throw ConfigError("init_model: stack input dim must be " + std::to_string(kFeatureCount));
    if (shapes.back().back() != static_cast<std::size_t>(kClassCount))
        throw ConfigError("init_model: stack output dim must be " + std::to_string(kClassCount));
    for (std::size_t u = 1; u < shapes.size(); ++u)
        if (shapes[u].front() != shapes[u - 1].back())
            throw ConfigError("init_model: unit " + std::to_string(u) +
                              " input does not chain with previous output");

    SmlpModel model;
    model.seed = seed;
    detail::GaussDraw gauss(seed);
    const std::size_t last_u = shapes.size() - 1;
    for (std::size_t u = 0; u < shapes.size(); ++u) {
        MlpUnit unit;
        const auto& dims = shapes[u];
        for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
            Layer layer;
            layer.spec.input_dim = dims[k];
            layer.spec.output_dim = dims[k + 1];
            const bool last_layer = u == last_u && k + 2 == dims.size();
            layer.spec.activation = last_layer ? Activation::Identity : Activation::ReLU;
            layer.W = Matrix(dims[k + 1], dims[k]);
            const double stddev = std::sqrt(2.0 / static_cast<double>(dims[k]));
            for (double& w : layer.W.a)
                w = stddev * gauss();
            layer.b.assign(dims[k + 1], 0.0);
            unit.layers.push_back(std::move(layer));
        }
        model.units.push_back(std::move(unit));
    }
    return model;
}

/* Elementwise pieces
 * ------------------
 */

inline std::vector<double> relu(std::span<const double> xs) {
    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
        out[i] = xs[i] > 0.0 ? xs[i] : 0.0;
    return out;
}

/// Max-shifted softmax: strictly positive, sums to 1 within 1e-12.
inline std::vector<double> softmax(std::span<const double> zs) {
    if (zs.empty())
        throw std::invalid_argument("softmax: empty input");
    const double zmax = *std::max_element(zs.begin(), zs.end());
    std::vector<double> out(zs.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < zs.size(); ++i) {
        out[i] = std::exp(zs[i] - zmax);
        sum += out[i];
    }
    for (double& p : out)
        p /= sum;
    return out;
}

inline double cross_entropy(std::span<const double> probs, EventClass label) {
    const std::size_t idx = class_code(label);
    if (idx >= probs.size())
        throw std::invalid_argument("cross_entropy: label outside distribution");
    return -std::log(probs[idx]);
}

/* Forward pass
 * ------------
 */

/** Everything backward needs: the batch input, each layer's pre-activation
 *  and post-activation (flattened across units), and the softmax output. */
struct ForwardCache {
    Matrix input;
    std::vector<Matrix> pre;
    std::vector<Matrix> act;
    Matrix probs;
};

namespace detail {

/// Z = A W^T + b, one row per batch sample.
inline Matrix affine(const Matrix& A, const Layer& layer) {
    if (A.cols != layer.spec.input_dim)
        throw std::invalid_argument("forward: dimension mismatch (got " + std::to_string(A.cols) +
                                    ", layer expects " + std::to_string(layer.spec.input_dim) +
                                    ")");
    Matrix Z(A.rows, layer.spec.output_dim);
    for (std::size_t r = 0; r < A.rows; ++r) {
        const double* arow = A.row(r);
        double* zrow = Z.row(r);
        for (std::size_t o = 0; o < layer.spec.output_dim; ++o) {
            const double* wrow = layer.W.row(o);
            double acc = layer.b[o];
            for (std::size_t i = 0; i < layer.spec.input_dim; ++i)
                acc += wrow[i] * arow[i];
            zrow[o] = acc;
        }
    }
    return Z;
}

} // namespace detail

/// Logits only (no softmax, no cache).
inline Matrix forward_logits(const SmlpModel& model, const Matrix& X) {
    Matrix A = X;
    for (const MlpUnit& unit : model.units)
        for (const Layer& layer : unit.layers) {
            Matrix Z = detail::affine(A, layer);
            if (layer.spec.activation == Activation::ReLU)
                for (double& z : Z.a)
                    z = z > 0.0 ? z : 0.0;
            A = std::move(Z);
        }
    return A;
}

inline ForwardCache forward(const SmlpModel& model, const Matrix& X) {
    ForwardCache cache;
    cache.input = X;
    Matrix A = X;
    for (const MlpUnit& unit : model.units)
        for (const Layer& layer : unit.layers) {
            Matrix Z = detail::affine(A, layer);
            cache.pre.push_back(Z);
            if (layer.spec.activation == Activation::ReLU)
                for (double& z : Z.a)
                    z = z > 0.0 ? z : 0.0;
            cache.act.push_back(Z);
            A = std::move(Z);
        }
    cache.probs = Matrix(A.rows, A.cols);
    for (std::size_t r = 0; r < A.rows; ++r) {
        const auto p = softmax(std::span<const double>(A.row(r), A.cols));
        std::copy(p.begin(), p.end(), cache.probs.row(r));
    }
    return cache;
}

/// Mean cross-entropy of a cached forward pass; optional per-class weights.
inline double mean_cross_entropy(const ForwardCache& cache, std::span<const EventClass> labels,
                                 std::span<const double> class_weights = {}) {
    if (labels.size() != cache.probs.rows)
        throw std::invalid_argument("mean_cross_entropy: label count mismatch");
    double sum = 0.0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        const double w =
            class_weights.empty() ? 1.0 : class_weights[class_code(labels[r])];
        sum += w * -std::log(cache.probs(r, class_code(labels[r])));
    }
    return sum / static_cast<double>(labels.size());
}

/* Backward pass
 * -------------
 */

struct LayerGrad {
    Matrix dW;
    std::vector<double> db;
};

/// Shape-congruent with the model: units[u][k] matches model.units[u].layers[k].
struct GradientSet {
    std::vector<std::vector<LayerGrad>> units;
};

/** Exact gradients of mean cross-entropy over the batch. The fused head
 *  delta is (probs - onehot)/B; ReLU passes gradient iff pre-activation is
 *  strictly positive (zero at exactly zero). */
inline GradientSet backward(const SmlpModel& model, const ForwardCache& cache,
                            std::span<const EventClass> labels,
                            std::span<const double> class_weights = {}) {
    const std::size_t L = model.layer_count();
    if (cache.pre.size() != L || cache.act.size() != L)
        throw std::invalid_argument("backward: cache does not match model");
    const std::size_t B = cache.probs.rows;
    if (labels.size() != B)
        throw std::invalid_argument("backward: label count mismatch");

    // flatten layer pointers for the reverse sweep
    std::vector<const Layer*> layers;
    layers.reserve(L);
    for (const MlpUnit& unit : model.units)
        for (const Layer& layer : unit.layers)
            layers.push_back(&layer);

    Matrix delta = cache.probs; // B x C
    for (std::size_t r = 0; r < B; ++r) {
        delta(r, class_code(labels[r])) -= 1.0;
        const double w =
            class_weights.empty() ? 1.0 : class_weights[class_code(labels[r])];
        const double scale = w / static_cast<double>(B);
        double* row = delta.row(r);
        for (std::size_t c = 0; c < delta.cols; ++c)
            row[c] *= scale;
    }

    std::vector<LayerGrad> flat(L);
    for (std::size_t k = L; k-- > 0;) {
        const Layer& layer = *layers[k];
        const Matrix& A_prev = k == 0 ? cache.input : cache.act[k - 1];

        LayerGrad g;
        g.dW = Matrix(layer.spec.output_dim, layer.spec.input_dim);
        g.db.assign(layer.spec.output_dim, 0.0);
        for (std::size_t r = 0; r < B; ++r) {
            const double* drow = delta.row(r);
            const double* arow = A_prev.row(r);
            for (std::size_t o = 0; o < layer.spec.output_dim; ++o) {
                const double d = drow[o];
                if (d == 0.0)
                    continue;
                double* wrow = g.dW.row(o);
                for (std::size_t i = 0; i < layer.spec.input_dim; ++i)
                    wrow[i] += d * arow[i];
                g.db[o] += d;
            }
        }

        if (k > 0) {
            Matrix prev_delta(B, layer.spec.input_dim);
            for (std::size_t r = 0; r < B; ++r) {
                const double* drow = delta.row(r);
                double* prow = prev_delta.row(r);
                for (std::size_t o = 0; o < layer.spec.output_dim; ++o) {
                    const double d = drow[o];
                    if (d == 0.0)
                        continue;
                    const double* wrow = layer.W.row(o);
                    for (std::size_t i = 0; i < layer.spec.input_dim; ++i)
                        prow[i] += d * wrow[i];
                }
            }
            if (layers[k - 1]->spec.activation == Activation::ReLU) {
                const Matrix& pre = cache.pre[k - 1];
                for (std::size_t idx = 0; idx < prev_delta.a.size(); ++idx)
                    if (!(pre.a[idx] > 0.0))
                        prev_delta.a[idx] = 0.0;
            }
            delta = std::move(prev_delta);
        }
        flat[k] = std::move(g);
    }

    GradientSet grads;
    std::size_t k = 0;
    for (const MlpUnit& unit : model.units) {
        std::vector<LayerGrad> ug;
        for (std::size_t j = 0; j < unit.layers.size(); ++j)
            ug.push_back(std::move(flat[k++]));
        grads.units.push_back(std::move(ug));
    }
    return grads;
}

/* Prediction
 * ----------
 */

/// Argmax class of one feature vector; ties go to the lowest class code.
inline EventClass predict(const SmlpModel& model, const FeatureVector& fv) {
    Matrix X(1, kFeatureCount);
    std::copy(fv.values.begin(), fv.values.end(), X.row(0));
    const Matrix logits = forward_logits(model, X);
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols; ++c)
        if (logits(0, c) > logits(0, best))
            best = c;
    return *class_from_code(static_cast<int>(best));
}

/// Softmax probabilities for a batch of feature vectors, one row each.
inline Matrix predict_probs(const SmlpModel& model, std::span<const FeatureVector> batch) {
    Matrix X(batch.size(), kFeatureCount);
    for (std::size_t r = 0; r < batch.size(); ++r)
        std::copy(batch[r].values.begin(), batch[r].values.end(), X.row(r));
    const Matrix logits = forward_logits(model, X);
    Matrix probs(logits.rows, logits.cols);
    for (std::size_t r = 0; r < logits.rows; ++r) {
        const auto p = softmax(std::span<const double>(logits.row(r), logits.cols));
        std::copy(p.begin(), p.end(), probs.row(r));
    }
    return probs;
}

/* Checkpoints
 * -----------
 * Text format with full 64-bit precision; loading reproduces predictions
 * bit-exactly.
 *
 *   smlp-checkpoint v1
 *   arch [28,64,64][64,64,64][64,32,6]
 *   seed 7
 *   normalizer 0|1
 *   (mean / std lines when normalizer is 1)
 *   W <unit> <layer> <rows> <cols>   followed by <rows> lines
 *   b <unit> <layer> <n>             followed by 1 line
 */

inline UnitShapes model_shapes(const SmlpModel& model) {
    UnitShapes shapes;
    for (const MlpUnit& unit : model.units) {
        std::vector<std::size_t> dims{unit.layers.front().spec.input_dim};
        for (const Layer& l : unit.layers)
            dims.push_back(l.spec.output_dim);
        shapes.push_back(std::move(dims));
    }
    return shapes;
}

inline std::string format_shapes(const UnitShapes& shapes) {
    std::string out;
    for (const auto& dims : shapes) {
        out += '[';
        for (std::size_t i = 0; i < dims.size(); ++i) {
            if (i)
                out += ',';
            out += std::to_string(dims[i]);
        }
        out += ']';
    }
    return out;
}

/// Parses "[28,64,64][64,64,64][64,32,6]".
inline UnitShapes parse_shapes(std::string_view text) {
    UnitShapes shapes;
    std::size_t pos = 0;
    while (pos < text.size()) {
        if (text[pos] != '[')
            throw ConfigError("bad architecture spec: expected '[' in " + std::string(text));
        const std::size_t close = text.find(']', pos);
        if (close == std::string_view::npos)
            throw ConfigError("bad architecture spec: unterminated '[' in " + std::string(text));
        std::vector<std::size_t> dims;
        std::size_t start = pos + 1;
        while (start < close) {
            std::size_t end = text.find(',', start);
            if (end == std::string_view::npos || end > close)
                end = close;
            const std::string num(text.substr(start, end - start));
            try {
                const long v = std::stol(num);
                if (v < 1)
                    throw std::invalid_argument("non-positive");
                dims.push_back(static_cast<std::size_t>(v));
            } catch (const std::exception&) {
                throw ConfigError("bad architecture spec: invalid dim '" + num + "'");
            }
            start = end + 1;
        }
        if (dims.size() < 2)
            throw ConfigError("bad architecture spec: unit needs at least 2 dims");
        shapes.push_back(std::move(dims));
        pos = close + 1;
    }
    if (shapes.empty())
        throw ConfigError("bad architecture spec: empty");
    return shapes;
}

inline void save_checkpoint(std::ostream& os, const SmlpModel& model,
                            const std::optional<FeatureStats>& stats = std::nullopt) {
    os << "smlp-checkpoint v1\n";
    os << "arch " << format_shapes(model_shapes(model)) << "\n";
    os << "seed " << model.seed << "\n";
    os << "normalizer " << (stats ? 1 : 0) << "\n";
    if (stats) {
        os << "mean";
        for (double v : stats->mean) {
            os << ' ';
            detail::write_real(os, v);
        }
        os << "\nstd";
        for (double v : stats->stddev) {
            os << ' ';
            detail::write_real(os, v);
        }
        os << "\n";
    }
    for (std::size_t u = 0; u < model.units.size(); ++u)
        for (std::size_t k = 0; k < model.units[u].layers.size(); ++k) {
            const Layer& l = model.units[u].layers[k];
            os << "W " << u << ' ' << k << ' ' << l.W.rows << ' ' << l.W.cols << "\n";
            for (std::size_t r = 0; r < l.W.rows; ++r) {
                const double* row = l.W.row(r);
                for (std::size_t c = 0; c < l.W.cols; ++c) {
                    if (c)
                        os << ' ';
                    detail::write_real(os, row[c]);
                }
                os << "\n";
            }
            os << "b " << u << ' ' << k << ' ' << l.b.size() << "\n";
            for (std::size_t i = 0; i < l.b.size(); ++i) {
                if (i)
                    os << ' ';
                detail::write_real(os, l.b[i]);
            }
            os << "\n";
        }
    if (!os)
        throw DataError("failed writing checkpoint");
}

inline void save_checkpoint(const std::string& path, const SmlpModel& model,
                            const std::optional<FeatureStats>& stats = std::nullopt) {
    std::ofstream os(path);
    if (!os)
        throw DataError("cannot open for writing: " + path);
    save_checkpoint(os, model, stats);
}

struct Checkpoint {
    SmlpModel model;
    std::optional<FeatureStats> stats;
};

inline Checkpoint load_checkpoint(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "smlp-checkpoint v1")
        throw DataError("not a checkpoint file (missing 'smlp-checkpoint v1' header)");

    Checkpoint cp;
    UnitShapes shapes;
    {
        if (!std::getline(is, line) || line.rfind("arch ", 0) != 0)
            throw DataError("checkpoint: missing arch line");
        shapes = parse_shapes(std::string_view(line).substr(5));
        if (!std::getline(is, line) || line.rfind("seed ", 0) != 0)
            throw DataError("checkpoint: missing seed line");
        cp.model.seed = std::stoull(line.substr(5));
        if (!std::getline(is, line) || line.rfind("normalizer ", 0) != 0)
            throw DataError("checkpoint: missing normalizer line");
        const std::string flag = line.substr(11);
        if (flag != "0" && flag != "1")
            throw DataError("checkpoint: normalizer flag must be 0 or 1");
        if (flag == "1") {
            FeatureStats st;
            const auto read_stats = [&](const char* tag, std::array<double, kFeatureCount>& out) {
                if (!std::getline(is, line) || line.rfind(std::string(tag) + " ", 0) != 0)
                    throw DataError(std::string("checkpoint: missing ") + tag + " line");
                std::istringstream ls(line.substr(std::string(tag).size() + 1));
                for (double& v : out)
                    if (!(ls >> v))
                        throw DataError(std::string("checkpoint: short ") + tag + " line");
            };
            read_stats("mean", st.mean);
            read_stats("std", st.stddev);
            cp.stats = st;
        }
    }

    // materialize shapes with zero weights, then fill from the stream
    cp.model.units.clear();
    const std::size_t last_u = shapes.size() - 1;
    for (std::size_t u = 0; u < shapes.size(); ++u) {
        MlpUnit unit;
        const auto& dims = shapes[u];
        for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
            Layer layer;
            layer.spec.input_dim = dims[k];
            layer.spec.output_dim = dims[k + 1];
            const bool last_layer = u == last_u && k + 2 == dims.size();
            layer.spec.activation = last_layer ? Activation::Identity : Activation::ReLU;
            layer.W = Matrix(dims[k + 1], dims[k]);
            layer.b.assign(dims[k + 1], 0.0);
            unit.layers.push_back(std::move(layer));
        }
        cp.model.units.push_back(std::move(unit));
    }

    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        std::istringstream hs(line);
        std::string kind;
        std::size_t u = 0, k = 0;
        hs >> kind >> u >> k;
        if (!hs || u >= cp.model.units.size() || k >= cp.model.units[u].layers.size())
            throw DataError("checkpoint: bad tensor header: " + line);
        Layer& layer = cp.model.units[u].layers[k];
        if (kind == "W") {
            std::size_t r = 0, c = 0;
            hs >> r >> c;
            if (!hs || r != layer.W.rows || c != layer.W.cols)
                throw DataError("checkpoint: W shape mismatch at unit " + std::to_string(u) +
                                " layer " + std::to_string(k));
            for (std::size_t i = 0; i < r; ++i) {
                if (!std::getline(is, line))
                    throw DataError("checkpoint: truncated W rows");
                std::istringstream ls(line);
                for (std::size_t j = 0; j < c; ++j)
                    if (!(ls >> layer.W(i, j)))
                        throw DataError("checkpoint: short W row");
            }
        } else if (kind == "b") {
            std::size_t n = 0;
            hs >> n;
            if (!hs || n != layer.b.size())
                throw DataError("checkpoint: b shape mismatch at unit " + std::to_string(u) +
                                " layer " + std::to_string(k));
            if (!std::getline(is, line))
                throw DataError("checkpoint: truncated b line");
            std::istringstream ls(line);
            for (std::size_t j = 0; j < n; ++j)
                if (!(ls >> layer.b[j]))
                    throw DataError("checkpoint: short b line");
        } else {
            throw DataError("checkpoint: unknown tensor kind: " + kind);
        }
    }
    return cp;
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw DataError("cannot open checkpoint: " + path);
    return load_checkpoint(is);
}

} // namespace smlp
