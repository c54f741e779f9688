#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tgcn/graph.hpp"
#include "tgcn/rng.hpp"
#include "tgcn/tensor_ops.hpp"

namespace tgcn {

enum class activation { tanh, sigmoid };

inline const char* to_string(activation a) { return a == activation::tanh ? "tanh" : "sigmoid"; }

inline activation parse_activation(const std::string& name) {
    if (name == "tanh") return activation::tanh;
    if (name == "sigmoid") return activation::sigmoid;
    throw argument_error("unknown activation '" + name + "' (expected tanh or sigmoid)");
}

inline double apply(activation a, double x) {
    return a == activation::tanh ? std::tanh(x) : 1.0 / (1.0 + std::exp(-x));
}

// derivative expressed through the activation's output y
inline double derivative_from_output(activation a, double y) {
    return a == activation::tanh ? 1.0 - y * y : y * (1.0 - y);
}

struct model_config {
    // D_0 .. D_L; the layer count is widths.size() - 1
    std::vector<std::size_t> widths{16, 16, 16};
    std::size_t window = 2;
    activation hidden = activation::tanh;
    // one weight slice shared by every snapshot instead of one per snapshot
    bool tied = false;
    std::uint64_t init_seed = 0;

    std::size_t layers() const noexcept { return widths.empty() ? 0 : widths.size() - 1; }

    void validate(std::size_t slices) const {
        if (widths.size() < 2) throw argument_error("model needs at least one layer (two widths)");
        for (auto w : widths)
            if (w == 0) throw argument_error("layer widths must be positive");
        if (window < 1 || window > slices)
            throw argument_error("window b must lie in [1, " + std::to_string(slices) + "], got " +
                                 std::to_string(window));
    }
};

// Learnable temporal mixing values m_tk. Only band positions
// max(0, t-b+1) <= k <= t exist; the softmax over each row gives M.
struct mixing_matrix {
    banded_lower_matrix raw;

    mixing_matrix() = default;
    mixing_matrix(std::size_t order, std::size_t window) : raw(order, window) {}

    std::size_t order() const noexcept { return raw.order(); }
    std::size_t window() const noexcept { return raw.band(); }

    friend bool operator==(const mixing_matrix&, const mixing_matrix&) = default;
};

// Row-wise softmax over the band, shifted by the row maximum.
inline banded_lower_matrix materialize_mixing(const mixing_matrix& m) {
    banded_lower_matrix out(m.order(), m.window());
    for (std::size_t t = 0; t < m.order(); ++t) {
        const std::size_t first = m.raw.first_col(t);
        double peak = m.raw(t, first);
        for (std::size_t k = first + 1; k <= t; ++k) peak = std::max(peak, m.raw(t, k));
        double total = 0.0;
        for (std::size_t k = first; k <= t; ++k) total += out.at(t, k) = std::exp(m.raw(t, k) - peak);
        for (std::size_t k = first; k <= t; ++k) out.at(t, k) /= total;
    }
    return out;
}

// Link-weight head: tanh(f_i * f_j + [f_i | f_j] W_c + z) . v
struct prediction_head {
    matrix weight;                // 2D x D
    std::vector<double> bias;     // D
    std::vector<double> regressor;  // D

    friend bool operator==(const prediction_head&, const prediction_head&) = default;
};

struct model_parameters {
    matrix embedding;             // D_0 x N
    std::vector<tensor3> layers;  // D_{l-1} x D_l x T (x 1 when tied)
    prediction_head head;
    mixing_matrix mixing;

    std::size_t node_count() const noexcept { return embedding.cols(); }
    std::size_t slice_count() const noexcept { return mixing.order(); }

    // Visits every parameter block in canonical order:
    // W_n, W_1 .. W_L, W_c, z, v, mixing.
    template <typename Self, typename Fn>
    static void visit(Self& self, Fn&& fn) {
        fn(std::string("W_n"), self.embedding.values());
        for (std::size_t l = 0; l < self.layers.size(); ++l)
            fn("W_" + std::to_string(l + 1), self.layers[l].values());
        fn(std::string("W_c"), self.head.weight.values());
        fn(std::string("z"), std::span(self.head.bias));
        fn(std::string("v"), std::span(self.head.regressor));
        fn(std::string("mixing"), self.mixing.raw.band_values());
    }
    template <typename Fn>
    void for_each_block(Fn&& fn) {
        visit(*this, std::forward<Fn>(fn));
    }
    template <typename Fn>
    void for_each_block(Fn&& fn) const {
        visit(*this, std::forward<Fn>(fn));
    }

    // same shapes, all zero
    model_parameters zeros_like() const {
        model_parameters z = *this;
        z.for_each_block([](const std::string&, std::span<double> v) { std::fill(v.begin(), v.end(), 0.0); });
        return z;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for_each_block([&](const std::string&, std::span<const double> v) { n += v.size(); });
        return n;
    }

    friend bool operator==(const model_parameters&, const model_parameters&) = default;
};

// Gradients share the parameter layout block for block.
using gradient_set = model_parameters;

// Symmetric uniform initialisation scaled by 1/sqrt(fan_in); z = 0,
// v in [-0.1, 0.1], raw mixing values 0 (uniform band weights).
inline model_parameters init_parameters(const model_config& cfg, std::size_t nodes, std::size_t slices) {
    cfg.validate(slices);
    rng gen(cfg.init_seed);
    auto fill = [&](std::span<double> v, double bound) {
        for (double& x : v) x = gen.uniform(-bound, bound);
    };
    model_parameters p;
    const std::size_t d0 = cfg.widths.front();
    const std::size_t dl = cfg.widths.back();
    p.embedding = matrix(d0, nodes);
    fill(p.embedding.values(), 1.0 / std::sqrt(static_cast<double>(nodes)));
    for (std::size_t l = 0; l < cfg.layers(); ++l) {
        tensor3 w(cfg.widths[l], cfg.widths[l + 1], cfg.tied ? 1 : slices);
        fill(w.values(), 1.0 / std::sqrt(static_cast<double>(cfg.widths[l])));
        p.layers.push_back(std::move(w));
    }
    p.head.weight = matrix(2 * dl, dl);
    fill(p.head.weight.values(), 1.0 / std::sqrt(static_cast<double>(2 * dl)));
    p.head.bias.assign(dl, 0.0);
    p.head.regressor.assign(dl, 0.0);
    fill(p.head.regressor, 0.1);
    p.mixing = mixing_matrix(slices, cfg.window);
    return p;
}

// X = N x_2 W_n. Every frontal slice is W_n^T, written out directly instead
// of contracting the one-hot tensor.
inline tensor3 embed_nodes(const matrix& embedding, std::size_t slices) {
    const std::size_t n = embedding.cols();
    const std::size_t d = embedding.rows();
    tensor3 x(n, d, slices);
    for (std::size_t t = 0; t < slices; ++t)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < d; ++k) x(i, k, t) = embedding(k, i);
    return x;
}

// Sparse M-transform of the normalized adjacency: slice t is
// sum_k M(t,k) * A~_k over the band, with the union sparsity pattern.
inline sparse_slices mix_adjacency(const sparse_slices& adj, const banded_lower_matrix& m) {
    if (adj.slice_count() != m.order())
        throw shape_error("mix_adjacency: adjacency has " + std::to_string(adj.slice_count()) +
                          " slices but mixing order is " + std::to_string(m.order()));
    const std::size_t n = adj.nodes;
    sparse_slices out;
    out.nodes = n;
    out.slices.resize(m.order());
    std::vector<double> acc(n, 0.0);
    std::vector<bool> mark(n, false);
    std::vector<std::size_t> touched;
    for (std::size_t t = 0; t < m.order(); ++t) {
        auto& s = out.slices[t];
        s.row_ptr.assign(1, 0);
        for (std::size_t i = 0; i < n; ++i) {
            touched.clear();
            for (std::size_t k = m.first_col(t); k <= t; ++k) {
                const double w = m(t, k);
                const auto& src = adj.slices[k];
                for (std::size_t e = src.row_ptr[i]; e < src.row_ptr[i + 1]; ++e) {
                    const std::size_t j = src.cols[e];
                    if (!mark[j]) {
                        mark[j] = true;
                        touched.push_back(j);
                    }
                    acc[j] += w * src.values[e];
                }
            }
            std::sort(touched.begin(), touched.end());
            for (std::size_t j : touched) {
                s.cols.push_back(j);
                s.values.push_back(acc[j]);
                acc[j] = 0.0;
                mark[j] = false;
            }
            s.row_ptr.push_back(s.cols.size());
        }
    }
    return out;
}

// Broadcasts a tied (x1) weight tensor to the full temporal extent.
inline tensor3 expand_weight(const tensor3& w, std::size_t slices) {
    if (w.slices() == slices) return w;
    if (w.slices() != 1)
        throw shape_error("layer weight has " + std::to_string(w.slices()) + " slices, expected 1 or " +
                          std::to_string(slices));
    tensor3 out(w.rows(), w.cols(), slices);
    for (std::size_t t = 0; t < slices; ++t) std::copy(w.slice(0).begin(), w.slice(0).end(), out.slice(t).begin());
    return out;
}

// Intermediates of one layer kept for the backward pass.
struct layer_trace {
    tensor3 input;           // X        N x Din x T
    tensor3 mixed_input;     // X x3 M
    tensor3 mixed_weight;    // W x3 M   Din x Dout x T
    tensor3 propagated;      // (X x3 M)(W x3 M), face-wise
    tensor3 pre_activation;  // ((A x3 M)(X x3 M)(W x3 M)) x3 M^-1
    tensor3 output;          // activation(pre_activation)
};

namespace detail {

inline layer_trace tgcn_layer_traced(const sparse_slices& mixed_adj, const tensor3& x, const tensor3& w,
                                     const banded_lower_matrix& m, activation act) {
    const std::size_t slices = m.order();
    if (x.rows() != mixed_adj.nodes || x.slices() != slices)
        throw shape_error("tgcn_layer: input " + x.shape() + " does not match " + std::to_string(mixed_adj.nodes) +
                          " nodes and " + std::to_string(slices) + " slices");
    if (w.rows() != x.cols())
        throw shape_error("tgcn_layer: weight " + w.shape() + " does not accept input width " +
                          std::to_string(x.cols()));
    layer_trace tr;
    tr.input = x;
    tr.mixed_input = m_transform(x, m);
    tr.mixed_weight = m_transform(expand_weight(w, slices), m);
    tr.propagated = facewise_product(tr.mixed_input, tr.mixed_weight);
    tensor3 mixed_out(x.rows(), w.cols(), slices);
    for (std::size_t t = 0; t < slices; ++t)
        mixed_adj.slices[t].multiply(tr.propagated.slice(t), w.cols(), mixed_out.slice(t));
    tr.pre_activation = inverse_m_transform(mixed_out, m);
    tr.output = tr.pre_activation;
    for (double& v : tr.output.values()) v = apply(act, v);
    return tr;
}

}  // namespace detail

// F = activation(A~ * X * W) with * the M-product, evaluated in the
// transformed domain.
inline tensor3 tgcn_layer(const sparse_slices& normalized_adj, const tensor3& x, const tensor3& w,
                          const banded_lower_matrix& m, activation act) {
    return detail::tgcn_layer_traced(mix_adjacency(normalized_adj, m), x, w, m, act).output;
}

struct forward_trace {
    banded_lower_matrix mixing;
    sparse_slices mixed_adjacency;
    std::vector<layer_trace> layers;

    const tensor3& output() const { return layers.back().output; }
};

inline forward_trace forward_traced(const model_parameters& params, const sparse_slices& normalized_adj,
                                    const model_config& cfg) {
    const std::size_t slices = params.slice_count();
    if (normalized_adj.slice_count() != slices || normalized_adj.nodes != params.node_count())
        throw shape_error("forward: adjacency is " + std::to_string(normalized_adj.nodes) + " nodes x " +
                          std::to_string(normalized_adj.slice_count()) + " slices, parameters expect " +
                          std::to_string(params.node_count()) + " x " + std::to_string(slices));
    if (params.layers.empty()) throw shape_error("forward: model has no layers");
    forward_trace tr;
    tr.mixing = materialize_mixing(params.mixing);
    tr.mixed_adjacency = mix_adjacency(normalized_adj, tr.mixing);
    tensor3 h = embed_nodes(params.embedding, slices);
    for (const auto& w : params.layers) {
        tr.layers.push_back(detail::tgcn_layer_traced(tr.mixed_adjacency, h, w, tr.mixing, cfg.hidden));
        h = tr.layers.back().output;
    }
    return tr;
}

// Node representation tensor F (N x D_L x T) of the stacked layers.
inline tensor3 forward(const model_parameters& params, const sparse_slices& normalized_adj, const model_config& cfg) {
    return forward_traced(params, normalized_adj, cfg).output();
}

inline double predict_edge(const tensor3& f, std::size_t i, std::size_t j, std::size_t t,
                           const prediction_head& head) {
    if (i >= f.rows() || j >= f.rows() || t >= f.slices())
        throw argument_error("edge (" + std::to_string(i) + ", " + std::to_string(j) + ", " + std::to_string(t) +
                             ") outside " + std::to_string(f.rows()) + " nodes x " + std::to_string(f.slices()) +
                             " slices");
    const std::size_t d = f.cols();
    if (head.weight.rows() != 2 * d || head.weight.cols() != d || head.bias.size() != d ||
        head.regressor.size() != d)
        throw shape_error("prediction head does not match representation width " + std::to_string(d));
    double out = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
        double h = f(i, c, t) * f(j, c, t) + head.bias[c];
        for (std::size_t r = 0; r < d; ++r) h += f(i, r, t) * head.weight(r, c) + f(j, r, t) * head.weight(d + r, c);
        out += std::tanh(h) * head.regressor[c];
    }
    return out;
}

}  // namespace tgcn
