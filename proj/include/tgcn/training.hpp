#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tgcn/eval.hpp"
#include "tgcn/model.hpp"
#include "tgcn/rng.hpp"
#include "tgcn/split.hpp"

namespace tgcn {

// Per-entry Huber value of the residual e.
inline double huber(double e, double delta) {
    const double a = std::abs(e);
    return a < delta ? 0.5 * e * e : delta * (a - 0.5 * delta);
}

// d huber / d e. At |e| == delta the quadratic branch is used; both
// branches give delta * sign(e) there.
inline double huber_derivative(double e, double delta) {
    return std::abs(e) <= delta ? e : (e > 0 ? delta : -delta);
}

inline double huber_loss(std::span<const prediction_pair> pairs, double delta) {
    if (!(delta > 0.0)) throw argument_error("huber threshold must be positive");
    double total = 0.0;
    for (const auto& p : pairs) total += huber(p.target - p.prediction, delta);
    return total;
}

struct loss_and_gradients {
    double loss = 0.0;
    gradient_set grads;
};

namespace detail {

inline double frobenius_dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

// Backward through the link-weight head for one entry. `upstream` is
// d loss / d prediction; contributions accumulate into d_f and d_head.
inline void head_backward(const tensor3& f, const prediction_head& head, const observed_entry& e, double upstream,
                          tensor3& d_f, prediction_head& d_head) {
    const std::size_t d = f.cols();
    const std::size_t i = e.src, j = e.dst, t = e.slice;
    for (std::size_t c = 0; c < d; ++c) {
        double h = f(i, c, t) * f(j, c, t) + head.bias[c];
        for (std::size_t r = 0; r < d; ++r) h += f(i, r, t) * head.weight(r, c) + f(j, r, t) * head.weight(d + r, c);
        const double th = std::tanh(h);
        d_head.regressor[c] += upstream * th;
        const double du = upstream * head.regressor[c] * (1.0 - th * th);
        if (du == 0.0) continue;
        d_head.bias[c] += du;
        d_f(i, c, t) += du * f(j, c, t);
        d_f(j, c, t) += du * f(i, c, t);
        for (std::size_t r = 0; r < d; ++r) {
            d_head.weight(r, c) += f(i, r, t) * du;
            d_head.weight(d + r, c) += f(j, r, t) * du;
            d_f(i, r, t) += head.weight(r, c) * du;
            d_f(j, r, t) += head.weight(d + r, c) * du;
        }
    }
}

// d loss / d M restricted to the band accumulates into d_mix.
inline void accumulate_mixing_from_transform(const tensor3& d_mixed, const tensor3& source,
                                             const banded_lower_matrix& m, banded_lower_matrix& d_mix) {
    for (std::size_t t = 0; t < m.order(); ++t)
        for (std::size_t k = m.first_col(t); k <= t; ++k)
            d_mix.at(t, k) += frobenius_dot(d_mixed.slice(t), source.slice(k));
}

}  // namespace detail

// Loss over the batch and exact reverse-mode gradients of every parameter
// block, including the mixing softmax and the banded triangular solve.
inline loss_and_gradients compute_gradients(const model_parameters& params, const sparse_slices& normalized_adj,
                                            std::span<const observed_entry> batch, const model_config& cfg,
                                            double delta) {
    if (batch.empty()) throw argument_error("compute_gradients: empty batch");
    if (!(delta > 0.0)) throw argument_error("huber threshold must be positive");
    const auto trace = forward_traced(params, normalized_adj, cfg);
    const auto& f = trace.output();
    const auto& m = trace.mixing;

    loss_and_gradients out;
    out.grads = params.zeros_like();
    auto& g = out.grads;

    tensor3 d_out(f.rows(), f.cols(), f.slices());
    for (const auto& e : batch) {
        const double pred = predict_edge(f, e.src, e.dst, e.slice, params.head);
        const double residual = e.weight - pred;
        out.loss += huber(residual, delta);
        const double upstream = -huber_derivative(residual, delta);
        if (upstream != 0.0) detail::head_backward(f, params.head, e, upstream, d_out, g.head);
    }

    banded_lower_matrix d_mix(m.order(), m.band());
    for (std::size_t l = trace.layers.size(); l-- > 0;) {
        const auto& tr = trace.layers[l];
        const std::size_t slices = m.order();
        const std::size_t n = tr.input.rows();
        const std::size_t din = tr.input.cols();
        const std::size_t dout = tr.output.cols();

        tensor3 d_pre = d_out;
        for (std::size_t k = 0; k < d_pre.size(); ++k)
            d_pre.values()[k] *= derivative_from_output(cfg.hidden, tr.output.values()[k]);

        // G = M^-1 G^  =>  dG^ = M^-T dG,  dM -= dG^ G^T per tube
        const tensor3 d_mixed_out = inverse_transposed_m_transform(d_pre, m);
        for (std::size_t t = 0; t < slices; ++t)
            for (std::size_t k = m.first_col(t); k <= t; ++k)
                d_mix.at(t, k) -= detail::frobenius_dot(d_mixed_out.slice(t), tr.pre_activation.slice(k));

        // G^_t = A^_t P_t with A^_t = sum_k M(t,k) A~_k
        tensor3 d_prop(n, dout, slices);
        for (std::size_t t = 0; t < slices; ++t) {
            trace.mixed_adjacency.slices[t].multiply_transposed(d_mixed_out.slice(t), dout, d_prop.slice(t));
            const auto dg = d_mixed_out.slice(t);
            const auto p = tr.propagated.slice(t);
            for (std::size_t k = m.first_col(t); k <= t; ++k) {
                const auto& a = normalized_adj.slices[k];
                double acc = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t e = a.row_ptr[i]; e < a.row_ptr[i + 1]; ++e)
                        acc += a.values[e] * detail::frobenius_dot(dg.subspan(i * dout, dout),
                                                                   p.subspan(a.cols[e] * dout, dout));
                d_mix.at(t, k) += acc;
            }
        }

        // P_t = X^_t W^_t
        tensor3 d_mixed_in(n, din, slices);
        tensor3 d_mixed_w(din, dout, slices);
        for (std::size_t t = 0; t < slices; ++t) {
            detail::gemm(d_prop.slice(t), false, tr.mixed_weight.slice(t), true, d_mixed_in.slice(t), n, dout, din);
            detail::gemm(tr.mixed_input.slice(t), true, d_prop.slice(t), false, d_mixed_w.slice(t), din, n, dout);
        }

        // X^ = X x3 M and W^ = W x3 M
        const tensor3 w_full = expand_weight(params.layers[l], slices);
        detail::accumulate_mixing_from_transform(d_mixed_in, tr.input, m, d_mix);
        detail::accumulate_mixing_from_transform(d_mixed_w, w_full, m, d_mix);
        const tensor3 d_w_full = transposed_m_transform(d_mixed_w, m);
        auto& d_w = g.layers[l];
        if (d_w.slices() == slices) {
            d_w = d_w_full;
        } else {
            for (std::size_t t = 0; t < slices; ++t) {
                const auto src = d_w_full.slice(t);
                auto dst = d_w.slice(0);
                for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
            }
        }
        d_out = transposed_m_transform(d_mixed_in, m);
    }

    // X(i, d, t) = W_n(d, i) for every t
    for (std::size_t t = 0; t < d_out.slices(); ++t)
        for (std::size_t i = 0; i < d_out.rows(); ++i)
            for (std::size_t d = 0; d < d_out.cols(); ++d) g.embedding(d, i) += d_out(i, d, t);

    // softmax rows: d raw_tk = M_tk (dM_tk - sum_j M_tj dM_tj)
    for (std::size_t t = 0; t < m.order(); ++t) {
        double inner = 0.0;
        for (std::size_t k = m.first_col(t); k <= t; ++k) inner += m(t, k) * d_mix(t, k);
        for (std::size_t k = m.first_col(t); k <= t; ++k) g.mixing.raw.at(t, k) = m(t, k) * (d_mix(t, k) - inner);
    }

    if (!std::isfinite(out.loss)) throw numerical_error("loss is not finite");
    g.for_each_block([](const std::string& name, std::span<const double> v) {
        if (!all_finite(v)) throw numerical_error("gradient of parameter block " + name + " is not finite");
    });
    return out;
}

inline loss_and_gradients compute_gradients(const model_parameters& params, const dynamic_graph& g,
                                            std::span<const observed_entry> batch, const model_config& cfg,
                                            double delta = 1.0) {
    return compute_gradients(params, normalize_adjacency(g.adjacency()), batch, cfg, delta);
}

// Huber loss of the batch without gradients.
inline double batch_loss(const model_parameters& params, const sparse_slices& normalized_adj,
                         std::span<const observed_entry> batch, const model_config& cfg, double delta) {
    const auto f = forward(params, normalized_adj, cfg);
    return huber_loss(predict_entries(f, params.head, batch), delta);
}

struct finite_difference_report {
    double max_relative_error = 0.0;
    std::string worst_parameter;
    std::size_t coordinates = 0;
};

// Relative error |a - n| / max(|a|, |n|, floor); the floor keeps
// coordinates whose true gradient is ~0 from dividing noise by noise.
inline constexpr double gradient_check_floor = 1e-6;

inline bool is_mixing_padding(const mixing_matrix& mix, std::size_t slot) {
    const std::size_t t = slot / mix.window();
    const std::size_t c = slot % mix.window();
    return t + 1 + c < mix.window();
}

// Central differences on every parameter coordinate compared against
// compute_gradients. Padding slots of the mixing band are skipped.
inline finite_difference_report finite_difference_check(const model_parameters& params,
                                                        const sparse_slices& normalized_adj,
                                                        std::span<const observed_entry> batch,
                                                        const model_config& cfg, double delta, double epsilon) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        throw argument_error("finite-difference step must be positive, got " + std::to_string(epsilon));
    const auto analytic = compute_gradients(params, normalized_adj, batch, cfg, delta).grads;

    std::vector<std::string> names;
    std::vector<std::span<const double>> grad_blocks;
    analytic.for_each_block([&](const std::string& name, std::span<const double> v) {
        names.push_back(name);
        grad_blocks.push_back(v);
    });

    auto entry_losses = [&](const model_parameters& p) {
        const auto pairs = predict_entries(forward(p, normalized_adj, cfg), p.head, batch);
        std::vector<double> out(pairs.size());
        for (std::size_t e = 0; e < pairs.size(); ++e) out[e] = huber(pairs[e].target - pairs[e].prediction, delta);
        return out;
    };

    finite_difference_report report;
    model_parameters probe = params;
    std::size_t block = 0;
    probe.for_each_block([&](const std::string& name, std::span<double> v) {
        const bool mixing = name == "mixing";
        for (std::size_t k = 0; k < v.size(); ++k) {
            if (mixing && is_mixing_padding(params.mixing, k)) continue;
            const double saved = v[k];
            v[k] = saved + epsilon;
            const auto up = entry_losses(probe);
            v[k] = saved - epsilon;
            const auto down = entry_losses(probe);
            v[k] = saved;
            // differences per entry before summing: less cancellation than
            // differencing two batch totals
            double diff = 0.0;
            for (std::size_t e = 0; e < up.size(); ++e) diff += up[e] - down[e];
            const double numeric = diff / (2.0 * epsilon);
            const double a = grad_blocks[block][k];
            const double rel = std::abs(a - numeric) /
                               std::max({std::abs(a), std::abs(numeric), gradient_check_floor});
            ++report.coordinates;
            if (report.worst_parameter.empty() || rel > report.max_relative_error) {
                report.max_relative_error = rel;
                report.worst_parameter = name + "[" + std::to_string(k) + "]";
            }
        }
        ++block;
    });
    return report;
}

enum class optimizer_kind { adam, gradient_descent };

inline optimizer_kind parse_optimizer(const std::string& name) {
    if (name == "adam") return optimizer_kind::adam;
    if (name == "gd" || name == "sgd" || name == "gradient_descent") return optimizer_kind::gradient_descent;
    throw argument_error("unknown optimizer '" + name + "' (expected adam or gd)");
}

inline const char* to_string(optimizer_kind o) { return o == optimizer_kind::adam ? "adam" : "gd"; }

struct train_config {
    std::size_t epochs = 500;
    double learning_rate = 1e-2;
    optimizer_kind optimizer = optimizer_kind::adam;
    double huber_delta = 1.0;
    std::uint64_t seed = 0;
    // stop after this many epochs without a validation improvement; 0 = off
    std::size_t patience = 0;
    double weight_decay = 0.0;
    // entries per update; 0 = full batch
    std::size_t batch_size = 32;
    model_config model;

    void validate() const {
        if (!(huber_delta > 0.0)) throw argument_error("huber threshold delta must be positive");
        if (!(learning_rate > 0.0)) throw argument_error("learning rate must be positive");
        if (weight_decay < 0.0) throw argument_error("weight decay must be non-negative");
    }
};

// Adaptive-moment update with decay rates 0.9 / 0.999 and epsilon 1e-8,
// or plain gradient descent.
class optimizer {
public:
    optimizer(const train_config& cfg, const model_parameters& like)
        : kind_(cfg.optimizer), rate_(cfg.learning_rate), decay_(cfg.weight_decay) {
        if (kind_ == optimizer_kind::adam) {
            first_ = like.zeros_like();
            second_ = like.zeros_like();
        }
    }

    void step(model_parameters& params, const gradient_set& grads) {
        ++steps_;
        std::vector<std::span<const double>> g;
        grads.for_each_block([&](const std::string&, std::span<const double> v) { g.push_back(v); });
        std::vector<std::span<double>> m1, m2;
        if (kind_ == optimizer_kind::adam) {
            first_.for_each_block([&](const std::string&, std::span<double> v) { m1.push_back(v); });
            second_.for_each_block([&](const std::string&, std::span<double> v) { m2.push_back(v); });
        }
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(steps_));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(steps_));
        std::size_t b = 0;
        params.for_each_block([&](const std::string& name, std::span<double> p) {
            const bool mixing = name == "mixing";
            for (std::size_t k = 0; k < p.size(); ++k) {
                if (mixing && is_mixing_padding(params.mixing, k)) continue;
                const double grad = g[b][k] + decay_ * p[k];
                if (kind_ == optimizer_kind::gradient_descent) {
                    p[k] -= rate_ * grad;
                } else {
                    m1[b][k] = beta1 * m1[b][k] + (1.0 - beta1) * grad;
                    m2[b][k] = beta2 * m2[b][k] + (1.0 - beta2) * grad * grad;
                    p[k] -= rate_ * (m1[b][k] / c1) / (std::sqrt(m2[b][k] / c2) + eps);
                }
            }
            ++b;
        });
    }

    static constexpr double beta1 = 0.9;
    static constexpr double beta2 = 0.999;
    static constexpr double eps = 1e-8;

private:
    optimizer_kind kind_;
    double rate_;
    double decay_;
    std::size_t steps_ = 0;
    model_parameters first_;
    model_parameters second_;
};

struct epoch_record {
    std::size_t epoch;
    double train_loss;
    double train_mae;
    double train_rmse;
    double val_mae;
    double val_rmse;

    friend bool operator==(const epoch_record&, const epoch_record&) = default;
};

struct training_result {
    model_parameters params;  // best validation MAE
    std::size_t best_epoch = 0;
    std::vector<epoch_record> log;
};

inline void write_metrics_csv(std::span<const epoch_record> log, std::ostream& out) {
    out << "epoch,train_loss,train_mae,train_rmse,val_mae,val_rmse\n";
    for (const auto& r : log)
        out << r.epoch << ',' << detail::format_real(r.train_loss) << ',' << detail::format_real(r.train_mae) << ','
            << detail::format_real(r.train_rmse) << ',' << detail::format_real(r.val_mae) << ','
            << detail::format_real(r.val_rmse) << '\n';
}

// Epoch 0 records the initial parameters; epoch e the parameters after e
// passes over the training entries. Returns the parameters with the lowest
// validation MAE (earliest on ties).
inline training_result train(const dynamic_graph& g, const split_assignment& splits, const train_config& cfg,
                             model_parameters initial) {
    cfg.validate();
    cfg.model.validate(g.slice_count());
    if (splits.tags.size() != g.observed().size())
        throw argument_error("split assignment does not match the graph's observed entries");
    const auto train_entries = split_entries(g, splits, split_tag::train);
    auto val_entries = split_entries(g, splits, split_tag::validation);
    if (train_entries.empty()) throw data_error("training split is empty");
    if (val_entries.empty()) val_entries = train_entries;
    const auto adj = normalize_adjacency(g.adjacency());

    model_parameters params = std::move(initial);
    optimizer opt(cfg, params);
    rng shuffler(cfg.seed);
    std::vector<std::size_t> order(train_entries.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;

    auto record = [&](std::size_t epoch) {
        tensor3 f;
        try {
            f = forward(params, adj, cfg.model);
        } catch (const singular_matrix_error& e) {
            throw numerical_error("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
        }
        const auto tr = predict_entries(f, params.head, train_entries);
        const auto va = predict_entries(f, params.head, val_entries);
        epoch_record r{epoch, huber_loss(tr, cfg.huber_delta), mae(tr), rmse(tr), mae(va), rmse(va)};
        if (!std::isfinite(r.train_loss) || !std::isfinite(r.val_mae))
            throw numerical_error("training diverged at epoch " + std::to_string(epoch));
        return r;
    };

    training_result result;
    result.log.push_back(record(0));
    result.params = params;
    double best = result.log.back().val_mae;

    const bool full_batch = cfg.batch_size == 0 || cfg.batch_size >= train_entries.size();
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        try {
            if (full_batch) {
                opt.step(params, compute_gradients(params, adj, train_entries, cfg.model, cfg.huber_delta).grads);
            } else {
                shuffler.shuffle(order);
                std::vector<observed_entry> batch;
                for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
                    batch.clear();
                    for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k)
                        batch.push_back(train_entries[order[k]]);
                    opt.step(params, compute_gradients(params, adj, batch, cfg.model, cfg.huber_delta).grads);
                }
            }
        } catch (const numerical_error& e) {
            throw numerical_error("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
        } catch (const singular_matrix_error& e) {
            throw numerical_error("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
        }
        result.log.push_back(record(epoch));
        if (result.log.back().val_mae < best) {
            best = result.log.back().val_mae;
            result.best_epoch = epoch;
            result.params = params;
        }
        if (cfg.patience > 0 && epoch - result.best_epoch >= cfg.patience) break;
    }
    return result;
}

inline training_result train(const dynamic_graph& g, const split_assignment& splits, const train_config& cfg) {
    cfg.model.validate(g.slice_count());
    return train(g, splits, cfg, init_parameters(cfg.model, g.node_count(), g.slice_count()));
}

}  // namespace tgcn
