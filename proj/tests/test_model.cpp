#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "tgcn/model.hpp"
#include "tgcn/synth.hpp"

using namespace tgcn;

namespace {

mixing_matrix random_mixing(std::mt19937_64& gen, std::size_t order, std::size_t window, double scale = 3.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    mixing_matrix m(order, window);
    for (std::size_t t = 0; t < order; ++t)
        for (std::size_t k = m.raw.first_col(t); k <= t; ++k) m.raw.at(t, k) = u(gen);
    return m;
}

// raw 0/1 adjacency of slice t as a dense matrix
oracle::dense raw_dense(const sparse_adjacency& adj, std::size_t t) {
    const std::size_t n = adj.node_count();
    oracle::dense a(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a[i][j] = adj.contains(i, j, t) ? 1.0 : 0.0;
    return a;
}

tensor3 stack(const std::vector<oracle::dense>& slices) {
    tensor3 out(slices[0].size(), slices[0][0].size(), slices.size());
    for (std::size_t t = 0; t < slices.size(); ++t)
        for (std::size_t i = 0; i < slices[t].size(); ++i)
            for (std::size_t j = 0; j < slices[t][i].size(); ++j) out(i, j, t) = slices[t][i][j];
    return out;
}

oracle::dense slice_of(const tensor3& x, std::size_t t) {
    oracle::dense d(x.rows(), std::vector<double>(x.cols()));
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) d[i][j] = x(i, j, t);
    return d;
}

// softmax of a row of raw values over the band, computed directly
oracle::dense softmax_oracle(const mixing_matrix& m) {
    const std::size_t T = m.order(), b = m.window();
    oracle::dense out(T, std::vector<double>(T, 0.0));
    for (std::size_t t = 0; t < T; ++t) {
        const std::size_t first = t + 1 >= b ? t + 1 - b : 0;
        double total = 0.0;
        for (std::size_t k = first; k <= t; ++k) total += std::exp(m.raw(t, k));
        for (std::size_t k = first; k <= t; ++k) out[t][k] = std::exp(m.raw(t, k)) / total;
    }
    return out;
}

tensor3 tanh_of(tensor3 x) {
    for (double& v : x.values()) v = std::tanh(v);
    return x;
}

struct small_problem {
    dynamic_graph graph;
    sparse_slices normalized;
    tensor3 dense_normalized;
};

small_problem make_problem(std::size_t nodes, std::size_t slices, std::uint64_t seed) {
    auto g = synth_generate({.nodes = nodes, .slices = slices, .density = 0.25, .seed = seed});
    std::vector<oracle::dense> norm;
    for (std::size_t t = 0; t < slices; ++t) norm.push_back(oracle::normalized(raw_dense(g.adjacency(), t)));
    auto sparse = normalize_adjacency(g.adjacency());
    return {std::move(g), std::move(sparse), stack(norm)};
}

}  // namespace

TEST(Mixing, SoftmaxExamples) {
    EXPECT_EQ(materialize_mixing(mixing_matrix(4, 1)).to_dense(), matrix::identity(4));

    const auto two = materialize_mixing(mixing_matrix(2, 2)).to_dense();
    EXPECT_EQ(two(0, 0), 1.0);
    EXPECT_EQ(two(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(two(1, 0), 0.5);
    EXPECT_DOUBLE_EQ(two(1, 1), 0.5);

    mixing_matrix m(3, 2);
    m.raw.at(2, 1) = std::log(2.0);
    const auto d = materialize_mixing(m).to_dense();
    EXPECT_EQ(d(2, 0), 0.0);
    EXPECT_NEAR(d(2, 1), 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(d(2, 2), 1.0 / 3.0, 1e-15);
}

TEST(Mixing, MatchesDirectSoftmax) {
    std::mt19937_64 gen(8);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t T = 1 + gen() % 7;
        const std::size_t b = 1 + gen() % T;
        const auto m = random_mixing(gen, T, b);
        const auto got = materialize_mixing(m).to_dense();
        const auto want = softmax_oracle(m);
        for (std::size_t t = 0; t < T; ++t) {
            double row = 0.0;
            for (std::size_t k = 0; k < T; ++k) {
                EXPECT_NEAR(got(t, k), want[t][k], 1e-15);
                row += got(t, k);
                if (k > t || k + b <= t) {
                    EXPECT_EQ(got(t, k), 0.0);
                }
            }
            EXPECT_NEAR(row, 1.0, 1e-12);
            EXPECT_GT(got(t, t), 0.0);
        }
    }
}

TEST(Mixing, LargeRawValuesStayFinite) {
    mixing_matrix m(3, 3);
    m.raw.at(2, 0) = 800.0;
    m.raw.at(2, 1) = -800.0;
    const auto d = materialize_mixing(m).to_dense();
    EXPECT_NEAR(d(2, 0), 1.0, 1e-15);
    EXPECT_TRUE(std::isfinite(d(2, 1)));
}

TEST(Embed, SlicesAreEmbeddingTranspose) {
    matrix w(2, 3);
    for (std::size_t k = 0; k < 6; ++k) w.values()[k] = static_cast<double>(k + 1);
    const auto x = embed_nodes(w, 1);
    EXPECT_EQ(x.rows(), 3u);
    EXPECT_EQ(x.cols(), 2u);
    EXPECT_EQ(x(0, 0, 0), 1.0);
    EXPECT_EQ(x(0, 1, 0), 4.0);
    EXPECT_EQ(x(2, 1, 0), 6.0);
}

TEST(Embed, MatchesOneHotContraction) {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(-1, 1);
    const std::size_t N = 5, D = 3, T = 4;
    matrix w(D, N);
    for (double& v : w.values()) v = u(gen);
    const auto x = embed_nodes(w, T);
    // one-hot tensor O(i, n, t) = [i == n]; X(i, d, t) = sum_n O(i, n, t) W(d, n)
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t d = 0; d < D; ++d) {
                double s = 0.0;
                for (std::size_t n = 0; n < N; ++n) s += (i == n ? 1.0 : 0.0) * w(d, n);
                EXPECT_EQ(x(i, d, t), s);
            }
}

TEST(Layer, IdentityMixingIsPerSnapshotGcn) {
    std::mt19937_64 gen(2);
    const auto p = make_problem(6, 4, 5);
    const auto x = oracle::random_tensor(gen, 6, 3, 4);
    const auto w = oracle::random_tensor(gen, 3, 2, 4);
    const auto f = tgcn_layer(p.normalized, x, w, banded_lower_matrix::identity(4), activation::tanh);
    for (std::size_t t = 0; t < 4; ++t) {
        const auto expected =
            oracle::matmul(oracle::matmul(slice_of(p.dense_normalized, t), slice_of(x, t)), slice_of(w, t));
        for (std::size_t i = 0; i < 6; ++i)
            for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(f(i, j, t), std::tanh(expected[i][j]), 1e-14);
    }
}

TEST(Layer, ZeroWeightGivesZero) {
    std::mt19937_64 gen(3);
    const auto p = make_problem(5, 3, 2);
    const auto x = oracle::random_tensor(gen, 5, 4, 3);
    const auto m = materialize_mixing(random_mixing(gen, 3, 2));
    const auto f = tgcn_layer(p.normalized, x, tensor3(4, 2, 3), m, activation::tanh);
    for (double v : f.values()) EXPECT_EQ(v, 0.0);
}

TEST(Layer, MatchesMProductComposition) {
    std::mt19937_64 gen(4);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t T = 2 + trial % 4;
        const std::size_t b = 1 + trial % T;
        const auto p = make_problem(5, T, 10 + trial);
        const auto x = oracle::random_tensor(gen, 5, 3, T);
        const auto w = oracle::random_tensor(gen, 3, 2, T);
        const auto mix = random_mixing(gen, T, b);
        const auto m = oracle::dense(softmax_oracle(mix));
        const auto expected = tanh_of(oracle::m_product(oracle::m_product(p.dense_normalized, x, m), w, m));
        const auto got = tgcn_layer(p.normalized, x, w, materialize_mixing(mix), activation::tanh);
        EXPECT_LT(oracle::max_abs_diff(got, expected), 1e-10);
    }
}

TEST(Layer, SigmoidActivation) {
    std::mt19937_64 gen(5);
    const auto p = make_problem(4, 2, 1);
    const auto x = oracle::random_tensor(gen, 4, 2, 2);
    const auto w = oracle::random_tensor(gen, 2, 2, 2);
    const auto m = materialize_mixing(mixing_matrix(2, 2));
    const auto pre = tgcn_layer(p.normalized, x, w, m, activation::tanh);
    const auto sig = tgcn_layer(p.normalized, x, w, m, activation::sigmoid);
    for (std::size_t k = 0; k < pre.size(); ++k) {
        const double a = std::atanh(pre.values()[k]);
        EXPECT_NEAR(sig.values()[k], 1.0 / (1.0 + std::exp(-a)), 1e-12);
    }
}

TEST(Layer, ShapeErrors) {
    const auto p = make_problem(4, 2, 1);
    const auto m = banded_lower_matrix::identity(2);
    EXPECT_THROW(tgcn_layer(p.normalized, tensor3(5, 2, 2), tensor3(2, 2, 2), m, activation::tanh), shape_error);
    EXPECT_THROW(tgcn_layer(p.normalized, tensor3(4, 2, 2), tensor3(3, 2, 2), m, activation::tanh), shape_error);
    EXPECT_THROW(tgcn_layer(p.normalized, tensor3(4, 2, 2), tensor3(2, 2, 2), banded_lower_matrix::identity(3),
                            activation::tanh),
                 shape_error);
}

TEST(Forward, StackedLayersCompose) {
    std::mt19937_64 gen(6);
    for (std::size_t depth : {1u, 2u, 3u}) {
        const auto p = make_problem(6, 4, 20 + depth);
        model_config cfg;
        cfg.widths.assign(depth + 1, 3);
        cfg.window = 2;
        cfg.init_seed = depth;
        auto params = init_parameters(cfg, 6, 4);
        params.mixing = random_mixing(gen, 4, 2, 1.0);
        const auto m = softmax_oracle(params.mixing);

        tensor3 h(6, 3, 4);
        for (std::size_t t = 0; t < 4; ++t)
            for (std::size_t i = 0; i < 6; ++i)
                for (std::size_t d = 0; d < 3; ++d) h(i, d, t) = params.embedding(d, i);
        for (const auto& w : params.layers) h = tanh_of(oracle::m_product(oracle::m_product(p.dense_normalized, h, m), w, m));

        EXPECT_LT(oracle::max_abs_diff(forward(params, p.normalized, cfg), h), 1e-10);
    }
}

TEST(Forward, TiedWeightsMatchBroadcast) {
    const auto p = make_problem(5, 3, 9);
    model_config tied{.widths = {2, 3}, .window = 2, .tied = true, .init_seed = 4};
    const auto params = init_parameters(tied, 5, 3);
    ASSERT_EQ(params.layers[0].slices(), 1u);
    auto untied_params = params;
    untied_params.layers[0] = expand_weight(params.layers[0], 3);
    model_config untied = tied;
    untied.tied = false;
    EXPECT_EQ(forward(params, p.normalized, tied), forward(untied_params, p.normalized, untied));
}

TEST(Init, DeterministicAndBounded) {
    model_config cfg{.widths = {4, 3, 2}, .window = 2, .init_seed = 7};
    const auto a = init_parameters(cfg, 10, 5);
    EXPECT_EQ(a, init_parameters(cfg, 10, 5));
    cfg.init_seed = 8;
    EXPECT_NE(a, init_parameters(cfg, 10, 5));
    for (double v : a.embedding.values()) EXPECT_LE(std::abs(v), 1.0 / std::sqrt(10.0));
    for (double v : a.head.bias) EXPECT_EQ(v, 0.0);
    for (double v : a.head.regressor) EXPECT_LE(std::abs(v), 0.1);
    EXPECT_EQ(a.layers[0].slices(), 5u);
    EXPECT_EQ(a.head.weight.rows(), 4u);
    EXPECT_EQ(a.head.weight.cols(), 2u);
}

TEST(Config, Validation) {
    EXPECT_THROW((model_config{.widths = {4}}.validate(3)), argument_error);
    EXPECT_THROW((model_config{.widths = {4, 0}}.validate(3)), argument_error);
    EXPECT_THROW((model_config{.widths = {4, 2}, .window = 0}.validate(3)), argument_error);
    EXPECT_THROW((model_config{.widths = {4, 2}, .window = 4}.validate(3)), argument_error);
    EXPECT_NO_THROW((model_config{.widths = {4, 2}, .window = 3}.validate(3)));
}

TEST(PredictEdge, ZeroRegressorGivesZero) {
    std::mt19937_64 gen(7);
    const auto f = oracle::random_tensor(gen, 4, 3, 2);
    prediction_head head{matrix(6, 3), std::vector<double>(3, 0.5), std::vector<double>(3, 0.0)};
    for (double& v : head.weight.values()) v = 0.3;
    EXPECT_EQ(predict_edge(f, 1, 2, 1, head), 0.0);
}

TEST(PredictEdge, SingleUnitExample) {
    tensor3 f(2, 1, 1);
    f(0, 0, 0) = 1.0;
    f(1, 0, 0) = 1.0;
    prediction_head head{matrix(2, 1), {0.0}, {1.0}};
    EXPECT_NEAR(predict_edge(f, 0, 1, 0, head), 0.761594, 1e-6);
    EXPECT_DOUBLE_EQ(predict_edge(f, 0, 1, 0, head), std::tanh(1.0));
}

TEST(PredictEdge, MatchesTermByTermOracleAndBound) {
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t D = 1 + trial % 5;
        const auto f = oracle::random_tensor(gen, 5, D, 3);
        prediction_head head{matrix(2 * D, D), std::vector<double>(D), std::vector<double>(D)};
        for (double& v : head.weight.values()) v = u(gen);
        for (double& v : head.bias) v = u(gen);
        for (double& v : head.regressor) v = u(gen);
        const std::size_t i = gen() % 5, j = gen() % 5, t = gen() % 3;
        std::vector<double> fi(D), fj(D);
        for (std::size_t c = 0; c < D; ++c) {
            fi[c] = f(i, c, t);
            fj[c] = f(j, c, t);
        }
        const double got = predict_edge(f, i, j, t, head);
        EXPECT_NEAR(got, oracle::head(fi, fj, oracle::to_dense(head.weight), head.bias, head.regressor), 1e-12);
        double bound = 0.0;
        for (double v : head.regressor) bound += std::abs(v);
        EXPECT_LE(std::abs(got), bound);
    }
}

TEST(PredictEdge, OutOfRange) {
    const tensor3 f(3, 2, 2);
    const prediction_head head{matrix(4, 2), std::vector<double>(2), std::vector<double>(2)};
    EXPECT_THROW(predict_edge(f, 3, 0, 0, head), argument_error);
    EXPECT_THROW(predict_edge(f, 0, 3, 0, head), argument_error);
    EXPECT_THROW(predict_edge(f, 0, 0, 2, head), argument_error);
    EXPECT_THROW(predict_edge(f, 0, 0, 0, prediction_head{matrix(2, 2), {0, 0}, {0, 0}}), shape_error);
}
