#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>
#include <string>
#include <vector>

#include "tgcn/graph.hpp"
#include "tgcn/rng.hpp"

namespace tgcn {

enum class synth_dynamics {
    // weight is a smooth function of (i, j, t) plus bounded noise
    smooth,
    // every node is active or idle in each slice; active nodes emit more
    // links, and a link's weight is set by its source's state one slice
    // earlier
    lagged,
};

struct synth_params {
    std::size_t nodes = 20;
    std::size_t slices = 8;
    double density = 0.15;
    double weight_lo = 1.0;
    double weight_hi = 5.0;
    std::uint64_t seed = 0;
    synth_dynamics dynamics = synth_dynamics::smooth;
    // lagged only: probability a node keeps its state into the next slice
    // (otherwise it flips); 0.5 makes consecutive states independent
    double persistence = 0.5;
};

// lagged only: link-emission weight of an active source relative to an idle one
inline constexpr double synth_active_rate = 8.0;

// floor(density * N^2) directed links per slice, capped at N(N-1)
inline std::size_t synth_links_per_slice(const synth_params& p) {
    const auto wanted = static_cast<std::size_t>(std::floor(p.density * static_cast<double>(p.nodes * p.nodes)));
    return std::min(wanted, p.nodes * (p.nodes - 1));
}

// Seeded random dynamic graph with learnable weights. Node labels are the
// decimal indices, timestamps are the slice indices.
inline dynamic_graph synth_generate(const synth_params& p) {
    if (p.nodes < 2) throw argument_error("synth: need at least 2 nodes");
    if (p.slices < 1) throw argument_error("synth: need at least 1 slice");
    if (!(p.density > 0.0 && p.density <= 1.0)) throw argument_error("synth: density must lie in (0, 1]");
    if (!(p.weight_lo < p.weight_hi) || !std::isfinite(p.weight_lo) || !std::isfinite(p.weight_hi))
        throw argument_error("synth: weight range must satisfy lo < hi");
    if (!(p.persistence >= 0.0 && p.persistence <= 1.0))
        throw argument_error("synth: persistence must lie in [0, 1]");
    const std::size_t per_slice = synth_links_per_slice(p);
    if (per_slice == 0) throw argument_error("synth: density too low to place any link");

    const std::size_t n = p.nodes;
    rng gen(p.seed);
    std::vector<double> src_phase(n), dst_phase(n);
    for (std::size_t i = 0; i < n; ++i) {
        src_phase[i] = gen.uniform(0.0, 2.0 * std::numbers::pi);
        dst_phase[i] = gen.uniform(0.0, 2.0 * std::numbers::pi);
    }
    const double span = p.weight_hi - p.weight_lo;

    // all ordered non-self pairs, encoded as i * n + j
    std::vector<std::size_t> pairs;
    pairs.reserve(n * (n - 1));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) pairs.push_back(i * n + j);

    // lagged: state[i] holds slice t's state, before[i] slice t-1's
    std::vector<bool> state(n), before(n);
    for (std::size_t i = 0; i < n; ++i) state[i] = gen.uniform() < 0.5;

    std::vector<observed_entry> entries;
    std::vector<std::pair<double, std::size_t>> keyed(pairs.size());
    for (std::size_t t = 0; t < p.slices; ++t) {
        std::vector<std::size_t> chosen;
        if (p.dynamics == synth_dynamics::smooth) {
            // partial Fisher-Yates
            std::vector<std::size_t> pool = pairs;
            for (std::size_t k = 0; k < per_slice; ++k) {
                std::swap(pool[k], pool[k + static_cast<std::size_t>(gen.below(pool.size() - k))]);
                chosen.push_back(pool[k]);
            }
        } else {
            // slice 0 has no predecessor and counts every source as idle
            if (t == 0) std::fill(before.begin(), before.end(), false);
            else before = state;
            for (std::size_t i = 0; i < n; ++i)
                if (gen.uniform() >= p.persistence) state[i] = !state[i];
            // weighted sampling without replacement: the largest keys log(u) / w
            for (std::size_t k = 0; k < pairs.size(); ++k) {
                const double w = state[pairs[k] / n] ? synth_active_rate : 1.0;
                keyed[k] = {std::log(1.0 - gen.uniform()) / w, pairs[k]};
            }
            std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
                return a.first != b.first ? a.first > b.first : a.second < b.second;
            });
            for (std::size_t k = 0; k < per_slice; ++k) chosen.push_back(keyed[k].second);
            std::sort(chosen.begin(), chosen.end());
        }

        for (const std::size_t code : chosen) {
            const std::size_t i = code / n;
            const std::size_t j = code % n;
            const double noise = gen.uniform(-1.0, 1.0);
            double unit;
            if (p.dynamics == synth_dynamics::smooth) {
                unit = 0.5 + 0.45 * std::sin(src_phase[i] + dst_phase[j] + 0.4 * static_cast<double>(t)) +
                       0.05 * noise;
            } else {
                unit = 0.1 + 0.8 * (before[i] ? 1.0 : 0.0) + 0.05 * std::sin(src_phase[i] + dst_phase[j]) +
                       0.05 * noise;
            }
            entries.push_back({i, j, t, p.weight_lo + span * unit});
        }
    }

    std::vector<std::string> labels;
    for (std::size_t i = 0; i < n; ++i) labels.push_back(std::to_string(i));
    std::vector<std::uint64_t> timestamps;
    for (std::size_t t = 0; t < p.slices; ++t) timestamps.push_back(t);
    return dynamic_graph(std::move(labels), std::move(timestamps), std::move(entries));
}

}  // namespace tgcn
