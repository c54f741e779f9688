#pragma once

#include <cmath>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tgcn/edge_list.hpp"
#include "tgcn/model.hpp"
#include "tgcn/split.hpp"

namespace tgcn {

struct prediction_pair {
    double prediction;
    double target;
};

// Sums run in index order so repeated calls agree bit for bit.
inline double mae(std::span<const prediction_pair> pairs) {
    if (pairs.empty()) throw argument_error("mae of an empty set");
    double total = 0.0;
    for (const auto& p : pairs) total += std::abs(p.target - p.prediction);
    return total / static_cast<double>(pairs.size());
}

inline double rmse(std::span<const prediction_pair> pairs) {
    if (pairs.empty()) throw argument_error("rmse of an empty set");
    double total = 0.0;
    for (const auto& p : pairs) {
        const double e = p.target - p.prediction;
        total += e * e;
    }
    return std::sqrt(total / static_cast<double>(pairs.size()));
}

struct metrics_report {
    std::string split;
    std::size_t count = 0;
    double mae = 0.0;
    double rmse = 0.0;
};

// one CSV row: split,count,mae,rmse
inline std::string to_csv_row(const metrics_report& r) {
    return r.split + "," + std::to_string(r.count) + "," + detail::format_real(r.mae) + "," +
           detail::format_real(r.rmse);
}

inline std::vector<prediction_pair> predict_entries(const tensor3& representation, const prediction_head& head,
                                                    std::span<const observed_entry> entries) {
    std::vector<prediction_pair> out;
    out.reserve(entries.size());
    for (const auto& e : entries)
        out.push_back({predict_edge(representation, e.src, e.dst, e.slice, head), e.weight});
    return out;
}

inline metrics_report evaluate(const model_parameters& params, const sparse_slices& normalized_adj,
                               std::span<const observed_entry> entries, const model_config& cfg,
                               std::string split_name) {
    if (entries.empty()) throw argument_error("cannot evaluate an empty split '" + split_name + "'");
    const auto f = forward(params, normalized_adj, cfg);
    const auto pairs = predict_entries(f, params.head, entries);
    return {std::move(split_name), pairs.size(), mae(pairs), rmse(pairs)};
}

inline metrics_report evaluate(const model_parameters& params, const dynamic_graph& g, const split_assignment& s,
                               split_tag tag, const model_config& cfg) {
    const auto entries = split_entries(g, s, tag);
    return evaluate(params, normalize_adjacency(g.adjacency()), entries, cfg, to_string(tag));
}

}  // namespace tgcn
