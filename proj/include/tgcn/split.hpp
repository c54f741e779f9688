#pragma once

#include <array>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "tgcn/graph.hpp"
#include "tgcn/rng.hpp"

namespace tgcn {

enum class split_tag : std::uint8_t { train, validation, test };

inline const char* to_string(split_tag tag) {
    switch (tag) {
        case split_tag::train: return "train";
        case split_tag::validation: return "validation";
        case split_tag::test: return "test";
    }
    return "?";
}

// Tag per observed entry, aligned with dynamic_graph::observed().
struct split_assignment {
    std::vector<split_tag> tags;
    std::uint64_t seed = 0;

    std::vector<std::size_t> indices(split_tag tag) const {
        std::vector<std::size_t> out;
        for (std::size_t k = 0; k < tags.size(); ++k)
            if (tags[k] == tag) out.push_back(k);
        return out;
    }

    std::size_t count(split_tag tag) const {
        std::size_t n = 0;
        for (auto t : tags) n += t == tag;
        return n;
    }

    friend bool operator==(const split_assignment&, const split_assignment&) = default;
};

// Seeded shuffle of the observed entries; the first floor(n*a/(a+b+c))
// go to training, the next floor(n*b/(a+b+c)) to validation, the rest to
// test. The default ratio is 6:1:3.
inline split_assignment split(const dynamic_graph& g, std::uint64_t seed,
                              std::array<std::size_t, 3> ratio = {6, 1, 3}) {
    const std::size_t n = g.observed().size();
    if (n < 10) throw data_error("split needs at least 10 observed entries, got " + std::to_string(n));
    const std::size_t total = ratio[0] + ratio[1] + ratio[2];
    if (total == 0) throw argument_error("split ratio must not be all zero");
    const std::size_t n_train = n * ratio[0] / total;
    const std::size_t n_val = n * ratio[1] / total;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng gen(seed);
    gen.shuffle(order);

    split_assignment out;
    out.seed = seed;
    out.tags.assign(n, split_tag::test);
    for (std::size_t k = 0; k < n_train; ++k) out.tags[order[k]] = split_tag::train;
    for (std::size_t k = n_train; k < n_train + n_val; ++k) out.tags[order[k]] = split_tag::validation;
    return out;
}

inline std::vector<observed_entry> split_entries(const dynamic_graph& g, const split_assignment& s, split_tag tag) {
    std::vector<observed_entry> out;
    for (std::size_t k : s.indices(tag)) out.push_back(g.observed()[k]);
    return out;
}

}  // namespace tgcn
