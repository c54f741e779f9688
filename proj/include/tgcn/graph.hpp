#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "tgcn/error.hpp"
#include "tgcn/tensor3.hpp"

namespace tgcn {

// One directed link (src, dst) present in slice `slice`.
struct link {
    std::size_t src;
    std::size_t dst;
    std::size_t slice;
};

// Binary adjacency tensor A (N x N x T), one compressed-row pattern per
// slice. Column indices in each row are sorted and unique.
class sparse_adjacency {
public:
    sparse_adjacency() = default;

    sparse_adjacency(std::size_t nodes, std::size_t slices, std::span<const link> links)
        : nodes_(nodes), slices_(slices), row_ptr_(slices), cols_(slices) {
        std::vector<link> sorted(links.begin(), links.end());
        for (const auto& l : sorted)
            if (l.src >= nodes || l.dst >= nodes || l.slice >= slices)
                throw data_error("link (" + std::to_string(l.src) + ", " + std::to_string(l.dst) + ", " +
                                 std::to_string(l.slice) + ") outside graph of " + std::to_string(nodes) +
                                 " nodes and " + std::to_string(slices) + " slices");
        std::sort(sorted.begin(), sorted.end(), [](const link& a, const link& b) {
            return std::tie(a.slice, a.src, a.dst) < std::tie(b.slice, b.src, b.dst);
        });
        sorted.erase(std::unique(sorted.begin(), sorted.end(),
                                 [](const link& a, const link& b) {
                                     return a.slice == b.slice && a.src == b.src && a.dst == b.dst;
                                 }),
                     sorted.end());
        for (std::size_t t = 0; t < slices; ++t) row_ptr_[t].assign(nodes + 1, 0);
        for (const auto& l : sorted) {
            ++row_ptr_[l.slice][l.src + 1];
            cols_[l.slice].push_back(l.dst);
        }
        for (std::size_t t = 0; t < slices; ++t)
            for (std::size_t i = 0; i < nodes; ++i) row_ptr_[t][i + 1] += row_ptr_[t][i];
    }

    std::size_t node_count() const noexcept { return nodes_; }
    std::size_t slice_count() const noexcept { return slices_; }

    // out-neighbours of node i in slice t, ascending
    std::span<const std::size_t> row(std::size_t i, std::size_t t) const {
        const auto& rp = row_ptr_[t];
        return std::span<const std::size_t>(cols_[t]).subspan(rp[i], rp[i + 1] - rp[i]);
    }

    bool contains(std::size_t i, std::size_t j, std::size_t t) const {
        const auto r = row(i, t);
        return std::binary_search(r.begin(), r.end(), j);
    }

    std::size_t link_count(std::size_t t) const { return cols_[t].size(); }

    friend bool operator==(const sparse_adjacency&, const sparse_adjacency&) = default;

private:
    std::size_t nodes_ = 0;
    std::size_t slices_ = 0;
    std::vector<std::vector<std::size_t>> row_ptr_;
    std::vector<std::vector<std::size_t>> cols_;
};

// Real-valued square sparse matrix in compressed-row form.
struct csr_slice {
    std::vector<std::size_t> row_ptr;
    std::vector<std::size_t> cols;
    std::vector<double> values;

    std::size_t rows() const noexcept { return row_ptr.empty() ? 0 : row_ptr.size() - 1; }

    double at(std::size_t i, std::size_t j) const {
        const auto first = cols.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
        const auto last = cols.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
        const auto it = std::lower_bound(first, last, j);
        return it != last && *it == j ? values[static_cast<std::size_t>(it - cols.begin())] : 0.0;
    }

    // out (rows x width) = this * dense (rows x width), row-major
    void multiply(std::span<const double> dense, std::size_t width, std::span<double> out) const {
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t i = 0; i < rows(); ++i) {
            double* orow = out.data() + i * width;
            for (std::size_t e = row_ptr[i]; e < row_ptr[i + 1]; ++e) {
                const double a = values[e];
                const double* drow = dense.data() + cols[e] * width;
                for (std::size_t d = 0; d < width; ++d) orow[d] += a * drow[d];
            }
        }
    }

    // out (rows x width) = this^T * dense (rows x width), row-major
    void multiply_transposed(std::span<const double> dense, std::size_t width, std::span<double> out) const {
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t i = 0; i < rows(); ++i) {
            const double* drow = dense.data() + i * width;
            for (std::size_t e = row_ptr[i]; e < row_ptr[i + 1]; ++e) {
                const double a = values[e];
                double* orow = out.data() + cols[e] * width;
                for (std::size_t d = 0; d < width; ++d) orow[d] += a * drow[d];
            }
        }
    }
};

// Real-valued sparse N x N x T tensor, one csr_slice per frontal slice.
// Holds the normalized adjacency and its M-transformed (mixed) form.
struct sparse_slices {
    std::size_t nodes = 0;
    std::vector<csr_slice> slices;

    std::size_t slice_count() const noexcept { return slices.size(); }

    tensor3 to_dense() const {
        tensor3 out(nodes, nodes, slices.size());
        for (std::size_t t = 0; t < slices.size(); ++t) {
            const auto& s = slices[t];
            for (std::size_t i = 0; i < nodes; ++i)
                for (std::size_t e = s.row_ptr[i]; e < s.row_ptr[i + 1]; ++e) out(i, s.cols[e], t) = s.values[e];
        }
        return out;
    }
};

// Diagonal N x N x T tensor stored as its N x T diagonal.
class diagonal_tensor {
public:
    diagonal_tensor(std::size_t nodes, std::size_t slices)
        : nodes_(nodes), slices_(slices), diag_(nodes * slices, 0.0) {}

    std::size_t node_count() const noexcept { return nodes_; }
    std::size_t slice_count() const noexcept { return slices_; }

    double& operator()(std::size_t i, std::size_t t) { return diag_[t * nodes_ + i]; }
    double operator()(std::size_t i, std::size_t t) const { return diag_[t * nodes_ + i]; }

    tensor3 to_dense() const {
        tensor3 out(nodes_, nodes_, slices_);
        for (std::size_t t = 0; t < slices_; ++t)
            for (std::size_t i = 0; i < nodes_; ++i) out(i, i, t) = (*this)(i, t);
        return out;
    }

private:
    std::size_t nodes_;
    std::size_t slices_;
    std::vector<double> diag_;
};

// One observed link weight Y(src, dst, slice).
struct observed_entry {
    std::size_t src;
    std::size_t dst;
    std::size_t slice;
    double weight;

    friend bool operator==(const observed_entry&, const observed_entry&) = default;
};

// Node universe, T snapshots and the observed weight entries. Every observed
// entry is also an adjacency link; links are directed as given.
class dynamic_graph {
public:
    dynamic_graph() = default;

    // labels: external identifier per dense node index.
    // timestamps: raw timestamp per slice, strictly ascending.
    dynamic_graph(std::vector<std::string> labels, std::vector<std::uint64_t> timestamps,
                  std::vector<observed_entry> entries)
        : labels_(std::move(labels)), timestamps_(std::move(timestamps)), observed_(std::move(entries)) {
        if (labels_.empty() || timestamps_.empty()) throw data_error("graph needs at least one node and one slice");
        if (!std::is_sorted(timestamps_.begin(), timestamps_.end()) ||
            std::adjacent_find(timestamps_.begin(), timestamps_.end()) != timestamps_.end())
            throw data_error("slice timestamps must be strictly ascending");
        const std::size_t n = labels_.size();
        const std::size_t t = timestamps_.size();
        std::vector<link> links;
        links.reserve(observed_.size());
        for (const auto& e : observed_) {
            if (e.src >= n || e.dst >= n || e.slice >= t)
                throw data_error("observed entry (" + std::to_string(e.src) + ", " + std::to_string(e.dst) + ", " +
                                 std::to_string(e.slice) + ") out of range");
            if (!std::isfinite(e.weight)) throw data_error("observed weight is not finite");
            links.push_back({e.src, e.dst, e.slice});
        }
        adjacency_ = sparse_adjacency(n, t, links);
        std::size_t total = 0;
        for (std::size_t s = 0; s < t; ++s) total += adjacency_.link_count(s);
        if (total != observed_.size()) {
            // locate a duplicate key for the message
            std::sort(links.begin(), links.end(), [](const link& a, const link& b) {
                return std::tie(a.slice, a.src, a.dst) < std::tie(b.slice, b.src, b.dst);
            });
            for (std::size_t k = 1; k < links.size(); ++k)
                if (links[k].slice == links[k - 1].slice && links[k].src == links[k - 1].src &&
                    links[k].dst == links[k - 1].dst)
                    throw data_error("duplicate observed entry (" + std::to_string(links[k].src) + ", " +
                                     std::to_string(links[k].dst) + ", " + std::to_string(links[k].slice) + ")");
        }
    }

    std::size_t node_count() const noexcept { return labels_.size(); }
    std::size_t slice_count() const noexcept { return timestamps_.size(); }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    const std::vector<std::uint64_t>& timestamps() const noexcept { return timestamps_; }
    const sparse_adjacency& adjacency() const noexcept { return adjacency_; }
    const std::vector<observed_entry>& observed() const noexcept { return observed_; }

    friend bool operator==(const dynamic_graph&, const dynamic_graph&) = default;

private:
    std::vector<std::string> labels_;
    std::vector<std::uint64_t> timestamps_;
    sparse_adjacency adjacency_;
    std::vector<observed_entry> observed_;
};

// D(i,i,t) = 1 + sum_n A(i,n,t): out-degree plus one.
inline diagonal_tensor degree_tensor(const sparse_adjacency& adjacency) {
    diagonal_tensor d(adjacency.node_count(), adjacency.slice_count());
    for (std::size_t t = 0; t < adjacency.slice_count(); ++t)
        for (std::size_t i = 0; i < adjacency.node_count(); ++i)
            d(i, t) = 1.0 + static_cast<double>(adjacency.row(i, t).size());
    return d;
}

// Per slice D^{-1/2} (A + I) D^{-1/2}, kept sparse. Self-loops are always
// present, so each row holds {i} plus its out-neighbours.
inline sparse_slices normalize_adjacency(const sparse_adjacency& adjacency) {
    const auto degree = degree_tensor(adjacency);
    const std::size_t n = adjacency.node_count();
    sparse_slices out;
    out.nodes = n;
    out.slices.resize(adjacency.slice_count());
    std::vector<double> inv_sqrt(n);
    for (std::size_t t = 0; t < adjacency.slice_count(); ++t) {
        for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(degree(i, t));
        auto& s = out.slices[t];
        s.row_ptr.assign(1, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = adjacency.row(i, t);
            bool self_done = false;
            auto emit = [&](std::size_t j, double a) {
                s.cols.push_back(j);
                s.values.push_back(inv_sqrt[i] * a * inv_sqrt[j]);
            };
            for (std::size_t j : row) {
                if (!self_done && j >= i) {
                    if (j == i) {
                        emit(i, 2.0);
                        self_done = true;
                        continue;
                    }
                    emit(i, 1.0);
                    self_done = true;
                }
                emit(j, 1.0);
            }
            if (!self_done) emit(i, 1.0);
            s.row_ptr.push_back(s.cols.size());
        }
    }
    return out;
}

}  // namespace tgcn
