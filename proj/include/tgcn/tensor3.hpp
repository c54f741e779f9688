#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tgcn/error.hpp"

namespace tgcn {

// Dense row-major matrix. Used for the embedding, the prediction head and
// dense T x T mixing matrices handed to the generic mode-n product.
class matrix {
public:
    matrix() = default;
    matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static matrix identity(std::size_t n) {
        matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    friend bool operator==(const matrix&, const matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Dense third-order tensor of extents I x J x T.
//
// Storage is slice-major: frontal slice t occupies a contiguous row-major
// I x J block, so slice-wise matrix products walk memory linearly.
class tensor3 {
public:
    tensor3() = default;
    tensor3(std::size_t rows, std::size_t cols, std::size_t slices, double fill = 0.0)
        : rows_(rows), cols_(cols), slices_(slices), data_(rows * cols * slices, fill) {
        if (rows == 0 || cols == 0 || slices == 0)
            throw shape_error("tensor3 extents must be positive, got " + shape_string(rows, cols, slices));
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t slices() const noexcept { return slices_; }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t slice_size() const noexcept { return rows_ * cols_; }

    std::size_t extent(int mode) const {
        switch (mode) {
            case 1: return rows_;
            case 2: return cols_;
            case 3: return slices_;
            default: throw argument_error("tensor mode must be 1, 2 or 3, got " + std::to_string(mode));
        }
    }

    double& operator()(std::size_t i, std::size_t j, std::size_t t) {
        return data_[(t * rows_ + i) * cols_ + j];
    }
    double operator()(std::size_t i, std::size_t j, std::size_t t) const {
        return data_[(t * rows_ + i) * cols_ + j];
    }

    std::span<double> slice(std::size_t t) noexcept {
        return {data_.data() + t * slice_size(), slice_size()};
    }
    std::span<const double> slice(std::size_t t) const noexcept {
        return {data_.data() + t * slice_size(), slice_size()};
    }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    bool same_shape(const tensor3& o) const noexcept {
        return rows_ == o.rows_ && cols_ == o.cols_ && slices_ == o.slices_;
    }

    std::string shape() const { return shape_string(rows_, cols_, slices_); }

    friend bool operator==(const tensor3&, const tensor3&) = default;

    static std::string shape_string(std::size_t i, std::size_t j, std::size_t t) {
        return std::to_string(i) + "x" + std::to_string(j) + "x" + std::to_string(t);
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::size_t slices_ = 0;
    std::vector<double> data_;
};

// Lower-triangular T x T matrix with bandwidth b: row t holds entries for
// columns max(0, t - b + 1) .. t only. Out-of-band entries are not stored
// and read back as exactly zero.
//
// Row t occupies b consecutive slots; slot c maps to column t - b + 1 + c.
// Slots that would map to a negative column are padding and stay zero.
class banded_lower_matrix {
public:
    banded_lower_matrix() = default;
    banded_lower_matrix(std::size_t order, std::size_t band)
        : order_(order), band_(band), data_(order * band, 0.0) {
        if (order == 0) throw argument_error("banded matrix order must be positive");
        if (band == 0 || band > order)
            throw argument_error("band must lie in [1, " + std::to_string(order) + "], got " +
                                 std::to_string(band));
    }

    static banded_lower_matrix identity(std::size_t order, std::size_t band = 1) {
        banded_lower_matrix m(order, band);
        for (std::size_t t = 0; t < order; ++t) m.at(t, t) = 1.0;
        return m;
    }

    std::size_t order() const noexcept { return order_; }
    std::size_t band() const noexcept { return band_; }

    // first in-band column of row t
    std::size_t first_col(std::size_t t) const noexcept { return t + 1 >= band_ ? t + 1 - band_ : 0; }

    bool in_band(std::size_t t, std::size_t k) const noexcept {
        return t < order_ && k <= t && k >= first_col(t);
    }

    double operator()(std::size_t t, std::size_t k) const noexcept {
        return in_band(t, k) ? data_[slot(t, k)] : 0.0;
    }

    // writable access; only valid for in-band positions
    double& at(std::size_t t, std::size_t k) {
        if (!in_band(t, k))
            throw argument_error("position (" + std::to_string(t) + ", " + std::to_string(k) +
                                 ") lies outside the band");
        return data_[slot(t, k)];
    }

    matrix to_dense() const {
        matrix m(order_, order_);
        for (std::size_t t = 0; t < order_; ++t)
            for (std::size_t k = first_col(t); k <= t; ++k) m(t, k) = data_[slot(t, k)];
        return m;
    }

    // raw band storage, order x band, padding included
    std::span<double> band_values() noexcept { return data_; }
    std::span<const double> band_values() const noexcept { return data_; }

    friend bool operator==(const banded_lower_matrix&, const banded_lower_matrix&) = default;

private:
    std::size_t slot(std::size_t t, std::size_t k) const noexcept {
        return t * band_ + (k + band_ - 1 - t);
    }

    std::size_t order_ = 0;
    std::size_t band_ = 0;
    std::vector<double> data_;
};

inline bool all_finite(std::span<const double> values) {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace tgcn
