#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "tgcn/tensor3.hpp"

// Third-order tensor algebra: mode-n products, the M-transform and its
// inverse, the face-wise product and the M-product built from them.
//
// Every routine is a pure function with a fixed summation order per output
// element, so results are reproducible bit for bit.

namespace tgcn {

namespace detail {

// c (m x n) = op(a) * op(b), op(a) is m x k. Row-major spans.
// When accumulate is set the product is added to c.
inline void gemm(std::span<const double> a, bool trans_a, std::span<const double> b, bool trans_b,
                 std::span<double> c, std::size_t m, std::size_t k, std::size_t n,
                 bool accumulate = false) {
    if (!accumulate) std::fill(c.begin(), c.end(), 0.0);
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = trans_a ? a[p * m + r] : a[r * k + p];
            if (av == 0.0) continue;
            double* crow = c.data() + r * n;
            if (trans_b) {
                for (std::size_t col = 0; col < n; ++col) crow[col] += av * b[col * k + p];
            } else {
                const double* brow = b.data() + p * n;
                for (std::size_t col = 0; col < n; ++col) crow[col] += av * brow[col];
            }
        }
    }
}

inline void require_order(const tensor3& x, std::size_t order, const char* op) {
    if (x.slices() != order)
        throw shape_error(std::string(op) + ": mixing matrix order " + std::to_string(order) +
                          " does not match tensor third extent " + std::to_string(x.slices()));
}

inline void require_nonsingular(const banded_lower_matrix& m) {
    for (std::size_t t = 0; t < m.order(); ++t)
        if (m(t, t) == 0.0)
            throw singular_matrix_error(t, "mixing matrix has a zero diagonal entry at t=" + std::to_string(t));
}

}  // namespace detail

// (X x_n U): contracts mode n (1, 2 or 3) of x with the columns of u.
inline tensor3 mode_n_product(const tensor3& x, const matrix& u, int mode) {
    const std::size_t extent = x.extent(mode);
    if (u.cols() != extent)
        throw shape_error("mode-" + std::to_string(mode) + " product: matrix has " + std::to_string(u.cols()) +
                          " columns but tensor extent is " + std::to_string(extent));
    const std::size_t d = u.rows();
    const std::size_t rows = mode == 1 ? d : x.rows();
    const std::size_t cols = mode == 2 ? d : x.cols();
    const std::size_t slices = mode == 3 ? d : x.slices();
    tensor3 out(rows, cols, slices);
    for (std::size_t t = 0; t < slices; ++t)
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) {
                double acc = 0.0;
                for (std::size_t n = 0; n < extent; ++n) {
                    switch (mode) {
                        case 1: acc += u(i, n) * x(n, j, t); break;
                        case 2: acc += u(j, n) * x(i, n, t); break;
                        default: acc += u(t, n) * x(i, j, n); break;
                    }
                }
                out(i, j, t) = acc;
            }
    return out;
}

// X x_3 M for a dense T x T matrix.
inline tensor3 m_transform(const tensor3& x, const matrix& m) {
    if (m.rows() != m.cols())
        throw shape_error("m_transform: mixing matrix must be square, got " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()));
    detail::require_order(x, m.rows(), "m_transform");
    return mode_n_product(x, m, 3);
}

// X x_3 M exploiting the band: slice t is sum_k M(t,k) * slice k over the
// in-band k only, O(I*J*T*b).
inline tensor3 m_transform(const tensor3& x, const banded_lower_matrix& m) {
    detail::require_order(x, m.order(), "m_transform");
    tensor3 out(x.rows(), x.cols(), x.slices());
    for (std::size_t t = 0; t < m.order(); ++t) {
        auto dst = out.slice(t);
        for (std::size_t k = m.first_col(t); k <= t; ++k) {
            const double w = m(t, k);
            const auto src = x.slice(k);
            for (std::size_t e = 0; e < dst.size(); ++e) dst[e] += w * src[e];
        }
    }
    return out;
}

// X x_3 M^T: slice k is sum_t M(t,k) * slice t. Adjoint of m_transform.
inline tensor3 transposed_m_transform(const tensor3& x, const banded_lower_matrix& m) {
    detail::require_order(x, m.order(), "transposed_m_transform");
    tensor3 out(x.rows(), x.cols(), x.slices());
    for (std::size_t t = 0; t < m.order(); ++t) {
        const auto src = x.slice(t);
        for (std::size_t k = m.first_col(t); k <= t; ++k) {
            const double w = m(t, k);
            auto dst = out.slice(k);
            for (std::size_t e = 0; e < dst.size(); ++e) dst[e] += w * src[e];
        }
    }
    return out;
}

// X x_3 M^{-1}: every tube is solved by forward substitution against the
// banded lower-triangular M. No inverse is ever formed.
inline tensor3 inverse_m_transform(const tensor3& x, const banded_lower_matrix& m) {
    detail::require_order(x, m.order(), "inverse_m_transform");
    detail::require_nonsingular(m);
    tensor3 z(x.rows(), x.cols(), x.slices());
    for (std::size_t t = 0; t < m.order(); ++t) {
        auto zt = z.slice(t);
        const auto xt = x.slice(t);
        std::copy(xt.begin(), xt.end(), zt.begin());
        for (std::size_t k = m.first_col(t); k < t; ++k) {
            const double w = m(t, k);
            const auto zk = z.slice(k);
            for (std::size_t e = 0; e < zt.size(); ++e) zt[e] -= w * zk[e];
        }
        const double diag = m(t, t);
        for (double& v : zt) v /= diag;
    }
    return z;
}

// X x_3 M^{-T}: back substitution against the transposed band. This is the
// adjoint of inverse_m_transform.
inline tensor3 inverse_transposed_m_transform(const tensor3& x, const banded_lower_matrix& m) {
    detail::require_order(x, m.order(), "inverse_transposed_m_transform");
    detail::require_nonsingular(m);
    const std::size_t order = m.order();
    tensor3 z(x.rows(), x.cols(), x.slices());
    for (std::size_t t = order; t-- > 0;) {
        auto zt = z.slice(t);
        const auto xt = x.slice(t);
        std::copy(xt.begin(), xt.end(), zt.begin());
        const std::size_t last = std::min(order - 1, t + m.band() - 1);
        for (std::size_t s = t + 1; s <= last; ++s) {
            const double w = m(s, t);
            const auto zs = z.slice(s);
            for (std::size_t e = 0; e < zt.size(); ++e) zt[e] -= w * zs[e];
        }
        const double diag = m(t, t);
        for (double& v : zt) v /= diag;
    }
    return z;
}

// Slice-wise matrix product: out(:,:,t) = x(:,:,t) * y(:,:,t).
inline tensor3 facewise_product(const tensor3& x, const tensor3& y) {
    if (x.cols() != y.rows() || x.slices() != y.slices())
        throw shape_error("facewise_product: cannot multiply " + x.shape() + " by " + y.shape());
    tensor3 out(x.rows(), y.cols(), x.slices());
    for (std::size_t t = 0; t < x.slices(); ++t)
        detail::gemm(x.slice(t), false, y.slice(t), false, out.slice(t), x.rows(), x.cols(), y.cols());
    return out;
}

// X * Y = ((X x_3 M) facewise (Y x_3 M)) x_3 M^{-1}
inline tensor3 m_product(const tensor3& x, const tensor3& y, const banded_lower_matrix& m) {
    if (x.cols() != y.rows() || x.slices() != y.slices())
        throw shape_error("m_product: cannot multiply " + x.shape() + " by " + y.shape());
    detail::require_nonsingular(m);
    return inverse_m_transform(facewise_product(m_transform(x, m), m_transform(y, m)), m);
}

}  // namespace tgcn
