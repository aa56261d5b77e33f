#pragma once

// Dense matrix factorizations used throughout: tolerance-truncated SVD, thin
// QR and the orthogonal Procrustes solve.
//
// Sign convention: in every left singular vector (resp. Q column) the entry of
// largest magnitude, lowest row on ties, is made nonnegative and the matching
// right factor absorbs the sign.

#include "ttmera/errors.hpp"
#include "ttmera/tensor.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace ttmera {

struct TruncatedSvd {
    Matrix u;      // m x r, orthonormal columns
    Vector sigma;  // r, positive, nonincreasing
    Matrix v;      // n x r, orthonormal columns
    double discarded_energy = 0.0;

    Eigen::Index rank() const noexcept { return sigma.size(); }
    Matrix reconstruct() const { return u * sigma.asDiagonal() * v.transpose(); }
};

struct ThinQr {
    Matrix q;  // m x min(m, n)
    Matrix r;  // min(m, n) x n, upper triangular
};

namespace detail {

inline void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) throw NumericError(std::string(what) + ": non-finite input");
}

// Column sign that makes the largest-magnitude entry nonnegative.
inline double canonical_sign(const Eigen::Ref<const Vector>& col) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index i = 0; i < col.size(); ++i) {
        const double a = std::abs(col(i));
        if (a > best_abs) {
            best_abs = a;
            best = i;
        }
    }
    return (col.size() > 0 && col(best) < 0) ? -1.0 : 1.0;
}

// Applies the sign convention to matching columns of u and v.
inline void canonicalize_signs(Matrix& u, Matrix& v) {
    const Eigen::Index k = std::min(u.cols(), v.cols());
    for (Eigen::Index j = 0; j < k; ++j) {
        if (canonical_sign(u.col(j)) < 0) {
            u.col(j) *= -1.0;
            v.col(j) *= -1.0;
        }
    }
    for (Eigen::Index j = k; j < u.cols(); ++j) {
        if (canonical_sign(u.col(j)) < 0) u.col(j) *= -1.0;
    }
}

inline void canonicalize_signs(Matrix& u) {
    for (Eigen::Index j = 0; j < u.cols(); ++j) {
        if (canonical_sign(u.col(j)) < 0) u.col(j) *= -1.0;
    }
}

// Relative cutoff below which singular values count as zero.
inline double numerical_zero(Eigen::Index rows, Eigen::Index cols, double sigma_max) {
    return static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon() * sigma_max;
}

// Smallest r with sqrt(sum_{i >= r} s_i^2) <= delta, capped at the numerical rank.
inline Eigen::Index truncation_rank(const Vector& s, double delta, Eigen::Index rows, Eigen::Index cols) {
    const Eigen::Index n = s.size();
    if (n == 0 || s(0) <= 0.0) return 0;
    const double zero = numerical_zero(rows, cols, s(0));
    Eigen::Index numrank = 0;
    while (numrank < n && s(numrank) > zero) ++numrank;
    const double budget = delta * delta;
    double tail = 0.0;
    Eigen::Index r = n;
    while (r > 0 && tail + s(r - 1) * s(r - 1) <= budget) {
        tail += s(r - 1) * s(r - 1);
        --r;
    }
    return std::min(r, numrank);
}

inline double tail_energy(const Vector& s, Eigen::Index r) {
    return r < s.size() ? s.tail(s.size() - r).squaredNorm() : 0.0;
}

struct CompactSvd {
    Matrix u;
    Vector s;
    Matrix v;
};

// Compact SVD, QR-preconditioned for strongly rectangular inputs.
inline CompactSvd compact_svd(const Matrix& m, bool want_v = true) {
    const Eigen::Index rows = m.rows(), cols = m.cols();
    const unsigned flags = want_v ? (Eigen::ComputeThinU | Eigen::ComputeThinV) : Eigen::ComputeThinU;
    if (rows >= 2 * cols && cols > 0) {
        Eigen::HouseholderQR<Matrix> qr(m);
        Matrix r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
        Eigen::BDCSVD<Matrix> svd(r, Eigen::ComputeThinU | (want_v ? Eigen::ComputeThinV : 0));
        Matrix u = Matrix::Zero(rows, cols);
        u.topRows(cols) = svd.matrixU();
        u.applyOnTheLeft(qr.householderQ());
        return {std::move(u), svd.singularValues(), want_v ? svd.matrixV() : Matrix()};
    }
    if (cols >= 2 * rows && rows > 0) {
        CompactSvd t = compact_svd(m.transpose(), true);
        if (!want_v) return {std::move(t.v), std::move(t.s), Matrix()};
        return {std::move(t.v), std::move(t.s), std::move(t.u)};
    }
    Eigen::BDCSVD<Matrix> svd(m, flags);
    return {svd.matrixU(), svd.singularValues(), want_v ? svd.matrixV() : Matrix()};
}

} // namespace detail

// Truncated SVD keeping the smallest rank whose dropped tail has norm <= delta.
inline TruncatedSvd svd_trunc(const Matrix& m, double delta) {
    if (m.size() == 0) throw ArgumentError("svd_trunc: empty matrix");
    if (!(delta >= 0.0)) throw ArgumentError("svd_trunc: delta must be nonnegative");
    detail::require_finite(m, "svd_trunc");
    auto svd = detail::compact_svd(m);
    const Eigen::Index r = detail::truncation_rank(svd.s, delta, m.rows(), m.cols());
    TruncatedSvd out;
    out.discarded_energy = detail::tail_energy(svd.s, r);
    out.u = svd.u.leftCols(r);
    out.v = svd.v.leftCols(r);
    out.sigma = svd.s.head(r);
    detail::canonicalize_signs(out.u, out.v);
    return out;
}

// Truncation to a prescribed rank (clamped to the numerical rank).
inline TruncatedSvd svd_fixed_rank(const Matrix& m, Eigen::Index rank) {
    if (m.size() == 0) throw ArgumentError("svd_fixed_rank: empty matrix");
    detail::require_finite(m, "svd_fixed_rank");
    auto svd = detail::compact_svd(m);
    const Eigen::Index numrank = detail::truncation_rank(svd.s, 0.0, m.rows(), m.cols());
    const Eigen::Index r = std::clamp<Eigen::Index>(rank, 0, numrank);
    TruncatedSvd out;
    out.discarded_energy = detail::tail_energy(svd.s, r);
    out.u = svd.u.leftCols(r);
    out.v = svd.v.leftCols(r);
    out.sigma = svd.s.head(r);
    detail::canonicalize_signs(out.u, out.v);
    return out;
}

// All singular values, nonincreasing.
inline Vector singular_values(const Matrix& m) {
    if (m.size() == 0) return Vector();
    detail::require_finite(m, "singular_values");
    if (m.rows() >= 2 * m.cols() || m.cols() >= 2 * m.rows()) {
        Eigen::HouseholderQR<Matrix> qr(m.rows() >= m.cols() ? Matrix(m) : Matrix(m.transpose()));
        const Eigen::Index k = std::min(m.rows(), m.cols());
        Matrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
        return Eigen::BDCSVD<Matrix>(r).singularValues();
    }
    return Eigen::BDCSVD<Matrix>(m).singularValues();
}

struct LeftSvd {
    Matrix u;      // m x r
    Vector sigma;  // r
    double discarded_energy = 0.0;
};

// Left singular vectors of a (possibly very wide) matrix, truncated like
// svd_trunc. The right factor is left to the caller as u^T m, which avoids
// materializing V for unfoldings with millions of columns.
inline LeftSvd svd_trunc_left(const Eigen::Ref<const Matrix>& m, double delta) {
    if (m.size() == 0) throw ArgumentError("svd_trunc_left: empty matrix");
    if (!(delta >= 0.0)) throw ArgumentError("svd_trunc_left: delta must be nonnegative");
    if (!m.allFinite()) throw NumericError("svd_trunc_left: non-finite input");
    Matrix u;
    Vector s;
    if (m.cols() >= 2 * m.rows()) {
        // m = R^T Q^T, so the left singular vectors of m are the right ones of R.
        Eigen::HouseholderQR<Matrix> qr(m.transpose());
        const Eigen::Index k = m.rows();
        Matrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
        Eigen::BDCSVD<Matrix> svd(r, Eigen::ComputeThinV);
        u = svd.matrixV();
        s = svd.singularValues();
    } else {
        auto svd = detail::compact_svd(m, false);
        u = std::move(svd.u);
        s = std::move(svd.s);
    }
    const Eigen::Index r = detail::truncation_rank(s, delta, m.rows(), m.cols());
    LeftSvd out;
    out.discarded_energy = detail::tail_energy(s, r);
    out.u = u.leftCols(r);
    out.sigma = s.head(r);
    detail::canonicalize_signs(out.u);
    return out;
}

// Numerical rank under the delta = 0 rule.
inline Eigen::Index numerical_rank(const Matrix& m) {
    if (m.size() == 0) return 0;
    return detail::truncation_rank(singular_values(m), 0.0, m.rows(), m.cols());
}

// Square orthogonal left basis of m (first columns are the left singular
// vectors) together with the singular values.
inline std::pair<Matrix, Vector> full_left_basis(const Matrix& m) {
    if (m.size() == 0) throw ArgumentError("full_left_basis: empty matrix");
    detail::require_finite(m, "full_left_basis");
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeFullU);
    Matrix u = svd.matrixU();
    detail::canonicalize_signs(u);
    return {std::move(u), svd.singularValues()};
}

inline ThinQr qr_thin(const Matrix& m) {
    if (m.size() == 0) throw ArgumentError("qr_thin: empty matrix");
    detail::require_finite(m, "qr_thin");
    const Eigen::Index k = std::min(m.rows(), m.cols());
    Eigen::HouseholderQR<Matrix> qr(m);
    ThinQr out;
    out.q = qr.householderQ() * Matrix::Identity(m.rows(), k);
    out.r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < k; ++j) {
        if (detail::canonical_sign(out.q.col(j)) < 0) {
            out.q.col(j) *= -1.0;
            out.r.row(j) *= -1.0;
        }
    }
    return out;
}

// Orthogonal V minimizing ||V a - b||_F: V = P Q^T with b a^T = P S Q^T.
inline Matrix procrustes_solve(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError("procrustes_solve: operands have different shapes");
    }
    if (a.size() == 0) throw ArgumentError("procrustes_solve: empty operands");
    detail::require_finite(a, "procrustes_solve");
    detail::require_finite(b, "procrustes_solve");
    const Matrix m = b * a.transpose();
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Matrix p = svd.matrixU();
    Matrix q = svd.matrixV();
    detail::canonicalize_signs(p, q);
    return p * q.transpose();
}

} // namespace ttmera
