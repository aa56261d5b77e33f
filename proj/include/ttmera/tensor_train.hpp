#pragma once

// Tensor trains: construction (TT-SVD), mixed-canonical forms, contraction,
// rounding, supercore merge/split and the interface matrices A_{<d}, A_d, A_{>d}.
//
// Core d has shape R_d x I_d x R_{d+1} with R_1 = R_{D+1} = 1. Sites are 1-based.

#include "ttmera/binary_io.hpp"
#include "ttmera/errors.hpp"
#include "ttmera/matrix_kernels.hpp"
#include "ttmera/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace ttmera {

class TensorTrain {
public:
    TensorTrain() = default;

    // Validates rank chaining. The canonical site is only trusted when the
    // producer knows it; mutation helpers always return a fresh train.
    explicit TensorTrain(std::vector<DenseTensor> cores, std::optional<std::size_t> canonical_site = {})
        : cores_(std::move(cores)), site_(canonical_site) {
        if (cores_.empty()) throw ArgumentError("tensor train needs at least one core");
        for (std::size_t d = 0; d < cores_.size(); ++d) {
            if (cores_[d].order() != 3) {
                throw ShapeError("core " + std::to_string(d + 1) + " is not 3-way");
            }
            if (d + 1 < cores_.size() && cores_[d].dim(2) != cores_[d + 1].dim(0)) {
                throw ShapeError("rank mismatch between cores " + std::to_string(d + 1) + " and " +
                                 std::to_string(d + 2));
            }
        }
        if (cores_.front().dim(0) != 1 || cores_.back().dim(2) != 1) {
            throw ShapeError("boundary ranks must be 1");
        }
        if (site_ && (*site_ < 1 || *site_ > cores_.size())) throw BoundsError("canonical site out of range");
    }

    std::size_t order() const noexcept { return cores_.size(); }
    const std::vector<DenseTensor>& cores() const noexcept { return cores_; }
    // 1-based core access.
    const DenseTensor& core(std::size_t site) const { return cores_.at(zero_based_mode(site, order())); }
    std::optional<std::size_t> canonical_site() const noexcept { return site_; }

    // R_1 .. R_{D+1}
    std::vector<std::size_t> ranks() const {
        std::vector<std::size_t> r;
        r.reserve(order() + 1);
        for (const auto& c : cores_) r.push_back(c.dim(0));
        r.push_back(1);
        return r;
    }

    Dims dims() const {
        Dims n;
        n.reserve(order());
        for (const auto& c : cores_) n.push_back(c.dim(1));
        return n;
    }

    // Entries stored: sum_d R_d I_d R_{d+1}.
    std::size_t storage() const {
        std::size_t s = 0;
        for (const auto& c : cores_) s += c.size();
        return s;
    }

    std::vector<DenseTensor> release_cores() && { return std::move(cores_); }

private:
    std::vector<DenseTensor> cores_;
    std::optional<std::size_t> site_;
};

namespace detail {

inline Dims core_dims(std::size_t r0, std::size_t n, std::size_t r1) { return Dims{r0, n, r1}; }

// Core viewed as the (R_d I_d) x R_{d+1} left unfolding.
inline Matrix left_unfolding(const DenseTensor& c) { return c.to_matrix(c.dim(0) * c.dim(1), c.dim(2)); }

// Core viewed as the R_d x (I_d R_{d+1}) right unfolding.
inline Matrix right_unfolding(const DenseTensor& c) { return c.to_matrix(c.dim(0), c.dim(1) * c.dim(2)); }

inline DenseTensor core_from(const Matrix& m, std::size_t r0, std::size_t n, std::size_t r1) {
    return DenseTensor::from_matrix(m, core_dims(r0, n, r1));
}

// Applies a matrix on the first (rank) index of a core: core x_1 m.
inline DenseTensor absorb_left(const Matrix& m, const DenseTensor& c) {
    const Matrix prod = m * right_unfolding(c);
    return core_from(prod, m.rows(), c.dim(1), c.dim(2));
}

// Applies a matrix on the last (rank) index: core x_3 m^T, i.e. unfolding * m.
inline DenseTensor absorb_right(const DenseTensor& c, const Matrix& m) {
    const Matrix prod = left_unfolding(c) * m;
    return core_from(prod, c.dim(0), c.dim(1), m.cols());
}

// Left-orthogonalizes core d (0-based), pushing R into core d+1.
inline void qr_step_right(std::vector<DenseTensor>& cores, std::size_t d) {
    const auto& c = cores[d];
    auto [q, r] = qr_thin(left_unfolding(c));
    const std::size_t k = q.cols();
    cores[d] = core_from(q, c.dim(0), c.dim(1), k);
    cores[d + 1] = absorb_left(r, cores[d + 1]);
}

// Right-orthogonalizes core d (0-based), pushing R^T into core d-1.
inline void qr_step_left(std::vector<DenseTensor>& cores, std::size_t d) {
    const auto& c = cores[d];
    auto [q, r] = qr_thin(right_unfolding(c).transpose());
    const std::size_t k = q.cols();
    cores[d] = core_from(q.transpose(), k, c.dim(1), c.dim(2));
    cores[d - 1] = absorb_right(cores[d - 1], r.transpose());
}

} // namespace detail

// Brings the train into site-d-mixed-canonical form by QR sweeps.
inline TensorTrain orthogonalize(const TensorTrain& tt, std::size_t site) {
    const std::size_t target = zero_based_mode(site, tt.order());
    std::vector<DenseTensor> cores = tt.cores();
    std::size_t lo = 0, hi = cores.size() - 1;
    if (auto s = tt.canonical_site()) lo = hi = *s - 1;
    // left part: cores [0, target) must be left-orthogonal
    for (std::size_t d = (tt.canonical_site() ? std::min(lo, target) : 0); d < target; ++d) {
        detail::qr_step_right(cores, d);
    }
    // right part: cores (target, D) must be right-orthogonal
    const std::size_t start = tt.canonical_site() ? std::max(hi, target) : cores.size() - 1;
    for (std::size_t d = start; d > target; --d) detail::qr_step_left(cores, d);
    return TensorTrain(std::move(cores), site);
}

inline double tt_norm(const TensorTrain& tt) {
    if (auto s = tt.canonical_site()) return frobenius_norm(tt.core(*s));
    const auto o = orthogonalize(tt, tt.order());
    return frobenius_norm(o.core(tt.order()));
}

// TT-SVD with per-step budget epsilon * ||t|| / sqrt(D - 1); result is site-D canonical.
inline TensorTrain tt_svd(const DenseTensor& t, double epsilon) {
    if (!(epsilon >= 0.0)) throw ArgumentError("tt_svd: epsilon must be nonnegative");
    if (t.order() == 0) throw ArgumentError("tt_svd: order-0 tensor");
    const std::size_t order = t.order();
    const auto& dims = t.dims();
    if (order == 1) {
        return TensorTrain({reshape(t, Dims{1, dims[0], 1})}, 1);
    }
    const double delta = epsilon * frobenius_norm(t) / std::sqrt(static_cast<double>(order - 1));
    std::vector<DenseTensor> cores;
    cores.reserve(order);
    std::size_t rank = 1;
    std::size_t rest = t.size();
    Matrix carry;  // r x rest, empty on the first step
    for (std::size_t d = 0; d + 1 < order; ++d) {
        const std::size_t rows = rank * dims[d];
        rest /= dims[d];
        const double* src = d == 0 ? t.data().data() : carry.data();
        Eigen::Map<const Matrix> c(src, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(rest));
        LeftSvd svd = svd_trunc_left(c, delta);
        if (svd.u.cols() == 0) {
            // nothing survives: keep a rank-1 link carrying the (tiny) remainder
            svd.u = Matrix::Zero(rows, 1);
            svd.u(0, 0) = 1.0;
        }
        const std::size_t r = svd.u.cols();
        cores.push_back(detail::core_from(svd.u, rank, dims[d], r));
        Matrix next = svd.u.transpose() * c;
        carry = std::move(next);
        rank = r;
    }
    cores.push_back(detail::core_from(carry, rank, dims[order - 1], 1));
    return TensorTrain(std::move(cores), order);
}

// Dense contraction of the train.
inline DenseTensor tt_contract(const TensorTrain& tt) {
    const Dims dims = tt.dims();
    check_capacity(product(dims), "tt_contract");
    Matrix acc = detail::right_unfolding(tt.cores().front());  // 1 x (I_1 R_2)
    acc = Eigen::Map<const Matrix>(acc.data(), tt.cores().front().dim(1), tt.cores().front().dim(2));
    for (std::size_t d = 1; d < tt.order(); ++d) {
        const auto& c = tt.cores()[d];
        Matrix next = acc * detail::right_unfolding(c);  // (prod I) x (I_d R_{d+1})
        const Eigen::Index rows = next.rows() * static_cast<Eigen::Index>(c.dim(1));
        acc = Eigen::Map<const Matrix>(next.data(), rows, static_cast<Eigen::Index>(c.dim(2)));
    }
    return DenseTensor(dims, std::vector<double>(acc.data(), acc.data() + acc.size()));
}

// Rounding: QR sweep to site D, then truncated SVDs right to left with budget
// epsilon * ||tt|| / sqrt(D - 1). Result is site-1 canonical.
inline TensorTrain tt_round(const TensorTrain& tt, double epsilon) {
    if (!(epsilon >= 0.0)) throw ArgumentError("tt_round: epsilon must be nonnegative");
    const std::size_t order = tt.order();
    if (order == 1) return orthogonalize(tt, 1);
    TensorTrain o = orthogonalize(tt, order);
    const double norm = frobenius_norm(o.core(order));
    const double delta = epsilon * norm / std::sqrt(static_cast<double>(order - 1));
    std::vector<DenseTensor> cores = std::move(o).release_cores();
    for (std::size_t d = order - 1; d > 0; --d) {
        const auto& c = cores[d];
        TruncatedSvd svd = svd_trunc(detail::right_unfolding(c), delta);
        if (svd.rank() == 0) {
            svd.u = Matrix::Zero(c.dim(0), 1);
            svd.v = Matrix::Zero(c.dim(1) * c.dim(2), 1);
            svd.sigma = Vector::Zero(1);
            svd.v(0, 0) = 1.0;
        }
        const std::size_t r = svd.rank();
        cores[d] = detail::core_from(svd.v.transpose(), r, c.dim(1), c.dim(2));
        cores[d - 1] = detail::absorb_right(cores[d - 1], svd.u * svd.sigma.asDiagonal());
    }
    return TensorTrain(std::move(cores), 1);
}

// Contracts cores d and d+1 into one supercore R_d x (I_d I_{d+1}) x R_{d+2}.
inline TensorTrain merge_cores(const TensorTrain& tt, std::size_t site) {
    if (site < 1 || site >= tt.order()) throw BoundsError("merge_cores: site must be in 1..D-1");
    const std::size_t d = site - 1;
    const auto& a = tt.cores()[d];
    const auto& b = tt.cores()[d + 1];
    const Matrix prod = detail::left_unfolding(a) * detail::right_unfolding(b);
    std::vector<DenseTensor> cores;
    cores.reserve(tt.order() - 1);
    for (std::size_t k = 0; k < d; ++k) cores.push_back(tt.cores()[k]);
    cores.push_back(detail::core_from(prod, a.dim(0), a.dim(1) * b.dim(1), b.dim(2)));
    for (std::size_t k = d + 2; k < tt.order(); ++k) cores.push_back(tt.cores()[k]);
    std::optional<std::size_t> s;
    if (auto cs = tt.canonical_site()) s = *cs <= site ? *cs : *cs - 1;
    return TensorTrain(std::move(cores), s);
}

enum class SplitOrientation {
    left_orthogonal,   // left <- U, right <- S V^T
    right_orthogonal,  // left <- U S, right <- V^T
};

struct SplitResult {
    TensorTrain tt;
    double discarded_energy = 0.0;
};

// Splits supercore `site` (free dim left_dim * right_dim) back into two cores
// by a delta-truncated SVD of its (R_d left_dim) x (right_dim R_{d+2}) unfolding.
inline SplitResult split_core_ex(const TensorTrain& tt, std::size_t site, std::size_t left_dim,
                                 std::size_t right_dim, double delta,
                                 SplitOrientation orientation = SplitOrientation::left_orthogonal,
                                 std::optional<Eigen::Index> max_rank = {}) {
    const std::size_t d = zero_based_mode(site, tt.order());
    const auto& c = tt.cores()[d];
    if (left_dim == 0 || right_dim == 0 || left_dim * right_dim != c.dim(1)) {
        throw ShapeError("split_core: " + std::to_string(left_dim) + "*" + std::to_string(right_dim) +
                         " does not factor free dimension " + std::to_string(c.dim(1)));
    }
    const Matrix m = c.to_matrix(c.dim(0) * left_dim, right_dim * c.dim(2));
    TruncatedSvd svd = svd_trunc(m, delta);
    if (max_rank && svd.rank() > *max_rank) {
        const Eigen::Index r = *max_rank;
        svd.discarded_energy += svd.sigma.tail(svd.rank() - r).squaredNorm();
        svd.u = svd.u.leftCols(r).eval();
        svd.v = svd.v.leftCols(r).eval();
        svd.sigma = svd.sigma.head(r).eval();
    }
    if (svd.rank() == 0) {
        svd.u = Matrix::Zero(m.rows(), 1);
        svd.u(0, 0) = 1.0;
        svd.v = Matrix::Zero(m.cols(), 1);
        svd.v(0, 0) = 1.0;
        svd.sigma = Vector::Zero(1);
    }
    const std::size_t r = svd.rank();
    Matrix left, right;
    if (orientation == SplitOrientation::left_orthogonal) {
        left = svd.u;
        right = svd.sigma.asDiagonal() * svd.v.transpose();
    } else {
        left = svd.u * svd.sigma.asDiagonal();
        right = svd.v.transpose();
    }
    std::vector<DenseTensor> cores;
    cores.reserve(tt.order() + 1);
    for (std::size_t k = 0; k < d; ++k) cores.push_back(tt.cores()[k]);
    cores.push_back(detail::core_from(left, c.dim(0), left_dim, r));
    cores.push_back(detail::core_from(right, r, right_dim, c.dim(2)));
    for (std::size_t k = d + 1; k < tt.order(); ++k) cores.push_back(tt.cores()[k]);
    std::optional<std::size_t> s;
    if (tt.canonical_site() == site) {
        s = orientation == SplitOrientation::left_orthogonal ? site + 1 : site;
    }
    return {TensorTrain(std::move(cores), s), svd.discarded_energy};
}

inline TensorTrain split_core(const TensorTrain& tt, std::size_t site, std::size_t left_dim, std::size_t right_dim,
                              double delta, SplitOrientation orientation = SplitOrientation::left_orthogonal) {
    return split_core_ex(tt, site, left_dim, right_dim, delta, orientation).tt;
}

// Applies u (S x I_d) to the free index of core `site`.
inline TensorTrain apply_to_free_index(const TensorTrain& tt, std::size_t site, const Matrix& u) {
    const std::size_t d = zero_based_mode(site, tt.order());
    std::vector<DenseTensor> cores = tt.cores();
    cores[d] = mode_product(cores[d], 2, u);
    return TensorTrain(std::move(cores));
}

inline TensorTrain replace_core(const TensorTrain& tt, std::size_t site, DenseTensor core) {
    const std::size_t d = zero_based_mode(site, tt.order());
    std::vector<DenseTensor> cores = tt.cores();
    cores[d] = std::move(core);
    return TensorTrain(std::move(cores));
}

struct InterfaceMatrices {
    Matrix left;    // R_d x prod_{k<d} I_k
    Matrix right;   // R_{d+1} x prod_{k>d} I_k
    Matrix center;  // I_d x R_d R_{d+1}
};

// I_d x (R_d R_{d+1}) matricization of a core: permute to (I_d, R_d, R_{d+1}).
inline Matrix core_center_matrix(const DenseTensor& c) {
    const std::array<std::size_t, 3> p{1, 0, 2};
    const DenseTensor perm = detail::permute0(c, p);
    return perm.to_matrix(c.dim(1), c.dim(0) * c.dim(2));
}

inline InterfaceMatrices interface_matrices(const TensorTrain& tt, std::size_t site) {
    const std::size_t d = zero_based_mode(site, tt.order());
    const auto& cores = tt.cores();
    const Dims dims = tt.dims();
    const std::size_t left_n = product(std::span(dims).first(d));
    const std::size_t right_n = product(std::span(dims).subspan(d + 1));
    check_capacity(std::max(left_n * cores[d].dim(0), right_n * cores[d].dim(2)), "interface_matrices");

    // (I_1..I_{d-1}) x R_d, grown core by core
    Matrix left = Matrix::Ones(1, 1);
    for (std::size_t k = 0; k < d; ++k) {
        Matrix next = left * detail::right_unfolding(cores[k]);
        const Eigen::Index rows = next.rows() * static_cast<Eigen::Index>(cores[k].dim(1));
        left = Eigen::Map<const Matrix>(next.data(), rows, static_cast<Eigen::Index>(cores[k].dim(2)));
    }
    // R_{d+1} x (I_{d+1}..I_D), grown from the right
    Matrix right = Matrix::Ones(1, 1);
    for (std::size_t k = cores.size(); k-- > d + 1;) {
        const auto& c = cores[k];
        // (R_k I_k) x rest has the same layout as R_k x (I_k rest)
        const Matrix tmp = detail::left_unfolding(c) * right;
        right = Eigen::Map<const Matrix>(tmp.data(), static_cast<Eigen::Index>(c.dim(0)),
                                         static_cast<Eigen::Index>(c.dim(1)) * right.cols());
    }
    return {left.transpose(), std::move(right), core_center_matrix(cores[d])};
}

// Checks left/right orthogonality of the cores around `site` to `tol`.
inline bool is_site_canonical(const TensorTrain& tt, std::size_t site, double tol = 1e-12) {
    const std::size_t d = zero_based_mode(site, tt.order());
    for (std::size_t k = 0; k < d; ++k) {
        const Matrix l = detail::left_unfolding(tt.cores()[k]);
        if ((l.transpose() * l - Matrix::Identity(l.cols(), l.cols())).norm() > tol) return false;
    }
    for (std::size_t k = d + 1; k < tt.order(); ++k) {
        const Matrix r = detail::right_unfolding(tt.cores()[k]);
        if ((r * r.transpose() - Matrix::Identity(r.rows(), r.rows())).norm() > tol) return false;
    }
    return true;
}

// <a, b> for trains over the same dims, by left-to-right environment sweeps.
inline double tt_inner(const TensorTrain& a, const TensorTrain& b) {
    if (a.dims() != b.dims()) throw ShapeError("tt_inner: different free dimensions");
    Matrix env = Matrix::Ones(1, 1);  // Ra x Rb
    for (std::size_t d = 0; d < a.order(); ++d) {
        const auto& ca = a.cores()[d];
        const auto& cb = b.cores()[d];
        const std::size_t n = ca.dim(1);
        // t = env^T * right_unfolding(a): Rb x (I Ra')
        const Matrix ta = env.transpose() * detail::right_unfolding(ca);
        Matrix next = Matrix::Zero(ca.dim(2), cb.dim(2));
        const Matrix lb = detail::left_unfolding(cb);  // (Rb I) x Rb'
        // ta viewed as (Rb I) x Ra' has the same layout as lb's rows
        Eigen::Map<const Matrix> ta_left(ta.data(), static_cast<Eigen::Index>(cb.dim(0) * n),
                                         static_cast<Eigen::Index>(ca.dim(2)));
        next.noalias() = ta_left.transpose() * lb;
        env = std::move(next);
    }
    return env(0, 0);
}

// Train of a - b via block-diagonal core concatenation.
inline TensorTrain tt_subtract(const TensorTrain& a, const TensorTrain& b) {
    if (a.dims() != b.dims()) throw ShapeError("tt_subtract: different free dimensions");
    const std::size_t order = a.order();
    if (order == 1) {
        return TensorTrain({a.cores()[0] - b.cores()[0]});
    }
    std::vector<DenseTensor> cores;
    cores.reserve(order);
    for (std::size_t d = 0; d < order; ++d) {
        const auto& ca = a.cores()[d];
        const auto& cb = b.cores()[d];
        const std::size_t n = ca.dim(1);
        const std::size_t r0 = d == 0 ? 1 : ca.dim(0) + cb.dim(0);
        const std::size_t r1 = d + 1 == order ? 1 : ca.dim(2) + cb.dim(2);
        DenseTensor out_shape(Dims{r0, n, r1});
        std::vector<double> out(out_shape.size(), 0.0);
        const double sign_b = d == 0 ? -1.0 : 1.0;
        auto put = [&](const DenseTensor& c, std::size_t off0, std::size_t off1, double scale) {
            for (std::size_t k = 0; k < c.dim(2); ++k)
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t r = 0; r < c.dim(0); ++r)
                        out[(r + off0) + r0 * (i + n * (k + off1))] = scale * c[r + c.dim(0) * (i + n * k)];
        };
        put(ca, 0, 0, 1.0);
        put(cb, d == 0 ? 0 : ca.dim(0), d + 1 == order ? 0 : ca.dim(2), sign_b);
        cores.emplace_back(Dims{r0, n, r1}, std::move(out));
    }
    return TensorTrain(std::move(cores));
}

// ||a - b||_F evaluated in TT form (orthogonalization of the difference train).
inline double tt_distance(const TensorTrain& a, const TensorTrain& b) { return tt_norm(tt_subtract(a, b)); }

// <dense, tt> without densifying the train.
inline double dense_tt_inner(const DenseTensor& t, const TensorTrain& tt) {
    if (t.dims() != tt.dims()) throw ShapeError("dense_tt_inner: different free dimensions");
    // Contract from the last mode: M = t viewed as (rest x I_D) times core_D ...
    const auto& cores = tt.cores();
    std::size_t rest = t.size();
    Matrix acc;  // rest x R
    const double* src = t.data().data();
    std::size_t rank = 1;
    for (std::size_t d = cores.size(); d-- > 0;) {
        const auto& c = cores[d];
        const std::size_t n = c.dim(1);
        rest /= n;
        // current data: rest x (I_d * rank); core as (R_d) x (I_d R_{d+1}) -> need (I_d R_{d+1}) x R_d
        Eigen::Map<const Matrix> cur(src, static_cast<Eigen::Index>(rest), static_cast<Eigen::Index>(n * rank));
        const Matrix ct = detail::right_unfolding(c).transpose();
        Matrix next = cur * ct;  // rest x R_d
        acc = std::move(next);
        src = acc.data();
        rank = c.dim(0);
    }
    return acc(0, 0);
}

// Relative distance ||t - tt|| / ||t||. The train is split at the mode d that
// minimises (I_1..I_d + I_{d+1}..I_D) R_{d+1}; the left and right interface
// matrices are formed and the residual t - L R is summed in column blocks.
inline double dense_tt_relative_error(const DenseTensor& t, const TensorTrain& tt) {
    if (t.dims() != tt.dims()) throw ShapeError("dense_tt_relative_error: different free dimensions");
    const auto& cores = tt.cores();
    const std::size_t order = cores.size();
    std::size_t best = 0, best_cost = std::numeric_limits<std::size_t>::max();
    for (std::size_t d = 0, left = 1; d <= order; ++d) {
        const std::size_t rank = d == 0 ? 1 : cores[d - 1].dim(2);
        const std::size_t cost = (left + t.size() / left) * rank;
        if (cost < best_cost) {
            best_cost = cost;
            best = d;
        }
        if (d < order) left *= cores[d].dim(1);
    }
    Matrix l = Matrix::Ones(1, 1);
    for (std::size_t d = 0; d < best; ++d) {
        const Matrix next = l * detail::right_unfolding(cores[d]);
        l = Eigen::Map<const Matrix>(next.data(), next.rows() * static_cast<Eigen::Index>(cores[d].dim(1)),
                                     static_cast<Eigen::Index>(cores[d].dim(2)));
    }
    Matrix r = Matrix::Ones(1, 1);
    for (std::size_t d = order; d-- > best;) {
        const Matrix next = detail::left_unfolding(cores[d]) * r;
        r = Eigen::Map<const Matrix>(next.data(), static_cast<Eigen::Index>(cores[d].dim(0)),
                                     static_cast<Eigen::Index>(cores[d].dim(1)) * next.cols());
    }
    const Eigen::Index rows = l.rows(), cols = r.cols();
    const Eigen::Index block = std::max<Eigen::Index>(1, static_cast<Eigen::Index>((1u << 22) / std::max<Eigen::Index>(1, rows)));
    double sq = 0.0;
    for (Eigen::Index c0 = 0; c0 < cols; c0 += block) {
        const Eigen::Index w = std::min(block, cols - c0);
        Eigen::Map<const Matrix> tb(t.data().data() + c0 * rows, rows, w);
        sq += (tb - l * r.middleCols(c0, w)).squaredNorm();
    }
    const double nt = frobenius_norm(t);
    return nt > 0 ? std::sqrt(sq) / nt : std::sqrt(sq);
}

namespace io {

inline constexpr Magic kTrainMagic{'M', 'R', 'T', 'T'};

inline void write_train(std::ostream& os, const TensorTrain& tt) {
    write_magic(os, kTrainMagic);
    write_u16(os, static_cast<std::uint16_t>(tt.order()));
    for (auto r : tt.ranks()) write_u64(os, r);
    for (auto n : tt.dims()) write_u64(os, n);
    for (const auto& c : tt.cores()) write_payload(os, c.data());
}

inline TensorTrain read_train(std::istream& is) {
    expect_magic(is, kTrainMagic);
    const std::size_t order = read_u16(is, "MRTT header");
    if (order == 0) throw FormatError("MRTT: order 0");
    std::vector<std::size_t> ranks(order + 1);
    for (auto& r : ranks) r = read_u64(is, "MRTT ranks");
    Dims dims(order);
    for (auto& n : dims) n = read_u64(is, "MRTT dims");
    std::vector<DenseTensor> cores;
    for (std::size_t d = 0; d < order; ++d) {
        const std::size_t count = ranks[d] * dims[d] * ranks[d + 1];
        if (count == 0) throw FormatError("MRTT: zero-sized core");
        check_capacity(count, "read_train");
        auto data = read_payload(is, count, "MRTT payload");
        try {
            cores.emplace_back(Dims{ranks[d], dims[d], ranks[d + 1]}, std::move(data));
        } catch (const NumericError&) {
            throw FormatError("MRTT payload contains non-finite values");
        }
    }
    try {
        return TensorTrain(std::move(cores));
    } catch (const ShapeError& e) {
        throw FormatError(std::string("MRTT: ") + e.what());
    }
}

inline void save_train(const std::string& path, const TensorTrain& tt) {
    auto os = open_out(path);
    write_train(os, tt);
    if (!os) throw FormatError("write failed: " + path);
}

inline TensorTrain load_train(const std::string& path) {
    auto is = open_in(path);
    return read_train(is);
}

} // namespace io

} // namespace ttmera
