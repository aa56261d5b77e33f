#pragma once

// Conversion of a tensor train into a truncated HOSVD whose core is kept as a
// tensor train, and the dense sequentially truncated HOSVD used as baseline.

#include "ttmera/errors.hpp"
#include "ttmera/matrix_kernels.hpp"
#include "ttmera/tensor.hpp"
#include "ttmera/tensor_train.hpp"

#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

namespace ttmera {

struct TuckerTT {
    std::vector<Matrix> factors;  // U_d: I_d x S_d, orthonormal columns
    TensorTrain core;             // free dims S_1..S_D, site-D canonical
    std::vector<double> mode_discarded;
    std::vector<std::size_t> multilinear_rank;
    bool input_was_orthogonalized = false;

    // sum_d I_d S_d + sum_d r_d S_d r_{d+1}
    std::size_t storage() const {
        std::size_t s = core.storage();
        for (const auto& u : factors) s += static_cast<std::size_t>(u.size());
        return s;
    }

    double discarded_energy() const {
        return std::accumulate(mode_discarded.begin(), mode_discarded.end(), 0.0);
    }
};

struct TuckerConversionOptions {
    // Caps every S_d; used when a caller forces isometry output dimensions.
    std::optional<std::size_t> max_rank;
};

// Tucker conversion with an absolute per-mode tolerance delta. The input must
// be site-1 canonical (it is orthogonalized here otherwise).
inline TuckerTT tt_to_hosvd_delta(const TensorTrain& tt, double delta, const TuckerConversionOptions& opts = {}) {
    if (!(delta >= 0.0)) throw ArgumentError("tt_to_hosvd: tolerance must be nonnegative");
    TuckerTT out;
    out.input_was_orthogonalized = tt.canonical_site() != std::optional<std::size_t>{1};
    std::vector<DenseTensor> cores =
        out.input_was_orthogonalized ? orthogonalize(tt, 1).cores() : tt.cores();
    const std::size_t order = cores.size();
    std::vector<DenseTensor> tucker_cores;
    tucker_cores.reserve(order);
    for (std::size_t d = 0; d < order; ++d) {
        const DenseTensor& c = cores[d];
        const std::size_t r0 = c.dim(0), r1 = c.dim(2);
        TruncatedSvd svd = svd_trunc(core_center_matrix(c), delta);
        if (opts.max_rank && static_cast<std::size_t>(svd.rank()) > *opts.max_rank) {
            const Eigen::Index keep = static_cast<Eigen::Index>(*opts.max_rank);
            svd.discarded_energy += svd.sigma.tail(svd.rank() - keep).squaredNorm();
            svd.u = svd.u.leftCols(keep).eval();
            svd.v = svd.v.leftCols(keep).eval();
            svd.sigma = svd.sigma.head(keep).eval();
        }
        if (svd.rank() == 0) {
            throw ArgumentError("tt_to_hosvd: mode " + std::to_string(d + 1) +
                                " truncated to rank 0; tolerance exceeds the tensor norm");
        }
        const std::size_t s = svd.rank();
        // S V^T as [S_d, R_d, R_{d+1}], then permute to [R_d, S_d, R_{d+1}]
        const Matrix sv = svd.sigma.asDiagonal() * svd.v.transpose();
        const DenseTensor t = DenseTensor::from_matrix(sv, Dims{s, r0, r1});
        const std::array<std::size_t, 3> swap12{1, 0, 2};
        DenseTensor permuted = detail::permute0(t, swap12);
        if (d + 1 == order) {
            tucker_cores.push_back(std::move(permuted));
        } else {
            auto [q, r] = qr_thin(permuted.to_matrix(r0 * s, r1));
            const std::size_t k = q.cols();
            tucker_cores.push_back(detail::core_from(q, r0, s, k));
            cores[d + 1] = detail::absorb_left(r, cores[d + 1]);
        }
        out.factors.push_back(std::move(svd.u));
        out.mode_discarded.push_back(svd.discarded_energy);
        out.multilinear_rank.push_back(s);
    }
    out.core = TensorTrain(std::move(tucker_cores), order);
    return out;
}

// Truncated HOSVD of a train with relative accuracy epsilon:
// per-mode tolerance epsilon * ||A|| / sqrt(D), the norm read off the canonical core.
inline TuckerTT tt_to_hosvd(const TensorTrain& tt, double epsilon, const TuckerConversionOptions& opts = {}) {
    if (!(epsilon >= 0.0)) throw ArgumentError("tt_to_hosvd: epsilon must be nonnegative");
    const bool was_canonical = tt.canonical_site() == std::optional<std::size_t>{1};
    const TensorTrain start = was_canonical ? tt : orthogonalize(tt, 1);
    const double norm = frobenius_norm(start.core(1));
    const double delta = epsilon * norm / std::sqrt(static_cast<double>(tt.order()));
    TuckerTT out = tt_to_hosvd_delta(start, delta, opts);
    out.input_was_orthogonalized = !was_canonical;
    return out;
}

// The full tensor as a train: U_d applied to each core's free index.
inline TensorTrain tucker_reconstruct_tt(const TuckerTT& t) {
    std::vector<DenseTensor> cores;
    cores.reserve(t.core.order());
    for (std::size_t d = 0; d < t.core.order(); ++d) {
        cores.push_back(mode_product(t.core.cores()[d], 2, t.factors[d]));
    }
    return TensorTrain(std::move(cores));
}

struct DenseTucker {
    std::vector<Matrix> factors;
    DenseTensor core;
    std::vector<double> mode_discarded;

    std::vector<std::size_t> multilinear_rank() const { return core.dims(); }

    // prod S_d + sum I_d S_d
    std::size_t storage() const {
        std::size_t s = core.size();
        for (const auto& u : factors) s += static_cast<std::size_t>(u.size());
        return s;
    }

    DenseTensor reconstruct() const {
        DenseTensor out = core;
        for (std::size_t d = 0; d < factors.size(); ++d) out = mode_product(out, d + 1, factors[d]);
        return out;
    }
};

// Sequentially truncated HOSVD, modes 1..D, tolerance epsilon ||t|| / sqrt(D) each.
inline DenseTucker sthosvd_dense(const DenseTensor& t, double epsilon) {
    if (!(epsilon >= 0.0)) throw ArgumentError("sthosvd: epsilon must be nonnegative");
    check_capacity(t.size(), "sthosvd_dense");
    const std::size_t order = t.order();
    const double delta = epsilon * frobenius_norm(t) / std::sqrt(static_cast<double>(order));
    DenseTucker out;
    DenseTensor core;
    for (std::size_t d = 0; d < order; ++d) {
        const DenseTensor& cur = d == 0 ? t : core;
        LeftSvd svd = [&] {
            if (d == 0) return svd_trunc_left(cur.as_matrix(cur.dim(0), cur.size() / cur.dim(0)), delta);
            return svd_trunc_left(unfold(cur, d + 1), delta);
        }();
        if (svd.u.cols() == 0) {
            svd.u = Matrix::Zero(cur.dim(d), 1);
            svd.u(0, 0) = 1.0;
        }
        DenseTensor next = mode_product(cur, d + 1, svd.u.transpose());
        core = std::move(next);
        out.factors.push_back(std::move(svd.u));
        out.mode_discarded.push_back(svd.discarded_energy);
    }
    out.core = std::move(core);
    return out;
}

inline double compression_ratio(std::size_t original_entries, std::size_t decomposition_storage) {
    if (decomposition_storage == 0) throw ArgumentError("compression_ratio: zero storage");
    if (original_entries == 0) throw ArgumentError("compression_ratio: zero original size");
    return static_cast<double>(original_entries) / static_cast<double>(decomposition_storage);
}

// Mode order sorting dimensions ascending (stable), as a 1-based permutation.
inline std::vector<std::size_t> ascending_mode_order(const Dims& dims) {
    std::vector<std::size_t> p(dims.size());
    std::iota(p.begin(), p.end(), std::size_t{1});
    std::stable_sort(p.begin(), p.end(), [&](std::size_t a, std::size_t b) { return dims[a - 1] < dims[b - 1]; });
    return p;
}

} // namespace ttmera
