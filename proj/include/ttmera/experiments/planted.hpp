#pragma once

// Single-layer planted MERA: an R' x R' top matrix A expanded by two identical
// isometries W (I^2 x R') into B = W A W^T, then scrambled by one random
// disentangler on the middle index pair. The experiments compare how well the
// HOSVD disentangler and the Procrustes iteration undo the scrambling.

#include "ttmera/experiments/pgm.hpp"
#include "ttmera/matrix_kernels.hpp"
#include "ttmera/mera.hpp"
#include "ttmera/random.hpp"
#include "ttmera/tensor.hpp"
#include "ttmera/tensor_train.hpp"
#include "ttmera/tucker.hpp"

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

namespace ttmera::experiments {

struct PlantedConfig {
    std::size_t i = 19;
    std::size_t rprime = 128;
    std::uint64_t seed = 1;
    std::optional<Matrix> image;  // top matrix; resized to R' x R'
    std::size_t canonical_site = 4;
    DisentanglerOptions disentangler;
};

struct PlantedSetup {
    Matrix top;          // A, R' x R'
    Matrix isometry;     // W, I^2 x R'
    Matrix disentangler; // V, I^2 x I^2, applied to the middle pair
    Matrix b;            // W A W^T
    Matrix c;            // after the disentangler
    TensorTrain tt;      // TT of C, 4 cores of dimension I
};

// The reshape/permute chain applying v to the index pair (2, 3) of an I^2 x I^2 image.
inline Matrix apply_middle_disentangler(const Matrix& b, const Matrix& v, std::size_t i) {
    const DenseTensor t = DenseTensor::from_matrix(b, Dims{i, i, i, i});
    const DenseTensor bp = permute(t, {2, 3, 4, 1});
    const Matrix cp = v * bp.to_matrix(i * i, i * i);
    const DenseTensor c = permute(DenseTensor::from_matrix(cp, Dims{i, i, i, i}), {4, 1, 2, 3});
    return c.to_matrix(i * i, i * i);
}

inline PlantedSetup build_planted(const PlantedConfig& cfg) {
    if (cfg.i < 1 || cfg.rprime < 1) throw ConfigError("planted: I and R' must be positive");
    if (cfg.rprime > cfg.i * cfg.i) throw ConfigError("planted: R' must not exceed I^2");
    const auto n = static_cast<Eigen::Index>(cfg.i * cfg.i);
    const auto r = static_cast<Eigen::Index>(cfg.rprime);
    PlantedSetup s;
    if (cfg.image) {
        s.top = pgm::resize(*cfg.image, r, r);
    } else {
        Rng rng(cfg.seed, 1);
        s.top = random_matrix(rng, r, r);
    }
    Rng wr(cfg.seed, 2), vr(cfg.seed, 3);
    s.isometry = random_orthonormal(wr, n, r);
    s.disentangler = random_orthogonal(vr, n);
    s.b = s.isometry * s.top * s.isometry.transpose();
    s.c = apply_middle_disentangler(s.b, s.disentangler, cfg.i);
    TensorTrain tt = tt_svd(DenseTensor::from_matrix(s.c, Dims{cfg.i, cfg.i, cfg.i, cfg.i}), 0.0);
    s.tt = orthogonalize(tt, cfg.canonical_site);
    return s;
}

struct PlantedResult {
    std::vector<std::size_t> tt_ranks;       // interior ranks of the TT of C
    DisentanglerReport procrustes;
    Vector sigma_original;                   // singular values of C^(2,3)
    Vector sigma_hosvd;                      // after the HOSVD disentangler
    Vector sigma_procrustes;                 // after the Procrustes disentangler
    std::size_t rank_hosvd = 0;
    std::size_t rank_procrustes = 0;
    double isometry_loss = 0.0;              // relative energy lost truncating the isometries to R'
    double hosvd_isometry_loss = 0.0;
    Matrix image_b, image_c, image_recovered;
};

// Relative energy discarded when both isometries of the disentangled TT are truncated to r.
inline double isometry_truncation_loss(const TensorTrain& tt_with_pair, std::size_t i, std::size_t r) {
    // split the (2,3) supercore losslessly, regroup as (1,2) and (3,4)
    TensorTrain split = split_core(tt_with_pair, 2, i, i, 0.0);
    TensorTrain groups = merge_cores(merge_cores(split, 1), 2);
    TuckerConversionOptions opts;
    opts.max_rank = r;
    const TuckerTT t = tt_to_hosvd_delta(orthogonalize(groups, 1), 0.0, opts);
    const double n = tt_norm(groups);
    return t.discarded_energy() / (n * n);
}

inline PlantedResult run_planted(const PlantedConfig& cfg) {
    const PlantedSetup s = build_planted(cfg);
    PlantedResult out;
    const auto ranks = s.tt.ranks();
    out.tt_ranks.assign(ranks.begin() + 1, ranks.end() - 1);
    const std::size_t i = cfg.i;
    const TensorTrain merged = merge_cores(s.tt, 2);
    const DenseTensor& sc = merged.core(2);
    const Eigen::Index rows = static_cast<Eigen::Index>(sc.dim(0) * i), cols = static_cast<Eigen::Index>(i * sc.dim(2));
    out.sigma_original = singular_values(pair_matricization(sc, i, i));

    // HOSVD disentangler: transpose of the full left basis of the supercore's center matricization
    const Matrix vh = full_left_basis(core_center_matrix(sc)).first.transpose();
    const DenseTensor sch = mode_product(sc, 2, vh);
    out.sigma_hosvd = singular_values(pair_matricization(sch, i, i));
    out.rank_hosvd = static_cast<std::size_t>(ttmera::detail::truncation_rank(out.sigma_hosvd, 0.0, rows, cols));
    out.hosvd_isometry_loss = isometry_truncation_loss(replace_core(merged, 2, sch), i, cfg.rprime);

    auto found = find_disentangler(sc, i, i, cfg.rprime, cfg.disentangler);
    out.sigma_procrustes = singular_values(pair_matricization(found.supercore, i, i));
    out.rank_procrustes = static_cast<std::size_t>(ttmera::detail::truncation_rank(out.sigma_procrustes, 0.0, rows, cols));
    out.procrustes = std::move(found.report);
    const TensorTrain disentangled = replace_core(merged, 2, found.supercore);
    out.isometry_loss = isometry_truncation_loss(disentangled, i, cfg.rprime);

    out.image_b = s.b;
    out.image_c = s.c;
    out.image_recovered = tt_contract(split_core(disentangled, 2, i, i, 0.0)).to_matrix(i * i, i * i);
    return out;
}

} // namespace ttmera::experiments
