#pragma once

// MERA networks: data structure, conversion of a tensor train into a MERA
// (layer by layer: disentanglers, then isometries), the iterative Procrustes
// disentangler search, backward evaluation and storage accounting.
//
// Conventions
//   * A disentangler acts on the fused free index f = i_p + I_p * i_{p+1}
//     (first index fastest) of the supercore at sites (p, p+1). Coarse-graining
//     applies V, reconstruction applies V^T. Both construction strategies store
//     V in this orientation.
//   * An isometry W is (I_1 ... I_K) x S with orthonormal columns, rows indexed
//     first-input-fastest. Reconstruction expands a top index through W.
//   * Positions are 1-based (left site of a pair / first site of a group).

#include "ttmera/binary_io.hpp"
#include "ttmera/errors.hpp"
#include "ttmera/matrix_kernels.hpp"
#include "ttmera/random.hpp"
#include "ttmera/tensor.hpp"
#include "ttmera/tensor_train.hpp"
#include "ttmera/tucker.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace ttmera {

struct Isometry {
    Dims input_dims;
    std::size_t output_dim = 0;
    Matrix data;  // prod(input_dims) x output_dim
};

struct Disentangler {
    std::size_t dim1 = 0, dim2 = 0;
    Matrix data;  // (dim1 dim2) x (dim1 dim2), orthogonal
};

struct MeraLayer {
    std::vector<std::pair<std::size_t, Disentangler>> disentanglers;
    std::vector<std::pair<std::size_t, Isometry>> isometries;
    std::size_t input_arity = 0;

    std::size_t output_arity() const noexcept { return isometries.size(); }
};

struct Mera {
    std::vector<MeraLayer> layers;  // bottom-up
    DenseTensor top;

    // Free dimensions of the represented tensor.
    Dims dims() const {
        if (layers.empty()) return top.dims();
        Dims d;
        for (const auto& [pos, w] : layers.front().isometries) d.insert(d.end(), w.input_dims.begin(), w.input_dims.end());
        return d;
    }
};

inline std::size_t mera_storage(const Mera& m) {
    std::size_t s = m.top.size();
    for (const auto& layer : m.layers) {
        for (const auto& [pos, v] : layer.disentanglers) s += static_cast<std::size_t>(v.data.size());
        for (const auto& [pos, w] : layer.isometries) s += static_cast<std::size_t>(w.data.size());
    }
    return s;
}

// Checks placement and arity chaining; throws ShapeError on violations.
inline void validate_mera(const Mera& m) {
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const auto& layer = m.layers[l];
        std::size_t next = 1;
        for (const auto& [pos, w] : layer.isometries) {
            if (pos != next) throw ShapeError("isometries must tile the layer inputs in order");
            if (static_cast<std::size_t>(w.data.rows()) != product(w.input_dims) ||
                static_cast<std::size_t>(w.data.cols()) != w.output_dim) {
                throw ShapeError("isometry matrix does not match its dimensions");
            }
            next += w.input_dims.size();
        }
        if (next - 1 != layer.input_arity) throw ShapeError("isometries do not cover the layer inputs");
        std::size_t last_right = 0;
        for (const auto& [pos, v] : layer.disentanglers) {
            if (pos < 1 || pos + 1 > layer.input_arity) throw ShapeError("disentangler outside the layer");
            if (pos <= last_right) throw ShapeError("overlapping disentanglers");
            if (static_cast<std::size_t>(v.data.rows()) != v.dim1 * v.dim2 || v.data.rows() != v.data.cols()) {
                throw ShapeError("disentangler matrix does not match its dimensions");
            }
            last_right = pos + 1;
        }
        const std::size_t out = layer.output_arity();
        const std::size_t expected = l + 1 < m.layers.size() ? m.layers[l + 1].input_arity : m.top.order();
        if (out != expected) throw ShapeError("layer arity chaining violated");
    }
}

// -- shuf ---------------------------------------------------------------------

// (R0 x I1 I2 x R2) supercore -> (I1 I2) x (R0 R2) matrix.
inline Matrix shuf(const DenseTensor& supercore, std::size_t i1, std::size_t i2) {
    if (supercore.order() != 3 || supercore.dim(1) != i1 * i2) {
        throw ShapeError("shuf: free dimension does not factor as " + std::to_string(i1) + "*" + std::to_string(i2));
    }
    const std::size_t r0 = supercore.dim(0), r2 = supercore.dim(2);
    const DenseTensor t4 = reshape(supercore, Dims{r0, i1, i2, r2});
    const std::array<std::size_t, 4> p{1, 2, 0, 3};
    return detail::permute0(t4, p).to_matrix(i1 * i2, r0 * r2);
}

// Inverse of shuf, returning the supercore.
inline DenseTensor shuf_inv(const Matrix& m, std::size_t r0, std::size_t i1, std::size_t i2, std::size_t r2) {
    if (static_cast<std::size_t>(m.rows()) != i1 * i2 || static_cast<std::size_t>(m.cols()) != r0 * r2) {
        throw ShapeError("shuf_inv: matrix shape does not match dims");
    }
    const DenseTensor t4 = DenseTensor::from_matrix(m, Dims{i1, i2, r0, r2});
    const std::array<std::size_t, 4> p{2, 0, 1, 3};
    return reshape(detail::permute0(t4, p), Dims{r0, i1 * i2, r2});
}

// The (R0 I1) x (I2 R2) matricization of a supercore.
inline Matrix pair_matricization(const DenseTensor& supercore, std::size_t i1, std::size_t i2) {
    if (supercore.dim(1) != i1 * i2) throw ShapeError("pair_matricization: free dimension mismatch");
    return supercore.to_matrix(supercore.dim(0) * i1, i2 * supercore.dim(2));
}

// -- iterative disentangler -----------------------------------------------------

struct DisentanglerOptions {
    std::size_t max_iters = 50'000;
    double gap_threshold = 1e12;
    std::size_t trace_every = 0;     // 0: no trace; otherwise sample every n-th iteration (plus first and last)
    bool hold_target_fixed = false;  // keep the first low-rank target for all iterations
};

struct DisentanglerReport {
    std::size_t iterations = 0;
    double final_gap = 0.0;
    std::size_t achieved_rank = 0;
    std::size_t target_rank = 0;
    bool converged = false;
    std::vector<std::pair<std::size_t, Vector>> singular_value_trace;
};

struct DisentanglerResult {
    Disentangler v;
    DenseTensor supercore;  // V applied to the fused free index
    DisentanglerReport report;
};

namespace detail {

inline double rank_gap(const Vector& s, std::size_t r) {
    if (r == 0 || r > static_cast<std::size_t>(s.size())) return 0.0;
    if (r == static_cast<std::size_t>(s.size())) return std::numeric_limits<double>::infinity();
    const double next = s(static_cast<Eigen::Index>(r));
    if (next <= 0.0) return std::numeric_limits<double>::infinity();
    return s(static_cast<Eigen::Index>(r - 1)) / next;
}

inline DenseTensor apply_to_fused(const DenseTensor& supercore, const Matrix& v) { return mode_product(supercore, 2, v); }

inline constexpr std::size_t kReorthogonalizeEvery = 64;

// Polar factor: the orthogonal matrix closest to m in Frobenius norm.
inline Matrix nearest_orthogonal(const Matrix& m) {
    return procrustes_solve(Matrix::Identity(m.rows(), m.cols()), m);
}

} // namespace detail

// Procrustes iteration lowering the rank of the (R0 I1) x (I2 R2) matricization
// to target_rank. On budget exhaustion the iterate with the largest gap is returned.
inline DisentanglerResult find_disentangler(const DenseTensor& supercore, std::size_t i1, std::size_t i2,
                                            std::size_t target_rank, const DisentanglerOptions& opts = {}) {
    if (supercore.order() != 3 || supercore.dim(1) != i1 * i2) throw ShapeError("find_disentangler: bad supercore");
    if (target_rank < 1) throw ArgumentError("find_disentangler: target rank must be positive");
    for (double x : supercore.data())
        if (!std::isfinite(x)) throw NumericError("find_disentangler: non-finite input");
    const std::size_t r0 = supercore.dim(0), r2 = supercore.dim(2), n = i1 * i2;
    const Eigen::Index rows = static_cast<Eigen::Index>(r0 * i1), cols = static_cast<Eigen::Index>(i2 * r2);
    const Vector s0 = singular_values(pair_matricization(supercore, i1, i2));
    const std::size_t current_rank =
        static_cast<std::size_t>(detail::truncation_rank(s0, 0.0, rows, cols));
    if (target_rank > current_rank) {
        throw ArgumentError("find_disentangler: target rank " + std::to_string(target_rank) +
                            " exceeds the current rank " + std::to_string(current_rank));
    }

    DisentanglerReport report;
    report.target_rank = target_rank;
    Matrix v = Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    DenseTensor a = supercore;
    Matrix best_v = v;
    DenseTensor best_a = a;
    double best_gap = -1.0;
    Vector best_s;
    Matrix fixed_target;  // shuf of the held target, if requested
    const Matrix s_in = shuf(supercore, i1, i2);
    const Eigen::Index r = static_cast<Eigen::Index>(target_rank);

    auto record = [&](std::size_t it, const Vector& s, bool force) {
        if (opts.trace_every == 0) return;
        if (force || it == 1 || it % opts.trace_every == 0) {
            if (report.singular_value_trace.empty() || report.singular_value_trace.back().first != it) {
                report.singular_value_trace.emplace_back(it, s);
            }
        }
    };

    for (std::size_t it = 1; it <= opts.max_iters; ++it) {
        const Matrix m = pair_matricization(a, i1, i2);
        Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Vector& s = svd.singularValues();
        const double gap = detail::rank_gap(s, target_rank);
        report.iterations = it;
        if (gap > best_gap) {
            best_gap = gap;
            best_v = v;
            best_a = a;
            best_s = s;
        }
        const bool done = gap >= opts.gap_threshold;
        record(it, s, done || it == opts.max_iters);
        if (done) {
            report.converged = true;
            break;
        }
        if (it == opts.max_iters) break;

        Matrix target;
        if (opts.hold_target_fixed && fixed_target.size() > 0) {
            target = fixed_target;
        } else {
            const Matrix low = svd.matrixU().leftCols(r) * s.head(r).asDiagonal() * svd.matrixV().leftCols(r).transpose();
            target = shuf(DenseTensor::from_matrix(low, Dims{r0, n, r2}), i1, i2);
            if (opts.hold_target_fixed) fixed_target = target;
        }
        const Matrix cur = shuf(a, i1, i2);
        const Matrix vhat = procrustes_solve(cur, target);
        v = vhat * v;
        if (it % detail::kReorthogonalizeEvery == 0) {
            // products of many orthogonal factors drift; restore v and recompute a from the input
            v = detail::nearest_orthogonal(v);
            a = shuf_inv(v * s_in, r0, i1, i2, r2);
        } else {
            a = shuf_inv(vhat * cur, r0, i1, i2, r2);
        }
    }

    if (report.iterations > 1) {
        best_v = detail::nearest_orthogonal(best_v);
        best_a = shuf_inv(best_v * s_in, r0, i1, i2, r2);
    }
    report.final_gap = best_gap;
    report.achieved_rank =
        static_cast<std::size_t>(detail::truncation_rank(best_s, 0.0, rows, cols));
    return {Disentangler{i1, i2, std::move(best_v)}, std::move(best_a), std::move(report)};
}

// -- MERACLE ----------------------------------------------------------------------

enum class DisentanglerStrategy { hosvd, procrustes };

struct MeracleOptions {
    std::size_t arity = 2;  // K
    std::size_t layers = 1;
    double epsilon = 0.0;
    DisentanglerStrategy strategy = DisentanglerStrategy::hosvd;
    // Per layer, per disentangler target ranks for the procrustes strategy.
    // Empty selects "auto": the delta-truncation rank of each pair matricization.
    std::vector<std::vector<std::size_t>> target_ranks;
    DisentanglerOptions disentangler;
    // Caps every isometry output dimension (voids the accuracy guarantee).
    std::optional<std::size_t> forced_output_dim;
};

struct MeracleResult {
    Mera mera;
    std::vector<std::vector<double>> isometry_discarded;  // per layer, per isometry
    std::vector<double> split_discarded;                   // one per disentangler split
    std::vector<DisentanglerReport> reports;               // procrustes strategy only
    std::vector<std::vector<std::size_t>> chosen_ranks;    // targets actually used
    double delta_isometry = 0.0;
    double delta_split = 0.0;
    // sum_k sqrt(split_k) + sqrt(sum isometry): upper bound on ||A - B||_F
    double error_bound = 0.0;
};

// Pair positions (1-based left sites) of the brick pattern for n indices.
inline std::vector<std::size_t> brick_disentangler_sites(std::size_t n, std::size_t k) {
    std::vector<std::size_t> sites;
    for (std::size_t j = 1; j * k < n; ++j) sites.push_back(j * k);
    return sites;
}

inline std::size_t isometry_count(std::size_t n, std::size_t k, std::size_t layers) {
    std::size_t total = 0;
    for (std::size_t l = 0; l < layers; ++l) {
        if (n % k != 0) throw ArgumentError("meracle: layer arity " + std::to_string(n) + " is not divisible by K");
        n /= k;
        total += n;
    }
    return total;
}

inline MeracleResult meracle(const TensorTrain& input, const MeracleOptions& opts) {
    const std::size_t k = opts.arity;
    if (k < 1) throw ArgumentError("meracle: K must be positive");
    if (opts.layers < 1) throw ArgumentError("meracle: at least one layer required");
    if (!(opts.epsilon >= 0.0)) throw ArgumentError("meracle: epsilon must be nonnegative");
    const std::size_t n_iso = isometry_count(input.order(), k, opts.layers);
    const bool procrustes = opts.strategy == DisentanglerStrategy::procrustes;

    std::size_t n_dis = 0;
    {
        std::size_t n = input.order();
        for (std::size_t l = 0; l < opts.layers; ++l) {
            n_dis += brick_disentangler_sites(n, k).size();
            n /= k;
        }
    }
    if (procrustes && !opts.target_ranks.empty()) {
        if (opts.target_ranks.size() != opts.layers) throw ArgumentError("meracle: need target ranks for every layer");
    }

    TensorTrain tt = orthogonalize(input, std::min(k, input.order()));
    const double norm = tt_norm(tt);
    MeracleResult res;
    // Procrustes splits are truncated too: half of the budget goes to them.
    const double iso_eps = procrustes && n_dis > 0 ? 0.5 * opts.epsilon : opts.epsilon;
    res.delta_isometry = iso_eps * norm / std::sqrt(static_cast<double>(n_iso));
    res.delta_split = procrustes && n_dis > 0 ? 0.5 * opts.epsilon * norm / static_cast<double>(n_dis) : 0.0;

    double split_bound = 0.0, iso_energy = 0.0;
    for (std::size_t l = 0; l < opts.layers; ++l) {
        MeraLayer layer;
        layer.input_arity = tt.order();
        const Dims dims = tt.dims();
        const auto sites = brick_disentangler_sites(tt.order(), k);
        std::vector<std::size_t> chosen;

        for (std::size_t j = 0; j < sites.size(); ++j) {
            const std::size_t p = sites[j];
            const std::size_t i1 = dims[p - 1], i2 = dims[p];
            TensorTrain merged = merge_cores(orthogonalize(tt, p), p);
            const DenseTensor& sc = merged.core(p);
            Matrix v;
            DenseTensor transformed;
            if (!procrustes) {
                v = full_left_basis(core_center_matrix(sc)).first.transpose();
                transformed = detail::apply_to_fused(sc, v);
            } else {
                std::size_t target;
                if (!opts.target_ranks.empty()) {
                    if (opts.target_ranks[l].size() != sites.size()) {
                        throw ArgumentError("meracle: layer " + std::to_string(l + 1) + " needs " +
                                            std::to_string(sites.size()) + " target ranks");
                    }
                    target = opts.target_ranks[l][j];
                } else {
                    const auto m = pair_matricization(sc, i1, i2);
                    target = std::max<std::size_t>(1, static_cast<std::size_t>(svd_trunc(m, res.delta_split).rank()));
                }
                auto found = find_disentangler(sc, i1, i2, target, opts.disentangler);
                chosen.push_back(target);
                res.reports.push_back(std::move(found.report));
                v = std::move(found.v.data);
                transformed = std::move(found.supercore);
            }
            std::vector<DenseTensor> cores = std::move(merged).release_cores();
            cores[p - 1] = std::move(transformed);
            // an orthogonal action on the free index keeps the canonical form at p
            TensorTrain updated(std::move(cores), p);
            auto split = split_core_ex(updated, p, i1, i2, procrustes ? res.delta_split : 0.0);
            res.split_discarded.push_back(split.discarded_energy);
            split_bound += std::sqrt(split.discarded_energy);
            tt = std::move(split.tt);
            layer.disentanglers.emplace_back(p, Disentangler{i1, i2, std::move(v)});
        }
        res.chosen_ranks.push_back(std::move(chosen));

        // isometries: merge groups of K consecutive cores, truncated HOSVD
        const std::size_t groups = tt.order() / k;
        for (std::size_t g = 0; g < groups; ++g) {
            // groups before g are already merged, so group g starts at site g+1
            for (std::size_t m = 1; m < k; ++m) tt = merge_cores(tt, g + 1);
        }
        TuckerConversionOptions topts;
        topts.max_rank = opts.forced_output_dim;
        TuckerTT tucker = tt_to_hosvd_delta(orthogonalize(tt, 1), res.delta_isometry, topts);
        std::vector<double> disc;
        for (std::size_t g = 0; g < tucker.factors.size(); ++g) {
            Dims in(dims.begin() + static_cast<std::ptrdiff_t>(g * k), dims.begin() + static_cast<std::ptrdiff_t>((g + 1) * k));
            const std::size_t s = static_cast<std::size_t>(tucker.factors[g].cols());
            layer.isometries.emplace_back(g * k + 1, Isometry{std::move(in), s, std::move(tucker.factors[g])});
            disc.push_back(tucker.mode_discarded[g]);
            iso_energy += tucker.mode_discarded[g];
        }
        res.isometry_discarded.push_back(std::move(disc));
        res.mera.layers.push_back(std::move(layer));
        tt = std::move(tucker.core);
    }
    res.mera.top = tt_contract(tt);
    res.error_bound = split_bound + std::sqrt(iso_energy);
    return res;
}

// -- backward evaluation ------------------------------------------------------------

namespace detail {

// Expands core `site` through an isometry and splits it into K cores (delta = 0).
inline TensorTrain expand_isometry(TensorTrain tt, std::size_t site, const Isometry& w) {
    if (tt.core(site).dim(1) != w.output_dim) throw ShapeError("mera: isometry output does not match core");
    tt = apply_to_free_index(tt, site, w.data);
    std::size_t rest = product(w.input_dims);
    for (std::size_t m = 0; m + 1 < w.input_dims.size(); ++m) {
        rest /= w.input_dims[m];
        tt = split_core(tt, site + m, w.input_dims[m], rest, 0.0);
    }
    return tt;
}

} // namespace detail

// Contracts the MERA top-down into a tensor train; round_eps controls the
// rounding after each layer.
inline TensorTrain mera_to_tt(const Mera& m, double round_eps = 1e-14) {
    validate_mera(m);
    TensorTrain tt = tt_svd(m.top, 0.0);
    for (std::size_t l = m.layers.size(); l-- > 0;) {
        const auto& layer = m.layers[l];
        // groups right to left so the sites of unexpanded groups stay fixed
        for (std::size_t g = layer.isometries.size(); g-- > 0;) {
            tt = detail::expand_isometry(std::move(tt), g + 1, layer.isometries[g].second);
        }
        for (const auto& [p, v] : layer.disentanglers) {
            TensorTrain merged = merge_cores(orthogonalize(tt, p), p);
            std::vector<DenseTensor> cores = std::move(merged).release_cores();
            cores[p - 1] = detail::apply_to_fused(cores[p - 1], v.data.transpose());
            tt = split_core(TensorTrain(std::move(cores), p), p, v.dim1, v.dim2, 0.0);
        }
        tt = tt_round(tt, round_eps);
    }
    return tt;
}

// Dense evaluation, layer by layer with mode products (small sizes only).
inline DenseTensor mera_to_dense(const Mera& m) {
    validate_mera(m);
    DenseTensor x = m.top;
    for (std::size_t l = m.layers.size(); l-- > 0;) {
        const auto& layer = m.layers[l];
        Dims dims;
        for (const auto& [pos, w] : layer.isometries) dims.insert(dims.end(), w.input_dims.begin(), w.input_dims.end());
        check_capacity(product(dims), "mera_to_dense");
        for (std::size_t g = 0; g < layer.isometries.size(); ++g) x = mode_product(x, g + 1, layer.isometries[g].second.data);
        x = reshape(std::move(x), dims);
        for (const auto& [p, v] : layer.disentanglers) {
            Dims fused;
            for (std::size_t q = 0; q < dims.size(); ++q) {
                if (q + 1 == p) {
                    fused.push_back(dims[q] * dims[q + 1]);
                    ++q;
                } else {
                    fused.push_back(dims[q]);
                }
            }
            x = reshape(mode_product(reshape(std::move(x), fused), p, v.data.transpose()), dims);
        }
    }
    return x;
}

inline double mera_relative_error(const Mera& m, const TensorTrain& reference) {
    const TensorTrain b = mera_to_tt(m);
    if (b.dims() != reference.dims()) throw ShapeError("mera_relative_error: different outer dimensions");
    const double ref_norm = tt_norm(reference);
    const double diff = tt_distance(reference, b);
    return ref_norm > 0 ? diff / ref_norm : diff;
}

// -- random networks -------------------------------------------------------------------

// Random MERA with orthogonalized Gaussian constituents: `order` indices of
// dimension i at the bottom, K-to-1 isometries of output s every layer, brick
// disentanglers, Gaussian top. Every constituent draws from its own stream.
inline Mera random_mera(std::uint64_t seed, std::size_t order, std::size_t i, std::size_t s, std::size_t k,
                        std::size_t layers) {
    (void)isometry_count(order, k, layers);
    Mera m;
    std::size_t n = order, dim = i, stream = 1;
    for (std::size_t l = 0; l < layers; ++l) {
        MeraLayer layer;
        layer.input_arity = n;
        for (std::size_t p : brick_disentangler_sites(n, k)) {
            Rng rng(seed, stream++);
            layer.disentanglers.emplace_back(
                p, Disentangler{dim, dim, random_orthogonal(rng, static_cast<Eigen::Index>(dim * dim))});
        }
        const std::size_t fan_in = static_cast<std::size_t>(std::pow(static_cast<double>(dim), static_cast<double>(k)) + 0.5);
        if (s > fan_in) throw ArgumentError("random_mera: output dimension exceeds isometry fan-in");
        for (std::size_t g = 0; g < n / k; ++g) {
            Rng rng(seed, stream++);
            layer.isometries.emplace_back(g * k + 1, Isometry{Dims(k, dim), s,
                                                              random_orthonormal(rng, static_cast<Eigen::Index>(fan_in),
                                                                                 static_cast<Eigen::Index>(s))});
        }
        m.layers.push_back(std::move(layer));
        n /= k;
        dim = s;
    }
    Rng rng(seed, 0);
    m.top = random_tensor(rng, Dims(n, dim));
    return m;
}

// -- MRMA file format ----------------------------------------------------------------------
//   "MRMA" | u16 layers | per layer: u16 n_disentanglers, u16 n_isometries, u16 input_arity,
//   then constituents as (u8 kind 'D'/'W', u16 position (1-based), dims record, f64 payload)
//   | top tensor as a full MRT1 record.
// Disentangler dims are (I1, I2, I1, I2); isometry dims are (I_1..I_K, S).

namespace io {

inline constexpr Magic kMeraMagic{'M', 'R', 'M', 'A'};

inline void write_mera(std::ostream& os, const Mera& m) {
    write_magic(os, kMeraMagic);
    write_u16(os, static_cast<std::uint16_t>(m.layers.size()));
    for (const auto& layer : m.layers) {
        write_u16(os, static_cast<std::uint16_t>(layer.disentanglers.size()));
        write_u16(os, static_cast<std::uint16_t>(layer.isometries.size()));
        write_u16(os, static_cast<std::uint16_t>(layer.input_arity));
        for (const auto& [pos, v] : layer.disentanglers) {
            write_u8(os, 'D');
            write_u16(os, static_cast<std::uint16_t>(pos));
            write_dims(os, Dims{v.dim1, v.dim2, v.dim1, v.dim2});
            write_payload(os, std::span<const double>(v.data.data(), static_cast<std::size_t>(v.data.size())));
        }
        for (const auto& [pos, w] : layer.isometries) {
            write_u8(os, 'W');
            write_u16(os, static_cast<std::uint16_t>(pos));
            Dims d = w.input_dims;
            d.push_back(w.output_dim);
            write_dims(os, d);
            write_payload(os, std::span<const double>(w.data.data(), static_cast<std::size_t>(w.data.size())));
        }
    }
    write_tensor(os, m.top);
}

inline Mera read_mera(std::istream& is) {
    expect_magic(is, kMeraMagic);
    Mera m;
    const std::size_t n_layers = read_u16(is, "MRMA header");
    for (std::size_t l = 0; l < n_layers; ++l) {
        MeraLayer layer;
        const std::size_t nd = read_u16(is, "MRMA layer"), nw = read_u16(is, "MRMA layer");
        layer.input_arity = read_u16(is, "MRMA layer");
        for (std::size_t c = 0; c < nd + nw; ++c) {
            const char kind = static_cast<char>(read_u8(is, "MRMA constituent"));
            const std::size_t pos = read_u16(is, "MRMA constituent");
            const Dims d = read_dims(is, "MRMA constituent");
            const std::size_t count = product(d);
            check_capacity(count, "read_mera");
            auto data = read_payload(is, count, "MRMA payload");
            for (double x : data)
                if (!std::isfinite(x)) throw FormatError("MRMA payload: non-finite entry");
            if (c < nd) {
                if (kind != 'D' || d.size() != 4 || d[0] != d[2] || d[1] != d[3]) throw FormatError("MRMA: bad disentangler record");
                const auto n = static_cast<Eigen::Index>(d[0] * d[1]);
                layer.disentanglers.emplace_back(pos, Disentangler{d[0], d[1], Eigen::Map<const Matrix>(data.data(), n, n)});
            } else {
                if (kind != 'W' || d.size() < 2) throw FormatError("MRMA: bad isometry record");
                Dims in(d.begin(), d.end() - 1);
                const auto rows = static_cast<Eigen::Index>(product(in));
                const auto cols = static_cast<Eigen::Index>(d.back());
                layer.isometries.emplace_back(pos, Isometry{std::move(in), d.back(), Eigen::Map<const Matrix>(data.data(), rows, cols)});
            }
        }
        m.layers.push_back(std::move(layer));
    }
    m.top = read_tensor(is);
    try {
        validate_mera(m);
    } catch (const ShapeError& e) {
        throw FormatError(std::string("MRMA: ") + e.what());
    }
    return m;
}

inline void save_mera(const std::string& path, const Mera& m) {
    auto os = open_out(path);
    write_mera(os, m);
    if (!os) throw FormatError("write failed: " + path);
}

inline Mera load_mera(const std::string& path) {
    auto is = open_in(path);
    return read_mera(is);
}

} // namespace io

} // namespace ttmera
