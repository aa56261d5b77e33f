#pragma once

// Compression of a dense tensor by ST-HOSVD, TT-SVD and TT-SVD followed by
// the TT-to-Tucker conversion, optionally after splitting every dimension into
// its prime factors.

#include "ttmera/errors.hpp"
#include "ttmera/tensor.hpp"
#include "ttmera/tensor_train.hpp"
#include "ttmera/tucker.hpp"

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace ttmera::experiments {

enum class CompressMethod { sthosvd, tt, tt_tucker };

inline std::string method_name(CompressMethod m) {
    switch (m) {
        case CompressMethod::sthosvd: return "sthosvd";
        case CompressMethod::tt: return "tt";
        case CompressMethod::tt_tucker: return "tt-tucker";
    }
    return "?";
}

inline CompressMethod parse_method(const std::string& s) {
    if (s == "sthosvd") return CompressMethod::sthosvd;
    if (s == "tt") return CompressMethod::tt;
    if (s == "tt-tucker") return CompressMethod::tt_tucker;
    throw ConfigError("unknown compression method '" + s + "' (expected sthosvd, tt or tt-tucker)");
}

struct CompressionReport {
    std::string method;
    std::size_t order = 0;          // number of modes compressed
    double elapsed_seconds = 0.0;   // tt-tucker: the conversion only
    double relative_error = 0.0;
    std::size_t storage_count = 0;
    double compression_ratio = 0.0;
    std::vector<std::size_t> ranks; // TT ranks (interior) or multilinear ranks
    std::vector<std::size_t> multilinear_ranks;  // tt-tucker only
};

inline std::vector<std::size_t> prime_factors(std::size_t n) {
    if (n == 0) throw ArgumentError("prime_factors: zero");
    std::vector<std::size_t> f;
    for (std::size_t p = 2; p * p <= n; ++p) {
        while (n % p == 0) {
            f.push_back(p);
            n /= p;
        }
    }
    if (n > 1 || f.empty()) f.push_back(n);
    return f;
}

// Every dimension replaced by its prime factors, smallest first, in mode order.
inline Dims factorized_dims(const Dims& dims) {
    Dims out;
    for (std::size_t d : dims) {
        const auto f = prime_factors(d);
        out.insert(out.end(), f.begin(), f.end());
    }
    return out;
}

namespace detail {

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

private:
    std::chrono::steady_clock::time_point start_;
};

inline std::vector<std::size_t> interior(const std::vector<std::size_t>& r) {
    return r.size() <= 2 ? std::vector<std::size_t>{} : std::vector<std::size_t>(r.begin() + 1, r.end() - 1);
}

} // namespace detail

struct CompressOptions {
    double epsilon = 1e-3;
    std::vector<CompressMethod> methods{CompressMethod::sthosvd, CompressMethod::tt, CompressMethod::tt_tucker};
    bool factorize = false;
    bool ascending_modes = false;  // permute modes into ascending dimension order first
};

// The tt-tucker method reuses the TT of the tt method and spends what is left
// of the error budget, eps ||A|| minus the measured TT error, on the
// conversion (per-mode tolerance remaining / sqrt(D)).
inline std::vector<CompressionReport> run_compress(const DenseTensor& input, const CompressOptions& opts) {
    if (!(opts.epsilon >= 0.0)) throw ConfigError("compress: epsilon must be nonnegative");
    if (opts.methods.empty()) throw ConfigError("compress: no method selected");
    std::optional<DenseTensor> reshaped;
    if (opts.factorize) reshaped = reshape(input, factorized_dims(input.dims()));
    if (opts.ascending_modes) {
        const DenseTensor& src = reshaped ? *reshaped : input;
        reshaped = permute(src, ascending_mode_order(src.dims()));
    }
    const DenseTensor& t = reshaped ? *reshaped : input;
    const double norm = frobenius_norm(t);
    const std::size_t entries = t.size();
    std::vector<CompressionReport> out;

    std::optional<TensorTrain> tt;
    double tt_seconds = 0.0, tt_error = 0.0;
    auto ensure_tt = [&] {
        if (tt) return;
        detail::Stopwatch sw;
        tt = tt_svd(t, opts.epsilon);
        tt_seconds = sw.seconds();
        tt_error = dense_tt_relative_error(t, *tt);
    };

    for (CompressMethod m : opts.methods) {
        CompressionReport r;
        r.method = method_name(m);
        r.order = t.order();
        if (m == CompressMethod::sthosvd) {
            detail::Stopwatch sw;
            const DenseTucker h = sthosvd_dense(t, opts.epsilon);
            r.elapsed_seconds = sw.seconds();
            // sequential truncation: ||t - t_hat||^2 is the sum of the discarded energies
            double discarded = 0.0;
            for (double e : h.mode_discarded) discarded += e;
            r.relative_error = norm > 0 ? std::sqrt(discarded) / norm : 0.0;
            r.storage_count = h.storage();
            r.ranks = h.multilinear_rank();
        } else if (m == CompressMethod::tt) {
            ensure_tt();
            r.elapsed_seconds = tt_seconds;
            r.relative_error = tt_error;
            r.storage_count = tt->storage();
            r.ranks = detail::interior(tt->ranks());
        } else {
            ensure_tt();
            const double remaining = std::max(0.0, opts.epsilon * norm - tt_error * norm);
            const double delta = remaining / std::sqrt(static_cast<double>(t.order()));
            detail::Stopwatch sw;
            const TuckerTT tucker = tt_to_hosvd_delta(*tt, delta);
            r.elapsed_seconds = sw.seconds();
            r.relative_error = dense_tt_relative_error(t, tucker_reconstruct_tt(tucker));
            r.storage_count = tucker.storage();
            r.ranks = detail::interior(tucker.core.ranks());
            r.multilinear_ranks = tucker.multilinear_rank;
        }
        r.compression_ratio = compression_ratio(entries, r.storage_count);
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace ttmera::experiments
