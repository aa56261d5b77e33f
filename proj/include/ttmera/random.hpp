#pragma once

// Reproducible random generation. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard; independent streams are derived from a
// (seed, stream id) pair through splitmix64 so that every constituent of an
// experiment (each isometry, disentangler, top tensor ...) draws from its own
// stream. Normal deviates use Box-Muller because std::normal_distribution is
// not portable across standard libraries.

#include "ttmera/matrix_kernels.hpp"
#include "ttmera/tensor.hpp"
#include "ttmera/tensor_train.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace ttmera {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) : engine_(splitmix64(seed ^ splitmix64(stream))) {}

    // Derived generator for a named sub-stream.
    Rng split(std::uint64_t stream) { return Rng(engine_(), stream); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    std::uint64_t next_u64() { return engine_(); }

    std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
    return m;
}

// rows x cols matrix with orthonormal columns (rows >= cols), QR of a Gaussian matrix.
inline Matrix random_orthonormal(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    if (cols > rows) throw ArgumentError("random_orthonormal: more columns than rows");
    return qr_thin(random_matrix(rng, rows, cols)).q;
}

inline Matrix random_orthogonal(Rng& rng, Eigen::Index n) { return random_orthonormal(rng, n, n); }

inline DenseTensor random_tensor(Rng& rng, Dims dims) {
    std::vector<double> data(product(dims));
    for (auto& v : data) v = rng.normal();
    return {std::move(dims), std::move(data)};
}

// Random train with the given interior ranks (ranks.size() == dims.size() - 1).
inline TensorTrain random_tt(Rng& rng, const Dims& dims, const std::vector<std::size_t>& interior_ranks) {
    if (interior_ranks.size() + 1 != dims.size()) throw ArgumentError("random_tt: need D-1 interior ranks");
    std::vector<DenseTensor> cores;
    for (std::size_t d = 0; d < dims.size(); ++d) {
        const std::size_t r0 = d == 0 ? 1 : interior_ranks[d - 1];
        const std::size_t r1 = d + 1 == dims.size() ? 1 : interior_ranks[d];
        cores.push_back(random_tensor(rng, Dims{r0, dims[d], r1}));
    }
    return TensorTrain(std::move(cores));
}

} // namespace ttmera
