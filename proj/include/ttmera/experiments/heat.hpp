#pragma once

// 2D heat equation u_t = u_xx + u_yy on the unit square, explicit Euler with
// the 5-point stencil. The boundary is held at f(x, y) = 0.25 - |0.5-x||0.5-y|,
// which is also the initial field.
//
// Grid: n = round(1/ds) points per axis at x_i = i/(n-1). Snapshot k of the
// output is the state after k steps, k = 1 .. round(t_end/dt); the initial
// field itself is not stored.

#include "ttmera/errors.hpp"
#include "ttmera/tensor.hpp"

#include <cmath>
#include <vector>

namespace ttmera::experiments {

struct HeatConfig {
    double ds = 1e-2;
    double dt = 0.25e-4;
    double t_end = 0.25;

    static HeatConfig desk() { return {2e-2, 1e-4, 0.25}; }
    static HeatConfig paper() { return {}; }
};

inline double heat_boundary(double x, double y) { return 0.25 - std::abs(0.5 - x) * std::abs(0.5 - y); }

inline std::size_t heat_grid_points(const HeatConfig& cfg) { return static_cast<std::size_t>(std::lround(1.0 / cfg.ds)); }

inline std::size_t heat_snapshots(const HeatConfig& cfg) { return static_cast<std::size_t>(std::lround(cfg.t_end / cfg.dt)); }

inline void validate(const HeatConfig& cfg) {
    if (!(cfg.ds > 0.0) || !(cfg.dt > 0.0) || !(cfg.t_end > 0.0)) throw ConfigError("heat2d: ds, dt and t_end must be positive");
    if (cfg.dt > 0.25 * cfg.ds * cfg.ds * (1.0 + 1e-12)) {
        throw ConfigError("heat2d: dt = " + std::to_string(cfg.dt) + " violates the stability bound 0.25*ds^2 = " +
                          std::to_string(0.25 * cfg.ds * cfg.ds));
    }
    if (heat_grid_points(cfg) < 3) throw ConfigError("heat2d: grid needs at least 3 points per axis");
    if (heat_snapshots(cfg) < 1) throw ConfigError("heat2d: t_end shorter than one step");
}

// Initial field sampled on the grid (rows index x, columns index y).
inline Matrix heat_initial(std::size_t n) {
    Matrix u(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    const double h = 1.0 / static_cast<double>(n - 1);
    for (Eigen::Index j = 0; j < u.cols(); ++j)
        for (Eigen::Index i = 0; i < u.rows(); ++i) u(i, j) = heat_boundary(static_cast<double>(i) * h, static_cast<double>(j) * h);
    return u;
}

// One explicit Euler step with r = dt/h^2; boundary entries are copied.
inline void heat_step(const Matrix& u, Matrix& next, double r) {
    next = u;
    for (Eigen::Index j = 1; j + 1 < u.cols(); ++j)
        for (Eigen::Index i = 1; i + 1 < u.rows(); ++i)
            next(i, j) = u(i, j) + r * (u(i - 1, j) + u(i + 1, j) + u(i, j - 1) + u(i, j + 1) - 4.0 * u(i, j));
}

// n x n x snapshots tensor of the states u_1, u_2, ... of the iteration.
inline DenseTensor heat_evolve(const Matrix& initial, double r, std::size_t snapshots) {
    const std::size_t rows = static_cast<std::size_t>(initial.rows()), cols = static_cast<std::size_t>(initial.cols());
    check_capacity(rows * cols * snapshots, "heat2d");
    std::vector<double> data(rows * cols * snapshots);
    Matrix u = initial, next;
    const std::size_t slab = rows * cols;
    for (std::size_t k = 0; k < snapshots; ++k) {
        heat_step(u, next, r);
        u.swap(next);
        std::copy(u.data(), u.data() + slab, data.begin() + static_cast<std::ptrdiff_t>(k * slab));
    }
    return DenseTensor(Dims{rows, cols, snapshots}, std::move(data));
}

inline DenseTensor run_heat2d(const HeatConfig& cfg) {
    validate(cfg);
    const std::size_t n = heat_grid_points(cfg);
    const double h = 1.0 / static_cast<double>(n - 1);
    return heat_evolve(heat_initial(n), cfg.dt / (h * h), heat_snapshots(cfg));
}

} // namespace ttmera::experiments
