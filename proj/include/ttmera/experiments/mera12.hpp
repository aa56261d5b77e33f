#pragma once

// A random 2-layer MERA (K = 2) is contracted into a TT, then converted back
// with MERACLE using HOSVD disentanglers and Procrustes disentanglers.

#include "ttmera/experiments/compress.hpp"
#include "ttmera/mera.hpp"

#include <optional>
#include <vector>

namespace ttmera::experiments {

struct Mera12Config {
    std::size_t order = 12;
    std::size_t i = 4;
    std::size_t s = 2;
    std::size_t k = 2;
    std::size_t layers = 2;
    std::uint64_t seed = 1;
    double epsilon = 1e-10;
    DisentanglerOptions disentangler;
    bool run_hosvd_unforced = true;  // exponential in the layer count; desk only
    bool run_procrustes = true;

    static Mera12Config desk() { return {}; }
    static Mera12Config paper() {
        Mera12Config c;
        c.i = 10;
        c.s = 5;
        c.epsilon = 1e-12;
        c.disentangler.gap_threshold = 1e13;
        c.run_hosvd_unforced = false;
        return c;
    }
};

// Bond rank across disentangler pair j (1-based) of a layer with m isometry
// groups, once that disentangler has been undone: S^min(j, m-j), capped at S^2.
inline std::size_t planted_target_rank(std::size_t s, std::size_t groups, std::size_t j) {
    const std::size_t e = std::min(j, groups - j);
    std::size_t r = 1;
    for (std::size_t q = 0; q < e && r < s * s; ++q) r *= s;
    return std::min(r, s * s);
}

inline std::vector<std::vector<std::size_t>> planted_target_ranks(const Mera12Config& c) {
    std::vector<std::vector<std::size_t>> out;
    std::size_t n = c.order;
    for (std::size_t l = 0; l < c.layers; ++l) {
        const std::size_t groups = n / c.k;
        std::vector<std::size_t> layer;
        for (std::size_t j = 1; j < groups; ++j) layer.push_back(planted_target_rank(c.s, groups, j));
        out.push_back(std::move(layer));
        n = groups;
    }
    return out;
}

struct MeraRun {
    std::string label;
    double elapsed_seconds = 0.0;
    double relative_error = 0.0;
    double error_bound = 0.0;  // relative
    std::size_t storage = 0;
    std::vector<std::vector<std::size_t>> output_dims;  // per layer
    std::vector<DisentanglerReport> reports;
    Mera mera;
};

struct Mera12Result {
    std::vector<std::size_t> tt_ranks;
    std::size_t tt_storage = 0;
    std::size_t mera_storage_planted = 0;
    std::size_t entries = 0;     // I^order
    double storage_ratio = 0.0;  // TT / MERA
    std::vector<MeraRun> runs;   // hosvd-forced, [hosvd], [procrustes]
    Mera plant;
};

inline Mera12Result run_mera12(const Mera12Config& c) {
    if (c.k != 2) throw ConfigError("mera12: only K = 2 is supported");
    if (c.order % 4 != 0 || c.layers != 2) throw ConfigError("mera12: the experiment uses 2 layers and order divisible by 4");
    Mera12Result res;
    res.plant = random_mera(c.seed, c.order, c.i, c.s, c.k, c.layers);
    const TensorTrain tt = mera_to_tt(res.plant, 1e-12);
    res.tt_ranks = detail::interior(tt.ranks());
    res.tt_storage = tt.storage();
    res.mera_storage_planted = mera_storage(res.plant);
    res.entries = 1;
    for (std::size_t d = 0; d < c.order; ++d) res.entries *= c.i;
    res.storage_ratio = static_cast<double>(res.tt_storage) / static_cast<double>(res.mera_storage_planted);
    const double norm = tt_norm(tt);

    auto run = [&](std::string label, const MeracleOptions& opts) {
        MeraRun r;
        r.label = std::move(label);
        detail::Stopwatch sw;
        MeracleResult m = meracle(tt, opts);
        r.elapsed_seconds = sw.seconds();
        r.relative_error = mera_relative_error(m.mera, tt);
        r.error_bound = m.error_bound / norm;
        r.storage = mera_storage(m.mera);
        for (const auto& layer : m.mera.layers) {
            std::vector<std::size_t> dims;
            for (const auto& [p, w] : layer.isometries) dims.push_back(w.output_dim);
            r.output_dims.push_back(std::move(dims));
        }
        r.reports = std::move(m.reports);
        r.mera = std::move(m.mera);
        res.runs.push_back(std::move(r));
    };

    MeracleOptions base;
    base.arity = c.k;
    base.layers = c.layers;
    base.epsilon = c.epsilon;
    base.disentangler = c.disentangler;

    MeracleOptions forced = base;
    forced.forced_output_dim = c.s;
    run("hosvd-forced", forced);
    if (c.run_hosvd_unforced) run("hosvd", base);
    if (c.run_procrustes) {
        MeracleOptions p = base;
        p.strategy = DisentanglerStrategy::procrustes;
        p.target_ranks = planted_target_ranks(c);
        run("procrustes", p);
    }
    return res;
}

} // namespace ttmera::experiments
