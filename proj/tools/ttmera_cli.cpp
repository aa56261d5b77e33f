// ttmera: command-line driver for the compression and MERA experiments.

#include "ttmera/binary_io.hpp"
#include "ttmera/errors.hpp"
#include "ttmera/experiments/compress.hpp"
#include "ttmera/experiments/heat.hpp"
#include "ttmera/experiments/mera12.hpp"
#include "ttmera/experiments/pgm.hpp"
#include "ttmera/experiments/planted.hpp"
#include "ttmera/experiments/reports.hpp"
#include "ttmera/experiments/scans.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace ttmera;
using namespace ttmera::experiments;

namespace {

enum Exit { ok = 0, config = 2, capacity = 3, numeric = 4 };

struct Common {
    std::uint64_t seed = 1;
    std::optional<double> eps;
    std::string out = ".";
    std::size_t threads = 1;
    bool paper_scale = false;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--seed", c.seed, "random seed");
    app->add_option("--eps", c.eps, "relative accuracy");
    app->add_option("--out", c.out, "output directory");
    app->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
    app->add_flag("--paper-scale", c.paper_scale, "use the full-size configuration");
}

fs::path out_dir(const Common& c) {
    fs::path p(c.out);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw ConfigError("cannot create output directory " + c.out + ": " + ec.message());
    return p;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    auto os = open_report(path.string());
    os << j.dump(2) << '\n';
}

template <typename F>
void write_csv(const fs::path& path, F&& f) {
    auto os = open_report(path.string());
    f(os);
}

HeatConfig heat_config(const Common& c) {
    if (c.paper_scale) {
        std::cerr << "warning: paper scale heat tensor is 100 x 100 x 10000 (800 MB dense)\n";
        return HeatConfig::paper();
    }
    return HeatConfig::desk();
}

// -- subcommands --------------------------------------------------------------

struct HeatArgs {
    Common c;
    std::optional<double> ds, dt, t_end;
};

int cmd_heat(const HeatArgs& a) {
    HeatConfig cfg = heat_config(a.c);
    if (a.ds) cfg.ds = *a.ds;
    if (a.dt) cfg.dt = *a.dt;
    if (a.t_end) cfg.t_end = *a.t_end;
    const DenseTensor t = run_heat2d(cfg);
    const fs::path path = out_dir(a.c) / "heat.mrt";
    io::save_tensor(path.string(), t);
    std::cout << "heat2d " << dims_to_string(t.dims()) << " -> " << path.string() << '\n';
    return ok;
}

struct CompressArgs {
    Common c;
    std::vector<std::string> methods;
    bool factorize = false;
    bool ascending = false;
    std::string input;
};

int cmd_compress(const CompressArgs& a) {
    CompressOptions opts;
    opts.epsilon = a.c.eps.value_or(1e-3);
    opts.ascending_modes = a.ascending;
    if (!a.methods.empty()) {
        opts.methods.clear();
        for (const auto& m : a.methods) opts.methods.push_back(parse_method(m));
    }
    DenseTensor t = a.input.empty() ? run_heat2d(heat_config(a.c)) : io::load_tensor(a.input);
    if (a.factorize) t = reshape(std::move(t), factorized_dims(t.dims()));
    const auto rows = run_compress(t, opts);
    const fs::path dir = out_dir(a.c);
    write_csv(dir / "compress.csv", [&](std::ostream& os) { csv::compression(os, rows); });
    write_json(dir / "compress.json", json::compression(rows));
    for (const auto& r : rows) {
        std::cout << r.method << " order " << r.order << ": error " << r.relative_error << ", ratio "
                  << r.compression_ratio << ", " << r.elapsed_seconds << " s\n";
    }
    return ok;
}

struct PlantedArgs {
    Common c;
    std::optional<std::size_t> i, rprime;
    std::string image;
    std::optional<double> gap;
    std::optional<std::size_t> max_iters;
    std::size_t trace_every = 100;
    bool hold_target = false;
};

int cmd_planted(const PlantedArgs& a) {
    PlantedConfig cfg;
    cfg.i = a.i.value_or(a.c.paper_scale ? 19 : 8);
    cfg.rprime = a.rprime.value_or(a.c.paper_scale ? 128 : 32);
    cfg.seed = a.c.seed;
    if (!a.image.empty()) cfg.image = pgm::load(a.image);
    if (a.gap) cfg.disentangler.gap_threshold = *a.gap;
    if (a.max_iters) cfg.disentangler.max_iters = *a.max_iters;
    cfg.disentangler.trace_every = a.trace_every;
    cfg.disentangler.hold_target_fixed = a.hold_target;
    const PlantedResult r = run_planted(cfg);
    const fs::path dir = out_dir(a.c);
    write_csv(dir / "planted_sigma.csv", [&](std::ostream& os) { csv::singular_value_decay(os, r); });
    write_csv(dir / "planted_trace.csv", [&](std::ostream& os) { csv::singular_value_trace(os, r.procrustes); });
    write_json(dir / "planted.json", json::planted(cfg, r));
    pgm::save_autoscaled((dir / "planted_b.pgm").string(), r.image_b);
    pgm::save_autoscaled((dir / "planted_c.pgm").string(), r.image_c);
    pgm::save_autoscaled((dir / "planted_recovered.pgm").string(), r.image_recovered);
    std::cout << "TT ranks " << join(r.tt_ranks, ',') << "; procrustes " << (r.procrustes.converged ? "converged" : "did not converge")
              << " after " << r.procrustes.iterations << " iterations (gap " << r.procrustes.final_gap << ")\n"
              << "rank after procrustes " << r.rank_procrustes << ", after hosvd " << r.rank_hosvd << "; isometry loss "
              << r.isometry_loss << '\n';
    return ok;
}

struct ScanArgs {
    Common c;
    std::vector<std::size_t> dims;
    std::optional<std::size_t> i;
    std::optional<double> gap;
    std::optional<std::size_t> max_iters;
    std::size_t seeds = 3;
    std::size_t min_rprime = 2;
};

ScanSettings scan_settings(const ScanArgs& a) {
    ScanSettings s;
    s.seed = a.c.seed;
    s.threads = a.c.threads;
    s.seeds = a.seeds;
    if (a.gap) s.gap_threshold = *a.gap;
    if (a.max_iters) s.max_iters = *a.max_iters;
    if (s.seeds == 0) throw ConfigError("--seeds must be positive");
    return s;
}

int cmd_rmin(const ScanArgs& a) {
    std::vector<std::size_t> dims = a.dims;
    if (dims.empty()) dims = a.c.paper_scale ? std::vector<std::size_t>{2, 3, 4, 5, 6, 7, 8} : std::vector<std::size_t>{2, 3, 4, 5};
    const auto rows = run_rmin_scan(dims, scan_settings(a));
    std::vector<ConvergenceRun> runs;
    for (const auto& r : rows) runs.insert(runs.end(), r.runs.begin(), r.runs.end());
    const fs::path dir = out_dir(a.c);
    write_csv(dir / "rmin.csv", [&](std::ostream& os) { csv::rmin_table(os, rows); });
    write_csv(dir / "rmin_runs.csv", [&](std::ostream& os) { csv::convergence_runs(os, runs); });
    for (const auto& r : rows) std::cout << "I = " << r.i << ": R'_min = " << r.rmin << '\n';
    return ok;
}

int cmd_iters(const ScanArgs& a) {
    const std::size_t i = a.i.value_or(a.c.paper_scale ? 8 : 4);
    const auto rows = run_iters_vs_rank(i, scan_settings(a), a.min_rprime);
    std::vector<ConvergenceRun> runs;
    for (const auto& r : rows) runs.insert(runs.end(), r.runs.begin(), r.runs.end());
    const fs::path dir = out_dir(a.c);
    write_csv(dir / "iters.csv", [&](std::ostream& os) { csv::iterations(os, rows); });
    write_csv(dir / "iters_runs.csv", [&](std::ostream& os) { csv::convergence_runs(os, runs); });
    for (const auto& r : rows)
        std::cout << "R' = " << r.rprime << ": median " << r.median_iterations << " iterations"
                  << (r.majority_converged ? "" : " (no majority convergence)") << '\n';
    return ok;
}

struct Mera12Args {
    Common c;
    std::optional<double> gap;
    std::optional<std::size_t> max_iters;
    bool skip_procrustes = false;
};

int cmd_mera12(const Mera12Args& a) {
    Mera12Config cfg = a.c.paper_scale ? Mera12Config::paper() : Mera12Config::desk();
    cfg.seed = a.c.seed;
    if (a.c.eps) cfg.epsilon = *a.c.eps;
    if (a.gap) cfg.disentangler.gap_threshold = *a.gap;
    if (a.max_iters) cfg.disentangler.max_iters = *a.max_iters;
    cfg.run_procrustes = !a.skip_procrustes;
    const Mera12Result res = run_mera12(cfg);
    const fs::path dir = out_dir(a.c);
    write_csv(dir / "mera12.csv", [&](std::ostream& os) { csv::mera_runs(os, res); });
    write_json(dir / "mera12.json", json::mera12(cfg, res));
    io::save_mera((dir / "mera12_plant.mrma").string(), res.plant);
    for (const auto& r : res.runs) io::save_mera((dir / ("mera12_" + r.label + ".mrma")).string(), r.mera);
    std::cout << "TT ranks " << join(res.tt_ranks, ',') << "; TT storage " << res.tt_storage << ", MERA storage "
              << res.mera_storage_planted << " (ratio " << res.storage_ratio << ")\n";
    for (const auto& r : res.runs)
        std::cout << r.label << ": error " << r.relative_error << " (bound " << r.error_bound << "), storage " << r.storage
                  << ", " << r.elapsed_seconds << " s\n";
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tensor train, Tucker and MERA compression experiments"};
    app.require_subcommand(1);

    HeatArgs heat;
    auto* h = app.add_subcommand("heat2d", "simulate the 2D heat equation and save the snapshot tensor");
    add_common(h, heat.c);
    h->add_option("--ds", heat.ds, "grid spacing");
    h->add_option("--dt", heat.dt, "time step");
    h->add_option("--t-end", heat.t_end, "simulated time");

    CompressArgs comp;
    auto* c = app.add_subcommand("compress", "compress a tensor with ST-HOSVD, TT-SVD and TT-Tucker");
    add_common(c, comp.c);
    c->add_option("--method", comp.methods, "sthosvd, tt or tt-tucker (repeatable)")->take_all();
    c->add_flag("--factorize", comp.factorize, "split every dimension into its prime factors");
    c->add_flag("--ascending", comp.ascending, "permute the modes into ascending dimension order first");
    c->add_option("input", comp.input, "MRT1 tensor file (default: generated heat tensor)");

    PlantedArgs pl;
    auto* p = app.add_subcommand("planted", "recover a planted disentangler");
    add_common(p, pl.c);
    p->add_option("--I", pl.i, "index dimension");
    p->add_option("--rprime", pl.rprime, "isometry output dimension R'");
    p->add_option("--image", pl.image, "PGM image used as the top matrix")->check(CLI::ExistingFile);
    p->add_option("--gap", pl.gap, "rank-gap stopping threshold");
    p->add_option("--max-iters", pl.max_iters, "iteration budget");
    p->add_option("--trace-every", pl.trace_every, "singular value trace sampling (0: off)");
    p->add_flag("--hold-target", pl.hold_target, "keep the first rank-R' target for all iterations");

    ScanArgs rs;
    auto* r = app.add_subcommand("rmin-scan", "smallest converging R' per index dimension");
    add_common(r, rs.c);
    r->add_option("--I", rs.dims, "index dimensions")->delimiter(',');
    r->add_option("--gap", rs.gap, "rank-gap stopping threshold");
    r->add_option("--max-iters", rs.max_iters, "iteration budget");
    r->add_option("--seeds", rs.seeds, "seeds per point (majority vote)");

    ScanArgs it;
    auto* iv = app.add_subcommand("iters-vs-rank", "iteration count as a function of R'");
    add_common(iv, it.c);
    iv->add_option("--I", it.i, "index dimension");
    iv->add_option("--gap", it.gap, "rank-gap stopping threshold");
    iv->add_option("--max-iters", it.max_iters, "iteration budget");
    iv->add_option("--seeds", it.seeds, "seeds per point");
    iv->add_option("--min-rprime", it.min_rprime, "smallest R' to try");

    Mera12Args m12;
    auto* m = app.add_subcommand("mera12", "12-way MERA versus TT storage and MERACLE recovery");
    add_common(m, m12.c);
    m->add_option("--gap", m12.gap, "rank-gap stopping threshold");
    m->add_option("--max-iters", m12.max_iters, "iteration budget");
    m->add_flag("--skip-procrustes", m12.skip_procrustes, "only run the HOSVD strategy");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return config;
    }

    try {
        if (*h) return cmd_heat(heat);
        if (*c) return cmd_compress(comp);
        if (*p) return cmd_planted(pl);
        if (*r) return cmd_rmin(rs);
        if (*iv) return cmd_iters(it);
        if (*m) return cmd_mera12(m12);
    } catch (const CapacityError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return capacity;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return numeric;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return config;
    } catch (const std::bad_alloc&) {
        std::cerr << "error: out of memory\n";
        return capacity;
    }
    return ok;
}
