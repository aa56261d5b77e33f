#include "test_support.hpp"

#include "ttmera/binary_io.hpp"
#include "ttmera/experiments/compress.hpp"
#include "ttmera/experiments/heat.hpp"
#include "ttmera/experiments/mera12.hpp"
#include "ttmera/experiments/planted.hpp"
#include "ttmera/experiments/reports.hpp"
#include "ttmera/experiments/scans.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ttmera;
using namespace ttmera::experiments;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("ttmera_test_" + name);
    std::filesystem::create_directories(p);
    return p;
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    for (std::string l; std::getline(is, l);) out.push_back(l);
    return out;
}

// Small heat tensor: 10 x 10 grid, 40 snapshots.
DenseTensor small_heat() { return run_heat2d({0.1, 0.0025, 0.1}); }

} // namespace

// -- heat ----------------------------------------------------------------------

TEST(Heat, GridAndSnapshotCounts) {
    EXPECT_EQ(heat_grid_points(HeatConfig::desk()), 50u);
    EXPECT_EQ(heat_snapshots(HeatConfig::desk()), 2500u);
    EXPECT_EQ(heat_grid_points(HeatConfig::paper()), 100u);
    EXPECT_EQ(heat_snapshots(HeatConfig::paper()), 10000u);
    const auto t = small_heat();
    EXPECT_EQ(t.dims(), (Dims{10, 10, 40}));
}

TEST(Heat, FirstSnapshotIsOneStepAfterInitialField) {
    const auto t = small_heat();
    const double h = 1.0 / 9.0, r = 0.0025 / (h * h);
    auto f = [&](std::size_t i, std::size_t j) { return heat_boundary(i * h, j * h); };
    for (std::size_t j = 0; j < 10; ++j)
        for (std::size_t i = 0; i < 10; ++i) {
            const bool edge = i == 0 || j == 0 || i == 9 || j == 9;
            const double want =
                edge ? f(i, j) : f(i, j) + r * (f(i - 1, j) + f(i + 1, j) + f(i, j - 1) + f(i, j + 1) - 4 * f(i, j));
            EXPECT_NEAR(t[i + 10 * j], want, 1e-15);
        }
}

TEST(Heat, BoundaryHeldFixed) {
    const auto t = small_heat();
    for (std::size_t k = 0; k < 40; ++k)
        for (std::size_t a = 0; a < 10; ++a) {
            EXPECT_EQ(t[a + 100 * k], t[a]);
            EXPECT_EQ(t[a + 10 * 9 + 100 * k], t[a + 90]);
            EXPECT_EQ(t[10 * a + 100 * k], t[10 * a]);
            EXPECT_EQ(t[9 + 10 * a + 100 * k], t[9 + 10 * a]);
        }
}

TEST(Heat, ConstantFieldIsStationary) {
    const Matrix u = Matrix::Constant(6, 6, 0.3);
    const auto t = heat_evolve(u, 0.25, 5);
    for (std::size_t k = 0; k < t.size(); ++k) EXPECT_DOUBLE_EQ(t[k], 0.3);
}

TEST(Heat, OneStepHotNode) {
    Matrix u = Matrix::Zero(5, 5);
    u(2, 2) = 1.0;
    const auto t = heat_evolve(u, 0.2, 2);
    // u1 = u0 + r (sum of neighbours - 4 u0)
    EXPECT_NEAR(t[2 + 5 * 2], 1.0 - 0.8, 1e-15);
    for (auto [i, j] : {std::pair{1, 2}, {3, 2}, {2, 1}, {2, 3}}) EXPECT_NEAR(t[i + 5 * j], 0.2, 1e-15);
    EXPECT_EQ(t[1 + 5 * 1], 0.0);
    EXPECT_EQ(t[0 + 5 * 2], 0.0);
    // u2 at a diagonal neighbour: 0.2 * (0.2 + 0.2)
    EXPECT_NEAR(t[1 + 5 * 1 + 25], 0.08, 1e-15);
}

TEST(Heat, StabilityBoundEnforced) {
    EXPECT_THROW(run_heat2d({0.1, 0.0026, 0.1}), ConfigError);
    EXPECT_NO_THROW(validate(HeatConfig{0.1, 0.0025, 0.1}));
    EXPECT_THROW(validate(HeatConfig{0.5, 0.01, 0.1}), ConfigError);
    EXPECT_THROW(validate(HeatConfig{0.1, 0.0025, 0.0}), ConfigError);
}

TEST(Heat, DiscreteMaximumPrinciple) {
    const auto t = run_heat2d(HeatConfig::desk());
    const Matrix init = heat_initial(50);
    const double lo = init.minCoeff(), hi = init.maxCoeff();
    const auto d = t.data();
    EXPECT_GE(*std::min_element(d.begin(), d.end()), lo - 1e-15);
    EXPECT_LE(*std::max_element(d.begin(), d.end()), hi + 1e-15);
}

// -- compress ------------------------------------------------------------------

TEST(Compress, PrimeFactors) {
    EXPECT_EQ(prime_factors(1), (std::vector<std::size_t>{1}));
    EXPECT_EQ(prime_factors(2), (std::vector<std::size_t>{2}));
    EXPECT_EQ(prime_factors(10000), (std::vector<std::size_t>{2, 2, 2, 2, 5, 5, 5, 5}));
    EXPECT_EQ(prime_factors(97), (std::vector<std::size_t>{97}));
    EXPECT_EQ(prime_factors(84), (std::vector<std::size_t>{2, 2, 3, 7}));
    Rng rng(5);
    for (int k = 0; k < 200; ++k) {
        const std::size_t n = 1 + rng.below(100000);
        std::size_t prod = 1;
        for (auto p : prime_factors(n)) prod *= p;
        EXPECT_EQ(prod, n);
    }
}

TEST(Compress, FactorizedOrders) {
    EXPECT_EQ(factorized_dims({100, 100, 10000}).size(), 16u);
    EXPECT_EQ(factorized_dims({50, 50, 2500}).size(), 12u);
    EXPECT_EQ(factorized_dims({6, 7}), (Dims{2, 3, 7}));
}

TEST(Compress, ZeroToleranceIsExact) {
    Rng rng(9);
    const auto t = random_tensor(rng, Dims{3, 4, 2});
    CompressOptions o;
    o.epsilon = 0.0;
    for (const auto& r : run_compress(t, o)) {
        EXPECT_LE(r.relative_error, 1e-13) << r.method;
        EXPECT_EQ(r.order, 3u);
    }
}

TEST(Compress, ErrorWithinToleranceAllMethods) {
    const auto t = small_heat();
    for (bool factorize : {false, true}) {
        for (double eps : {1e-2, 1e-3, 1e-5}) {
            CompressOptions o;
            o.epsilon = eps;
            o.factorize = factorize;
            const auto rows = run_compress(t, o);
            ASSERT_EQ(rows.size(), 3u);
            for (const auto& r : rows) {
                EXPECT_LE(r.relative_error, eps * (1 + 1e-10)) << r.method;
                EXPECT_EQ(r.order, factorize ? 8u : 3u);
                EXPECT_DOUBLE_EQ(r.compression_ratio, static_cast<double>(t.size()) / r.storage_count);
            }
            EXPECT_EQ(rows[2].multilinear_ranks.size(), rows[2].order);
        }
    }
}

TEST(Compress, SthosvdErrorMatchesDenseReconstruction) {
    const auto t = small_heat();
    CompressOptions o;
    o.methods = {CompressMethod::sthosvd};
    const auto r = run_compress(t, o).front();
    const auto h = sthosvd_dense(t, 1e-3);
    EXPECT_NEAR(r.relative_error, relative_error(t, h.reconstruct()), 1e-9);
}

TEST(Compress, AscendingModeOrderPrePass) {
    const auto t = permute(small_heat(), {3, 1, 2});  // 40 x 10 x 10
    CompressOptions o;
    o.ascending_modes = true;
    const auto rows = run_compress(t, o);
    for (const auto& r : rows) EXPECT_LE(r.relative_error, 1e-3) << r.method;
    o.ascending_modes = false;
    o.methods = {CompressMethod::sthosvd};
    const auto plain = run_compress(permute(t, {2, 3, 1}), o).front();
    EXPECT_EQ(rows[0].ranks, plain.ranks);
    EXPECT_EQ(rows[0].storage_count, plain.storage_count);
}

TEST(Compress, MethodErrors) {
    EXPECT_THROW(parse_method("cp"), ConfigError);
    EXPECT_EQ(parse_method("tt-tucker"), CompressMethod::tt_tucker);
    CompressOptions o;
    o.methods.clear();
    EXPECT_THROW(run_compress(small_heat(), o), ConfigError);
    o = {};
    o.epsilon = -1.0;
    EXPECT_THROW(run_compress(small_heat(), o), ConfigError);
}

// -- planted -------------------------------------------------------------------

TEST(Planted, PaperScaleTtRanks) {
    PlantedConfig c;
    const auto s = build_planted(c);
    EXPECT_EQ(s.tt.ranks(), (std::vector<std::size_t>{1, 19, 361, 19, 1}));
    EXPECT_LE(ttmera::testing::orthonormality_defect(s.isometry), 1e-12);
    EXPECT_LE(ttmera::testing::orthonormality_defect(s.disentangler), 1e-12);
}

TEST(Planted, ImageTopMatrixIsResized) {
    PlantedConfig c;
    c.i = 3;
    c.rprime = 4;
    c.image = Matrix::Constant(10, 7, 0.5);
    const auto s = build_planted(c);
    EXPECT_EQ(s.top.rows(), 4);
    EXPECT_EQ(s.top.cols(), 4);
    EXPECT_NEAR((s.top.array() - 0.5).abs().maxCoeff(), 0.0, 1e-15);
}

TEST(Planted, RankOneAlwaysConverges) {
    for (std::size_t i : {2, 3, 4})
        for (std::uint64_t seed : {1, 2}) EXPECT_TRUE(planted_convergence(i, 1, seed, 1e12, 50'000).converged) << i;
}

TEST(Planted, RprimeAboveISquaredRejected) {
    PlantedConfig c;
    c.i = 3;
    c.rprime = 10;
    EXPECT_THROW(build_planted(c), ConfigError);
}

TEST(Planted, SmallRecovery) {
    PlantedConfig c;
    c.i = 3;
    c.rprime = 5;
    c.disentangler.gap_threshold = 1e13;
    const auto r = run_planted(c);
    ASSERT_TRUE(r.procrustes.converged);
    // the tail past R' collapses after the Procrustes disentangler only
    EXPECT_LE(r.sigma_procrustes(5) / r.sigma_procrustes(0), 1e-11);
    EXPECT_GE(r.sigma_hosvd(5) / r.sigma_hosvd(0), 1e-6);
    EXPECT_GT(r.rank_hosvd, 5u);
    EXPECT_LE(r.isometry_loss, 1e-9);
    EXPECT_EQ(r.image_recovered.rows(), 9);
}

// -- scans ---------------------------------------------------------------------

TEST(Scans, FullRankNeedsAtMostTwoIterations) {
    for (std::size_t i : {2, 3, 4}) {
        const auto r = planted_convergence(i, i * i, 1, 1e12, 50'000);
        EXPECT_TRUE(r.converged);
        EXPECT_LE(r.iterations, 2u);
    }
}

TEST(Scans, DeterministicAcrossThreadCounts) {
    ScanSettings s;
    s.max_iters = 3000;
    auto run = [&](std::size_t threads) {
        s.threads = threads;
        return run_iters_vs_rank(3, s, 6);
    };
    const auto a = run(1), b = run(3);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_EQ(a[k].rprime, b[k].rprime);
        EXPECT_EQ(a[k].median_iterations, b[k].median_iterations);
        for (std::size_t j = 0; j < a[k].runs.size(); ++j) {
            EXPECT_EQ(a[k].runs[j].iterations, b[k].runs[j].iterations);
            EXPECT_EQ(a[k].runs[j].final_gap, b[k].runs[j].final_gap);
        }
    }
    s.threads = 2;
    const auto r1 = run_rmin_scan({2, 3}, [&] { auto t = s; t.max_iters = 2; return t; }());
    s.threads = 1;
    const auto r2 = run_rmin_scan({2, 3}, [&] { auto t = s; t.max_iters = 2; return t; }());
    ASSERT_EQ(r1.size(), 2u);
    EXPECT_EQ(r1[0].rmin, r2[0].rmin);
    EXPECT_EQ(r1[1].rmin, r2[1].rmin);
}

TEST(Scans, RminStopsAtFirstFailure) {
    // with a budget of 2 iterations only R' = I^2 converges
    ScanSettings s;
    s.max_iters = 2;
    const auto row = rmin_for(3, s);
    EXPECT_EQ(row.rmin, 9u);
    ASSERT_FALSE(row.runs.empty());
    EXPECT_EQ(row.runs.back().rprime, 8u);
    EXPECT_THROW(rmin_for(1, s), ConfigError);
}

TEST(Scans, IterationsRowsDescend) {
    ScanSettings s;
    s.max_iters = 2000;
    const auto rows = run_iters_vs_rank(3, s, 5);
    ASSERT_FALSE(rows.empty());
    EXPECT_EQ(rows.front().rprime, 9u);
    EXPECT_LE(rows.front().median_iterations, 2u);
    for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_EQ(rows[k].rprime + 1, rows[k - 1].rprime);
}

TEST(Scans, ParallelMapRethrows) {
    std::vector<std::function<int()>> jobs{[] { return 1; }, []() -> int { throw ConfigError("x"); }, [] { return 3; }};
    EXPECT_THROW(parallel_map(jobs, 2), ConfigError);
    jobs.erase(jobs.begin() + 1);
    EXPECT_EQ(parallel_map(jobs, 4), (std::vector<int>{1, 3}));
}

// -- mera12 --------------------------------------------------------------------

TEST(Mera12, PlantedTargetRanks) {
    EXPECT_EQ(planted_target_ranks(Mera12Config::desk()),
              (std::vector<std::vector<std::size_t>>{{2, 4, 4, 4, 2}, {2, 2}}));
    EXPECT_EQ(planted_target_ranks(Mera12Config::paper()),
              (std::vector<std::vector<std::size_t>>{{5, 25, 25, 25, 5}, {5, 5}}));
}

TEST(Mera12, DeskStorageAndForcedHosvd) {
    Mera12Config c = Mera12Config::desk();
    c.run_hosvd_unforced = false;
    c.run_procrustes = false;
    const auto r = run_mera12(c);
    EXPECT_EQ(r.entries, 16'777'216u);
    // (4,16,8,32,16,64,16,32,8,16,4): I = 4, S = 2
    EXPECT_EQ(r.tt_ranks, (std::vector<std::size_t>{4, 16, 8, 32, 16, 64, 16, 32, 8, 16, 4}));
    std::size_t formula = 0;
    std::vector<std::size_t> full{1};
    full.insert(full.end(), r.tt_ranks.begin(), r.tt_ranks.end());
    full.push_back(1);
    for (std::size_t d = 0; d < 12; ++d) formula += full[d] * 4 * full[d + 1];
    EXPECT_EQ(r.tt_storage, formula);
    EXPECT_EQ(r.mera_storage_planted, mera_storage(r.plant));
    ASSERT_EQ(r.runs.size(), 1u);
    EXPECT_EQ(r.runs[0].label, "hosvd-forced");
    EXPECT_GE(r.runs[0].relative_error, 0.5);
    EXPECT_LE(r.runs[0].relative_error, 1.0 + 1e-12);
    for (const auto& layer : r.runs[0].output_dims)
        for (auto d : layer) EXPECT_LE(d, 2u);
}

TEST(Mera12, ConfigErrors) {
    Mera12Config c;
    c.k = 3;
    EXPECT_THROW(run_mera12(c), ConfigError);
    c = {};
    c.order = 10;
    EXPECT_THROW(run_mera12(c), ConfigError);
}

// -- reports and artifacts -----------------------------------------------------

TEST(Reports, CompressionCsvAndJson) {
    const auto rows = run_compress(small_heat(), {});
    std::ostringstream os;
    os << std::setprecision(17);
    csv::compression(os, rows);
    const auto ls = lines(os.str());
    ASSERT_EQ(ls.size(), 4u);
    EXPECT_EQ(ls[0], "method,order,elapsed_seconds,relative_error,storage_count,compression_ratio,ranks,multilinear_ranks");
    EXPECT_EQ(ls[1].substr(0, 8), "sthosvd,");
    const auto j = nlohmann::json::parse(json::compression(rows).dump());
    ASSERT_EQ(j.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_EQ(j[k]["method"], rows[k].method);
        EXPECT_EQ(j[k]["relative_error"].get<double>(), rows[k].relative_error);
        EXPECT_EQ(j[k]["storage_count"].get<std::size_t>(), rows[k].storage_count);
        EXPECT_EQ(j[k]["ranks"].get<std::vector<std::size_t>>(), rows[k].ranks);
    }
}

TEST(Reports, ScanCsvShapes) {
    ScanSettings s;
    s.max_iters = 2;
    const auto rows = run_rmin_scan({2, 3}, s);
    std::ostringstream a, b;
    csv::rmin_table(a, rows);
    EXPECT_EQ(a.str(), "I,rmin\n2,4\n3,9\n");
    csv::convergence_runs(b, rows[1].runs);
    const auto ls = lines(b.str());
    EXPECT_EQ(ls[0], "I,rprime,seed,converged,iterations,final_gap");
    EXPECT_EQ(ls.size(), rows[1].runs.size() + 1);
}

TEST(Reports, JoinLists) {
    EXPECT_EQ(join({}), "");
    EXPECT_EQ(join({3}), "3");
    EXPECT_EQ(join({1, 22, 3}), "1;22;3");
}

TEST(Artifacts, WriteReadWriteIsBitIdentical) {
    const auto dir = scratch_dir("artifacts");
    const auto heat = small_heat();
    io::save_tensor((dir / "a.mrt").string(), heat);
    io::save_tensor((dir / "b.mrt").string(), io::load_tensor((dir / "a.mrt").string()));
    EXPECT_EQ(slurp(dir / "a.mrt"), slurp(dir / "b.mrt"));
    EXPECT_EQ(io::load_tensor((dir / "b.mrt").string()), heat);

    const auto tt = tt_svd(heat, 1e-6);
    io::save_train((dir / "a.mrtt").string(), tt);
    io::save_train((dir / "b.mrtt").string(), io::load_train((dir / "a.mrtt").string()));
    EXPECT_EQ(slurp(dir / "a.mrtt"), slurp(dir / "b.mrtt"));

    const auto m = random_mera(3, 8, 3, 2, 2, 2);
    io::save_mera((dir / "a.mrma").string(), m);
    io::save_mera((dir / "b.mrma").string(), io::load_mera((dir / "a.mrma").string()));
    EXPECT_EQ(slurp(dir / "a.mrma"), slurp(dir / "b.mrma"));

    Matrix img(3, 5);
    for (Eigen::Index k = 0; k < img.size(); ++k) img.data()[k] = static_cast<double>(17 * k % 256) / 255.0;
    pgm::save((dir / "a.pgm").string(), img);
    pgm::save((dir / "b.pgm").string(), pgm::load((dir / "a.pgm").string()));
    EXPECT_EQ(slurp(dir / "a.pgm"), slurp(dir / "b.pgm"));
    EXPECT_NEAR((pgm::load((dir / "a.pgm").string()) - img).cwiseAbs().maxCoeff(), 0.0, 1e-15);
    std::filesystem::remove_all(dir);
}
