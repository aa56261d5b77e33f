#pragma once

// Convergence scans of the Procrustes disentangler on the planted single-layer
// MERA: the smallest converging target rank per index dimension, and the
// iteration count as a function of the target rank.

#include "ttmera/experiments/planted.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace ttmera::experiments {

// Runs jobs on up to `threads` workers; results are stored by job index, so
// the output does not depend on scheduling.
template <typename R>
std::vector<R> parallel_map(const std::vector<std::function<R()>>& jobs, std::size_t threads) {
    std::vector<R> out(jobs.size());
    const std::size_t workers = std::max<std::size_t>(1, std::min(threads, jobs.size()));
    if (workers == 1) {
        for (std::size_t j = 0; j < jobs.size(); ++j) out[j] = jobs[j]();
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t j = next++; j < jobs.size(); j = next++) {
                try {
                    out[j] = jobs[j]();
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return out;
}

struct ScanSettings {
    double gap_threshold = 1e12;
    std::size_t max_iters = 50'000;
    std::uint64_t seed = 1;     // seeds seed, seed+1, ... are used
    std::size_t seeds = 3;
    std::size_t threads = 1;
};

struct ConvergenceRun {
    std::size_t i = 0, rprime = 0;
    std::uint64_t seed = 0;
    bool converged = false;
    std::size_t iterations = 0;
    double final_gap = 0.0;
};

// Algorithm 5.1 on the planted TT only (no HOSVD comparison).
inline ConvergenceRun planted_convergence(std::size_t i, std::size_t rprime, std::uint64_t seed, double gap,
                                          std::size_t max_iters) {
    PlantedConfig cfg;
    cfg.i = i;
    cfg.rprime = rprime;
    cfg.seed = seed;
    const PlantedSetup s = build_planted(cfg);
    const TensorTrain merged = merge_cores(s.tt, 2);
    DisentanglerOptions opts;
    opts.gap_threshold = gap;
    opts.max_iters = max_iters;
    const auto res = find_disentangler(merged.core(2), i, i, rprime, opts);
    return {i, rprime, seed, res.report.converged, res.report.iterations, res.report.final_gap};
}

struct RminRow {
    std::size_t i = 0;
    std::size_t rmin = 0;
    std::vector<ConvergenceRun> runs;  // every run performed for this I
};

namespace detail {

// Majority vote over the seeds, stopping once the outcome is decided.
inline bool majority_converges(std::size_t i, std::size_t rprime, const ScanSettings& s, std::vector<ConvergenceRun>& log) {
    std::size_t yes = 0, no = 0;
    const std::size_t need = s.seeds / 2 + 1;
    for (std::size_t k = 0; k < s.seeds && yes < need && no < need; ++k) {
        log.push_back(planted_convergence(i, rprime, s.seed + k, s.gap_threshold, s.max_iters));
        (log.back().converged ? yes : no) += 1;
    }
    return yes >= need;
}

} // namespace detail

// Scans R' = I^2, I^2 - 1, ..., 2 and stops at the first R' whose majority
// does not converge; R'_min is the last converging value. R' = 1, which always
// converges, is not part of the scan.
inline RminRow rmin_for(std::size_t i, const ScanSettings& s) {
    if (i < 2) throw ConfigError("rmin-scan: I must be at least 2");
    RminRow row;
    row.i = i;
    row.rmin = i * i;
    for (std::size_t r = i * i; r >= 2; --r) {
        if (!detail::majority_converges(i, r, s, row.runs)) break;
        row.rmin = r;
    }
    return row;
}

inline std::vector<RminRow> run_rmin_scan(const std::vector<std::size_t>& dims, const ScanSettings& s) {
    std::vector<std::function<RminRow()>> jobs;
    for (std::size_t i : dims) jobs.emplace_back([i, s] { return rmin_for(i, s); });
    return parallel_map(jobs, s.threads);
}

struct ItersRow {
    std::size_t rprime = 0;
    std::vector<ConvergenceRun> runs;  // one per seed
    std::size_t median_iterations = 0;
    bool majority_converged = false;
};

// Sweeps R' from I^2 downward, stopping after the first R' (>= min_rprime)
// whose seed majority fails to converge.
inline std::vector<ItersRow> run_iters_vs_rank(std::size_t i, const ScanSettings& s, std::size_t min_rprime = 2) {
    if (i < 2) throw ConfigError("iters-vs-rank: I must be at least 2");
    std::vector<ItersRow> rows;
    for (std::size_t r = i * i; r >= std::max<std::size_t>(1, min_rprime); --r) {
        std::vector<std::function<ConvergenceRun()>> jobs;
        for (std::size_t k = 0; k < s.seeds; ++k) {
            const std::uint64_t seed = s.seed + k;
            jobs.emplace_back([=] { return planted_convergence(i, r, seed, s.gap_threshold, s.max_iters); });
        }
        ItersRow row;
        row.rprime = r;
        row.runs = parallel_map(jobs, s.threads);
        std::vector<std::size_t> its;
        std::size_t conv = 0;
        for (const auto& run : row.runs) {
            its.push_back(run.iterations);
            conv += run.converged ? 1 : 0;
        }
        std::sort(its.begin(), its.end());
        row.median_iterations = its[its.size() / 2];
        row.majority_converged = conv * 2 > row.runs.size();
        rows.push_back(std::move(row));
        if (!rows.back().majority_converged || r == 1) break;
    }
    return rows;
}

} // namespace ttmera::experiments
