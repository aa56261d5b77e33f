#pragma once

// CSV and JSON output of the experiment results. Every CSV has a header row;
// list-valued fields are joined with ';'.

#include "ttmera/experiments/compress.hpp"
#include "ttmera/experiments/mera12.hpp"
#include "ttmera/experiments/planted.hpp"
#include "ttmera/experiments/scans.hpp"

#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

namespace ttmera::experiments {

inline std::string join(const std::vector<std::size_t>& v, char sep = ';') {
    std::ostringstream os;
    for (std::size_t k = 0; k < v.size(); ++k) os << (k ? std::string(1, sep) : "") << v[k];
    return os.str();
}

inline std::ofstream open_report(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot open " + path + " for writing");
    os << std::setprecision(17);
    return os;
}

namespace csv {

inline void compression(std::ostream& os, const std::vector<CompressionReport>& rows) {
    os << "method,order,elapsed_seconds,relative_error,storage_count,compression_ratio,ranks,multilinear_ranks\n";
    for (const auto& r : rows) {
        os << r.method << ',' << r.order << ',' << r.elapsed_seconds << ',' << r.relative_error << ',' << r.storage_count
           << ',' << r.compression_ratio << ',' << join(r.ranks) << ',' << join(r.multilinear_ranks) << '\n';
    }
}

// Columns k, sigma_original, sigma_hosvd, sigma_procrustes (1-based k).
inline void singular_value_decay(std::ostream& os, const PlantedResult& r) {
    os << "k,sigma_original,sigma_hosvd,sigma_procrustes\n";
    const Eigen::Index n = std::max({r.sigma_original.size(), r.sigma_hosvd.size(), r.sigma_procrustes.size()});
    auto at = [](const Vector& v, Eigen::Index k) { return k < v.size() ? v(k) : 0.0; };
    for (Eigen::Index k = 0; k < n; ++k) {
        os << k + 1 << ',' << at(r.sigma_original, k) << ',' << at(r.sigma_hosvd, k) << ',' << at(r.sigma_procrustes, k) << '\n';
    }
}

inline void singular_value_trace(std::ostream& os, const DisentanglerReport& rep) {
    os << "iter,k,sigma_k\n";
    for (const auto& [it, s] : rep.singular_value_trace)
        for (Eigen::Index k = 0; k < s.size(); ++k) os << it << ',' << k + 1 << ',' << s(k) << '\n';
}

inline void convergence_runs(std::ostream& os, const std::vector<ConvergenceRun>& runs) {
    os << "I,rprime,seed,converged,iterations,final_gap\n";
    for (const auto& r : runs) {
        os << r.i << ',' << r.rprime << ',' << r.seed << ',' << (r.converged ? 1 : 0) << ',' << r.iterations << ','
           << r.final_gap << '\n';
    }
}

inline void rmin_table(std::ostream& os, const std::vector<RminRow>& rows) {
    os << "I,rmin\n";
    for (const auto& r : rows) os << r.i << ',' << r.rmin << '\n';
}

inline void iterations(std::ostream& os, const std::vector<ItersRow>& rows) {
    os << "rprime,median_iterations,majority_converged\n";
    for (const auto& r : rows) os << r.rprime << ',' << r.median_iterations << ',' << (r.majority_converged ? 1 : 0) << '\n';
}

inline void mera_runs(std::ostream& os, const Mera12Result& res) {
    os << "method,elapsed_seconds,relative_error,error_bound,storage,output_dims\n";
    for (const auto& r : res.runs) {
        std::string dims;
        for (std::size_t l = 0; l < r.output_dims.size(); ++l) dims += (l ? "|" : "") + join(r.output_dims[l]);
        os << r.label << ',' << r.elapsed_seconds << ',' << r.relative_error << ',' << r.error_bound << ',' << r.storage << ','
           << dims << '\n';
    }
}

} // namespace csv

namespace json {

using nlohmann::json;

inline json compression(const std::vector<CompressionReport>& rows) {
    json a = json::array();
    for (const auto& r : rows) {
        a.push_back({{"method", r.method},
                     {"order", r.order},
                     {"elapsed_seconds", r.elapsed_seconds},
                     {"relative_error", r.relative_error},
                     {"storage_count", r.storage_count},
                     {"compression_ratio", r.compression_ratio},
                     {"ranks", r.ranks},
                     {"multilinear_ranks", r.multilinear_ranks}});
    }
    return a;
}

inline json report(const DisentanglerReport& r) {
    return {{"iterations", r.iterations},
            {"final_gap", r.final_gap},
            {"achieved_rank", r.achieved_rank},
            {"target_rank", r.target_rank},
            {"converged", r.converged}};
}

inline json planted(const PlantedConfig& cfg, const PlantedResult& r) {
    return {{"I", cfg.i},
            {"rprime", cfg.rprime},
            {"seed", cfg.seed},
            {"tt_ranks", r.tt_ranks},
            {"procrustes", report(r.procrustes)},
            {"rank_hosvd", r.rank_hosvd},
            {"rank_procrustes", r.rank_procrustes},
            {"isometry_loss_procrustes", r.isometry_loss},
            {"isometry_loss_hosvd", r.hosvd_isometry_loss}};
}

inline json mera12(const Mera12Config& c, const Mera12Result& res) {
    json runs = json::array();
    for (const auto& r : res.runs) {
        json reps = json::array();
        for (const auto& rep : r.reports) reps.push_back(report(rep));
        runs.push_back({{"method", r.label},
                        {"elapsed_seconds", r.elapsed_seconds},
                        {"relative_error", r.relative_error},
                        {"error_bound", r.error_bound},
                        {"storage", r.storage},
                        {"output_dims", r.output_dims},
                        {"disentanglers", reps}});
    }
    return {{"order", c.order},
            {"I", c.i},
            {"S", c.s},
            {"K", c.k},
            {"seed", c.seed},
            {"epsilon", c.epsilon},
            {"tt_ranks", res.tt_ranks},
            {"tt_storage", res.tt_storage},
            {"mera_storage", res.mera_storage_planted},
            {"entries", res.entries},
            {"tt_over_mera", res.storage_ratio},
            {"runs", runs}};
}

} // namespace json

} // namespace ttmera::experiments
