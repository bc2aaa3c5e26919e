#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kinex/density.hpp"
#include "kinex/errors.hpp"
#include "kinex/laplace.hpp"
#include "kinex/operators.hpp"
#include "kinex/simulation.hpp"

namespace kinex {

/// Full-precision decimal rendering (17 significant digits, '.' separator,
/// locale-independent for the default "C" locale).
inline std::string fmt_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

/// Write via a temp file in the same directory plus rename, so readers
/// never observe a half-written file.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path tmp = path;
    tmp += ".tmp";
    std::error_code ec;
    if (!path.parent_path().empty()) {
        fs::create_directories(path.parent_path(), ec);
        ec.clear();
    }
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("rename to " + path.string() + " failed: " + ec.message());
}

/// Two-column density table, one row per node.
inline void write_density_csv(const std::filesystem::path& path, const Density& p) {
    std::string out = "x,p\n";
    for (int k = 0; k < p.grid().size(); ++k) {
        out += fmt_g17(p.grid().node(k));
        out += ',';
        out += fmt_g17(p.value(k));
        out += '\n';
    }
    atomic_write(path, out);
}

/// Per-step iteration trace; ks_to_target stays empty when the model has
/// no closed-form equilibrium, ks_consecutive is empty on the t = 0 row.
inline void write_trace_csv(const std::filesystem::path& path, const IterationTrace& trace) {
    std::string out = "t,m1,m_alpha,ks_consecutive,ks_to_target,mass_leak\n";
    for (const TraceRow& r : trace.rows) {
        out += std::to_string(r.t);
        out += ',';
        out += fmt_g17(r.m1);
        out += ',';
        out += fmt_g17(r.m_alpha);
        out += ',';
        if (!std::isnan(r.ks_consecutive)) out += fmt_g17(r.ks_consecutive);
        out += ',';
        if (r.ks_to_target) out += fmt_g17(*r.ks_to_target);
        out += ',';
        out += fmt_g17(r.mass_leak);
        out += '\n';
    }
    atomic_write(path, out);
}

inline void write_snapshots_csv(const std::filesystem::path& path,
                                const std::vector<Snapshot>& snapshots) {
    std::string out = "day,agent_id,wealth\n";
    for (const Snapshot& s : snapshots)
        for (std::size_t i = 0; i < s.wealths.size(); ++i) {
            out += std::to_string(s.day);
            out += ',';
            out += std::to_string(i);
            out += ',';
            out += fmt_g17(s.wealths[i]);
            out += '\n';
        }
    atomic_write(path, out);
}

/// Histogrammed alternative to the per-agent table.
inline void write_snapshot_histogram_csv(const std::filesystem::path& path,
                                         const std::vector<Snapshot>& snapshots, int bins,
                                         double x_max) {
    if (bins < 1) throw std::invalid_argument("write_snapshot_histogram_csv: bins must be >= 1");
    if (!(x_max > 0.0)) throw std::invalid_argument("write_snapshot_histogram_csv: x_max must be positive");
    std::string out = "day,bin_left,bin_right,count\n";
    const double width = x_max / bins;
    for (const Snapshot& s : snapshots) {
        std::vector<long long> counts(static_cast<std::size_t>(bins), 0);
        for (double x : s.wealths) {
            int b = x >= x_max ? bins - 1 : static_cast<int>(x / width);
            ++counts[static_cast<std::size_t>(b)];
        }
        for (int b = 0; b < bins; ++b) {
            out += std::to_string(s.day);
            out += ',';
            out += fmt_g17(b * width);
            out += ',';
            out += fmt_g17((b + 1) * width);
            out += ',';
            out += std::to_string(counts[static_cast<std::size_t>(b)]);
            out += '\n';
        }
    }
    atomic_write(path, out);
}

struct MomentSweepRow {
    double mu = 0.0;
    int k = 0;
    double m_mixed = 0.0;
    double m_gamma_fit = 0.0;
    double gap = 0.0; // fit minus mixed; nonzero only at k = 4 for mu in (0,1)
    double alpha_fit = 0.0;
    double alpha_heinsalu = 0.0;
};

inline void write_moment_sweep_csv(const std::filesystem::path& path,
                                   const std::vector<MomentSweepRow>& rows) {
    std::string out = "mu,k,M_mixed,M_gamma_fit,gap,alpha_fit,alpha_heinsalu\n";
    for (const MomentSweepRow& r : rows) {
        out += fmt_g17(r.mu);
        out += ',';
        out += std::to_string(r.k);
        out += ',';
        out += fmt_g17(r.m_mixed);
        out += ',';
        out += fmt_g17(r.m_gamma_fit);
        out += ',';
        out += fmt_g17(r.gap);
        out += ',';
        out += fmt_g17(r.alpha_fit);
        out += ',';
        out += fmt_g17(r.alpha_heinsalu);
        out += '\n';
    }
    atomic_write(path, out);
}

inline void write_contraction_csv(const std::filesystem::path& path,
                                  const ContractionTable& table) {
    std::string out = "pair_id,t,d_alpha_t,ratio,bound\n";
    for (const ContractionRow& r : table.rows) {
        out += std::to_string(r.pair_id);
        out += ',';
        out += std::to_string(r.t);
        out += ',';
        out += fmt_g17(r.d_alpha_t);
        out += ',';
        if (r.ratio) out += fmt_g17(*r.ratio);
        out += ',';
        out += fmt_g17(table.bound);
        out += '\n';
    }
    atomic_write(path, out);
}

inline nlohmann::json manifest_to_json(const RunManifest& m) {
    nlohmann::json j{{"model", m.model},
                     {"mu", m.mu},
                     {"n_agents", m.n_agents},
                     {"days", m.days},
                     {"seed", m.seed},
                     {"record_every", m.record_every},
                     {"initial", m.initial},
                     {"initial_w", m.initial_w},
                     {"pairing", "uniform-perfect-matching"},
                     {"rng", "splitmix64 keyed by (seed, day, pair)"},
                     {"version", m.version}};
    if (m.grid_n > 0) j["grid"] = {{"x_max", m.grid_x_max}, {"n", m.grid_n}};
    return j;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    atomic_write(path, j.dump(2) + "\n");
}

} // namespace kinex
