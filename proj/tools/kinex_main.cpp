// kinex command-line front end: reproducible kinetic wealth-exchange
// experiments emitting plot-ready CSV plus JSON manifests.
//
// Exit codes: 0 success; 1 verification failures; 2 invalid parameters;
// 3 I/O failure; 4 evolve hit max-steps before the tolerance; 5 evolve
// tripped the mass-leak guard.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <future>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kinex/acceptance.hpp"
#include "kinex/cdf.hpp"
#include "kinex/density.hpp"
#include "kinex/gamma.hpp"
#include "kinex/io.hpp"
#include "kinex/laplace.hpp"
#include "kinex/mixed.hpp"
#include "kinex/operators.hpp"
#include "kinex/simulation.hpp"
#include "kinex/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
    double w = 1.0;
    std::uint64_t seed = 42;
    std::string out = ".";
    int grid_n = 4096;
    double grid_xmax = 0.0; // 0: derive 20 * w
    int jobs = 1;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
    cmd->add_option("--w", c.w, "Mean wealth scale")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", c.seed, "RNG seed");
    cmd->add_option("--out", c.out, "Output directory");
    cmd->add_option("--grid-n", c.grid_n, "Grid cells")->check(CLI::Range(16, 1 << 20));
    cmd->add_option("--grid-xmax", c.grid_xmax, "Grid truncation point (default 20*w)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--jobs", c.jobs, "Worker parallelism for sweeps")
        ->check(CLI::Range(1, 256));
}

kinex::Grid make_grid(const CommonOpts& c) {
    return kinex::Grid(c.grid_xmax > 0.0 ? c.grid_xmax : 20.0 * c.w, c.grid_n);
}

json common_json(const CommonOpts& c) {
    return json{{"w", c.w},
                {"seed", c.seed},
                {"grid", {{"n", c.grid_n}, {"x_max", c.grid_xmax > 0.0 ? c.grid_xmax : 20.0 * c.w}}},
                {"jobs", c.jobs},
                {"version", kinex::kVersion}};
}

struct ModelOpts {
    std::string name = "ie";
    double mu = 0.5;
    bool mu_given = false;
};

void add_model(CLI::App* cmd, ModelOpts& m) {
    cmd->add_option("--model", m.name, "Exchange model: ie | drm | mixed")
        ->required()
        ->check(CLI::IsMember({"ie", "drm", "mixed"}));
    cmd->add_option("--mu", m.mu, "Unidirectional-transfer probability (mixed model)")
        ->check(CLI::Range(0.0, 1.0))
        ->each([&m](const std::string&) { m.mu_given = true; });
}

kinex::ModelKind parse_model(const ModelOpts& m) {
    if (m.name == "ie") return kinex::ModelKind::immediate_exchange();
    if (m.name == "drm") return kinex::ModelKind::directed_random_market();
    if (!m.mu_given)
        throw std::invalid_argument("--model mixed requires --mu");
    return kinex::ModelKind::mixed(m.mu);
}

/// "uniform:a:b" | "exp:mean" | "gamma2:w" | "gammahalf:w"
kinex::Density parse_init_density(const std::string& spec, const kinex::Grid& grid) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : spec) {
        if (ch == ':') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    parts.push_back(cur);
    auto num = [&](std::size_t i) {
        if (i >= parts.size()) throw std::invalid_argument("--init: missing parameter in '" + spec + "'");
        std::size_t pos = 0;
        double v = std::stod(parts[i], &pos);
        if (pos != parts[i].size()) throw std::invalid_argument("--init: bad number in '" + spec + "'");
        return v;
    };
    if (parts[0] == "uniform") return kinex::uniform_density(num(1), num(2), grid);
    if (parts[0] == "exp") return kinex::exponential_density(num(1), grid);
    if (parts[0] == "gamma2") return kinex::gamma2_equilibrium(num(1), grid);
    if (parts[0] == "gammahalf") return kinex::gamma_half_equilibrium(num(1), grid);
    throw std::invalid_argument("--init: unknown distribution '" + parts[0] + "'");
}

int map_exception(const char* cmd) {
    try {
        throw;
    } catch (const kinex::IoError& e) {
        std::fprintf(stderr, "%s: %s\n", cmd, e.what());
        return 3;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "%s: %s\n", cmd, e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s: %s\n", cmd, e.what());
        return 2;
    }
}

// ---- simulate ---------------------------------------------------------

struct SimulateOpts {
    CommonOpts common;
    ModelOpts model;
    int n_agents = 100000;
    int days = 500;
    int record_every = 0; // 0: only initial and final snapshots
    std::string init = "";
    int hist_bins = 0; // 0: per-agent snapshot rows
};

int run_simulate(const SimulateOpts& o) {
    try {
        kinex::SimConfig cfg;
        cfg.model = parse_model(o.model);
        cfg.n_agents = o.n_agents;
        cfg.days = o.days;
        cfg.seed = o.common.seed;
        cfg.record_every = o.record_every > 0 ? o.record_every : std::max(1, o.days);
        if (o.init.empty()) {
            cfg.initial = kinex::EqualInitial{o.common.w};
        } else if (o.init.rfind("equal:", 0) == 0) {
            cfg.initial = kinex::EqualInitial{std::stod(o.init.substr(6))};
        } else {
            cfg.initial = kinex::DensityInitial{parse_init_density(o.init, make_grid(o.common))};
        }

        kinex::RunResult result = kinex::run(cfg);
        fs::path out(o.common.out);

        if (o.hist_bins > 0) {
            double x_max = o.common.grid_xmax > 0.0 ? o.common.grid_xmax : 20.0 * o.common.w;
            kinex::write_snapshot_histogram_csv(out / "snapshots.csv", result.snapshots,
                                                o.hist_bins, x_max);
        } else {
            kinex::write_snapshots_csv(out / "snapshots.csv", result.snapshots);
        }

        // empirical moments with the matching closed-form column
        kinex::MomentReport emp = kinex::empirical_moments(result.sample, {1.0, 2.0, 3.0, 4.0});
        std::string csv = "k,empirical,closed_form\n";
        for (std::size_t i = 0; i < emp.orders.size(); ++i) {
            int k = static_cast<int>(emp.orders[i]);
            csv += std::to_string(k);
            csv += ',';
            csv += kinex::fmt_g17(emp.values[i]);
            csv += ',';
            csv += kinex::fmt_g17(kinex::mixed_moment(cfg.model.mu(), result.manifest.initial_w, k));
            csv += '\n';
        }
        kinex::atomic_write(out / "moments.csv", csv);

        json manifest = kinex::manifest_to_json(result.manifest);
        manifest["subcommand"] = "simulate";
        manifest["init_spec"] = o.init.empty() ? "equal:" + std::to_string(o.common.w) : o.init;
        manifest["hist_bins"] = o.hist_bins;
        kinex::write_json(out / "manifest.json", manifest);
        return 0;
    } catch (...) {
        return map_exception("simulate");
    }
}

// ---- evolve -----------------------------------------------------------

struct EvolveOpts {
    CommonOpts common;
    ModelOpts model;
    std::string init = "uniform:0:2";
    double tol = 1e-6;
    int max_steps = 200;
    double alpha = 1.5;
};

int run_evolve(const EvolveOpts& o) {
    int rc = 0;
    try {
        kinex::Grid grid = make_grid(o.common);
        kinex::ModelKind model = parse_model(o.model);
        kinex::Density p0 = parse_init_density(o.init, grid);

        kinex::IterateResult result{p0, {}, false, 0};
        try {
            result = kinex::iterate(p0, model, o.max_steps, o.tol, o.alpha);
            rc = result.converged ? 0 : 4;
        } catch (const kinex::TruncationError& e) {
            std::fprintf(stderr, "evolve: %s\n", e.what());
            return 5;
        }

        fs::path out(o.common.out);
        kinex::write_trace_csv(out / "trace.csv", result.trace);
        kinex::write_density_csv(out / "density.csv", result.density);

        json manifest = common_json(o.common);
        manifest["subcommand"] = "evolve";
        manifest["model"] = model.name();
        manifest["mu"] = model.mu();
        manifest["init"] = o.init;
        manifest["tol"] = o.tol;
        manifest["max_steps"] = o.max_steps;
        manifest["alpha"] = o.alpha;
        manifest["converged"] = result.converged;
        manifest["steps"] = result.steps;
        manifest["final_mass_leak"] = result.density.mass_leak();
        kinex::write_json(out / "manifest.json", manifest);
    } catch (...) {
        return map_exception("evolve");
    }
    return rc;
}

// ---- moments ----------------------------------------------------------

struct MomentsOpts {
    CommonOpts common;
    double mu_min = 0.0;
    double mu_max = 1.0;
    double mu_step = 0.1;
};

int run_moments(const MomentsOpts& o) {
    try {
        if (!(o.mu_step > 0.0) || o.mu_min < 0.0 || o.mu_max > 1.0 || o.mu_min > o.mu_max)
            throw std::invalid_argument("moments: need 0 <= mu-min <= mu-max <= 1 and mu-step > 0");

        std::vector<kinex::MomentSweepRow> rows;
        int count = static_cast<int>(std::floor((o.mu_max - o.mu_min) / o.mu_step + 1e-9));
        for (int i = 0; i <= count; ++i) {
            // index-based stepping keeps the endpoints exact
            double m = std::min(o.mu_min + i * o.mu_step, 1.0);
            if (std::abs(m - 1.0) < 1e-12) m = 1.0;
            kinex::GammaParams fit = kinex::gamma_fit_two_moments(m, o.common.w);
            for (int k = 1; k <= 4; ++k) {
                kinex::MomentSweepRow row;
                row.mu = m;
                row.k = k;
                row.m_mixed = kinex::mixed_moment(m, o.common.w, k);
                row.m_gamma_fit = kinex::gamma_moment(fit, k);
                row.gap = row.m_gamma_fit - row.m_mixed;
                row.alpha_fit = fit.shape;
                row.alpha_heinsalu = kinex::heinsalu_shape(m);
                rows.push_back(row);
            }
        }
        fs::path out(o.common.out);
        kinex::write_moment_sweep_csv(out / "moments.csv", rows);

        json manifest = common_json(o.common);
        manifest["subcommand"] = "moments";
        manifest["mu_min"] = o.mu_min;
        manifest["mu_max"] = o.mu_max;
        manifest["mu_step"] = o.mu_step;
        kinex::write_json(out / "manifest.json", manifest);
        return 0;
    } catch (...) {
        return map_exception("moments");
    }
}

// ---- contraction ------------------------------------------------------

struct ContractionOpts {
    CommonOpts common;
    double alpha = 1.5;
    int steps = 10;
    int pairs = 5;
};

int run_contraction(const ContractionOpts& o) {
    try {
        kinex::Grid grid = make_grid(o.common);
        kinex::SplitMix64 rng(o.common.seed ^ 0xC0ull);
        std::vector<std::pair<kinex::Density, kinex::Density>> pairs;
        for (int i = 0; i < o.pairs; ++i) {
            kinex::Density a = kinex::verification_mixture(grid, rng, o.common.w);
            kinex::Density b = kinex::verification_mixture(grid, rng, o.common.w);
            pairs.emplace_back(a, kinex::with_mean(b, kinex::mean_wealth(a)));
        }

        // pairs are independent studies; --jobs bounds the sweep parallelism
        // and the merged table is schedule-independent
        kinex::ContractionTable table;
        table.alpha = o.alpha;
        table.bound = 2.0 / (o.alpha + 1.0);
        std::vector<std::future<kinex::ContractionTable>> futs;
        std::vector<kinex::ContractionTable> parts(pairs.size());
        std::size_t next = 0;
        while (next < pairs.size()) {
            std::size_t batch =
                std::min<std::size_t>(static_cast<std::size_t>(o.common.jobs), pairs.size() - next);
            futs.clear();
            for (std::size_t i = 0; i < batch; ++i) {
                const auto& pair = pairs[next + i];
                futs.push_back(std::async(std::launch::async, [&pair, &o] {
                    return kinex::contraction_study({pair}, o.alpha, o.steps);
                }));
            }
            for (std::size_t i = 0; i < batch; ++i) parts[next + i] = futs[i].get();
            next += batch;
        }
        for (std::size_t i = 0; i < parts.size(); ++i)
            for (kinex::ContractionRow row : parts[i].rows) {
                row.pair_id = static_cast<int>(i);
                table.rows.push_back(row);
            }

        fs::path out(o.common.out);
        kinex::write_contraction_csv(out / "contraction.csv", table);

        json manifest = common_json(o.common);
        manifest["subcommand"] = "contraction";
        manifest["alpha"] = o.alpha;
        manifest["steps"] = o.steps;
        manifest["pairs"] = o.pairs;
        manifest["bound"] = table.bound;
        kinex::write_json(out / "manifest.json", manifest);
        return 0;
    } catch (...) {
        return map_exception("contraction");
    }
}

// ---- verify -----------------------------------------------------------

struct VerifyOpts {
    CommonOpts common;
    std::string only = "";
    double tol = -1.0; // < 0: per-criterion pinned tolerances
};

int run_verify(const VerifyOpts& o) {
    try {
        kinex::AcceptanceOptions opts;
        opts.seed = o.common.seed;
        opts.jobs = o.common.jobs;
        if (o.tol >= 0.0) opts.tolerance_override = o.tol;

        std::vector<kinex::CriterionResult> results = kinex::run_acceptance(opts, o.only);
        if (results.empty()) {
            std::fprintf(stderr, "verify: no criterion matches '%s'\n", o.only.c_str());
            return 2;
        }

        bool all = true;
        json jcriteria = json::array();
        for (const kinex::CriterionResult& r : results) {
            all = all && r.passed;
            std::printf("[%2d] %-28s %s (%.2f s)\n", r.id, r.name.c_str(),
                        r.passed ? "PASS" : "FAIL", r.seconds);
            json jchecks = json::array();
            for (const kinex::CheckResult& c : r.checks) {
                if (!c.pass)
                    std::printf("     %-55s observed %.6g  limit %.6g\n", c.label.c_str(),
                                c.observed, c.limit);
                jchecks.push_back({{"label", c.label},
                                   {"observed", c.observed},
                                   {"limit", c.limit},
                                   {"pass", c.pass}});
            }
            json jr{{"id", r.id},
                    {"name", r.name},
                    {"passed", r.passed},
                    {"seconds", r.seconds},
                    {"checks", jchecks}};
            if (!r.note.empty()) jr["note"] = r.note;
            jcriteria.push_back(jr);
        }

        json report = common_json(o.common);
        report["subcommand"] = "verify";
        report["only"] = o.only;
        if (o.tol >= 0.0) report["tolerance_override"] = o.tol;
        report["criteria"] = jcriteria;
        report["all_passed"] = all;
        kinex::write_json(fs::path(o.common.out) / "verify_report.json", report);

        std::printf("%s\n", all ? "all criteria passed" : "FAILURES present");
        return all ? 0 : 1;
    } catch (...) {
        return map_exception("verify");
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"kinetic wealth-exchange models: density-operator engine, "
                 "Monte Carlo simulator, and verification harness"};
    app.set_version_flag("--version", kinex::kVersion);
    app.set_config("--config", "", "Config file (key=value; [subcommand] sections)");
    app.require_subcommand(1);

    int rc = 0;

    SimulateOpts sim;
    CLI::App* c_sim = app.add_subcommand("simulate", "Finite-population Monte Carlo run");
    add_common(c_sim, sim.common);
    add_model(c_sim, sim.model);
    c_sim->add_option("--n", sim.n_agents, "Number of agents (even)")->check(CLI::Range(2, 100000000));
    c_sim->add_option("--days", sim.days, "Trading days")->check(CLI::NonNegativeNumber);
    c_sim->add_option("--record-every", sim.record_every, "Snapshot cadence in days")
        ->check(CLI::NonNegativeNumber);
    c_sim->add_option("--init", sim.init,
                      "Initial condition: equal:w | uniform:a:b | exp:m | gamma2:w | gammahalf:w");
    c_sim->add_option("--hist-bins", sim.hist_bins, "Emit histogrammed snapshots with this many bins")
        ->check(CLI::NonNegativeNumber);
    c_sim->callback([&] { rc = run_simulate(sim); });

    EvolveOpts evo;
    CLI::App* c_evo = app.add_subcommand("evolve", "Iterate the infinite-population day operator");
    add_common(c_evo, evo.common);
    add_model(c_evo, evo.model);
    c_evo->add_option("--init", evo.init, "Initial density: uniform:a:b | exp:m | gamma2:w | gammahalf:w");
    c_evo->add_option("--tol", evo.tol, "Consecutive-iterate KS stopping tolerance")
        ->check(CLI::PositiveNumber);
    c_evo->add_option("--max-steps", evo.max_steps, "Iteration cap")->check(CLI::Range(1, 100000));
    c_evo->add_option("--alpha", evo.alpha, "Traced moment order")->check(CLI::PositiveNumber);
    c_evo->callback([&] { rc = run_evolve(evo); });

    MomentsOpts mom;
    CLI::App* c_mom = app.add_subcommand("moments", "Closed-form moment comparison over a mu sweep");
    add_common(c_mom, mom.common);
    c_mom->add_option("--mu-min", mom.mu_min)->check(CLI::Range(0.0, 1.0));
    c_mom->add_option("--mu-max", mom.mu_max)->check(CLI::Range(0.0, 1.0));
    c_mom->add_option("--mu-step", mom.mu_step)->check(CLI::PositiveNumber);
    c_mom->callback([&] { rc = run_moments(mom); });

    ContractionOpts con;
    CLI::App* c_con = app.add_subcommand("contraction", "Observed d_alpha contraction factors of T");
    add_common(c_con, con.common);
    c_con->add_option("--alpha", con.alpha, "Metric order in (1, 2)")
        ->check(CLI::Range(1.0 + 1e-9, 2.0 - 1e-9));
    c_con->add_option("--steps", con.steps, "Iterations per pair")->check(CLI::Range(1, 1000));
    c_con->add_option("--pairs", con.pairs, "Number of density pairs")->check(CLI::Range(1, 64));
    c_con->callback([&] { rc = run_contraction(con); });

    VerifyOpts ver;
    CLI::App* c_ver = app.add_subcommand("verify", "Run the acceptance criteria and emit a JSON report");
    add_common(c_ver, ver.common);
    c_ver->add_option("--only", ver.only, "Run only criteria whose id or name matches");
    c_ver->add_option("--tol", ver.tol,
                      "Replace every criterion tolerance (0 forces failures)")
        ->check(CLI::NonNegativeNumber);
    c_ver->callback([&] { rc = run_verify(ver); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    return rc;
}
