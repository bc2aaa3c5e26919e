#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kinex/cdf.hpp"
#include "kinex/density.hpp"
#include "kinex/gamma.hpp"
#include "kinex/laplace.hpp"
#include "kinex/mixed.hpp"
#include "kinex/operators.hpp"
#include "kinex/simulation.hpp"

namespace kinex {

/// One bound evaluated inside a criterion: pass iff observed <= limit.
struct CheckResult {
    std::string label;
    double observed = 0.0;
    double limit = 0.0;
    bool pass = false;
};

struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    double seconds = 0.0;
    std::string note; // methodology caveats worth surfacing in reports
    std::vector<CheckResult> checks;
};

struct AcceptanceOptions {
    /// When set, replaces every criterion tolerance (0 forces failures;
    /// useful for exercising report formatting).
    std::optional<double> tolerance_override;
    std::uint64_t seed = 42;
    int jobs = 1;
};

namespace detail {

inline double tol(const AcceptanceOptions& o, double pinned) {
    return o.tolerance_override.value_or(pinned);
}

inline void check(CriterionResult& r, const std::string& label, double observed, double limit) {
    r.checks.push_back({label, observed, limit, observed <= limit});
}

/// Seeded mixture of gamma2 / uniform / exponential shapes.
inline Density random_mixture(const Grid& g, SplitMix64& rng, bool unit_mean) {
    std::vector<double> v(static_cast<std::size_t>(g.size()), 0.0);
    int ncomp = 2 + static_cast<int>(rng.next_below(3));
    double wsum = 0.0;
    for (int c = 0; c < ncomp; ++c) {
        double wgt = 0.2 + rng.next_unit();
        double scale = unit_mean ? 1.0 : 0.5 + 1.5 * rng.next_unit();
        Density comp = (c % 3 == 0)   ? gamma2_equilibrium(scale, g)
                       : (c % 3 == 1) ? uniform_density(0.0, 2.0 * scale, g)
                                      : exponential_density(scale, g);
        for (int k = 0; k < g.size(); ++k)
            v[static_cast<std::size_t>(k)] += wgt * comp.value(k);
        wsum += wgt;
    }
    for (double& x : v) x /= wsum;
    return Density::from_values(g, std::move(v));
}

// ---- criterion bodies ------------------------------------------------

inline void c1_gamma2_fixed_point(CriterionResult& r, const AcceptanceOptions& o) {
    Grid grid = Grid::standard(1.0);
    Density p = gamma2_equilibrium(1.0, grid);
    Density Tp = apply_T(p);
    double sup = 0.0;
    for (int k = 0; k < grid.size(); ++k)
        sup = std::max(sup, std::abs(Tp.value(k) - p.value(k)));
    check(r, "sup-node |T[p_w] - p_w|", sup, tol(o, 1e-3));
    check(r, "KS(T[p_w], p_w)", ks_between_densities(Tp, p), tol(o, 1e-4));
}

inline void c2_convergence(CriterionResult& r, const AcceptanceOptions& o) {
    Grid grid = Grid::standard(1.0);
    struct Case {
        const char* name;
        Density p0;
    } cases[] = {{"uniform(0,2)", uniform_density(0.0, 2.0, grid)},
                 {"exponential(1)", exponential_density(1.0, grid)}};
    for (auto& c : cases) {
        auto res = iterate(c.p0, ModelKind::immediate_exchange(), 60, 1e-6);
        check(r, std::string(c.name) + ": steps to consecutive-KS < 1e-6",
              res.converged ? res.steps : 61.0, 60.0);
        check(r, std::string(c.name) + ": final KS to Gamma(2, w/2) CDF",
              res.trace.rows.back().ks_to_target.value_or(1.0), tol(o, 5e-3));
    }
}

inline void c3_mean_and_moment_bounds(CriterionResult& r, const AcceptanceOptions& o) {
    Grid grid = Grid::standard(1.0);
    SplitMix64 rng(o.seed ^ 0xC3ull);
    double worst_drift = 0.0;
    double worst_ratio = 0.0;
    for (int i = 0; i < 10; ++i) {
        Density p = random_mixture(grid, rng, false);
        Density Tp = apply_T(p);
        worst_drift = std::max(worst_drift,
                               std::abs(mean_wealth(Tp) - mean_wealth(p)) / mean_wealth(p));
        for (double a : {1.2, 1.5, 1.8}) {
            double cap = std::pow(2.0, a) / (a + 1.0) * moment(p, a);
            worst_ratio = std::max(worst_ratio, moment(Tp, a) / cap);
        }
    }
    check(r, "max relative M1 drift over 10 densities", worst_drift, tol(o, 1e-3));
    check(r, "max M_alpha(T[p]) / ((2^a/(a+1)) M_alpha(p))", worst_ratio, 1.0 + tol(o, 1e-2));
}

inline void c4_contraction(CriterionResult& r, const AcceptanceOptions& o) {
    Grid grid = Grid::standard(1.0);
    SplitMix64 rng(o.seed ^ 0xC4ull);
    std::vector<std::pair<Density, Density>> pairs;
    auto matched = [&](Density a, Density b) {
        double w = mean_wealth(a);
        pairs.emplace_back(std::move(a), with_mean(b, w));
    };
    matched(uniform_density(0.0, 2.0, grid), gamma2_equilibrium(1.0, grid));
    matched(exponential_density(1.0, grid), uniform_density(0.0, 2.0, grid));
    matched(gamma_half_equilibrium(1.0, grid), gamma2_equilibrium(1.0, grid));
    matched(exponential_density(1.0, grid), gamma_half_equilibrium(1.0, grid));
    matched(random_mixture(grid, rng, true), random_mixture(grid, rng, true));

    auto table = contraction_study(pairs, 1.5, 10);
    double worst = 0.0;
    for (const auto& row : table.rows)
        if (row.ratio) worst = std::max(worst, *row.ratio);
    check(r, "max observed d_1.5 ratio over 5 pairs x 10 steps", worst,
          2.0 / 2.5 + tol(o, 1e-2));
}

inline void c5_drm_equilibrium(CriterionResult& r, const AcceptanceOptions& o) {
    Grid grid = Grid::standard(1.0);
    Density p = gamma_half_equilibrium(1.0, grid);
    check(r, "KS(T_D[gamma_half], gamma_half)", ks_between_densities(apply_TD(p), p),
          tol(o, 5e-3));
    SGrid window = SGrid::transform_window(1.0, grid);
    check(r, "DRM transform identity residual",
          fixed_point_residual(p, ModelKind::directed_random_market(), window), tol(o, 5e-3));
}

inline Density converged_mixed_half(CriterionResult& r) {
    Grid grid = Grid::standard(1.0);
    Density p0 = exponential_density(1.0, grid);
    auto res = iterate(p0, ModelKind::mixed(0.5), 500, 1e-7);
    check(r, "mixed(0.5) iteration reached consecutive-KS < 1e-7 (1 = no)",
          res.converged ? 0.0 : 1.0, 0.0);
    return res.density;
}

inline void c6_mixed_moments(CriterionResult& r, const AcceptanceOptions& o) {
    Density p = converged_mixed_half(r);
    const double closed[] = {0.0, 1.0, 2.0, 6.0, mixed_moment(0.5, 1.0, 4)};
    for (int k = 2; k <= 4; ++k) {
        double rel = std::abs(moment(p, k) / closed[k] - 1.0);
        check(r, "relative error of M_" + std::to_string(k), rel, tol(o, 0.02));
    }
}

inline void c7_non_gamma_certificate(CriterionResult& r, const AcceptanceOptions& o) {
    Density p = converged_mixed_half(r);
    GammaParams fit = gamma_fit_two_moments(0.5, 1.0); // (alpha, beta) = (1, 1)
    for (int k = 1; k <= 3; ++k) {
        double rel = std::abs(moment(p, k) / gamma_moment(fit, k) - 1.0);
        check(r, "M_" + std::to_string(k) + " matches two-moment fit", rel, tol(o, 0.02));
    }
    double excess = moment(p, 4.0) - gamma_moment(fit, 4); // fit M4 = 24 exactly
    double expected = -fourth_moment_gap(0.5, 1.0);        // +0.074074
    check(r, "M4(converged) - M4(fit) is within 0.03 of +0.0741",
          std::abs(excess - expected), tol(o, 0.03));
    r.note = "The fourth-moment excess (~= +0.074) deciding this criterion is far below "
             "finite-population Monte Carlo resolution at desk scale: at N = 1e5 the sampling "
             "standard deviation of M4 is roughly 0.6. The deterministic density engine is "
             "the measuring instrument here.";
}

inline void c8_mc_engine_consistency(CriterionResult& r, const AcceptanceOptions& o) {
    Grid grid = Grid::standard(1.0);
    Density p0 = uniform_density(0.0, 2.0, grid);

    SimConfig cfg;
    cfg.model = ModelKind::immediate_exchange();
    cfg.n_agents = 100000;
    cfg.days = 20;
    cfg.seed = o.seed;
    cfg.initial = DensityInitial{p0};
    cfg.record_every = 1;
    RunResult mc = run(cfg);

    Density engine = p0;
    for (int t = 1; t <= 20; ++t) {
        engine = apply_T(engine);
        if (t == 1 || t == 5 || t == 20) {
            EmpiricalSample day_sample{mc.snapshots[static_cast<std::size_t>(t)].wealths,
                                       cfg.seed};
            check(r, "KS(empirical day " + std::to_string(t) + ", engine iterate)",
                  ks_distance(ecdf(day_sample), ecdf(engine)), tol(o, 0.02));
        }
    }
}

inline void c9_transform_self_consistency(CriterionResult& r, const AcceptanceOptions& o) {
    SGrid sg = SGrid::standard(1.0);
    MixedEquilibriumSpec ie(0.0, 1.0), drm(1.0, 1.0);
    double worst_ie = 0.0, worst_drm = 0.0;
    for (double s : sg.s) {
        double t = 1.0 + 0.5 * s;
        worst_ie = std::max(worst_ie, std::abs(phat_mixed(ie, s) - 1.0 / (t * t)));
        worst_drm =
            std::max(worst_drm, std::abs(phat_mixed(drm, s) - 1.0 / std::sqrt(1.0 + 2.0 * s)));
    }
    check(r, "phat_mixed(mu=0) vs (1 + ws/2)^-2", worst_ie, tol(o, 1e-9));
    check(r, "phat_mixed(mu=1) vs (1 + 2ws)^-1/2", worst_drm, tol(o, 1e-9));

    double worst_rel = 0.0;
    for (double mu : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        MixedEquilibriumSpec spec(mu, 1.0);
        for (int k = 1; k <= 4; ++k) {
            double expected = mixed_moment(mu, 1.0, k);
            worst_rel = std::max(
                worst_rel, std::abs(moment_from_transform(spec, k) / expected - 1.0));
        }
    }
    check(r, "moment_from_transform vs closed forms (k <= 4, mu grid)", worst_rel, tol(o, 1e-3));
}

inline void c10_oracle_equivalence(CriterionResult& r, const AcceptanceOptions& o) {
    SplitMix64 rng(o.seed ^ 0xC10ull);
    for (int n : {128, 256}) {
        Grid grid(20.0, n);
        std::vector<Density> cases{uniform_density(0.0, 2.0, grid),
                                   gamma2_equilibrium(1.0, grid),
                                   exponential_density(1.0, grid),
                                   gamma_half_equilibrium(1.0, grid),
                                   random_mixture(grid, rng, false)};
        double worst = 0.0;
        for (const Density& p : cases) {
            Density fast = apply_T(p);
            Density slow = brute_force_T(p);
            for (int k = 0; k < n; ++k)
                worst = std::max(worst, std::abs(fast.value(k) - slow.value(k)));
        }
        check(r, "sup |apply_T - brute_force_T| over 5 densities, n = " + std::to_string(n),
              worst, tol(o, 1e-6));
    }
}

} // namespace detail

/// Seeded mixture density with mean w; the pair generator behind the
/// contraction harnesses.
inline Density verification_mixture(const Grid& g, SplitMix64& rng, double w) {
    return with_mean(detail::random_mixture(g, rng, true), w);
}

struct CriterionSpec {
    int id;
    const char* name;
    double runtime_limit_s; // 0 = no pinned runtime bound
    void (*body)(CriterionResult&, const AcceptanceOptions&);
};

inline const std::vector<CriterionSpec>& acceptance_criteria() {
    static const std::vector<CriterionSpec> list{
        {1, "gamma2-fixed-point", 5.0, detail::c1_gamma2_fixed_point},
        {2, "convergence", 120.0, detail::c2_convergence},
        {3, "moment-bounds", 0.0, detail::c3_mean_and_moment_bounds},
        {4, "contraction", 0.0, detail::c4_contraction},
        {5, "drm-equilibrium", 0.0, detail::c5_drm_equilibrium},
        {6, "mixed-moments", 300.0, detail::c6_mixed_moments},
        {7, "non-gamma-certificate", 0.0, detail::c7_non_gamma_certificate},
        {8, "mc-engine-consistency", 180.0, detail::c8_mc_engine_consistency},
        {9, "transform-self-consistency", 0.0, detail::c9_transform_self_consistency},
        {10, "oracle-equivalence", 0.0, detail::c10_oracle_equivalence},
    };
    return list;
}

inline CriterionResult run_criterion(const CriterionSpec& spec, const AcceptanceOptions& opts) {
    CriterionResult r;
    r.id = spec.id;
    r.name = spec.name;
    auto start = std::chrono::steady_clock::now();
    bool threw = false;
    try {
        spec.body(r, opts);
    } catch (const std::exception& e) {
        threw = true;
        r.note = std::string("criterion aborted: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (spec.runtime_limit_s > 0.0)
        detail::check(r, "runtime (s)", r.seconds, spec.runtime_limit_s);
    r.passed = !threw && !r.checks.empty();
    for (const CheckResult& c : r.checks) r.passed = r.passed && c.pass;
    return r;
}

/// Run the acceptance criteria whose id or name matches `only` (all when
/// empty); `jobs` bounds worker parallelism.
inline std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts,
                                                   const std::string& only = "") {
    std::vector<const CriterionSpec*> selected;
    for (const CriterionSpec& spec : acceptance_criteria()) {
        if (!only.empty() && only != std::to_string(spec.id) &&
            std::string(spec.name).find(only) == std::string::npos)
            continue;
        selected.push_back(&spec);
    }

    std::vector<CriterionResult> results(selected.size());
    int jobs = std::max(1, opts.jobs);
    if (jobs == 1) {
        for (std::size_t i = 0; i < selected.size(); ++i)
            results[i] = run_criterion(*selected[i], opts);
        return results;
    }
    std::size_t next = 0;
    while (next < selected.size()) {
        std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(jobs),
                                                  selected.size() - next);
        std::vector<std::future<CriterionResult>> futs;
        for (std::size_t i = 0; i < batch; ++i)
            futs.push_back(std::async(std::launch::async, run_criterion,
                                      std::cref(*selected[next + i]), std::cref(opts)));
        for (std::size_t i = 0; i < batch; ++i) results[next + i] = futs[i].get();
        next += batch;
    }
    return results;
}

} // namespace kinex
