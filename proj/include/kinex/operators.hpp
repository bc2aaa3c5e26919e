#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kinex/cdf.hpp"
#include "kinex/density.hpp"
#include "kinex/errors.hpp"
#include "kinex/gamma.hpp"
#include "kinex/grid.hpp"

namespace kinex {

/// Which exchange rule drives a step. The mixed model performs a
/// unidirectional transfer with probability mu and a bidirectional exchange
/// otherwise, so mixed(0) coincides with the Immediate Exchange model and
/// mixed(1) with the Directed Random Market.
class ModelKind {
public:
    static ModelKind immediate_exchange() { return ModelKind(Family::ImmediateExchange, 0.0); }
    static ModelKind directed_random_market() { return ModelKind(Family::DirectedRandomMarket, 1.0); }
    static ModelKind mixed(double mu) {
        if (!(mu >= 0.0 && mu <= 1.0))
            throw std::invalid_argument("ModelKind::mixed: mu must lie in [0, 1]");
        return ModelKind(Family::Mixed, mu);
    }

    double mu() const { return mu_; }
    const char* name() const {
        switch (family_) {
        case Family::ImmediateExchange: return "ie";
        case Family::DirectedRandomMarket: return "drm";
        case Family::Mixed: return "mixed";
        }
        return "?";
    }

    /// The two pure models have Gamma equilibria; the strictly mixed model
    /// does not (its equilibrium is known only through its transform).
    bool has_closed_form_equilibrium() const { return mu_ == 0.0 || mu_ == 1.0; }

    std::function<double(double)> equilibrium_cdf(double w) const {
        if (mu_ == 0.0) return [w](double x) { return gamma2_cdf(w, x); };
        if (mu_ == 1.0) return [w](double x) { return gamma_half_cdf(w, x); };
        throw std::invalid_argument("ModelKind: no closed-form equilibrium for mixed mu in (0,1)");
    }

    Density equilibrium_density(double w, const Grid& grid) const {
        if (mu_ == 0.0) return gamma2_equilibrium(w, grid);
        if (mu_ == 1.0) return gamma_half_equilibrium(w, grid);
        throw std::invalid_argument("ModelKind: no closed-form equilibrium for mixed mu in (0,1)");
    }

private:
    enum class Family { ImmediateExchange, DirectedRandomMarket, Mixed };
    ModelKind(Family f, double mu) : family_(f), mu_(mu) {}
    Family family_;
    double mu_;
};

namespace detail {

struct ConvResult {
    std::vector<double> values;
    double leak;
};

/// Convolution of two midpoint-atom densities on a shared grid. Atom sums
/// x_i + x_j land exactly on cell edges (i + j + 1) * dx; each edge atom is
/// split evenly between its two adjacent cells, which is the exact
/// cell-average of the atom measure. Rounding an edge to a single
/// neighbouring node instead would shift the whole image by dx/2.
/// The scheme conserves total mass and mean exactly: what convolves past
/// x_max is returned as leak.
inline ConvResult half_split_convolution(const Grid& grid,
                                         std::span<const double> a,
                                         std::span<const double> b) {
    const int n = grid.size();
    const double dx = grid.dx();
    // b reversed so the inner product runs over contiguous memory.
    std::vector<double> br(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) br[static_cast<std::size_t>(i)] = b[static_cast<std::size_t>(n - 1 - i)];

    // edge_mass[m]: probability arriving exactly at edge m*dx, m = 0..n.
    std::vector<double> edge_mass(static_cast<std::size_t>(n) + 1, 0.0);
    const double dx2 = dx * dx;
    for (int m = 1; m <= n; ++m) {
        const double* pa = a.data();
        const double* pb = br.data() + (n - m);
        double acc = 0.0;
        for (int j = 0; j < m; ++j) acc += pa[j] * pb[j];
        edge_mass[static_cast<std::size_t>(m)] = acc * dx2;
    }

    std::vector<double> values(static_cast<std::size_t>(n));
    CompensatedSum kept;
    for (int k = 0; k < n; ++k) {
        double cell = 0.5 * (edge_mass[static_cast<std::size_t>(k)] +
                             edge_mass[static_cast<std::size_t>(k) + 1]);
        values[static_cast<std::size_t>(k)] = cell / dx;
        kept.add(cell);
    }
    double total = compensated_total(a) * compensated_total(b) * dx2;
    double leak = std::max(0.0, total - kept.value());
    return {std::move(values), leak};
}

/// Reallocate piecewise-constant cell masses so the quadrature mean equals
/// target_mean exactly (a pure rescale x -> c x of the wealth axis).
///
/// The cell-average projection behind apply_S carries each atom's boundary
/// half-cell to its midpoint, dx/4 above that piece's centroid; one operator
/// application therefore inflates the mean by O(dx^2) * M_{-1}(p). The
/// continuum operators are exactly wealth-preserving, and without this
/// correction the bias accumulates as a slow drift along the equilibrium
/// family, flooring the consecutive-iterate KS distance near 6e-6 on the
/// default grid — above the stopping tolerances the iteration driver must
/// reach. Restoring the mean keeps the discrete scheme conservative in both
/// mass and mean. Returns any mass pushed past x_max (only possible when
/// stretching, c > 1).
inline double rescale_to_mean(const Grid& g, std::vector<double>& v, double target_mean) {
    const int n = g.size();
    double leak = 0.0;
    // Reallocation projects the stretched cells back onto midpoints, which
    // itself perturbs the quadrature mean by ~2% of the applied correction;
    // a few passes land on the target geometrically.
    for (int pass = 0; pass < 8; ++pass) {
        CompensatedSum mass_acc, mean_acc;
        for (int k = 0; k < n; ++k) {
            mass_acc.add(v[static_cast<std::size_t>(k)] * g.dx());
            mean_acc.add(v[static_cast<std::size_t>(k)] * g.dx() * g.node(k));
        }
        const double mass = mass_acc.value();
        const double c = target_mean * mass / mean_acc.value();
        if (std::abs(c - 1.0) < 1e-14) break;

        // Target cell k draws from the source interval [edge(k), edge(k+1)] / c.
        // Overlaps are accumulated cell by cell; differencing a cumulative
        // sum here would destroy the relative accuracy of far-tail masses.
        std::vector<double> out(v.size(), 0.0);
        CompensatedSum kept;
        const double inv = 1.0 / c;
        for (int k = 0; k < n; ++k) {
            const double a = g.edge(k) * inv;
            const double b = g.edge(k + 1) * inv;
            double m = 0.0;
            for (int j = std::max(0, static_cast<int>(a / g.dx())); j < n; ++j) {
                double lo = std::max(a, g.edge(j));
                double hi = std::min(b, g.edge(j + 1));
                if (hi <= lo) {
                    if (g.edge(j) >= b) break;
                    continue;
                }
                m += v[static_cast<std::size_t>(j)] * (hi - lo);
            }
            out[static_cast<std::size_t>(k)] = m / g.dx();
            kept.add(m);
        }
        v = std::move(out);
        leak += std::max(0.0, mass - kept.value());
    }
    return leak;
}

/// values of S[p] on the nodes; mass-preserving by construction, so no leak.
inline std::vector<double> s_image_values(const Density& p) {
    const Grid& g = p.grid();
    const int n = g.size();
    std::vector<double> out(static_cast<std::size_t>(n));
    CompensatedSum tail; // sum over j > k of mass_j / x_j
    for (int k = n - 1; k >= 0; --k) {
        double contrib = p.value(k) * g.dx() / g.node(k);
        out[static_cast<std::size_t>(k)] = tail.value() + 0.5 * contrib;
        tail.add(contrib);
    }
    return out;
}

} // namespace detail

/// S[p](x) = integral_x^inf p(u)/u du: the density of eps * W for
/// eps ~ Uniform([0,1]) and W ~ p. Each midpoint atom m_j at x_j maps to a
/// uniform layer m_j / x_j on [0, x_j]; node values are the exact cell
/// averages of that image (the boundary cell holds exactly half its own
/// atom's layer). The image is nonincreasing and has the same mass and
/// half the mean of p.
inline Density apply_S(const Density& p) {
    return Density::from_values(p.grid(), detail::s_image_values(p), p.mass_leak());
}

/// Exact mean adjustment (wealth-axis rescale); leaves mass_leak growth to
/// whatever spills past x_max when stretching.
inline Density with_mean(const Density& p, double target_mean) {
    if (!(target_mean > 0.0))
        throw std::invalid_argument("with_mean: target mean must be positive");
    std::vector<double> v(p.values().begin(), p.values().end());
    double leak = detail::rescale_to_mean(p.grid(), v, target_mean);
    return Density::from_values(p.grid(), std::move(v), p.mass_leak() + leak);
}

/// One Immediate Exchange day in the infinite-population limit:
/// T[p] = S[p] * S[p] (convolution).
inline Density apply_T(const Density& p) {
    Density s = apply_S(p);
    auto conv = detail::half_split_convolution(p.grid(), s.values(), s.values());
    double leak = detail::rescale_to_mean(p.grid(), conv.values, mean_wealth(p));
    return Density::from_values(p.grid(), std::move(conv.values),
                                s.mass_leak() + conv.leak + leak);
}

/// One Directed Random Market day: T_D[p] = (p * S[p]) / 2 + S[p] / 2.
/// The convolution is the winner branch (wealth plus a won fraction), the
/// plain S-image the loser branch (wealth reduced to a kept fraction).
inline Density apply_TD(const Density& p) {
    Density s = apply_S(p);
    auto conv = detail::half_split_convolution(p.grid(), p.values(), s.values());
    std::vector<double> out(conv.values.size());
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = 0.5 * conv.values[k] + 0.5 * s.value(static_cast<int>(k));
    double leak = detail::rescale_to_mean(p.grid(), out, mean_wealth(p));
    return Density::from_values(p.grid(), std::move(out),
                                s.mass_leak() + 0.5 * conv.leak + leak);
}

/// Mixed-model day: T_M[p] = mu T_D[p] + (1 - mu) T[p]. The endpoints
/// delegate so they are bit-identical to the pure operators.
inline Density apply_TM(const Density& p, double mu) {
    if (!(mu >= 0.0 && mu <= 1.0))
        throw std::invalid_argument("apply_TM: mu must lie in [0, 1]");
    if (mu == 0.0) return apply_T(p);
    if (mu == 1.0) return apply_TD(p);

    Density t = apply_T(p);
    Density td = apply_TD(p);
    std::vector<double> out(static_cast<std::size_t>(p.grid().size()));
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = mu * td.value(static_cast<int>(k)) + (1.0 - mu) * t.value(static_cast<int>(k));
    // both branches carry mean(p) and mass 1, so the combination needs no
    // further adjustment; leaks blend convexly.
    double leak = mu * td.mass_leak() + (1.0 - mu) * t.mass_leak();
    return Density::from_values(p.grid(), std::move(out), leak);
}

inline Density apply_model(const Density& p, const ModelKind& model) {
    return apply_TM(p, model.mu());
}

/// Direct, unfactored quadrature of the explicit triple-integral form of T:
/// for every output point the two inner integrals of p(u)/u are re-summed
/// from scratch, giving an O(n^3) evaluation that shares no intermediate
/// state with apply_T. Serves as the equivalence oracle for the fast path.
inline Density brute_force_T(const Density& p) {
    const Grid& g = p.grid();
    const int n = g.size();
    if (n > 1024)
        throw std::invalid_argument("brute_force_T: refusing n > 1024 (O(n^3) cost guard)");

    const double dx = g.dx();
    // inner integral  S(x_j) = int_{x_j}^inf p(u)/u du, summed directly.
    auto s_at = [&](int j) {
        double acc = 0.5 * p.value(j) / g.node(j);
        for (int i = j + 1; i < n; ++i) acc += p.value(i) / g.node(i);
        return acc * dx;
    };

    // outer integral over v for an evaluation point at edge m*dx: the
    // midpoints of cells 0..m-1 tile [0, m*dx] exactly.
    std::vector<double> edge(static_cast<std::size_t>(n) + 1, 0.0);
    for (int m = 1; m <= n; ++m) {
        double acc = 0.0;
        for (int j = 0; j < m; ++j) acc += s_at(j) * s_at(m - 1 - j);
        edge[static_cast<std::size_t>(m)] = acc * dx;
    }

    std::vector<double> values(static_cast<std::size_t>(n));
    CompensatedSum kept;
    for (int k = 0; k < n; ++k) {
        double cell = 0.5 * (edge[static_cast<std::size_t>(k)] + edge[static_cast<std::size_t>(k) + 1]) * dx;
        values[static_cast<std::size_t>(k)] = cell / dx;
        kept.add(cell);
    }
    double leak = std::max(0.0, 1.0 - kept.value());
    leak += detail::rescale_to_mean(g, values, mean_wealth(p));
    return Density::from_values(g, std::move(values), p.mass_leak() + leak);
}

/// Per-step record of the iteration driver.
struct TraceRow {
    int t = 0;
    double m1 = 0.0;
    double m_alpha = 0.0;
    double ks_consecutive = std::numeric_limits<double>::quiet_NaN(); // NaN at t = 0
    std::optional<double> ks_to_target;      // closed-form target only
    std::optional<double> d_alpha_to_target; // same, and only for alpha in (1, 2)
    double mass_leak = 0.0;
};

struct IterationTrace {
    double alpha = 1.5; // order of the tracked moment
    std::vector<TraceRow> rows;
};

struct IterateResult {
    Density density;
    IterationTrace trace;
    bool converged = false;
    int steps = 0;
};

namespace detail {

/// sup over a log-spaced s window of |phat - qhat| / s^alpha; the trace's
/// lightweight counterpart of the transform metric.
inline double transform_metric(const Density& p, const Density& q, double alpha,
                               const std::vector<double>& svec) {
    const Grid& g = p.grid();
    double sup = 0.0;
    for (double s : svec) {
        const double step = std::exp(-s * g.dx());
        double kernel = std::exp(-s * g.node(0));
        CompensatedSum acc;
        for (int k = 0; k < g.size(); ++k) {
            acc.add((p.value(k) - q.value(k)) * kernel);
            kernel *= step;
        }
        sup = std::max(sup, std::abs(acc.value() * g.dx()) / std::pow(s, alpha));
    }
    return sup;
}

} // namespace detail

/// p_{t+1} = O[p_t] for the model's day operator O, stopping when the KS
/// distance between consecutive iterates falls below stop_tol or max_steps
/// is exhausted. Stopping is deliberately based on consecutive iterates:
/// the mixed model has no closed-form equilibrium to measure against.
/// Throws TruncationError once the cumulative mass leak exceeds 1%.
inline IterateResult iterate(const Density& p0, const ModelKind& model, int max_steps,
                             double stop_tol, double trace_alpha = 1.5) {
    if (!(stop_tol > 0.0))
        throw std::invalid_argument("iterate: stop_tol must be positive");
    if (max_steps < 0)
        throw std::invalid_argument("iterate: max_steps must be nonnegative");

    const double w = mean_wealth(p0);
    std::optional<Cdf> target;
    std::optional<Density> target_density;
    std::vector<double> svec;
    if (model.has_closed_form_equilibrium()) {
        target = Cdf::analytic(model.equilibrium_cdf(w));
        if (trace_alpha > 1.0 && trace_alpha < 2.0) {
            target_density = model.equilibrium_density(w, p0.grid());
            svec = log_spaced(1e-3 / w, 1e3 / w, 64);
        }
    }

    auto make_row = [&](int t, const Density& d, double ks_consec) {
        TraceRow row;
        row.t = t;
        row.m1 = mean_wealth(d);
        row.m_alpha = moment(d, trace_alpha);
        row.ks_consecutive = ks_consec;
        if (target) row.ks_to_target = ks_distance(ecdf(d), *target);
        if (target_density)
            row.d_alpha_to_target =
                detail::transform_metric(d, *target_density, trace_alpha, svec);
        row.mass_leak = d.mass_leak();
        return row;
    };

    IterateResult result{p0, IterationTrace{trace_alpha, {}}, false, 0};
    result.trace.rows.push_back(make_row(0, p0, std::numeric_limits<double>::quiet_NaN()));

    for (int t = 1; t <= max_steps; ++t) {
        Density next = apply_model(result.density, model);
        double ks = ks_between_densities(result.density, next);
        result.density = std::move(next);
        result.steps = t;
        result.trace.rows.push_back(make_row(t, result.density, ks));
        if (result.density.mass_leak() > 0.01)
            throw TruncationError("iterate: cumulative mass leak exceeds 1%; increase x_max");
        if (ks < stop_tol) {
            result.converged = true;
            break;
        }
    }
    return result;
}

} // namespace kinex
