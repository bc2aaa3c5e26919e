#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "kinex/density.hpp"
#include "kinex/errors.hpp"
#include "kinex/numerics.hpp"
#include "kinex/operators.hpp"

namespace kinex {

/// Logarithmically spaced transform-variable grid; stands in for the
/// continuum sup over s > 0 in the d_alpha metric.
struct SGrid {
    std::vector<double> s;

    static SGrid logarithmic(double s_min, double s_max, int m) {
        if (!(s_min > 0.0) || !(s_max > s_min))
            throw std::invalid_argument("SGrid: need 0 < s_min < s_max");
        if (m < 32)
            throw std::invalid_argument("SGrid: need at least 32 points");
        return SGrid{log_spaced(s_min, s_max, m)};
    }

    /// Default window for the d_alpha sup with mean wealth w. The ratio
    /// |phat - qhat| / s^alpha vanishes at both ends (O(s^{2-alpha}) for
    /// equal means as s -> 0, O(s^{-alpha}) as s -> inf), so the sup sits
    /// in the interior of [1e-3/w, 1e3/w].
    static SGrid standard(double w) { return logarithmic(1e-3 / w, 1e3 / w, 256); }

    /// Window for absolute transform diagnostics (fixed-point residuals,
    /// route-consistency checks) of a density carried on cells of width dx.
    /// Beyond s ~ 1/dx the kernel e^{-sx} varies inside a single cell and
    /// the discrete transform no longer tracks the continuum one, so the
    /// top is capped at s dx = 1/2.
    static SGrid transform_window(double w, const Grid& grid) {
        double hi = std::min(1e3 / w, 0.5 / grid.dx());
        return logarithmic(1e-3 / w, hi, 256);
    }
};

/// phat(s) = integral e^{-sx} p(x) dx by midpoint quadrature. The kernel
/// along the nodes is built by recurrence (one exp per call); the relative
/// drift of ~n*eps is far below quadrature error.
inline double laplace(const Density& p, double s) {
    if (!(s >= 0.0))
        throw std::invalid_argument("laplace: s must be nonnegative");
    const Grid& g = p.grid();
    const double step = std::exp(-s * g.dx());
    double kernel = std::exp(-s * g.node(0));
    CompensatedSum acc;
    for (int k = 0; k < g.size(); ++k) {
        acc.add(p.value(k) * kernel);
        kernel *= step;
    }
    return acc.value() * g.dx();
}

namespace detail {

/// integral_0^s phat(s') ds' by composite Simpson on geometrically graded
/// panels (phat's curvature concentrates near s = 0), refined until stable.
inline double transform_integral(const Density& p, double s) {
    if (s == 0.0) return 0.0;
    auto phat = [&](double t) { return laplace(p, t); };

    auto pass = [&](int subs) {
        // panel boundaries: [0, s*q], then geometric with ratio ~1.35.
        CompensatedSum acc;
        double a = 0.0;
        double b = s * 1e-4;
        while (true) {
            acc.add(simpson(phat, a, b, subs));
            if (b >= s) break;
            a = b;
            b = std::min(s, b * 1.35);
        }
        return acc.value();
    };

    double coarse = pass(4);
    for (int subs = 8; subs <= 32; subs *= 2) {
        double fine = pass(subs);
        if (std::abs(fine - coarse) <= 1e-10 * std::max(1.0, std::abs(fine)))
            return fine;
        coarse = fine;
    }
    return coarse;
}

/// Cumulative integral of phat at every point of an ascending s-grid.
inline std::vector<double> cumulative_transform_integral(const Density& p,
                                                         const std::vector<double>& s) {
    auto phat = [&](double t) { return laplace(p, t); };
    std::vector<double> out(s.size());
    CompensatedSum acc;
    acc.add(transform_integral(p, s.front()));
    out.front() = acc.value();
    for (std::size_t j = 1; j < s.size(); ++j) {
        acc.add(simpson(phat, s[j - 1], s[j], 8));
        out[j] = acc.value();
    }
    return out;
}

} // namespace detail

/// L[S[p]](s) = (1/s) integral_0^s phat, evaluated by quadrature of
/// laplace(p, .) rather than through apply_S; the two routes agreeing is a
/// standing consistency check on the discretization.
inline double laplace_of_S(const Density& p, double s) {
    if (!(s > 0.0))
        throw std::invalid_argument("laplace_of_S: s must be positive");
    return detail::transform_integral(p, s) / s;
}

/// Transform values of p over an s-grid.
struct LaplaceEval {
    std::vector<double> s;
    std::vector<double> phat;
};

inline LaplaceEval eval_transform(const Density& p, const SGrid& sgrid) {
    LaplaceEval out;
    out.s = sgrid.s;
    out.phat.reserve(sgrid.s.size());
    for (double s : sgrid.s) out.phat.push_back(laplace(p, s));
    return out;
}

/// d_alpha(p, q) = sup_{s>0} |phat(s) - qhat(s)| / s^alpha, approximated on
/// the given s-grid (a lower bound for the true sup). Requires equal means:
/// otherwise |phat - qhat| ~ |M1(p) - M1(q)| s near 0 and the ratio
/// diverges for alpha > 1.
inline double d_alpha(const Density& p, const Density& q, double alpha, const SGrid& sgrid) {
    if (!(alpha > 1.0 && alpha < 2.0))
        throw std::invalid_argument("d_alpha: alpha must lie in (1, 2)");
    double m1p = mean_wealth(p), m1q = mean_wealth(q);
    if (std::abs(m1p - m1q) > 1e-3 * std::max(std::abs(m1p), std::abs(m1q)))
        throw std::invalid_argument("d_alpha: densities must share their mean");

    double sup = 0.0;
    for (double s : sgrid.s)
        sup = std::max(sup, std::abs(laplace(p, s) - laplace(q, s)) / std::pow(s, alpha));
    return sup;
}

struct ContractionRow {
    int pair_id = 0;
    int t = 0;
    double d_alpha_t = 0.0;
    std::optional<double> ratio; // d_t / d_{t-1}; empty at t = 0 or under a zero divisor
};

struct ContractionTable {
    double alpha = 1.5;
    double bound = 0.0; // 2 / (alpha + 1)
    std::vector<ContractionRow> rows;
};

/// Observed per-step d_alpha contraction factors of T on density pairs.
inline ContractionTable contraction_study(const std::vector<std::pair<Density, Density>>& pairs,
                                          double alpha, int steps) {
    if (steps < 1)
        throw std::invalid_argument("contraction_study: need at least one step");
    ContractionTable table;
    table.alpha = alpha;
    table.bound = 2.0 / (alpha + 1.0);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        Density p = pairs[i].first;
        Density q = pairs[i].second;
        SGrid sgrid = SGrid::standard(std::max(mean_wealth(p), 1e-12));
        double prev = d_alpha(p, q, alpha, sgrid);
        table.rows.push_back({static_cast<int>(i), 0, prev, std::nullopt});
        for (int t = 1; t <= steps; ++t) {
            p = apply_T(p);
            q = apply_T(q);
            double cur = d_alpha(p, q, alpha, sgrid);
            std::optional<double> ratio;
            if (prev > 0.0) ratio = cur / prev;
            table.rows.push_back({static_cast<int>(i), t, cur, ratio});
            prev = cur;
        }
    }
    return table;
}

/// Residual of the transform-space fixed-point identity for the model's
/// day operator, sup over the s-grid:
///   IE:    phat = ((1/s) I)^2
///   DRM:   phat = (1/2s) (phat + 1) I
///   mixed: the mu-weighted combination of the two,
/// with I = integral_0^s phat. Zero (up to discretization) exactly at the
/// model's equilibrium.
inline double fixed_point_residual(const Density& p, const ModelKind& model, const SGrid& sgrid) {
    const double mu = model.mu();
    std::vector<double> I = detail::cumulative_transform_integral(p, sgrid.s);
    double sup = 0.0;
    for (std::size_t j = 0; j < sgrid.s.size(); ++j) {
        double s = sgrid.s[j];
        double ph = laplace(p, s);
        double ie = (I[j] / s) * (I[j] / s);
        double drm = (ph + 1.0) * I[j] / (2.0 * s);
        double rhs = mu * drm + (1.0 - mu) * ie;
        sup = std::max(sup, std::abs(ph - rhs));
    }
    return sup;
}

} // namespace kinex
