#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include "kinex/density.hpp"
#include "kinex/grid.hpp"

namespace kinex {

/// Shape/scale parameters of a Gamma distribution; mean = shape * scale.
struct GammaParams {
    double shape; // alpha, dimensionless
    double scale; // beta, currency

    GammaParams(double alpha, double beta) : shape(alpha), scale(beta) {
        if (!std::isfinite(alpha) || alpha <= 0.0 || !std::isfinite(beta) || beta <= 0.0)
            throw std::invalid_argument("GammaParams: shape and scale must be positive and finite");
    }
    double mean() const { return shape * scale; }
};

/// q(x) = x^(a-1) e^(-x/b) / (b^a Gamma(a)). For a < 1 the density blows
/// up at the origin; callers evaluating on midpoint nodes never hit x = 0,
/// and a direct x = 0 query returns the infinity marker.
inline double gamma_pdf(const GammaParams& params, double x) {
    if (!(x >= 0.0))
        throw std::invalid_argument("gamma_pdf: x must be nonnegative");
    const double a = params.shape, b = params.scale;
    if (x == 0.0) {
        if (a < 1.0) return std::numeric_limits<double>::infinity();
        if (a == 1.0) return 1.0 / b;
        return 0.0;
    }
    return std::exp((a - 1.0) * std::log(x) - x / b - a * std::log(b) - std::lgamma(a));
}

/// Closed-form moment M_k = b^k * prod_{j=0}^{k-1} (a + j), integer k >= 1.
inline double gamma_moment(const GammaParams& params, int k) {
    if (k < 1)
        throw std::invalid_argument("gamma_moment: order must be a positive integer");
    double out = 1.0;
    for (int j = 0; j < k; ++j) out *= params.scale * (params.shape + j);
    return out;
}

/// CDF of the shape-2 equilibrium p_w(x) = (4/w^2) x e^(-2x/w):
/// F(x) = 1 - (1 + 2x/w) e^(-2x/w).
inline double gamma2_cdf(double w, double x) {
    if (x <= 0.0) return 0.0;
    const double t = 2.0 * x / w;
    return 1.0 - (1.0 + t) * std::exp(-t);
}

/// CDF of the shape-1/2 equilibrium p_w(x) = e^(-x/2w) / sqrt(2 pi w x):
/// F(x) = erf(sqrt(x / 2w)).
inline double gamma_half_cdf(double w, double x) {
    if (x <= 0.0) return 0.0;
    return std::erf(std::sqrt(x / (2.0 * w)));
}

/// The Immediate Exchange equilibrium with mean w: Gamma(2, w/2), sampled
/// at the nodes and normalized.
inline Density gamma2_equilibrium(double w, const Grid& grid) {
    if (!(w > 0.0) || !std::isfinite(w))
        throw std::invalid_argument("gamma2_equilibrium: mean must be positive and finite");
    return Density::from_pdf(grid, [w](double x) {
        return 4.0 / (w * w) * x * std::exp(-2.0 * x / w);
    });
}

/// The Directed Random Market equilibrium with mean w: Gamma(1/2, 2w).
/// Built from exact cell averages of the CDF: the x^(-1/2) singularity at
/// the origin makes node sampling drop ~0.3 sqrt(dx) of the first cell's
/// mass, which renormalization then smears over the whole density.
inline Density gamma_half_equilibrium(double w, const Grid& grid) {
    if (!(w > 0.0) || !std::isfinite(w))
        throw std::invalid_argument("gamma_half_equilibrium: mean must be positive and finite");
    return Density::from_cdf(grid, [w](double x) { return gamma_half_cdf(w, x); });
}

} // namespace kinex
