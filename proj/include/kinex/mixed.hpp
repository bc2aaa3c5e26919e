#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "kinex/errors.hpp"
#include "kinex/gamma.hpp"

namespace kinex {

/// Parameters of the mixed-model equilibrium in transform space. With
/// h(s) = (1/s) integral_0^s phat, the equilibrium satisfies the implicit
/// equation (1 - h)^(2-mu) = C s^(2-mu) h^2. The integration constant is
/// pinned by the mean: expanding at s -> 0 with h ~ 1 - (w/2) s forces
/// C = (w/2)^(2-mu), which the finite-difference check on h'(0) confirms.
struct MixedEquilibriumSpec {
    double mu;
    double w;

    MixedEquilibriumSpec(double mu_, double w_) : mu(mu_), w(w_) {
        if (!(mu >= 0.0 && mu <= 1.0))
            throw std::invalid_argument("MixedEquilibriumSpec: mu must lie in [0, 1]");
        if (!(w > 0.0) || !std::isfinite(w))
            throw std::invalid_argument("MixedEquilibriumSpec: mean must be positive and finite");
    }

    double constant() const { return std::pow(0.5 * w, 2.0 - mu); }
};

namespace detail {

/// Safeguarded bisection + Newton polish for a monotone root in [lo, hi].
template <class F, class DF>
double polish_root(F&& f, DF&& df, double lo, double hi, double tol) {
    double flo = f(lo);
    while (hi - lo > tol) {
        double mid = 0.5 * (lo + hi);
        double fm = f(mid);
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    double x = 0.5 * (lo + hi);
    for (int i = 0; i < 3; ++i) {
        double d = df(x);
        if (d == 0.0) break;
        double step = f(x) / d;
        double next = x - step;
        if (next <= lo || next >= hi) break;
        x = next;
    }
    return x;
}

/// h(s) continued to s < 0: the same separable solution runs on the h > 1
/// branch, (h - 1)^(2-mu) = C |s|^(2-mu) h^2, valid up to the branch point
/// where 2 - mu h(s) hits zero. Central finite differences at s = 0 need
/// this side; callers stay well inside |s| < 1/(2w).
inline double solve_h_negative(const MixedEquilibriumSpec& spec, double s_abs) {
    const double A = spec.constant() * std::pow(s_abs, 2.0 - spec.mu);
    auto f = [&](double h) { return std::pow(h - 1.0, 2.0 - spec.mu) - A * h * h; };
    auto df = [&](double h) {
        return (2.0 - spec.mu) * std::pow(h - 1.0, 1.0 - spec.mu) - 2.0 * A * h;
    };
    double hi = 1.0 + 2.0 * spec.w * s_abs;
    int guard = 0;
    while (f(hi) <= 0.0) {
        hi = 1.0 + 2.0 * (hi - 1.0);
        if (++guard > 60)
            throw NumericInstabilityError("solve_h: no bracket on the h > 1 branch");
    }
    // f(1) = -A < 0: the root is interior.
    return polish_root(f, df, 1.0, hi, 1e-12);
}

} // namespace detail

/// The unique root h in (0, 1] of (1 - h)^(2-mu) = C s^(2-mu) h^2, found by
/// bisection to absolute tolerance 1e-12 (plus a Newton polish). h(0) = 1
/// and h decreases strictly in s.
inline double solve_h(const MixedEquilibriumSpec& spec, double s) {
    if (!(s >= 0.0))
        throw std::invalid_argument("solve_h: s must be nonnegative");
    if (s == 0.0) return 1.0;
    const double A = spec.constant() * std::pow(s, 2.0 - spec.mu);
    auto f = [&](double h) { return std::pow(1.0 - h, 2.0 - spec.mu) - A * h * h; };
    auto df = [&](double h) {
        return -(2.0 - spec.mu) * std::pow(1.0 - h, 1.0 - spec.mu) - 2.0 * A * h;
    };
    // f(0+) = 1 > 0, f(1) = -A < 0: the bracket always holds for s > 0.
    return detail::polish_root(f, df, 1e-15, 1.0, 1e-12);
}

/// phat(s) = [s h(s)]' = s h'(s) + h(s), with h' taken from the separable
/// ODE h' = ((2 - mu)/s) (h - 1) h / (2 - mu h) rather than from numerical
/// differentiation.
inline double phat_mixed(const MixedEquilibriumSpec& spec, double s) {
    if (!(s >= 0.0))
        throw std::invalid_argument("phat_mixed: s must be nonnegative");
    if (s == 0.0) return 1.0;
    const double h = solve_h(spec, s);
    const double shp = (2.0 - spec.mu) * (h - 1.0) * h / (2.0 - spec.mu * h);
    return shp + h;
}

/// Closed-form equilibrium moments of the mixed model, k = 1..4 (orders the
/// derivation reaches; higher ones are not available).
inline double mixed_moment(double mu, double w, int k) {
    if (!(mu >= 0.0 && mu <= 1.0))
        throw std::invalid_argument("mixed_moment: mu must lie in [0, 1]");
    if (!(w > 0.0))
        throw std::invalid_argument("mixed_moment: mean must be positive");
    switch (k) {
    case 1: return w;
    case 2: return 3.0 / (2.0 - mu) * w * w;
    case 3: return 3.0 * (4.0 + mu) / ((2.0 - mu) * (2.0 - mu)) * w * w * w;
    case 4:
        return 5.0 * (mu * mu + 8.0 * mu + 12.0) /
               ((2.0 - mu) * (2.0 - mu) * (2.0 - mu)) * w * w * w * w;
    default:
        throw std::invalid_argument("mixed_moment: k must be 1..4");
    }
}

/// Gamma parameters matching the mixed equilibrium's first two moments:
/// alpha = (2 - mu)/(1 + mu), beta = (1 + mu)/(2 - mu) w.
inline GammaParams gamma_fit_two_moments(double mu, double w) {
    if (!(mu >= 0.0 && mu <= 1.0))
        throw std::invalid_argument("gamma_fit_two_moments: mu must lie in [0, 1]");
    return GammaParams((2.0 - mu) / (1.0 + mu), (1.0 + mu) / (2.0 - mu) * w);
}

/// The shape parameter 2^(1 - 2 mu) reported from simulation fits; close to
/// but distinct from the two-moment fit's (2 - mu)/(1 + mu).
inline double heinsalu_shape(double mu) {
    if (!(mu >= 0.0 && mu <= 1.0))
        throw std::invalid_argument("heinsalu_shape: mu must lie in [0, 1]");
    return std::exp2(1.0 - 2.0 * mu);
}

/// M_4(two-moment Gamma fit) - M_4(mixed equilibrium)
///   = mu (mu - 1) / (2 - mu)^3 * w^4:
/// zero exactly at mu = 0, 1 and strictly negative in between. The first
/// three moments agree, so this gap is what certifies that the mixed
/// equilibrium is not a Gamma distribution.
inline double fourth_moment_gap(double mu, double w) {
    if (!(mu >= 0.0 && mu <= 1.0))
        throw std::invalid_argument("fourth_moment_gap: mu must lie in [0, 1]");
    double d = 2.0 - mu;
    return mu * (mu - 1.0) / (d * d * d) * w * w * w * w;
}

namespace detail {

/// h on both sides of 0 for the differencer.
inline double h_signed(const MixedEquilibriumSpec& spec, double s) {
    if (s >= 0.0) return solve_h(spec, s);
    return solve_h_negative(spec, -s);
}

} // namespace detail

/// M_k = (-1)^k (k + 1) h^(k)(0), with h^(k)(0) estimated by
/// Richardson-extrapolated central differences of the implicit solution
/// (step sequence s0 / 2^j, j = 0..6). Independent numerical route to the
/// closed-form moments. Throws NumericInstabilityError if the tableau does
/// not settle.
inline double moment_from_transform(const MixedEquilibriumSpec& spec, int k) {
    if (k < 1 || k > 4)
        throw std::invalid_argument("moment_from_transform: k must be 1..4");

    auto H = [&](double s) { return detail::h_signed(spec, s); };
    auto diff = [&](double t) {
        switch (k) {
        case 1: return (H(t) - H(-t)) / (2.0 * t);
        case 2: return (H(t) - 2.0 + H(-t)) / (t * t);
        case 3: return (H(2.0 * t) - 2.0 * H(t) + 2.0 * H(-t) - H(-2.0 * t)) / (2.0 * t * t * t);
        default:
            return (H(2.0 * t) - 4.0 * H(t) + 6.0 - 4.0 * H(-t) + H(-2.0 * t)) / (t * t * t * t);
        }
    };

    // Central stencils have even error series, so each Richardson level
    // removes a factor-4 term. The smallest steps trade truncation for
    // roundoff; the best-settled tableau entry wins.
    constexpr int levels = 7;
    const double s0 = 0.1 / spec.w;
    double tableau[levels][levels];
    double best = 0.0, best_err = std::numeric_limits<double>::infinity();
    for (int j = 0; j < levels; ++j) {
        tableau[j][0] = diff(s0 / std::exp2(j));
        double pow4 = 1.0;
        for (int m = 1; m <= j; ++m) {
            pow4 *= 4.0;
            tableau[j][m] =
                (pow4 * tableau[j][m - 1] - tableau[j - 1][m - 1]) / (pow4 - 1.0);
            double err = std::max(std::abs(tableau[j][m] - tableau[j][m - 1]),
                                  std::abs(tableau[j][m] - tableau[j - 1][m - 1]));
            if (err < best_err) {
                best_err = err;
                best = tableau[j][m];
            }
        }
    }
    if (!(best_err <= 1e-2 * std::max(1.0, std::abs(best))))
        throw NumericInstabilityError("moment_from_transform: extrapolation did not converge");

    double sign = (k % 2 == 0) ? 1.0 : -1.0;
    return sign * (k + 1) * best;
}

} // namespace kinex
