#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "kinex/errors.hpp"
#include "kinex/grid.hpp"
#include "kinex/numerics.hpp"

namespace kinex {

/// Probability density on a Grid: one nonnegative value per midpoint node,
/// normalized so that sum(values) * dx == 1. Equivalently, cell k carries
/// probability mass values[k] * dx.
///
/// mass_leak accumulates the probability removed by domain truncation and
/// renormalization since construction; operators propagate and grow it, so
/// truncation error stays observable instead of silently contaminating
/// iterations. Instances are immutable.
class Density {
public:
    /// Node-sampled construction: values[k] = pdf(node(k)), then normalized.
    /// Refuses grids that hold less than 0.999 of the mass before
    /// renormalization.
    static Density from_pdf(const Grid& grid, const std::function<double(double)>& pdf) {
        std::vector<double> v(static_cast<std::size_t>(grid.size()));
        for (int k = 0; k < grid.size(); ++k) {
            double p = pdf(grid.node(k));
            if (!std::isfinite(p) || p < 0.0)
                throw std::invalid_argument("Density::from_pdf: pdf must be finite and nonnegative on nodes");
            v[static_cast<std::size_t>(k)] = p;
        }
        return finish_construction(grid, std::move(v));
    }

    /// Cell-averaged construction from a cumulative distribution function:
    /// values[k] = (F(edge(k+1)) - F(edge(k))) / dx. Exact cell masses; the
    /// method of choice when the pdf has an integrable singularity that
    /// node sampling would under-resolve.
    static Density from_cdf(const Grid& grid, const std::function<double(double)>& cdf) {
        std::vector<double> v(static_cast<std::size_t>(grid.size()));
        double prev = cdf(0.0);
        for (int k = 0; k < grid.size(); ++k) {
            double next = cdf(grid.edge(k + 1));
            double mass = next - prev;
            if (!std::isfinite(mass) || mass < -1e-14)
                throw std::invalid_argument("Density::from_cdf: cdf must be finite and nondecreasing");
            v[static_cast<std::size_t>(k)] = std::max(mass, 0.0) / grid.dx();
            prev = next;
        }
        return finish_construction(grid, std::move(v));
    }

    /// Adopt raw nonnegative node values (normalizing them), with a leak
    /// total carried over from whatever produced them. Used by operators.
    static Density from_values(const Grid& grid, std::vector<double> values, double mass_leak = 0.0) {
        if (static_cast<int>(values.size()) != grid.size())
            throw std::invalid_argument("Density::from_values: value count does not match grid");
        if (!(mass_leak >= 0.0))
            throw std::invalid_argument("Density::from_values: mass_leak must be nonnegative");
        for (double x : values)
            if (!std::isfinite(x) || x < 0.0)
                throw std::invalid_argument("Density::from_values: values must be finite and nonnegative");
        double raw = compensated_total(values) * grid.dx();
        if (!(raw > 0.0))
            throw std::invalid_argument("Density::from_values: zero total mass");
        for (double& x : values) x /= raw;
        return Density(grid, std::move(values), mass_leak);
    }

    const Grid& grid() const { return grid_; }
    std::span<const double> values() const { return values_; }
    double value(int k) const { return values_[static_cast<std::size_t>(k)]; }
    double mass_leak() const { return mass_leak_; }

    /// Quadrature mass; 1 up to rounding by construction.
    double mass() const { return compensated_total(values_) * grid_.dx(); }

    /// Value at the node nearest to x (convenience for point probes).
    double value_near(double x) const { return value(grid_.cell_of(x)); }

    /// Cumulative mass of cells 0..k-1, i.e. the CDF at edge(k).
    std::vector<double> cumulative_edges() const {
        std::vector<double> F(values_.size() + 1, 0.0);
        CompensatedSum acc;
        for (std::size_t k = 0; k < values_.size(); ++k) {
            acc.add(values_[k] * grid_.dx());
            F[k + 1] = acc.value();
        }
        return F;
    }

    /// Density of c*X on a target grid, by exact reallocation of the
    /// piecewise-constant cell masses. Mass scaled past the target domain
    /// is recorded as leak.
    Density rescaled(double c, const Grid& target) const {
        if (!(c > 0.0) || !std::isfinite(c))
            throw std::invalid_argument("Density::rescaled: scale must be positive and finite");
        std::vector<double> out(static_cast<std::size_t>(target.size()), 0.0);
        // CDF of c*X at y is F_X(y / c); F_X is piecewise linear in the edges.
        auto cdf_scaled = [&](double y) { return cdf_at(y / c); };
        double prev = cdf_scaled(0.0);
        CompensatedSum kept;
        for (int k = 0; k < target.size(); ++k) {
            double next = cdf_scaled(target.edge(k + 1));
            double m = std::max(next - prev, 0.0);
            out[static_cast<std::size_t>(k)] = m / target.dx();
            kept.add(m);
            prev = next;
        }
        double leak = std::max(0.0, 1.0 - kept.value());
        return from_values(target, std::move(out), mass_leak_ + leak);
    }

    /// Piecewise-linear CDF value at x (linear within each cell).
    double cdf_at(double x) const {
        if (x <= 0.0) return 0.0;
        if (x >= grid_.x_max()) return 1.0;
        int k = grid_.cell_of(x);
        CompensatedSum acc;
        for (int j = 0; j < k; ++j) acc.add(values_[static_cast<std::size_t>(j)] * grid_.dx());
        return acc.value() + values_[static_cast<std::size_t>(k)] * (x - grid_.edge(k));
    }

private:
    Density(const Grid& grid, std::vector<double> values, double leak)
        : grid_(grid), values_(std::move(values)), mass_leak_(leak) {}

    static Density finish_construction(const Grid& grid, std::vector<double> v) {
        double raw = compensated_total(v) * grid.dx();
        if (raw < 0.999)
            throw TruncationError("Density: grid holds less than 0.999 of the distribution's mass; increase x_max");
        for (double& x : v) x /= raw;
        return Density(grid, std::move(v), std::max(0.0, 1.0 - raw));
    }

    Grid grid_;
    std::vector<double> values_;
    double mass_leak_;
};

/// Quadrature moment M_k = sum x_j^k values[j] dx; any real order k >= 0.
inline double moment(const Density& p, double order) {
    if (!(order >= 0.0))
        throw std::invalid_argument("moment: order must be nonnegative");
    const Grid& g = p.grid();
    CompensatedSum acc;
    for (int k = 0; k < g.size(); ++k)
        acc.add(std::pow(g.node(k), order) * p.value(k));
    return acc.value() * g.dx();
}

inline double mean_wealth(const Density& p) { return moment(p, 1.0); }

/// Moments M_k for a set of orders, tagged with how they were obtained.
struct MomentReport {
    enum class Method { Quadrature, MonteCarlo, ClosedForm };
    std::vector<double> orders;
    std::vector<double> values;
    Method method = Method::Quadrature;

    static const char* method_name(Method m) {
        switch (m) {
        case Method::Quadrature: return "quadrature";
        case Method::MonteCarlo: return "monte-carlo";
        case Method::ClosedForm: return "closed-form";
        }
        return "?";
    }
};

inline MomentReport moment_report(const Density& p, std::vector<double> orders) {
    MomentReport r;
    r.method = MomentReport::Method::Quadrature;
    for (double k : orders) r.values.push_back(moment(p, k));
    r.orders = std::move(orders);
    return r;
}

/// Uniform density on [a, b] (cell-averaged, exact overlap masses).
inline Density uniform_density(double a, double b, const Grid& grid) {
    if (!(0.0 <= a && a < b))
        throw std::invalid_argument("uniform_density: need 0 <= a < b");
    auto cdf = [a, b](double x) {
        if (x <= a) return 0.0;
        if (x >= b) return 1.0;
        return (x - a) / (b - a);
    };
    return Density::from_cdf(grid, cdf);
}

/// Exponential density with the given mean (cell-averaged).
inline Density exponential_density(double mean, const Grid& grid) {
    if (!(mean > 0.0))
        throw std::invalid_argument("exponential_density: mean must be positive");
    auto cdf = [mean](double x) { return x <= 0.0 ? 0.0 : 1.0 - std::exp(-x / mean); };
    return Density::from_cdf(grid, cdf);
}

} // namespace kinex
