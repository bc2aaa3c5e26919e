#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "kinex/density.hpp"
#include "kinex/errors.hpp"

namespace kinex {

/// Finite multiset of agent wealths, the Monte Carlo output container.
struct EmpiricalSample {
    std::vector<double> wealths;
    std::uint64_t seed = 0;

    void validate() const {
        if (wealths.empty())
            throw std::invalid_argument("EmpiricalSample: empty sample");
        for (double x : wealths)
            if (!std::isfinite(x) || x < 0.0)
                throw std::invalid_argument("EmpiricalSample: wealths must be finite and nonnegative");
    }
};

/// A cumulative distribution function in one of three concrete forms:
/// a right-continuous step function (empirical), a piecewise-linear
/// function on grid edges (from a Density), or a closed-form callable.
class Cdf {
public:
    enum class Kind { Step, PiecewiseLinear, Analytic };

    static Cdf step_from_sample(EmpiricalSample sample) {
        sample.validate();
        std::sort(sample.wealths.begin(), sample.wealths.end());
        return Cdf(Kind::Step, std::move(sample.wealths), {}, nullptr, 0.0);
    }

    static Cdf of_density(const Density& p) {
        std::vector<double> xs(static_cast<std::size_t>(p.grid().size()) + 1);
        for (int k = 0; k <= p.grid().size(); ++k)
            xs[static_cast<std::size_t>(k)] = p.grid().edge(k);
        return Cdf(Kind::PiecewiseLinear, std::move(xs), p.cumulative_edges(), nullptr,
                   p.grid().x_max());
    }

    /// Closed-form CDF; contributes no breakpoints of its own, so it must
    /// be paired with a step or grid-backed function in ks_distance.
    static Cdf analytic(std::function<double(double)> fn) {
        return Cdf(Kind::Analytic, {}, {}, std::move(fn), 0.0);
    }

    Kind kind() const { return kind_; }
    const std::vector<double>& breakpoints() const { return xs_; }

    double operator()(double x) const {
        switch (kind_) {
        case Kind::Step: {
            auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
            return static_cast<double>(it - xs_.begin()) / static_cast<double>(xs_.size());
        }
        case Kind::PiecewiseLinear:
            return piecewise_at(x);
        case Kind::Analytic:
            return fn_(x);
        }
        return 0.0; // unreachable
    }

    /// Left limit F(x-); differs from F(x) only for step functions.
    double left_limit(double x) const {
        if (kind_ != Kind::Step) return (*this)(x);
        auto it = std::lower_bound(xs_.begin(), xs_.end(), x);
        return static_cast<double>(it - xs_.begin()) / static_cast<double>(xs_.size());
    }

    /// x_max of the backing grid; 0 when not grid-backed.
    double grid_support() const { return grid_support_; }

private:
    Cdf(Kind kind, std::vector<double> xs, std::vector<double> Fs,
        std::function<double(double)> fn, double support)
        : kind_(kind), xs_(std::move(xs)), Fs_(std::move(Fs)), fn_(std::move(fn)),
          grid_support_(support) {}

    double piecewise_at(double x) const {
        if (x <= xs_.front()) return 0.0;
        if (x >= xs_.back()) return Fs_.back();
        auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
        std::size_t i = static_cast<std::size_t>(it - xs_.begin()) - 1;
        double t = (x - xs_[i]) / (xs_[i + 1] - xs_[i]);
        return Fs_[i] + t * (Fs_[i + 1] - Fs_[i]);
    }

    Kind kind_;
    std::vector<double> xs_; // sorted sample points or grid edges
    std::vector<double> Fs_; // cumulative values at edges (PiecewiseLinear)
    std::function<double(double)> fn_;
    double grid_support_;
};

inline Cdf ecdf(const EmpiricalSample& sample) { return Cdf::step_from_sample(sample); }
inline Cdf ecdf(const Density& p) { return Cdf::of_density(p); }

/// sup |a - b| over the union of both functions' breakpoints, including
/// left limits at step discontinuities. A lower bound on the true sup that
/// is exact when at least one side is piecewise constant between points.
inline double ks_distance(const Cdf& a, const Cdf& b) {
    if (a.kind() == Cdf::Kind::Analytic && b.kind() == Cdf::Kind::Analytic)
        throw std::invalid_argument("ks_distance: need at least one sampled/grid-backed side");
    if (a.kind() == Cdf::Kind::PiecewiseLinear && b.kind() == Cdf::Kind::PiecewiseLinear &&
        a.grid_support() != b.grid_support())
        throw SupportError("ks_distance: cumulative functions live on different supports");

    double sup = 0.0;
    auto visit = [&](double x) {
        sup = std::max(sup, std::abs(a(x) - b(x)));
        sup = std::max(sup, std::abs(a.left_limit(x) - b.left_limit(x)));
    };
    for (double x : a.breakpoints()) visit(x);
    for (double x : b.breakpoints()) visit(x);
    return sup;
}

/// KS distance between densities sharing one grid: max |cumulative
/// difference| over cell edges.
inline double ks_between_densities(const Density& p, const Density& q) {
    if (p.grid() != q.grid())
        throw SupportError("ks_between_densities: densities on different grids");
    CompensatedSum acc;
    double sup = 0.0;
    for (int k = 0; k < p.grid().size(); ++k) {
        acc.add((p.value(k) - q.value(k)) * p.grid().dx());
        sup = std::max(sup, std::abs(acc.value()));
    }
    return sup;
}

} // namespace kinex
