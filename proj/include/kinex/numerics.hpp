#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace kinex {

/// Neumaier-compensated accumulator. Grid sums are held to a 1e-12
/// normalization tolerance that plain left-to-right addition of ~4k terms
/// does not reliably meet.
class CompensatedSum {
public:
    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double compensated_total(std::span<const double> xs) {
    CompensatedSum acc;
    for (double x : xs) acc.add(x);
    return acc.value();
}

/// m points, logarithmically spaced on [lo, hi], endpoints included.
inline std::vector<double> log_spaced(double lo, double hi, int m) {
    if (!(lo > 0.0) || !(hi > lo)) throw std::invalid_argument("log_spaced: need 0 < lo < hi");
    if (m < 2) throw std::invalid_argument("log_spaced: need at least 2 points");
    std::vector<double> out(static_cast<std::size_t>(m));
    const double llo = std::log(lo), lhi = std::log(hi);
    for (int i = 0; i < m; ++i)
        out[static_cast<std::size_t>(i)] = std::exp(llo + (lhi - llo) * i / (m - 1));
    out.front() = lo;
    out.back() = hi;
    return out;
}

/// Composite Simpson on [a, b] with an even number of subintervals.
template <class F>
double simpson(F&& f, double a, double b, int subintervals) {
    if (subintervals < 2) subintervals = 2;
    if (subintervals % 2 != 0) ++subintervals;
    const double h = (b - a) / subintervals;
    CompensatedSum acc;
    acc.add(f(a));
    acc.add(f(b));
    for (int i = 1; i < subintervals; ++i)
        acc.add((i % 2 == 1 ? 4.0 : 2.0) * f(a + i * h));
    return acc.value() * h / 3.0;
}

} // namespace kinex
