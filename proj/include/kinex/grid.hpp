#pragma once

#include <cmath>
#include <stdexcept>

namespace kinex {

/// Uniform discretization of the wealth half-line, truncated at x_max.
/// Cell k covers [k*dx, (k+1)*dx); values live at the midpoint nodes
/// x_k = (k + 1/2)*dx. The midpoint convention keeps every evaluation
/// strictly away from x = 0, where densities such as Gamma(1/2) and
/// S-images of densities with p(0) > 0 have integrable singularities.
class Grid {
public:
    Grid(double x_max, int n) : x_max_(x_max), n_(n) {
        if (!std::isfinite(x_max) || x_max <= 0.0)
            throw std::invalid_argument("Grid: x_max must be positive and finite");
        if (n < 16)
            throw std::invalid_argument("Grid: need n >= 16 cells");
        dx_ = x_max / n;
    }

    double x_max() const { return x_max_; }
    int size() const { return n_; }
    double dx() const { return dx_; }
    /// Midpoint node of cell k.
    double node(int k) const { return (k + 0.5) * dx_; }
    /// Left edge of cell k; edge(n) == x_max.
    double edge(int k) const { return k * dx_; }
    /// Index of the cell containing x (clamped to the grid).
    int cell_of(double x) const {
        if (x <= 0.0) return 0;
        int k = static_cast<int>(x / dx_);
        return k >= n_ ? n_ - 1 : k;
    }

    bool operator==(const Grid& o) const { return x_max_ == o.x_max_ && n_ == o.n_; }
    bool operator!=(const Grid& o) const { return !(*this == o); }

    /// Default working grid for mean wealth w: the Gamma(2) tail mass
    /// beyond 20w is below 1e-15, and 4096 cells keep the O(n^2)
    /// convolution well under a second.
    static Grid standard(double w) { return Grid(20.0 * w, 4096); }

private:
    double x_max_;
    int n_;
    double dx_;
};

} // namespace kinex
