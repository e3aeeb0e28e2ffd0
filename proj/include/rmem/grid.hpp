#ifndef RMEM_GRID_HPP
#define RMEM_GRID_HPP

#include <cmath>
#include <complex>
#include <vector>

#include "rmem/errors.hpp"

namespace rmem {

using Complex = std::complex<double>;

/// Uniform 1-D sample grid. Time grids are in nanoseconds; space grids for
/// the cell are dimensionless and span exactly [0, 1].
struct Grid {
    double start = 0.0;
    double step = 1.0;
    int n = 2;

    Grid() = default;
    Grid(double start_, double step_, int n_) : start(start_), step(step_), n(n_) {
        if (step <= 0.0) throw ConfigError("Grid: step must be > 0");
        if (n < 2) throw ConfigError("Grid: need at least 2 points");
    }

    /// Grid with n points covering [a, b] inclusive.
    static Grid over(double a, double b, int n) {
        if (!(b > a)) throw ConfigError("Grid::over: empty interval");
        return Grid(a, (b - a) / (n - 1), n);
    }

    /// Space grid for the normalized cell, z in [0, 1].
    static Grid unit_space(int n) { return over(0.0, 1.0, n); }

    double coord(int k) const { return start + k * step; }
    double end() const { return coord(n - 1); }
    double span() const { return (n - 1) * step; }

    bool operator==(const Grid& o) const {
        return n == o.n && std::abs(start - o.start) < 1e-12 * (1.0 + std::abs(start)) &&
               std::abs(step - o.step) < 1e-12 * step;
    }
};

/// Sampled complex amplitude on a uniform grid. Used for fields E, controls
/// Omega, and spin waves S alike.
struct ComplexEnvelope {
    Grid grid;
    std::vector<Complex> samples;

    ComplexEnvelope() = default;
    explicit ComplexEnvelope(const Grid& g) : grid(g), samples(g.n, Complex(0.0)) {}
    ComplexEnvelope(const Grid& g, std::vector<Complex> s) : grid(g), samples(std::move(s)) {
        if (static_cast<int>(samples.size()) != g.n)
            throw ConfigError("ComplexEnvelope: sample count does not match grid");
    }

    int size() const { return grid.n; }
    double coord(int k) const { return grid.coord(k); }

    ComplexEnvelope& operator*=(Complex a) {
        for (auto& s : samples) s *= a;
        return *this;
    }
};

/// Trapezoidal quadrature weight for sample k. Identical to the plain
/// sum(|s|^2)*step whenever the boundary samples vanish, which holds for
/// every pulse fully contained in its window.
inline double quad_weight(const Grid& g, int k) {
    return (k == 0 || k == g.n - 1) ? 0.5 * g.step : g.step;
}

/// L2 norm squared: integral of |samples|^2 over the grid.
inline double norm_sq(const ComplexEnvelope& env) {
    double acc = 0.0;
    for (int k = 0; k < env.size(); ++k) acc += quad_weight(env.grid, k) * std::norm(env.samples[k]);
    return acc;
}

/// Weighted inner product <a, b> = integral conj(a) b.
inline Complex inner(const ComplexEnvelope& a, const ComplexEnvelope& b) {
    if (!(a.grid == b.grid)) throw ConfigError("inner: envelopes on different grids");
    Complex acc = 0.0;
    for (int k = 0; k < a.size(); ++k)
        acc += quad_weight(a.grid, k) * std::conj(a.samples[k]) * b.samples[k];
    return acc;
}

inline ComplexEnvelope scaled(ComplexEnvelope env, Complex a) {
    env *= a;
    return env;
}

/// Stretch the coordinate axis by factor s, keeping samples. Fourier scaling:
/// bandwidth_estimate(dilate(env, s)) = bandwidth_estimate(env) / s.
inline ComplexEnvelope dilate(const ComplexEnvelope& env, double s) {
    if (s <= 0.0) throw ConfigError("dilate: factor must be > 0");
    ComplexEnvelope out = env;
    out.grid.start *= s;
    out.grid.step *= s;
    return out;
}

/// Shift samples by an integer number of steps (positive = later); vacated
/// samples are zero-filled.
inline ComplexEnvelope shifted_by_steps(const ComplexEnvelope& env, int steps) {
    ComplexEnvelope out(env.grid);
    for (int k = 0; k < env.size(); ++k) {
        int j = k - steps;
        if (j >= 0 && j < env.size()) out.samples[k] = env.samples[j];
    }
    return out;
}

}  // namespace rmem

#endif
