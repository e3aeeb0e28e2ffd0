#ifndef RMEM_LINEAR_MAP_HPP
#define RMEM_LINEAR_MAP_HPP

#include <Eigen/Dense>

#include "rmem/grid.hpp"

namespace rmem {

/// Dense discretized linear operator between envelope grids, with the L2
/// quadrature weights of both grids baked into apply / apply_adjoint so that
/// <K x, y>_row == <x, K^dagger y>_col holds in the weighted inner products.
struct LinearMapMatrix {
    Grid row_grid;  // output space (z for the storage kernel)
    Grid col_grid;  // input space (t)
    Eigen::MatrixXcd m;

    LinearMapMatrix() = default;
    LinearMapMatrix(const Grid& rows, const Grid& cols)
        : row_grid(rows), col_grid(cols), m(Eigen::MatrixXcd::Zero(rows.n, cols.n)) {}

    ComplexEnvelope apply(const ComplexEnvelope& x) const {
        if (!(x.grid == col_grid)) throw ConfigError("LinearMapMatrix::apply: grid mismatch");
        ComplexEnvelope y(row_grid);
        for (int r = 0; r < row_grid.n; ++r) {
            Complex acc = 0.0;
            for (int c = 0; c < col_grid.n; ++c) acc += m(r, c) * x.samples[c];
            y.samples[r] = acc;
        }
        return y;
    }

    ComplexEnvelope apply_adjoint(const ComplexEnvelope& y) const {
        if (!(y.grid == row_grid))
            throw ConfigError("LinearMapMatrix::apply_adjoint: grid mismatch");
        ComplexEnvelope x(col_grid);
        for (int c = 0; c < col_grid.n; ++c) {
            Complex acc = 0.0;
            for (int r = 0; r < row_grid.n; ++r)
                acc += std::conj(m(r, c)) * quad_weight(row_grid, r) * y.samples[r];
            x.samples[c] = acc / quad_weight(col_grid, c);
        }
        return x;
    }
};

}  // namespace rmem

#endif
