#ifndef RMEM_MEMORY_DYNAMICS_HPP
#define RMEM_MEMORY_DYNAMICS_HPP

#include <cmath>
#include <vector>

#include "rmem/grid.hpp"
#include "rmem/linear_map.hpp"

namespace rmem {

/// Dimensionless/unit conventions: time in ns, detunings and Rabi
/// frequencies in GHz, optical depth d dimensionless, cell z in [0, 1].
struct MemoryParams {
    double d = 1100.0;        ///< optical depth
    double delta_w = 3.0;     ///< write detuning (GHz)
    double delta_r = 3.0;     ///< read detuning (GHz)
    double t_write = 20.0;    ///< write window (ns)
    int nz = 257;             ///< space samples over [0, 1]
    int nt = 257;             ///< time samples over the window
    double adiabaticity_threshold = 0.25;

    void validate() const {
        if (d <= 0.0) throw ConfigError("MemoryParams: d must be > 0");
        if (delta_w == 0.0 || delta_r == 0.0) throw ConfigError("MemoryParams: detuning must be nonzero");
        if (t_write <= 0.0) throw ConfigError("MemoryParams: t_write must be > 0");
        if (nz < 16 || nt < 16) throw ConfigError("MemoryParams: need nz, nt >= 16");
    }

    Grid time_grid() const { return Grid::over(0.0, t_write, nt); }
    Grid space_grid() const { return Grid::unit_space(nz); }
};

struct StorageResult {
    ComplexEnvelope spin_wave;  ///< S(z, t_W) over z in [0, 1]
    ComplexEnvelope leak;       ///< E(z=1, t) over the write window
    double eta_w = 0.0;
    bool adiabatic_strain = false;
};

struct RetrievalResult {
    ComplexEnvelope output;         ///< E(z=1, t) over the read window
    ComplexEnvelope residual_spin;  ///< S(z, t_read)
    double eta_r = 0.0;
    bool adiabatic_strain = false;
};

struct EfficiencyTriple {
    double eta_w = 0.0, eta_r = 0.0, eta_t = 0.0;
};

/// eta_T = eta_W * eta_R.
inline EfficiencyTriple efficiencies(const StorageResult& s, const RetrievalResult& r) {
    return {s.eta_w, r.eta_r, s.eta_w * r.eta_r};
}

inline bool adiabatic_strain_flag(const MemoryParams& p, double delta,
                                  const ComplexEnvelope& control) {
    double peak = 0.0;
    for (const auto& s : control.samples) peak = std::max(peak, std::norm(s));
    const double th = p.adiabaticity_threshold;
    return peak * control.grid.span() / std::abs(delta) > th || p.d / std::abs(delta) > th;
}

namespace detail {

/// Cumulative drive area g(t_j) = integral_0^{t_j} |Omega|^2 (trapezoid).
inline std::vector<double> cumulative_drive(const ComplexEnvelope& control) {
    std::vector<double> g(control.size(), 0.0);
    const double dt = control.grid.step;
    for (int j = 1; j < control.size(); ++j)
        g[j] = g[j - 1] +
               0.5 * dt * (std::norm(control.samples[j - 1]) + std::norm(control.samples[j]));
    return g;
}

/// Full nodal history of the phase-stripped fields. The fast diagonal phases
/// exp(i d z / Delta) and exp(i g(t) / Delta) are removed analytically, so the
/// solved system is  dE/dz = i c(t) S,  dS/dt = i conj(c(t)) E  with
/// c = sqrt(d)/Delta * Omega(t). Physical fields carry the phases back.
struct BarredField {
    int nz = 0, nt = 0;
    double dz = 0.0, dt = 0.0;
    std::vector<Complex> E, S;     // index (i, j) -> j * nz + i
    std::vector<Complex> c_mid;    // coupling at time midpoints, length nt - 1
    std::vector<Complex> c_node;   // coupling at nodes, length nt

    Complex& e(int i, int j) { return E[static_cast<size_t>(j) * nz + i]; }
    Complex& s(int i, int j) { return S[static_cast<size_t>(j) * nz + i]; }
    Complex e(int i, int j) const { return E[static_cast<size_t>(j) * nz + i]; }
    Complex s(int i, int j) const { return S[static_cast<size_t>(j) * nz + i]; }
};

/// Implicit box scheme on the characteristic mesh: second order, and exactly
/// energy-conserving (the discrete flux identity holds per cell).
inline BarredField solve_barred(double b, int nz, double dz, const ComplexEnvelope& control,
                                const std::vector<Complex>& boundary_e0,
                                const std::vector<Complex>& initial_s) {
    const int nt = control.size();
    BarredField f;
    f.nz = nz;
    f.nt = nt;
    f.dz = dz;
    f.dt = control.grid.step;
    f.E.assign(static_cast<size_t>(nz) * nt, Complex(0.0));
    f.S.assign(static_cast<size_t>(nz) * nt, Complex(0.0));
    f.c_node.resize(nt);
    f.c_mid.resize(nt - 1);
    for (int j = 0; j < nt; ++j) f.c_node[j] = b * control.samples[j];
    for (int j = 0; j + 1 < nt; ++j) f.c_mid[j] = 0.5 * (f.c_node[j] + f.c_node[j + 1]);

    // initial row: S(z, 0) given; E(z, 0) from the z-ODE at t = 0
    for (int i = 0; i < nz; ++i) f.s(i, 0) = initial_s[i];
    f.e(0, 0) = boundary_e0[0];
    for (int i = 0; i + 1 < nz; ++i)
        f.e(i + 1, 0) =
            f.e(i, 0) + Complex(0, 0.5) * f.c_node[0] * dz * (f.s(i, 0) + f.s(i + 1, 0));

    for (int j = 0; j + 1 < nt; ++j) {
        const Complex c = f.c_mid[j];
        const Complex p = Complex(0, 0.5) * c * dz;
        const Complex q = Complex(0, 0.5) * std::conj(c) * f.dt;
        const Complex invD = 1.0 / (1.0 - p * q);

        // boundary column: E(0, t) given, S(0, t) evolves by the local ODE
        f.e(0, j + 1) = boundary_e0[j + 1];
        f.s(0, j + 1) = f.s(0, j) + Complex(0, 0.5) * std::conj(c) * f.dt *
                                        (f.e(0, j) + f.e(0, j + 1));

        for (int i = 0; i + 1 < nz; ++i) {
            const Complex Eij = f.e(i, j), Eij1 = f.e(i, j + 1), Ei1j = f.e(i + 1, j);
            const Complex Sij = f.s(i, j), Sij1 = f.s(i, j + 1), Si1j = f.s(i + 1, j);
            const Complex RE = Eij + Eij1 - Ei1j + p * (Sij + Si1j + Sij1);
            const Complex RS = Sij + Si1j - Sij1 + q * (Eij + Ei1j + Eij1);
            f.e(i + 1, j + 1) = (RE + p * RS) * invD;
            f.s(i + 1, j + 1) = (RS + q * RE) * invD;
        }
    }
    return f;
}

}  // namespace detail

/// Solve the coupled write dynamics with E(0, t) = input, S(z, 0) = 0.
/// Returns S(z, t_W), the transmitted (leaked) field at z = 1, and
/// eta_W = 1 - |E_leak|^2 / |E_in|^2.
inline StorageResult propagate_storage(const MemoryParams& params, const ComplexEnvelope& write,
                                       const ComplexEnvelope& input) {
    params.validate();
    if (!(write.grid == input.grid))
        throw ConfigError("propagate_storage: write and input must share the time grid");
    if (std::abs(write.grid.start) > 1e-9 ||
        std::abs(write.grid.span() - params.t_write) > 1e-9 * params.t_write)
        throw ConfigError("propagate_storage: time grid must span [0, t_write]");
    if (write.size() != params.nt)
        throw ConfigError("propagate_storage: control length must equal params.nt");

    const double delta = params.delta_w;
    const double a = params.d / delta;
    const double b = std::sqrt(params.d) / delta;
    const auto g = detail::cumulative_drive(write);

    std::vector<Complex> boundary(params.nt);
    for (int j = 0; j < params.nt; ++j)
        boundary[j] = input.samples[j] * std::exp(Complex(0, -g[j] / delta));
    std::vector<Complex> s0(params.nz, Complex(0.0));

    const Grid zg = params.space_grid();
    auto f = detail::solve_barred(b, params.nz, zg.step, write, boundary, s0);

    StorageResult out;
    out.spin_wave = ComplexEnvelope(zg);
    out.leak = ComplexEnvelope(write.grid);
    const double gT = g[params.nt - 1];
    for (int i = 0; i < params.nz; ++i)
        out.spin_wave.samples[i] =
            f.s(i, params.nt - 1) * std::exp(Complex(0, (a * zg.coord(i) + gT / delta)));
    for (int j = 0; j < params.nt; ++j)
        out.leak.samples[j] =
            f.e(params.nz - 1, j) * std::exp(Complex(0, a + g[j] / delta));

    const double nin = norm_sq(input);
    if (nin > 0.0) {
        const double nleak = norm_sq(out.leak);
        const double nspin = norm_sq(out.spin_wave);
        if (std::abs(nspin + nleak - nin) > 1e-3 * nin)
            throw NumericalError("solver tolerance exceeded (use a finer grid)");
        out.eta_w = 1.0 - nleak / nin;
    }
    out.adiabatic_strain = adiabatic_strain_flag(params, delta, write);
    return out;
}

/// Forward retrieval: same dynamics with E(0, t) = 0 and S(z, 0) = spin,
/// driven by the read control at detuning Delta_R. The read window is the
/// control's own grid.
inline RetrievalResult propagate_retrieval(const MemoryParams& params, const ComplexEnvelope& read,
                                           const ComplexEnvelope& spin) {
    params.validate();
    if (spin.size() != params.nz || !(spin.grid == params.space_grid()))
        throw ConfigError("propagate_retrieval: spin must live on the unit space grid of params");

    const double delta = params.delta_r;
    const double a = params.d / delta;
    const double b = std::sqrt(params.d) / delta;
    const auto g = detail::cumulative_drive(read);
    const int nt = read.size();

    std::vector<Complex> boundary(nt, Complex(0.0));
    std::vector<Complex> s0(params.nz);
    const Grid zg = params.space_grid();
    for (int i = 0; i < params.nz; ++i)
        s0[i] = spin.samples[i] * std::exp(Complex(0, -a * zg.coord(i)));

    auto f = detail::solve_barred(b, params.nz, zg.step, read, boundary, s0);

    RetrievalResult out;
    out.output = ComplexEnvelope(read.grid);
    out.residual_spin = ComplexEnvelope(zg);
    const double gT = g[nt - 1];
    for (int j = 0; j < nt; ++j)
        out.output.samples[j] = f.e(params.nz - 1, j) * std::exp(Complex(0, a + g[j] / delta));
    for (int i = 0; i < params.nz; ++i)
        out.residual_spin.samples[i] =
            f.s(i, nt - 1) * std::exp(Complex(0, a * zg.coord(i) + gT / delta));

    const double nspin = norm_sq(spin);
    if (nspin > 0.0) {
        const double nout = norm_sq(out.output);
        const double nres = norm_sq(out.residual_spin);
        if (std::abs(nout + nres - nspin) > 1e-3 * nspin)
            throw NumericalError("solver tolerance exceeded (use a finer grid)");
        out.eta_r = nout / nspin;
    }
    out.adiabatic_strain = adiabatic_strain_flag(params, delta, read);
    return out;
}

/// Analytic storage kernel  q(z, t) = i sqrt(d)/Delta conj(Omega(t))
///   exp(i (d z + h(t, t_W)) / Delta) J0(2 sqrt(h d z) / |Delta|)
/// with h(t, t_W) the remaining drive area. This is the closed-form solution
/// of the same coupled equations the propagation solver integrates, kept as
/// an independent cross-check; the solver is the production path.
inline Complex storage_kernel_q(const MemoryParams& params, Complex omega_t, double h, double z) {
    const double delta = params.delta_w;
    const double arg = 2.0 * std::sqrt(h * params.d * z) / std::abs(delta);
    return Complex(0, 1) * (std::sqrt(params.d) / delta) * std::conj(omega_t) *
           std::exp(Complex(0, (params.d * z + h) / delta)) * std::cyl_bessel_j(0.0, arg);
}

/// Dense discretization of Eq. S_W(z) = integral q(z, t) E_in(t) dt:
/// K[iz, it] = q(z_iz, t_it) * w_t(it), so spin_wave ~= K * input.
inline LinearMapMatrix storage_kernel_matrix(const MemoryParams& params,
                                             const ComplexEnvelope& write) {
    params.validate();
    if (write.size() != params.nt ||
        std::abs(write.grid.span() - params.t_write) > 1e-9 * params.t_write)
        throw ConfigError("storage_kernel_matrix: control grid must span the write window");

    const auto g = detail::cumulative_drive(write);
    const double gT = g[params.nt - 1];
    const Grid zg = params.space_grid();

    LinearMapMatrix K(zg, write.grid);
    for (int iz = 0; iz < params.nz; ++iz) {
        const double z = zg.coord(iz);
        for (int it = 0; it < params.nt; ++it) {
            const double h = gT - g[it];
            K.m(iz, it) = storage_kernel_q(params, write.samples[it], h, z) *
                          quad_weight(write.grid, it);
        }
    }
    return K;
}

/// Closed-form forward-retrieval map for a constant-phase read pulse, the
/// z <-> drive-area mirror of the storage kernel:
///   E_R(t) = i sqrt(d)/Delta Omega_R(t) exp(i (d + g(t)) / Delta)
///            integral exp(-i d z / Delta) J0(2 sqrt(d g(t) (1 - z)) / |Delta|) S(z) dz.
/// R[it, iz] includes the z quadrature weight, so output ~= R * spin.
inline LinearMapMatrix retrieval_kernel_matrix(const MemoryParams& params,
                                               const ComplexEnvelope& read) {
    params.validate();
    // constant-phase contract: Omega(t) = |Omega(t)| * global phase
    double peak = 0.0;
    Complex unit = 1.0;
    for (const auto& s : read.samples)
        if (std::abs(s) > peak) {
            peak = std::abs(s);
            unit = s / std::abs(s);
        }
    for (const auto& s : read.samples)
        if (std::abs(s - unit * std::abs(s)) > 1e-9 * std::max(peak, 1.0))
            throw ConfigError("retrieval_kernel_matrix: read pulse must have a constant phase");

    const double delta = params.delta_r;
    const double a = params.d / delta;
    const double b = std::sqrt(params.d) / delta;
    const auto g = detail::cumulative_drive(read);
    const Grid zg = params.space_grid();

    LinearMapMatrix R(read.grid, zg);
    for (int it = 0; it < read.size(); ++it) {
        const Complex pre = Complex(0, 1) * b * read.samples[it] *
                            std::exp(Complex(0, a + g[it] / delta));
        for (int iz = 0; iz < params.nz; ++iz) {
            const double z = zg.coord(iz);
            const double arg = 2.0 * std::sqrt(params.d * g[it] * (1.0 - z)) / std::abs(delta);
            R.m(it, iz) = pre * std::exp(Complex(0, -a * z)) * std::cyl_bessel_j(0.0, arg) *
                          quad_weight(zg, iz);
        }
    }
    return R;
}

}  // namespace rmem

#endif
