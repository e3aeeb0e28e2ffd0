#ifndef RMEM_OPTIMAL_CONTROL_HPP
#define RMEM_OPTIMAL_CONTROL_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "rmem/memory_dynamics.hpp"
#include "rmem/pulse.hpp"

namespace rmem {

struct OptimalModeResult {
    ComplexEnvelope spin_mode;    ///< unit-norm dominant spin mode (z space)
    double max_efficiency = 0.0;  ///< sigma_max^2 of the map
    int iterations_used = 0;
    bool converged = false;
    double second_efficiency = 0.0;  ///< sigma_2^2 estimate (deflated iteration)
    bool degenerate = false;         ///< top pair closer than tol
};

/// Reference write shape used to fix the storage map at a given control
/// energy: a full-window near-square pulse.
inline ComplexEnvelope reference_square_control(const MemoryParams& params, double energy_total) {
    const Grid tg = params.time_grid();
    const double rise = 2.0 * tg.step;
    auto env = make_pulse(PulseShapeSpec::square(params.t_write - 2.0 * rise, 1.0, rise, rise), tg);
    if (energy_total > 0.0) env *= std::sqrt(energy_total / energy(env));
    else env *= 0.0;
    return env;
}

namespace detail {

/// Power iteration on the PSD composition map_adjoint(map(.)), tracking the
/// Rayleigh quotient in the weighted inner product. `seed` must not be
/// orthogonal to the dominant mode; the all-ones profile is used by default.
/// If `deflate` is given, iterates are re-orthogonalized against it.
inline std::pair<ComplexEnvelope, double> power_iterate(const LinearMapMatrix& K, int max_iter,
                                                        double tol, int* iters, bool* converged,
                                                        const ComplexEnvelope* deflate = nullptr) {
    ComplexEnvelope v(K.row_grid);
    for (auto& s : v.samples) s = 1.0;
    if (deflate) {
        const Complex c = inner(*deflate, v);
        for (int i = 0; i < v.size(); ++i) v.samples[i] -= c * deflate->samples[i];
    }
    double nv = std::sqrt(norm_sq(v));
    for (auto& s : v.samples) s /= nv;

    double lam = 0.0;
    bool ok = false;
    int k = 0;
    for (; k < max_iter; ++k) {
        auto w = K.apply(K.apply_adjoint(v));
        if (deflate) {
            const Complex c = inner(*deflate, w);
            for (int i = 0; i < w.size(); ++i) w.samples[i] -= c * deflate->samples[i];
        }
        const double lam_new = std::real(inner(v, w));  // Rayleigh quotient, ||v|| = 1
        const double nw = std::sqrt(norm_sq(w));
        if (nw == 0.0) {
            lam = 0.0;
            ok = true;
            break;
        }
        for (int i = 0; i < w.size(); ++i) w.samples[i] = w.samples[i] / nw;
        v = w;
        if (k > 0 && std::abs(lam_new - lam) < tol * std::max(1.0, lam_new)) {
            lam = lam_new;
            ok = true;
            break;
        }
        lam = lam_new;
    }
    if (iters) *iters = k + 1;
    if (converged) *converged = ok;
    return {v, lam};
}

}  // namespace detail

/// Dominant spin mode of the storage map at fixed control energy, by power
/// iteration on storage composed with its adjoint. max_efficiency is the top
/// squared singular value, the best write efficiency any input can reach
/// under this control shape/energy.
inline OptimalModeResult optimal_spin_mode(const MemoryParams& params, double control_energy,
                                           int max_iter = 200, double tol = 1e-6) {
    if (control_energy < 0.0) throw ConfigError("optimal_spin_mode: control_energy must be >= 0");
    OptimalModeResult res;
    if (control_energy == 0.0) {
        res.spin_mode = ComplexEnvelope(params.space_grid());
        res.converged = true;
        return res;
    }
    auto ctrl = reference_square_control(params, control_energy);
    auto K = storage_kernel_matrix(params, ctrl);

    auto [v1, lam1] = detail::power_iterate(K, max_iter, tol, &res.iterations_used, &res.converged);
    res.spin_mode = v1;
    res.max_efficiency = lam1;

    int it2 = 0;
    bool conv2 = false;
    auto [v2, lam2] = detail::power_iterate(K, max_iter, tol, &it2, &conv2, &v1);
    res.second_efficiency = lam2;
    res.degenerate = (lam1 - lam2) < tol;
    return res;
}

/// Top retrievable spin mode of the forward-retrieval map for a given read
/// pulse (the mode a strong read converts most completely).
inline OptimalModeResult retrieval_optimal_mode(const MemoryParams& params,
                                                const ComplexEnvelope& read, int max_iter = 200,
                                                double tol = 1e-6) {
    auto R = retrieval_kernel_matrix(params, read);
    // iterate on R^dagger R over z space: use the adjoint map as a LinearMapMatrix view
    LinearMapMatrix Rt(R.col_grid, R.row_grid);
    for (int r = 0; r < Rt.row_grid.n; ++r)
        for (int c = 0; c < Rt.col_grid.n; ++c)
            Rt.m(r, c) = std::conj(R.m(c, r)) * quad_weight(R.row_grid, c) /
                         quad_weight(R.col_grid, r);
    OptimalModeResult res;
    auto [v, lam] = detail::power_iterate(Rt, max_iter, tol, &res.iterations_used, &res.converged);
    res.spin_mode = v;
    res.max_efficiency = lam;
    return res;
}

struct ControlSolution {
    ComplexEnvelope write_pulse;
    double achieved_eta_w = 0.0;
    std::vector<double> objective_history;
    double energy_budget = 0.0;
    int iterations_used = 0;
    bool converged = false;
};

struct ShapeOptions {
    int max_iter = 200;
    double tol = 1e-6;
    /// weight of the |<target_spin, S>|^2 overlap regularizer
    double lambda_target = 0.0;
    /// when set, the objective is the total efficiency ||R S||^2 / ||E_in||^2
    /// through this fixed retrieval map instead of eta_W alone
    const LinearMapMatrix* retrieval_map = nullptr;
    /// second-difference penalty weight on the control samples
    double smoothness_weight = 0.0;
    const ComplexEnvelope* initial_control = nullptr;
};

namespace detail {

struct ObjectiveEval {
    double objective = 0.0;
    double eta_w = 0.0;
};

/// Forward objective for write-pulse shaping. J is eta_W (default), plus the
/// target-overlap term, or the through-retrieval total efficiency.
inline ObjectiveEval shaping_objective(const MemoryParams& params, const ComplexEnvelope& control,
                                       const ComplexEnvelope& input, double norm_in,
                                       const ComplexEnvelope* target_barred,
                                       const ShapeOptions& opt, BarredField* keep = nullptr) {
    const double delta = params.delta_w;
    const double b = std::sqrt(params.d) / delta;
    const auto g = cumulative_drive(control);
    std::vector<Complex> boundary(params.nt);
    for (int j = 0; j < params.nt; ++j)
        boundary[j] = input.samples[j] * std::exp(Complex(0, -g[j] / delta));
    std::vector<Complex> s0(params.nz, Complex(0.0));
    const Grid zg = params.space_grid();
    auto f = solve_barred(b, params.nz, zg.step, control, boundary, s0);

    ComplexEnvelope sbar(zg);
    for (int i = 0; i < params.nz; ++i) sbar.samples[i] = f.s(i, params.nt - 1);

    ObjectiveEval ev;
    ev.eta_w = norm_sq(sbar) / norm_in;
    if (opt.retrieval_map) {
        // fold the z phase back in; the global drive phase drops out of norms
        ComplexEnvelope sphys = sbar;
        const double a = params.d / delta;
        for (int i = 0; i < params.nz; ++i)
            sphys.samples[i] *= std::exp(Complex(0, a * zg.coord(i)));
        ev.objective = norm_sq(opt.retrieval_map->apply(sphys)) / norm_in;
    } else {
        ev.objective = ev.eta_w;
        if (opt.lambda_target > 0.0 && target_barred)
            ev.objective += opt.lambda_target * std::norm(inner(*target_barred, sbar)) / norm_in;
    }
    if (opt.smoothness_weight > 0.0) {
        double pen = 0.0;
        for (int j = 1; j + 1 < params.nt; ++j)
            pen += std::norm(control.samples[j - 1] - 2.0 * control.samples[j] +
                             control.samples[j + 1]);
        ev.objective -= opt.smoothness_weight * control.grid.step * pen;
    }
    if (keep) *keep = std::move(f);
    return ev;
}

/// Reverse sweep of the box scheme: Wirtinger gradient dJ/d conj(Omega_j)
/// for a storage run (zero initial spin), given the cotangent seed on the
/// final barred spin row. Includes the drive-area twist of the input
/// boundary phase.
inline std::vector<Complex> adjoint_control_gradient(const MemoryParams& params,
                                                     const ComplexEnvelope& control,
                                                     const ComplexEnvelope& input,
                                                     const BarredField& f,
                                                     const std::vector<Complex>& seed_sbar_final) {
    const int nz = params.nz, nt = params.nt;
    const double delta = params.delta_w;
    const double b = std::sqrt(params.d) / delta;
    const double dz = f.dz, dt = f.dt;

    std::vector<Complex> hatE(static_cast<size_t>(nz) * nt, Complex(0.0));
    std::vector<Complex> hatS(static_cast<size_t>(nz) * nt, Complex(0.0));
    auto hE = [&](int i, int j) -> Complex& { return hatE[static_cast<size_t>(j) * nz + i]; };
    auto hS = [&](int i, int j) -> Complex& { return hatS[static_cast<size_t>(j) * nz + i]; };
    for (int i = 0; i < nz; ++i) hS(i, nt - 1) = seed_sbar_final[i];

    std::vector<Complex> g_mid(nt - 1, Complex(0.0));

    for (int j = nt - 2; j >= 0; --j) {
        const Complex c = f.c_mid[j];
        const Complex p = Complex(0, 0.5) * c * dz;
        const Complex q = Complex(0, 0.5) * std::conj(c) * dt;
        const Complex invD = 1.0 / (1.0 - p * q);
        const Complex ap = Complex(0, 0.5) * b * dz;  // p = ap * Omega_mid
        const Complex aq = Complex(0, 0.5) * b * dt;  // q = aq * conj(Omega_mid)

        for (int i = nz - 2; i >= 0; --i) {
            const Complex Eij = f.e(i, j), Eij1 = f.e(i, j + 1), Ei1j = f.e(i + 1, j);
            const Complex Sij = f.s(i, j), Sij1 = f.s(i, j + 1), Si1j = f.s(i + 1, j);
            const Complex S3 = Sij + Si1j + Sij1;
            const Complex E3 = Eij + Ei1j + Eij1;
            const Complex RE = Eij + Eij1 - Ei1j + p * S3;
            const Complex RS = Sij + Si1j - Sij1 + q * E3;
            const Complex Ep = f.e(i + 1, j + 1), Sp = f.s(i + 1, j + 1);
            const Complex hEp = hE(i + 1, j + 1), hSp = hS(i + 1, j + 1);

            const Complex hRE = std::conj(invD) * hEp + std::conj(q * invD) * hSp;
            const Complex hRS = std::conj(p * invD) * hEp + std::conj(invD) * hSp;
            const Complex hD =
                std::conj(-Ep * invD) * hEp + std::conj(-Sp * invD) * hSp;
            Complex hp = std::conj(RS * invD) * hEp + std::conj(-q) * hD + std::conj(S3) * hRE;
            Complex hq = std::conj(RE * invD) * hSp + std::conj(-p) * hD + std::conj(E3) * hRS;

            const Complex hE_shared = std::conj(q) * hRS;
            hE(i, j) += hRE + hE_shared;
            hE(i, j + 1) += hRE + hE_shared;
            hE(i + 1, j) += -hRE + hE_shared;
            const Complex hS_shared = std::conj(p) * hRE;
            hS(i, j) += hRS + hS_shared;
            hS(i + 1, j) += hRS + hS_shared;
            hS(i, j + 1) += -hRS + hS_shared;

            g_mid[j] += hp * std::conj(ap) + std::conj(hq) * aq;
        }

        // boundary column op: S(0,j+1) = S(0,j) + i/2 conj(c) dt (E(0,j)+E(0,j+1))
        const Complex hS01 = hS(0, j + 1);
        hS(0, j) += hS01;
        const Complex Esum = f.e(0, j) + f.e(0, j + 1);
        g_mid[j] += std::conj(hS01) * (aq * Esum);
        const Complex k = Complex(0, 0.5) * std::conj(c) * dt;
        hE(0, j) += std::conj(k) * hS01;
        hE(0, j + 1) += std::conj(k) * hS01;
    }

    // input boundary phase twist: boundary_j = input_j exp(-i g_j / Delta)
    const auto g = cumulative_drive(control);
    std::vector<double> gamma(nt, 0.0);
    for (int j = 1; j < nt; ++j) {
        const Complex bnd = input.samples[j] * std::exp(Complex(0, -g[j] / delta));
        gamma[j] = 2.0 * std::real(std::conj(hE(0, j)) * (Complex(0, -1.0 / delta) * bnd));
    }
    std::vector<double> suffix(nt + 1, 0.0);
    for (int j = nt - 1; j >= 1; --j) suffix[j] = suffix[j + 1] + gamma[j];

    std::vector<Complex> grad(nt, Complex(0.0));
    for (int j = 0; j < nt; ++j) {
        if (j < nt - 1) grad[j] += 0.5 * g_mid[j];
        if (j > 0) grad[j] += 0.5 * g_mid[j - 1];
        const double tw = (j >= 1 ? suffix[j] : 0.0) + suffix[j + 1];
        grad[j] += control.samples[j] * (0.5 * dt * tw);
    }
    return grad;
}

/// Seed the final-spin cotangent for the configured objective and return the
/// full control gradient (including the smoothness penalty).
inline std::vector<Complex> shaping_gradient(const MemoryParams& params,
                                             const ComplexEnvelope& control,
                                             const ComplexEnvelope& input, double norm_in,
                                             const ComplexEnvelope* target_barred,
                                             const ShapeOptions& opt, const BarredField& f) {
    const int nz = params.nz;
    const Grid zg = params.space_grid();
    ComplexEnvelope sbar(zg);
    for (int i = 0; i < nz; ++i) sbar.samples[i] = f.s(i, params.nt - 1);

    std::vector<Complex> seed(nz, Complex(0.0));
    if (opt.retrieval_map) {
        ComplexEnvelope sphys = sbar;
        const double a = params.d / params.delta_w;
        for (int i = 0; i < nz; ++i)
            sphys.samples[i] *= std::exp(Complex(0, a * zg.coord(i)));
        auto back = opt.retrieval_map->apply_adjoint(opt.retrieval_map->apply(sphys));
        for (int i = 0; i < nz; ++i)
            seed[i] = quad_weight(zg, i) * back.samples[i] *
                      std::exp(Complex(0, -a * zg.coord(i))) / norm_in;
    } else {
        for (int i = 0; i < nz; ++i) seed[i] = quad_weight(zg, i) * sbar.samples[i] / norm_in;
        if (opt.lambda_target > 0.0 && target_barred) {
            const Complex c = inner(*target_barred, sbar);
            for (int i = 0; i < nz; ++i)
                seed[i] += opt.lambda_target * c * quad_weight(zg, i) * target_barred->samples[i] /
                           norm_in;
        }
    }
    auto grad = adjoint_control_gradient(params, control, input, f, seed);
    if (opt.smoothness_weight > 0.0) {
        const int nt = params.nt;
        std::vector<Complex> v(nt, Complex(0.0));
        for (int j = 1; j + 1 < nt; ++j)
            v[j] = control.samples[j - 1] - 2.0 * control.samples[j] + control.samples[j + 1];
        for (int j = 0; j < nt; ++j) {
            Complex acc = 0.0;
            if (j - 1 >= 1 && j - 1 + 1 < nt) acc += v[j - 1];
            if (j >= 1 && j + 1 < nt) acc += -2.0 * v[j];
            if (j + 1 >= 1 && j + 2 < nt) acc += v[j + 1];
            grad[j] -= opt.smoothness_weight * control.grid.step * acc;
        }
    }
    return grad;
}

}  // namespace detail

/// Shape the write pulse for a given input by projected gradient ascent on
/// the sampled complex control, with the energy constraint
/// integral |Omega|^2 dt <= energy_budget. Gradients come from the adjoint
/// (reverse) sweep of the propagation solver.
inline ControlSolution shape_write_pulse(const MemoryParams& params, const ComplexEnvelope& input,
                                         const ComplexEnvelope& target_spin, double energy_budget,
                                         const ShapeOptions& opt = {}) {
    params.validate();
    if (!(input.grid == params.time_grid()))
        throw ConfigError("shape_write_pulse: input must live on the params time grid");
    const double norm_in = norm_sq(input);
    if (norm_in <= 0.0) throw ConfigError("shape_write_pulse: zero input");
    if (energy_budget < 0.0) throw ConfigError("shape_write_pulse: negative energy budget");

    ControlSolution sol;
    sol.energy_budget = energy_budget;
    if (energy_budget == 0.0) {
        sol.write_pulse = ComplexEnvelope(params.time_grid());
        sol.converged = true;
        sol.objective_history.push_back(0.0);
        return sol;
    }

    // barred target (strip the z phase-matching factor); unit-normalized
    ComplexEnvelope target_barred;
    const bool have_target = target_spin.size() == params.nz;
    if (have_target) {
        target_barred = target_spin;
        const double a = params.d / params.delta_w;
        const Grid zg = params.space_grid();
        for (int i = 0; i < params.nz; ++i)
            target_barred.samples[i] *= std::exp(Complex(0, -a * zg.coord(i)));
        const double nt2 = norm_sq(target_barred);
        if (std::abs(nt2 - 1.0) > 1e-6)
            throw ConfigError("shape_write_pulse: target_spin must be unit-normalized");
    } else if (opt.lambda_target > 0.0) {
        throw ConfigError("shape_write_pulse: lambda_target > 0 requires a target_spin");
    }

    auto project = [&](ComplexEnvelope& ctrl) {
        const double e = energy(ctrl);
        if (e > energy_budget) ctrl *= std::sqrt(energy_budget / e);
    };

    ComplexEnvelope ctrl = opt.initial_control ? *opt.initial_control
                                               : reference_square_control(params, energy_budget);
    if (!(ctrl.grid == params.time_grid()))
        throw ConfigError("shape_write_pulse: initial control grid mismatch");
    project(ctrl);

    detail::BarredField f;
    auto ev = detail::shaping_objective(params, ctrl, input, norm_in,
                                        have_target ? &target_barred : nullptr, opt, &f);
    sol.objective_history.push_back(ev.objective);

    double step = -1.0;
    int k = 0;
    bool converged = false;
    for (; k < opt.max_iter; ++k) {
        auto grad = detail::shaping_gradient(params, ctrl, input, norm_in,
                                             have_target ? &target_barred : nullptr, opt, f);
        double gl2 = 0.0;
        for (const auto& gv : grad) gl2 += std::norm(gv) * ctrl.grid.step;
        gl2 = std::sqrt(gl2);
        if (gl2 == 0.0) {
            converged = true;
            break;
        }
        if (step < 0.0) step = 0.3 * std::sqrt(energy_budget) / gl2;

        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            ComplexEnvelope cand = ctrl;
            for (int j = 0; j < params.nt; ++j) cand.samples[j] += step * grad[j];
            project(cand);
            detail::BarredField fc;
            auto evc = detail::shaping_objective(params, cand, input, norm_in,
                                                 have_target ? &target_barred : nullptr, opt, &fc);
            if (evc.objective >= ev.objective - 1e-14) {
                const double gain = evc.objective - ev.objective;
                ctrl = std::move(cand);
                ev = evc;
                f = std::move(fc);
                sol.objective_history.push_back(ev.objective);
                step *= 1.4;
                accepted = true;
                if (gain < opt.tol * std::max(1.0, std::abs(ev.objective))) converged = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) converged = true;  // no local ascent direction left
        if (converged) break;
    }

    sol.write_pulse = ctrl;
    sol.achieved_eta_w = ev.eta_w;
    sol.iterations_used = k;
    sol.converged = converged;
    return sol;
}

struct DelayedControlResult {
    ComplexEnvelope leak_nominal;
    ComplexEnvelope leak_delayed;
    double leak_energy_ratio = 1.0;
};

/// Storage with the nominal control Omega(t) and with the advanced control
/// Omega(t + delay), delay rounded to the grid; returns both leaks and the
/// leaked-energy ratio delayed / nominal.
inline DelayedControlResult delayed_control_experiment(const MemoryParams& params,
                                                       const ComplexEnvelope& input,
                                                       const ComplexEnvelope& control,
                                                       double delay) {
    const int steps = static_cast<int>(std::lround(delay / control.grid.step));
    auto shifted = shifted_by_steps(control, -steps);

    DelayedControlResult res;
    res.leak_nominal = propagate_storage(params, control, input).leak;
    res.leak_delayed = propagate_storage(params, shifted, input).leak;
    const double en = norm_sq(res.leak_nominal);
    res.leak_energy_ratio = en > 0.0 ? norm_sq(res.leak_delayed) / en
                                     : std::numeric_limits<double>::infinity();
    return res;
}

}  // namespace rmem

#endif
