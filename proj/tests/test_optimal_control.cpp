#include <catch2/catch_amalgamated.hpp>

#include <Eigen/SVD>
#include <cmath>
#include <random>

#include "rmem/optimal_control.hpp"

using namespace rmem;
using Catch::Approx;

namespace {

MemoryParams small_case(int n = 32) {
    MemoryParams p;
    p.d = 10.0;
    p.delta_w = 50.0;
    p.delta_r = 50.0;
    p.t_write = 40.0;
    p.nz = n;
    p.nt = n;
    return p;
}

// Weighted singular values of a LinearMapMatrix via dense SVD (test oracle).
Eigen::VectorXd svd_sigmas(const LinearMapMatrix& K) {
    Eigen::MatrixXcd B = K.m;
    for (int r = 0; r < K.row_grid.n; ++r)
        for (int c = 0; c < K.col_grid.n; ++c)
            B(r, c) *= std::sqrt(quad_weight(K.row_grid, r)) / std::sqrt(quad_weight(K.col_grid, c));
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(B);
    return svd.singularValues();
}

ComplexEnvelope random_envelope(const Grid& g, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    ComplexEnvelope env(g);
    for (auto& s : env.samples) s = Complex(u(rng), u(rng));
    return env;
}

}  // namespace

TEST_CASE("power iteration matches dense SVD on the small case") {
    auto p = small_case(32);
    const double h = 60.0;
    auto res = optimal_spin_mode(p, h, 500, 1e-13);
    REQUIRE(res.converged);

    auto K = storage_kernel_matrix(p, reference_square_control(p, h));
    auto sig = svd_sigmas(K);
    CHECK(res.max_efficiency == Approx(sig(0) * sig(0)).margin(1e-8));
    CHECK(res.second_efficiency == Approx(sig(1) * sig(1)).margin(1e-6));

    CHECK(norm_sq(res.spin_mode) == Approx(1.0).margin(1e-9));
    CHECK(res.max_efficiency <= 1.0 + 1e-6);
    CHECK(res.max_efficiency >= 0.0);
}

TEST_CASE("degenerate zero control energy") {
    auto p = small_case(32);
    auto res = optimal_spin_mode(p, 0.0);
    CHECK(res.max_efficiency == 0.0);
    CHECK(res.converged);
}

TEST_CASE("passivity at the reference point") {
    MemoryParams p;
    p.d = 1100.0;
    p.delta_w = 3.0;
    p.delta_r = 3.0;
    p.t_write = 20.0;
    p.nz = 257;
    p.nt = 257;
    auto res = optimal_spin_mode(p, 0.08, 400, 1e-10);
    CHECK(res.max_efficiency <= 1.0 + 1e-6);
    CHECK(res.max_efficiency > 0.995);  // saturated storage
}

TEST_CASE("adjoint identity of the kernel map") {
    auto p = small_case(48);
    auto write = make_pulse(PulseShapeSpec::gaussian(9.0, 2.0, 20.0), p.time_grid());
    auto K = storage_kernel_matrix(p, write);
    for (unsigned seed : {1u, 2u, 3u}) {
        auto x = random_envelope(K.col_grid, seed);
        auto y = random_envelope(K.row_grid, seed + 100);
        const Complex lhs = inner(K.apply(x), y);
        const Complex rhs = inner(x, K.apply_adjoint(y));
        CHECK(std::abs(lhs - rhs) < 1e-10 * (1.0 + std::abs(lhs)));
    }
}

TEST_CASE("Rayleigh quotient is nondecreasing under power iteration") {
    auto p = small_case(32);
    auto K = storage_kernel_matrix(p, reference_square_control(p, 40.0));
    ComplexEnvelope v(K.row_grid);
    for (int i = 0; i < v.size(); ++i) v.samples[i] = 1.0 + 0.3 * std::sin(7.0 * i);
    double nv = std::sqrt(norm_sq(v));
    for (auto& s : v.samples) s /= nv;

    double prev = -1.0;
    for (int k = 0; k < 40; ++k) {
        auto w = K.apply(K.apply_adjoint(v));
        const double rayleigh = std::real(inner(v, w));
        CHECK(rayleigh >= prev - 1e-12);
        prev = rayleigh;
        const double nw = std::sqrt(norm_sq(w));
        REQUIRE(nw > 0.0);
        for (auto& s : w.samples) s /= nw;
        v = w;
    }
}

TEST_CASE("adjoint gradient matches central finite differences") {
    auto p = small_case(32);
    auto input = make_pulse(PulseShapeSpec::gaussian(8.0, 1.0, 20.0), p.time_grid());
    auto ctrl = make_pulse(PulseShapeSpec::gaussian(9.0, 1.5, 18.0), p.time_grid());
    // give the control a mild chirp so complex-phase paths are exercised
    for (int j = 0; j < p.nt; ++j)
        ctrl.samples[j] *= std::exp(Complex(0, 0.03 * j));
    const double nin = norm_sq(input);

    ShapeOptions opt;
    ComplexEnvelope target;

    SECTION("plain eta_W objective") {}
    SECTION("with target-overlap regularizer") {
        auto mode = optimal_spin_mode(p, energy(ctrl), 300, 1e-11);
        target = mode.spin_mode;
        opt.lambda_target = 0.7;
    }
    SECTION("through-retrieval objective") {
        static LinearMapMatrix R;  // keep alive for the pointer
        auto read = reference_square_control(p, 250.0);
        MemoryParams pr = p;
        R = retrieval_kernel_matrix(pr, read);
        opt.retrieval_map = &R;
    }
    SECTION("with smoothness penalty") { opt.smoothness_weight = 0.05; }

    ComplexEnvelope target_barred = target;
    const bool have_target = target.size() == p.nz;
    if (have_target) {
        const double a = p.d / p.delta_w;
        for (int i = 0; i < p.nz; ++i)
            target_barred.samples[i] *= std::exp(Complex(0, -a * p.space_grid().coord(i)));
    }
    auto eval = [&](const ComplexEnvelope& c) {
        return detail::shaping_objective(p, c, input, nin, have_target ? &target_barred : nullptr,
                                         opt)
            .objective;
    };

    detail::BarredField f;
    detail::shaping_objective(p, ctrl, input, nin, have_target ? &target_barred : nullptr, opt, &f);
    auto grad = detail::shaping_gradient(p, ctrl, input, nin,
                                         have_target ? &target_barred : nullptr, opt, f);

    const double eps = 2e-6;
    for (int j : {3, 11, 16, 23, 28}) {
        ComplexEnvelope cp = ctrl, cm = ctrl;
        cp.samples[j] += eps;
        cm.samples[j] -= eps;
        const double fd_re = (eval(cp) - eval(cm)) / (2.0 * eps);
        cp = ctrl;
        cm = ctrl;
        cp.samples[j] += Complex(0, eps);
        cm.samples[j] -= Complex(0, eps);
        const double fd_im = (eval(cp) - eval(cm)) / (2.0 * eps);

        const double scale = std::max({std::abs(fd_re), std::abs(fd_im), 1e-8});
        CHECK(2.0 * std::real(grad[j]) == Approx(fd_re).margin(1e-4 * scale));
        CHECK(2.0 * std::imag(grad[j]) == Approx(fd_im).margin(1e-4 * scale));
    }
}

TEST_CASE("shaping recovers the fixed-control optimum for its own best input") {
    auto p = small_case(32);
    const double h = 60.0;
    auto ref = reference_square_control(p, h);
    auto K = storage_kernel_matrix(p, ref);
    auto sig = svd_sigmas(K);
    const double sigma2 = sig(0) * sig(0);

    // optimal input mode: top right singular vector of K in t space
    Eigen::MatrixXcd B = K.m;
    for (int r = 0; r < K.row_grid.n; ++r)
        for (int c = 0; c < K.col_grid.n; ++c)
            B(r, c) *= std::sqrt(quad_weight(K.row_grid, r)) / std::sqrt(quad_weight(K.col_grid, c));
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(B, Eigen::ComputeThinV);
    ComplexEnvelope input(K.col_grid);
    for (int j = 0; j < p.nt; ++j)
        input.samples[j] = svd.matrixV()(j, 0) / std::sqrt(quad_weight(K.col_grid, j));

    ShapeOptions opt;
    opt.max_iter = 300;
    ComplexEnvelope no_target;
    auto sol = shape_write_pulse(p, input, no_target, h, opt);
    CHECK(sol.achieved_eta_w >= sigma2 - 0.005);
    CHECK(sol.achieved_eta_w <= 1.0 + 1e-9);
    CHECK(energy(sol.write_pulse) <= h * (1.0 + 1e-6));
}

TEST_CASE("zero budget yields the zero control") {
    auto p = small_case(32);
    auto input = make_pulse(PulseShapeSpec::gaussian(8.0, 1.0, 20.0), p.time_grid());
    ComplexEnvelope no_target;
    auto sol = shape_write_pulse(p, input, no_target, 0.0);
    CHECK(sol.achieved_eta_w == 0.0);
    CHECK(energy(sol.write_pulse) == 0.0);
    CHECK(sol.converged);

    CHECK_THROWS_AS(shape_write_pulse(p, ComplexEnvelope(p.time_grid()), no_target, 1.0),
                    ConfigError);
}

TEST_CASE("objective history is monotone and eta_W saturates with budget") {
    auto p = small_case(24);
    auto input = make_pulse(PulseShapeSpec::gaussian(8.0, 1.0, 20.0), p.time_grid());
    ComplexEnvelope no_target;

    double prev_eta = -1.0;
    for (double budget : {10.0, 30.0, 60.0, 120.0, 200.0}) {
        ShapeOptions opt;
        opt.max_iter = 120;
        auto sol = shape_write_pulse(p, input, no_target, budget, opt);
        for (size_t k = 1; k < sol.objective_history.size(); ++k)
            CHECK(sol.objective_history[k] >= sol.objective_history[k - 1] - 1e-12);
        CHECK(sol.achieved_eta_w >= prev_eta - 1e-4);
        prev_eta = sol.achieved_eta_w;
    }
}

TEST_CASE("retrieval kernel agrees with the propagation solver") {
    MemoryParams p = small_case(129);
    p.d = 60.0;
    p.nt = 257;

    // phase-matched, exit-leaning spin wave
    ComplexEnvelope spin(p.space_grid());
    const double a = p.d / p.delta_r;
    for (int i = 0; i < p.nz; ++i) {
        const double z = p.space_grid().coord(i);
        spin.samples[i] = (0.2 + z) * std::exp(Complex(0, a * z));
    }
    const double ns = std::sqrt(norm_sq(spin));
    for (auto& s : spin.samples) s /= ns;

    auto read = make_pulse(PulseShapeSpec::square(30.0, 1.0, 4.0, 1.5), p.time_grid());
    read *= std::sqrt(300.0 / energy(read));

    auto sol = propagate_retrieval(p, read, spin);
    auto R = retrieval_kernel_matrix(p, read);
    auto oracle = R.apply(spin);

    double num = 0.0, den = 0.0;
    for (int j = 0; j < p.nt; ++j) {
        num += std::norm(sol.output.samples[j] - oracle.samples[j]) * quad_weight(read.grid, j);
        den += std::norm(oracle.samples[j]) * quad_weight(read.grid, j);
    }
    CHECK(std::sqrt(num / den) < 1e-3);
    CHECK(sol.eta_r == Approx(norm_sq(oracle) / norm_sq(spin)).epsilon(2e-3));
}

TEST_CASE("delayed control experiment") {
    auto p = small_case(129);
    auto input = make_pulse(PulseShapeSpec::gaussian(8.0, 1.0, 20.0), p.time_grid());
    ComplexEnvelope no_target;
    ShapeOptions opt;
    opt.max_iter = 150;
    auto sol = shape_write_pulse(p, input, no_target, 80.0, opt);

    SECTION("zero delay gives ratio exactly 1") {
        auto r = delayed_control_experiment(p, input, sol.write_pulse, 0.0);
        CHECK(r.leak_energy_ratio == 1.0);
    }
    SECTION("degradation grows with delay") {
        auto r1 = delayed_control_experiment(p, input, sol.write_pulse, 1.0);
        auto r4 = delayed_control_experiment(p, input, sol.write_pulse, 4.0);
        CHECK(r1.leak_energy_ratio >= 1.0);
        CHECK(r4.leak_energy_ratio > r1.leak_energy_ratio);
    }
}
