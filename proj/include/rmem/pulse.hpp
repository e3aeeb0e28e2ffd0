#ifndef RMEM_PULSE_HPP
#define RMEM_PULSE_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "rmem/grid.hpp"

namespace rmem {

enum class PulseKind { Square, Gaussian, Custom };

/// Canonical pulse shapes. For Square, `delay` is the leading edge and
/// `duration` the flat-top length; raised-cosine wings of width `rise_time`
/// sit outside the flat top ("near-square"). For Gaussian, `delay` is the
/// center and `duration` the intensity FWHM.
struct PulseShapeSpec {
    PulseKind kind = PulseKind::Square;
    double duration = 10.0;
    Complex amplitude = 1.0;
    double delay = 0.0;
    /// Edge rise time for Square; < 0 selects the default of 2 grid steps.
    double rise_time = -1.0;
    std::vector<Complex> custom_samples;

    static PulseShapeSpec square(double duration, Complex amp, double delay, double rise = -1.0) {
        return {PulseKind::Square, duration, amp, delay, rise, {}};
    }
    static PulseShapeSpec gaussian(double fwhm, Complex amp, double center) {
        return {PulseKind::Gaussian, fwhm, amp, center, 0.0, {}};
    }
};

/// Amplitude sigma such that exp(-t^2/(2 sigma^2)) has intensity FWHM `fwhm`:
/// |f|^2 = exp(-t^2/sigma^2) crosses 1/2 at t = sigma sqrt(ln 2).
inline double gaussian_sigma_from_fwhm(double fwhm) {
    return fwhm / (2.0 * std::sqrt(std::numbers::ln2));
}

inline ComplexEnvelope make_pulse(const PulseShapeSpec& spec, const Grid& grid) {
    if (spec.kind == PulseKind::Custom) {
        if (static_cast<int>(spec.custom_samples.size()) != grid.n)
            throw ConfigError("make_pulse: custom sample count does not match grid");
        return ComplexEnvelope(grid, spec.custom_samples);
    }
    if (spec.duration <= 0.0) throw ConfigError("make_pulse: duration must be > 0");

    ComplexEnvelope env(grid);
    if (spec.kind == PulseKind::Square) {
        const double rise = spec.rise_time < 0.0 ? 2.0 * grid.step : spec.rise_time;
        const double t0 = spec.delay, t1 = spec.delay + spec.duration;
        if (t0 - rise < grid.start - 1e-12 || t1 + rise > grid.end() + 1e-12)
            throw ConfigError("pulse truncated");
        for (int k = 0; k < grid.n; ++k) {
            const double t = grid.coord(k);
            double a = 0.0;
            if (t >= t0 && t < t1) {
                a = 1.0;
            } else if (rise > 0.0 && t >= t0 - rise && t < t0) {
                a = 0.5 * (1.0 - std::cos(std::numbers::pi * (t - (t0 - rise)) / rise));
            } else if (rise > 0.0 && t >= t1 && t < t1 + rise) {
                a = 0.5 * (1.0 + std::cos(std::numbers::pi * (t - t1) / rise));
            }
            env.samples[k] = spec.amplitude * a;
        }
    } else {  // Gaussian
        const double sig = gaussian_sigma_from_fwhm(spec.duration);
        if (spec.delay - 2.0 * spec.duration < grid.start - 1e-12 ||
            spec.delay + 2.0 * spec.duration > grid.end() + 1e-12)
            throw ConfigError("pulse truncated");
        for (int k = 0; k < grid.n; ++k) {
            const double u = (grid.coord(k) - spec.delay) / sig;
            env.samples[k] = spec.amplitude * std::exp(-0.5 * u * u);
        }
    }
    return env;
}

/// Pulse energy: integral of |env|^2 over the grid (for controls this is the
/// accumulated drive area h(0, t_W)).
inline double energy(const ComplexEnvelope& env) { return norm_sq(env); }

namespace detail {

/// FWHM of a sampled nonnegative profile, linear interpolation between the
/// bracketing samples; outermost half-max crossings for multi-peak profiles.
inline double fwhm_of_profile(const std::vector<double>& p, double start, double step) {
    const int n = static_cast<int>(p.size());
    double pmax = 0.0;
    for (double v : p) pmax = std::max(pmax, v);
    if (pmax <= 0.0) throw NumericalError("no peak");
    const double half = 0.5 * pmax;

    auto cross = [&](int a, int b) {  // crossing of `half` between samples a < b
        const double t = (half - p[a]) / (p[b] - p[a]);
        return start + step * (a + t * (b - a));
    };

    double left = start, right = start + step * (n - 1);
    for (int k = 0; k < n; ++k) {
        if (p[k] >= half) {
            left = (k == 0) ? start : cross(k - 1, k);
            break;
        }
    }
    for (int k = n - 1; k >= 0; --k) {
        if (p[k] >= half) {
            right = (k == n - 1) ? start + step * (n - 1) : cross(k + 1, k);
            break;
        }
    }
    return right - left;
}

}  // namespace detail

/// Full width at half maximum of |env|^2.
inline double fwhm(const ComplexEnvelope& env) {
    std::vector<double> p(env.size());
    for (int k = 0; k < env.size(); ++k) p[k] = std::norm(env.samples[k]);
    return detail::fwhm_of_profile(p, env.grid.start, env.grid.step);
}

/// Bandwidth as the FWHM of the power spectrum |FFT(env)|^2, in inverse time
/// units (GHz for ns grids). Zero-padded for crossing resolution.
inline double bandwidth_estimate(const ComplexEnvelope& env, int pad_factor = 16) {
    int nfft = 1;
    while (nfft < env.size() * pad_factor) nfft *= 2;
    std::vector<Complex> in(nfft, Complex(0.0));
    std::copy(env.samples.begin(), env.samples.end(), in.begin());
    std::vector<Complex> out(nfft);
    Eigen::FFT<double> fft;
    fft.fwd(out, in);

    // fftshift so the frequency axis is monotone over [-f_s/2, f_s/2).
    const double df = 1.0 / (nfft * env.grid.step);
    std::vector<double> power(nfft);
    for (int k = 0; k < nfft; ++k) power[k] = std::norm(out[(k + nfft / 2) % nfft]);
    return detail::fwhm_of_profile(power, -0.5 * nfft * df, df);
}

}  // namespace rmem

#endif
