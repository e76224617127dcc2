#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

namespace ddspec {

enum class ScheduleKind { equidistant, uhrig, custom };

// n instantaneous pi pulses inside an evolution window of length T.
// n = 0 is free evolution (plain Ramsey).
struct PulseSchedule {
    double total_duration = 0.0;
    std::vector<double> pulse_times;  // strictly increasing, all in (0, T)
    ScheduleKind kind = ScheduleKind::custom;
};

inline PulseSchedule make_custom(double total_duration, std::vector<double> pulse_times) {
    if (!(total_duration > 0.0)) throw std::invalid_argument("total duration must be positive");
    double prev = 0.0;
    for (double t : pulse_times) {
        if (!(t > prev) || !(t < total_duration))
            throw std::invalid_argument("pulse times must be strictly increasing inside (0, T)");
        prev = t;
    }
    return {total_duration, std::move(pulse_times), ScheduleKind::custom};
}

// T = (n+1)/(2 f_mod): all n+1 intervals equal 1/(2 f_mod), so the toggling
// square wave has fundamental frequency f_mod.
inline PulseSchedule make_equidistant(int n, double f_mod) {
    if (n < 0) throw std::invalid_argument("pulse count must be non-negative");
    if (!(f_mod > 0.0)) throw std::invalid_argument("modulation frequency must be positive");
    const double T = (n + 1) / (2.0 * f_mod);
    PulseSchedule s;
    s.total_duration = T;
    s.kind = ScheduleKind::equidistant;
    s.pulse_times.reserve(static_cast<std::size_t>(n));
    for (int j = 1; j <= n; ++j) s.pulse_times.push_back(j * T / (n + 1));
    return s;
}

inline PulseSchedule make_uhrig(int n, double total_duration) {
    if (n < 1) throw std::invalid_argument("uhrig schedule needs at least one pulse");
    if (!(total_duration > 0.0)) throw std::invalid_argument("total duration must be positive");
    PulseSchedule s;
    s.total_duration = total_duration;
    s.kind = ScheduleKind::uhrig;
    s.pulse_times.reserve(static_cast<std::size_t>(n));
    for (int j = 1; j <= n; ++j) {
        const double sj = std::sin(std::numbers::pi * j / (2.0 * n + 2.0));
        s.pulse_times.push_back(total_duration * sj * sj);
    }
    return s;
}

// Sign function of the accumulated phase: +1 before the first pulse, flipped
// by every pulse. signs[j] holds on [breakpoints[j], breakpoints[j+1]).
struct TogglingFunction {
    std::vector<double> breakpoints;  // {0} + pulse times + {T}
    std::vector<int> signs;

    double total_duration() const { return breakpoints.back(); }
    std::size_t interval_count() const { return signs.size(); }
};

inline TogglingFunction toggling(const PulseSchedule& s) {
    TogglingFunction tf;
    tf.breakpoints.reserve(s.pulse_times.size() + 2);
    tf.breakpoints.push_back(0.0);
    tf.breakpoints.insert(tf.breakpoints.end(), s.pulse_times.begin(), s.pulse_times.end());
    tf.breakpoints.push_back(s.total_duration);
    tf.signs.resize(s.pulse_times.size() + 1);
    int sign = 1;
    for (auto& sj : tf.signs) {
        sj = sign;
        sign = -sign;
    }
    return tf;
}

namespace detail {

inline double sinc(double x) {
    if (std::fabs(x) < 1e-8) return 1.0 - x * x / 6.0;
    return std::sin(x) / x;
}

}  // namespace detail

// Windowed transform F_T(f) = integral of F(t) e^{-2 pi i f t} over [0, T].
// Each constant interval contributes s_j len sinc(pi f len) e^{-i pi f (u_j+u_{j+1})},
// which equals the difference-of-exponentials closed form and stays exact at
// f = 0 (value sum_j s_j (u_{j+1} - u_j)) without a branch.
inline std::complex<double> filter_transform(const TogglingFunction& tf, double f) {
    using std::numbers::pi;
    double re = 0.0;
    double im = 0.0;
    for (std::size_t j = 0; j < tf.signs.size(); ++j) {
        const double a = tf.breakpoints[j];
        const double b = tf.breakpoints[j + 1];
        const double len = b - a;
        const double amp = tf.signs[j] * len * detail::sinc(pi * f * len);
        const double ph = -pi * f * (a + b);
        re += amp * std::cos(ph);
        im += amp * std::sin(ph);
    }
    return {re, im};
}

// dF_T/df at f = 0: -pi i sum_j s_j (u_{j+1}^2 - u_j^2). Purely imaginary.
inline std::complex<double> filter_dc_slope(const TogglingFunction& tf) {
    double sum = 0.0;
    for (std::size_t j = 0; j < tf.signs.size(); ++j) {
        const double a = tf.breakpoints[j];
        const double b = tf.breakpoints[j + 1];
        sum += tf.signs[j] * (b * b - a * a);
    }
    return {0.0, -std::numbers::pi * sum};
}

struct FilterPeak {
    double frequency = 0.0;  // Hz
    double magnitude = 0.0;  // seconds
};

// Global maximizer of |F_T| in [f_lo, f_hi]: coarse grid scan, then
// golden-section refinement of the bracketing interval down to refine_tol.
// The grid step must resolve the main lobe (<= 1/(4T) is safe).
inline FilterPeak filter_peak(const TogglingFunction& tf, double f_lo, double f_hi,
                              double grid_step, double refine_tol = 0.01) {
    if (!(f_lo < f_hi)) throw std::invalid_argument("empty frequency range");
    if (!(grid_step > 0.0)) throw std::invalid_argument("grid step must be positive");
    const auto mag = [&tf](double f) { return std::abs(filter_transform(tf, f)); };

    double best_f = f_lo;
    double best_m = mag(f_lo);
    const auto consider = [&](double f) {
        const double m = mag(f);
        if (m > best_m) {
            best_m = m;
            best_f = f;
        }
    };
    for (double f = f_lo + grid_step; f < f_hi; f += grid_step) consider(f);
    consider(f_hi);

    double lo = std::max(f_lo, best_f - grid_step);
    double hi = std::min(f_hi, best_f + grid_step);
    const double inv_phi = 0.6180339887498949;
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double m1 = mag(x1);
    double m2 = mag(x2);
    while (hi - lo > refine_tol) {
        if (m1 < m2) {
            lo = x1;
            x1 = x2;
            m1 = m2;
            x2 = lo + inv_phi * (hi - lo);
            m2 = mag(x2);
        } else {
            hi = x2;
            x2 = x1;
            m2 = m1;
            x1 = hi - inv_phi * (hi - lo);
            m1 = mag(x1);
        }
    }
    const double f_star = 0.5 * (lo + hi);
    return {f_star, mag(f_star)};
}

}  // namespace ddspec
