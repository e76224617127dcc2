#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ddspec/bessel.hpp"
#include "ddspec/errors.hpp"
#include "ddspec/noise.hpp"
#include "ddspec/parallel.hpp"
#include "ddspec/rng.hpp"
#include "ddspec/schedule.hpp"

namespace ddspec {

// Signed fringe contrast; std_error present only for Monte Carlo estimates.
struct CoherenceValue {
    double A = 1.0;
    std::optional<double> std_error;
};

struct FringePoint {
    double phi_rf = 0.0;
    double p_up = 0.0;
    long shots = 0;
};

struct FringeScan {
    std::vector<FringePoint> points;
};

// Response of a schedule to one tone: weight = N_k |F_T(f_k)|,
// theta = arg F_T(f_k). The accumulated phase for offsets alpha is
//   phi = sum_k weight_k cos(alpha_k - theta_k),
// which equals phase_integral by conjugate symmetry of F_T; the identity is
// pinned by tests, and the sampling paths use this precomputed form.
struct ToneResponse {
    double weight = 0.0;
    double theta = 0.0;
};

inline std::vector<ToneResponse> tone_responses(const DiscreteSpectrum& s,
                                                const TogglingFunction& tf) {
    std::vector<ToneResponse> resp;
    resp.reserve(s.tones.size());
    for (const auto& tone : s.tones) {
        const std::complex<double> F = filter_transform(tf, tone.frequency);
        resp.push_back({tone.amplitude * std::abs(F), std::arg(F)});
    }
    return resp;
}

// phi = sum_k N_k sum_j s_j [sin(2 pi f_k u_{j+1} + a_k) - sin(2 pi f_k u_j + a_k)]/(2 pi f_k),
// evaluated per interval as len sinc(pi f len) cos(pi f (u_j + u_{j+1}) + a_k),
// which covers f = 0 (contribution cos(a_k) sum_j s_j len_j) without a branch.
// The slow drift is excluded.
inline double phase_integral(const DiscreteSpectrum& s, const std::vector<double>& phases,
                             const TogglingFunction& tf) {
    if (phases.size() != s.tones.size())
        throw std::invalid_argument("phase count must match tone count");
    using std::numbers::pi;
    double phi = 0.0;
    for (std::size_t k = 0; k < s.tones.size(); ++k) {
        const double f = s.tones[k].frequency;
        double acc = 0.0;
        for (std::size_t j = 0; j < tf.signs.size(); ++j) {
            const double a = tf.breakpoints[j];
            const double b = tf.breakpoints[j + 1];
            const double len = b - a;
            acc += tf.signs[j] * len * detail::sinc(pi * f * len) *
                   std::cos(pi * f * (a + b) + phases[k]);
        }
        phi += s.tones[k].amplitude * acc;
    }
    return phi;
}

namespace detail {

inline void require_random_phases(const DiscreteSpectrum& s, const char* op) {
    for (const auto& tone : s.tones)
        if (tone.mode == PhaseMode::locked)
            throw mode_mismatch_error(std::string(op) + " requires random-phase tones; "
                                      "locked tones need coherence_mixing");
}

inline double drift_argument(const DiscreteSpectrum& s, const TogglingFunction& tf) {
    if (!s.slow_drift) return 0.0;
    return 2.0 * std::numbers::pi * s.slow_drift->product * std::abs(filter_dc_slope(tf));
}

}  // namespace detail

// A = prod_k J0(N_k |F_T(f_k)|) * J0(2 pi P |F_T'(0)|).
inline CoherenceValue coherence_product(const DiscreteSpectrum& s, const TogglingFunction& tf) {
    detail::require_random_phases(s, "coherence_product");
    double A = 1.0;
    for (const auto& tone : s.tones)
        A *= bessel_j0(tone.amplitude * std::abs(filter_transform(tf, tone.frequency)));
    if (s.slow_drift) A *= bessel_j0(detail::drift_argument(s, tf));
    return {A, std::nullopt};
}

// Gaussian / perturbative limit: A = exp(-sum_k x_k^2/4 - x_drift^2/4) with
// x_k = N_k |F_T(f_k)|. Agrees with the product to O(x^4).
inline CoherenceValue weak_coherence(const DiscreteSpectrum& s, const TogglingFunction& tf) {
    detail::require_random_phases(s, "weak_coherence");
    double expo = 0.0;
    for (const auto& tone : s.tones) {
        const double x = tone.amplitude * std::abs(filter_transform(tf, tone.frequency));
        expo += x * x / 4.0;
    }
    const double xd = detail::drift_argument(s, tf);
    expo += xd * xd / 4.0;
    return {std::exp(-expo), std::nullopt};
}

// Mixing sum for phase-locked commensurate tones:
//   A = sum over integer vectors h with sum|h_k| <= h_max, |sum h_k f_k| <= f_tol,
//       sum h_k even, of (-1)^{sum h/2} cos(sum h_k alpha~_k) prod_k J_{h_k}(x_k),
// with x_k = N_k |F_T(f_k)| and alpha~_k = alpha_k - arg F_T(f_k). The filter
// phase enters with a minus sign because the effective tone phase is
// cos(alpha_k - arg F_T(f_k)); the common-time-origin Monte Carlo oracle pins
// this sign. The all-zero vector reproduces the plain product's tone factor,
// and the phase-independent drift factor multiplies the sum unchanged.
inline CoherenceValue coherence_mixing(const DiscreteSpectrum& s, const TogglingFunction& tf,
                                       int h_max, double f_tol = 1e-6) {
    if (h_max < 1 || h_max > 8) throw std::invalid_argument("h_max must be in [1, 8]");
    if (!(f_tol >= 0.0)) throw std::invalid_argument("f_tol must be non-negative");
    for (const auto& tone : s.tones)
        if (tone.mode != PhaseMode::locked)
            throw mode_mismatch_error("coherence_mixing requires locked tones");

    const auto resp = tone_responses(s, tf);
    const std::size_t d = s.tones.size();
    std::vector<double> eff_phase(d);
    for (std::size_t k = 0; k < d; ++k) eff_phase[k] = s.tones[k].offset - resp[k].theta;

    // J_{|h|}(x_k) table; negative orders via parity.
    std::vector<std::vector<double>> jtab(d);
    for (std::size_t k = 0; k < d; ++k) {
        jtab[k].resize(h_max + 1);
        for (int h = 0; h <= h_max; ++h) jtab[k][h] = bessel_j(h, resp[k].weight);
    }
    const auto j_signed = [&jtab](std::size_t k, int h) {
        const double v = jtab[k][h < 0 ? -h : h];
        return (h < 0 && (h & 1)) ? -v : v;
    };

    double total = 0.0;
    std::vector<int> h(d, 0);
    const auto recurse = [&](auto&& self, std::size_t k, int budget, double f_sum, int h_sum,
                             double phase_sum, double j_prod) -> void {
        if (k == d) {
            if (std::fabs(f_sum) <= f_tol && (h_sum % 2) == 0) {
                const int half = h_sum / 2;
                const double parity = (half % 2 == 0) ? 1.0 : -1.0;
                total += parity * std::cos(phase_sum) * j_prod;
            }
            return;
        }
        for (int hk = -budget; hk <= budget; ++hk) {
            self(self, k + 1, budget - std::abs(hk), f_sum + hk * s.tones[k].frequency,
                 h_sum + hk, phase_sum + hk * eff_phase[k], j_prod * j_signed(k, hk));
        }
    };
    recurse(recurse, 0, h_max, 0.0, 0, 0.0, 1.0);

    if (s.slow_drift) total *= bessel_j0(detail::drift_argument(s, tf));
    return {total, std::nullopt};
}

enum class McModeKind { independent_phases, common_time_origin };

struct McMode {
    McModeKind kind = McModeKind::independent_phases;
    double period = 0.0;  // seconds; common_time_origin only
};

inline McMode independent_phases() { return {McModeKind::independent_phases, 0.0}; }
inline McMode common_time_origin(double period) { return {McModeKind::common_time_origin, period}; }

// Monte Carlo estimate plus the imaginary-part diagnostic (mean of sin phi,
// expected 0 within error for independent phases).
struct McEstimate {
    CoherenceValue value;
    double imag = 0.0;
    double imag_std_error = 0.0;
};

namespace detail {

// Phase offsets drawn per sample: independent mode draws every tone iid
// uniform; common mode draws one shared time origin tau in [0, period) and
// sets alpha_k = offset_k + 2 pi f_k tau for locked tones (random tones stay
// iid uniform, which a shared origin cannot correlate). The slow drift enters
// as a pseudo-tone drift_arg cos(alpha) with alpha iid uniform in both modes;
// averaging that term alone gives J0(drift_arg), which keeps every sampling
// path consistent with the analytic product and mixing factors.
inline double sample_phase_sum(const DiscreteSpectrum& s, const std::vector<ToneResponse>& resp,
                               double drift_arg, const McMode& mode, CounterRng& rng) {
    const double two_pi = 2.0 * std::numbers::pi;
    double phi = 0.0;
    if (mode.kind == McModeKind::independent_phases) {
        for (std::size_t k = 0; k < resp.size(); ++k)
            phi += resp[k].weight * std::cos(rng.next_angle() - resp[k].theta);
    } else {
        const double tau = rng.next_double() * mode.period;
        for (std::size_t k = 0; k < resp.size(); ++k) {
            const double alpha = s.tones[k].mode == PhaseMode::locked
                                     ? s.tones[k].offset + two_pi * s.tones[k].frequency * tau
                                     : rng.next_angle();
            phi += resp[k].weight * std::cos(alpha - resp[k].theta);
        }
    }
    if (drift_arg > 0.0) phi += drift_arg * std::cos(rng.next_angle());
    return phi;
}

inline void check_mc_mode(const McMode& mode) {
    if (mode.kind == McModeKind::common_time_origin && !(mode.period > 0.0))
        throw std::invalid_argument("common time origin needs a positive period");
}

}  // namespace detail

// Sample mean of cos(phi) over per-sample phase draws. Substreams are keyed
// by sample index and partial sums folded in fixed block order, so the result
// is bit-identical for any thread count.
inline McEstimate coherence_monte_carlo_detailed(const DiscreteSpectrum& s,
                                                 const TogglingFunction& tf, std::size_t samples,
                                                 std::uint64_t seed, McMode mode,
                                                 unsigned threads = 1) {
    if (samples < 100) throw std::invalid_argument("need at least 100 samples");
    detail::check_mc_mode(mode);
    const auto resp = tone_responses(s, tf);
    const double drift_arg = detail::drift_argument(s, tf);
    if (resp.empty() && drift_arg == 0.0) return {{1.0, 0.0}, 0.0, 0.0};

    const std::uint64_t mc_key = derive_stream(seed, 0x6d63ULL);
    const std::size_t blocks = (samples + kReductionBlock - 1) / kReductionBlock;

    struct Partial {
        double c = 0.0, s = 0.0, cc = 0.0, ss = 0.0;
    };
    std::vector<Partial> parts(blocks);
    parallel_for(blocks, threads, [&](std::size_t b) {
        Partial p;
        const std::size_t lo = b * kReductionBlock;
        const std::size_t hi = std::min(samples, lo + kReductionBlock);
        for (std::size_t i = lo; i < hi; ++i) {
            CounterRng rng(derive_stream(mc_key, i));
            const double phi = detail::sample_phase_sum(s, resp, drift_arg, mode, rng);
            const double c = std::cos(phi);
            const double sn = std::sin(phi);
            p.c += c;
            p.s += sn;
            p.cc += c * c;
            p.ss += sn * sn;
        }
        parts[b] = p;
    });

    double sum_c = 0.0, sum_s = 0.0, sum_cc = 0.0, sum_ss = 0.0;
    for (const auto& p : parts) {
        sum_c += p.c;
        sum_s += p.s;
        sum_cc += p.cc;
        sum_ss += p.ss;
    }
    const double m = static_cast<double>(samples);
    const double mean_c = sum_c / m;
    const double mean_s = sum_s / m;
    const double var_c = std::max(0.0, (sum_cc - m * mean_c * mean_c) / (m - 1.0));
    const double var_s = std::max(0.0, (sum_ss - m * mean_s * mean_s) / (m - 1.0));
    McEstimate est;
    est.value = {mean_c, std::sqrt(var_c / m)};
    est.imag = mean_s;
    est.imag_std_error = std::sqrt(var_s / m);
    return est;
}

inline CoherenceValue coherence_monte_carlo(const DiscreteSpectrum& s, const TogglingFunction& tf,
                                            std::size_t samples, std::uint64_t seed, McMode mode,
                                            unsigned threads = 1) {
    return coherence_monte_carlo_detailed(s, tf, samples, seed, mode, threads).value;
}

inline double ramsey_probability(double A, double phi_rf) {
    if (!(std::fabs(A) <= 1.0)) throw std::invalid_argument("|A| must not exceed 1");
    return 0.5 - 0.5 * A * std::cos(phi_rf);
}

// Per-shot physics: draw the noise phases, form p = 1/2 - cos(phi_rf - phi)/2,
// then one Bernoulli projection. Substreams are keyed by (point, shot), so the
// scan is reproducible for any thread count or evaluation order.
inline FringeScan simulate_fringe(const DiscreteSpectrum& s, const TogglingFunction& tf,
                                  const std::vector<double>& phi_grid, long shots,
                                  std::uint64_t seed, McMode mode, unsigned threads = 1) {
    if (shots < 1) throw std::invalid_argument("need at least one shot per point");
    if (phi_grid.empty()) throw std::invalid_argument("phase grid must not be empty");
    detail::check_mc_mode(mode);

    const auto resp = tone_responses(s, tf);
    const double drift_arg = detail::drift_argument(s, tf);
    const std::uint64_t scan_key = derive_stream(seed, 0x6672ULL);
    FringeScan scan;
    scan.points.resize(phi_grid.size());
    parallel_for(phi_grid.size(), threads, [&](std::size_t i) {
        const std::uint64_t point_key = derive_stream(scan_key, i);
        long ups = 0;
        for (long r = 0; r < shots; ++r) {
            CounterRng rng(derive_stream(point_key, static_cast<std::uint64_t>(r)));
            const double phi = detail::sample_phase_sum(s, resp, drift_arg, mode, rng);
            const double p = 0.5 - 0.5 * std::cos(phi_grid[i] - phi);
            if (rng.next_double() < p) ++ups;
        }
        scan.points[i] = {phi_grid[i], static_cast<double>(ups) / shots, shots};
    });
    return scan;
}

}  // namespace ddspec
