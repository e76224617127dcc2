// End-to-end checks of the toolkit against its quantitative contract.
// Each check prints one PASS/FAIL line; the exit code is the failure count.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

#include "ddspec/ddspec.hpp"

using namespace ddspec;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return buf;
}

unsigned worker_threads() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : std::min(hw, 4u);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> linear_range(double lo, double hi, double step) {
    std::vector<double> out;
    for (double v = lo; v <= hi + step * 1e-9; v += step) out.push_back(v);
    return out;
}

// 1. The Bessel-product prediction agrees with Monte Carlo phase averaging
//    on randomized spectra (up to 4 tones, arguments up to 12) within
//    4 standard errors on at least 48 of 50 draws, in under a minute.
Outcome check_product_vs_monte_carlo() {
    const auto t0 = std::chrono::steady_clock::now();
    const unsigned threads = worker_threads();
    CounterRng rng(derive_stream(0xacc, 1));
    const int trials = 50;
    int within = 0;
    for (int trial = 0; trial < trials; ++trial) {
        const int n = 1 + static_cast<int>(rng.next_double() * 20.0);
        const double f_mod = 40.0 + 160.0 * rng.next_double();
        const auto tf = toggling(make_equidistant(n, f_mod));
        const int d = 1 + static_cast<int>(rng.next_double() * 4.0);
        std::vector<NoiseTone> tones;
        while (static_cast<int>(tones.size()) < d) {
            const double f = 20.0 + 280.0 * rng.next_double();
            bool too_close = false;
            for (const auto& t : tones)
                if (std::fabs(t.frequency - f) < 0.5) too_close = true;
            const double mag = std::abs(filter_transform(tf, f));
            if (too_close || mag < 1e-3 * tf.total_duration()) continue;
            const double x = 0.3 + 11.7 * rng.next_double();
            tones.push_back(random_phase_tone(x / mag, f));
        }
        const auto s = make_spectrum(std::move(tones));
        const double exact = coherence_product(s, tf).A;
        const auto mc = coherence_monte_carlo(s, tf, 100000, derive_stream(0xacc, 100 + trial),
                                              independent_phases(), threads);
        if (std::fabs(mc.A - exact) <= 4.0 * *mc.std_error) ++within;
    }
    const double secs = seconds_since(t0);
    Outcome o;
    o.pass = within >= 48 && secs < 60.0;
    o.detail = fmt("%d/%d draws within 4 s.e., %.1f s", within, trials, secs);
    return o;
}

// 2. A 15.3 uG tone probed for 60 ms with equidistant pulses sits deep in
//    the strong-noise regime: noise index 10.3 +/- 0.15.
Outcome check_noise_index() {
    const double amplitude = tone_from_field(15.3, 100.0, default_units()).amplitude;
    const double eta = noise_index(amplitude, 0.06, kSquareWaveC);
    Outcome o;
    o.pass = std::fabs(eta - 10.3) <= 0.15;
    o.detail = fmt("eta = %.3f (want 10.3 +/- 0.15)", eta);
    return o;
}

// 3. The same strong tone splits the coherence dip: scanning 80..120 Hz at
//    n = 11 shows exactly five local minima, the coherence changing sign
//    along the row.
Outcome check_power_broadening() {
    DiscreteSpectrum s;
    s.tones.push_back(tone_from_field(15.3, 100.0, default_units()));
    std::vector<double> a;
    for (double f : linear_range(80.0, 120.0, 0.25))
        a.push_back(coherence_product(s, toggling(make_equidistant(11, f))).A);

    std::vector<std::size_t> minima;
    for (std::size_t i = 1; i + 1 < a.size(); ++i)
        if (a[i] < a[i - 1] && a[i] < a[i + 1]) minima.push_back(i);

    int gaps_with_flip = 0;
    for (std::size_t m = 1; m < minima.size(); ++m) {
        bool flip = false;
        for (std::size_t i = minima[m - 1]; i < minima[m]; ++i)
            if (a[i] * a[i + 1] < 0.0) flip = true;
        if (flip) ++gaps_with_flip;
    }
    const double lo = *std::min_element(a.begin(), a.end());
    const double hi = *std::max_element(a.begin(), a.end());

    Outcome o;
    o.pass = minima.size() == 5 && gaps_with_flip >= 3 && lo < 0.0 && hi > 0.0;
    o.detail = fmt("%zu minima, %d/%zu gaps with a sign flip, A in [%.2f, %.2f]", minima.size(),
                   gaps_with_flip, minima.empty() ? 0 : minima.size() - 1, lo, hi);
    return o;
}

// 4. Signed coherence: a 3 uG tone leaves A positive at n = 1 but drives it
//    negative at n = 19, both analytically and through fitted fringes.
Outcome check_sign_flip() {
    const unsigned threads = worker_threads();
    DiscreteSpectrum s;
    s.tones.push_back(tone_from_field(3.0, 100.0, default_units()));
    const auto grid = uniform_phase_grid(16);

    const auto tf1 = toggling(make_equidistant(1, 100.0));
    const auto tf19 = toggling(make_equidistant(19, 100.0));
    const double a1 = coherence_product(s, tf1).A;
    const double a19 = coherence_product(s, tf19).A;
    const auto fit1 = fit_fringe(simulate_fringe(s, tf1, grid, 500, 101, independent_phases(),
                                                 threads));
    const auto fit19 = fit_fringe(simulate_fringe(s, tf19, grid, 500, 119, independent_phases(),
                                                  threads));

    Outcome o;
    o.pass = a1 > 0.0 && a19 < 0.0 && fit1.A > 0.0 && fit19.A < 0.0 &&
             std::fabs(fit1.A - a1) <= 4.0 * fit1.sigma &&
             std::fabs(fit19.A - a19) <= 4.0 * fit19.sigma;
    o.detail = fmt("A(1) = %.3f, fitted %.3f +/- %.3f; A(19) = %.3f, fitted %.3f +/- %.3f", a1,
                   fit1.A, fit1.sigma, a19, fit19.A, fit19.sigma);
    return o;
}

// 5. Filter passbands at fixed T = 66.7 ms: the equidistant peak sits at its
//    tuning frequency, the sine-spaced peak near 109.6 Hz with a peak
//    response between 0.40 T and 0.44 T.
Outcome check_filter_peaks() {
    const double T = 20.0 / 300.0;
    const auto eq = filter_peak(toggling(make_equidistant(19, 150.0)), 50.0, 300.0, 1.0);
    const auto uh = filter_peak(toggling(make_uhrig(20, T)), 50.0, 300.0, 1.0);
    const double ratio = uh.magnitude / T;

    Outcome o;
    o.pass = std::fabs(eq.frequency - 150.0) <= 1.0 && std::fabs(uh.frequency - 109.6) <= 1.0 &&
             ratio >= 0.40 && ratio <= 0.44;
    o.detail = fmt("equidistant peak %.2f Hz, sine-spaced peak %.2f Hz, response %.3f T",
                   eq.frequency, uh.frequency, ratio);
    return o;
}

// 6. Zero-crossing magnitometry recovers 2.9 uG at 100 Hz and 4.9 uG at
//    200 Hz from analytic pulse-count series within 15 percent.
Outcome check_zero_crossing() {
    const auto units = default_units();
    const unsigned threads = worker_threads();
    const auto recover = [&](double field_ug, double f_k) {
        DiscreteSpectrum s;
        s.tones.push_back(tone_from_field(field_ug, f_k, units));
        std::vector<int> rows;
        for (int n = 1; n <= 25; ++n) rows.push_back(n);
        const auto grid = scan_coherence(s, Scheme::equidistant, {f_k}, rows,
                                         analytic_measurement(), threads);
        return magnitude_by_zero_crossing(extract_series(grid, f_k), f_k, Scheme::equidistant,
                                          units)
            .amplitude_ug;
    };
    const double b1 = recover(2.9, 100.0);
    const double b2 = recover(4.9, 200.0);

    Outcome o;
    o.pass = std::fabs(b1 - 2.9) / 2.9 <= 0.15 && std::fabs(b2 - 4.9) / 4.9 <= 0.15;
    o.detail = fmt("2.9 uG -> %.3f uG, 4.9 uG -> %.3f uG", b1, b2);
    return o;
}

// 7. Closed loop: simulate fringe measurements of four unknown tones plus a
//    slow drift, identify the comb teeth, seed magnitudes from zero
//    crossings, and fine tune. Amplitudes land within max(10%, 3 sigma),
//    the drift product within 20 percent, in under five minutes.
Outcome check_closed_loop() {
    const auto t0 = std::chrono::steady_clock::now();
    const unsigned threads = worker_threads();
    const auto units = default_units();
    const std::vector<double> true_f{50.0, 100.0, 150.0, 200.0};
    const std::vector<double> true_b{2.0, 15.4, 4.2, 6.3};
    const double true_drift = 66.0;

    DiscreteSpectrum s;
    for (std::size_t k = 0; k < true_f.size(); ++k)
        s.tones.push_back(tone_from_field(true_b[k], true_f[k], units));
    s.slow_drift = SlowDrift{true_drift};

    const auto freqs = linear_range(45.0, 220.0, 2.5);
    const std::vector<int> rows{1, 3, 5, 7, 9, 11};
    const auto grid = scan_coherence(s, Scheme::equidistant, freqs, rows,
                                     fringe_measurement(100, 16, 0x77), threads);

    PeakOptions opt;
    opt.comb = true;
    opt.comb_base = 50.0;
    const auto cands = identify_peaks(grid, opt);
    if (cands.size() != true_f.size()) {
        std::string found;
        for (const auto& c : cands) found += fmt(" %.6g", c.frequency);
        return {false, fmt("expected 4 comb teeth, got %zu:%s", cands.size(), found.c_str())};
    }
    for (std::size_t k = 0; k < cands.size(); ++k)
        if (cands[k].frequency != true_f[k])
            return {false, fmt("tooth %zu at %.6g Hz, expected %.6g", k, cands[k].frequency,
                               true_f[k])};

    std::vector<double> init;
    for (const auto& c : cands) {
        try {
            init.push_back(magnitude_by_zero_crossing(extract_series(grid, c.frequency),
                                                      c.frequency, Scheme::equidistant, units)
                               .amplitude_ug);
        } catch (const not_crossed_error&) {
            init.push_back(1.0);
        }
    }

    std::vector<FitPoint> data;
    for (double f : freqs) {
        const auto series = extract_series(grid, f);
        data.push_back({f, 11, series.back().A, series.back().sigma});
    }
    const auto report = fine_tune_fit(data, Scheme::equidistant,
                                      {cands[0].frequency, cands[1].frequency,
                                       cands[2].frequency, cands[3].frequency},
                                      true, init, units, 20.0);

    const double secs = seconds_since(t0);
    bool amps_ok = report.converged;
    std::string detail;
    for (std::size_t k = 0; k < true_b.size(); ++k) {
        const auto& t = report.tones[k];
        const double err = std::fabs(t.amplitude_ug - true_b[k]);
        if (err > std::max(0.10 * true_b[k], 3.0 * t.sigma_ug)) amps_ok = false;
        detail += fmt("%.6g: %.2f/%.2f ", true_f[k], t.amplitude_ug, true_b[k]);
    }
    const double drift_err = std::fabs(report.drift_product - true_drift) / true_drift;

    Outcome o;
    o.pass = amps_ok && drift_err <= 0.20 && secs < 300.0;
    o.detail = detail + fmt("drift %.1f/%.0f, %.1f s", report.drift_product, true_drift, secs);
    return o;
}

// 8. Cross-scheme consistency: the same four-tone spectrum characterized
//    through equidistant and sine-spaced filters (fitted fringes, 1000
//    shots per point) gives amplitudes agreeing within 15 percent.
Outcome check_cross_scheme() {
    const unsigned threads = worker_threads();
    const auto units = default_units();
    const std::vector<double> tone_f{100.0, 150.0, 200.0, 250.0};
    const std::vector<double> tone_b{2.7, 9.0, 2.8, 3.0};

    DiscreteSpectrum s;
    for (std::size_t k = 0; k < tone_f.size(); ++k)
        s.tones.push_back(tone_from_field(tone_b[k], tone_f[k], units));

    const auto band = linear_range(80.0, 340.0, 2.5);
    const auto eq_grid = scan_coherence(s, Scheme::equidistant, band, {19},
                                        fringe_measurement(1000, 16, 0x85a), threads);
    const auto uh_grid = scan_coherence(s, Scheme::uhrig, band, {20},
                                        fringe_measurement(1000, 16, 0x85b), threads);

    // both fits start from equidistant zero-crossing magnitudes
    std::vector<int> series_rows;
    for (int n = 1; n <= 45; n += 2) series_rows.push_back(n);
    const auto series_grid = scan_coherence(s, Scheme::equidistant, tone_f, series_rows,
                                            fringe_measurement(1000, 16, 0x85c), threads);
    std::vector<double> init;
    for (double f : tone_f) {
        try {
            init.push_back(
                magnitude_by_zero_crossing(extract_series(series_grid, f), f,
                                           Scheme::equidistant, units)
                    .amplitude_ug);
        } catch (const not_crossed_error&) {
            init.push_back(1.0);
        }
    }

    const auto fit_points = [](const ScanGrid& grid, int n) {
        std::vector<FitPoint> data;
        for (std::size_t i = 0; i < grid.freqs.size(); ++i)
            data.push_back({grid.freqs[i], n, grid.cell(i, 0).A, grid.cell(i, 0).sigma});
        return data;
    };
    const auto eq_fit = fine_tune_fit(fit_points(eq_grid, 19), Scheme::equidistant, tone_f,
                                      false, init, units);
    const auto uh_fit = fine_tune_fit(fit_points(uh_grid, 20), Scheme::uhrig, tone_f, false,
                                      init, units);

    bool ok = eq_fit.converged && uh_fit.converged;
    double worst = 0.0;
    std::string detail;
    for (std::size_t k = 0; k < tone_f.size(); ++k) {
        const double be = eq_fit.tones[k].amplitude_ug;
        const double bu = uh_fit.tones[k].amplitude_ug;
        const double rel = std::fabs(bu - be) / be;
        worst = std::max(worst, rel);
        if (rel > 0.15) ok = false;
        detail += fmt("%.6g: %.2f/%.2f ", tone_f[k], be, bu);
    }

    Outcome o;
    o.pass = ok;
    o.detail = detail + fmt("worst split %.1f%%", 100.0 * worst);
    return o;
}

// 9. Frequency mixing of two phase-locked tones: the resonant-vector sum
//    tracks Monte Carlo with a shared time origin at eight offsets, with a
//    clearly visible offset dependence.
Outcome check_locked_mixing() {
    const unsigned threads = worker_threads();
    const auto tf = toggling(make_custom(0.035, {0.0141}));
    const double n1 = 4.2 / std::abs(filter_transform(tf, 50.0));
    const double n2 = 2.4 / std::abs(filter_transform(tf, 100.0));

    bool all_within = true;
    double a_lo = 1.0, a_hi = -1.0, worst_se = 0.0;
    for (int k = 0; k < 8; ++k) {
        const double a2 = 0.3 + k * std::numbers::pi / 4.0;
        DiscreteSpectrum s;
        s.tones.push_back(locked_tone(n1, 50.0, 0.7));
        s.tones.push_back(locked_tone(n2, 100.0, a2));
        const double mix = coherence_mixing(s, tf, 6).A;
        const auto mc = coherence_monte_carlo(s, tf, 100000, derive_stream(0x313, k),
                                              common_time_origin(0.02), threads);
        if (std::fabs(mc.A - mix) > 4.0 * *mc.std_error) all_within = false;
        a_lo = std::min(a_lo, mix);
        a_hi = std::max(a_hi, mix);
        worst_se = std::max(worst_se, *mc.std_error);
    }
    const double spread = a_hi - a_lo;

    Outcome o;
    o.pass = all_within && spread >= 10.0 * worst_se;
    o.detail = fmt("8/8 within 4 s.e.: %s; offset swing %.3f vs s.e. %.4f",
                   all_within ? "yes" : "no", spread, worst_se);
    return o;
}

// 10. The Gaussian weak limit holds to 1e-3 at argument 0.2 and visibly
//     breaks (by more than 0.05) at argument 2.
Outcome check_weak_limit() {
    const auto tf = toggling(make_equidistant(5, 120.0));
    const double mag120 = std::abs(filter_transform(tf, 120.0));
    const double mag57 = std::abs(filter_transform(tf, 57.0));

    DiscreteSpectrum weak;
    weak.tones.push_back(random_phase_tone(0.2 / mag120, 120.0));
    weak.tones.push_back(random_phase_tone(0.2 / mag57, 57.0));
    const double weak_gap =
        std::fabs(coherence_product(weak, tf).A - weak_coherence(weak, tf).A);

    DiscreteSpectrum strong;
    strong.tones.push_back(random_phase_tone(2.0 / mag120, 120.0));
    const double strong_gap =
        std::fabs(coherence_product(strong, tf).A - weak_coherence(strong, tf).A);

    Outcome o;
    o.pass = weak_gap <= 1e-3 && strong_gap > 0.05;
    o.detail = fmt("gap %.2g at x = 0.2, %.3f at x = 2", weak_gap, strong_gap);
    return o;
}

// 11. The frequency bound improves with the noise index: sigma_f at
//     eta = 2 pi beats eta = 0.5, and the log-log slope over [2 pi, 30]
//     sits between -0.8 and -0.3.
Outcome check_bound_scaling() {
    const int n = 11;
    const double f_mod = 100.0;
    const double T = (n + 1) / (2.0 * f_mod);
    const auto grid = uniform_phase_grid(16);
    const auto best_sigma_f = [&](double eta) {
        const double N = eta / (kSquareWaveC * T);
        double best = std::numeric_limits<double>::infinity();
        for (int i = 1; i <= 9; ++i) {
            const auto r = crb_single_tone(N, f_mod + 0.05 * i / T, Scheme::equidistant, n,
                                           f_mod, 100, grid);
            best = std::min(best, r.sigma_f);
        }
        return best;
    };

    const double strong = best_sigma_f(2.0 * std::numbers::pi);
    const double weak = best_sigma_f(0.5);

    const int points = 20;
    const double eta_lo = 2.0 * std::numbers::pi;
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (int j = 0; j < points; ++j) {
        const double eta = eta_lo * std::pow(30.0 / eta_lo, j / (points - 1.0));
        const double x = std::log(eta);
        const double y = std::log(best_sigma_f(eta));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double slope = (points * sxy - sx * sy) / (points * sxx - sx * sx);

    Outcome o;
    o.pass = strong < weak && slope >= -0.8 && slope <= -0.3;
    o.detail = fmt("sigma_f %.4g at eta = 2pi vs %.4g at 0.5; slope %.2f", strong, weak, slope);
    return o;
}

}  // namespace

int main() {
    struct Check {
        const char* name;
        Outcome (*run)();
    };
    const Check checks[] = {
        {"product prediction vs Monte Carlo", check_product_vs_monte_carlo},
        {"strong-noise index", check_noise_index},
        {"power-broadened minima", check_power_broadening},
        {"coherence sign flip", check_sign_flip},
        {"filter passband peaks", check_filter_peaks},
        {"zero-crossing magnitometry", check_zero_crossing},
        {"closed-loop characterization", check_closed_loop},
        {"cross-scheme consistency", check_cross_scheme},
        {"locked-tone mixing", check_locked_mixing},
        {"weak-limit validity window", check_weak_limit},
        {"frequency-bound scaling", check_bound_scaling},
    };

    int failures = 0;
    int index = 0;
    for (const auto& c : checks) {
        ++index;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, fmt("exception: %s", e.what())};
        }
        if (!o.pass) ++failures;
        std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", index, c.name,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu checks passed\n", index - failures, std::size(checks));
    return failures;
}
