#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ddspec/ddspec.hpp"

namespace {

using namespace ddspec;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitPrecondition = 3;
constexpr int kExitNoConvergence = 4;

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open '" + path + "'");
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw parse_error("cannot write '" + path + "'");
    return out;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in = open_input(path);
    return load_run_config(in);
}

Scheme parse_scheme(const std::string& name) {
    if (name == "equidistant") return Scheme::equidistant;
    if (name == "uhrig") return Scheme::uhrig;
    throw parse_error("scheme must be 'equidistant' or 'uhrig'");
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& cli_seed, const RunConfig& cfg) {
    if (cli_seed) return *cli_seed;
    if (cfg.measurement.seed) return *cfg.measurement.seed;
    throw parse_error("fringe measurement needs a seed (config [measurement] or --seed)");
}

std::string resolve_prefix(const std::string& cli_prefix, bool cli_given, const RunConfig& cfg) {
    if (!cli_given && cfg.out_prefix) return *cfg.out_prefix;
    return cli_prefix;
}

void print_value(const char* label, double v, const char* unit = "") {
    std::printf("%s = %.6g%s\n", label, v, unit);
}

int cmd_simulate_fringe(const std::string& config_path, const std::optional<std::uint64_t>& seed,
                        const std::string& prefix, bool prefix_given, unsigned threads) {
    const RunConfig cfg = load_config(config_path);
    if (cfg.measurement.kind != Measurement::Kind::fringe)
        throw parse_error("simulate-fringe needs measurement mode = fringe");
    const PulseSchedule schedule = single_schedule(cfg);
    const auto tf = toggling(schedule);
    const auto phi_grid = uniform_phase_grid(cfg.measurement.phi_points);
    const FringeScan scan =
        simulate_fringe(cfg.spectrum, tf, phi_grid, cfg.measurement.shots,
                        resolve_seed(seed, cfg), cfg.measurement.mode, threads);
    const std::string out_path = resolve_prefix(prefix, prefix_given, cfg) + "_fringe.csv";
    {
        auto out = open_output(out_path);
        write_fringe_csv(out, scan);
    }
    const FringeFit fit = fit_fringe(scan);
    std::printf("wrote %s\n", out_path.c_str());
    std::printf("fitted A = %.6g +/- %.6g\n", fit.A, fit.sigma);
    return kExitOk;
}

int cmd_scan(const std::string& config_path, const std::optional<std::uint64_t>& seed,
             const std::string& prefix, bool prefix_given, unsigned threads) {
    const RunConfig cfg = load_config(config_path);
    if (cfg.scheme.total_duration_s)
        throw parse_error("scan needs modulation frequencies, not a fixed T_s");
    Measurement m;
    if (cfg.measurement.kind == Measurement::Kind::fringe)
        m = fringe_measurement(cfg.measurement.shots, cfg.measurement.phi_points,
                               resolve_seed(seed, cfg), cfg.measurement.mode);
    const ScanGrid grid = scan_coherence(cfg.spectrum, cfg.scheme.kind, cfg.scheme.f_values,
                                         cfg.scheme.n_values, m, threads);
    const std::string out_path = resolve_prefix(prefix, prefix_given, cfg) + "_grid.csv";
    auto out = open_output(out_path);
    write_grid_csv(out, grid);
    std::printf("wrote %s (%zu frequencies x %zu pulse counts)\n", out_path.c_str(),
                grid.freqs.size(), grid.n_values.size());
    return kExitOk;
}

int cmd_identify(const std::string& grid_path, const PeakOptions& opt, const std::string& prefix) {
    auto in = open_input(grid_path);
    const ScanGrid grid = read_grid_csv(in);
    const auto candidates = identify_peaks(grid, opt);
    const std::string out_path = prefix + "_candidates.csv";
    {
        auto out = open_output(out_path);
        write_candidates_csv(out, candidates);
    }
    std::printf("wrote %s\n", out_path.c_str());
    for (const auto& c : candidates)
        std::printf("candidate %.6g Hz, dip %.4g, first seen at n = %d\n", c.frequency,
                    c.dip_depth, c.first_n_detected);
    if (candidates.empty()) std::printf("no candidates above the dip threshold\n");
    return kExitOk;
}

int cmd_zero_cross(const std::string& grid_path, double freq, Scheme scheme, double kappa) {
    auto in = open_input(grid_path);
    const ScanGrid grid = read_grid_csv(in);
    const auto series = extract_series(grid, freq, 1e-6);
    UnitsConfig units = default_units();
    if (kappa > 0.0) units.kappa = kappa;
    const ZeroCrossing zc = magnitude_by_zero_crossing(series, freq, scheme, units);
    std::printf("amplitude = %.6g uG (%.6g rad/s)\n", zc.amplitude_ug, zc.amplitude_rad_s);
    print_value("eta at crossing", zc.eta);
    std::printf("crossing at T = %.6g s, between n = %d and the next row\n", zc.duration,
                zc.n_low);
    return kExitOk;
}

int cmd_fit(const std::string& grid_path, const std::vector<double>& tones, bool slow_drift,
            const std::string& init_path, Scheme scheme, double drift_init, int max_iter,
            double kappa, const std::string& prefix) {
    if (tones.empty()) throw parse_error("--tones must list at least one frequency");
    auto in = open_input(grid_path);
    const ScanGrid grid = read_grid_csv(in);
    std::vector<FitPoint> data;
    data.reserve(grid.cells.size());
    for (std::size_t i_f = 0; i_f < grid.freqs.size(); ++i_f)
        for (std::size_t i_n = 0; i_n < grid.n_values.size(); ++i_n) {
            const auto& c = grid.cell(i_f, i_n);
            data.push_back({grid.freqs[i_f], grid.n_values[i_n], c.A, c.sigma});
        }

    std::vector<double> init(tones.size(), 1.0);
    if (!init_path.empty()) {
        auto init_in = open_input(init_path);
        const auto rows = read_report_csv(init_in);
        for (std::size_t k = 0; k < tones.size(); ++k)
            for (const auto& r : rows)
                if (std::fabs(r.frequency - tones[k]) <= 1e-3) {
                    init[k] = r.amplitude_ug;
                    break;
                }
    }

    UnitsConfig units = default_units();
    if (kappa > 0.0) units.kappa = kappa;
    const EstimateReport report =
        fine_tune_fit(data, scheme, tones, slow_drift, init, units, drift_init, max_iter);

    const std::string out_path = prefix + "_report.csv";
    {
        auto out = open_output(out_path);
        write_report_csv(out, report.tones);
    }
    std::printf("wrote %s\n", out_path.c_str());
    std::printf("converged = %s after %d iterations, reduced chi-square = %.6g\n",
                report.converged ? "true" : "false", report.iterations,
                report.reduced_chi_square);
    for (const auto& t : report.tones)
        std::printf("tone %.6g Hz: %.6g +/- %.6g uG\n", t.frequency, t.amplitude_ug, t.sigma_ug);
    if (report.drift_fitted)
        std::printf("slow drift product = %.6g +/- %.6g Hz^2\n", report.drift_product,
                    report.drift_sigma);
    return report.converged ? kExitOk : kExitNoConvergence;
}

int cmd_filter(Scheme scheme, int n, double total_duration, double f_mod,
               const std::string& f_range, const std::string& prefix) {
    PulseSchedule schedule = total_duration > 0.0
                                 ? (scheme == Scheme::equidistant
                                        ? make_equidistant(n, (n + 1) / (2.0 * total_duration))
                                        : make_uhrig(n, total_duration))
                                 : make_scan_schedule(scheme, n, f_mod);
    const auto tf = toggling(schedule);
    const auto freqs = parse_range(f_range);
    std::vector<FilterRow> rows;
    rows.reserve(freqs.size());
    for (double f : freqs) rows.push_back({f, std::abs(filter_transform(tf, f))});
    const std::string out_path = prefix + "_filter.csv";
    {
        auto out = open_output(out_path);
        write_filter_csv(out, rows);
    }
    std::printf("wrote %s\n", out_path.c_str());
    if (freqs.size() >= 2) {
        const FilterPeak peak =
            filter_peak(tf, freqs.front(), freqs.back(), freqs[1] - freqs[0]);
        std::printf("peak f = %.6g Hz, |F_T|/T = %.6g\n", peak.frequency,
                    peak.magnitude / tf.total_duration());
    }
    return kExitOk;
}

int cmd_crb(const std::string& eta_range, Scheme scheme, int n, double f_mod, long shots,
            int phi_points, const std::string& prefix) {
    const auto etas = parse_range(eta_range);
    for (double e : etas)
        if (!(e > 0.0)) throw parse_error("eta range must be positive");
    const double duration = (n + 1) / (2.0 * f_mod);
    const double c = scheme == Scheme::equidistant ? kSquareWaveC : kUhrigC;
    const auto phi_grid = uniform_phase_grid(phi_points);

    std::vector<CrbRow> rows;
    rows.reserve(etas.size());
    for (double eta : etas) {
        const double N = eta / (c * duration);
        // best operating point over a small detuning grid; on peak the
        // frequency derivative of |F_T| vanishes and sigma_f diverges
        double sigma_n = crb_single_tone(N, f_mod, scheme, n, f_mod, shots, phi_grid).sigma_N;
        double sigma_f = std::numeric_limits<double>::infinity();
        for (int i = 1; i <= 9; ++i) {
            const double f0 = f_mod + 0.05 * i / duration;
            const CrbResult r = crb_single_tone(N, f0, scheme, n, f_mod, shots, phi_grid);
            sigma_n = std::min(sigma_n, r.sigma_N);
            sigma_f = std::min(sigma_f, r.sigma_f);
        }
        rows.push_back({eta, sigma_n, sigma_f});
    }
    const std::string out_path = prefix + "_crb.csv";
    auto out = open_output(out_path);
    write_crb_csv(out, rows);
    std::printf("wrote %s (%zu eta values)\n", out_path.c_str(), rows.size());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spectrum analyzer for strong discrete dephasing noise on a single qubit"};
    app.require_subcommand(1);
    app.fallthrough();

    std::uint64_t seed_value = 0;
    std::string prefix = "out";
    unsigned threads = 1;
    auto* seed_opt = app.add_option("--seed", seed_value, "RNG seed (u64)");
    auto* out_opt = app.add_option("--out", prefix, "output path prefix")->capture_default_str();
    app.add_option("--threads", threads, "worker threads")->capture_default_str();

    std::string config_path;
    auto* sim = app.add_subcommand("simulate-fringe",
                                   "simulate a Ramsey fringe and fit its contrast");
    sim->add_option("config", config_path, "run config file")->required();

    auto* scan = app.add_subcommand("scan", "coherence vs pulse count and modulation frequency");
    scan->add_option("config", config_path, "run config file")->required();

    std::string grid_path;
    double comb_base = 0.0;
    PeakOptions peak_opt;
    auto* identify = app.add_subcommand("identify", "find candidate tones in a scan grid");
    identify->add_option("grid", grid_path, "scan grid CSV")->required();
    identify->add_option("--comb", comb_base, "snap candidates to multiples of this base (Hz)");
    identify->add_option("--dip-threshold", peak_opt.dip_threshold, "minimum 1 - A to count a dip")
        ->capture_default_str();
    identify->add_option("--merge-width", peak_opt.merge_width,
                         "cluster width in Hz (0 = filter bandwidth at the lowest frequency)");

    double zc_freq = 0.0;
    std::string scheme_name = "equidistant";
    double kappa = 0.0;
    auto* zero_cross = app.add_subcommand("zero-cross",
                                          "tone magnitude from the first coherence sign change");
    zero_cross->add_option("grid", grid_path, "scan grid CSV")->required();
    zero_cross->add_option("--freq", zc_freq, "tone frequency (a grid column), Hz")->required();
    zero_cross->add_option("--scheme", scheme_name, "equidistant or uhrig")->required();
    zero_cross->add_option("--kappa", kappa, "field-to-rate conversion, rad/s per G");

    std::vector<double> fit_tones;
    bool slow_drift = false;
    std::string init_path;
    double drift_init = 20.0;
    int max_iter = 200;
    auto* fit = app.add_subcommand("fit", "fit tone amplitudes to a scan grid");
    fit->add_option("grid", grid_path, "scan grid CSV")->required();
    fit->add_option("--tones", fit_tones, "model tone frequencies, Hz")
        ->required()
        ->delimiter(',');
    fit->add_flag("--slow-drift", slow_drift, "include a slow drift term");
    fit->add_option("--init", init_path, "initial amplitudes from a report CSV");
    fit->add_option("--scheme", scheme_name, "equidistant or uhrig")->required();
    fit->add_option("--drift-init", drift_init, "initial drift product, Hz^2")
        ->capture_default_str();
    fit->add_option("--max-iter", max_iter, "iteration cap")->capture_default_str();
    fit->add_option("--kappa", kappa, "field-to-rate conversion, rad/s per G");

    int n_pulses = 0;
    double total_duration = 0.0;
    double f_mod = 0.0;
    std::string f_range;
    auto* filter = app.add_subcommand("filter", "filter transform magnitude over a band");
    filter->add_option("--scheme", scheme_name, "equidistant or uhrig")->required();
    filter->add_option("--n", n_pulses, "pulse count")->required();
    filter->add_option("--T", total_duration, "total duration, s");
    filter->add_option("--f-mod", f_mod, "modulation frequency, Hz");
    filter->add_option("--f-range", f_range, "band as lo:hi:step, Hz")->required();

    std::string eta_range;
    long shots = 100;
    int phi_points = 16;
    auto* crb = app.add_subcommand("crb", "estimation bounds vs the noise index");
    crb->add_option("--eta-range", eta_range, "noise index range as lo:hi:step")->required();
    crb->add_option("--scheme", scheme_name, "equidistant or uhrig")->required();
    crb->add_option("--n", n_pulses, "pulse count")->required();
    crb->add_option("--f-mod", f_mod, "modulation frequency, Hz")->required();
    crb->add_option("--shots", shots, "shots per fringe point")->capture_default_str();
    crb->add_option("--phi-points", phi_points, "fringe phase points")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    const std::optional<std::uint64_t> seed =
        seed_opt->count() > 0 ? std::optional<std::uint64_t>(seed_value) : std::nullopt;
    const bool prefix_given = out_opt->count() > 0;

    try {
        if (sim->parsed())
            return cmd_simulate_fringe(config_path, seed, prefix, prefix_given, threads);
        if (scan->parsed()) return cmd_scan(config_path, seed, prefix, prefix_given, threads);
        if (identify->parsed()) {
            if (comb_base > 0.0) {
                peak_opt.comb = true;
                peak_opt.comb_base = comb_base;
            }
            return cmd_identify(grid_path, peak_opt, prefix);
        }
        if (zero_cross->parsed())
            return cmd_zero_cross(grid_path, zc_freq, parse_scheme(scheme_name), kappa);
        if (fit->parsed())
            return cmd_fit(grid_path, fit_tones, slow_drift, init_path, parse_scheme(scheme_name),
                           drift_init, max_iter, kappa, prefix);
        if (filter->parsed()) {
            if ((total_duration > 0.0) == (f_mod > 0.0))
                throw parse_error("give exactly one of --T and --f-mod");
            return cmd_filter(parse_scheme(scheme_name), n_pulses, total_duration, f_mod, f_range,
                              prefix);
        }
        if (crb->parsed())
            return cmd_crb(eta_range, parse_scheme(scheme_name), n_pulses, f_mod, shots,
                           phi_points, prefix);
    } catch (const parse_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInput;
    } catch (const not_crossed_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitPrecondition;
    } catch (const ill_conditioned_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitPrecondition;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInput;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInput;
    }
    return kExitInput;
}
