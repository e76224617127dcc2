#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ddspec/bessel.hpp"
#include "ddspec/coherence.hpp"
#include "ddspec/errors.hpp"
#include "ddspec/noise.hpp"
#include "ddspec/parallel.hpp"
#include "ddspec/rng.hpp"
#include "ddspec/schedule.hpp"

namespace ddspec {

struct FringeFit {
    double A = 0.0;
    double sigma = 0.0;
    double intercept = 0.0;  // diagnostic; the model form is P = 1/2 - A/2 cos(phi)
};

// Weighted linear least squares of p_up on {1, cos(phi_rf)} with binomial
// weights shots / (p_hat (1 - p_hat)), p_hat clamped to [0.01, 0.99].
// A = -2 x cosine coefficient. The covariance is scaled by reduced chi-square,
// so exact model data reports sigma ~ 0 and binomial data stays consistent.
inline FringeFit fit_fringe(const FringeScan& scan) {
    const auto& pts = scan.points;
    if (pts.size() < 3) throw std::invalid_argument("need at least 3 fringe points");

    Eigen::Matrix2d M = Eigen::Matrix2d::Zero();
    Eigen::Vector2d v = Eigen::Vector2d::Zero();
    for (const auto& p : pts) {
        if (p.shots < 1) throw std::invalid_argument("each fringe point needs at least one shot");
        const double c = std::cos(p.phi_rf);
        const double ph = std::clamp(p.p_up, 0.01, 0.99);
        const double w = p.shots / (ph * (1.0 - ph));
        M(0, 0) += w;
        M(0, 1) += w * c;
        M(1, 1) += w * c * c;
        v(0) += w * p.p_up;
        v(1) += w * p.p_up * c;
    }
    M(1, 0) = M(0, 1);
    const double det = M(0, 0) * M(1, 1) - M(0, 1) * M(0, 1);
    if (!(det > 1e-12 * M(0, 0) * std::max(M(1, 1), 1.0)))
        throw ill_conditioned_error("fringe phases give a degenerate design matrix");

    const Eigen::Matrix2d Minv = M.inverse();
    const Eigen::Vector2d beta = Minv * v;
    double chi2 = 0.0;
    for (const auto& p : pts) {
        const double c = std::cos(p.phi_rf);
        const double ph = std::clamp(p.p_up, 0.01, 0.99);
        const double w = p.shots / (ph * (1.0 - ph));
        const double r = p.p_up - beta(0) - beta(1) * c;
        chi2 += w * r * r;
    }
    const double chi2_red = chi2 / static_cast<double>(pts.size() - 2);
    FringeFit fit;
    fit.A = -2.0 * beta(1);
    fit.sigma = 2.0 * std::sqrt(std::max(0.0, Minv(1, 1) * chi2_red));
    fit.intercept = beta(0);
    return fit;
}

enum class Scheme { equidistant, uhrig };

// Uhrig cells use the T of the equidistant (n, f_mod) pair so the two schemes
// scan comparable total durations.
inline PulseSchedule make_scan_schedule(Scheme scheme, int n, double f_mod) {
    if (scheme == Scheme::equidistant) return make_equidistant(n, f_mod);
    if (!(f_mod > 0.0)) throw std::invalid_argument("modulation frequency must be positive");
    return make_uhrig(n, (n + 1) / (2.0 * f_mod));
}

struct ScanCell {
    double A = 1.0;
    double sigma = 0.0;  // 0 means analytic / unweighted
};

struct ScanGrid {
    std::vector<double> freqs;
    std::vector<int> n_values;
    std::vector<ScanCell> cells;  // indexed [i_f * n_values.size() + i_n]

    ScanCell& cell(std::size_t i_f, std::size_t i_n) { return cells[i_f * n_values.size() + i_n]; }
    const ScanCell& cell(std::size_t i_f, std::size_t i_n) const {
        return cells[i_f * n_values.size() + i_n];
    }
};

struct Measurement {
    enum class Kind { analytic, fringe };
    Kind kind = Kind::analytic;
    long shots = 0;
    int phi_points = 0;
    std::uint64_t seed = 0;
    McMode mode = independent_phases();
};

inline Measurement analytic_measurement() { return {}; }

inline Measurement fringe_measurement(long shots, int phi_points, std::uint64_t seed,
                                      McMode mode = independent_phases()) {
    Measurement m;
    m.kind = Measurement::Kind::fringe;
    m.shots = shots;
    m.phi_points = phi_points;
    m.seed = seed;
    m.mode = mode;
    return m;
}

inline std::vector<double> uniform_phase_grid(int points) {
    std::vector<double> grid(points);
    for (int i = 0; i < points; ++i) grid[i] = 2.0 * std::numbers::pi * i / points;
    return grid;
}

// Analytic mode fills cells from coherence_product (sigma 0); fringe mode
// simulates and fits per cell with a seed derived from the cell indices, so
// the grid is reproducible cell by cell under any parallel layout.
inline ScanGrid scan_coherence(const DiscreteSpectrum& s, Scheme scheme, std::vector<double> freqs,
                               std::vector<int> n_values, const Measurement& m,
                               unsigned threads = 1) {
    if (freqs.empty() || n_values.empty())
        throw std::invalid_argument("scan axes must be non-empty");
    if (m.kind == Measurement::Kind::fringe) {
        if (m.shots < 1) throw std::invalid_argument("fringe measurement needs at least one shot");
        if (m.phi_points < 3)
            throw std::invalid_argument("fringe measurement needs at least 3 phase points");
    }
    ScanGrid grid{std::move(freqs), std::move(n_values), {}};
    grid.cells.resize(grid.freqs.size() * grid.n_values.size());
    const std::vector<double> phi_grid =
        m.kind == Measurement::Kind::fringe ? uniform_phase_grid(m.phi_points)
                                            : std::vector<double>{};
    parallel_for(grid.cells.size(), threads, [&](std::size_t idx) {
        const std::size_t i_f = idx / grid.n_values.size();
        const std::size_t i_n = idx % grid.n_values.size();
        const auto tf = toggling(make_scan_schedule(scheme, grid.n_values[i_n], grid.freqs[i_f]));
        if (m.kind == Measurement::Kind::analytic) {
            grid.cells[idx] = {coherence_product(s, tf).A, 0.0};
        } else {
            const std::uint64_t cell_seed = derive_stream(derive_stream(m.seed, i_f), i_n);
            const FringeScan scan = simulate_fringe(s, tf, phi_grid, m.shots, cell_seed, m.mode);
            const FringeFit fit = fit_fringe(scan);
            grid.cells[idx] = {fit.A, fit.sigma};
        }
    });
    return grid;
}

struct CandidateTone {
    double frequency = 0.0;
    double dip_depth = 0.0;  // 1 - A at the deepest attributed minimum, in (0, 2]
    int first_n_detected = 0;
};

struct PeakOptions {
    bool comb = false;
    double comb_base = 0.0;      // Hz; required in comb mode
    double dip_threshold = 0.3;  // on 1 - A
    double merge_width = 0.0;    // Hz; 0 selects 2/T at the row's lowest frequency
};

namespace detail {

struct RawMinimum {
    double freq = 0.0;
    double dip = 0.0;
};

inline std::vector<RawMinimum> row_minima(const ScanGrid& grid, std::size_t i_n,
                                          double dip_threshold) {
    std::vector<RawMinimum> out;
    for (std::size_t i = 1; i + 1 < grid.freqs.size(); ++i) {
        const double a = grid.cell(i, i_n).A;
        if (a < grid.cell(i - 1, i_n).A && a < grid.cell(i + 1, i_n).A &&
            1.0 - a >= dip_threshold)
            out.push_back({grid.freqs[i], 1.0 - a});
    }
    return out;
}

}  // namespace detail

// Works on the largest-n row. Free mode chains minima closer than merge_width
// and reports dip-weighted centroids, attributing power-broadened sidelobes of
// one strong tone to a single candidate. Comb mode snaps each minimum to its
// nearest positive comb tooth and keeps one candidate per tooth (merging and
// snapping in the other order can bridge neighboring teeth on noisy rows).
// first_n_detected is the smallest row whose minima reach the threshold within
// the candidate's support.
inline std::vector<CandidateTone> identify_peaks(const ScanGrid& grid,
                                                 const PeakOptions& opt = {}) {
    if (grid.freqs.empty() || grid.n_values.empty() || grid.freqs.size() < 3) return {};
    if (opt.comb && !(opt.comb_base > 0.0))
        throw std::invalid_argument("comb mode needs a positive base frequency");

    const std::size_t i_top =
        std::max_element(grid.n_values.begin(), grid.n_values.end()) - grid.n_values.begin();
    const int n_top = grid.n_values[i_top];
    const auto minima = detail::row_minima(grid, i_top, opt.dip_threshold);
    if (minima.empty()) return {};

    const double f_min = *std::min_element(grid.freqs.begin(), grid.freqs.end());
    const double default_width = 4.0 * f_min / (n_top + 1);  // 2/T at the row's lowest frequency
    const double width = opt.merge_width > 0.0 ? opt.merge_width : default_width;

    struct Pending {
        double freq;
        double dip;
        double support;  // half-width used for first_n attribution
    };
    std::vector<Pending> pending;

    if (opt.comb) {
        std::map<long, Pending> per_tooth;
        for (const auto& m : minima) {
            const long tooth = std::lround(m.freq / opt.comb_base);
            if (tooth <= 0) continue;
            const double freq = tooth * opt.comb_base;
            auto it = per_tooth.find(tooth);
            if (it == per_tooth.end())
                per_tooth.emplace(tooth, Pending{freq, m.dip, opt.comb_base / 2.0});
            else if (m.dip > it->second.dip)
                it->second.dip = m.dip;
        }
        for (const auto& [tooth, cand] : per_tooth) pending.push_back(cand);
    } else {
        std::size_t i = 0;
        while (i < minima.size()) {
            std::size_t j = i;
            while (j + 1 < minima.size() && minima[j + 1].freq - minima[j].freq <= width) ++j;
            double dip_sum = 0.0;
            double centroid = 0.0;
            double dip_max = 0.0;
            for (std::size_t k = i; k <= j; ++k) {
                dip_sum += minima[k].dip;
                centroid += minima[k].freq * minima[k].dip;
                dip_max = std::max(dip_max, minima[k].dip);
            }
            pending.push_back({centroid / dip_sum, dip_max, width});
            i = j + 1;
        }
    }

    // ascending-n row order for first_n attribution
    std::vector<std::size_t> row_order(grid.n_values.size());
    for (std::size_t i = 0; i < row_order.size(); ++i) row_order[i] = i;
    std::sort(row_order.begin(), row_order.end(),
              [&grid](std::size_t a, std::size_t b) { return grid.n_values[a] < grid.n_values[b]; });

    std::vector<CandidateTone> out;
    out.reserve(pending.size());
    for (const auto& cand : pending) {
        int first_n = n_top;
        for (std::size_t r : row_order) {
            bool seen = false;
            for (const auto& m : detail::row_minima(grid, r, opt.dip_threshold))
                if (std::fabs(m.freq - cand.freq) <= cand.support) {
                    seen = true;
                    break;
                }
            if (seen) {
                first_n = grid.n_values[r];
                break;
            }
        }
        out.push_back({cand.freq, cand.dip, first_n});
    }
    std::sort(out.begin(), out.end(),
              [](const CandidateTone& a, const CandidateTone& b) { return a.frequency < b.frequency; });
    return out;
}

struct SeriesPoint {
    int n = 0;
    double A = 0.0;
    double sigma = 0.0;
};

// Rows of the grid at one frequency, sorted by n.
inline std::vector<SeriesPoint> extract_series(const ScanGrid& grid, double freq,
                                               double tol = 1e-6) {
    std::size_t i_f = grid.freqs.size();
    for (std::size_t i = 0; i < grid.freqs.size(); ++i)
        if (std::fabs(grid.freqs[i] - freq) <= tol) {
            i_f = i;
            break;
        }
    if (i_f == grid.freqs.size())
        throw std::invalid_argument("requested frequency is not a grid column");
    std::vector<SeriesPoint> series;
    series.reserve(grid.n_values.size());
    for (std::size_t i_n = 0; i_n < grid.n_values.size(); ++i_n)
        series.push_back({grid.n_values[i_n], grid.cell(i_f, i_n).A, grid.cell(i_f, i_n).sigma});
    std::sort(series.begin(), series.end(),
              [](const SeriesPoint& a, const SeriesPoint& b) { return a.n < b.n; });
    return series;
}

struct ZeroCrossing {
    double amplitude_ug = 0.0;
    double amplitude_rad_s = 0.0;
    double duration = 0.0;    // interpolated T*
    double filter_mag = 0.0;  // interpolated |F_T*(f_k)|
    double eta = 0.0;         // c N T* with the scheme's response constant
    int n_low = 0;            // series entry where the sign change starts
};

// First sign change of A along the series, linearly interpolated in
// T = (n+1)/(2 f_k); solves N |F_T*(f_k)| = z0 with |F_T| interpolated between
// the two integer-n schedules. An exact zero in the series is used directly.
inline ZeroCrossing magnitude_by_zero_crossing(const std::vector<SeriesPoint>& series, double f_k,
                                               Scheme scheme, const UnitsConfig& units) {
    if (!(f_k > 0.0)) throw std::invalid_argument("tone frequency must be positive");
    for (std::size_t i = 1; i < series.size(); ++i)
        if (series[i].n <= series[i - 1].n)
            throw std::invalid_argument("series must be sorted by pulse count");

    const auto duration_of = [f_k](int n) { return (n + 1) / (2.0 * f_k); };
    const auto filter_at = [&](int n) {
        return std::abs(filter_transform(toggling(make_scan_schedule(scheme, n, f_k)), f_k));
    };

    double t_star = 0.0;
    double f_star = 0.0;
    int n_low = 0;
    bool found = false;
    for (std::size_t i = 0; i < series.size() && !found; ++i) {
        if (series[i].A == 0.0) {
            t_star = duration_of(series[i].n);
            f_star = filter_at(series[i].n);
            n_low = series[i].n;
            found = true;
        } else if (i + 1 < series.size() && series[i].A * series[i + 1].A < 0.0) {
            const double t0 = duration_of(series[i].n);
            const double t1 = duration_of(series[i + 1].n);
            t_star = t0 + (0.0 - series[i].A) * (t1 - t0) / (series[i + 1].A - series[i].A);
            const double f0 = filter_at(series[i].n);
            const double f1 = filter_at(series[i + 1].n);
            f_star = f0 + (t_star - t0) * (f1 - f0) / (t1 - t0);
            n_low = series[i].n;
            found = true;
        }
    }
    if (!found) throw not_crossed_error("no zero crossing in the series; extend the scan");

    ZeroCrossing zc;
    zc.amplitude_rad_s = kJ0FirstZero / f_star;
    zc.amplitude_ug = zc.amplitude_rad_s / (units.kappa * 1e-6);
    zc.duration = t_star;
    zc.filter_mag = f_star;
    const double c = scheme == Scheme::equidistant ? kSquareWaveC : kUhrigC;
    zc.eta = noise_index(zc.amplitude_rad_s, t_star, c);
    zc.n_low = n_low;
    return zc;
}

struct ToneEstimate {
    double frequency = 0.0;
    double amplitude_ug = 0.0;
    double sigma_ug = 0.0;
};

struct EstimateReport {
    std::vector<ToneEstimate> tones;
    bool drift_fitted = false;
    double drift_product = 0.0;  // Hz^2
    double drift_sigma = 0.0;
    double rss = 0.0;  // weighted residual sum of squares at the solution
    double reduced_chi_square = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct FitPoint {
    double f_mod = 0.0;
    int n = 0;
    double A = 0.0;
    double sigma = 0.0;  // 0 means unit weight
};

namespace detail {

struct FitGeometry {
    // per point: |F_T(f_k)| for every model tone, |F_T'(0)|, target, weight
    std::vector<std::vector<double>> x;
    std::vector<double> dc;
    std::vector<double> target;
    std::vector<double> w;
};

inline FitGeometry fit_geometry(const std::vector<FitPoint>& data, Scheme scheme,
                                const std::vector<double>& model_tones) {
    FitGeometry g;
    const std::size_t npts = data.size();
    g.x.resize(npts);
    g.dc.resize(npts);
    g.target.resize(npts);
    g.w.resize(npts);
    for (std::size_t i = 0; i < npts; ++i) {
        const auto tf = toggling(make_scan_schedule(scheme, data[i].n, data[i].f_mod));
        g.x[i].resize(model_tones.size());
        for (std::size_t k = 0; k < model_tones.size(); ++k)
            g.x[i][k] = std::abs(filter_transform(tf, model_tones[k]));
        g.dc[i] = std::abs(filter_dc_slope(tf));
        g.target[i] = data[i].A;
        g.w[i] = data[i].sigma > 0.0 ? 1.0 / (data[i].sigma * data[i].sigma) : 1.0;
    }
    return g;
}

}  // namespace detail

// Damped Gauss-Newton weighted least squares of the product model with tone
// frequencies fixed. Amplitudes (and optionally the drift product) are kept
// non-negative through the squared reparameterization B = q^2; the Jacobian
// uses central differences with relative step 1e-6. Convergence: relative
// cost drop < 1e-10 on an accepted step, or gradient norm < 1e-8. Parameter
// uncertainties come from the local covariance scaled by reduced chi-square.
inline EstimateReport fine_tune_fit(const std::vector<FitPoint>& data, Scheme scheme,
                                    const std::vector<double>& model_tones, bool fit_slow_drift,
                                    const std::vector<double>& initial_ug, const UnitsConfig& units,
                                    double initial_drift = 20.0, int max_iterations = 200) {
    const std::size_t d = model_tones.size();
    if (d == 0) throw std::invalid_argument("model needs at least one tone");
    if (initial_ug.size() != d)
        throw std::invalid_argument("initial amplitudes must match the model tone count");
    for (double b : initial_ug)
        if (!(b >= 0.0)) throw std::invalid_argument("initial amplitudes must be non-negative");
    if (fit_slow_drift && !(initial_drift >= 0.0))
        throw std::invalid_argument("initial drift must be non-negative");
    const std::size_t m = d + (fit_slow_drift ? 1 : 0);
    if (data.size() < m + 2) throw std::invalid_argument("not enough data points for the model");

    const auto geom = detail::fit_geometry(data, scheme, model_tones);
    const std::size_t npts = data.size();
    const double scale = units.kappa * 1e-6;  // uG -> rad/s
    const double two_pi = 2.0 * std::numbers::pi;

    const auto residuals = [&](const Eigen::VectorXd& q, Eigen::VectorXd& r) {
        for (std::size_t i = 0; i < npts; ++i) {
            double model = 1.0;
            for (std::size_t k = 0; k < d; ++k)
                model *= bessel_j0(scale * q(k) * q(k) * geom.x[i][k]);
            if (fit_slow_drift) model *= bessel_j0(two_pi * q(d) * q(d) * geom.dc[i]);
            r(i) = (model - geom.target[i]) * std::sqrt(geom.w[i]);
        }
    };
    const auto cost_of = [&](const Eigen::VectorXd& q) {
        Eigen::VectorXd r(npts);
        residuals(q, r);
        return 0.5 * r.squaredNorm();
    };
    const auto jacobian = [&](const Eigen::VectorXd& q, Eigen::MatrixXd& J) {
        Eigen::VectorXd rp(npts), rm(npts);
        Eigen::VectorXd qt = q;
        for (std::size_t k = 0; k < m; ++k) {
            const double step = 1e-6 * std::max(std::fabs(q(k)), 1.0);
            qt(k) = q(k) + step;
            residuals(qt, rp);
            qt(k) = q(k) - step;
            residuals(qt, rm);
            qt(k) = q(k);
            J.col(k) = (rp - rm) / (2.0 * step);
        }
    };

    Eigen::VectorXd q(m);
    for (std::size_t k = 0; k < d; ++k) q(k) = std::sqrt(initial_ug[k]);
    if (fit_slow_drift) q(d) = std::sqrt(initial_drift);

    Eigen::VectorXd r(npts);
    Eigen::MatrixXd J(npts, m);
    residuals(q, r);
    double cost = 0.5 * r.squaredNorm();
    double lambda = 1e-3;
    bool converged = false;
    int iterations = 0;

    for (int iter = 0; iter < max_iterations && !converged; ++iter) {
        iterations = iter + 1;
        jacobian(q, J);
        const Eigen::VectorXd g = J.transpose() * r;
        if (g.norm() < 1e-8) {
            converged = true;
            break;
        }
        const Eigen::MatrixXd H = J.transpose() * J;
        bool accepted = false;
        for (int attempt = 0; attempt < 60; ++attempt) {
            Eigen::MatrixXd damped = H;
            for (std::size_t k = 0; k < m; ++k)
                damped(k, k) += lambda * std::max(H(k, k), 1e-12);
            const Eigen::VectorXd step = damped.ldlt().solve(-g);
            if (!step.allFinite()) {
                lambda *= 10.0;
                continue;
            }
            const Eigen::VectorXd q_try = q + step;
            const double cost_try = cost_of(q_try);
            if (cost_try < cost) {
                const double drop = (cost - cost_try) / std::max(cost, 1e-300);
                q = q_try;
                cost = cost_try;
                residuals(q, r);
                lambda = std::max(lambda * 0.3, 1e-12);
                accepted = true;
                if (drop < 1e-10) converged = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!accepted) {
            // no descent direction left at maximal damping: stationary
            converged = true;
        }
    }

    jacobian(q, J);
    const Eigen::MatrixXd H = J.transpose() * J;
    const double chi2 = 2.0 * cost;
    const double dof = static_cast<double>(npts) - static_cast<double>(m);
    const double chi2_red = dof > 0 ? chi2 / dof : 0.0;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(H);
    const Eigen::MatrixXd cov_q = cod.pseudoInverse() * chi2_red;

    EstimateReport report;
    report.tones.reserve(d);
    for (std::size_t k = 0; k < d; ++k) {
        const double sq = std::sqrt(std::max(0.0, cov_q(k, k)));
        report.tones.push_back({model_tones[k], q(k) * q(k), 2.0 * std::fabs(q(k)) * sq});
    }
    if (fit_slow_drift) {
        report.drift_fitted = true;
        report.drift_product = q(d) * q(d);
        report.drift_sigma = 2.0 * std::fabs(q(d)) * std::sqrt(std::max(0.0, cov_q(d, d)));
    }
    report.rss = chi2;
    report.reduced_chi_square = chi2_red;
    report.iterations = iterations;
    report.converged = converged;
    return report;
}

struct CrbResult {
    Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
    bool singular = false;
    double sigma_N = std::numeric_limits<double>::infinity();  // rad/s
    double sigma_f = std::numeric_limits<double>::infinity();  // Hz
};

// Fisher information of the binomial fringe likelihood for (N, f0) with
// A = J0(N |F_T(f0)|), P = 1/2 - A/2 cos(phi_rf):
//   I_ab = sum_points R (dP/da)(dP/db) / (P (1-P)), P clamped to [1e-9, 1-1e-9].
// dA/dN uses J0' = -J1 analytically; d|F_T|/df is a central difference. Both
// parameters act through the scalar A at one operating point, so I is rank-1
// by construction: the joint covariance is a flagged pseudo-inverse, and the
// per-parameter bounds 1/sqrt(I_aa) treat the other parameter as known.
inline CrbResult crb_single_tone(double N, double f0, Scheme scheme, int n, double f_mod,
                                 long shots, const std::vector<double>& phi_grid) {
    if (!(N >= 0.0)) throw std::invalid_argument("tone amplitude must be non-negative");
    if (!(f0 > 0.0)) throw std::invalid_argument("tone frequency must be positive");
    if (shots < 1) throw std::invalid_argument("need at least one shot per point");
    if (phi_grid.empty()) throw std::invalid_argument("phase grid must not be empty");

    const auto tf = toggling(make_scan_schedule(scheme, n, f_mod));
    const auto mag = [&tf](double f) { return std::abs(filter_transform(tf, f)); };
    const double F = mag(f0);
    const double A = bessel_j0(N * F);
    const double j1 = bessel_j1(N * F);
    const double df = 1e-4;
    const double dF_df = (mag(f0 + df) - mag(std::max(f0 - df, 0.0))) /
                         (f0 - df > 0.0 ? 2.0 * df : df);
    const double dA_dN = -j1 * F;
    const double dA_df = -j1 * N * dF_df;

    Eigen::Matrix2d info = Eigen::Matrix2d::Zero();
    for (double phi : phi_grid) {
        const double c = std::cos(phi);
        const double P = std::clamp(0.5 - 0.5 * A * c, 1e-9, 1.0 - 1e-9);
        const double gN = -0.5 * c * dA_dN;
        const double gf = -0.5 * c * dA_df;
        const double w = static_cast<double>(shots) / (P * (1.0 - P));
        info(0, 0) += w * gN * gN;
        info(0, 1) += w * gN * gf;
        info(1, 1) += w * gf * gf;
    }
    info(1, 0) = info(0, 1);

    CrbResult out;
    const double det = info(0, 0) * info(1, 1) - info(0, 1) * info(0, 1);
    out.singular = !(det > 1e-9 * info(0, 0) * info(1, 1));
    Eigen::CompleteOrthogonalDecomposition<Eigen::Matrix2d> cod(info);
    out.covariance = cod.pseudoInverse();
    if (info(0, 0) > 0.0) out.sigma_N = 1.0 / std::sqrt(info(0, 0));
    if (info(1, 1) > 0.0) out.sigma_f = 1.0 / std::sqrt(info(1, 1));
    return out;
}

}  // namespace ddspec
