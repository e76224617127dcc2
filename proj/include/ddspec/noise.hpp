#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace ddspec {

// kappa converts field to angular dephasing rate: N = kappa * B, in
// rad s^-1 per Gauss.
struct UnitsConfig {
    double kappa = 0.0;
};

inline UnitsConfig default_units() { return {2.0 * std::numbers::pi * 2.8025e6}; }

enum class PhaseMode { random_uniform, locked };

// One discrete dephasing component N cos(2 pi f t + alpha).
struct NoiseTone {
    double amplitude = 0.0;  // rad/s, >= 0
    double frequency = 0.0;  // Hz, >= 0
    PhaseMode mode = PhaseMode::random_uniform;
    double offset = 0.0;  // locked phase in [0, 2 pi); unused for random_uniform
};

inline double wrap_angle(double a) {
    const double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(a, two_pi);
    if (r < 0.0) r += two_pi;
    return r;
}

namespace detail {

inline void check_tone(double amplitude, double frequency) {
    if (!(amplitude >= 0.0)) throw std::invalid_argument("tone amplitude must be non-negative");
    if (!(frequency >= 0.0)) throw std::invalid_argument("tone frequency must be non-negative");
}

}  // namespace detail

inline NoiseTone random_phase_tone(double amplitude, double frequency) {
    detail::check_tone(amplitude, frequency);
    return {amplitude, frequency, PhaseMode::random_uniform, 0.0};
}

inline NoiseTone locked_tone(double amplitude, double frequency, double offset) {
    detail::check_tone(amplitude, frequency);
    return {amplitude, frequency, PhaseMode::locked, wrap_angle(offset)};
}

// Slowly varying field characterized only by the identifiable product
// (rate x frequency), in Hz^2. It acts through the filter's DC slope, never
// through the time-domain sum.
struct SlowDrift {
    double product = 0.0;
};

struct DiscreteSpectrum {
    std::vector<NoiseTone> tones;
    std::optional<SlowDrift> slow_drift;
};

// Validates tone ranges and pairwise-distinct frequencies (1e-9 Hz resolution).
inline DiscreteSpectrum make_spectrum(std::vector<NoiseTone> tones,
                                      std::optional<SlowDrift> slow_drift = std::nullopt) {
    for (std::size_t i = 0; i < tones.size(); ++i) {
        detail::check_tone(tones[i].amplitude, tones[i].frequency);
        for (std::size_t j = 0; j < i; ++j)
            if (std::fabs(tones[i].frequency - tones[j].frequency) < 1e-9)
                throw std::invalid_argument("tone frequencies must be pairwise distinct");
    }
    if (slow_drift && !(slow_drift->product >= 0.0))
        throw std::invalid_argument("slow drift product must be non-negative");
    return {std::move(tones), slow_drift};
}

inline NoiseTone tone_from_field(double field_ug, double frequency, const UnitsConfig& units,
                                 PhaseMode mode = PhaseMode::random_uniform, double offset = 0.0) {
    if (!(field_ug >= 0.0)) throw std::invalid_argument("field must be non-negative");
    if (!(frequency >= 0.0)) throw std::invalid_argument("tone frequency must be non-negative");
    NoiseTone t;
    t.amplitude = units.kappa * field_ug * 1e-6;
    t.frequency = frequency;
    t.mode = mode;
    t.offset = mode == PhaseMode::locked ? wrap_angle(offset) : 0.0;
    return t;
}

inline double field_from_tone(const NoiseTone& tone, const UnitsConfig& units) {
    return tone.amplitude / (units.kappa * 1e-6);
}

// |F_T| = (2/pi) T at the fundamental of an equidistant schedule with an even
// interval count (square-wave first harmonic).
inline constexpr double kSquareWaveC = 2.0 / std::numbers::pi;

// Empirical peak-response constant of the uhrig filter around n = 20.
inline constexpr double kUhrigC = 0.42;

inline double noise_index(double amplitude, double duration, double c) {
    return c * amplitude * duration;
}

// Time-domain sum of the tones with the given phase offsets; the slow drift
// is excluded by design.
inline double sample_noise(const DiscreteSpectrum& s, const std::vector<double>& phases,
                           double t) {
    if (phases.size() != s.tones.size())
        throw std::invalid_argument("phase count must match tone count");
    double total = 0.0;
    for (std::size_t k = 0; k < s.tones.size(); ++k)
        total += s.tones[k].amplitude *
                 std::cos(2.0 * std::numbers::pi * s.tones[k].frequency * t + phases[k]);
    return total;
}

}  // namespace ddspec
