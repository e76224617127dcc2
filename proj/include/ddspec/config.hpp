#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ddspec/coherence.hpp"
#include "ddspec/errors.hpp"
#include "ddspec/estimate.hpp"
#include "ddspec/noise.hpp"

namespace ddspec {

struct ConfigEntry {
    std::string key;
    std::string value;
    int line = 0;
};

struct ConfigSection {
    std::string name;
    std::vector<ConfigEntry> entries;
    int line = 0;
};

struct ConfigFile {
    std::vector<ConfigSection> sections;

    const ConfigSection* find(std::string_view name) const {
        for (const auto& s : sections)
            if (s.name == name) return &s;
        return nullptr;
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline double config_double(std::string_view field, int line) {
    const std::string_view t = trim(field);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc{} || ptr != t.data() + t.size())
        throw parse_error("expected a number, got '" + std::string(t) + "'", line);
    return value;
}

inline long config_long(std::string_view field, int line) {
    const std::string_view t = trim(field);
    long value = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc{} || ptr != t.data() + t.size())
        throw parse_error("expected an integer, got '" + std::string(t) + "'", line);
    return value;
}

inline std::uint64_t config_u64(std::string_view field, int line) {
    const std::string_view t = trim(field);
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc{} || ptr != t.data() + t.size())
        throw parse_error("expected an unsigned integer, got '" + std::string(t) + "'", line);
    return value;
}

inline std::vector<std::string_view> config_list(std::string_view value) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = value.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(trim(value.substr(start)));
            return out;
        }
        out.push_back(trim(value.substr(start, comma - start)));
        start = comma + 1;
    }
}

}  // namespace detail

// `[section]` headers, `key = value` lines, `#` comments. Keys may repeat
// within a section (used for tone lists); section names may not.
inline ConfigFile parse_config(std::istream& in) {
    ConfigFile file;
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string_view line = raw;
        const std::size_t hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw parse_error("unterminated section header", lineno);
            const std::string name(detail::trim(line.substr(1, line.size() - 2)));
            if (name.empty()) throw parse_error("empty section name", lineno);
            if (file.find(name)) throw parse_error("duplicate section [" + name + "]", lineno);
            file.sections.push_back({name, {}, lineno});
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            throw parse_error("expected 'key = value'", lineno);
        if (file.sections.empty())
            throw parse_error("key outside any [section]", lineno);
        const std::string key(detail::trim(line.substr(0, eq)));
        if (key.empty()) throw parse_error("empty key", lineno);
        file.sections.back().entries.push_back(
            {key, std::string(detail::trim(line.substr(eq + 1))), lineno});
    }
    return file;
}

// "lo:hi:step" with inclusive endpoints (step tolerance 1e-9 relative).
inline std::vector<double> parse_range(std::string_view text, int line = 0) {
    const std::size_t c1 = text.find(':');
    const std::size_t c2 = c1 == std::string_view::npos ? c1 : text.find(':', c1 + 1);
    if (c2 == std::string_view::npos)
        throw parse_error("expected 'lo:hi:step'", line);
    const double lo = detail::config_double(text.substr(0, c1), line);
    const double hi = detail::config_double(text.substr(c1 + 1, c2 - c1 - 1), line);
    const double step = detail::config_double(text.substr(c2 + 1), line);
    if (!(step > 0.0)) throw parse_error("range step must be positive", line);
    if (hi < lo) throw parse_error("range end below start", line);
    std::vector<double> out;
    const double eps = step * 1e-9;
    for (double v = lo; v <= hi + eps; v += step) out.push_back(v);
    return out;
}

struct SchemeConfig {
    Scheme kind = Scheme::equidistant;
    std::vector<int> n_values;
    std::vector<double> f_values;             // modulation frequencies, Hz
    std::optional<double> total_duration_s;   // uhrig alternative to f_mod
};

struct MeasurementConfig {
    Measurement::Kind kind = Measurement::Kind::analytic;
    long shots = 0;
    int phi_points = 0;
    std::optional<std::uint64_t> seed;
    McMode mode = independent_phases();
};

struct RunConfig {
    UnitsConfig units = default_units();
    DiscreteSpectrum spectrum;
    SchemeConfig scheme;
    MeasurementConfig measurement;
    std::optional<std::string> out_prefix;
};

namespace detail {

// "freq_hz, amp <uG|rad_s>, <random|offset_rad>"
inline NoiseTone parse_tone(std::string_view value, const UnitsConfig& units, int line) {
    const auto fields = config_list(value);
    if (fields.size() != 3)
        throw parse_error("tone needs 'freq_hz, amp uG|rad_s, random|phase_rad'", line);
    const double freq = config_double(fields[0], line);

    const std::string_view amp_field = fields[1];
    const std::size_t sp = amp_field.find_first_of(" \t");
    if (sp == std::string_view::npos)
        throw parse_error("amplitude needs a unit tag, 'uG' or 'rad_s'", line);
    const double amp = config_double(amp_field.substr(0, sp), line);
    const std::string_view tag = trim(amp_field.substr(sp));

    PhaseMode mode = PhaseMode::random_uniform;
    double offset = 0.0;
    if (fields[2] != "random") {
        mode = PhaseMode::locked;
        offset = config_double(fields[2], line);
    }

    if (tag == "uG") return tone_from_field(amp, freq, units, mode, offset);
    if (tag == "rad_s") {
        NoiseTone t = tone_from_field(0.0, freq, units, mode, offset);
        if (!(amp >= 0.0)) throw parse_error("tone amplitude must be non-negative", line);
        t.amplitude = amp;
        return t;
    }
    throw parse_error("unknown amplitude unit '" + std::string(tag) + "'", line);
}

inline void reject_unknown(const ConfigSection& s, std::initializer_list<std::string_view> known) {
    for (const auto& e : s.entries) {
        bool ok = false;
        for (auto k : known)
            if (e.key == k) {
                ok = true;
                break;
            }
        if (!ok)
            throw parse_error("unknown key '" + e.key + "' in [" + s.name + "]", e.line);
    }
}

inline const ConfigEntry* single_entry(const ConfigSection& s, std::string_view key) {
    const ConfigEntry* found = nullptr;
    for (const auto& e : s.entries)
        if (e.key == key) {
            if (found) throw parse_error("duplicate key '" + std::string(key) + "'", e.line);
            found = &e;
        }
    return found;
}

}  // namespace detail

// Strict loader: unknown sections or keys are errors, so a typo fails loudly
// instead of silently running defaults.
inline RunConfig load_run_config(std::istream& in) {
    const ConfigFile file = parse_config(in);
    for (const auto& s : file.sections)
        if (s.name != "units" && s.name != "spectrum" && s.name != "scheme" &&
            s.name != "measurement" && s.name != "output")
            throw parse_error("unknown section [" + s.name + "]", s.line);

    RunConfig cfg;

    if (const auto* s = file.find("units")) {
        detail::reject_unknown(*s, {"kappa_rad_s_per_g"});
        if (const auto* e = detail::single_entry(*s, "kappa_rad_s_per_g")) {
            cfg.units.kappa = detail::config_double(e->value, e->line);
            if (!(cfg.units.kappa > 0.0)) throw parse_error("kappa must be positive", e->line);
        }
    }

    if (const auto* s = file.find("spectrum")) {
        detail::reject_unknown(*s, {"tone", "slow_drift_hz2"});
        std::vector<NoiseTone> tones;
        for (const auto& e : s->entries)
            if (e.key == "tone") tones.push_back(detail::parse_tone(e.value, cfg.units, e.line));
        std::optional<SlowDrift> drift;
        if (const auto* e = detail::single_entry(*s, "slow_drift_hz2")) {
            const double p = detail::config_double(e->value, e->line);
            if (!(p >= 0.0)) throw parse_error("slow drift product must be non-negative", e->line);
            drift = SlowDrift{p};
        }
        try {
            cfg.spectrum = make_spectrum(std::move(tones), drift);
        } catch (const std::invalid_argument& ex) {
            throw parse_error(std::string("bad [spectrum]: ") + ex.what(), s->line);
        }
    }

    const auto* sch = file.find("scheme");
    if (!sch) throw parse_error("missing [scheme] section");
    detail::reject_unknown(*sch, {"kind", "n", "n_values", "n_range", "f_mod", "f_values",
                                  "f_range", "T_s"});
    {
        const auto* kind = detail::single_entry(*sch, "kind");
        if (!kind) throw parse_error("scheme needs a kind", sch->line);
        if (kind->value == "equidistant")
            cfg.scheme.kind = Scheme::equidistant;
        else if (kind->value == "uhrig")
            cfg.scheme.kind = Scheme::uhrig;
        else
            throw parse_error("scheme kind must be 'equidistant' or 'uhrig'", kind->line);

        const auto* n1 = detail::single_entry(*sch, "n");
        const auto* nv = detail::single_entry(*sch, "n_values");
        const auto* nr = detail::single_entry(*sch, "n_range");
        if ((n1 != nullptr) + (nv != nullptr) + (nr != nullptr) != 1)
            throw parse_error("scheme needs exactly one of n, n_values, n_range", sch->line);
        if (n1) cfg.scheme.n_values.push_back(static_cast<int>(detail::config_long(n1->value, n1->line)));
        if (nv)
            for (auto f : detail::config_list(nv->value))
                cfg.scheme.n_values.push_back(static_cast<int>(detail::config_long(f, nv->line)));
        if (nr)
            for (double v : parse_range(nr->value, nr->line))
                cfg.scheme.n_values.push_back(static_cast<int>(std::lround(v)));
        if (cfg.scheme.n_values.empty()) throw parse_error("empty pulse-count list", sch->line);

        const auto* f1 = detail::single_entry(*sch, "f_mod");
        const auto* fv = detail::single_entry(*sch, "f_values");
        const auto* fr = detail::single_entry(*sch, "f_range");
        const auto* ts = detail::single_entry(*sch, "T_s");
        const int f_given = (f1 != nullptr) + (fv != nullptr) + (fr != nullptr);
        if (ts) {
            if (cfg.scheme.kind != Scheme::uhrig)
                throw parse_error("T_s applies to the uhrig scheme only", ts->line);
            if (f_given != 0)
                throw parse_error("give either T_s or a modulation frequency, not both", ts->line);
            cfg.scheme.total_duration_s = detail::config_double(ts->value, ts->line);
            if (!(*cfg.scheme.total_duration_s > 0.0))
                throw parse_error("T_s must be positive", ts->line);
        } else {
            if (f_given != 1)
                throw parse_error("scheme needs exactly one of f_mod, f_values, f_range", sch->line);
            if (f1) cfg.scheme.f_values.push_back(detail::config_double(f1->value, f1->line));
            if (fv)
                for (auto f : detail::config_list(fv->value))
                    cfg.scheme.f_values.push_back(detail::config_double(f, fv->line));
            if (fr) cfg.scheme.f_values = parse_range(fr->value, fr->line);
            if (cfg.scheme.f_values.empty()) throw parse_error("empty frequency list", sch->line);
        }
    }

    if (const auto* s = file.find("measurement")) {
        detail::reject_unknown(*s, {"mode", "shots", "phi_points", "seed", "phase_sampling",
                                    "period_s"});
        const auto* mode = detail::single_entry(*s, "mode");
        if (!mode) throw parse_error("measurement needs a mode", s->line);
        if (mode->value == "analytic") {
            cfg.measurement.kind = Measurement::Kind::analytic;
        } else if (mode->value == "fringe") {
            cfg.measurement.kind = Measurement::Kind::fringe;
            const auto* shots = detail::single_entry(*s, "shots");
            const auto* phi = detail::single_entry(*s, "phi_points");
            if (!shots || !phi)
                throw parse_error("fringe measurement needs shots and phi_points", mode->line);
            cfg.measurement.shots = detail::config_long(shots->value, shots->line);
            if (cfg.measurement.shots < 1)
                throw parse_error("shots must be positive", shots->line);
            cfg.measurement.phi_points =
                static_cast<int>(detail::config_long(phi->value, phi->line));
            if (cfg.measurement.phi_points < 3)
                throw parse_error("need at least 3 phase points", phi->line);
        } else {
            throw parse_error("measurement mode must be 'analytic' or 'fringe'", mode->line);
        }
        if (const auto* e = detail::single_entry(*s, "seed"))
            cfg.measurement.seed = detail::config_u64(e->value, e->line);
        const auto* sampling = detail::single_entry(*s, "phase_sampling");
        const auto* period = detail::single_entry(*s, "period_s");
        if (sampling && sampling->value == "common") {
            if (!period)
                throw parse_error("common phase sampling needs period_s", sampling->line);
            cfg.measurement.mode = common_time_origin(detail::config_double(period->value, period->line));
            if (!(cfg.measurement.mode.period > 0.0))
                throw parse_error("period_s must be positive", period->line);
        } else if (sampling && sampling->value != "independent") {
            throw parse_error("phase_sampling must be 'independent' or 'common'", sampling->line);
        } else if (period) {
            throw parse_error("period_s applies to common phase sampling only", period->line);
        }
    }

    if (const auto* s = file.find("output")) {
        detail::reject_unknown(*s, {"prefix"});
        if (const auto* e = detail::single_entry(*s, "prefix")) cfg.out_prefix = e->value;
    }

    return cfg;
}

// Resolves the config to one concrete schedule; requires scalar axes.
inline PulseSchedule single_schedule(const RunConfig& cfg) {
    if (cfg.scheme.n_values.size() != 1)
        throw parse_error("this command needs a single pulse count");
    const int n = cfg.scheme.n_values.front();
    if (cfg.scheme.total_duration_s) return make_uhrig(n, *cfg.scheme.total_duration_s);
    if (cfg.scheme.f_values.size() != 1)
        throw parse_error("this command needs a single modulation frequency");
    return make_scan_schedule(cfg.scheme.kind, n, cfg.scheme.f_values.front());
}

}  // namespace ddspec
