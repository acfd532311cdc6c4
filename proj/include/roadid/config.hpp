#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "roadid/error.hpp"
#include "roadid/evaluation.hpp"
#include "roadid/model.hpp"
#include "roadid/numerics.hpp"
#include "roadid/scenario.hpp"
#include "roadid/universal_smoother.hpp"

namespace roadid {

inline constexpr const char* kToolVersion = "0.3.0";

enum class EstimatorKind { us, dkf, mvus };

inline EstimatorKind parse_estimator(const std::string& s) {
    if (s == "us") return EstimatorKind::us;
    if (s == "dkf") return EstimatorKind::dkf;
    if (s == "mvus") return EstimatorKind::mvus;
    throw InvalidParameter("unknown estimator '" + s + "' (expected us, dkf or mvus)");
}

inline std::string to_string(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::us: return "us";
        case EstimatorKind::dkf: return "dkf";
        case EstimatorKind::mvus: return "mvus";
    }
    return "?";
}

/**
 * @brief Truncation choice that can follow the window length.
 *
 * `drop` discards a fixed number of the smallest singular values, so the same
 * setting applies to every N of a sweep.
 */
struct TruncationSetting {
    enum class Mode { count, tolerance, drop };
    Mode mode = Mode::drop;
    int k = 201;
    double tol = 1e-10;
    int drop = 1;

    [[nodiscard]] TruncationPolicy resolve(int N, int inputs) const {
        switch (mode) {
            case Mode::count: return TruncationPolicy::keep(k);
            case Mode::tolerance: return TruncationPolicy::relative(tol);
            case Mode::drop: return TruncationPolicy::keep(std::max(1, (N + 1) * inputs - drop));
        }
        return TruncationPolicy::keep(k);
    }

    void validate() const {
        if (mode == Mode::count && k < 1) throw InvalidParameter("truncation: k must be >= 1");
        if (mode == Mode::tolerance && !(tol > 0.0 && tol < 1.0)) throw InvalidParameter("truncation: tolerance must lie in (0, 1)");
        if (mode == Mode::drop && drop < 0) throw InvalidParameter("truncation: drop must be >= 0");
    }
};

/// Per-estimator replacement of the shared noise levels.
struct NoiseOverride {
    std::optional<double> Qx, Qr;
};

/// Everything a command needs; loaded from JSON, overridable from the command line.
struct RunConfig {
    HalfCarParams vehicle;
    std::string vehicle_file;  ///< when set, loaded on resolve() and takes precedence
    ScenarioConfig scenario = clean_scenario_config();
    std::vector<std::string> channels{"acc_bounce", "acc_pitch"};
    EstimatorKind estimator = EstimatorKind::us;
    int N = 100;
    double Qx = 1e-8;
    std::vector<double> R_diag;  ///< empty means matched to the simulated sensor noise
    double Qr = 1e-4;
    TruncationSetting truncation;
    std::map<std::string, NoiseOverride> overrides;  ///< keyed by estimator name
    TuningGrid grid;
    std::vector<int> sweep_N{10, 25, 50, 100, 150};
    double cutoff_cycles_per_m = 0.1;  ///< accuracy is scored above this spatial frequency
    std::size_t spectrum_segment = 0;  ///< 0 picks a default Welch segment
    bool svg = true;
    std::string measurements;  ///< input file for `estimate`
    std::string truth;         ///< optional ground-truth input series for `estimate`
    std::string out = "out";
    unsigned workers = 0;  ///< 0 means available parallelism

    [[nodiscard]] SelectionMatrix selection() const {
        std::vector<SelectionMatrix::Channel> ch;
        for (const auto& name : channels) {
            bool found = false;
            for (int kind = 0; kind < 3 && !found; ++kind)
                for (int dof = 0; dof < 2 && !found; ++dof) {
                    const SelectionMatrix::Channel c{static_cast<SelectionMatrix::Kind>(kind), dof};
                    if (channel_name(c) == name) {
                        ch.push_back(c);
                        found = true;
                    }
                }
            if (!found) throw InvalidParameter("unknown channel '" + name + "'");
        }
        if (ch.empty()) throw InvalidParameter("at least one channel is required");
        return SelectionMatrix(ch);
    }

    [[nodiscard]] NoiseConfig noise(std::optional<EstimatorKind> kind = std::nullopt) const {
        NoiseConfig n;
        n.Qx = Qx;
        n.Qr = Qr;
        if (kind) {
            const auto it = overrides.find(to_string(*kind));
            if (it != overrides.end()) {
                n.Qx = it->second.Qx.value_or(Qx);
                n.Qr = it->second.Qr.value_or(Qr);
            }
        }
        if (!R_diag.empty()) {
            n.R_diag = R_diag;
        } else {
            for (double s : scenario.noise.measurement_std) n.R_diag.push_back(s * s);
            if (n.R_diag.empty()) n.R_diag.push_back(0.0);
        }
        return n;
    }

    [[nodiscard]] unsigned worker_count() const { return workers > 0 ? workers : default_workers(); }

    /// Seeds the road generator with `seed` and the sensor noise with `seed + 1`.
    void apply_seed(std::uint64_t seed) {
        scenario.profile_seed = seed;
        scenario.noise.seed = seed + 1;
    }

    void resolve() {
        if (!vehicle_file.empty()) vehicle = load_vehicle(vehicle_file);
    }

    void validate() const {
        vehicle.validate();
        scenario.validate();
        (void)selection();
        if (N < 0) throw InvalidParameter("config: N must be >= 0");
        if (!(Qx >= 0.0) || !(Qr >= 0.0)) throw InvalidParameter("config: Qx and Qr must be >= 0");
        for (double r : R_diag)
            if (!(r >= 0.0)) throw InvalidParameter("config: R_diag entries must be >= 0");
        truncation.validate();
        for (const auto& [name, o] : overrides) {
            parse_estimator(name);
            if ((o.Qx && !(*o.Qx >= 0.0)) || (o.Qr && !(*o.Qr >= 0.0)))
                throw InvalidParameter("config: override for " + name + " must be >= 0");
        }
        (void)grid.qx_exponents.count();
        (void)grid.qr_exponents.count();
        (void)grid.k_values(N);
        if (sweep_N.empty()) throw InvalidParameter("config: sweep_N must not be empty");
        for (int n : sweep_N)
            if (n < 0) throw InvalidParameter("config: sweep window lengths must be >= 0");
        if (!(cutoff_cycles_per_m >= 0.0)) throw InvalidParameter("config: cutoff must be >= 0");
    }
};

// =============================================================================
// JSON
// =============================================================================

namespace detail {

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& slot) {
    if (j.contains(key)) {
        try {
            slot = j.at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("config key '") + key + "': " + e.what());
        }
    }
}

inline void check_keys(const nlohmann::json& j, const std::vector<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ParseError(where + " must be a JSON object");
    for (const auto& [key, value] : j.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ParseError("unknown key '" + key + "' in " + where);
}

inline nlohmann::json range_json(const Range& r) { return nlohmann::json::array({r.lo, r.hi, r.step}); }

inline Range range_from(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) throw ParseError(where + " must be [lo, hi, step]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace detail

inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j;
    j["vehicle"] = c.vehicle;
    if (!c.vehicle_file.empty()) j["vehicle_file"] = c.vehicle_file;
    const ScenarioConfig& s = c.scenario;
    j["scenario"] = {{"roughness", s.roughness},
                     {"length_m", s.length},
                     {"spacing_m", s.spacing},
                     {"profile_seed", s.profile_seed},
                     {"profile_csv", s.profile_csv},
                     {"profile_offset_m", s.profile_offset},
                     {"align_entry", s.align_entry},
                     {"speed_kmh", s.speed_kmh},
                     {"sample_rate_hz", s.sample_rate},
                     {"noise",
                      {{"measurement_std", s.noise.measurement_std},
                       {"bridge_amp", s.noise.bridge_amp},
                       {"bridge_freqs_hz", s.noise.bridge_freqs},
                       {"seed", s.noise.seed}}}};
    j["channels"] = c.channels;
    j["estimator"] = to_string(c.estimator);
    j["N"] = c.N;
    j["noise"] = {{"Qx", c.Qx}, {"R_diag", c.R_diag}, {"Qr", c.Qr}};
    switch (c.truncation.mode) {
        case TruncationSetting::Mode::count: j["truncation"] = {{"mode", "count"}, {"k", c.truncation.k}}; break;
        case TruncationSetting::Mode::tolerance: j["truncation"] = {{"mode", "tolerance"}, {"tol", c.truncation.tol}}; break;
        case TruncationSetting::Mode::drop: j["truncation"] = {{"mode", "drop"}, {"drop", c.truncation.drop}}; break;
    }
    j["overrides"] = nlohmann::json::object();
    for (const auto& [name, o] : c.overrides) {
        nlohmann::json e = nlohmann::json::object();
        if (o.Qx) e["Qx"] = *o.Qx;
        if (o.Qr) e["Qr"] = *o.Qr;
        j["overrides"][name] = e;
    }
    j["grid"] = {{"log10_qx", detail::range_json(c.grid.qx_exponents)},
                 {"log10_qr", detail::range_json(c.grid.qr_exponents)},
                 {"k", nlohmann::json::array({c.grid.k_lo, c.grid.k_hi})}};
    j["sweep_N"] = c.sweep_N;
    j["cutoff_cycles_per_m"] = c.cutoff_cycles_per_m;
    j["spectrum_segment"] = c.spectrum_segment;
    j["svg"] = c.svg;
    j["measurements"] = c.measurements;
    j["truth"] = c.truth;
    j["out"] = c.out;
    j["workers"] = c.workers;
    return j;
}

/// Overlays the keys present in `j` onto `c`; unknown keys are rejected.
inline void merge_json(const nlohmann::json& j, RunConfig& c) {
    using detail::read_opt;
    detail::check_keys(j,
                       {"vehicle", "vehicle_file", "scenario", "channels", "estimator", "N", "noise", "truncation", "grid",
                        "overrides", "sweep_N", "cutoff_cycles_per_m", "spectrum_segment", "svg", "measurements", "truth", "out",
                        "workers", "seed"},
                       "config");
    if (j.contains("vehicle")) {
        HalfCarParams p = c.vehicle;
        from_json(j.at("vehicle"), p);
        c.vehicle = p;
    }
    read_opt(j, "vehicle_file", c.vehicle_file);
    if (j.contains("scenario")) {
        const auto& s = j.at("scenario");
        detail::check_keys(s,
                           {"preset", "roughness", "length_m", "spacing_m", "profile_seed", "profile_csv", "profile_offset_m",
                            "align_entry", "speed_kmh", "sample_rate_hz", "noise"},
                           "scenario");
        if (s.contains("preset")) {
            const std::string preset = s.at("preset").get<std::string>();
            if (preset == "clean") c.scenario = clean_scenario_config();
            else if (preset == "contaminated") c.scenario = contaminated_scenario_config();
            else throw ParseError("unknown scenario preset '" + preset + "'");
        }
        ScenarioConfig& sc = c.scenario;
        read_opt(s, "roughness", sc.roughness);
        read_opt(s, "length_m", sc.length);
        read_opt(s, "spacing_m", sc.spacing);
        read_opt(s, "profile_seed", sc.profile_seed);
        read_opt(s, "profile_csv", sc.profile_csv);
        read_opt(s, "profile_offset_m", sc.profile_offset);
        read_opt(s, "align_entry", sc.align_entry);
        read_opt(s, "speed_kmh", sc.speed_kmh);
        read_opt(s, "sample_rate_hz", sc.sample_rate);
        if (s.contains("noise")) {
            const auto& n = s.at("noise");
            detail::check_keys(n, {"measurement_std", "bridge_amp", "bridge_freqs_hz", "seed"}, "scenario.noise");
            if (n.contains("measurement_std") && n.at("measurement_std").is_number())
                sc.noise.measurement_std = {n.at("measurement_std").get<double>()};
            else
                read_opt(n, "measurement_std", sc.noise.measurement_std);
            read_opt(n, "bridge_amp", sc.noise.bridge_amp);
            read_opt(n, "bridge_freqs_hz", sc.noise.bridge_freqs);
            read_opt(n, "seed", sc.noise.seed);
        }
    }
    read_opt(j, "channels", c.channels);
    if (j.contains("estimator")) c.estimator = parse_estimator(j.at("estimator").get<std::string>());
    read_opt(j, "N", c.N);
    if (j.contains("noise")) {
        const auto& n = j.at("noise");
        detail::check_keys(n, {"Qx", "R_diag", "Qr"}, "noise");
        read_opt(n, "Qx", c.Qx);
        if (n.contains("R_diag") && n.at("R_diag").is_number())
            c.R_diag = {n.at("R_diag").get<double>()};
        else
            read_opt(n, "R_diag", c.R_diag);
        read_opt(n, "Qr", c.Qr);
    }
    if (j.contains("truncation")) {
        const auto& t = j.at("truncation");
        detail::check_keys(t, {"mode", "k", "tol", "drop"}, "truncation");
        if (t.contains("mode")) {
            const std::string mode = t.at("mode").get<std::string>();
            if (mode == "count") c.truncation.mode = TruncationSetting::Mode::count;
            else if (mode == "tolerance") c.truncation.mode = TruncationSetting::Mode::tolerance;
            else if (mode == "drop") c.truncation.mode = TruncationSetting::Mode::drop;
            else throw ParseError("truncation mode must be 'count', 'tolerance' or 'drop'");
        } else if (t.contains("k")) {
            c.truncation.mode = TruncationSetting::Mode::count;
        } else if (t.contains("tol")) {
            c.truncation.mode = TruncationSetting::Mode::tolerance;
        } else if (t.contains("drop")) {
            c.truncation.mode = TruncationSetting::Mode::drop;
        }
        read_opt(t, "k", c.truncation.k);
        read_opt(t, "tol", c.truncation.tol);
        read_opt(t, "drop", c.truncation.drop);
    }
    if (j.contains("overrides")) {
        const auto& o = j.at("overrides");
        if (!o.is_object()) throw ParseError("overrides must be a JSON object");
        for (const auto& [name, value] : o.items()) {
            parse_estimator(name);
            detail::check_keys(value, {"Qx", "Qr"}, "overrides." + name);
            NoiseOverride ov;
            if (value.contains("Qx")) ov.Qx = value.at("Qx").get<double>();
            if (value.contains("Qr")) ov.Qr = value.at("Qr").get<double>();
            c.overrides[name] = ov;
        }
    }
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        detail::check_keys(g, {"log10_qx", "log10_qr", "k"}, "grid");
        if (g.contains("log10_qx")) c.grid.qx_exponents = detail::range_from(g.at("log10_qx"), "grid.log10_qx");
        if (g.contains("log10_qr")) c.grid.qr_exponents = detail::range_from(g.at("log10_qr"), "grid.log10_qr");
        if (g.contains("k")) {
            const auto& k = g.at("k");
            if (!k.is_array() || k.size() != 2) throw ParseError("grid.k must be [lo, hi] (hi = 0 means 2(N+1))");
            c.grid.k_lo = k[0].get<int>();
            c.grid.k_hi = k[1].get<int>();
        }
    }
    read_opt(j, "sweep_N", c.sweep_N);
    read_opt(j, "cutoff_cycles_per_m", c.cutoff_cycles_per_m);
    read_opt(j, "spectrum_segment", c.spectrum_segment);
    read_opt(j, "svg", c.svg);
    read_opt(j, "measurements", c.measurements);
    read_opt(j, "truth", c.truth);
    read_opt(j, "out", c.out);
    read_opt(j, "workers", c.workers);
    if (j.contains("seed")) c.apply_seed(j.at("seed").get<std::uint64_t>());
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("config file '" + path + "': " + e.what());
    }
    RunConfig c;
    merge_json(j, c);
    return c;
}

}  // namespace roadid
