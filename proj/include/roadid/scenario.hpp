#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "roadid/evaluation.hpp"
#include "roadid/model.hpp"
#include "roadid/road_profile.hpp"
#include "roadid/simulator.hpp"
#include "roadid/universal_smoother.hpp"

namespace roadid {

/// Where the ground-truth profile comes from and how the vehicle drives over it.
struct ScenarioConfig {
    std::string roughness = "A";
    double length = 40.5;           ///< [m]
    double spacing = 0.01;          ///< [m]
    std::uint64_t profile_seed = 7;
    std::string profile_csv;        ///< when set, replaces the synthetic profile
    double profile_offset = 0.0;    ///< front-axle position in the profile at t = 0 [m]
    bool align_entry = true;        ///< shift heights so the front wheel starts at zero
    double speed_kmh = 10.0;
    double sample_rate = 200.0;     ///< [Hz]
    NoiseSpec noise{{1e-3}, 0.0, {2.5, 3.4}, 11};

    [[nodiscard]] double speed() const { return speed_kmh / 3.6; }
    [[nodiscard]] double dt() const { return 1.0 / sample_rate; }

    void validate() const {
        if (!(speed_kmh > 0.0)) throw InvalidParameter("scenario: speed must be positive");
        if (!(sample_rate > 0.0)) throw InvalidParameter("scenario: sample rate must be positive");
        if (profile_csv.empty()) {
            parse_roughness_class(roughness);
            if (!(length > 0.0) || !(spacing > 0.0)) throw InvalidParameter("scenario: length and spacing must be positive");
        }
        noise.validate();
    }
};

/// Simulated run with its ground truth.
struct Scenario {
    ScenarioConfig config;
    HalfCarParams vehicle;
    RoadProfile profile;
    InputSeries inputs;
    MeasurementSeries measurements;
    TrueStates truth;
};

inline RoadProfile scenario_profile(const ScenarioConfig& cfg) {
    RoadProfile p = cfg.profile_csv.empty()
                        ? generate_iso_profile(parse_roughness_class(cfg.roughness), cfg.length, cfg.spacing, cfg.profile_seed)
                        : resample(load_profile_csv(cfg.profile_csv), cfg.spacing);
    if (cfg.align_entry) {
        const double h0 = p.height_at(std::max(cfg.profile_offset, p.distances.front()));
        for (double& h : p.heights) h -= h0;
    }
    return p;
}

inline Scenario build_scenario(const ScenarioConfig& cfg, const HalfCarParams& vehicle = {},
                               const SelectionMatrix& sel = SelectionMatrix::accelerations()) {
    cfg.validate();
    vehicle.validate();
    Scenario s;
    s.config = cfg;
    s.vehicle = vehicle;
    s.profile = scenario_profile(cfg);
    const std::optional<double> start =
        cfg.profile_offset > s.profile.distances.front() ? std::optional<double>(cfg.profile_offset) : std::nullopt;
    s.inputs = profile_to_inputs(s.profile, cfg.speed(), cfg.dt(), vehicle.wheelbase(), start);
    std::tie(s.measurements, s.truth) = simulate_response(vehicle, s.inputs, cfg.noise, sel);
    return s;
}

/// Low-noise baseline: class-A road, 10 km/h, 200 Hz, sensor noise only.
inline ScenarioConfig clean_scenario_config() {
    ScenarioConfig c;
    c.speed_kmh = 10.0;
    c.noise.measurement_std = {1e-3};
    c.noise.bridge_amp = 0.0;
    return c;
}

/// Bridge-contaminated run at 20 km/h.
inline ScenarioConfig contaminated_scenario_config() {
    ScenarioConfig c;
    c.speed_kmh = 20.0;
    c.noise.measurement_std = {1e-2};
    c.noise.bridge_amp = 0.05;
    return c;
}

/// Estimator noise setting matching a scenario's sensor noise.
inline NoiseConfig matched_noise(const ScenarioConfig& cfg, double qx, double qr = 1e-4) {
    NoiseConfig n;
    n.Qx = qx;
    n.Qr = qr;
    for (double s : cfg.noise.measurement_std) n.R_diag.push_back(s * s);
    if (n.R_diag.empty()) n.R_diag.push_back(0.0);
    return n;
}

/// Accuracy of an estimate against known wheel inputs, optionally above a spatial cut-off.
inline WheelNrmse input_accuracy(const InputSeries& truth, const EstimationResult& e, double sample_rate, double speed,
                                 double cutoff_cycles_per_m = 0.0) {
    const auto n = static_cast<std::size_t>(e.steps());
    if (n < 2 || n > truth.size()) throw InvalidParameter("input_accuracy: estimate does not fit the true series");
    if (e.r_hat.cols() != 2) throw InvalidParameter("input_accuracy: expected front and rear estimates");
    std::vector<double> tf(truth.r_front.begin(), truth.r_front.begin() + static_cast<std::ptrdiff_t>(n));
    std::vector<double> tr(truth.r_rear.begin(), truth.r_rear.begin() + static_cast<std::ptrdiff_t>(n));
    std::vector<double> ef = column(e.r_hat, 0), er = column(e.r_hat, 1);
    if (cutoff_cycles_per_m > 0.0) {
        tf = spatial_highpass(tf, sample_rate, speed, cutoff_cycles_per_m);
        tr = spatial_highpass(tr, sample_rate, speed, cutoff_cycles_per_m);
        ef = spatial_highpass(ef, sample_rate, speed, cutoff_cycles_per_m);
        er = spatial_highpass(er, sample_rate, speed, cutoff_cycles_per_m);
    }
    return nrmse(tf, ef, tr, er);
}

inline WheelNrmse profile_accuracy(const Scenario& s, const EstimationResult& e, double cutoff_cycles_per_m = 0.0) {
    return input_accuracy(s.inputs, e, s.config.sample_rate, s.config.speed(), cutoff_cycles_per_m);
}

}  // namespace roadid
