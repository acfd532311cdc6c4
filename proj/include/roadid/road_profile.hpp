#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "roadid/csv.hpp"
#include "roadid/error.hpp"
#include "roadid/numerics.hpp"

namespace roadid {

/// Elevation along one wheel track. Distances strictly increase.
struct RoadProfile {
    std::vector<double> distances;  ///< [m]
    std::vector<double> heights;    ///< [m]
    std::string track_id;

    [[nodiscard]] std::size_t size() const { return distances.size(); }

    void validate() const {
        if (distances.size() != heights.size()) throw InvalidParameter("profile: distance/height length mismatch");
        if (distances.size() < 2) throw InvalidParameter("profile: need at least two samples");
        for (std::size_t i = 0; i < distances.size(); ++i) {
            if (!std::isfinite(distances[i]) || !std::isfinite(heights[i]))
                throw InvalidParameter("profile: non-finite value at sample " + std::to_string(i));
            if (i > 0 && !(distances[i] > distances[i - 1]))
                throw InvalidParameter("profile: distances not strictly increasing at sample " + std::to_string(i));
        }
    }

    /// Spacing when uniform within `tol` metres, nullopt otherwise.
    [[nodiscard]] std::optional<double> uniform_spacing(double tol = 1e-9) const {
        if (distances.size() < 2) return std::nullopt;
        const double h = (distances.back() - distances.front()) / static_cast<double>(distances.size() - 1);
        for (std::size_t i = 0; i < distances.size(); ++i)
            if (std::abs(distances[i] - (distances.front() + h * static_cast<double>(i))) > tol) return std::nullopt;
        return h;
    }

    /// Linear interpolation; positions outside the profile are an error.
    [[nodiscard]] double height_at(double x) const {
        if (x < distances.front() - 1e-12 || x > distances.back() + 1e-12)
            throw InvalidParameter("profile: position " + std::to_string(x) + " m outside the profile");
        auto it = std::upper_bound(distances.begin(), distances.end(), x);
        if (it == distances.begin()) return heights.front();
        if (it == distances.end()) return heights.back();
        const auto i = static_cast<std::size_t>(it - distances.begin());
        const double x0 = distances[i - 1], x1 = distances[i];
        const double w = (x - x0) / (x1 - x0);
        return heights[i - 1] + w * (heights[i] - heights[i - 1]);
    }
};

/// Time-indexed roughness under the front and rear axles.
struct InputSeries {
    std::vector<double> times;    ///< [s]
    std::vector<double> r_front;  ///< [m]
    std::vector<double> r_rear;   ///< [m]
    double speed = 0.0;           ///< [m/s]

    [[nodiscard]] std::size_t size() const { return times.size(); }
    [[nodiscard]] double dt() const { return times.size() > 1 ? times[1] - times[0] : 0.0; }
};

// =============================================================================
// Synthetic profiles
// =============================================================================

enum class RoughnessClass { A, B, C, D, E };

inline RoughnessClass parse_roughness_class(const std::string& s) {
    if (s == "A" || s == "a") return RoughnessClass::A;
    if (s == "B" || s == "b") return RoughnessClass::B;
    if (s == "C" || s == "c") return RoughnessClass::C;
    if (s == "D" || s == "d") return RoughnessClass::D;
    if (s == "E" || s == "e") return RoughnessClass::E;
    throw InvalidParameter("unknown roughness class '" + s + "' (expected A-E)");
}

inline std::string to_string(RoughnessClass c) {
    static const char* names[] = {"A", "B", "C", "D", "E"};
    return names[static_cast<int>(c)];
}

/// Displacement PSD at the reference spatial frequency, geometric class mean [m^3].
inline double reference_psd(RoughnessClass c) {
    // 16e-6 m^3 for class A, quadrupling per class
    return 16e-6 * std::pow(4.0, static_cast<int>(c));
}

inline constexpr double kReferenceSpatialFrequency = 0.1;  // cycles/m
inline constexpr double kProfileBandLow = 0.01;            // cycles/m
inline constexpr double kProfileBandHigh = 10.0;           // cycles/m

/**
 * @brief Zero-mean random profile with PSD Gd(n) = Gd(n0) (n / n0)^-2.
 *
 * Sum of cosines over [0.01, 10] cycles/m (clipped at the sampling Nyquist)
 * with independent uniform phases drawn from a seeded mt19937_64.
 */
inline RoadProfile generate_iso_profile(RoughnessClass cls, double length, double spacing, std::uint64_t seed,
                                        int components = 1000) {
    if (!(length > 0.0) || !std::isfinite(length)) throw InvalidParameter("generate_iso_profile: length must be positive");
    if (!(spacing > 0.0) || !(spacing < length)) throw InvalidParameter("generate_iso_profile: spacing must lie in (0, length)");
    if (components < 1) throw InvalidParameter("generate_iso_profile: need at least one component");

    const auto samples = static_cast<std::size_t>(std::floor(length / spacing + 1e-9)) + 1;
    const double n_hi = std::min(kProfileBandHigh, 0.5 / spacing);
    const double dn = (n_hi - kProfileBandLow) / components;
    const double g0 = reference_psd(cls);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);

    std::vector<double> freq(static_cast<std::size_t>(components)), amp(freq.size()), phi(freq.size());
    for (std::size_t i = 0; i < freq.size(); ++i) {
        freq[i] = kProfileBandLow + (static_cast<double>(i) + 0.5) * dn;
        const double ratio = freq[i] / kReferenceSpatialFrequency;
        amp[i] = std::sqrt(2.0 * g0 / (ratio * ratio) * dn);
        phi[i] = phase(rng);
    }

    RoadProfile p;
    p.track_id = "iso-" + to_string(cls);
    p.distances.resize(samples);
    p.heights.assign(samples, 0.0);
    double mean = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        const double x = spacing * static_cast<double>(s);
        p.distances[s] = x;
        double h = 0.0;
        for (std::size_t i = 0; i < freq.size(); ++i) h += amp[i] * std::cos(2.0 * M_PI * freq[i] * x + phi[i]);
        p.heights[s] = h;
        mean += h;
    }
    mean /= static_cast<double>(samples);
    for (auto& h : p.heights) h -= mean;
    return p;
}

inline RoadProfile generate_iso_profile(const std::string& cls, double length, double spacing, std::uint64_t seed) {
    return generate_iso_profile(parse_roughness_class(cls), length, spacing, seed);
}

/// Linear resampling onto a uniform grid starting at the first distance.
inline RoadProfile resample(const RoadProfile& p, double spacing) {
    p.validate();
    if (!(spacing > 0.0)) throw InvalidParameter("resample: spacing must be positive");
    RoadProfile out;
    out.track_id = p.track_id;
    const double x0 = p.distances.front();
    const auto n = static_cast<std::size_t>(std::floor((p.distances.back() - x0) / spacing + 1e-9)) + 1;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = x0 + spacing * static_cast<double>(i);
        out.distances.push_back(x);
        out.heights.push_back(p.height_at(x));
    }
    return out;
}

/// Spatial spectrum of a profile; it must already be uniformly spaced (see resample).
inline Spectrum periodogram_spatial(const RoadProfile& p, std::size_t segment = 0) {
    p.validate();
    const auto h = p.uniform_spacing();
    if (!h) throw InvalidParameter("periodogram_spatial: profile spacing is not uniform, resample it first");
    return periodogram_spatial(p.heights, *h, segment);
}

// =============================================================================
// CSV
// =============================================================================

inline RoadProfile load_profile_csv(const std::string& path) {
    const auto t = csv::read(path, {"distance_m", "height_m"});
    RoadProfile p;
    p.distances = t.columns[0];
    p.heights = t.columns[1];
    p.track_id = path;
    if (p.size() < 2) throw ParseError("'" + path + "': need at least two rows", p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!std::isfinite(p.heights[i]) || !std::isfinite(p.distances[i]))
            throw ParseError("'" + path + "': non-finite value", i + 1);
        if (i > 0 && !(p.distances[i] > p.distances[i - 1]))
            throw ParseError("'" + path + "': distances must strictly increase", i + 1);
    }
    return p;
}

inline void save_profile_csv(const std::string& path, const RoadProfile& p) {
    csv::write(path, {"distance_m", "height_m"}, {&p.distances, &p.heights});
}

inline void save_inputs_csv(const std::string& path, const InputSeries& s) {
    csv::write(path, {"t_s", "r_front_m", "r_rear_m"}, {&s.times, &s.r_front, &s.r_rear});
}

inline InputSeries load_inputs_csv(const std::string& path, double speed = 0.0) {
    const auto t = csv::read(path, {"t_s", "r_front_m", "r_rear_m"});
    InputSeries s{t.columns[0], t.columns[1], t.columns[2], speed};
    if (s.size() < 2) throw ParseError("'" + path + "': need at least two rows", s.size());
    const double dt = s.dt();
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!std::isfinite(s.r_front[i]) || !std::isfinite(s.r_rear[i])) throw ParseError("'" + path + "': non-finite value", i + 1);
        if (i > 0 && std::abs((s.times[i] - s.times[i - 1]) - dt) > 1e-9 * std::max(1.0, std::abs(s.times[i])))
            throw ParseError("'" + path + "': sampling interval is not constant", i + 1);
    }
    if (!(dt > 0.0)) throw ParseError("'" + path + "': times must increase");
    return s;
}

// =============================================================================
// Profile to axle inputs
// =============================================================================

/**
 * @brief Samples the profile under both axles at a constant speed.
 *
 * The front axle sits at `start` (profile coordinate; defaults to the first
 * distance) when t = 0. The rear axle trails by `wheelbase`; before it reaches
 * the profile it rolls on flat ground and sees zero. Sampling stops when the
 * front axle would leave the profile.
 */
inline InputSeries profile_to_inputs(const RoadProfile& pr, double speed, double dt, double wheelbase,
                                     std::optional<double> start = std::nullopt) {
    pr.validate();
    if (!(speed > 0.0) || !std::isfinite(speed)) throw InvalidParameter("profile_to_inputs: speed must be positive");
    if (!(dt > 0.0)) throw InvalidParameter("profile_to_inputs: dt must be positive");
    if (!(wheelbase >= 0.0)) throw InvalidParameter("profile_to_inputs: wheelbase must be non-negative");
    const double x0 = start.value_or(pr.distances.front());
    if (x0 < pr.distances.front() || x0 >= pr.distances.back())
        throw InvalidParameter("profile_to_inputs: start position outside the profile");

    const auto n = static_cast<std::size_t>(std::floor((pr.distances.back() - x0) / (speed * dt) + 1e-9)) + 1;
    InputSeries s;
    s.speed = speed;
    s.times.resize(n);
    s.r_front.resize(n);
    s.r_rear.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = dt * static_cast<double>(k);
        const double xf = std::min(x0 + speed * t, pr.distances.back());
        const double xr = xf - wheelbase;
        s.times[k] = t;
        s.r_front[k] = pr.height_at(xf);
        s.r_rear[k] = xr < pr.distances.front() ? 0.0 : pr.height_at(xr);
    }
    return s;
}

}  // namespace roadid
