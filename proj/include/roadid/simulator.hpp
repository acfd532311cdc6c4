#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "roadid/csv.hpp"
#include "roadid/error.hpp"
#include "roadid/model.hpp"
#include "roadid/road_profile.hpp"

namespace roadid {

/// Disturbances added to the simulated sensor signals.
struct NoiseSpec {
    std::vector<double> measurement_std;  ///< white noise sigma per channel; one value broadcasts
    double bridge_amp = 0.0;              ///< amplitude of each bridge sinusoid on acceleration channels
    std::vector<double> bridge_freqs{2.5, 3.4};  ///< [Hz]
    std::uint64_t seed = 1;

    void validate() const {
        for (double s : measurement_std)
            if (!(s >= 0.0) || !std::isfinite(s)) throw InvalidParameter("noise: measurement sigma must be >= 0");
        if (!(bridge_amp >= 0.0) || !std::isfinite(bridge_amp)) throw InvalidParameter("noise: bridge amplitude must be >= 0");
        for (double f : bridge_freqs)
            if (!(f > 0.0)) throw InvalidParameter("noise: bridge frequencies must be positive");
    }

    [[nodiscard]] double sigma(std::size_t channel) const {
        if (measurement_std.empty()) return 0.0;
        return measurement_std.size() == 1 ? measurement_std.front() : measurement_std.at(channel);
    }
};

/// Sampled sensor outputs, one row per time step.
struct MeasurementSeries {
    std::vector<double> times;
    Matrix y;  ///< T x q
    SelectionMatrix selection = SelectionMatrix::accelerations();
    double speed = 0.0;
    double dt = 0.0;
    NoiseSpec noise;

    [[nodiscard]] Eigen::Index steps() const { return y.rows(); }
    [[nodiscard]] Eigen::Index channels() const { return y.cols(); }
};

/// Noise-free ground truth behind a MeasurementSeries.
struct TrueStates {
    Matrix x;             ///< T x 2n, [u; udot]
    Matrix acceleration;  ///< T x n, noise-free uddot
};

namespace detail {

/// C1 cubic Hermite interpolant through uniform samples (Catmull-Rom tangents).
class HermiteSignal {
public:
    HermiteSignal(const std::vector<double>& v, double dt) : v_(v), dt_(dt), slope_(v.size(), 0.0) {
        const std::size_t n = v_.size();
        if (n >= 2) {
            slope_.front() = (v_[1] - v_[0]) / dt_;
            slope_.back() = (v_[n - 1] - v_[n - 2]) / dt_;
            for (std::size_t i = 1; i + 1 < n; ++i) slope_[i] = (v_[i + 1] - v_[i - 1]) / (2.0 * dt_);
        }
    }

    /// Value and derivative at sample interval `i`, local fraction s in [0, 1].
    [[nodiscard]] std::pair<double, double> eval(std::size_t i, double s) const {
        if (i + 1 >= v_.size()) return {v_.back(), slope_.back()};
        const double p0 = v_[i], p1 = v_[i + 1], m0 = slope_[i] * dt_, m1 = slope_[i + 1] * dt_;
        const double s2 = s * s, s3 = s2 * s;
        const double val = (2 * s3 - 3 * s2 + 1) * p0 + (s3 - 2 * s2 + s) * m0 + (-2 * s3 + 3 * s2) * p1 + (s3 - s2) * m1;
        const double der = (6 * s2 - 6 * s) * p0 + (3 * s2 - 4 * s + 1) * m0 + (-6 * s2 + 6 * s) * p1 + (3 * s2 - 2 * s) * m1;
        return {val, der / dt_};
    }

private:
    std::vector<double> v_;
    double dt_;
    std::vector<double> slope_;
};

}  // namespace detail

/**
 * @brief Integrates M uddot + C udot + K u = Kr r + Cr rdot from x0 (rest by default).
 *
 * RK4 with `substeps` steps per sample interval. The roughness and its rate
 * come from a C1 cubic interpolant of the input series, so the estimator's
 * backward-difference model is never reproduced exactly. Acceleration channels
 * receive the bridge sinusoids (random phase per channel and frequency) and
 * every channel gets white Gaussian noise.
 */
inline std::pair<MeasurementSeries, TrueStates> simulate_response(const HalfCarParams& p, const InputSeries& inputs,
                                                                  const NoiseSpec& noise,
                                                                  const SelectionMatrix& sel = SelectionMatrix::accelerations(),
                                                                  int substeps = 10,
                                                                  const Eigen::Vector4d& x0 = Eigen::Vector4d::Zero()) {
    noise.validate();
    const std::size_t steps = inputs.size();
    if (steps < 2 || inputs.r_front.size() != steps || inputs.r_rear.size() != steps)
        throw InvalidParameter("simulate_response: need at least two input samples per axle");
    if (substeps < 1) throw InvalidParameter("simulate_response: substeps must be >= 1");
    const double dt = inputs.dt();
    if (!(dt > 0.0)) throw InvalidParameter("simulate_response: non-increasing times");
    for (std::size_t k = 1; k < steps; ++k)
        if (std::abs(inputs.times[k] - inputs.times[k - 1] - dt) > 1e-9 * std::max(1.0, inputs.times[k]))
            throw InvalidParameter("simulate_response: inputs must be uniformly sampled");
    if (sel.dofs() != 2) throw InvalidParameter("simulate_response: selector must address the two half-car DOFs");
    if (!noise.measurement_std.empty() && noise.measurement_std.size() != 1 &&
        noise.measurement_std.size() != static_cast<std::size_t>(sel.rows()))
        throw InvalidParameter("simulate_response: one measurement sigma per channel required");

    const VehicleMatrices vm = build_vehicle_matrices(p);
    const Eigen::Matrix2d minv = vm.M.inverse();
    const Eigen::Matrix2d mk = minv * vm.K, mc = minv * vm.C, mkr = minv * vm.Kr, mcr = minv * vm.Cr;

    const detail::HermiteSignal front(inputs.r_front, dt), rear(inputs.r_rear, dt);
    auto road = [&](std::size_t i, double s) {
        const auto [rf, rfd] = front.eval(i, s);
        const auto [rr, rrd] = rear.eval(i, s);
        return std::pair<Eigen::Vector2d, Eigen::Vector2d>{{rf, rr}, {rfd, rrd}};
    };
    auto accel = [&](const Eigen::Vector4d& x, const Eigen::Vector2d& r, const Eigen::Vector2d& rd) -> Eigen::Vector2d {
        return mkr * r + mcr * rd - mk * x.head<2>() - mc * x.tail<2>();
    };
    auto deriv = [&](const Eigen::Vector4d& x, std::size_t i, double s) {
        const auto [r, rd] = road(i, s);
        Eigen::Vector4d d;
        d << x.tail<2>(), accel(x, r, rd);
        return d;
    };

    TrueStates truth;
    truth.x.resize(static_cast<Eigen::Index>(steps), 4);
    truth.acceleration.resize(static_cast<Eigen::Index>(steps), 2);

    if (!x0.allFinite()) throw InvalidParameter("simulate_response: non-finite initial state");
    Eigen::Vector4d x = x0;
    const double h = 1.0 / substeps;  // in units of one sample interval
    for (std::size_t k = 0; k < steps; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        truth.x.row(kk) = x.transpose();
        const auto [r, rd] = road(k, 0.0);
        truth.acceleration.row(kk) = accel(x, r, rd).transpose();
        if (k + 1 == steps) break;
        for (int j = 0; j < substeps; ++j) {
            const double s = j * h;
            const Eigen::Vector4d k1 = deriv(x, k, s);
            const Eigen::Vector4d k2 = deriv(x + 0.5 * h * dt * k1, k, s + 0.5 * h);
            const Eigen::Vector4d k3 = deriv(x + 0.5 * h * dt * k2, k, s + 0.5 * h);
            const Eigen::Vector4d k4 = deriv(x + h * dt * k3, k, s + h);
            x += (h * dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
    }

    MeasurementSeries out;
    out.times = inputs.times;
    out.selection = sel;
    out.speed = inputs.speed;
    out.dt = dt;
    out.noise = noise;
    const auto q = sel.rows();
    out.y.resize(static_cast<Eigen::Index>(steps), q);

    std::mt19937_64 rng(noise.seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
    std::vector<std::vector<double>> phases(static_cast<std::size_t>(q));
    for (auto& ph : phases)
        for (std::size_t f = 0; f < noise.bridge_freqs.size(); ++f) ph.push_back(phase(rng));
    std::normal_distribution<double> gauss(0.0, 1.0);

    for (std::size_t k = 0; k < steps; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const double t = inputs.times[k];
        for (int c = 0; c < q; ++c) {
            const auto& ch = sel.channels()[static_cast<std::size_t>(c)];
            double v = 0.0;
            switch (ch.kind) {
                case SelectionMatrix::Kind::displacement: v = truth.x(kk, ch.dof); break;
                case SelectionMatrix::Kind::velocity: v = truth.x(kk, 2 + ch.dof); break;
                case SelectionMatrix::Kind::acceleration:
                    v = truth.acceleration(kk, ch.dof);
                    for (std::size_t f = 0; f < noise.bridge_freqs.size(); ++f)
                        v += noise.bridge_amp * std::sin(2.0 * M_PI * noise.bridge_freqs[f] * t + phases[static_cast<std::size_t>(c)][f]);
                    break;
            }
            const double sigma = noise.sigma(static_cast<std::size_t>(c));
            const double g = gauss(rng);
            out.y(kk, c) = v + sigma * g;
        }
    }
    return {std::move(out), std::move(truth)};
}

/**
 * @brief Bounce and pitch accelerations from two vertical accelerometers.
 *
 * l_f, l_r are the sensor distances ahead of and behind the centroid.
 * Positive pitch lifts the front.
 */
inline std::pair<double, double> rigid_body_transform(double a_front, double a_rear, double l_f, double l_r) {
    const double span = l_f + l_r;
    if (!(std::abs(span) > 0.0) || !std::isfinite(span)) throw InvalidParameter("rigid_body_transform: lever arms must not sum to zero");
    return {(l_r * a_front + l_f * a_rear) / span, (a_front - a_rear) / span};
}

// =============================================================================
// CSV
// =============================================================================

inline std::string channel_name(const SelectionMatrix::Channel& c) {
    static const char* kinds[] = {"disp", "vel", "acc"};
    static const char* dofs[] = {"bounce", "pitch"};
    return std::string(kinds[static_cast<int>(c.kind)]) + "_" + (c.dof < 2 ? dofs[c.dof] : std::to_string(c.dof));
}

inline void save_measurements_csv(const std::string& path, const MeasurementSeries& m) {
    std::vector<std::string> header{"t_s"};
    std::vector<std::vector<double>> cols(static_cast<std::size_t>(m.channels()));
    for (Eigen::Index c = 0; c < m.channels(); ++c) {
        header.push_back(channel_name(m.selection.channels()[static_cast<std::size_t>(c)]));
        cols[static_cast<std::size_t>(c)].assign(m.y.col(c).data(), m.y.col(c).data() + m.steps());
    }
    std::vector<const std::vector<double>*> ptrs{&m.times};
    for (const auto& c : cols) ptrs.push_back(&c);
    csv::write(path, header, ptrs);
}

/// Sensor geometry for raw four-accelerometer files.
struct RawSensorLayout {
    double l_front = 0.82;  ///< sensor lever arm ahead of the centroid [m]
    double l_rear = 1.90;   ///< sensor lever arm behind the centroid [m]
    int track = 1;          ///< track 1 uses sensors 3/4, track 2 uses sensors 1/2
};

/**
 * Loads `t_s,acc_bounce,acc_pitch` (or any channel-named layout written by
 * save_measurements_csv) or raw `t_s,a1,a2,a3,a4`, which is reduced to bounce
 * and pitch with rigid_body_transform. Odd sensors are taken as the front ones.
 */
inline MeasurementSeries load_measurements_csv(const std::string& path, const RawSensorLayout& raw = {}) {
    const csv::Table t = csv::read_any(path);
    if (t.header.empty() || t.header.front() != "t_s") throw ParseError("'" + path + "': first column must be t_s");
    const std::size_t rows = t.rows();
    if (rows < 2) throw ParseError("'" + path + "': need at least two rows", rows);

    MeasurementSeries m;
    m.times = t.columns[0];
    m.dt = m.times[1] - m.times[0];
    if (!(m.dt > 0.0)) throw ParseError("'" + path + "': times must increase", 2);
    for (std::size_t i = 1; i < rows; ++i)
        if (std::abs(m.times[i] - m.times[i - 1] - m.dt) > 1e-9 * std::max(1.0, std::abs(m.times[i])))
            throw ParseError("'" + path + "': sampling interval is not constant", i + 1);

    const std::vector<std::string> raw_header{"t_s", "a1", "a2", "a3", "a4"};
    if (t.header == raw_header) {
        if (raw.track != 1 && raw.track != 2) throw InvalidParameter("raw layout: track must be 1 or 2");
        const std::size_t fc = raw.track == 1 ? 3 : 1;
        m.y.resize(static_cast<Eigen::Index>(rows), 2);
        for (std::size_t i = 0; i < rows; ++i) {
            const auto [b, th] = rigid_body_transform(t.columns[fc][i], t.columns[fc + 1][i], raw.l_front, raw.l_rear);
            m.y(static_cast<Eigen::Index>(i), 0) = b;
            m.y(static_cast<Eigen::Index>(i), 1) = th;
        }
        m.selection = SelectionMatrix::accelerations();
    } else {
        std::vector<SelectionMatrix::Channel> channels;
        for (std::size_t c = 1; c < t.header.size(); ++c) {
            bool found = false;
            for (int kind = 0; kind < 3 && !found; ++kind)
                for (int dof = 0; dof < 2 && !found; ++dof) {
                    const SelectionMatrix::Channel ch{static_cast<SelectionMatrix::Kind>(kind), dof};
                    if (channel_name(ch) == t.header[c]) {
                        channels.push_back(ch);
                        found = true;
                    }
                }
            if (!found) throw ParseError("'" + path + "': unknown channel '" + t.header[c] + "'");
        }
        if (channels.empty()) throw ParseError("'" + path + "': no measurement channels");
        m.selection = SelectionMatrix(channels);
        m.y.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(channels.size()));
        for (std::size_t c = 0; c < channels.size(); ++c)
            for (std::size_t i = 0; i < rows; ++i) m.y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = t.columns[c + 1][i];
    }
    if (!m.y.allFinite()) throw ParseError("'" + path + "': non-finite measurement");
    return m;
}

}  // namespace roadid
