#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "roadid/error.hpp"
#include "roadid/numerics.hpp"

namespace roadid {

/**
 * @brief Physical constants of the two-DOF (bounce, pitch) half-car.
 *
 * Defaults describe the inspection SUV used throughout the test scenarios.
 */
struct HalfCarParams {
    double m_v = 1994.0;   ///< sprung mass [kg]
    double I_v = 3954.0;   ///< pitch moment of inertia [kg m^2]
    double k_1 = 75749.0;  ///< front suspension stiffness [N/m]
    double k_2 = 99646.0;  ///< rear suspension stiffness [N/m]
    double c_1 = 12535.0;  ///< front damping [N s/m]
    double c_2 = 3602.0;   ///< rear damping [N s/m]
    double d_1 = 0.82;     ///< centroid to front axle [m]
    double d_2 = 1.90;     ///< centroid to rear axle [m]

    [[nodiscard]] double wheelbase() const { return d_1 + d_2; }

    /// Masses, stiffnesses and distances must be positive; dampers may be zero.
    void validate() const {
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0) || !std::isfinite(v)) throw InvalidParameter(std::string("half-car: ") + name + " must be positive");
        };
        auto non_negative = [](double v, const char* name) {
            if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidParameter(std::string("half-car: ") + name + " must be non-negative");
        };
        positive(m_v, "m_v");
        positive(I_v, "I_v");
        positive(k_1, "k_1");
        positive(k_2, "k_2");
        non_negative(c_1, "c_1");
        non_negative(c_2, "c_2");
        positive(d_1, "d_1");
        positive(d_2, "d_2");
    }
};

inline void to_json(nlohmann::json& j, const HalfCarParams& p) {
    j = nlohmann::json{{"m_v", p.m_v}, {"I_v", p.I_v}, {"k_1", p.k_1}, {"k_2", p.k_2},
                       {"c_1", p.c_1}, {"c_2", p.c_2}, {"d_1", p.d_1}, {"d_2", p.d_2}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline void from_json(const nlohmann::json& j, HalfCarParams& p) {
    if (!j.is_object()) throw ParseError("vehicle parameters must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        double* slot = nullptr;
        if (key == "m_v") slot = &p.m_v;
        else if (key == "I_v") slot = &p.I_v;
        else if (key == "k_1") slot = &p.k_1;
        else if (key == "k_2") slot = &p.k_2;
        else if (key == "c_1") slot = &p.c_1;
        else if (key == "c_2") slot = &p.c_2;
        else if (key == "d_1") slot = &p.d_1;
        else if (key == "d_2") slot = &p.d_2;
        else throw ParseError("unknown vehicle parameter '" + key + "'");
        if (!value.is_number()) throw ParseError("vehicle parameter '" + key + "' must be a number");
        *slot = value.get<double>();
    }
    p.validate();
}

inline HalfCarParams load_vehicle(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vehicle file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("vehicle file '" + path + "': " + e.what());
    }
    return j.get<HalfCarParams>();
}

// =============================================================================
// Second-order matrices
// =============================================================================

struct VehicleMatrices {
    Matrix M;   ///< mass, diag(m_v, I_v)
    Matrix K;   ///< stiffness (symmetric)
    Matrix C;   ///< damping (symmetric)
    Matrix Kr;  ///< roughness-to-force stiffness map (front, rear columns)
    Matrix Cr;  ///< roughness-rate-to-force damping map
};

inline VehicleMatrices build_vehicle_matrices(const HalfCarParams& p) {
    p.validate();
    VehicleMatrices v;
    v.M = Matrix::Zero(2, 2);
    v.M(0, 0) = p.m_v;
    v.M(1, 1) = p.I_v;

    v.K.resize(2, 2);
    v.K << p.k_1 + p.k_2, p.d_1 * p.k_1 - p.d_2 * p.k_2,
           p.d_1 * p.k_1 - p.d_2 * p.k_2, p.d_1 * p.d_1 * p.k_1 + p.d_2 * p.d_2 * p.k_2;

    v.C.resize(2, 2);
    v.C << p.c_1 + p.c_2, p.d_1 * p.c_1 - p.d_2 * p.c_2,
           p.d_1 * p.c_1 - p.d_2 * p.c_2, p.d_1 * p.d_1 * p.c_1 + p.d_2 * p.d_2 * p.c_2;

    v.Kr.resize(2, 2);
    v.Kr << p.k_1, p.k_2,
            p.d_1 * p.k_1, -p.d_2 * p.k_2;

    v.Cr.resize(2, 2);
    v.Cr << p.c_1, p.c_2,
            p.d_1 * p.c_1, -p.d_2 * p.c_2;
    return v;
}

// =============================================================================
// State-space forms
// =============================================================================

/**
 * Continuous model with the roughness rate replaced by a backward difference:
 *   xdot(t) = A x(t) + B r(t) - G r(t - dt),   x = [u; udot].
 */
struct ContinuousSystem {
    Matrix A;  ///< 2n x 2n
    Matrix B;  ///< 2n x m, current input
    Matrix G;  ///< 2n x m, previous input
    double dt = 0.0;
};

inline ContinuousSystem assemble_continuous(const HalfCarParams& p, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidParameter("assemble_continuous: dt must be positive");
    const VehicleMatrices v = build_vehicle_matrices(p);
    const Eigen::Index n = v.M.rows();
    const Eigen::Index m = v.Kr.cols();
    const auto lu = v.M.partialPivLu();

    ContinuousSystem cs;
    cs.dt = dt;
    cs.A = Matrix::Zero(2 * n, 2 * n);
    cs.A.topRightCorner(n, n).setIdentity();
    cs.A.bottomLeftCorner(n, n) = -lu.solve(v.K);
    cs.A.bottomRightCorner(n, n) = -lu.solve(v.C);

    const Matrix mk = lu.solve(v.Kr);
    const Matrix mc = lu.solve(v.Cr);
    cs.B = Matrix::Zero(2 * n, m);
    cs.B.bottomRows(n) = mk + mc / dt;
    cs.G = Matrix::Zero(2 * n, m);
    cs.G.bottomRows(n) = mc / dt;
    if (!cs.A.allFinite() || !cs.B.allFinite()) throw NumericError("assemble_continuous: singular mass matrix");
    return cs;
}

/**
 * Selects measured channels from the conceptual response vector
 * [displacements (n); velocities (n); accelerations (n)].
 */
class SelectionMatrix {
public:
    enum class Kind { displacement = 0, velocity = 1, acceleration = 2 };

    struct Channel {
        Kind kind;
        int dof;  ///< 0 = bounce, 1 = pitch
    };

    SelectionMatrix() = default;

    SelectionMatrix(std::vector<Channel> channels, int dofs = 2) : channels_(std::move(channels)), dofs_(dofs) {
        if (dofs_ < 1) throw InvalidParameter("selection: need at least one DOF");
        if (channels_.empty()) throw InvalidParameter("selection: at least one channel required");
        for (const auto& c : channels_)
            if (c.dof < 0 || c.dof >= dofs_) throw InvalidParameter("selection: DOF index out of range");
    }

    /// Builds from a q x 3n 0/1 matrix, rejecting anything but one 1 per row.
    static SelectionMatrix from_matrix(const Matrix& s, int dofs = 2) {
        if (s.cols() != 3 * dofs) throw InvalidParameter("selection: matrix must have 3n columns");
        std::vector<Channel> ch;
        for (Eigen::Index r = 0; r < s.rows(); ++r) {
            int hit = -1;
            for (Eigen::Index c = 0; c < s.cols(); ++c) {
                const double v = s(r, c);
                if (v == 1.0) {
                    if (hit >= 0) throw InvalidParameter("selection: more than one entry in a row");
                    hit = static_cast<int>(c);
                } else if (v != 0.0) {
                    throw InvalidParameter("selection: entries must be 0 or 1");
                }
            }
            if (hit < 0) throw InvalidParameter("selection: empty row");
            ch.push_back({static_cast<Kind>(hit / dofs), hit % dofs});
        }
        return SelectionMatrix(std::move(ch), dofs);
    }

    /// Bounce and pitch accelerations (the default axle-accelerometer layout).
    static SelectionMatrix accelerations(int dofs = 2) {
        std::vector<Channel> ch;
        for (int d = 0; d < dofs; ++d) ch.push_back({Kind::acceleration, d});
        return SelectionMatrix(std::move(ch), dofs);
    }

    [[nodiscard]] int rows() const { return static_cast<int>(channels_.size()); }
    [[nodiscard]] int dofs() const { return dofs_; }
    [[nodiscard]] const std::vector<Channel>& channels() const { return channels_; }

    [[nodiscard]] Matrix matrix() const {
        Matrix s = Matrix::Zero(rows(), 3 * dofs_);
        for (int r = 0; r < rows(); ++r) s(r, static_cast<int>(channels_[r].kind) * dofs_ + channels_[r].dof) = 1.0;
        return s;
    }

    [[nodiscard]] int count(Kind k) const {
        int c = 0;
        for (const auto& ch : channels_) c += (ch.kind == k);
        return c;
    }

private:
    std::vector<Channel> channels_;
    int dofs_ = 2;
};

struct Observation {
    Matrix C;  ///< q x 2n
    Matrix D;  ///< q x m, current input feedthrough
    Matrix H;  ///< q x m, previous input feedthrough
};

/// y = C x + D r_k - H r_{k-1}; only acceleration channels carry feedthrough.
inline Observation build_observation(const HalfCarParams& p, const SelectionMatrix& sel, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidParameter("build_observation: dt must be positive");
    const VehicleMatrices v = build_vehicle_matrices(p);
    const Eigen::Index n = v.M.rows();
    if (sel.dofs() != n || sel.rows() < 1) throw InvalidParameter("build_observation: selector does not match the model");
    const auto lu = v.M.partialPivLu();

    // response = [u; udot; uddot] as a function of x and inputs
    Matrix state_map = Matrix::Zero(3 * n, 2 * n);
    state_map.topLeftCorner(n, n).setIdentity();
    state_map.block(n, n, n, n).setIdentity();
    state_map.bottomLeftCorner(n, n) = -lu.solve(v.K);
    state_map.bottomRightCorner(n, n) = -lu.solve(v.C);

    const Eigen::Index m = v.Kr.cols();
    Matrix current = Matrix::Zero(3 * n, m);
    current.bottomRows(n) = lu.solve(v.Kr) + lu.solve(v.Cr) / dt;
    Matrix previous = Matrix::Zero(3 * n, m);
    previous.bottomRows(n) = lu.solve(v.Cr) / dt;

    const Matrix s = sel.matrix();
    return {s * state_map, s * current, s * previous};
}

/**
 * Discrete recursion
 *   x_k = Ad x_{k-1} + Bd r_k - Gd r_{k-1} + w_{k-1}
 *   y_k = C x_k + D r_k - H r_{k-1} + v_k
 * Dimensions are general; the half-car builders produce n = m = 2.
 */
struct DiscreteSystem {
    Matrix Ad, Bd, Gd;
    Matrix C, D, H;
    double dt = 0.0;

    [[nodiscard]] Eigen::Index states() const { return Ad.rows(); }
    [[nodiscard]] Eigen::Index inputs() const { return Bd.cols(); }
    [[nodiscard]] Eigen::Index outputs() const { return C.rows(); }

    void validate() const {
        const auto nx = Ad.rows(), m = Bd.cols(), q = C.rows();
        if (nx == 0 || Ad.cols() != nx) throw InvalidParameter("discrete system: Ad must be square and non-empty");
        if (Bd.rows() != nx || Gd.rows() != nx || Gd.cols() != m) throw InvalidParameter("discrete system: Bd/Gd shape mismatch");
        if (q < 1 || C.cols() != nx) throw InvalidParameter("discrete system: C shape mismatch");
        if (D.rows() != q || H.rows() != q || D.cols() != m || H.cols() != m) throw InvalidParameter("discrete system: D/H shape mismatch");
    }
};

/// Ad = expm(A dt), Bd = B dt, Gd = G dt. Observation matrices are left empty.
inline DiscreteSystem discretize(const ContinuousSystem& cs) {
    if (!(cs.dt > 0.0)) throw InvalidParameter("discretize: dt must be positive");
    DiscreteSystem ds;
    ds.dt = cs.dt;
    ds.Ad = expm(cs.A * cs.dt);
    ds.Bd = cs.B * cs.dt;
    ds.Gd = cs.G * cs.dt;
    return ds;
}

inline DiscreteSystem build_discrete_system(const HalfCarParams& p, const SelectionMatrix& sel, double dt) {
    DiscreteSystem ds = discretize(assemble_continuous(p, dt));
    const Observation obs = build_observation(p, sel, dt);
    ds.C = obs.C;
    ds.D = obs.D;
    ds.H = obs.H;
    ds.validate();
    return ds;
}

}  // namespace roadid
