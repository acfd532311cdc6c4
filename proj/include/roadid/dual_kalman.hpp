#pragma once

#include <chrono>
#include <string>

#include "roadid/estimate.hpp"
#include "roadid/model.hpp"
#include "roadid/numerics.hpp"
#include "roadid/simulator.hpp"
#include "roadid/universal_smoother.hpp"

namespace roadid {

/**
 * @brief Dual Kalman filter: a random-walk input filter followed by a state filter.
 *
 * Input stage: r_k = r_{k-1} + eta, cov(eta) = Qr I, observed through
 *   y_k - C A x_{k-1} + (C G + H) r_{k-1} = (C B + D) r_k + ...
 * State stage: standard Kalman filter on the full model with the fresh input
 * estimate, Q = Qx I. Covariance updates use the Joseph form.
 */
inline EstimationResult run_dkf(const DiscreteSystem& sys, const MeasurementSeries& meas, const NoiseConfig& noise,
                                double p0 = 1e-12, double pr0 = 1e-12) {
    sys.validate();
    const Eigen::Index nx = sys.states(), m = sys.inputs(), q = sys.outputs();
    noise.validate(q);
    if (meas.channels() != q) throw InvalidParameter("dkf: measurement channels do not match the system outputs");
    if (meas.steps() < 1) throw InvalidParameter("dkf: empty record");
    if (!meas.y.allFinite()) throw InvalidParameter("dkf: non-finite measurements");
    const auto start = std::chrono::steady_clock::now();

    const Matrix R = noise.r_vector(q).asDiagonal();
    const Matrix Qx = noise.Qx * Matrix::Identity(nx, nx);
    const Matrix Qr = noise.Qr * Matrix::Identity(m, m);
    const Matrix F = sys.C * sys.Bd + sys.D;
    const Matrix CA = sys.C * sys.Ad;
    const Matrix prev = sys.C * sys.Gd + sys.H;
    const Matrix Inx = Matrix::Identity(nx, nx), Im = Matrix::Identity(m, m);

    Vector x = Vector::Zero(nx), r = Vector::Zero(m);
    Matrix P = p0 * Inx, Pr = pr0 * Im;

    EstimationResult res;
    res.method = "dkf";
    const Eigen::Index T = meas.steps();
    res.reserve(T, m, nx, q);
    for (Eigen::Index k = 0; k < T; ++k) {
        const Vector y = meas.y.row(k).transpose();
        const Vector r_prev = r;

        // input stage
        const Matrix Pr_pred = Pr + Qr;
        const Matrix Sr = F * Pr_pred * F.transpose() + R;
        const Eigen::LDLT<Matrix> sr(Sr);
        if (sr.info() != Eigen::Success || !(sr.rcond() > 0.0))
            throw NumericError("dkf: singular input innovation covariance", k);
        const Matrix Kr = sr.solve(F * Pr_pred).transpose();
        r = r_prev + Kr * (y - CA * x + prev * r_prev - F * r_prev);
        const Matrix Ir = Im - Kr * F;
        Pr = Ir * Pr_pred * Ir.transpose() + Kr * R * Kr.transpose();
        symmetrize(Pr);

        // state stage
        const Vector x_pred = sys.Ad * x + sys.Bd * r - sys.Gd * r_prev;
        const Matrix P_pred = sys.Ad * P * sys.Ad.transpose() + Qx;
        const Matrix S = sys.C * P_pred * sys.C.transpose() + R;
        const Eigen::LDLT<Matrix> ss(S);
        if (ss.info() != Eigen::Success || !(ss.rcond() > 0.0))
            throw NumericError("dkf: singular state innovation covariance", k);
        const Matrix Kx = ss.solve(sys.C * P_pred).transpose();
        x = x_pred + Kx * (y - sys.C * x_pred - sys.D * r + sys.H * r_prev);
        const Matrix Ix = Inx - Kx * sys.C;
        P = Ix * P_pred * Ix.transpose() + Kx * R * Kx.transpose();
        symmetrize(P);

        if (!x.allFinite() || !r.allFinite() || !P.allFinite() || !Pr.allFinite())
            throw NumericError("dkf: covariance blow-up", k);

        res.times.push_back(meas.times[static_cast<std::size_t>(k)]);
        res.r_hat.row(k) = r.transpose();
        res.x_hat.row(k) = x.transpose();
        res.y_hat.row(k) = (sys.C * x + sys.D * r - sys.H * r_prev).transpose();
        res.trace_Pr.push_back(Pr.trace());
        res.trace_P.push_back(P.trace());
    }
    res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

}  // namespace roadid
