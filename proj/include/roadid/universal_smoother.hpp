#pragma once

#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "roadid/error.hpp"
#include "roadid/estimate.hpp"
#include "roadid/extended_system.hpp"
#include "roadid/numerics.hpp"
#include "roadid/simulator.hpp"

namespace roadid {

/// Noise levels assumed by the estimators.
struct NoiseConfig {
    double Qx = 1e-8;             ///< process noise, Q = Qx * I
    std::vector<double> R_diag;   ///< measurement variance per channel; one value broadcasts
    double Qr = 1e-4;             ///< input random-walk variance (dual Kalman filter only)

    void validate(Eigen::Index q) const {
        if (!(Qx >= 0.0) || !std::isfinite(Qx)) throw InvalidParameter("noise config: Qx must be >= 0");
        if (!(Qr >= 0.0) || !std::isfinite(Qr)) throw InvalidParameter("noise config: Qr must be >= 0");
        if (R_diag.empty()) throw InvalidParameter("noise config: R_diag is empty");
        if (R_diag.size() != 1 && static_cast<Eigen::Index>(R_diag.size()) != q)
            throw InvalidParameter("noise config: R_diag needs 1 or " + std::to_string(q) + " entries");
        for (double r : R_diag)
            if (!(r >= 0.0) || !std::isfinite(r)) throw InvalidParameter("noise config: variances must be >= 0");
    }

    [[nodiscard]] Vector r_vector(Eigen::Index q) const {
        Vector r(q);
        for (Eigen::Index i = 0; i < q; ++i) r(i) = R_diag.size() == 1 ? R_diag.front() : R_diag[static_cast<std::size_t>(i)];
        return r;
    }
};

/// Recursive quantities carried between smoothing steps.
struct SmootherState {
    Vector x_hat;     ///< posterior state
    Matrix P;         ///< state error covariance
    Vector r_prev;    ///< previous input estimate
    Matrix Pr_prev;   ///< its covariance
    Matrix Pxw;       ///< cov(state error, stacked process noise of the next window)
    Matrix Pxv;       ///< cov(state error, stacked measurement noise of the next window)
    Matrix A_tilde;   ///< state error transition of the last step
    Matrix W;         ///< process-noise map of the last step
    Matrix V;         ///< measurement-noise map of the last step

    static SmootherState initial(const ExtendedSystem& ext, double p0 = 1e-12, double pr0 = 1e-12) {
        SmootherState s;
        s.x_hat = Vector::Zero(ext.nx);
        s.P = p0 * Matrix::Identity(ext.nx, ext.nx);
        s.r_prev = Vector::Zero(ext.m);
        s.Pr_prev = pr0 * Matrix::Identity(ext.m, ext.m);
        s.Pxw = Matrix::Zero(ext.nx, ext.noise_cols());
        s.Pxv = Matrix::Zero(ext.nx, ext.rows());
        s.A_tilde = Matrix::Zero(ext.nx, ext.nx);
        s.W = Matrix::Zero(ext.nx, ext.noise_cols());
        s.V = Matrix::Zero(ext.nx, ext.rows());
        return s;
    }
};

struct StepDiagnostics {
    double trace_Pr = 0.0;
    double trace_P = 0.0;
    int retained = 0;              ///< singular values kept in the input inversion
    Eigen::Index gain_rank = 0;    ///< rows of the residual covariance used by the state gain
    Vector x_prior;                ///< state prediction before the residual update
    Vector y_hat;                  ///< C x + D r - H r_prev at the estimated step
};

struct StepOutput {
    SmootherState state;
    Vector r_hat;
    Matrix Pr;
    StepDiagnostics diag;
};

namespace detail {

struct WindowOptions {
    bool carry_input_error = true;  ///< include the previous input's uncertainty in the weight
    bool exact_inverse = false;     ///< invert the normal matrix exactly instead of truncating
    double min_rcond = 0.0;         ///< exact mode: smallest accepted eigenvalue ratio
};

/// Drops the leading block of `width` columns and appends a zero block.
inline Matrix shift_blocks(const Matrix& m, Eigen::Index width) {
    Matrix out = Matrix::Zero(m.rows(), m.cols());
    out.leftCols(m.cols() - width) = m.rightCols(m.cols() - width);
    return out;
}

/**
 * One window step shared by the universal and the classic MVU smoother.
 *
 * The error of every quantity entering the window is
 *   xi = [x_{k-1} error; wbar_k; vbar_k; r_{k-1} error]
 * and the stacked innovation is Sigma xi with Sigma = [Gamma, Hbreve, I, -Xi].
 * The input estimate is the weighted least-squares solution with weight
 * Rt^-1, Rt = cov(Sigma xi); the state gain minimises the posterior trace.
 */
inline StepOutput window_step(const SmootherState& s, const ExtendedSystem& e, const Eigen::Ref<const Vector>& y_window,
                              const NoiseConfig& noise, const TruncationPolicy& policy, const WindowOptions& opt,
                              long step) {
    const Eigen::Index nx = e.nx, m = e.m, ny = e.rows(), nr = e.input_cols();
    if (y_window.size() != ny) throw InvalidParameter("us_step: window vector has the wrong length");
    const DiscreteSystem& sys = e.sys;
    const double qx = noise.Qx;
    const Vector rq = noise.r_vector(e.q);
    Vector rbar(ny);
    for (int j = 0; j <= e.N; ++j) rbar.segment(j * e.q, e.q) = rq;

    const Matrix& Gm = e.Gamma;
    const Matrix& Hb = e.Hbreve;
    const Matrix& Xi = e.Xi;
    const Matrix& F = e.Fbar;

    // Weight of the stacked innovation.
    const Matrix cross = Gm * (s.Pxw * Hb.transpose() + s.Pxv);
    Matrix Rt = Gm * s.P * Gm.transpose() + cross + cross.transpose() + qx * e.HbreveGram;
    Rt.diagonal() += rbar;
    if (opt.carry_input_error) Rt.noalias() += Xi * s.Pr_prev * Xi.transpose();
    symmetrize(Rt);

    const Eigen::LLT<Matrix> llt(Rt);
    if (llt.info() != Eigen::Success)
        throw IllConditioned("innovation weight is not positive definite", step);
    const auto L = llt.matrixL();

    // Normal matrix of the weighted input least squares.
    const Matrix Z = L.solve(F);
    Matrix normal = Matrix::Zero(nr, nr);
    normal.selfadjointView<Eigen::Lower>().rankUpdate(Z.transpose());
    normal = normal.selfadjointView<Eigen::Lower>();

    SymmetricPinv inv;
    if (opt.exact_inverse) {
        inv = truncated_pinv_symmetric(normal, TruncationPolicy::keep(static_cast<int>(nr)));
        const double hi = inv.eigenvalues.front(), lo = inv.eigenvalues.back();
        if (!(hi > 0.0) || !(lo > opt.min_rcond * hi) || inv.retained < nr)
            throw IllConditioned("input normal matrix is singular (rcond " +
                                     csv::format(hi > 0.0 ? lo / hi : 0.0) + ")",
                                 step);
    } else {
        inv = truncated_pinv_symmetric(normal, policy);
    }
    const Matrix& Pbar = inv.inverse;

    // Input estimate over the window; only the leading block is kept.
    const Vector nu = y_window - Gm * s.x_hat + Xi * s.r_prev;
    const Vector rbar_hat = Pbar * (Z.transpose() * L.solve(nu));
    const Vector r_hat = rbar_hat.head(m);
    Matrix Pr = Pbar.topLeftCorner(m, m);
    symmetrize(Pr);

    // First block row of the input gain M = Pbar Z^T L^-1.
    const Matrix M0 = llt.matrixU().solve(Z * Pbar.topRows(m).transpose()).transpose();
    const Matrix Vg = sys.Bd * M0;

    // Theta = F Pbar F^T Rt^-1 = E E^T Rt^-1 with E = F * half.
    const Matrix E = F * inv.half;
    auto theta = [&](const Matrix& x) -> Matrix { return E * (E.transpose() * llt.solve(x)); };

    Matrix Phi = Rt;
    Phi.noalias() -= E * E.transpose();
    symmetrize(Phi);

    // Error maps of the prediction x_prior = A x + B r_k - G r_{k-1}.
    const Matrix A0 = sys.Ad - Vg * Gm;
    Matrix W0 = -Vg * Hb;
    W0.leftCols(nx) += Matrix::Identity(nx, nx);
    const Matrix V0 = -Vg;
    const Matrix Z0 = Vg * Xi - sys.Gd;

    // S = Sigma Lambda Pi^T, built from the blocks of Sigma Lambda.
    const Matrix Xx = Gm * s.P + Hb * s.Pxw.transpose() + s.Pxv.transpose();
    Matrix Xw = Gm * s.Pxw;
    Xw.noalias() += qx * Hb;
    Matrix Xv = Gm * s.Pxv;
    Xv.diagonal() += rbar;
    Matrix S = Xx * A0.transpose();
    S.noalias() += Xw * W0.transpose();
    S.noalias() += Xv * V0.transpose();
    if (opt.carry_input_error) S.noalias() -= Xi * s.Pr_prev * Z0.transpose();
    const Matrix Y = -(S - theta(S));

    // Prediction covariance Pi Lambda Pi^T.
    Matrix Px = A0 * s.P * A0.transpose();
    const Matrix aw = A0 * s.Pxw * W0.transpose();
    const Matrix av = A0 * s.Pxv * V0.transpose();
    Px += aw + aw.transpose() + av + av.transpose();
    Px.noalias() += qx * (W0 * W0.transpose());
    Px.noalias() += V0 * rbar.asDiagonal() * V0.transpose();
    if (opt.carry_input_error) Px.noalias() += Z0 * s.Pr_prev * Z0.transpose();

    // State gain on the numerically independent residual rows.
    const PivotedCholesky pc = pivoted_cholesky(Phi, 1e-10);
    const auto rank = static_cast<Eigen::Index>(pc.selected.size());
    Matrix K = Matrix::Zero(nx, ny);
    if (rank > 0) {
        Matrix Ys(rank, nx);
        for (Eigen::Index i = 0; i < rank; ++i) Ys.row(i) = Y.row(pc.selected[static_cast<std::size_t>(i)]);
        const auto Lp = pc.lower.triangularView<Eigen::Lower>();
        const Matrix sol = Lp.transpose().solve(Lp.solve(Ys));
        for (Eigen::Index i = 0; i < rank; ++i) K.col(pc.selected[static_cast<std::size_t>(i)]) = -sol.row(i).transpose();
    }

    const Vector resid = nu - F * rbar_hat;
    Vector x_prior = sys.Ad * s.x_hat + sys.Bd * r_hat - sys.Gd * s.r_prev;

    StepOutput out;
    SmootherState& n = out.state;
    n.x_hat = x_prior + K * resid;
    n.P = Px + K * Y + Y.transpose() * K.transpose() + K * Phi * K.transpose();
    symmetrize(n.P);
    n.r_prev = r_hat;
    n.Pr_prev = Pr;

    // K (I - Theta), then the composite maps and the shifted cross-covariances.
    const Matrix KI = K - llt.solve(E * (K * E).transpose()).transpose();
    n.A_tilde = A0 - KI * Gm;
    n.W = W0 - KI * Hb;
    n.V = V0 - KI;
    Matrix pxw = n.A_tilde * s.Pxw;
    pxw.noalias() += qx * n.W;
    n.Pxw = shift_blocks(pxw, nx);
    Matrix pxv = n.A_tilde * s.Pxv;
    pxv.noalias() += n.V * rbar.asDiagonal();
    n.Pxv = shift_blocks(pxv, e.q);

    if (!n.x_hat.allFinite() || !n.P.allFinite() || !r_hat.allFinite() || !Pr.allFinite())
        throw NumericError("non-finite estimate", step);

    out.r_hat = r_hat;
    out.Pr = Pr;
    out.diag.trace_Pr = Pr.trace();
    out.diag.trace_P = n.P.trace();
    out.diag.retained = inv.retained;
    out.diag.gain_rank = rank;
    out.diag.x_prior = std::move(x_prior);
    out.diag.y_hat = sys.C * n.x_hat + sys.D * r_hat - sys.H * s.r_prev;
    return out;
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Runs `step(state, window, k)` over every full window of the record.
template <class StepFn>
EstimationResult run_windows(const ExtendedSystem& e, const MeasurementSeries& meas, const std::string& method,
                             SmootherState state, StepFn&& step) {
    const auto start = std::chrono::steady_clock::now();
    const Eigen::Index T = meas.steps();
    if (meas.channels() != e.q) throw InvalidParameter(method + ": measurement channels do not match the system outputs");
    if (T <= e.N)
        throw InvalidParameter(method + ": record of " + std::to_string(T) + " steps is not longer than the window N = " +
                               std::to_string(e.N));
    if (!meas.y.allFinite()) throw InvalidParameter(method + ": non-finite measurements");
    const RowMatrix y = meas.y;
    const Eigen::Index steps = T - e.N;

    EstimationResult res;
    res.method = method;
    res.reserve(steps, e.m, e.nx, e.q);
    for (Eigen::Index k = 0; k < steps; ++k) {
        const Eigen::Map<const Vector> window(y.data() + k * e.q, e.rows());
        StepOutput o = step(state, window, static_cast<long>(k));
        res.times.push_back(meas.times[static_cast<std::size_t>(k)]);
        res.r_hat.row(k) = o.r_hat.transpose();
        res.x_hat.row(k) = o.state.x_hat.transpose();
        res.y_hat.row(k) = o.diag.y_hat.transpose();
        res.trace_Pr.push_back(o.diag.trace_Pr);
        res.trace_P.push_back(o.diag.trace_P);
        state = std::move(o.state);
    }
    res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

}  // namespace detail

/**
 * @brief One universal smoothing step.
 *
 * Uses measurements k..k+N to estimate r_k and x_k from the previous posterior.
 * The weight of the input least squares includes the uncertainty of r_{k-1},
 * and the normal matrix is inverted with a truncated pseudoinverse.
 */
inline StepOutput us_step(const SmootherState& state, const ExtendedSystem& ext, const Eigen::Ref<const Vector>& y_window,
                          const NoiseConfig& noise, const TruncationPolicy& policy, long step = 0) {
    return detail::window_step(state, ext, y_window, noise, policy, {}, step);
}

/// Universal smoothing over a whole record; the last N samples get no estimate.
inline EstimationResult run_us(const ExtendedSystem& ext, const MeasurementSeries& meas, const NoiseConfig& noise,
                               const TruncationPolicy& policy) {
    noise.validate(ext.q);
    policy.validate(ext.input_cols(), ext.input_cols());
    return detail::run_windows(ext, meas, "us", SmootherState::initial(ext),
                               [&](const SmootherState& s, const Eigen::Ref<const Vector>& w, long k) {
                                   return us_step(s, ext, w, noise, policy, k);
                               });
}

inline EstimationResult run_us(const DiscreteSystem& sys, const MeasurementSeries& meas, const NoiseConfig& noise,
                               const TruncationPolicy& policy, int N) {
    return run_us(build_extended(sys, N), meas, noise, policy);
}

}  // namespace roadid
