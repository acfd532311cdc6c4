#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "roadid/dual_kalman.hpp"
#include "roadid/evaluation.hpp"
#include "roadid/mvu_smoother.hpp"
#include "roadid/road_profile.hpp"
#include "roadid/universal_smoother.hpp"

using namespace roadid;

namespace {

constexpr double kDt = 0.005;

DiscreteSystem half_car() { return build_discrete_system(HalfCarParams{}, SelectionMatrix::accelerations(), kDt); }

/// Outputs of the discrete recursion itself, so the estimator model is exact.
MeasurementSeries discrete_run(const DiscreteSystem& s, const Matrix& r, double qx, double r_std, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    MeasurementSeries m;
    m.dt = s.dt;
    m.selection = SelectionMatrix::accelerations();
    m.y.resize(r.rows(), s.outputs());
    Vector x = Vector::Zero(s.states()), r_prev = Vector::Zero(s.inputs());
    for (Eigen::Index k = 0; k < r.rows(); ++k) {
        const Vector rk = r.row(k).transpose();
        Vector w(s.states()), v(s.outputs());
        for (auto& e : w) e = std::sqrt(qx) * n(g);
        for (auto& e : v) e = r_std * n(g);
        x = s.Ad * x + s.Bd * rk - s.Gd * r_prev + w;
        m.y.row(k) = (s.C * x + s.D * rk - s.H * r_prev + v).transpose();
        m.times.push_back(s.dt * static_cast<double>(k));
        r_prev = rk;
    }
    return m;
}

Matrix profile_inputs(double length, std::uint64_t seed) {
    const auto pr = generate_iso_profile(RoughnessClass::A, length, 0.01, seed);
    const auto in = profile_to_inputs(pr, 10.0 / 3.6, kDt, HalfCarParams{}.wheelbase());
    Matrix r(static_cast<Eigen::Index>(in.size()), 2);
    for (std::size_t k = 0; k < in.size(); ++k) {
        r(static_cast<Eigen::Index>(k), 0) = in.r_front[k];
        r(static_cast<Eigen::Index>(k), 1) = in.r_rear[k];
    }
    return r;
}

MeasurementSeries zeros(Eigen::Index T) {
    MeasurementSeries m;
    m.dt = kDt;
    m.y = Matrix::Zero(T, 2);
    for (Eigen::Index k = 0; k < T; ++k) m.times.push_back(kDt * static_cast<double>(k));
    return m;
}

NoiseConfig noise(double qx, double r, double qr = 1e-4) {
    NoiseConfig n;
    n.Qx = qx;
    n.R_diag = {r};
    n.Qr = qr;
    return n;
}

double hp_nrmse(const Matrix& truth, const EstimationResult& e, Eigen::Index col) {
    std::vector<double> t(static_cast<std::size_t>(e.steps()));
    for (Eigen::Index k = 0; k < e.steps(); ++k) t[static_cast<std::size_t>(k)] = truth(k, col);
    const double speed = 10.0 / 3.6;
    return nrmse(spatial_highpass(t, 1.0 / kDt, speed, 0.1), spatial_highpass(column(e.r_hat, col), 1.0 / kDt, speed, 0.1));
}

}  // namespace

TEST(UniversalSmoother, ZeroMeasurementsGiveZeroEstimates) {
    const auto sys = half_car();
    const auto res = run_us(sys, zeros(120), noise(1e-8, 1e-6), TruncationPolicy::keep(21), 10);
    EXPECT_EQ(res.steps(), 110);
    EXPECT_EQ(res.r_hat.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(res.x_hat.cwiseAbs().maxCoeff(), 0.0);
}

TEST(UniversalSmoother, SingleStepMatchesDirectInversion) {
    const auto sys = half_car();
    const ExtendedSystem ext = build_extended(sys, 0);
    std::mt19937_64 g(5);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        SmootherState s = SmootherState::initial(ext);
        for (auto& v : s.x_hat) v = 1e-3 * n(g);
        for (auto& v : s.r_prev) v = 1e-3 * n(g);
        Vector y(2);
        y << 0.1 * n(g), 0.1 * n(g);
        const StepOutput o = us_step(s, ext, y, noise(0.0, 0.0), TruncationPolicy::keep(2));
        // the estimate must satisfy the output equation at the predicted state exactly
        const Vector direct = sys.D.partialPivLu().solve(y - sys.C * o.diag.x_prior + sys.H * s.r_prev);
        EXPECT_LT((o.r_hat - direct).norm(), 1e-10 * std::max(1.0, direct.norm())) << "trial " << trial;
        // and equals the explicit solve relative to the previous posterior
        const Matrix F = sys.C * sys.Bd + sys.D;
        const Vector rel = F.partialPivLu().solve(y - sys.C * sys.Ad * s.x_hat + (sys.C * sys.Gd + sys.H) * s.r_prev);
        EXPECT_LT((o.r_hat - rel).norm(), 1e-10 * std::max(1.0, rel.norm()));
    }
}

TEST(UniversalSmoother, RecordNotLongerThanWindowIsRejected) {
    const auto sys = half_car();
    EXPECT_THROW(run_us(sys, zeros(10), noise(1e-8, 1e-6), TruncationPolicy::keep(5), 10), InvalidParameter);
    EXPECT_NO_THROW(run_us(sys, zeros(11), noise(1e-8, 1e-6), TruncationPolicy::keep(5), 10));
}

TEST(UniversalSmoother, RejectsBadConfiguration) {
    const auto sys = half_car();
    EXPECT_THROW(run_us(sys, zeros(50), noise(-1.0, 1e-6), TruncationPolicy::keep(5), 5), InvalidParameter);
    EXPECT_THROW(run_us(sys, zeros(50), noise(1e-8, 1e-6), TruncationPolicy::keep(13), 5), InvalidParameter);
    NoiseConfig bad = noise(1e-8, 1e-6);
    bad.R_diag = {1e-6, 1e-6, 1e-6};
    EXPECT_THROW(run_us(sys, zeros(50), bad, TruncationPolicy::keep(5), 5), InvalidParameter);
}

TEST(UniversalSmoother, Deterministic) {
    const auto sys = half_car();
    const auto meas = discrete_run(sys, profile_inputs(4.0, 3), 1e-10, 1e-3, 8);
    const auto a = run_us(sys, meas, noise(1e-8, 1e-6), TruncationPolicy::keep(41), 20);
    const auto b = run_us(sys, meas, noise(1e-8, 1e-6), TruncationPolicy::keep(41), 20);
    EXPECT_EQ((a.r_hat - b.r_hat).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ((a.x_hat - b.x_hat).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(a.trace_Pr, b.trace_Pr);
}

TEST(UniversalSmoother, CovariancesStayHealthy) {
    const auto sys = half_car();
    const auto meas = discrete_run(sys, profile_inputs(6.0, 4), 1e-10, 1e-3, 9);
    const int N = 10;
    const ExtendedSystem ext = build_extended(sys, N);
    const auto nz = noise(1e-8, 1e-6);
    const detail::RowMatrix y = meas.y;
    SmootherState s = SmootherState::initial(ext);
    for (Eigen::Index k = 0; k + N < meas.steps(); ++k) {
        const Eigen::Map<const Vector> w(y.data() + k * 2, ext.rows());
        StepOutput o = us_step(s, ext, w, nz, TruncationPolicy::keep(2 * (N + 1) - 1), static_cast<long>(k));
        for (const Matrix* p : {&o.state.P, &o.Pr}) {
            EXPECT_EQ((*p - p->transpose()).cwiseAbs().maxCoeff(), 0.0) << "step " << k;
            EXPECT_GE(min_eigenvalue(*p), -1e-8 * std::abs(p->trace())) << "step " << k;
        }
        s = std::move(o.state);
    }
}

TEST(UniversalSmoother, TruncationModesAgreeAtFullRetention) {
    const auto sys = half_car();
    const auto meas = discrete_run(sys, profile_inputs(3.0, 5), 1e-10, 1e-3, 10);
    const int N = 3;
    const auto a = run_us(sys, meas, noise(1e-8, 1e-6), TruncationPolicy::keep(2 * (N + 1)), N);
    const auto b = run_us(sys, meas, noise(1e-8, 1e-6), TruncationPolicy::relative(1e-14), N);
    EXPECT_LT((a.r_hat - b.r_hat).cwiseAbs().maxCoeff(), 1e-8 * std::max(1.0, a.r_hat.cwiseAbs().maxCoeff()));
}

TEST(UniversalSmoother, RecoversModelConsistentProfile) {
    const auto sys = half_car();
    const Matrix r = profile_inputs(12.0, 7);
    const auto meas = discrete_run(sys, r, 0.0, 0.0, 1);
    const int N = 20;
    const auto e = run_us(sys, meas, noise(1e-12, 1e-10), TruncationPolicy::keep(2 * (N + 1)), N);
    EXPECT_LT(hp_nrmse(r, e, 0), 0.05);
    EXPECT_LT(hp_nrmse(r, e, 1), 0.05);
}

TEST(MvuSmoother, SingleChannelIsStructurallyRankDeficient) {
    const auto sys = build_discrete_system(HalfCarParams{}, SelectionMatrix({{SelectionMatrix::Kind::acceleration, 0}}), kDt);
    MeasurementSeries m;
    m.y = Matrix::Zero(50, 1);
    for (int k = 0; k < 50; ++k) m.times.push_back(kDt * k);
    EXPECT_THROW(run_mvus(sys, m, noise(1e-8, 1e-6), 5), StructuralRankError);
}

TEST(MvuSmoother, DisplacementOnlyHasNoFeedthrough) {
    const auto sys = build_discrete_system(
        HalfCarParams{}, SelectionMatrix({{SelectionMatrix::Kind::displacement, 0}, {SelectionMatrix::Kind::displacement, 1}}), kDt);
    EXPECT_THROW(run_mvus(sys, zeros(50), noise(1e-8, 1e-6), 5), StructuralRankError);
}

TEST(MvuSmoother, ZeroMeasurementsAndDeterminism) {
    const auto sys = half_car();
    const auto z = run_mvus(sys, zeros(60), noise(1e-8, 1e-6), 5);
    EXPECT_EQ(z.r_hat.cwiseAbs().maxCoeff(), 0.0);
    const auto meas = discrete_run(sys, profile_inputs(3.0, 6), 1e-10, 1e-3, 3);
    const auto a = run_mvus(sys, meas, noise(1e-8, 1e-6), 5);
    const auto b = run_mvus(sys, meas, noise(1e-8, 1e-6), 5);
    EXPECT_EQ((a.r_hat - b.r_hat).cwiseAbs().maxCoeff(), 0.0);
}

TEST(MvuSmoother, AgreesWithUniversalSmootherOnLowNoiseData) {
    const auto sys = half_car();
    const Matrix r = profile_inputs(12.0, 8);
    const auto meas = discrete_run(sys, r, 1e-12, 1e-4, 2);
    const int N = 10;
    const auto nz = noise(1e-10, 1e-8);
    const auto us = run_us(sys, meas, nz, TruncationPolicy::keep(2 * (N + 1)), N);
    const auto mv = run_mvus(sys, meas, nz, N);
    const double a = 0.5 * (hp_nrmse(r, us, 0) + hp_nrmse(r, us, 1));
    const double b = 0.5 * (hp_nrmse(r, mv, 0) + hp_nrmse(r, mv, 1));
    EXPECT_LT(std::abs(a - b), 0.05);
}

TEST(DualKalman, ZeroMeasurementsGiveZeroEstimates) {
    const auto res = run_dkf(half_car(), zeros(200), noise(1e-8, 1e-6, 1e-4));
    EXPECT_EQ(res.steps(), 200);
    EXPECT_EQ(res.r_hat.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(res.x_hat.cwiseAbs().maxCoeff(), 0.0);
}

TEST(DualKalman, ConvergesToConstantInputOnMinimumPhaseSystem) {
    // acceleration outputs of the half car have zeros near z = 1, so a near-exact
    // inversion is unstable there; this small system has a stable inverse
    DiscreteSystem s;
    s.Ad = Eigen::Vector2d(0.5, 0.3).asDiagonal();
    s.Bd = Matrix::Ones(2, 1);
    s.Gd = Matrix::Zero(2, 1);
    s.C = Matrix(1, 2);
    s.C << 1.0, 0.0;
    s.D = Matrix::Ones(1, 1);
    s.H = Matrix::Zero(1, 1);
    s.dt = kDt;
    Matrix r = Matrix::Constant(2000, 1, 0.01);
    r(0, 0) = 0.0;
    MeasurementSeries meas;
    meas.dt = kDt;
    meas.y.resize(r.rows(), 1);
    Vector x = Vector::Zero(2);
    for (Eigen::Index k = 0; k < r.rows(); ++k) {
        x = s.Ad * x + s.Bd * r(k, 0);
        meas.y(k, 0) = (s.C * x)(0) + r(k, 0);
        meas.times.push_back(kDt * static_cast<double>(k));
    }
    const auto e = run_dkf(s, meas, noise(1e-12, 1e-10, 1e-6));
    for (Eigen::Index k = 1000; k < 2000; k += 50) EXPECT_NEAR(e.r_hat(k, 0), 0.01, 0.02 * 0.01) << "step " << k;
}

TEST(DualKalman, DeterministicAndValidated) {
    const auto sys = half_car();
    const auto meas = discrete_run(sys, profile_inputs(3.0, 2), 1e-10, 1e-3, 4);
    const auto a = run_dkf(sys, meas, noise(1e-8, 1e-6, 1e-4));
    const auto b = run_dkf(sys, meas, noise(1e-8, 1e-6, 1e-4));
    EXPECT_EQ((a.r_hat - b.r_hat).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_THROW(run_dkf(sys, meas, noise(1e-8, 1e-6, -1.0)), InvalidParameter);
    MeasurementSeries bad = meas;
    bad.y(3, 1) = std::nan("");
    EXPECT_THROW(run_dkf(sys, bad, noise(1e-8, 1e-6, 1e-4)), InvalidParameter);
}

TEST(EstimationResult, CsvLayout) {
    const auto e = run_dkf(half_car(), zeros(5), noise(1e-8, 1e-6, 1e-4));
    const auto path = (std::filesystem::temp_directory_path() / "roadid_estimate.csv").string();
    save_estimate_csv(path, e);
    const auto t = csv::read_any(path);
    const std::vector<std::string> expected{"t_s", "r_front_est", "r_rear_est", "trace_Pr", "x1", "x2", "x3", "x4"};
    EXPECT_EQ(t.header, expected);
    EXPECT_EQ(t.rows(), 5u);
}
