#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "roadid/model.hpp"
#include "roadid/numerics.hpp"

using namespace roadid;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(g);
    return m;
}

/// exp(A) through a complex eigen-decomposition, the reference for diagonalisable inputs.
Matrix expm_by_eigen(const Matrix& a) {
    const Eigen::EigenSolver<Matrix> es(a);
    const Eigen::MatrixXcd v = es.eigenvectors();
    Eigen::VectorXcd d = es.eigenvalues();
    for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = std::exp(d(i));
    return (v * d.asDiagonal() * v.inverse()).real();
}

}  // namespace

TEST(Expm, ZeroGivesIdentity) { EXPECT_TRUE(expm(Matrix::Zero(5, 5)).isIdentity(0.0)); }

TEST(Expm, DiagonalIsElementwise) {
    Matrix a = Matrix::Zero(3, 3);
    a.diagonal() << 0.5, -2.0, 3.0;
    const Matrix e = expm(a);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(e(i, i), std::exp(a(i, i)));
    EXPECT_EQ((e - Matrix(e.diagonal().asDiagonal())).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Expm, NilpotentSeriesTruncates) {
    for (double tau : {0.0, 0.25, 3.0, 40.0}) {
        Matrix a(2, 2);
        a << 0, tau, 0, 0;
        Matrix expected(2, 2);
        expected << 1, tau, 0, 1;
        EXPECT_EQ((expm(a) - expected).cwiseAbs().maxCoeff(), 0.0) << "tau = " << tau;
    }
}

TEST(Expm, MatchesEigenDecompositionOnHalfCar) {
    const auto cs = assemble_continuous(HalfCarParams{}, 0.005);
    const Matrix at = cs.A * 0.005;
    const Matrix ref = expm_by_eigen(at);
    EXPECT_LT((expm(at) - ref).norm() / ref.norm(), 1e-10);
    // also over a long step, which exercises scaling and squaring
    const Matrix ref2 = expm_by_eigen(cs.A * 0.7);
    EXPECT_LT((expm(cs.A * 0.7) - ref2).norm() / ref2.norm(), 1e-10);
}

TEST(Expm, StrictlyUpperTriangularBeyondIndexTwo) {
    Matrix a = Matrix::Zero(3, 3);
    a << 0, 1, 2, 0, 0, 3, 0, 0, 0;
    Matrix expected(3, 3);  // I + A + A^2 / 2
    expected << 1, 1, 3.5, 0, 1, 3, 0, 0, 1;
    EXPECT_LT((expm(a) - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Expm, FlowProperty) {
    const auto cs = assemble_continuous(HalfCarParams{}, 0.005);
    for (auto [t1, t2] : {std::pair{0.01, 0.02}, std::pair{0.3, 0.05}, std::pair{1.0, 2.5}}) {
        const Matrix lhs = expm(cs.A * (t1 + t2));
        const Matrix rhs = expm(cs.A * t1) * expm(cs.A * t2);
        EXPECT_LT((lhs - rhs).norm() / lhs.norm(), 1e-10);
    }
}

TEST(Expm, RejectsBadInput) {
    EXPECT_THROW(expm(Matrix::Zero(2, 3)), InvalidParameter);
    Matrix a = Matrix::Zero(2, 2);
    a(0, 1) = std::nan("");
    EXPECT_THROW(expm(a), NumericError);
}

TEST(TsvdPinv, IdentityFullRank) {
    EXPECT_TRUE(tsvd_pinv(Matrix::Identity(3, 3), TruncationPolicy::keep(3)).isApprox(Matrix::Identity(3, 3), 1e-15));
}

TEST(TsvdPinv, RankOneOuterProduct) {
    Vector u(4), v(3);
    u << 1, -2, 0.5, 3;
    v << 2, 0, -1;
    const Matrix m = u * v.transpose();
    const Matrix expected = v * u.transpose() / (u.squaredNorm() * v.squaredNorm());
    EXPECT_LT((tsvd_pinv(m, TruncationPolicy::keep(1)) - expected).norm(), 1e-12 * expected.norm());
}

TEST(TsvdPinv, PenroseConditions) {
    const Matrix m = random_matrix(10, 6, 3);
    const Matrix x = tsvd_pinv(m, TruncationPolicy::keep(6));
    EXPECT_LT((m * x * m - m).norm(), 1e-10);
    EXPECT_LT((x * m * x - x).norm(), 1e-10);
    EXPECT_LT((m * x - (m * x).transpose()).norm(), 1e-10);
    EXPECT_LT((x * m - (x * m).transpose()).norm(), 1e-10);
    const Matrix ref = m.completeOrthogonalDecomposition().pseudoInverse();
    EXPECT_LT((x - ref).norm(), 1e-10);
}

TEST(TsvdPinv, ReconstructionErrorNonIncreasingInK) {
    const Matrix m = random_matrix(8, 7, 11);
    double prev = 1e300;
    for (int k = 1; k <= 7; ++k) {
        const double err = (m * tsvd_pinv(m, TruncationPolicy::keep(k)) * m - m).norm();
        EXPECT_LE(err, prev + 1e-12) << "k = " << k;
        prev = err;
    }
    EXPECT_LT(prev, 1e-10);
}

TEST(TsvdPinv, ToleranceModeDropsSmallValues) {
    Matrix m = Matrix::Zero(3, 3);
    m.diagonal() << 1.0, 1e-3, 1e-9;
    const Matrix x = tsvd_pinv(m, TruncationPolicy::relative(1e-6));
    EXPECT_NEAR(x(0, 0), 1.0, 1e-12);
    EXPECT_NEAR(x(1, 1), 1e3, 1e-6);
    EXPECT_EQ(x(2, 2), 0.0);
}

TEST(TsvdPinv, TiesAtTheBoundaryKeepExactlyK) {
    const Matrix m = Matrix::Identity(4, 4);
    const Matrix x = tsvd_pinv(m, TruncationPolicy::keep(2));
    EXPECT_NEAR(x.trace(), 2.0, 1e-12);
    // deterministic: repeated calls agree bit for bit
    EXPECT_EQ((x - tsvd_pinv(m, TruncationPolicy::keep(2))).cwiseAbs().maxCoeff(), 0.0);
}

TEST(TsvdPinv, PolicyValidation) {
    EXPECT_THROW(tsvd_pinv(Matrix::Identity(3, 3), TruncationPolicy::keep(4)), InvalidParameter);
    EXPECT_THROW(tsvd_pinv(Matrix::Identity(3, 3), TruncationPolicy::keep(0)), InvalidParameter);
    EXPECT_THROW(tsvd_pinv(Matrix::Identity(3, 3), TruncationPolicy::relative(1.5)), InvalidParameter);
    EXPECT_THROW(tsvd_pinv(Matrix::Identity(3, 3), TruncationPolicy::relative(0.0)), InvalidParameter);
}

TEST(SymmetricPinv, AgreesWithGeneralTruncatedPinv) {
    const Matrix b = random_matrix(9, 6, 5);
    const Matrix s = b.transpose() * b;
    for (int k = 1; k <= 6; ++k) {
        const auto sp = truncated_pinv_symmetric(s, TruncationPolicy::keep(k));
        EXPECT_EQ(sp.retained, k);
        EXPECT_LT((sp.inverse - tsvd_pinv(s, TruncationPolicy::keep(k))).norm(), 1e-9 * sp.inverse.norm());
        EXPECT_LT((sp.half * sp.half.transpose() - sp.inverse).norm(), 1e-12 * sp.inverse.norm());
    }
}

TEST(SymmetricPinv, NeverInvertsNonPositiveEigenvalues) {
    Matrix s = Matrix::Zero(3, 3);
    s.diagonal() << 2.0, 0.0, -1e-20;
    const auto sp = truncated_pinv_symmetric(s, TruncationPolicy::keep(3));
    EXPECT_EQ(sp.retained, 1);
    EXPECT_NEAR(sp.inverse(0, 0), 0.5, 1e-15);
}

TEST(CovarianceHygiene, SymmetrizeAndPsdCheck) {
    Matrix p(2, 2);
    p << 2.0, 1.0, 0.0, 3.0;
    symmetrize(p);
    EXPECT_EQ(p(0, 1), 0.5);
    EXPECT_EQ(p(1, 0), 0.5);
    EXPECT_TRUE(is_psd(p));
    Matrix n = -Matrix::Identity(2, 2);
    EXPECT_FALSE(is_psd(n));
    Matrix tiny = Matrix::Identity(2, 2);
    tiny(1, 1) = -1e-14;
    EXPECT_TRUE(is_psd(tiny));
    EXPECT_NEAR(min_eigenvalue(p), 2.5 - std::sqrt(0.5), 1e-12);
}

TEST(PivotedCholesky, SelectsIndependentRows) {
    // rank-2 matrix in 3 dimensions: the third row is the sum of the others
    Matrix b(3, 2);
    b << 1, 0, 0, 2, 1, 2;
    const Matrix s = b * b.transpose();
    const auto pc = pivoted_cholesky(s);
    ASSERT_EQ(pc.selected.size(), 2u);
    Matrix block(2, 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) block(i, j) = s(pc.selected[i], pc.selected[j]);
    EXPECT_LT((pc.lower * pc.lower.transpose() - block).norm(), 1e-12);
    EXPECT_EQ(pc.selected.front(), 2);  // largest diagonal first
}

TEST(PivotedCholesky, FullRankAndZero) {
    const Matrix b = random_matrix(5, 5, 2);
    const Matrix s = b * b.transpose() + Matrix::Identity(5, 5);
    EXPECT_EQ(pivoted_cholesky(s).selected.size(), 5u);
    EXPECT_TRUE(pivoted_cholesky(Matrix::Zero(3, 3)).selected.empty());
}

TEST(Periodogram, SinusoidPeak) {
    const double spacing = 0.01, f0 = 0.5;
    std::vector<double> x(8192);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2.0 * M_PI * f0 * spacing * static_cast<double>(i));
    const Spectrum s = periodogram_spatial(x, spacing, 4096);
    const auto peak = std::max_element(s.magnitude.begin(), s.magnitude.end()) - s.magnitude.begin();
    const double resolution = 1.0 / (spacing * 4096);
    EXPECT_NEAR(s.frequency[static_cast<std::size_t>(peak)], f0, resolution);
}

TEST(Periodogram, ZeroSignal) {
    const Spectrum s = periodogram_spatial(std::vector<double>(256, 0.0), 0.1);
    ASSERT_FALSE(s.magnitude.empty());
    for (double m : s.magnitude) EXPECT_EQ(m, 0.0);
    EXPECT_GT(s.frequency.front(), 0.0);  // DC excluded
}

TEST(Periodogram, ParsevalWithinFivePercent) {
    std::mt19937_64 g(9);
    std::normal_distribution<double> n(0.0, 0.3);
    std::vector<double> x(16384);
    for (double& v : x) v = n(g);
    const Spectrum s = periodogram_spatial(x, 0.02);
    double total = 0.0;
    for (double m : s.magnitude) total += m;
    double mean = 0.0, var = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.size());
    EXPECT_NEAR(total / var, 1.0, 0.05);
}

TEST(Periodogram, RejectsShortOrBadInput) {
    EXPECT_THROW(periodogram_spatial(std::vector<double>(10, 1.0), 0.1), InvalidParameter);
    EXPECT_THROW(periodogram_spatial(std::vector<double>(64, 1.0), 0.0), InvalidParameter);
}
