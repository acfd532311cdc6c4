#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "roadid/error.hpp"

namespace roadid {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// =============================================================================
// Matrix exponential
// =============================================================================

/**
 * @brief exp(A) by scaling and squaring with a degree-13 Padé approximant.
 *
 * Coefficients and the scaling threshold follow Higham (2005). Nilpotent
 * inputs of index two are reproduced exactly.
 */
inline Matrix expm(const Matrix& a) {
    if (a.rows() != a.cols()) throw InvalidParameter("expm: matrix must be square");
    if (!a.allFinite()) throw NumericError("expm: non-finite input");

    static constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                   1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                   670442572800.0,      33522128640.0,       1323241920.0,
                                   40840800.0,          960960.0,            16380.0,
                                   182.0,               1.0};
    constexpr double theta13 = 5.371920351148152;

    const Eigen::Index n = a.rows();
    // exact closed forms: diagonal matrices and nilpotents of index two
    if (Matrix(a.diagonal().asDiagonal()) == a) {
        Matrix d = Matrix::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) d(i, i) = std::exp(a(i, i));
        return d;
    }
    if ((a * a).isZero(0.0)) return Matrix::Identity(n, n) + a;

    const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
    int s = 0;
    if (norm1 > theta13) s = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));

    const Matrix as = a / std::ldexp(1.0, s);
    const Matrix id = Matrix::Identity(n, n);
    const Matrix a2 = as * as;
    const Matrix a4 = a2 * a2;
    const Matrix a6 = a4 * a2;

    Matrix u = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id;
    u = as * u;
    const Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;

    Matrix r = (v - u).partialPivLu().solve(v + u);
    for (int i = 0; i < s; ++i) r = r * r;
    if (!r.allFinite()) throw NumericError("expm: result overflowed");
    return r;
}

// =============================================================================
// Truncated pseudoinverse
// =============================================================================

/// How many singular values a pseudoinverse keeps.
struct TruncationPolicy {
    enum class Mode { count, tolerance };

    Mode mode = Mode::tolerance;
    int k = 0;           ///< retained values (count mode)
    double tol = 1e-12;  ///< keep sigma_i > tol * sigma_max (tolerance mode)

    static TruncationPolicy keep(int count) { return {Mode::count, count, 0.0}; }
    static TruncationPolicy relative(double t) { return {Mode::tolerance, 0, t}; }

    /// Throws InvalidParameter unless the policy fits a rows x cols target.
    void validate(Eigen::Index rows, Eigen::Index cols) const {
        const auto limit = std::min(rows, cols);
        if (mode == Mode::count) {
            if (k < 1 || k > limit)
                throw InvalidParameter("truncation: k = " + std::to_string(k) + " outside [1, " +
                                       std::to_string(limit) + "]");
        } else if (!(tol > 0.0 && tol < 1.0)) {
            throw InvalidParameter("truncation: tolerance must lie in (0, 1)");
        }
    }

    /// Number of leading values kept from a descending list.
    [[nodiscard]] int retained(const std::vector<double>& descending) const {
        if (mode == Mode::count) return k;
        if (descending.empty() || descending.front() <= 0.0) return 0;
        const double cut = tol * descending.front();
        int kept = 0;
        while (kept < static_cast<int>(descending.size()) && descending[kept] > cut) ++kept;
        return kept;
    }
};

namespace detail {

/// Indices that sort `values` descending; equal values keep their original order.
inline std::vector<Eigen::Index> descending_order(const Vector& values) {
    std::vector<Eigen::Index> idx(values.size());
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](Eigen::Index l, Eigen::Index r) { return values(l) > values(r); });
    return idx;
}

}  // namespace detail

/**
 * @brief Moore-Penrose pseudoinverse built from the largest singular values only.
 *
 * M+ = V_k diag(1/sigma_k) U_k^T. Ties at the truncation boundary are broken by
 * the order the SVD reports them in after a stable descending sort.
 */
inline Matrix tsvd_pinv(const Matrix& m, const TruncationPolicy& policy) {
    policy.validate(m.rows(), m.cols());
    if (!m.allFinite()) throw NumericError("tsvd_pinv: non-finite input");

    const Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    const auto order = detail::descending_order(sv);
    std::vector<double> sorted;
    sorted.reserve(order.size());
    for (auto i : order) sorted.push_back(sv(i));

    const int kept = policy.retained(sorted);
    Matrix out = Matrix::Zero(m.cols(), m.rows());
    for (int j = 0; j < kept; ++j) {
        const auto i = order[j];
        if (sv(i) <= 0.0) break;
        out.noalias() += svd.matrixV().col(i) * (1.0 / sv(i)) * svd.matrixU().col(i).transpose();
    }
    return out;
}

/// Truncated pseudoinverse of a symmetric positive semidefinite matrix.
struct SymmetricPinv {
    Matrix inverse;          ///< truncated pseudoinverse
    Matrix half;             ///< V_k diag(lambda_k^-1/2); inverse = half * half^T
    std::vector<double> eigenvalues;  ///< all eigenvalues, descending
    int retained = 0;
};

/**
 * For a PSD matrix the singular values are its eigenvalues, so the
 * self-adjoint solver replaces a general SVD. Non-positive eigenvalues are
 * never inverted even when the policy would retain them.
 */
inline SymmetricPinv truncated_pinv_symmetric(const Matrix& s, const TruncationPolicy& policy) {
    policy.validate(s.rows(), s.cols());
    if (!s.allFinite()) throw NumericError("truncated_pinv_symmetric: non-finite input");

    const Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
    if (eig.info() != Eigen::Success) throw NumericError("truncated_pinv_symmetric: eigensolver failed");

    // Eigen reports ascending order; reversing gives a descending list where
    // ties keep their reported column order.
    const Eigen::Index n = s.rows();
    SymmetricPinv out;
    out.eigenvalues.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) out.eigenvalues[static_cast<std::size_t>(i)] = eig.eigenvalues()(n - 1 - i);

    int kept = policy.retained(out.eigenvalues);
    while (kept > 0 && out.eigenvalues[static_cast<std::size_t>(kept - 1)] <= 0.0) --kept;
    out.retained = kept;

    out.half.resize(n, kept);
    for (int j = 0; j < kept; ++j)
        out.half.col(j) = eig.eigenvectors().col(n - 1 - j) / std::sqrt(out.eigenvalues[static_cast<std::size_t>(j)]);
    out.inverse = out.half * out.half.transpose();
    return out;
}

// =============================================================================
// Covariance hygiene
// =============================================================================

inline void symmetrize(Matrix& p) { p = 0.5 * (p + p.transpose()).eval(); }

/// Smallest eigenvalue of a symmetric matrix.
inline double min_eigenvalue(const Matrix& p) {
    if (p.size() == 0) return 0.0;
    return Eigen::SelfAdjointEigenSolver<Matrix>(p, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

/// True when p is symmetric and its smallest eigenvalue is >= -rel * scale.
inline bool is_psd(const Matrix& p, double rel = 1e-10) {
    if (!p.allFinite()) return false;
    const double scale = std::max(p.cwiseAbs().maxCoeff(), std::abs(p.trace()));
    if ((p - p.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1e-300)) return false;
    return min_eigenvalue(p) >= -rel * scale;
}

/**
 * Greedy diagonal-pivoted Cholesky of a PSD matrix.
 *
 * Stops once the largest remaining pivot falls below rel * (largest initial
 * diagonal). The chosen indices select a nonsingular principal block whose
 * rank matches the numerical rank of the input.
 */
struct PivotedCholesky {
    std::vector<Eigen::Index> selected;  ///< pivot order
    Matrix lower;                        ///< Cholesky factor of the selected block (in pivot order)
};

inline PivotedCholesky pivoted_cholesky(const Matrix& s, double rel = 1e-10) {
    const Eigen::Index n = s.rows();
    PivotedCholesky out;
    if (n == 0) return out;

    Vector diag = s.diagonal();
    const double ref = diag.maxCoeff();
    if (!(ref > 0.0)) {
        out.lower.resize(0, 0);
        return out;
    }

    // Columns of the partial factor, indexed by original row.
    Matrix l = Matrix::Zero(n, n);
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    Eigen::Index r = 0;
    for (; r < n; ++r) {
        Eigen::Index piv = -1;
        double best = -1.0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (!used[static_cast<std::size_t>(i)] && diag(i) > best) {
                best = diag(i);
                piv = i;
            }
        if (piv < 0 || best <= rel * ref) break;

        used[static_cast<std::size_t>(piv)] = true;
        out.selected.push_back(piv);
        const double d = std::sqrt(best);
        // column r: l(i, r) = (s(i, piv) - sum_j<r l(i, j) l(piv, j)) / d
        l.col(r) = (s.col(piv) - l.leftCols(r) * l.row(piv).head(r).transpose()) / d;
        l(piv, r) = d;
        for (Eigen::Index i = 0; i < n; ++i)
            if (!used[static_cast<std::size_t>(i)]) diag(i) -= l(i, r) * l(i, r);
    }

    out.lower.resize(r, r);
    for (Eigen::Index a = 0; a < r; ++a)
        for (Eigen::Index b = 0; b < r; ++b) out.lower(a, b) = (b <= a) ? l(out.selected[static_cast<std::size_t>(a)], b) : 0.0;
    return out;
}

// =============================================================================
// Spatial spectrum
// =============================================================================

struct Spectrum {
    std::vector<double> frequency;  ///< [cycles/m]
    std::vector<double> magnitude;  ///< one-sided power per bin [m^2]
};

/**
 * @brief Welch-averaged one-sided spectrum of a uniformly spaced signal.
 *
 * Hann window, 50% overlap, per-segment mean removal. Each bin holds power
 * (PSD times bin width), so the bins sum to roughly the signal variance. The
 * DC bin is dropped.
 *
 * @param segment samples per segment; 0 picks the largest power of two not
 *                exceeding min(n, 1024).
 */
inline Spectrum periodogram_spatial(const std::vector<double>& values, double spacing, std::size_t segment = 0) {
    const std::size_t n = values.size();
    if (n < 16) throw InvalidParameter("periodogram_spatial: need at least 16 samples");
    if (!(spacing > 0.0) || !std::isfinite(spacing)) throw InvalidParameter("periodogram_spatial: spacing must be positive");

    if (segment == 0) {
        segment = 1;
        while (segment * 2 <= std::min<std::size_t>(n, 1024)) segment *= 2;
    }
    if (segment < 16 || segment > n) throw InvalidParameter("periodogram_spatial: invalid segment length");

    std::vector<double> window(segment);
    double wsum2 = 0.0;
    for (std::size_t i = 0; i < segment; ++i) {
        window[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(segment));
        wsum2 += window[i] * window[i];
    }

    const std::size_t hop = segment / 2;
    const std::size_t bins = segment / 2 + 1;
    std::vector<double> acc(bins, 0.0);
    std::size_t count = 0;

    Eigen::FFT<double> fft;
    std::vector<double> buf(segment);
    std::vector<std::complex<double>> spec;
    for (std::size_t start = 0; start + segment <= n; start += hop) {
        double mean = 0.0;
        for (std::size_t i = 0; i < segment; ++i) mean += values[start + i];
        mean /= static_cast<double>(segment);
        for (std::size_t i = 0; i < segment; ++i) buf[i] = (values[start + i] - mean) * window[i];
        fft.fwd(spec, buf);
        for (std::size_t b = 0; b < bins; ++b) acc[b] += std::norm(spec[b]);
        ++count;
    }

    Spectrum out;
    const double df = 1.0 / (spacing * static_cast<double>(segment));
    for (std::size_t b = 1; b < bins; ++b) {
        double p = acc[b] / (static_cast<double>(count) * wsum2 * static_cast<double>(segment));
        // fold negative frequencies except at Nyquist
        if (!(segment % 2 == 0 && b == segment / 2)) p *= 2.0;
        out.frequency.push_back(static_cast<double>(b) * df);
        out.magnitude.push_back(p);
    }
    return out;
}

}  // namespace roadid
