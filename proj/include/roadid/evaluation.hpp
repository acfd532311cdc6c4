#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "roadid/csv.hpp"
#include "roadid/error.hpp"
#include "roadid/estimate.hpp"
#include "roadid/filter.hpp"
#include "roadid/numerics.hpp"

namespace roadid {

// =============================================================================
// Tuning metrics
// =============================================================================

/**
 * @brief Output mismatch E_u = sqrt(sum_k beta_k^2).
 *
 * beta_k is the scalar least-squares solution of beta u_k = u_k - uhat_k across
 * the channels of step k. Steps whose measured vector is zero contribute 0.
 */
inline double error_eu(const Matrix& measured, const Matrix& estimated) {
    if (measured.rows() != estimated.rows() || measured.cols() != estimated.cols())
        throw InvalidParameter("error_eu: measured and estimated series differ in shape");
    double sum = 0.0;
    for (Eigen::Index k = 0; k < measured.rows(); ++k) {
        const double uu = measured.row(k).squaredNorm();
        if (uu == 0.0) continue;
        const double beta = measured.row(k).dot(measured.row(k) - estimated.row(k)) / uu;
        sum += beta * beta;
    }
    return std::sqrt(sum);
}

/// Input uncertainty E_r = sqrt(sum_k tr(P^r_k) / sum_k |rhat_k|^2).
inline double error_er(const std::vector<double>& trace_Pr, const Matrix& r_hat) {
    if (static_cast<Eigen::Index>(trace_Pr.size()) != r_hat.rows())
        throw InvalidParameter("error_er: covariance and estimate series differ in length");
    double num = 0.0;
    for (double t : trace_Pr) num += t;
    const double den = r_hat.squaredNorm();
    if (!(den > 0.0)) throw NumericError("error_er: all input estimates are zero, normalisation undefined");
    return std::sqrt(num / den);
}

inline double sigma_e(double e_u, double e_r) {
    if (!(e_u >= 0.0) || !(e_r >= 0.0)) throw InvalidParameter("sigma_e: components must be >= 0");
    return std::hypot(e_u, e_r);
}

// =============================================================================
// Accuracy against ground truth
// =============================================================================

/// RMS error over the range of the true series.
inline double nrmse(const std::vector<double>& truth, const std::vector<double>& estimate) {
    if (truth.size() != estimate.size() || truth.empty()) throw InvalidParameter("nrmse: series must be non-empty and equal in length");
    const auto [lo, hi] = std::minmax_element(truth.begin(), truth.end());
    const double range = *hi - *lo;
    if (!(range > 0.0)) throw InvalidParameter("nrmse: true series is flat");
    double sq = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) sq += (truth[i] - estimate[i]) * (truth[i] - estimate[i]);
    return std::sqrt(sq / static_cast<double>(truth.size())) / range;
}

struct WheelNrmse {
    double front = 0.0, rear = 0.0, mean = 0.0;
};

inline WheelNrmse nrmse(const std::vector<double>& front_true, const std::vector<double>& front_est,
                        const std::vector<double>& rear_true, const std::vector<double>& rear_est) {
    WheelNrmse w;
    w.front = nrmse(front_true, front_est);
    w.rear = nrmse(rear_true, rear_est);
    w.mean = 0.5 * (w.front + w.rear);
    return w;
}

/// Zero-phase high-pass in the spatial domain: cutoff in cycles/m at a travel speed in m/s.
inline std::vector<double> spatial_highpass(const std::vector<double>& series, double fs, double speed, double cycles_per_m) {
    if (!(speed > 0.0)) throw InvalidParameter("spatial_highpass: speed must be positive");
    return highpass(series, fs, cycles_per_m * speed);
}

// =============================================================================
// Grid search
// =============================================================================

/// Inclusive arithmetic range of exponents or integers.
struct Range {
    double lo = 0.0, hi = 0.0, step = 1.0;

    [[nodiscard]] std::size_t count() const {
        if (!(step > 0.0) || hi < lo) throw InvalidParameter("range: need lo <= hi and a positive step");
        return static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
    }
    [[nodiscard]] std::vector<double> values() const {
        std::vector<double> v(count());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = lo + step * static_cast<double>(i);
        return v;
    }
};

struct TuningGrid {
    Range qx_exponents{-12.0, -1.0, 0.1};
    Range qr_exponents{-8.0, 2.0, 0.1};
    int k_lo = 1;
    int k_hi = 0;  ///< 0 means 2(N+1)

    [[nodiscard]] std::vector<int> k_values(int N) const {
        const int hi = k_hi > 0 ? k_hi : 2 * (N + 1);
        if (k_lo < 1 || hi < k_lo) throw InvalidParameter("tuning grid: empty truncation range");
        std::vector<int> out;
        for (int k = k_lo; k <= hi; ++k) out.push_back(k);
        return out;
    }
};

/// One evaluated point; `second` is k for the smoother and log10 Qr for the dual filter.
struct GridPoint {
    double log10_qx = 0.0;
    double second = 0.0;
    double sigma_e = std::numeric_limits<double>::infinity();
    double e_u = std::numeric_limits<double>::quiet_NaN();
    double e_r = std::numeric_limits<double>::quiet_NaN();
    std::string failure;  ///< empty on success
};

struct GridResult {
    std::vector<GridPoint> surface;  ///< sorted by (log10_qx, second)
    std::size_t best = 0;

    [[nodiscard]] const GridPoint& best_point() const { return surface.at(best); }
};

struct Metrics {
    double sigma_e = 0.0, e_u = 0.0, e_r = 0.0;
};

/// Index of the smallest sigma_e; the earliest entry wins ties.
inline std::size_t argmin_surface(const std::vector<GridPoint>& surface) {
    std::size_t best = surface.size();
    for (std::size_t i = 0; i < surface.size(); ++i)
        if (std::isfinite(surface[i].sigma_e) && (best == surface.size() || surface[i].sigma_e < surface[best].sigma_e)) best = i;
    if (best == surface.size()) throw NumericError("grid search: every grid point failed");
    return best;
}

inline unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Runs `job(i)` for i in [0, n) on a bounded pool of threads.
inline void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& job) {
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) job(i);
        });
    for (auto& t : pool) t.join();
}

/**
 * @brief Evaluates every (log10 Qx, second) pair and returns the surface with its argmin.
 *
 * A point whose evaluation throws records sigma_e = +inf and the error text.
 * Ties go to the lowest Qx, then the lowest second coordinate.
 */
inline GridResult grid_search(const std::vector<double>& log10_qx, const std::vector<double>& second,
                              const std::function<Metrics(double, double)>& evaluate, unsigned workers = default_workers()) {
    if (log10_qx.empty() || second.empty()) throw InvalidParameter("grid search: empty grid");
    std::vector<double> qx = log10_qx, sc = second;
    std::sort(qx.begin(), qx.end());
    std::sort(sc.begin(), sc.end());

    GridResult res;
    res.surface.resize(qx.size() * sc.size());
    for (std::size_t i = 0; i < qx.size(); ++i)
        for (std::size_t j = 0; j < sc.size(); ++j) {
            res.surface[i * sc.size() + j].log10_qx = qx[i];
            res.surface[i * sc.size() + j].second = sc[j];
        }
    parallel_for(res.surface.size(), workers, [&](std::size_t i) {
        GridPoint& p = res.surface[i];
        try {
            const Metrics m = evaluate(p.log10_qx, p.second);
            if (std::isfinite(m.sigma_e)) {
                p.sigma_e = m.sigma_e;
                p.e_u = m.e_u;
                p.e_r = m.e_r;
            } else {
                p.failure = "non-finite sigma_e";
            }
        } catch (const std::exception& ex) {
            p.failure = ex.what();
        }
    });
    res.best = argmin_surface(res.surface);
    return res;
}

/// Writes `log10_qx,<second>,sigma_e`; failed points are written as inf.
inline void save_surface_csv(const std::string& path, const GridResult& g, const std::string& second_name = "k") {
    std::vector<double> a, b, c;
    for (const auto& p : g.surface) {
        a.push_back(p.log10_qx);
        b.push_back(p.second);
        c.push_back(p.sigma_e);
    }
    csv::write(path, {"log10_qx", second_name, "sigma_e"}, {&a, &b, &c});
}

// =============================================================================
// Window sweep
// =============================================================================

struct SweepRow {
    int N = 0;
    double nrmse = std::numeric_limits<double>::quiet_NaN();
    double wall_time = std::numeric_limits<double>::quiet_NaN();
    std::string failure;
};

/// Runs `run(N)` for each window length; a failing entry is recorded, not rethrown.
inline std::vector<SweepRow> window_sweep(const std::vector<int>& Ns, const std::function<std::pair<double, double>(int)>& run) {
    if (Ns.empty()) throw InvalidParameter("window sweep: no window lengths");
    std::vector<SweepRow> rows;
    for (int N : Ns) {
        SweepRow r;
        r.N = N;
        try {
            std::tie(r.nrmse, r.wall_time) = run(N);
        } catch (const std::exception& ex) {
            r.failure = ex.what();
        }
        rows.push_back(r);
    }
    return rows;
}

inline void save_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
    std::vector<double> n, e, t;
    for (const auto& r : rows) {
        n.push_back(r.N);
        e.push_back(r.nrmse);
        t.push_back(r.wall_time);
    }
    csv::write(path, {"N", "nrmse", "wall_time_s"}, {&n, &e, &t});
}

// =============================================================================
// Report
// =============================================================================

struct EvaluationReport {
    double sigma_e = 0.0, e_u = 0.0, e_r = 0.0;
    double nrmse_front = std::numeric_limits<double>::quiet_NaN();
    double nrmse_rear = std::numeric_limits<double>::quiet_NaN();
    double nrmse_mean = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> cov_trace;
    Spectrum spectrum_front, spectrum_rear;
    double wall_time = 0.0;
};

/// Tuning metrics of a run against the measurements it consumed.
inline Metrics tuning_metrics(const EstimationResult& e, const Matrix& measured) {
    const Matrix u = measured.topRows(e.steps());
    Metrics m;
    m.e_u = error_eu(u, e.y_hat);
    m.e_r = error_er(e.trace_Pr, e.r_hat);
    m.sigma_e = sigma_e(m.e_u, m.e_r);
    return m;
}

}  // namespace roadid
