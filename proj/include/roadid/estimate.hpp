#pragma once

#include <string>
#include <vector>

#include "roadid/csv.hpp"
#include "roadid/error.hpp"
#include "roadid/numerics.hpp"

namespace roadid {

/// Per-step output shared by all estimators.
struct EstimationResult {
    std::string method;
    std::vector<double> times;     ///< time of each estimated step [s]
    Matrix r_hat;                  ///< steps x m input estimates
    Matrix x_hat;                  ///< steps x nx posterior states
    Matrix y_hat;                  ///< steps x q model outputs C x + D r - H r_prev
    std::vector<double> trace_Pr;  ///< input covariance trace per step
    std::vector<double> trace_P;   ///< state covariance trace per step
    double wall_time = 0.0;        ///< [s]

    [[nodiscard]] Eigen::Index steps() const { return r_hat.rows(); }

    void reserve(Eigen::Index steps, Eigen::Index m, Eigen::Index nx, Eigen::Index q) {
        times.reserve(static_cast<std::size_t>(steps));
        trace_Pr.reserve(static_cast<std::size_t>(steps));
        trace_P.reserve(static_cast<std::size_t>(steps));
        r_hat.resize(steps, m);
        x_hat.resize(steps, nx);
        y_hat.resize(steps, q);
    }
};

/// Column of an Eigen matrix as a std::vector.
inline std::vector<double> column(const Matrix& m, Eigen::Index c) {
    std::vector<double> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m(i, c);
    return out;
}

/// Writes `t_s,r_front_est,r_rear_est,trace_Pr,x1,x2,x3,x4`.
inline void save_estimate_csv(const std::string& path, const EstimationResult& e) {
    if (e.r_hat.cols() != 2) throw InvalidParameter("save_estimate_csv: expected two input channels");
    std::vector<std::string> header{"t_s", "r_front_est", "r_rear_est", "trace_Pr"};
    std::vector<std::vector<double>> cols{column(e.r_hat, 0), column(e.r_hat, 1)};
    for (Eigen::Index i = 0; i < e.x_hat.cols(); ++i) {
        header.push_back("x" + std::to_string(i + 1));
        cols.push_back(column(e.x_hat, i));
    }
    std::vector<const std::vector<double>*> ptrs{&e.times, &cols[0], &cols[1], &e.trace_Pr};
    for (std::size_t i = 2; i < cols.size(); ++i) ptrs.push_back(&cols[i]);
    csv::write(path, header, ptrs);
}

}  // namespace roadid
