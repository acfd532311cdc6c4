#pragma once

#include <limits>

#include "roadid/universal_smoother.hpp"

namespace roadid {

/**
 * @brief Classic minimum-variance unbiased smoother.
 *
 * Same window formulation as the universal smoother, but the previous input
 * estimate is treated as exact and the normal matrix is inverted without
 * truncation. A normal matrix whose eigenvalue ratio falls to the numerical
 * rank threshold (size * machine epsilon) raises IllConditioned with the step
 * index. A feedthrough of full column rank is required up front.
 */
inline EstimationResult run_mvus(const ExtendedSystem& ext, const MeasurementSeries& meas, const NoiseConfig& noise) {
    noise.validate(ext.q);
    const DiscreteSystem& sys = ext.sys;
    if (sys.outputs() < sys.inputs())
        throw StructuralRankError("mvus: " + std::to_string(sys.outputs()) + " measurements cannot resolve " +
                                  std::to_string(sys.inputs()) + " inputs");
    const Eigen::JacobiSVD<Matrix> svd(sys.D);
    const double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    const double rank_tol = static_cast<double>(std::max(sys.D.rows(), sys.D.cols())) *
                            std::numeric_limits<double>::epsilon() * smax;
    if (!(smax > 0.0) || svd.singularValues().minCoeff() <= rank_tol)
        throw StructuralRankError("mvus: feedthrough matrix does not have full column rank");

    detail::WindowOptions opt;
    opt.carry_input_error = false;
    opt.exact_inverse = true;
    opt.min_rcond = static_cast<double>(ext.input_cols()) * std::numeric_limits<double>::epsilon();
    const auto unused = TruncationPolicy::keep(static_cast<int>(ext.input_cols()));
    return detail::run_windows(ext, meas, "mvus", SmootherState::initial(ext),
                               [&](const SmootherState& s, const Eigen::Ref<const Vector>& w, long k) {
                                   return detail::window_step(s, ext, w, noise, unused, opt, k);
                               });
}

inline EstimationResult run_mvus(const DiscreteSystem& sys, const MeasurementSeries& meas, const NoiseConfig& noise, int N) {
    return run_mvus(build_extended(sys, N), meas, noise);
}

}  // namespace roadid
