#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "roadid/error.hpp"

namespace roadid {

/// Second-order section, transposed direct form II, a0 normalised to 1.
struct Biquad {
    double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;

    [[nodiscard]] double dc_gain() const { return (b0 + b1 + b2) / (1.0 + a1 + a2); }
};

/// 2nd-order low-pass section with quality factor q, bilinear transform with prewarping.
inline Biquad lowpass2(double fc, double fs, double q = M_SQRT1_2) {
    const double k = std::tan(M_PI * fc / fs);
    const double norm = 1.0 / (1.0 + k / q + k * k);
    Biquad s;
    s.b0 = k * k * norm;
    s.b1 = 2.0 * s.b0;
    s.b2 = s.b0;
    s.a1 = 2.0 * (k * k - 1.0) * norm;
    s.a2 = (1.0 - k / q + k * k) * norm;
    return s;
}

inline Biquad highpass2(double fc, double fs, double q = M_SQRT1_2) {
    const double k = std::tan(M_PI * fc / fs);
    const double norm = 1.0 / (1.0 + k / q + k * k);
    Biquad s;
    s.b0 = norm;
    s.b1 = -2.0 * norm;
    s.b2 = norm;
    s.a1 = 2.0 * (k * k - 1.0) * norm;
    s.a2 = (1.0 - k / q + k * k) * norm;
    return s;
}

namespace detail {

/// Runs the cascade starting from the step-response steady state scaled by x[0].
inline std::vector<double> sosfilt_steady(const std::vector<Biquad>& sos, std::vector<double> x) {
    if (x.empty()) return x;
    double gain_in = 1.0;
    for (const auto& s : sos) {
        const double x0 = x.front() * gain_in;
        const double yss = s.dc_gain() * x0;
        double z1 = yss - s.b0 * x0;
        double z2 = s.b2 * x0 - s.a2 * yss;
        for (double& v : x) {
            const double in = v;
            const double out = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * out + z2;
            z2 = s.b2 * in - s.a2 * out;
            v = out;
        }
        gain_in *= s.dc_gain();
    }
    return x;
}

}  // namespace detail

/// Zero-phase forward-backward filtering with odd-extension padding.
inline std::vector<double> filtfilt(const std::vector<Biquad>& sos, const std::vector<double>& x) {
    const std::size_t n = x.size();
    if (n == 0) return {};
    std::size_t pad = 3 * (2 * sos.size() + 1);
    if (pad >= n) pad = n - 1;

    std::vector<double> ext;
    ext.reserve(n + 2 * pad);
    for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x.front() - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x.back() - x[n - 1 - i]);

    auto y = detail::sosfilt_steady(sos, std::move(ext));
    std::reverse(y.begin(), y.end());
    y = detail::sosfilt_steady(sos, std::move(y));
    std::reverse(y.begin(), y.end());
    return {y.begin() + static_cast<std::ptrdiff_t>(pad), y.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

/**
 * @brief Zero-phase band-pass: 2nd-order Butterworth high-pass at f_lo cascaded
 * with a 2nd-order Butterworth low-pass at f_hi (4th order overall).
 */
inline std::vector<double> bandpass(const std::vector<double>& x, double fs, double f_lo, double f_hi) {
    if (!(fs > 0.0) || !(f_lo > 0.0) || !(f_lo < f_hi) || !(f_hi < 0.5 * fs))
        throw InvalidParameter("bandpass: require 0 < f_lo < f_hi < fs/2");
    return filtfilt({highpass2(f_lo, fs), lowpass2(f_hi, fs)}, x);
}

/// Zero-phase 4th-order Butterworth high-pass.
inline std::vector<double> highpass(const std::vector<double>& x, double fs, double fc) {
    if (!(fs > 0.0) || !(fc > 0.0) || !(fc < 0.5 * fs)) throw InvalidParameter("highpass: require 0 < fc < fs/2");
    // pole-pair quality factors of a 4th-order Butterworth
    const double q1 = 1.0 / (2.0 * std::cos(M_PI / 8.0));
    const double q2 = 1.0 / (2.0 * std::cos(3.0 * M_PI / 8.0));
    return filtfilt({highpass2(fc, fs, q1), highpass2(fc, fs, q2)}, x);
}

}  // namespace roadid
