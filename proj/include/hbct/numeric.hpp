#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>

#include "hbct/errors.hpp"

namespace hbct {

namespace numeric {

// Arguments are clamped into the closed domain; partials use an interior point
// kClampSlack away from the boundary so they stay finite.
inline constexpr double kClampSlack = 1e-12;
// Arguments further than this outside the domain are treated as errors.
inline constexpr double kDomainTolerance = 1e-6;
// sinh(a)/a and asinh(a)/a switch to their series limit below this.
inline constexpr double kSeriesThreshold = 1e-8;

inline double acosh_arg(double x) {
    if (!(x >= 1.0 - kDomainTolerance)) {
        throw NumericalDomainError("acosh argument " + std::to_string(x) + " below 1");
    }
    return std::max(x, 1.0);
}

inline double acosh_partial_arg(double x) { return std::max(x, 1.0 + kClampSlack); }

inline double unit_arg(double x, const char* fn) {
    if (!(std::abs(x) <= 1.0 + kDomainTolerance)) {
        throw NumericalDomainError(std::string(fn) + " argument " + std::to_string(x) + " outside [-1, 1]");
    }
    return std::clamp(x, -1.0, 1.0);
}

inline double unit_partial_arg(double x) { return std::clamp(x, -1.0 + kClampSlack, 1.0 - kClampSlack); }

} // namespace numeric

// Scalar kernels shared by the double and autodiff code paths. Generic code
// calls these unqualified so the autodiff overloads are found by ADL.

inline double value_of(double x) noexcept { return x; }

inline double safe_acosh(double x) { return std::acosh(numeric::acosh_arg(x)); }
inline double safe_asin(double x) { return std::asin(numeric::unit_arg(x, "asin")); }
inline double safe_acos(double x) { return std::acos(numeric::unit_arg(x, "acos")); }
inline double hinge(double x) noexcept { return x > 0.0 ? x : 0.0; }

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw InvalidArgument("dot: length mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double sum(std::span<const double> a) {
    double acc = 0.0;
    for (double v : a) {
        acc += v;
    }
    return acc;
}

inline bool all_finite(std::span<const double> a) {
    return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

} // namespace hbct
