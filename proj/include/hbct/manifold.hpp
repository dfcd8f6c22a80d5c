#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "hbct/errors.hpp"
#include "hbct/numeric.hpp"

/**
 * @file manifold.hpp
 *
 * Lorentz model of hyperbolic space with curvature -K. A point is stored as
 * `[time, space]` in R^{d+1} and satisfies <x, x>_L = -1/K with time > 0.
 *
 * All operations are templates over the scalar type so the same code runs on
 * plain doubles and on `ad::Var` when a gradient is needed.
 */

namespace hbct {

struct ManifoldConfig {
    double curvature = 1.0;  ///< K > 0; the space has constant curvature -K
    std::size_t dim = 8;     ///< spatial dimension d (ambient is d + 1)

    void validate() const {
        if (!(curvature > 0.0) || !std::isfinite(curvature)) {
            throw InvalidArgument("manifold: curvature K must be positive and finite");
        }
        if (dim < 1) {
            throw InvalidArgument("manifold: dimension must be at least 1");
        }
    }

    double sqrt_k() const { return std::sqrt(curvature); }

    bool operator==(const ManifoldConfig&) const = default;
};

template <class T>
struct LorentzPoint {
    T time{};
    std::vector<T> space;
};

template <class T>
struct TangentVector {
    T time{};
    std::vector<T> space;
    LorentzPoint<T> base;
};

template <class A>
concept AmbientVector = requires(const A& a) {
    a.time;
    a.space.size();
};

using Point = LorentzPoint<double>;
using Tangent = TangentVector<double>;

namespace detail {

template <class T>
std::vector<T> scaled(std::span<const T> v, const T& s) {
    std::vector<T> out;
    out.reserve(v.size());
    for (const T& x : v) {
        out.push_back(x * s);
    }
    return out;
}

template <class T>
void require_finite(std::span<const T> v, const char* what) {
    for (const T& x : v) {
        if (!std::isfinite(value_of(x))) {
            throw InvalidArgument(std::string(what) + ": non-finite input");
        }
    }
}

} // namespace detail

/// <x, y>_L = <x_space, y_space> - x_time * y_time.
template <AmbientVector A, AmbientVector B>
auto lorentz_inner(const A& x, const B& y) {
    if (x.space.size() != y.space.size()) {
        throw InvalidArgument("lorentz_inner: ambient dimension mismatch");
    }
    using T = decltype(x.time);
    return dot(std::span<const T>(x.space), std::span<const T>(y.space)) - x.time * y.time;
}

/// Lorentzian inner product on raw ambient coordinates (index 0 is time).
inline double lorentz_inner(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.empty()) {
        throw InvalidArgument("lorentz_inner: ambient dimension mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) {
        acc += x[i] * y[i];
    }
    return acc - x[0] * y[0];
}

template <class T = double>
LorentzPoint<T> origin(const ManifoldConfig& cfg) {
    return {T(1.0 / cfg.sqrt_k()), std::vector<T>(cfg.dim, T(0.0))};
}

/// Completes a spatial vector to a point on the hyperboloid: time = sqrt(1/K + |space|^2).
template <class T>
LorentzPoint<T> lift(std::span<const T> space, const ManifoldConfig& cfg) {
    using std::sqrt;
    if (space.size() != cfg.dim) {
        throw InvalidArgument("lift: expected " + std::to_string(cfg.dim) + " spatial coordinates");
    }
    detail::require_finite(space, "lift");
    T time = sqrt(1.0 / cfg.curvature + dot(space, space));
    return {time, std::vector<T>(space.begin(), space.end())};
}

template <class T>
LorentzPoint<T> lift(const std::vector<T>& space, const ManifoldConfig& cfg) {
    return lift(std::span<const T>(space), cfg);
}

namespace detail {

// On the hyperboloid <x - y, x - y>_L = (4/K) sinh^2(sqrt(K) d / 2). Unlike
// acosh(-K <x, y>_L) this is exact at x = y and keeps nearby points accurate.
inline double chord_distance(double chord_sq, const ManifoldConfig& cfg) {
    const double sk = cfg.sqrt_k();
    return 2.0 / sk * std::asinh(0.5 * sk * std::sqrt(std::max(chord_sq, 0.0)));
}

} // namespace detail

/// d_L(x, y) = (1/sqrt K) acosh(-K <x, y>_L). Tape variables use the acosh form
/// and its clamp policy; plain doubles use the equivalent chord form.
template <class T>
T geodesic_distance(const LorentzPoint<T>& x, const LorentzPoint<T>& y, const ManifoldConfig& cfg) {
    if constexpr (std::is_same_v<T, double>) {
        if (x.space.size() != y.space.size()) {
            throw InvalidArgument("geodesic_distance: dimension mismatch");
        }
        (void)numeric::acosh_arg(-cfg.curvature * lorentz_inner(x, y));
        const double dt = x.time - y.time;
        double sq = -dt * dt;
        for (std::size_t i = 0; i < x.space.size(); ++i) {
            const double ds = x.space[i] - y.space[i];
            sq += ds * ds;
        }
        return detail::chord_distance(sq, cfg);
    } else {
        T arg = -cfg.curvature * lorentz_inner(x, y);
        return safe_acosh(arg) / cfg.sqrt_k();
    }
}

inline double geodesic_distance(std::span<const double> x, std::span<const double> y, const ManifoldConfig& cfg) {
    (void)numeric::acosh_arg(-cfg.curvature * lorentz_inner(x, y));
    double sq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        sq += i == 0 ? -d * d : d * d;
    }
    return detail::chord_distance(sq, cfg);
}

/// Exponential map at the origin applied to the tangent vector [0, z].
template <class T>
LorentzPoint<T> expm_origin(std::span<const T> z, const ManifoldConfig& cfg) {
    using std::cosh;
    using std::sinh;
    if (z.size() != cfg.dim) {
        throw InvalidArgument("expm_origin: expected " + std::to_string(cfg.dim) + " coordinates");
    }
    detail::require_finite(z, "expm_origin");
    const double sk = cfg.sqrt_k();
    T a = norm(z) * sk;
    T time = cosh(a) / sk;
    if (value_of(a) < numeric::kSeriesThreshold) {
        return {time, std::vector<T>(z.begin(), z.end())};
    }
    T coeff = sinh(a) / a;
    return {time, detail::scaled(z, coeff)};
}

template <class T>
LorentzPoint<T> expm_origin(const std::vector<T>& z, const ManifoldConfig& cfg) {
    return expm_origin(std::span<const T>(z), cfg);
}

/// Logarithmic map at the origin. The result has time component 0.
template <class T>
TangentVector<T> logm_origin(const LorentzPoint<T>& x, const ManifoldConfig& cfg) {
    using std::asinh;
    const double sk = cfg.sqrt_k();
    // -K <origin, x>_L = sqrt(K) x_time must be >= 1.
    numeric::acosh_arg(sk * value_of(x.time));
    // On the hyperboloid acosh(sqrt(K) t) = asinh(sqrt(K) |s|); the latter keeps
    // full precision near the origin.
    const std::span<const T> s(x.space);
    T b = norm(s) * sk;
    TangentVector<T> out{T(0.0), {}, origin<T>({cfg.curvature, x.space.size()})};
    if (value_of(b) < numeric::kSeriesThreshold) {
        out.space.assign(s.begin(), s.end());
    } else {
        out.space = detail::scaled(s, T(asinh(b) / b));
    }
    return out;
}

/// Lorentzian norm sqrt(<v, v>_L) of a tangent (space-like) vector.
template <AmbientVector A>
auto lorentz_norm(const A& v) {
    using T = decltype(v.time);
    using std::sqrt;
    T sq = lorentz_inner(v, v);
    if (value_of(sq) <= 0.0) {
        return T(0.0);
    }
    return T(sqrt(sq));
}

/// proj_p(u) = u + K p <p, u>_L, the orthogonal projection onto T_p.
template <class T, AmbientVector U>
TangentVector<T> project_tangent(const LorentzPoint<T>& p, const U& u, const ManifoldConfig& cfg) {
    if (u.space.size() != p.space.size()) {
        throw InvalidArgument("project_tangent: ambient dimension mismatch");
    }
    T s = cfg.curvature * lorentz_inner(p, u);
    TangentVector<T> out{u.time + p.time * s, {}, p};
    out.space.reserve(p.space.size());
    for (std::size_t i = 0; i < p.space.size(); ++i) {
        out.space.push_back(u.space[i] + p.space[i] * s);
    }
    return out;
}

/// Divides z by sqrt(d), then scales it down to norm zeta if it is longer.
template <class T>
std::vector<T> rescale_clip(std::span<const T> z, double zeta, const ManifoldConfig& cfg) {
    if (!(zeta > 0.0)) {
        throw InvalidArgument("rescale_clip: zeta must be positive");
    }
    if (z.size() != cfg.dim) {
        throw InvalidArgument("rescale_clip: dimension mismatch");
    }
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
    std::vector<T> out = detail::scaled(z, T(inv_sqrt_d));
    T n = norm(std::span<const T>(out));
    if (value_of(n) > zeta) {
        T s = zeta / n;
        for (T& x : out) {
            x = x * s;
        }
    }
    return out;
}

template <class T>
std::vector<T> rescale_clip(const std::vector<T>& z, double zeta, const ManifoldConfig& cfg) {
    return rescale_clip(std::span<const T>(z), zeta, cfg);
}

/// Hyperbolic uncertainty of a lifted point: 1 - tanh(sqrt(K)|z|)/sqrt(K), with
/// z the pre-lift embedding. Lies in [0, 1] for K = 1; for K < 1 it can go
/// negative at large |z|.
template <class T>
T uncertainty(const LorentzPoint<T>& x, const ManifoldConfig& cfg) {
    // tanh(sqrt(K)|z|) = |x_space| / x_time on the hyperboloid.
    T ratio = norm(std::span<const T>(x.space)) / x.time;
    return 1.0 - ratio / cfg.sqrt_k();
}

/// The same quantity evaluated from the pre-lift Euclidean embedding.
inline double uncertainty_from_embedding(std::span<const double> z, const ManifoldConfig& cfg) {
    const double sk = cfg.sqrt_k();
    return 1.0 - std::tanh(sk * norm(z)) / sk;
}

inline bool on_manifold(const Point& x, const ManifoldConfig& cfg, double tol = 1e-9) {
    return x.time > 0.0 && std::abs(lorentz_inner(x, x) + 1.0 / cfg.curvature) <= tol;
}

/// Flattens a point to [time, space...].
template <class T>
std::vector<T> to_ambient(const LorentzPoint<T>& x) {
    std::vector<T> out;
    out.reserve(x.space.size() + 1);
    out.push_back(x.time);
    out.insert(out.end(), x.space.begin(), x.space.end());
    return out;
}

inline Point from_ambient(std::span<const double> coords) {
    if (coords.size() < 2) {
        throw InvalidArgument("from_ambient: need at least two coordinates");
    }
    return {coords[0], std::vector<double>(coords.begin() + 1, coords.end())};
}

} // namespace hbct
