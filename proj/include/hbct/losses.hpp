#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "hbct/errors.hpp"
#include "hbct/manifold.hpp"

/**
 * @file losses.hpp
 *
 * Training objectives for hyperbolic backward-compatible training:
 *
 *  - hyperbolic MLR classification (`mlr_logits`, `base_loss`)
 *  - entailment cone (`aperture`, `exterior_angle`, `entailment_loss`)
 *  - uncertainty-adaptive RINCE contrastive alignment (`contrastive_loss`)
 *    and its InfoNCE / mean-distortion ablations
 *  - the combined objective (`total_loss`)
 *
 * Every function is a template over the scalar type; instantiate with
 * `ad::Var` to record a differentiable graph.
 */

namespace hbct {

/// Per-class hyperplane normals w_y in the tangent space at the origin, stored
/// as the spatial part of [0, w_y] (row-major, classes x dim).
template <class T>
struct MlrHead {
    std::size_t classes = 0;
    std::size_t dim = 0;
    std::vector<T> weights;

    std::span<const T> row(std::size_t c) const { return std::span<const T>(weights).subspan(c * dim, dim); }
};

enum class DistanceKind { geodesic, lorentz_inner, squared_lorentz };
enum class ContrastKind { rince, infonce, mean_distortion };
enum class QMode { adaptive, fixed };

struct AlignmentConfig {
    double lambda = 0.3;          ///< alignment weight
    double lambda_entail = 1.0;   ///< entailment weight inside the lambda bracket
    double tau = 0.5;             ///< contrastive temperature
    double beta = 0.01;           ///< RINCE beta
    double epsilon = 0.1;         ///< cone aperture constant
    QMode q_mode = QMode::adaptive;
    double q = 0.5;               ///< used when q_mode == fixed
    DistanceKind distance = DistanceKind::geodesic;
    ContrastKind contrast = ContrastKind::rince;

    void validate() const {
        if (!(lambda >= 0.0) || !(lambda_entail >= 0.0)) {
            throw InvalidArgument("alignment: lambda weights must be non-negative");
        }
        if (!(tau > 0.0)) {
            throw InvalidArgument("alignment: tau must be positive");
        }
        if (!(beta > 0.0 && beta <= 1.0)) {
            throw InvalidArgument("alignment: beta must lie in (0, 1]");
        }
        if (!(epsilon > 0.0)) {
            throw InvalidArgument("alignment: epsilon must be positive");
        }
        if (q_mode == QMode::fixed && !(q > 0.0 && q <= 1.0)) {
            throw InvalidArgument("alignment: fixed q must lie in (0, 1]");
        }
    }

    bool operator==(const AlignmentConfig&) const = default;
};

inline constexpr double kMinAdaptiveQ = 1e-3;
inline constexpr double kDegenerateHyperplane = 1e-12;
inline constexpr double kMinSinhSquared = 1e-12;

// ---------------------------------------------------------------------------
// Hyperbolic MLR

/// logit_y = sign(<w,h>_L) |w|_L d_L(h, H_w) with
/// d_L(h, H_w) = |asinh(sqrt(K) <w,h>_L / |w|_L)| / sqrt(K).
template <class T>
std::vector<T> mlr_logits(const LorentzPoint<T>& h, const MlrHead<T>& head, const ManifoldConfig& cfg) {
    using std::asinh;
    if (head.dim != h.space.size()) {
        throw InvalidArgument("mlr_logits: head dimension does not match the point");
    }
    const double sk = cfg.sqrt_k();
    const std::span<const T> hs(h.space);
    std::vector<T> logits;
    logits.reserve(head.classes);
    for (std::size_t c = 0; c < head.classes; ++c) {
        const auto w = head.row(c);
        T wn = norm(w);
        if (value_of(wn) < kDegenerateHyperplane) {
            logits.emplace_back(0.0);
            continue;
        }
        // <[0, w], h>_L has no time contribution. sign(u) |asinh(u)| = asinh(u).
        T u = dot(w, hs) * sk / wn;
        logits.push_back(wn * asinh(u) / sk);
    }
    return logits;
}

/// -log softmax(logits)[label], evaluated with a max shift.
template <class T>
T cross_entropy(std::span<const T> logits, std::size_t label) {
    using std::exp;
    using std::log;
    if (label >= logits.size()) {
        throw InvalidArgument("cross_entropy: label out of range");
    }
    double shift = value_of(logits[0]);
    for (const T& l : logits) {
        shift = std::max(shift, value_of(l));
    }
    std::vector<T> e;
    e.reserve(logits.size());
    for (const T& l : logits) {
        e.push_back(exp(l - shift));
    }
    T lse = log(sum(std::span<const T>(e))) + shift;
    return lse - logits[label];
}

template <class T>
T base_loss(const LorentzPoint<T>& h, std::size_t label, const MlrHead<T>& head, const ManifoldConfig& cfg) {
    if (label >= head.classes) {
        throw InvalidArgument("base_loss: label " + std::to_string(label) + " out of range");
    }
    const auto logits = mlr_logits(h, head, cfg);
    return cross_entropy(std::span<const T>(logits), label);
}

// ---------------------------------------------------------------------------
// Entailment cone

/// Half-aperture asin(2 eps / (sqrt(K) |h_space|)), saturating at pi/2.
template <class T>
T aperture(const LorentzPoint<T>& h_o, const ManifoldConfig& cfg, double epsilon) {
    T n = norm(std::span<const T>(h_o.space));
    if (value_of(n) == 0.0) {
        return T(std::numbers::pi / 2);
    }
    T ratio = 2.0 * epsilon / (cfg.sqrt_k() * n);
    if (value_of(ratio) >= 1.0) {
        return T(std::numbers::pi / 2);
    }
    return safe_asin(ratio);
}

/// pi minus the angle at h_o in the geodesic triangle (origin, h_o, h_n).
template <class T>
T exterior_angle(const LorentzPoint<T>& h_o, const LorentzPoint<T>& h_n, const ManifoldConfig& cfg) {
    using std::sqrt;
    T n_o = norm(std::span<const T>(h_o.space));
    if (value_of(n_o) == 0.0) {
        throw NumericalDomainError("exterior_angle: undefined at the origin");
    }
    T c = cfg.curvature * lorentz_inner(h_o, h_n);
    T numer = h_n.time + h_o.time * c;
    T sinh_sq = c * c - 1.0;
    if (value_of(sinh_sq) < kMinSinhSquared) {
        sinh_sq = T(kMinSinhSquared);
    }
    T ratio = numer / (n_o * sqrt(sinh_sq));
    if (value_of(ratio) > 1.0) {
        ratio = T(1.0);
    } else if (value_of(ratio) < -1.0) {
        ratio = T(-1.0);
    }
    return safe_acos(ratio);
}

/// max(0, ext(h_o, h_n) - aper(h_o)); zero when h_n is inside h_o's cone.
template <class T>
T entailment_loss(const LorentzPoint<T>& h_n, const LorentzPoint<T>& h_o, const ManifoldConfig& cfg,
                  double epsilon) {
    return hinge(exterior_angle(h_o, h_n, cfg) - aperture(h_o, cfg, epsilon));
}

// ---------------------------------------------------------------------------
// Contrastive alignment

template <class T>
T pair_distance(const LorentzPoint<T>& x, const LorentzPoint<T>& y, const ManifoldConfig& cfg, DistanceKind kind) {
    switch (kind) {
    case DistanceKind::geodesic:
        return geodesic_distance(x, y, cfg);
    case DistanceKind::lorentz_inner:
        return -lorentz_inner(x, y);
    case DistanceKind::squared_lorentz:
        // |x - y|_L^2 = -2/K - 2 <x, y>_L
        return -2.0 / cfg.curvature - 2.0 * lorentz_inner(x, y);
    }
    throw InvalidArgument("pair_distance: unknown distance kind");
}

namespace detail {

template <class T>
void check_batches(const std::vector<LorentzPoint<T>>& a, const std::vector<LorentzPoint<T>>& b, std::size_t min_size,
                   const char* what) {
    if (a.size() != b.size()) {
        throw InvalidArgument(std::string(what) + ": batches must have equal length");
    }
    if (a.size() < min_size) {
        throw InvalidArgument(std::string(what) + ": batch size must be at least " + std::to_string(min_size));
    }
}

/// Row-major n x n matrix of D(new_i, old_j).
template <class T>
std::vector<T> distance_matrix(const std::vector<LorentzPoint<T>>& batch_new, const std::vector<LorentzPoint<T>>& batch_old,
                               const ManifoldConfig& cfg, DistanceKind kind) {
    const std::size_t n = batch_new.size();
    std::vector<T> d;
    d.reserve(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            d.push_back(pair_distance(batch_new[i], batch_old[j], cfg, kind));
        }
    }
    return d;
}

template <class T>
T mean(std::vector<T>& terms) {
    return sum(std::span<const T>(terms)) / static_cast<double>(terms.size());
}

} // namespace detail

/// Per-pair RINCE exponents: clamp(Uncertainty(h_o), 1e-3, 1) or the fixed q.
inline std::vector<double> rince_exponents(std::span<const double> uncertainties_old, const AlignmentConfig& align) {
    std::vector<double> q(uncertainties_old.size(), align.q);
    if (align.q_mode == QMode::adaptive) {
        for (std::size_t i = 0; i < q.size(); ++i) {
            q[i] = std::clamp(uncertainties_old[i], kMinAdaptiveQ, 1.0);
        }
    }
    return q;
}

/// Mean over pairs of
///   -(1/q) exp(-q D_ii / tau) + (1/q) (beta sum_j exp(-D_ij / tau))^q,
/// where the negative sum runs over the whole batch including j = i.
template <class T>
T contrastive_loss(const std::vector<LorentzPoint<T>>& batch_new, const std::vector<LorentzPoint<T>>& batch_old,
                   std::span<const double> uncertainties_old, const ManifoldConfig& cfg, const AlignmentConfig& align) {
    using std::exp;
    using std::pow;
    detail::check_batches(batch_new, batch_old, 2, "contrastive_loss");
    if (uncertainties_old.size() != batch_old.size()) {
        throw InvalidArgument("contrastive_loss: one uncertainty per old embedding required");
    }
    const std::size_t n = batch_new.size();
    const auto q = rince_exponents(uncertainties_old, align);
    const auto d = detail::distance_matrix(batch_new, batch_old, cfg, align.distance);
    std::vector<T> terms;
    terms.reserve(n);
    std::vector<T> row(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            row[j] = exp(d[i * n + j] * (-1.0 / align.tau));
        }
        T neg = pow(align.beta * sum(std::span<const T>(row)), q[i]);
        T pos = exp(d[i * n + i] * (-q[i] / align.tau));
        terms.push_back((neg - pos) / q[i]);
    }
    return detail::mean(terms);
}

/// Mean over pairs of -log( exp(-D_ii/tau) / sum_j exp(-D_ij/tau) ).
template <class T>
T infonce_loss(const std::vector<LorentzPoint<T>>& batch_new, const std::vector<LorentzPoint<T>>& batch_old,
               const ManifoldConfig& cfg, const AlignmentConfig& align) {
    detail::check_batches(batch_new, batch_old, 2, "infonce_loss");
    const std::size_t n = batch_new.size();
    const auto d = detail::distance_matrix(batch_new, batch_old, cfg, align.distance);
    std::vector<T> terms;
    terms.reserve(n);
    std::vector<T> logits(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            logits[j] = d[i * n + j] * (-1.0 / align.tau);
        }
        terms.push_back(cross_entropy(std::span<const T>(logits), i));
    }
    return detail::mean(terms);
}

/// Mean over aligned pairs of D(new_i, old_i).
template <class T>
T mean_distortion_loss(const std::vector<LorentzPoint<T>>& batch_new, const std::vector<LorentzPoint<T>>& batch_old,
                       const ManifoldConfig& cfg, const AlignmentConfig& align) {
    detail::check_batches(batch_new, batch_old, 1, "mean_distortion_loss");
    std::vector<T> terms;
    terms.reserve(batch_new.size());
    for (std::size_t i = 0; i < batch_new.size(); ++i) {
        terms.push_back(pair_distance(batch_new[i], batch_old[i], cfg, align.distance));
    }
    return detail::mean(terms);
}

/// Dispatches on `align.contrast`.
template <class T>
T alignment_contrast(const std::vector<LorentzPoint<T>>& batch_new, const std::vector<LorentzPoint<T>>& batch_old,
                     std::span<const double> uncertainties_old, const ManifoldConfig& cfg,
                     const AlignmentConfig& align) {
    switch (align.contrast) {
    case ContrastKind::rince:
        return contrastive_loss(batch_new, batch_old, uncertainties_old, cfg, align);
    case ContrastKind::infonce:
        return infonce_loss(batch_new, batch_old, cfg, align);
    case ContrastKind::mean_distortion:
        return mean_distortion_loss(batch_new, batch_old, cfg, align);
    }
    throw InvalidArgument("alignment_contrast: unknown contrast kind");
}

template <class T>
T mean_base_loss(const std::vector<LorentzPoint<T>>& batch, std::span<const int> labels, const MlrHead<T>& head,
                 const ManifoldConfig& cfg) {
    if (batch.size() != labels.size() || batch.empty()) {
        throw InvalidArgument("mean_base_loss: need one label per embedding");
    }
    std::vector<T> terms;
    terms.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (labels[i] < 0) {
            throw InvalidArgument("mean_base_loss: negative label");
        }
        terms.push_back(base_loss(batch[i], static_cast<std::size_t>(labels[i]), head, cfg));
    }
    return detail::mean(terms);
}

template <class T>
T mean_entailment_loss(const std::vector<LorentzPoint<T>>& batch_new, const std::vector<LorentzPoint<T>>& batch_old,
                       const ManifoldConfig& cfg, double epsilon) {
    detail::check_batches(batch_new, batch_old, 1, "mean_entailment_loss");
    std::vector<T> terms;
    terms.reserve(batch_new.size());
    for (std::size_t i = 0; i < batch_new.size(); ++i) {
        terms.push_back(entailment_loss(batch_new[i], batch_old[i], cfg, epsilon));
    }
    return detail::mean(terms);
}

/// Old-generation embeddings of a batch, with their uncertainties.
template <class T>
struct OldBatch {
    std::vector<LorentzPoint<T>> points;
    std::vector<double> uncertainties;
};

/// L = L_base + lambda (lambda_entail L_entail + L_contrast). With lambda = 0
/// the alignment terms are not evaluated and the result is the base loss.
template <class T>
T total_loss(const std::vector<LorentzPoint<T>>& batch_new, std::span<const int> labels, const OldBatch<T>& old,
             const MlrHead<T>& head, const ManifoldConfig& cfg, const AlignmentConfig& align) {
    T loss = mean_base_loss(batch_new, labels, head, cfg);
    if (align.lambda == 0.0) {
        return loss;
    }
    T bracket = alignment_contrast(batch_new, old.points, old.uncertainties, cfg, align);
    if (align.lambda_entail != 0.0) {
        bracket = align.lambda_entail * mean_entailment_loss(batch_new, old.points, cfg, align.epsilon) + bracket;
    }
    return loss + align.lambda * bracket;
}

} // namespace hbct
