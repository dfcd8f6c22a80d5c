#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hbct/errors.hpp"
#include "hbct/losses.hpp"
#include "hbct/manifold.hpp"
#include "hbct/rng.hpp"

namespace hbct {

/// Layer widths of a dense tanh MLP. No hidden layers means a linear encoder.
struct EncoderShape {
    std::size_t input_dim = 16;
    std::vector<std::size_t> hidden;
    std::size_t output_dim = 8;

    std::vector<std::size_t> widths() const {
        std::vector<std::size_t> w{input_dim};
        w.insert(w.end(), hidden.begin(), hidden.end());
        w.push_back(output_dim);
        return w;
    }

    std::size_t parameter_count() const {
        const auto w = widths();
        std::size_t n = 0;
        for (std::size_t l = 0; l + 1 < w.size(); ++l) {
            n += w[l + 1] * w[l] + w[l + 1];
        }
        return n;
    }

    bool operator==(const EncoderShape&) const = default;
};

/// Generation-dependent clipping threshold zeta_g = zeta_old + g * zeta_step.
struct ClipPolicy {
    double zeta_old = 1.0;
    double zeta_step = 0.2;

    double zeta(int generation) const {
        const double z = zeta_old + generation * zeta_step;
        if (!(z > 0.0)) {
            throw InvalidArgument("clip policy: zeta for generation " + std::to_string(generation) + " is not positive");
        }
        return z;
    }

    bool operator==(const ClipPolicy&) const = default;
};

/// Dense feed-forward encoder. Parameters are one flat vector: for each layer
/// the weight matrix (out x in, row-major) followed by its bias.
class EncoderModel {
public:
    EncoderModel() = default;

    EncoderModel(EncoderShape shape, int generation)
        : shape_(std::move(shape)), generation_(generation), params_(shape_.parameter_count(), 0.0) {
        if (shape_.input_dim == 0 || shape_.output_dim == 0) {
            throw InvalidArgument("encoder: input and output dimensions must be positive");
        }
    }

    const EncoderShape& shape() const noexcept { return shape_; }
    int generation() const noexcept { return generation_; }
    void set_generation(int g) noexcept { generation_ = g; }

    std::span<const double> params() const noexcept { return params_; }
    std::vector<double>& mutable_params() noexcept { return params_; }

    /// Glorot-uniform weights, zero biases.
    void initialize(Rng& rng) {
        const auto w = shape_.widths();
        std::size_t off = 0;
        for (std::size_t l = 0; l + 1 < w.size(); ++l) {
            const double a = std::sqrt(6.0 / static_cast<double>(w[l] + w[l + 1]));
            for (std::size_t k = 0; k < w[l + 1] * w[l]; ++k) {
                params_[off++] = rng.uniform(-a, a);
            }
            for (std::size_t k = 0; k < w[l + 1]; ++k) {
                params_[off++] = 0.0;
            }
        }
    }

    /// z = forward(x) with the given parameter vector (plain or recorded).
    template <class T>
    std::vector<T> forward(std::span<const T> params, std::span<const double> x) const {
        using std::tanh;
        if (x.size() != shape_.input_dim) {
            throw InvalidArgument("encoder: input has " + std::to_string(x.size()) + " features, expected " +
                                  std::to_string(shape_.input_dim));
        }
        if (params.size() != params_.size()) {
            throw InvalidArgument("encoder: parameter vector has the wrong length");
        }
        const auto w = shape_.widths();
        std::size_t off = 0;
        std::vector<T> act;
        for (std::size_t l = 0; l + 1 < w.size(); ++l) {
            const std::size_t in = w[l];
            const std::size_t out = w[l + 1];
            const auto weights = params.subspan(off, in * out);
            const auto bias = params.subspan(off + in * out, out);
            off += in * out + out;
            std::vector<T> next;
            next.reserve(out);
            for (std::size_t o = 0; o < out; ++o) {
                T v = l == 0 ? T(dot(weights.subspan(o * in, in), x))
                             : T(dot(weights.subspan(o * in, in), std::span<const T>(act)));
                v = v + bias[o];
                next.push_back(l + 2 < w.size() ? T(tanh(v)) : v);
            }
            act = std::move(next);
        }
        return act;
    }

    std::vector<double> forward(std::span<const double> x) const { return forward<double>(params_, x); }

private:
    EncoderShape shape_;
    int generation_ = 0;
    std::vector<double> params_;
};

template <class T>
struct Embedded {
    std::vector<T> z;        ///< rescaled and clipped Euclidean embedding
    LorentzPoint<T> point;   ///< expm_origin([0, z])
};

/// forward -> rescale_clip(zeta_g) -> expm_origin, with explicit parameters.
template <class T>
Embedded<T> embed(const EncoderModel& model, std::span<const T> params, std::span<const double> x,
                  const ClipPolicy& policy, const ManifoldConfig& cfg) {
    if (model.shape().output_dim != cfg.dim) {
        throw InvalidArgument("embed: encoder output dimension does not match the manifold");
    }
    const auto z = model.forward(params, x);
    auto zc = rescale_clip(z, policy.zeta(model.generation()), cfg);
    auto h = expm_origin(zc, cfg);
    return {std::move(zc), std::move(h)};
}

inline Embedded<double> embed(const EncoderModel& model, std::span<const double> x, const ClipPolicy& policy,
                              const ManifoldConfig& cfg) {
    return embed<double>(model, model.params(), x, policy, cfg);
}

/// Random small hyperplane normals for a fresh MLR head.
inline MlrHead<double> make_head(std::size_t classes, std::size_t dim, Rng& rng) {
    MlrHead<double> head{classes, dim, std::vector<double>(classes * dim)};
    const double a = std::sqrt(6.0 / static_cast<double>(classes + dim));
    for (double& w : head.weights) {
        w = rng.uniform(-a, a);
    }
    return head;
}

} // namespace hbct
