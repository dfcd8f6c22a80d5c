#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "hbct/autodiff.hpp"
#include "hbct/dataset.hpp"
#include "hbct/encoder.hpp"
#include "hbct/errors.hpp"
#include "hbct/losses.hpp"
#include "hbct/manifold.hpp"
#include "hbct/rng.hpp"

namespace hbct {

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 64;
    double learning_rate = 0.05;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::uint64_t seed = 0;
    bool cosine_schedule = true;
    /// Start the new generation from the old weights when the shapes agree.
    bool init_from_old = false;

    void validate() const {
        if (epochs == 0 || batch_size < 2) {
            throw InvalidArgument("train: epochs must be positive and batch size at least 2");
        }
        if (!(learning_rate > 0.0) || !(momentum >= 0.0 && momentum < 1.0) || !(weight_decay >= 0.0)) {
            throw InvalidArgument("train: learning rate must be positive, momentum in [0, 1), weight decay >= 0");
        }
    }

    bool operator==(const TrainConfig&) const = default;
};

struct Generation {
    EncoderModel model;
    MlrHead<double> head;
    std::vector<double> epoch_loss; ///< mean training loss per epoch
};

/// Mini-batches over a fresh permutation; a trailing singleton joins the previous batch.
inline std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
    }
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        if (end - start == 1 && !batches.empty()) {
            batches.back().push_back(order[start]);
        } else {
            batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                                 order.begin() + static_cast<std::ptrdiff_t>(end));
        }
    }
    return batches;
}

/// SGD with momentum and coupled weight decay: v = mu v + (g + wd p); p -= lr v.
class SgdMomentum {
public:
    SgdMomentum(std::size_t n, double momentum, double weight_decay)
        : velocity_(n, 0.0), momentum_(momentum), weight_decay_(weight_decay) {}

    void step(std::span<double> params, std::span<const double> grads, double lr) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double g = grads[i] + weight_decay_ * params[i];
            velocity_[i] = momentum_ * velocity_[i] + g;
            params[i] -= lr * velocity_[i];
        }
    }

private:
    std::vector<double> velocity_;
    double momentum_;
    double weight_decay_;
};

inline double cosine_lr(double base, std::size_t epoch, std::size_t epochs) {
    return 0.5 * base * (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(epochs)));
}

namespace detail {

inline void check_labels(const Dataset& data, std::size_t num_classes) {
    if (data.empty()) {
        throw InvalidArgument("train: dataset is empty");
    }
    for (int l : data.labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= num_classes) {
            throw InvalidArgument("train: label " + std::to_string(l) + " outside [0, " +
                                  std::to_string(num_classes) + ")");
        }
    }
}

inline LorentzPoint<ad::Var> as_constant(const Point& p) {
    LorentzPoint<ad::Var> out{ad::Var(p.time), {}};
    out.space.assign(p.space.begin(), p.space.end());
    return out;
}

struct FrozenEmbeddings {
    std::vector<LorentzPoint<ad::Var>> points;
    std::vector<double> uncertainties;
};

inline FrozenEmbeddings embed_frozen(const EncoderModel& old, const Dataset& data, const ClipPolicy& policy,
                                     const ManifoldConfig& cfg) {
    FrozenEmbeddings out;
    out.points.reserve(data.size());
    out.uncertainties.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto e = embed(old, data.row(i), policy, cfg);
        out.uncertainties.push_back(uncertainty(e.point, cfg));
        out.points.push_back(as_constant(e.point));
    }
    return out;
}

/// The shared SGD loop. `frozen` is null when no alignment term is active.
inline void fit(Generation& gen, const Dataset& data, const FrozenEmbeddings* frozen, const ManifoldConfig& cfg,
                const ClipPolicy& policy, const AlignmentConfig& align, const TrainConfig& train, Rng& rng) {
    EncoderModel& model = gen.model;
    MlrHead<double>& head = gen.head;
    const std::size_t n_model = model.params().size();
    SgdMomentum opt_model(n_model, train.momentum, train.weight_decay);
    SgdMomentum opt_head(head.weights.size(), train.momentum, train.weight_decay);
    ad::Tape tape;
    std::vector<double> grads_model(n_model);
    std::vector<double> grads_head(head.weights.size());
    std::size_t step = 0;

    for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
        const double lr = train.cosine_schedule ? cosine_lr(train.learning_rate, epoch, train.epochs)
                                                : train.learning_rate;
        double loss_sum = 0.0;
        const auto batches = make_batches(data.size(), train.batch_size, rng);
        for (const auto& batch : batches) {
            tape.clear();
            const auto pv = tape.variables(model.params());
            MlrHead<ad::Var> hv{head.classes, head.dim, tape.variables(head.weights)};
            std::vector<LorentzPoint<ad::Var>> points;
            std::vector<int> labels;
            OldBatch<ad::Var> old;
            points.reserve(batch.size());
            for (std::size_t i : batch) {
                try {
                    points.push_back(embed<ad::Var>(model, pv, data.row(i), policy, cfg).point);
                } catch (const NumericalDomainError& e) {
                    throw TrainingFailure(std::string("training diverged: ") + e.what(), step);
                }
                labels.push_back(data.labels[i]);
                if (frozen != nullptr) {
                    old.points.push_back(frozen->points[i]);
                    old.uncertainties.push_back(frozen->uncertainties[i]);
                }
            }
            ad::Var loss;
            const auto g = [&] {
                try {
                    loss = total_loss(points, labels, old, hv, cfg,
                                      frozen != nullptr ? align : AlignmentConfig{.lambda = 0.0});
                    if (!std::isfinite(loss.value())) {
                        throw NumericalDomainError("non-finite loss");
                    }
                    return tape.backward(loss);
                } catch (const NumericalDomainError& e) {
                    throw TrainingFailure(std::string("training diverged: ") + e.what(), step);
                }
            }();
            for (std::size_t k = 0; k < n_model; ++k) {
                grads_model[k] = g[pv[k]];
            }
            for (std::size_t k = 0; k < grads_head.size(); ++k) {
                grads_head[k] = g[hv.weights[k]];
            }
            opt_model.step(model.mutable_params(), grads_model, lr);
            opt_head.step(head.weights, grads_head, lr);
            if (!all_finite(model.params()) || !all_finite(head.weights)) {
                throw TrainingFailure("training diverged: non-finite parameters", step);
            }
            loss_sum += loss.value() * static_cast<double>(batch.size());
            ++step;
        }
        gen.epoch_loss.push_back(loss_sum / static_cast<double>(data.size()));
    }
}

} // namespace detail

/// Trains generation 0 with the base classification loss only.
inline Generation train_old(const Dataset& data, const EncoderShape& shape, std::size_t num_classes,
                            const ManifoldConfig& cfg, const ClipPolicy& policy, const TrainConfig& train) {
    cfg.validate();
    train.validate();
    detail::check_labels(data, num_classes);
    if (shape.input_dim != data.input_dim || shape.output_dim != cfg.dim) {
        throw InvalidArgument("train_old: encoder shape does not match data or manifold");
    }
    Rng rng(train.seed);
    Generation gen{EncoderModel(shape, 0), {}, {}};
    gen.model.initialize(rng);
    gen.head = make_head(num_classes, cfg.dim, rng);
    detail::fit(gen, data, nullptr, cfg, policy, AlignmentConfig{.lambda = 0.0}, train, rng);
    return gen;
}

/// Trains the next generation against a frozen predecessor with
/// L_base + lambda (lambda_entail L_entail + L_contrast). With lambda = 0 and a
/// fresh initialization this consumes the random stream exactly like `train_old`.
inline Generation train_new(const Dataset& data, const Generation& old, const EncoderShape& shape,
                            std::size_t num_classes, const ManifoldConfig& cfg, const ClipPolicy& policy,
                            const AlignmentConfig& align, const TrainConfig& train) {
    cfg.validate();
    train.validate();
    align.validate();
    detail::check_labels(data, num_classes);
    if (shape.input_dim != data.input_dim || shape.output_dim != cfg.dim) {
        throw InvalidArgument("train_new: encoder shape does not match data or manifold");
    }
    if (old.model.shape().input_dim != data.input_dim) {
        throw InvalidArgument("train_new: old encoder input dimension does not match data");
    }
    Rng rng(train.seed);
    Generation gen{EncoderModel(shape, old.model.generation() + 1), {}, {}};
    gen.model.initialize(rng);
    gen.head = make_head(num_classes, cfg.dim, rng);
    if (train.init_from_old && shape == old.model.shape()) {
        gen.model.mutable_params().assign(old.model.params().begin(), old.model.params().end());
        const std::size_t rows = std::min(old.head.classes, num_classes);
        std::copy_n(old.head.weights.begin(), rows * cfg.dim, gen.head.weights.begin());
    }
    if (align.lambda == 0.0) {
        detail::fit(gen, data, nullptr, cfg, policy, align, train, rng);
    } else {
        const auto frozen = detail::embed_frozen(old.model, data, policy, cfg);
        detail::fit(gen, data, &frozen, cfg, policy, align, train, rng);
    }
    return gen;
}

/// Fraction of rows whose arg-max MLR logit matches the label.
inline double classification_accuracy(const Generation& gen, const Dataset& data, const ManifoldConfig& cfg,
                                      const ClipPolicy& policy) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto e = embed(gen.model, data.row(i), policy, cfg);
        const auto logits = mlr_logits(e.point, gen.head, cfg);
        const auto best = std::max_element(logits.begin(), logits.end()) - logits.begin();
        hits += best == data.labels[i] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

} // namespace hbct
