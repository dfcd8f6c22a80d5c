#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hbct/errors.hpp"
#include "hbct/rng.hpp"

namespace hbct {

/// Labeled feature rows (row-major).
struct Dataset {
    std::size_t input_dim = 0;
    std::vector<double> features;
    std::vector<int> labels;

    std::size_t size() const noexcept { return labels.size(); }
    bool empty() const noexcept { return labels.empty(); }

    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(features).subspan(i * input_dim, input_dim);
    }

    void push_back(std::span<const double> x, int label) {
        if (x.size() != input_dim) {
            throw InvalidArgument("dataset: row width mismatch");
        }
        features.insert(features.end(), x.begin(), x.end());
        labels.push_back(label);
    }

    Dataset subset(std::span<const std::size_t> indices) const {
        Dataset out{input_dim, {}, {}};
        out.features.reserve(indices.size() * input_dim);
        out.labels.reserve(indices.size());
        for (std::size_t i : indices) {
            out.push_back(row(i), labels.at(i));
        }
        return out;
    }

    /// Number of classes assuming labels 0..C-1.
    std::size_t num_classes() const {
        int m = -1;
        for (int l : labels) {
            m = std::max(m, l);
        }
        return static_cast<std::size_t>(m + 1);
    }

    bool operator==(const Dataset&) const = default;
};

struct SyntheticDatasetSpec {
    std::size_t num_classes = 20;
    std::size_t samples_per_class = 60;
    std::size_t input_dim = 16;
    double cluster_spread = 0.5;
    double class_center_scale = 3.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (num_classes == 0 || input_dim == 0) {
            throw InvalidArgument("dataset: class count and input dimension must be positive");
        }
        if (samples_per_class < 3) {
            throw InvalidArgument("dataset: need at least 3 samples per class to split train/query/gallery");
        }
        if (!(cluster_spread >= 0.0) || !(class_center_scale > 0.0)) {
            throw InvalidArgument("dataset: spread must be non-negative and center scale positive");
        }
    }

    bool operator==(const SyntheticDatasetSpec&) const = default;
};

struct SplitDataset {
    Dataset train;
    Dataset query;
    Dataset gallery;
    std::size_t num_classes = 0;
};

/// Query and gallery sizes per class; the remainder is training data.
inline std::size_t holdout_per_class(std::size_t samples_per_class) {
    return std::max<std::size_t>(1, samples_per_class / 6);
}

/// Gaussian clusters around class centers placed uniformly on a sphere of
/// radius `class_center_scale`. Each class is split into disjoint train, query
/// and gallery portions.
inline SplitDataset generate_dataset(const SyntheticDatasetSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const std::size_t d = spec.input_dim;
    std::vector<double> centers(spec.num_classes * d);
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        double n2 = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            centers[c * d + k] = rng.normal();
            n2 += centers[c * d + k] * centers[c * d + k];
        }
        const double s = spec.class_center_scale / std::sqrt(n2);
        for (std::size_t k = 0; k < d; ++k) {
            centers[c * d + k] *= s;
        }
    }
    const std::size_t hold = holdout_per_class(spec.samples_per_class);
    SplitDataset out{{d, {}, {}}, {d, {}, {}}, {d, {}, {}}, spec.num_classes};
    std::vector<double> x(d);
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        for (std::size_t i = 0; i < spec.samples_per_class; ++i) {
            for (std::size_t k = 0; k < d; ++k) {
                x[k] = centers[c * d + k] + spec.cluster_spread * rng.normal();
            }
            Dataset& target = i < hold ? out.query : i < 2 * hold ? out.gallery : out.train;
            target.push_back(x, static_cast<int>(c));
        }
    }
    return out;
}

/// Rows whose label is below `class_limit`.
inline Dataset filter_classes(const Dataset& data, std::size_t class_limit) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (static_cast<std::size_t>(data.labels[i]) < class_limit) {
            keep.push_back(i);
        }
    }
    return data.subset(keep);
}

/// A seeded random subset holding round(fraction * n) rows, in original order.
inline Dataset random_fraction(const Dataset& data, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw InvalidArgument("random_fraction: fraction must lie in (0, 1]");
    }
    std::vector<std::size_t> idx(data.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        idx[i] = i;
    }
    Rng rng(seed);
    rng.shuffle(idx);
    const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * data.size())));
    idx.resize(std::min(keep, idx.size()));
    std::sort(idx.begin(), idx.end());
    return data.subset(idx);
}

} // namespace hbct
