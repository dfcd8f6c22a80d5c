#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hbct/dataset.hpp"
#include "hbct/encoder.hpp"
#include "hbct/errors.hpp"
#include "hbct/manifold.hpp"

/**
 * @file evaluation.hpp
 *
 * Exact retrieval and backward-compatibility metrics.
 *
 * Lorentz embedding sets are compared with the geodesic distance, Euclidean
 * sets with cosine distance. Rankings are ascending by distance with ties
 * broken by gallery index. When the query set and the gallery are the same
 * object, each query's own row is left out of its ranking.
 */

namespace hbct {

enum class Geometry : std::uint32_t { lorentz = 0, euclidean = 1 };

/// Embeddings of one split produced by one model generation.
struct EmbeddingSet {
    Geometry geometry = Geometry::lorentz;
    double curvature = 1.0;
    int generation = 0;
    std::size_t dim = 0;          ///< spatial dimension d
    std::vector<double> coords;   ///< row-major; d + 1 values per Lorentz row, d per Euclidean row
    std::vector<int> labels;

    std::size_t stride() const noexcept { return geometry == Geometry::lorentz ? dim + 1 : dim; }
    std::size_t size() const noexcept { return labels.size(); }
    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(coords).subspan(i * stride(), stride());
    }

    void validate() const {
        if (coords.size() != labels.size() * stride()) {
            throw InvalidArgument("embedding set: coordinate count does not match labels");
        }
    }

    bool operator==(const EmbeddingSet&) const = default;
};

inline EmbeddingSet embed_dataset(const EncoderModel& model, const Dataset& data, const ClipPolicy& policy,
                                  const ManifoldConfig& cfg) {
    EmbeddingSet out{Geometry::lorentz, cfg.curvature, model.generation(), cfg.dim, {}, data.labels};
    out.coords.reserve(data.size() * (cfg.dim + 1));
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto e = embed(model, data.row(i), policy, cfg);
        out.coords.push_back(e.point.time);
        out.coords.insert(out.coords.end(), e.point.space.begin(), e.point.space.end());
    }
    return out;
}

/// Pre-lift Euclidean embeddings (after rescale/clip) of a dataset.
inline EmbeddingSet embed_dataset_euclidean(const EncoderModel& model, const Dataset& data, const ClipPolicy& policy,
                                            const ManifoldConfig& cfg) {
    EmbeddingSet out{Geometry::euclidean, cfg.curvature, model.generation(), cfg.dim, {}, data.labels};
    out.coords.reserve(data.size() * cfg.dim);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto e = embed(model, data.row(i), policy, cfg);
        out.coords.insert(out.coords.end(), e.z.begin(), e.z.end());
    }
    return out;
}

/// Uncertainty of every row of a Lorentz set.
inline std::vector<double> uncertainties(const EmbeddingSet& set) {
    if (set.geometry != Geometry::lorentz) {
        throw InvalidArgument("uncertainties: requires a Lorentz embedding set");
    }
    const ManifoldConfig cfg{set.curvature, set.dim};
    std::vector<double> out;
    out.reserve(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        out.push_back(uncertainty(from_ambient(set.row(i)), cfg));
    }
    return out;
}

inline double cosine_distance(std::span<const double> a, std::span<const double> b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) {
        return 1.0;
    }
    return 1.0 - dot(a, b) / (na * nb);
}

namespace detail {

inline void check_compatible(std::span<const double> query, const EmbeddingSet& gallery) {
    if (gallery.size() == 0) {
        throw InvalidArgument("retrieve: gallery is empty");
    }
    if (query.size() != gallery.stride()) {
        throw InvalidArgument("retrieve: query dimension does not match the gallery");
    }
}

inline void check_compatible(const EmbeddingSet& queries, const EmbeddingSet& gallery) {
    queries.validate();
    gallery.validate();
    if (queries.geometry != gallery.geometry) {
        throw InvalidArgument("retrieval: query and gallery geometries differ");
    }
    if (queries.dim != gallery.dim) {
        throw InvalidArgument("retrieval: query and gallery dimensions differ");
    }
    if (queries.geometry == Geometry::lorentz && queries.curvature != gallery.curvature) {
        throw InvalidArgument("retrieval: query and gallery curvatures differ");
    }
    if (gallery.size() == 0) {
        throw InvalidArgument("retrieval: gallery is empty");
    }
}

} // namespace detail

/// Distance from a query row to every gallery row.
inline std::vector<double> gallery_distances(std::span<const double> query, const EmbeddingSet& gallery) {
    detail::check_compatible(query, gallery);
    const ManifoldConfig cfg{gallery.curvature, gallery.dim};
    std::vector<double> d(gallery.size());
    for (std::size_t j = 0; j < gallery.size(); ++j) {
        d[j] = gallery.geometry == Geometry::lorentz ? geodesic_distance(query, gallery.row(j), cfg)
                                                     : cosine_distance(query, gallery.row(j));
    }
    return d;
}

/// Gallery indices ascending by distance, ties by index. `exclude` drops one row.
inline std::vector<std::size_t> retrieve(std::span<const double> query, const EmbeddingSet& gallery,
                                         std::optional<std::size_t> exclude = std::nullopt) {
    const auto d = gallery_distances(query, gallery);
    std::vector<std::size_t> order;
    order.reserve(d.size());
    for (std::size_t j = 0; j < d.size(); ++j) {
        if (!exclude || *exclude != j) {
            order.push_back(j);
        }
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return d[a] < d[b] || (d[a] == d[b] && a < b);
    });
    return order;
}

struct RetrievalMetrics {
    double cmc1 = 0.0;
    double cmc5 = 0.0;
    double map = 0.0;
    std::size_t map_excluded = 0; ///< queries without any relevant gallery item
};

namespace detail {

/// Rank of the first relevant item (0-based) and AP for one query; returns
/// false if nothing is relevant.
inline bool score_query(std::span<const std::size_t> ranking, const EmbeddingSet& gallery, int label,
                        std::size_t& first_hit, double& ap) {
    std::size_t hits = 0;
    double precision_sum = 0.0;
    for (std::size_t r = 0; r < ranking.size(); ++r) {
        if (gallery.labels[ranking[r]] == label) {
            if (hits == 0) {
                first_hit = r;
            }
            ++hits;
            precision_sum += static_cast<double>(hits) / static_cast<double>(r + 1);
        }
    }
    if (hits == 0) {
        return false;
    }
    ap = precision_sum / static_cast<double>(hits);
    return true;
}

template <class Fn>
void for_each_ranking(const EmbeddingSet& queries, const EmbeddingSet& gallery, Fn&& fn) {
    check_compatible(queries, gallery);
    const bool same = &queries == &gallery;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const auto ranking = retrieve(queries.row(i), gallery, same ? std::optional<std::size_t>(i) : std::nullopt);
        fn(i, ranking);
    }
}

} // namespace detail

/// Fraction of queries with a same-label gallery item among the top k.
inline double cmc_at_k(const EmbeddingSet& queries, const EmbeddingSet& gallery, std::size_t k) {
    if (k == 0) {
        throw InvalidArgument("cmc_at_k: k must be positive");
    }
    if (queries.size() == 0) {
        throw InvalidArgument("cmc_at_k: no queries");
    }
    std::size_t hits = 0;
    detail::for_each_ranking(queries, gallery, [&](std::size_t i, const std::vector<std::size_t>& ranking) {
        const std::size_t top = std::min(k, ranking.size());
        for (std::size_t r = 0; r < top; ++r) {
            if (gallery.labels[ranking[r]] == queries.labels[i]) {
                ++hits;
                break;
            }
        }
    });
    return static_cast<double>(hits) / static_cast<double>(queries.size());
}

struct MapResult {
    double value = 0.0;
    std::size_t excluded = 0;
};

/// mAP over queries that have at least one relevant gallery item.
inline MapResult mean_average_precision(const EmbeddingSet& queries, const EmbeddingSet& gallery) {
    double total = 0.0;
    std::size_t counted = 0;
    std::size_t excluded = 0;
    detail::for_each_ranking(queries, gallery, [&](std::size_t i, const std::vector<std::size_t>& ranking) {
        std::size_t first = 0;
        double ap = 0.0;
        if (detail::score_query(ranking, gallery, queries.labels[i], first, ap)) {
            total += ap;
            ++counted;
        } else {
            ++excluded;
        }
    });
    if (counted == 0) {
        throw InvalidArgument("mean_average_precision: no query has a relevant gallery item");
    }
    return {total / static_cast<double>(counted), excluded};
}

/// CMC@1, CMC@5 and mAP from a single ranking pass.
inline RetrievalMetrics evaluate_retrieval(const EmbeddingSet& queries, const EmbeddingSet& gallery) {
    if (queries.size() == 0) {
        throw InvalidArgument("evaluate_retrieval: no queries");
    }
    std::size_t top1 = 0;
    std::size_t top5 = 0;
    double ap_sum = 0.0;
    std::size_t counted = 0;
    std::size_t excluded = 0;
    detail::for_each_ranking(queries, gallery, [&](std::size_t i, const std::vector<std::size_t>& ranking) {
        std::size_t first = 0;
        double ap = 0.0;
        if (detail::score_query(ranking, gallery, queries.labels[i], first, ap)) {
            top1 += first < 1 ? 1 : 0;
            top5 += first < 5 ? 1 : 0;
            ap_sum += ap;
            ++counted;
        } else {
            ++excluded;
        }
    });
    if (counted == 0) {
        throw InvalidArgument("evaluate_retrieval: no query has a relevant gallery item");
    }
    const auto nq = static_cast<double>(queries.size());
    return {static_cast<double>(top1) / nq, static_cast<double>(top5) / nq, ap_sum / static_cast<double>(counted),
            excluded};
}

enum class Metric { cmc1, cmc5, map };

inline double metric_value(const RetrievalMetrics& m, Metric metric) {
    switch (metric) {
    case Metric::cmc1:
        return m.cmc1;
    case Metric::cmc5:
        return m.cmc5;
    case Metric::map:
        return m.map;
    }
    return 0.0;
}

inline std::string metric_name(Metric metric) {
    switch (metric) {
    case Metric::cmc1:
        return "cmc@1";
    case Metric::cmc5:
        return "cmc@5";
    case Metric::map:
        return "mAP";
    }
    return "?";
}

inline constexpr double kDegenerateAnchor = 1e-12;

/// (M(new Q; old G) - M(old Q; old G)) / (M(star Q; star G) - M(old Q; old G)).
inline double p_com(double new_cross, double old_self, double star_self) {
    const double den = star_self - old_self;
    if (!(std::abs(den) > kDegenerateAnchor)) {
        throw DegenerateBaseline("p_com: unaligned and old self-retrieval coincide");
    }
    return (new_cross - old_self) / den;
}

/// (M(new Q; new G) - M(star Q; star G)) / M(star Q; star G).
inline double p_up(double new_self, double star_self) {
    if (!(star_self > kDegenerateAnchor)) {
        throw DegenerateBaseline("p_up: unaligned self-retrieval is zero");
    }
    return (new_self - star_self) / star_self;
}

struct CompatReport {
    std::string metric;
    double self_value = 0.0;       ///< M(new Q; new G)
    double cross_value = 0.0;      ///< M(new Q; old G)
    double old_self_value = 0.0;   ///< M(old Q; old G)
    double star_self_value = 0.0;  ///< M(star Q; star G)
    std::optional<double> p_com;   ///< empty when the anchors are degenerate
    std::optional<double> p_up;
};

inline CompatReport make_report(std::string metric, double self, double cross, double old_self, double star_self) {
    CompatReport r{std::move(metric), self, cross, old_self, star_self, std::nullopt, std::nullopt};
    try {
        r.p_com = hbct::p_com(cross, old_self, star_self);
    } catch (const DegenerateBaseline&) {
    }
    try {
        r.p_up = hbct::p_up(self, star_self);
    } catch (const DegenerateBaseline&) {
    }
    return r;
}

/// Query and gallery embeddings of one generation, plus its unaligned twin.
struct GenerationEmbeddings {
    EmbeddingSet query;
    EmbeddingSet gallery;
    EmbeddingSet star_query;
    EmbeddingSet star_gallery;
};

/// N x N matrix, row-major. Entry (i, j) embeds queries with generation i and
/// the gallery with generation j. Off-diagonal entries are P_com anchored on
/// the older of the two generations (its self-retrieval) and the unaligned
/// model of the newer one. The diagonal holds self / star_self, i.e. 1 + P_up.
struct CompatMatrix {
    std::size_t n = 0;
    std::string metric;
    std::vector<double> values;
    std::vector<int> generation_tags;

    double at(std::size_t i, std::size_t j) const { return values.at(i * n + j); }

    /// Mean of entries strictly below the diagonal (new queries, older galleries).
    double mean_sub_diagonal() const {
        double s = 0.0;
        std::size_t c = 0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                s += at(i, j);
                ++c;
            }
        }
        return c == 0 ? 0.0 : s / static_cast<double>(c);
    }
};

inline CompatMatrix compatibility_matrix(const std::vector<GenerationEmbeddings>& gens, Metric metric) {
    const std::size_t n = gens.size();
    if (n < 2) {
        throw InvalidArgument("compatibility_matrix: need at least two generations");
    }
    std::vector<double> self(n);
    std::vector<double> star(n);
    for (std::size_t i = 0; i < n; ++i) {
        self[i] = metric_value(evaluate_retrieval(gens[i].query, gens[i].gallery), metric);
        star[i] = metric_value(evaluate_retrieval(gens[i].star_query, gens[i].star_gallery), metric);
    }
    CompatMatrix m{n, metric_name(metric), std::vector<double>(n * n), {}};
    for (std::size_t i = 0; i < n; ++i) {
        m.generation_tags.push_back(gens[i].query.generation);
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) {
                m.values[i * n + j] = star[i] > kDegenerateAnchor ? self[i] / star[i] : 0.0;
                continue;
            }
            const std::size_t older = std::min(i, j);
            const std::size_t newer = std::max(i, j);
            const double cross = metric_value(evaluate_retrieval(gens[i].query, gens[j].gallery), metric);
            m.values[i * n + j] = p_com(cross, self[older], star[newer]);
        }
    }
    return m;
}

} // namespace hbct
