#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hbct/config.hpp"
#include "hbct/dataset.hpp"
#include "hbct/encoder.hpp"
#include "hbct/evaluation.hpp"
#include "hbct/io.hpp"
#include "hbct/training.hpp"

/**
 * @file scenario.hpp
 *
 * End-to-end update scenarios on synthetic data. A run trains the old model
 * on the scenario's old slice, then an unaligned model (lambda = 0, "star")
 * and an aligned model on the full training split with identical seeds, and
 * evaluates the four retrieval pairings on held-out query and gallery splits.
 */

namespace hbct {

/// Everything measured in one seeded run.
struct ScenarioResult {
    std::uint64_t seed = 0;
    RetrievalMetrics old_self;   ///< old Q vs old G
    RetrievalMetrics star_self;  ///< star Q vs star G
    RetrievalMetrics star_cross; ///< star Q vs old G
    RetrievalMetrics new_self;   ///< new Q vs new G
    RetrievalMetrics new_cross;  ///< new Q vs old G
    std::vector<CompatReport> reports;
    std::vector<double> old_gallery_uncertainty;
    std::vector<double> new_gallery_uncertainty;
    std::vector<double> old_seen_uncertainty;   ///< old-model gallery rows of classes it was trained on
    std::vector<double> old_unseen_uncertainty; ///< old-model gallery rows of classes it never saw
    double max_new_embedding_norm = 0.0;

    const CompatReport& report(Metric m) const {
        const auto name = metric_name(m);
        for (const auto& r : reports) {
            if (r.metric == name) {
                return r;
            }
        }
        throw InvalidArgument("scenario result: no report for " + name);
    }
};

struct SequentialResult {
    std::uint64_t seed = 0;
    CompatMatrix aligned;
    CompatMatrix baseline;
};

inline double median(std::vector<double> v) {
    if (v.empty()) {
        throw InvalidArgument("median of an empty sample");
    }
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Resolves a relative output directory against $HBCT_OUTPUT_ROOT when set.
inline std::filesystem::path output_root(const std::string& dir) {
    std::filesystem::path p(dir);
    if (p.is_relative()) {
        if (const char* root = std::getenv("HBCT_OUTPUT_ROOT"); root != nullptr && *root != '\0') {
            return std::filesystem::path(root) / p;
        }
    }
    return p;
}

namespace scenario_detail {

inline std::size_t class_limit(std::size_t classes, double fraction) {
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(fraction * static_cast<double>(classes))), 1,
                                   classes);
}

inline SyntheticDatasetSpec data_spec(const ExperimentConfig& cfg, std::uint64_t seed) {
    SyntheticDatasetSpec spec = cfg.data;
    spec.seed = cfg.data.seed + seed;
    return spec;
}

inline TrainConfig train_config(const ExperimentConfig& cfg, std::uint64_t seed) {
    TrainConfig t = cfg.train;
    t.seed = cfg.train.seed + seed;
    return t;
}

inline EncoderShape shape(const ExperimentConfig& cfg, const std::vector<std::size_t>& hidden) {
    return {cfg.data.input_dim, hidden, cfg.manifold.dim};
}

inline bool new_architecture(ScenarioKind k) { return k == ScenarioKind::new_arch || k == ScenarioKind::both; }

inline std::string format_value(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << v;
    return os.str();
}

inline std::string format_optional(const std::optional<double>& v) {
    return v ? format_value(*v) : std::string("degenerate");
}

inline std::string shortest(double v) { return config_detail::format(v); }

} // namespace scenario_detail

/// Training data of the old model, and the number of classes its head covers.
struct OldSlice {
    Dataset data;
    std::size_t classes = 0;
};

inline OldSlice old_slice(const ExperimentConfig& cfg, const SplitDataset& data, std::uint64_t train_seed) {
    switch (cfg.scenario.kind) {
    case ScenarioKind::ext_data:
        return {random_fraction(data.train, cfg.scenario.old_fraction, train_seed ^ 0x9e3779b97f4a7c15ULL),
                data.num_classes};
    case ScenarioKind::ext_class:
    case ScenarioKind::both: {
        const auto limit = scenario_detail::class_limit(data.num_classes, cfg.scenario.class_fraction);
        return {filter_classes(data.train, limit), limit};
    }
    default:
        return {data.train, data.num_classes};
    }
}

inline EncoderShape old_encoder_shape(const ExperimentConfig& cfg) {
    return scenario_detail::shape(cfg, cfg.scenario.old_hidden);
}

inline EncoderShape new_encoder_shape(const ExperimentConfig& cfg) {
    return scenario_detail::new_architecture(cfg.scenario.kind) ? scenario_detail::shape(cfg, cfg.scenario.new_hidden)
                                                                : old_encoder_shape(cfg);
}

/// Structured text table of a run's compatibility reports.
inline std::string report_table(const std::vector<CompatReport>& reports) {
    using scenario_detail::format_optional;
    using scenario_detail::format_value;
    std::ostringstream os;
    os << std::left << std::setw(8) << "metric" << std::right << std::setw(10) << "old_self" << std::setw(11)
       << "star_self" << std::setw(10) << "self" << std::setw(10) << "cross" << std::setw(12) << "P_up"
       << std::setw(12) << "P_com" << "\n";
    for (const auto& r : reports) {
        os << std::left << std::setw(8) << r.metric << std::right << std::setw(10) << format_value(r.old_self_value)
           << std::setw(11) << format_value(r.star_self_value) << std::setw(10) << format_value(r.self_value)
           << std::setw(10) << format_value(r.cross_value) << std::setw(12) << format_optional(r.p_up)
           << std::setw(12) << format_optional(r.p_com) << "\n";
    }
    return os.str();
}

/// Machine-readable `metric.field = value` lines.
inline std::string report_kv(const std::vector<CompatReport>& reports) {
    using scenario_detail::shortest;
    std::ostringstream os;
    for (const auto& r : reports) {
        os << r.metric << ".self = " << shortest(r.self_value) << "\n"
           << r.metric << ".cross = " << shortest(r.cross_value) << "\n"
           << r.metric << ".old_self = " << shortest(r.old_self_value) << "\n"
           << r.metric << ".star_self = " << shortest(r.star_self_value) << "\n"
           << r.metric << ".p_up = " << (r.p_up ? shortest(*r.p_up) : "degenerate") << "\n"
           << r.metric << ".p_com = " << (r.p_com ? shortest(*r.p_com) : "degenerate") << "\n";
    }
    return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out << text;
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

/// One seeded run of a non-sequential scenario. Artifacts are written under
/// `out_dir` when it is non-empty.
inline ScenarioResult run_scenario_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                                        const std::filesystem::path& out_dir = {}) {
    using namespace scenario_detail;
    validate(cfg);
    if (cfg.scenario.kind == ScenarioKind::sequential) {
        throw ConfigError("run_scenario_seed: use run_sequential_seed for sequential scenarios");
    }
    const ManifoldConfig& mcfg = cfg.manifold;
    const auto data = generate_dataset(data_spec(cfg, seed));
    const TrainConfig train = train_config(cfg, seed);
    const std::size_t classes = data.num_classes;

    const auto [old_train, old_classes] = old_slice(cfg, data, train.seed);
    const EncoderShape old_shape = old_encoder_shape(cfg);
    const EncoderShape new_shape = new_encoder_shape(cfg);
    const Generation old = train_old(old_train, old_shape, old_classes, mcfg, cfg.clip, train);
    AlignmentConfig off = cfg.alignment;
    off.lambda = 0.0;
    const Generation star = train_new(data.train, old, new_shape, classes, mcfg, cfg.clip, off, train);
    const Generation aligned = train_new(data.train, old, new_shape, classes, mcfg, cfg.clip, cfg.alignment, train);

    const auto oq = embed_dataset(old.model, data.query, cfg.clip, mcfg);
    const auto og = embed_dataset(old.model, data.gallery, cfg.clip, mcfg);
    const auto sq = embed_dataset(star.model, data.query, cfg.clip, mcfg);
    const auto sg = embed_dataset(star.model, data.gallery, cfg.clip, mcfg);
    const auto nq = embed_dataset(aligned.model, data.query, cfg.clip, mcfg);
    const auto ng = embed_dataset(aligned.model, data.gallery, cfg.clip, mcfg);

    ScenarioResult r;
    r.seed = seed;
    r.old_self = evaluate_retrieval(oq, og);
    r.star_self = evaluate_retrieval(sq, sg);
    r.star_cross = evaluate_retrieval(sq, og);
    r.new_self = evaluate_retrieval(nq, ng);
    r.new_cross = evaluate_retrieval(nq, og);
    for (Metric m : {Metric::cmc1, Metric::cmc5, Metric::map}) {
        r.reports.push_back(make_report(metric_name(m), metric_value(r.new_self, m), metric_value(r.new_cross, m),
                                        metric_value(r.old_self, m), metric_value(r.star_self, m)));
    }
    r.old_gallery_uncertainty = uncertainties(og);
    r.new_gallery_uncertainty = uncertainties(ng);
    for (std::size_t i = 0; i < og.size(); ++i) {
        auto& bucket = static_cast<std::size_t>(og.labels[i]) < old_classes ? r.old_seen_uncertainty
                                                                            : r.old_unseen_uncertainty;
        bucket.push_back(r.old_gallery_uncertainty[i]);
    }
    const auto ne = embed_dataset_euclidean(aligned.model, data.gallery, cfg.clip, mcfg);
    for (std::size_t i = 0; i < ne.size(); ++i) {
        r.max_new_embedding_norm = std::max(r.max_new_embedding_norm, norm(ne.row(i)));
    }

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        io::save_checkpoint({old.model, old.head, mcfg.curvature, cfg.clip.zeta(old.model.generation())},
                            out_dir / "old.ckpt");
        io::save_checkpoint({star.model, star.head, mcfg.curvature, cfg.clip.zeta(star.model.generation())},
                            out_dir / "star.ckpt");
        io::save_checkpoint({aligned.model, aligned.head, mcfg.curvature, cfg.clip.zeta(aligned.model.generation())},
                            out_dir / "new.ckpt");
        io::save_embeddings(oq, out_dir / "old_query.emb");
        io::save_embeddings(og, out_dir / "old_gallery.emb");
        io::save_embeddings(sq, out_dir / "star_query.emb");
        io::save_embeddings(sg, out_dir / "star_gallery.emb");
        io::save_embeddings(nq, out_dir / "new_query.emb");
        io::save_embeddings(ng, out_dir / "new_gallery.emb");
        write_text(out_dir / "report.txt", report_table(r.reports));
        write_text(out_dir / "report.kv", report_kv(r.reports));
    }
    return r;
}

/// Sequential updates: generation g is trained on the first (g+1)/G of the
/// classes, aligned to generation g-1. Generations from index 2 on use the
/// new-architecture encoder. The baseline chain trains every update unaligned.
inline SequentialResult run_sequential_seed(const ExperimentConfig& cfg, std::uint64_t seed, Metric metric,
                                            const std::filesystem::path& out_dir = {}) {
    using namespace scenario_detail;
    validate(cfg);
    const ManifoldConfig& mcfg = cfg.manifold;
    const auto data = generate_dataset(data_spec(cfg, seed));
    const TrainConfig train = train_config(cfg, seed);
    const std::size_t G = cfg.scenario.generations;
    const std::size_t classes = data.num_classes;
    auto classes_at = [&](std::size_t g) { return class_limit(classes, static_cast<double>(g + 1) / static_cast<double>(G)); };
    auto shape_at = [&](std::size_t g) {
        return shape(cfg, g >= 2 ? cfg.scenario.new_hidden : cfg.scenario.old_hidden);
    };

    std::vector<Generation> aligned;
    std::vector<Generation> star;
    aligned.push_back(train_old(filter_classes(data.train, classes_at(0)), shape_at(0), classes_at(0), mcfg, cfg.clip, train));
    star.push_back(aligned.front());
    AlignmentConfig off = cfg.alignment;
    off.lambda = 0.0;
    for (std::size_t g = 1; g < G; ++g) {
        const auto slice = filter_classes(data.train, classes_at(g));
        star.push_back(train_new(slice, star.back(), shape_at(g), classes_at(g), mcfg, cfg.clip, off, train));
        aligned.push_back(
            train_new(slice, aligned.back(), shape_at(g), classes_at(g), mcfg, cfg.clip, cfg.alignment, train));
    }

    std::vector<GenerationEmbeddings> ea;
    std::vector<GenerationEmbeddings> eb;
    for (std::size_t g = 0; g < G; ++g) {
        auto aq = embed_dataset(aligned[g].model, data.query, cfg.clip, mcfg);
        auto ag = embed_dataset(aligned[g].model, data.gallery, cfg.clip, mcfg);
        auto sq = embed_dataset(star[g].model, data.query, cfg.clip, mcfg);
        auto sg = embed_dataset(star[g].model, data.gallery, cfg.clip, mcfg);
        ea.push_back({aq, ag, sq, sg});
        eb.push_back({sq, sg, sq, sg});
    }
    SequentialResult r{seed, compatibility_matrix(ea, metric), compatibility_matrix(eb, metric)};
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        for (std::size_t g = 0; g < G; ++g) {
            io::save_checkpoint({aligned[g].model, aligned[g].head, mcfg.curvature, cfg.clip.zeta(static_cast<int>(g))},
                                out_dir / ("gen" + std::to_string(g) + ".ckpt"));
        }
    }
    return r;
}

/// Runs `fn(seed)` for each seed, concurrently when more than one core is available.
template <class Fn>
auto map_seeds(const std::vector<std::uint64_t>& seeds, Fn fn) {
    using R = decltype(fn(seeds.front()));
    std::vector<R> out;
    out.reserve(seeds.size());
    if (std::thread::hardware_concurrency() > 1 && seeds.size() > 1) {
        std::vector<std::future<R>> jobs;
        for (auto s : seeds) {
            jobs.push_back(std::async(std::launch::async, fn, s));
        }
        for (auto& j : jobs) {
            out.push_back(j.get());
        }
    } else {
        for (auto s : seeds) {
            out.push_back(fn(s));
        }
    }
    return out;
}

/// Runs every configured seed; artifacts go to <output>/seed_<s>/.
inline std::vector<ScenarioResult> run_scenario(const ExperimentConfig& cfg, bool write_artifacts = true) {
    validate(cfg);
    const auto root = output_root(cfg.output_dir);
    return map_seeds(cfg.seeds, [&](std::uint64_t s) {
        return run_scenario_seed(cfg, s, write_artifacts ? root / ("seed_" + std::to_string(s)) : std::filesystem::path{});
    });
}

inline std::vector<SequentialResult> run_sequential(const ExperimentConfig& cfg, Metric metric,
                                                    bool write_artifacts = true) {
    validate(cfg);
    const auto root = output_root(cfg.output_dir);
    return map_seeds(cfg.seeds, [&](std::uint64_t s) {
        return run_sequential_seed(cfg, s, metric,
                                   write_artifacts ? root / ("seed_" + std::to_string(s)) : std::filesystem::path{});
    });
}

/// Median over seeds of a report field; degenerate runs are skipped.
template <class Getter>
std::optional<double> median_over(const std::vector<ScenarioResult>& runs, Metric m, Getter get) {
    std::vector<double> v;
    for (const auto& r : runs) {
        if (auto x = get(r.report(m))) {
            v.push_back(*x);
        }
    }
    if (v.empty()) {
        return std::nullopt;
    }
    return median(v);
}

inline std::optional<double> median_p_com(const std::vector<ScenarioResult>& runs, Metric m) {
    return median_over(runs, m, [](const CompatReport& r) { return r.p_com; });
}

inline std::optional<double> median_p_up(const std::vector<ScenarioResult>& runs, Metric m) {
    return median_over(runs, m, [](const CompatReport& r) { return r.p_up; });
}

/// Seed-median summary of one configuration within a sweep.
struct SweepRow {
    std::string value;
    double self_cmc1 = 0.0;
    double cross_cmc1 = 0.0;
    double self_map = 0.0;
    double cross_map = 0.0;
    std::optional<double> p_com_cmc1;
    std::optional<double> p_up_cmc1;
};

struct SweepResult {
    std::string key;
    std::vector<SweepRow> rows;
};

inline SweepResult run_sweep(const ExperimentConfig& base, const std::string& key, const std::vector<std::string>& values,
                             bool write_artifacts = false) {
    SweepResult out{key, {}};
    for (const auto& v : values) {
        ExperimentConfig cfg = base;
        set_config_value(cfg, key, v);
        cfg.output_dir = (std::filesystem::path(base.output_dir) / (key + "=" + v)).string();
        const auto runs = run_scenario(cfg, write_artifacts);
        SweepRow row;
        row.value = v;
        std::vector<double> s1, c1, sm, cm;
        for (const auto& r : runs) {
            s1.push_back(r.new_self.cmc1);
            c1.push_back(r.new_cross.cmc1);
            sm.push_back(r.new_self.map);
            cm.push_back(r.new_cross.map);
        }
        row.self_cmc1 = median(s1);
        row.cross_cmc1 = median(c1);
        row.self_map = median(sm);
        row.cross_map = median(cm);
        row.p_com_cmc1 = median_p_com(runs, Metric::cmc1);
        row.p_up_cmc1 = median_p_up(runs, Metric::cmc1);
        out.rows.push_back(std::move(row));
    }
    return out;
}

inline std::string sweep_table(const SweepResult& s) {
    using scenario_detail::format_optional;
    using scenario_detail::format_value;
    std::ostringstream os;
    os << std::left << std::setw(22) << s.key << std::right << std::setw(11) << "self@1" << std::setw(11) << "cross@1"
       << std::setw(11) << "self_mAP" << std::setw(11) << "cross_mAP" << std::setw(12) << "P_up@1" << std::setw(12)
       << "P_com@1" << "\n";
    for (const auto& r : s.rows) {
        os << std::left << std::setw(22) << r.value << std::right << std::setw(11) << format_value(r.self_cmc1)
           << std::setw(11) << format_value(r.cross_cmc1) << std::setw(11) << format_value(r.self_map) << std::setw(11)
           << format_value(r.cross_map) << std::setw(12) << format_optional(r.p_up_cmc1) << std::setw(12)
           << format_optional(r.p_com_cmc1) << "\n";
    }
    return os.str();
}

inline std::string matrix_table(const CompatMatrix& m) {
    std::ostringstream os;
    os << "# " << m.metric << " compatibility; row = query generation, column = gallery generation\n";
    os << std::setw(8) << "q\\g";
    for (int t : m.generation_tags) {
        os << std::setw(10) << ("gen" + std::to_string(t));
    }
    os << "\n";
    for (std::size_t i = 0; i < m.n; ++i) {
        os << std::setw(8) << ("gen" + std::to_string(m.generation_tags[i]));
        for (std::size_t j = 0; j < m.n; ++j) {
            os << std::setw(10) << scenario_detail::format_value(m.at(i, j));
        }
        os << "\n";
    }
    return os.str();
}

/// Element-wise median of same-shaped matrices.
inline CompatMatrix median_matrix(const std::vector<CompatMatrix>& ms) {
    if (ms.empty()) {
        throw InvalidArgument("median_matrix: no matrices");
    }
    CompatMatrix out = ms.front();
    for (std::size_t k = 0; k < out.values.size(); ++k) {
        std::vector<double> v;
        for (const auto& m : ms) {
            v.push_back(m.values.at(k));
        }
        out.values[k] = median(v);
    }
    return out;
}

} // namespace hbct
