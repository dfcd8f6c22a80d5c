#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "hbct/dataset.hpp"
#include "hbct/encoder.hpp"
#include "hbct/errors.hpp"
#include "hbct/losses.hpp"
#include "hbct/manifold.hpp"
#include "hbct/training.hpp"

/**
 * @file config.hpp
 *
 * Experiment configuration and its text form: one `section.key = value` per
 * line, `#` starts a comment line. Lists are comma separated. Doubles are
 * written in shortest round-trip form so parse(serialize(cfg)) == cfg.
 */

namespace hbct {

enum class ScenarioKind { ext_data, ext_class, new_arch, both, sequential };

struct ScenarioSpec {
    ScenarioKind kind = ScenarioKind::ext_class;
    double old_fraction = 0.3;    ///< share of training rows for the old model (ext_data)
    double class_fraction = 0.5;  ///< share of classes for the old model (ext_class, both)
    std::size_t generations = 3;  ///< sequential: number of model generations
    std::vector<std::size_t> old_hidden;
    std::vector<std::size_t> new_hidden{32};

    void validate() const {
        if (!(old_fraction > 0.0 && old_fraction <= 1.0) || !(class_fraction > 0.0 && class_fraction <= 1.0)) {
            throw InvalidArgument("scenario: fractions must lie in (0, 1]");
        }
        if (kind == ScenarioKind::sequential && generations < 2) {
            throw InvalidArgument("scenario: sequential updates need at least two generations");
        }
    }

    bool operator==(const ScenarioSpec&) const = default;
};

struct ExperimentConfig {
    ManifoldConfig manifold;
    AlignmentConfig alignment;
    ClipPolicy clip;
    TrainConfig train;
    SyntheticDatasetSpec data;
    ScenarioSpec scenario;
    std::string output_dir = "hbct_out";
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};

    bool operator==(const ExperimentConfig&) const = default;
};

inline void validate(const ExperimentConfig& cfg) {
    try {
        cfg.manifold.validate();
        cfg.alignment.validate();
        cfg.clip.zeta(0);
        cfg.train.validate();
        cfg.data.validate();
        cfg.scenario.validate();
        if (cfg.seeds.empty()) {
            throw InvalidArgument("config: at least one seed is required");
        }
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
}

namespace config_detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::string format(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
    T v{};
    const auto* end = text.data() + text.size();
    const auto res = std::from_chars(text.data(), end, v);
    if (res.ec != std::errc() || res.ptr != end) {
        throw ConfigError("config: invalid value '" + text + "' for " + key);
    }
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1") {
        return true;
    }
    if (text == "false" || text == "0") {
        return false;
    }
    throw ConfigError("config: invalid boolean '" + text + "' for " + key);
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(parse_number<T>(key, item));
        }
    }
    return out;
}

template <class T>
std::string format_list(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out += (i ? "," : "") + std::to_string(v[i]);
    }
    return out;
}

template <class E>
struct EnumName {
    E value;
    const char* name;
};

inline constexpr EnumName<DistanceKind> kDistanceNames[] = {
    {DistanceKind::geodesic, "geodesic"},
    {DistanceKind::lorentz_inner, "lorentz_inner"},
    {DistanceKind::squared_lorentz, "squared_lorentz"}};
inline constexpr EnumName<ContrastKind> kContrastNames[] = {
    {ContrastKind::rince, "rince"}, {ContrastKind::infonce, "infonce"}, {ContrastKind::mean_distortion, "mean_distortion"}};
inline constexpr EnumName<QMode> kQModeNames[] = {{QMode::adaptive, "adaptive"}, {QMode::fixed, "fixed"}};
inline constexpr EnumName<ScenarioKind> kScenarioNames[] = {{ScenarioKind::ext_data, "ext_data"},
                                                            {ScenarioKind::ext_class, "ext_class"},
                                                            {ScenarioKind::new_arch, "new_arch"},
                                                            {ScenarioKind::both, "both"},
                                                            {ScenarioKind::sequential, "sequential"}};

template <class E, std::size_t N>
E parse_enum(const std::string& key, const std::string& text, const EnumName<E> (&names)[N]) {
    for (const auto& n : names) {
        if (text == n.name) {
            return n.value;
        }
    }
    std::string allowed;
    for (const auto& n : names) {
        allowed += std::string(allowed.empty() ? "" : "|") + n.name;
    }
    throw ConfigError("config: invalid value '" + text + "' for " + key + " (expected " + allowed + ")");
}

template <class E, std::size_t N>
std::string format_enum(E v, const EnumName<E> (&names)[N]) {
    for (const auto& n : names) {
        if (n.value == v) {
            return n.name;
        }
    }
    return "?";
}

} // namespace config_detail

/// One configurable key with its accessors.
struct ConfigField {
    std::string key;
    std::string help;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

inline const std::vector<ConfigField>& config_fields() {
    using namespace config_detail;
    // clang-format off
#define HBCT_REAL(k, member, h) ConfigField{k, h, \
        [](const ExperimentConfig& c) { return format(c.member); }, \
        [](ExperimentConfig& c, const std::string& v) { c.member = parse_number<double>(k, v); }}
#define HBCT_SIZE(k, member, h) ConfigField{k, h, \
        [](const ExperimentConfig& c) { return std::to_string(c.member); }, \
        [](ExperimentConfig& c, const std::string& v) { c.member = parse_number<std::size_t>(k, v); }}
#define HBCT_BOOL(k, member, h) ConfigField{k, h, \
        [](const ExperimentConfig& c) { return std::string(c.member ? "true" : "false"); }, \
        [](ExperimentConfig& c, const std::string& v) { c.member = parse_bool(k, v); }}
#define HBCT_ENUM(k, member, table, h) ConfigField{k, h, \
        [](const ExperimentConfig& c) { return format_enum(c.member, table); }, \
        [](ExperimentConfig& c, const std::string& v) { c.member = parse_enum(k, v, table); }}
#define HBCT_LIST(k, member, type, h) ConfigField{k, h, \
        [](const ExperimentConfig& c) { return format_list(c.member); }, \
        [](ExperimentConfig& c, const std::string& v) { c.member = parse_list<type>(k, v); }}
    static const std::vector<ConfigField> fields{
        HBCT_REAL("manifold.K", manifold.curvature, "curvature magnitude K (space has curvature -K)"),
        HBCT_SIZE("manifold.dim", manifold.dim, "embedding dimension d"),
        HBCT_REAL("alignment.lambda", alignment.lambda, "alignment weight"),
        HBCT_REAL("alignment.lambda_entail", alignment.lambda_entail, "entailment weight inside the alignment term"),
        HBCT_REAL("alignment.tau", alignment.tau, "contrastive temperature"),
        HBCT_REAL("alignment.beta", alignment.beta, "RINCE beta"),
        HBCT_REAL("alignment.epsilon", alignment.epsilon, "entailment cone aperture constant"),
        HBCT_ENUM("alignment.q_mode", alignment.q_mode, kQModeNames, "RINCE exponent: adaptive|fixed"),
        HBCT_REAL("alignment.q", alignment.q, "fixed RINCE exponent"),
        HBCT_ENUM("alignment.distance", alignment.distance, kDistanceNames, "geodesic|lorentz_inner|squared_lorentz"),
        HBCT_ENUM("alignment.contrast", alignment.contrast, kContrastNames, "rince|infonce|mean_distortion"),
        HBCT_REAL("clip.zeta_old", clip.zeta_old, "clipping threshold of generation 0"),
        HBCT_REAL("clip.zeta_step", clip.zeta_step, "clipping threshold increase per generation"),
        HBCT_SIZE("train.epochs", train.epochs, "training epochs"),
        HBCT_SIZE("train.batch_size", train.batch_size, "mini-batch size"),
        HBCT_REAL("train.lr", train.learning_rate, "base learning rate"),
        HBCT_REAL("train.momentum", train.momentum, "SGD momentum"),
        HBCT_REAL("train.weight_decay", train.weight_decay, "weight decay"),
        HBCT_SIZE("train.seed", train.seed, "training seed (overridden per run by seeds)"),
        HBCT_BOOL("train.cosine", train.cosine_schedule, "cosine annealing of the learning rate"),
        HBCT_BOOL("train.init_from_old", train.init_from_old, "initialize new generations from old weights"),
        HBCT_SIZE("data.num_classes", data.num_classes, "number of synthetic classes"),
        HBCT_SIZE("data.samples_per_class", data.samples_per_class, "samples per class"),
        HBCT_SIZE("data.input_dim", data.input_dim, "input feature dimension"),
        HBCT_REAL("data.spread", data.cluster_spread, "per-coordinate cluster standard deviation"),
        HBCT_REAL("data.center_scale", data.class_center_scale, "radius of the class centers"),
        HBCT_SIZE("data.seed", data.seed, "dataset seed (overridden per run by seeds)"),
        HBCT_ENUM("scenario.kind", scenario.kind, kScenarioNames, "ext_data|ext_class|new_arch|both|sequential"),
        HBCT_REAL("scenario.old_fraction", scenario.old_fraction, "training share for the old model (ext_data)"),
        HBCT_REAL("scenario.class_fraction", scenario.class_fraction, "class share for the old model"),
        HBCT_SIZE("scenario.generations", scenario.generations, "generations in a sequential run"),
        HBCT_LIST("scenario.old_hidden", scenario.old_hidden, std::size_t, "hidden widths of the old encoder"),
        HBCT_LIST("scenario.new_hidden", scenario.new_hidden, std::size_t, "hidden widths of the new-architecture encoder"),
        ConfigField{"output.dir", "output directory (relative paths resolve under $HBCT_OUTPUT_ROOT)",
                    [](const ExperimentConfig& c) { return c.output_dir; },
                    [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; }},
        HBCT_LIST("seeds", seeds, std::uint64_t, "seeds, one run each"),
    };
#undef HBCT_REAL
#undef HBCT_SIZE
#undef HBCT_BOOL
#undef HBCT_ENUM
#undef HBCT_LIST
    // clang-format on
    return fields;
}

inline void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& f : config_fields()) {
        if (f.key == key) {
            f.set(cfg, value);
            return;
        }
    }
    throw ConfigError("config: unknown key '" + key + "'");
}

inline std::string serialize_config(const ExperimentConfig& cfg) {
    std::string out;
    for (const auto& f : config_fields()) {
        out += f.key + " = " + f.get(cfg) + "\n";
    }
    return out;
}

inline ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = {}) {
    std::stringstream ss{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto t = config_detail::trim(line);
        if (t.empty() || t[0] == '#') {
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        set_config_value(base, config_detail::trim(t.substr(0, eq)), config_detail::trim(t.substr(eq + 1)));
    }
    return base;
}

inline ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {}) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

} // namespace hbct
