// Command-line front end: dataset generation, single-model training and
// evaluation, end-to-end scenarios, sequential matrices and sweeps.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical or training
// failure, 1 anything else (I/O, bad files).

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "hbct/hbct.hpp"

namespace fs = std::filesystem;
using namespace hbct;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct Options {
    std::string config_file;
    std::vector<std::string> sets;
    std::map<std::string, std::string> flags;
};

ExperimentConfig resolve(const Options& o) {
    ExperimentConfig cfg;
    if (!o.config_file.empty()) {
        cfg = load_config(o.config_file);
    }
    for (const auto& [key, value] : o.flags) {
        if (!value.empty()) {
            set_config_value(cfg, key, value);
        }
    }
    for (const auto& kv : o.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("--set expects key=value, got '" + kv + "'");
        }
        set_config_value(cfg, config_detail::trim(kv.substr(0, eq)), config_detail::trim(kv.substr(eq + 1)));
    }
    validate(cfg);
    return cfg;
}

void write_csv(const Dataset& d, const fs::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open " + path.string());
    }
    out << "label";
    for (std::size_t k = 0; k < d.input_dim; ++k) {
        out << ",x" << k;
    }
    out << "\n" << std::setprecision(17);
    for (std::size_t i = 0; i < d.size(); ++i) {
        out << d.labels[i];
        for (double v : d.row(i)) {
            out << "," << v;
        }
        out << "\n";
    }
}

fs::path in_output(const ExperimentConfig& cfg, const std::string& name) {
    const fs::path p(name);
    if (p.is_absolute() || p.has_parent_path()) {
        return p;
    }
    const auto root = output_root(cfg.output_dir);
    fs::create_directories(root);
    return root / p;
}

/// Clip policy and manifold reproducing the geometry a checkpoint was trained with.
std::pair<ClipPolicy, ManifoldConfig> geometry_of(const io::Checkpoint& ck) {
    return {ClipPolicy{ck.zeta, 0.0}, ManifoldConfig{ck.curvature, ck.model.shape().output_dim}};
}

Generation as_generation(const io::Checkpoint& ck) { return {ck.model, ck.head, {}}; }

io::Checkpoint to_checkpoint(const Generation& g, const ExperimentConfig& cfg) {
    return {g.model, g.head, cfg.manifold.curvature, cfg.clip.zeta(g.model.generation())};
}

void print_metrics(const std::string& label, const RetrievalMetrics& m) {
    std::cout << std::fixed << std::setprecision(4) << label << "  cmc@1 " << m.cmc1 << "  cmc@5 " << m.cmc5
              << "  mAP " << m.map << "\n";
}

void print_medians(const std::vector<ScenarioResult>& runs) {
    std::cout << "median over " << runs.size() << " seeds:\n";
    for (Metric m : {Metric::cmc1, Metric::cmc5, Metric::map}) {
        const auto pc = median_p_com(runs, m);
        const auto pu = median_p_up(runs, m);
        std::cout << "  " << std::left << std::setw(6) << metric_name(m) << std::right << "  P_com "
                  << (pc ? config_detail::format(*pc) : "degenerate") << "  P_up "
                  << (pu ? config_detail::format(*pu) : "degenerate") << "\n";
    }
}

Metric parse_metric(const std::string& s) {
    for (Metric m : {Metric::cmc1, Metric::cmc5, Metric::map}) {
        if (metric_name(m) == s) {
            return m;
        }
    }
    throw ConfigError("unknown metric '" + s + "' (cmc@1|cmc@5|mAP)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hyperbolic backward-compatible training on synthetic retrieval data"};
    app.require_subcommand(1);
    Options opt;
    app.add_option("--config", opt.config_file, "key = value configuration file")->check(CLI::ExistingFile);
    app.add_option("--set", opt.sets, "override a configuration key (key=value), repeatable");
    for (const auto& f : config_fields()) {
        app.add_option("--" + f.key, opt.flags[f.key], f.help)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }

    auto* gen = app.add_subcommand("generate", "write the synthetic train/query/gallery splits as CSV");
    std::string gen_dir = "data";
    gen->add_option("--dir", gen_dir, "destination directory (under the output directory when relative)");

    auto* told = app.add_subcommand("train-old", "train generation 0 on the scenario's old slice");
    std::string old_out = "old.ckpt";
    told->add_option("--out", old_out, "checkpoint path");

    auto* tnew = app.add_subcommand("train-new", "train the next generation against an old checkpoint");
    std::string new_old, new_out = "new.ckpt";
    tnew->add_option("--old", new_old, "old checkpoint")->required();
    tnew->add_option("--out", new_out, "checkpoint path");

    auto* eval = app.add_subcommand("evaluate", "embed query and gallery splits and score retrieval");
    std::string eval_query, eval_gallery, eval_qemb, eval_gemb;
    eval->add_option("--query-model", eval_query, "checkpoint embedding the queries");
    eval->add_option("--gallery-model", eval_gallery, "checkpoint embedding the gallery (defaults to the query model)");
    eval->add_option("--query-emb", eval_qemb, "stored query embeddings");
    eval->add_option("--gallery-emb", eval_gemb, "stored gallery embeddings");

    auto* scen = app.add_subcommand("scenario", "end-to-end old / unaligned / aligned run over all seeds");
    auto* mat = app.add_subcommand("matrix", "sequential updates and compatibility matrices");
    std::string mat_metric = "cmc@1";
    mat->add_option("--metric", mat_metric, "cmc@1|cmc@5|mAP");
    auto* sweep = app.add_subcommand("sweep", "vary one configuration key and tabulate seed medians");
    std::string sweep_key = "alignment.lambda";
    std::vector<std::string> sweep_values{"0", "0.1", "0.3", "1"};
    sweep->add_option("--key", sweep_key, "configuration key to vary");
    sweep->add_option("--values", sweep_values, "values to try")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        const ExperimentConfig cfg = resolve(opt);
        if (gen->parsed()) {
            const auto data = generate_dataset(cfg.data);
            const auto dir = in_output(cfg, gen_dir);
            fs::create_directories(dir);
            write_csv(data.train, dir / "train.csv");
            write_csv(data.query, dir / "query.csv");
            write_csv(data.gallery, dir / "gallery.csv");
            std::cout << "wrote " << data.train.size() << "/" << data.query.size() << "/" << data.gallery.size()
                      << " rows to " << dir.string() << "\n";
        } else if (told->parsed()) {
            const auto data = generate_dataset(cfg.data);
            const auto slice = old_slice(cfg, data, cfg.train.seed);
            const auto g = train_old(slice.data, old_encoder_shape(cfg), slice.classes, cfg.manifold, cfg.clip, cfg.train);
            const auto path = in_output(cfg, old_out);
            io::save_checkpoint(to_checkpoint(g, cfg), path);
            std::cout << "final loss " << g.epoch_loss.back() << "; wrote " << path.string() << "\n";
        } else if (tnew->parsed()) {
            const auto data = generate_dataset(cfg.data);
            const auto old = io::load_checkpoint(new_old);
            if (old.curvature != cfg.manifold.curvature) {
                throw ConfigError("old checkpoint curvature differs from manifold.K");
            }
            const auto g = train_new(data.train, as_generation(old), new_encoder_shape(cfg), data.num_classes,
                                     cfg.manifold, cfg.clip, cfg.alignment, cfg.train);
            const auto path = in_output(cfg, new_out);
            io::save_checkpoint(to_checkpoint(g, cfg), path);
            std::cout << "final loss " << g.epoch_loss.back() << "; wrote " << path.string() << "\n";
        } else if (eval->parsed()) {
            EmbeddingSet q, g;
            if (!eval_qemb.empty() || !eval_gemb.empty()) {
                if (eval_qemb.empty() || eval_gemb.empty()) {
                    throw ConfigError("evaluate: --query-emb and --gallery-emb go together");
                }
                q = io::load_embeddings(eval_qemb);
                g = io::load_embeddings(eval_gemb);
            } else {
                if (eval_query.empty()) {
                    throw ConfigError("evaluate: need --query-model or stored embeddings");
                }
                const auto data = generate_dataset(cfg.data);
                const auto qm = io::load_checkpoint(eval_query);
                const auto gm = eval_gallery.empty() ? qm : io::load_checkpoint(eval_gallery);
                const auto [qp, qc] = geometry_of(qm);
                const auto [gp, gc] = geometry_of(gm);
                q = embed_dataset(qm.model, data.query, qp, qc);
                g = embed_dataset(gm.model, data.gallery, gp, gc);
            }
            print_metrics("gen" + std::to_string(q.generation) + " query vs gen" + std::to_string(g.generation) +
                              " gallery",
                          evaluate_retrieval(q, g));
        } else if (scen->parsed()) {
            if (cfg.scenario.kind == ScenarioKind::sequential) {
                throw ConfigError("scenario: use the matrix verb for sequential runs");
            }
            const auto runs = run_scenario(cfg);
            for (const auto& r : runs) {
                std::cout << "seed " << r.seed << "\n" << report_table(r.reports);
            }
            print_medians(runs);
            ReportSet rs;
            rs.runs = runs;
            emit_plots(rs, output_root(cfg.output_dir) / "plots");
        } else if (mat->parsed()) {
            const auto runs = run_sequential(cfg, parse_metric(mat_metric));
            ReportSet rs;
            rs.sequential = runs;
            std::vector<CompatMatrix> a, b;
            for (const auto& r : runs) {
                a.push_back(r.aligned);
                b.push_back(r.baseline);
            }
            std::cout << "aligned (seed median)\n"
                      << matrix_table(median_matrix(a)) << "unaligned baseline (seed median)\n"
                      << matrix_table(median_matrix(b));
            emit_plots(rs, output_root(cfg.output_dir) / "plots");
        } else if (sweep->parsed()) {
            const auto s = run_sweep(cfg, sweep_key, sweep_values);
            std::cout << sweep_table(s);
            ReportSet rs;
            rs.sweeps.push_back(s);
            emit_plots(rs, output_root(cfg.output_dir) / "plots");
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const TrainingFailure& e) {
        std::cerr << "training failure at step " << e.step() << ": " << e.what() << "\n";
        return kExitNumeric;
    } catch (const NumericalDomainError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
