// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Tolerances and sample counts are fixed here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "../gradcheck.hpp"
#include "hbct/hbct.hpp"

using namespace hbct;

namespace {

constexpr double kManifoldTol = 1e-9;
constexpr double kGradTol = 1e-4;
constexpr double kAnchorTol = 1e-12;
constexpr double kRadialTol = 1e-9;
constexpr double kRinceFinalGap = 1e-2;
constexpr double kPaperPCom = 0.495;
constexpr double kPaperPComTol = 0.01;
constexpr double kMinPUp = -0.05;
constexpr double kRetrievalTol = 1e-12;

constexpr std::size_t kManifoldPoints = 10000;
constexpr std::size_t kGradInstances = 100;
constexpr std::size_t kRetrievalInstances = 1000;
constexpr std::size_t kRinceBatch = 32;

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double budget_s; // runtime limit; 0 = none
    std::function<Outcome()> run;
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "degenerate"; }

std::vector<double> random_ball(Rng& rng, std::size_t dim, double radius) {
    std::vector<double> z(dim);
    for (double& v : z) {
        v = rng.normal();
    }
    const double n = norm(z);
    const double r = radius * rng.uniform();
    for (double& v : z) {
        v *= r / n;
    }
    return z;
}

// 1. On-manifold, exp/log round trip and metric axioms.
Outcome manifold_suite() {
    Rng rng(101);
    double worst_constraint = 0.0, worst_roundtrip = 0.0, worst_self = 0.0, worst_sym = 0.0, worst_tri = 0.0;
    double min_dist = 0.0;
    const std::size_t per_k = kManifoldPoints / 4;
    for (double k : {0.1, 0.5, 1.0, 1.5}) {
        const ManifoldConfig cfg{k, 6};
        std::vector<Point> pts;
        for (std::size_t i = 0; i < per_k; ++i) {
            const auto z = random_ball(rng, cfg.dim, 5.0);
            const auto p = expm_origin(z, cfg);
            worst_constraint = std::max(worst_constraint, std::abs(lorentz_inner(p, p) + 1.0 / k));
            const auto back = logm_origin(p, cfg);
            double err = std::abs(back.time);
            for (std::size_t j = 0; j < z.size(); ++j) {
                err = std::max(err, std::abs(back.space[j] - z[j]));
            }
            worst_roundtrip = std::max(worst_roundtrip, err);
            worst_self = std::max(worst_self, geodesic_distance(p, p, cfg));
            pts.push_back(p);
        }
        for (std::size_t i = 0; i + 2 < pts.size(); ++i) {
            const auto& x = pts[i];
            const auto& y = pts[i + 1];
            const auto& w = pts[i + 2];
            const double dxy = geodesic_distance(x, y, cfg);
            const double dyx = geodesic_distance(y, x, cfg);
            const double dyw = geodesic_distance(y, w, cfg);
            const double dxw = geodesic_distance(x, w, cfg);
            min_dist = std::min(min_dist, dxy);
            worst_sym = std::max(worst_sym, std::abs(dxy - dyx));
            worst_tri = std::max(worst_tri, dxw - (dxy + dyw));
        }
    }
    const bool pass = worst_constraint <= kManifoldTol && worst_roundtrip <= kManifoldTol && worst_self <= kManifoldTol &&
                      worst_sym <= kManifoldTol && worst_tri <= kManifoldTol && min_dist >= 0.0;
    return {pass, "constraint " + fmt(worst_constraint) + ", round trip " + fmt(worst_roundtrip) + ", d(x,x) " +
                      fmt(worst_self) + ", asymmetry " + fmt(worst_sym) + ", triangle excess " + fmt(worst_tri)};
}

// 2. Tape gradients of every loss against central differences.
Outcome gradient_oracle() {
    using gradcheck::Loss;
    bool pass = true;
    std::string detail;
    for (Loss l : {Loss::base, Loss::entailment, Loss::rince_adaptive, Loss::rince_fixed, Loss::infonce,
                   Loss::mean_distortion, Loss::total}) {
        const auto rep = gradcheck::check(l, kGradInstances, 7000 + static_cast<std::uint64_t>(l));
        pass = pass && rep.checked == kGradInstances && rep.worst <= kGradTol;
        detail += (detail.empty() ? "" : "; ") + rep.name + " " + fmt(rep.worst) + " (" +
                  std::to_string(rep.checked) + " checked, " + std::to_string(rep.skipped) + " near boundaries)";
    }
    return {pass, detail};
}

// 3. Closed-form anchors.
Outcome anchors() {
    const ManifoldConfig cfg{1.0, 3};
    const double u = uncertainty(expm_origin(std::vector<double>{0.0, 0.6, 0.8}, cfg), cfg);
    const double u_err = std::abs(u - (1.0 - std::tanh(1.0)));
    const auto ho = lift(std::vector<double>{0.0, 0.4, 0.0}, cfg);
    const double a_err = std::abs(aperture(ho, cfg, 0.1) - std::numbers::pi / 6.0);
    Rng rng(3);
    double r_err = 0.0;
    for (double k : {0.1, 0.5, 1.0, 1.5}) {
        const ManifoldConfig kc{k, 4};
        for (int i = 0; i < 1000; ++i) {
            const auto z = random_ball(rng, 4, 5.0);
            r_err = std::max(r_err, std::abs(geodesic_distance(origin(kc), expm_origin(z, kc), kc) - norm(z)));
        }
    }
    return {u_err <= kAnchorTol && a_err <= kAnchorTol && r_err <= kRadialTol,
            "uncertainty " + fmt(u_err) + ", aperture " + fmt(a_err) + ", radial distance " + fmt(r_err)};
}

// 4. Fixed-q RINCE tends to InfoNCE as q -> 0 (with beta = 1, where the limit carries no log beta offset).
Outcome rince_limit() {
    Rng rng(44);
    const ManifoldConfig cfg{1.0, 8};
    std::vector<Point> a, b;
    for (std::size_t i = 0; i < kRinceBatch; ++i) {
        a.push_back(expm_origin(random_ball(rng, 8, 1.0), cfg));
        b.push_back(expm_origin(random_ball(rng, 8, 1.0), cfg));
    }
    AlignmentConfig align;
    align.beta = 1.0;
    align.q_mode = QMode::fixed;
    const std::vector<double> u(kRinceBatch, 0.5);
    const double info = infonce_loss(a, b, cfg, align);
    std::vector<double> gaps;
    for (double q : {0.5, 0.1, 0.01, 0.001}) {
        align.q = q;
        gaps.push_back(std::abs(contrastive_loss(a, b, u, cfg, align) - info));
    }
    bool monotone = true;
    for (std::size_t i = 1; i < gaps.size(); ++i) {
        monotone = monotone && gaps[i] < gaps[i - 1];
    }
    std::string detail = "gaps";
    for (double g : gaps) {
        detail += " " + fmt(g);
    }
    return {monotone && gaps.back() <= kRinceFinalGap, detail};
}

// 5. Compatibility arithmetic on published retrieval numbers.
Outcome p_com_arithmetic() {
    const double v = p_com(0.572, 0.425, 0.722);
    return {std::abs(v - kPaperPCom) <= kPaperPComTol, "P_com = " + fmt(v) + " vs printed " + fmt(kPaperPCom)};
}

std::vector<ScenarioResult> ext_class_runs() {
    static const std::vector<ScenarioResult> runs = [] {
        ExperimentConfig cfg;
        cfg.scenario.kind = ScenarioKind::ext_class;
        return run_scenario(cfg, false);
    }();
    return runs;
}

// 6. Desk-scale extended-class experiment.
Outcome ext_class_experiment() {
    const auto runs = ext_class_runs();
    std::vector<double> baseline;
    for (const auto& r : runs) {
        baseline.push_back(p_com(r.star_cross.cmc1, r.old_self.cmc1, r.star_self.cmc1));
    }
    const auto hbct = median_p_com(runs, Metric::cmc1);
    const double base = median(baseline);
    const auto up = median_p_up(runs, Metric::cmc1);
    const bool pass = hbct && up && *hbct > base && *up >= kMinPUp;
    return {pass, "median P_com@1 HBCT " + fmt(hbct) + " vs unaligned " + fmt(base) + ", median P_up@1 " + fmt(up)};
}

// 7. Entailment ablation on the new-architecture scenario.
Outcome entailment_ablation() {
    ExperimentConfig full;
    full.scenario.kind = ScenarioKind::new_arch;
    ExperimentConfig ablated = full;
    ablated.alignment.lambda_entail = 0.0;
    const auto with = median_p_com(run_scenario(full, false), Metric::cmc1);
    const auto without = median_p_com(run_scenario(ablated, false), Metric::cmc1);
    return {with && without && *with >= *without,
            "median P_com@1 full " + fmt(with) + " vs without entailment " + fmt(without)};
}

// 8. Three-generation compatibility matrix.
Outcome sequential_matrix() {
    ExperimentConfig cfg;
    cfg.scenario.kind = ScenarioKind::sequential;
    cfg.scenario.generations = 3;
    std::vector<SequentialResult> runs;
    try {
        runs = run_sequential(cfg, Metric::cmc1, false);
    } catch (const DegenerateBaseline& e) {
        return {false, std::string("degenerate anchors: ") + e.what()};
    }
    bool finite = true;
    std::vector<CompatMatrix> aligned, baseline;
    for (const auto& r : runs) {
        for (double v : r.aligned.values) {
            finite = finite && std::isfinite(v);
        }
        for (double v : r.baseline.values) {
            finite = finite && std::isfinite(v);
        }
        aligned.push_back(r.aligned);
        baseline.push_back(r.baseline);
    }
    const auto ma = median_matrix(aligned);
    const auto mb = median_matrix(baseline);
    const bool pass = finite && ma.n == 3 && ma.mean_sub_diagonal() > mb.mean_sub_diagonal();
    return {pass, std::string(finite ? "all entries finite" : "non-finite entries") +
                      ", mean sub-diagonal of the seed-median matrix: HBCT " + fmt(ma.mean_sub_diagonal()) +
                      " vs unaligned " + fmt(mb.mean_sub_diagonal())};
}

// 9. Old-model uncertainty is higher on classes it never saw.
Outcome uncertainty_split() {
    const auto runs = ext_class_runs();
    std::size_t ok = 0;
    std::string detail;
    for (const auto& r : runs) {
        const double unseen = median(r.old_unseen_uncertainty);
        const double seen = median(r.old_seen_uncertainty);
        ok += unseen > seen ? 1 : 0;
        detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(r.seed) + " unseen " +
                  fmt(unseen) + " seen " + fmt(seen);
    }
    return {ok == runs.size() && !runs.empty(), std::to_string(ok) + "/" + std::to_string(runs.size()) + " seeds: " + detail};
}

// Independent scoring: positions come from pairwise comparisons, not a sort.
RetrievalMetrics counting_metrics(const EmbeddingSet& q, const EmbeddingSet& g, bool same) {
    RetrievalMetrics m;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        std::vector<double> d(g.size());
        for (std::size_t j = 0; j < g.size(); ++j) {
            d[j] = geodesic_distance(q.row(i), g.row(j), ManifoldConfig{g.curvature, g.dim});
        }
        std::vector<std::size_t> pos;
        for (std::size_t r = 0; r < g.size(); ++r) {
            if ((same && r == i) || g.labels[r] != q.labels[i]) {
                continue;
            }
            std::size_t p = 0;
            for (std::size_t j = 0; j < g.size(); ++j) {
                if (!(same && j == i) && (d[j] < d[r] || (d[j] == d[r] && j < r))) {
                    ++p;
                }
            }
            pos.push_back(p);
        }
        if (pos.empty()) {
            ++m.map_excluded;
            continue;
        }
        const std::size_t first = *std::min_element(pos.begin(), pos.end());
        m.cmc1 += first < 1 ? 1.0 : 0.0;
        m.cmc5 += first < 5 ? 1.0 : 0.0;
        double ap = 0.0;
        for (std::size_t p : pos) {
            ap += static_cast<double>(std::count_if(pos.begin(), pos.end(), [&](std::size_t o) { return o <= p; })) /
                  static_cast<double>(p + 1);
        }
        m.map += ap / static_cast<double>(pos.size());
        ++counted;
    }
    m.cmc1 /= static_cast<double>(q.size());
    m.cmc5 /= static_cast<double>(q.size());
    m.map = counted == 0 ? 0.0 : m.map / static_cast<double>(counted);
    return m;
}

// Repeatedly picks the smallest (distance, index) among the remaining rows.
std::vector<std::size_t> scan_ranking(std::span<const double> query, const EmbeddingSet& g,
                                      std::optional<std::size_t> exclude) {
    const ManifoldConfig cfg{g.curvature, g.dim};
    std::vector<double> d(g.size());
    for (std::size_t j = 0; j < g.size(); ++j) {
        d[j] = geodesic_distance(query, g.row(j), cfg);
    }
    std::vector<bool> taken(g.size(), false);
    if (exclude) {
        taken[*exclude] = true;
    }
    std::vector<std::size_t> out;
    for (;;) {
        std::optional<std::size_t> best;
        for (std::size_t j = 0; j < g.size(); ++j) {
            if (!taken[j] && (!best || d[j] < d[*best])) {
                best = j;
            }
        }
        if (!best) {
            return out;
        }
        taken[*best] = true;
        out.push_back(*best);
    }
}

EmbeddingSet random_embeddings(Rng& rng, std::size_t n, std::size_t dim, double k, int classes, bool duplicates) {
    EmbeddingSet s{Geometry::lorentz, k, 0, dim, {}, {}};
    const ManifoldConfig cfg{k, dim};
    for (std::size_t i = 0; i < n; ++i) {
        Point p = duplicates && i > 0 && rng.uniform() < 0.3 ? from_ambient(s.row(rng.below(i)))
                                                              : expm_origin(random_ball(rng, dim, 3.0), cfg);
        s.coords.push_back(p.time);
        s.coords.insert(s.coords.end(), p.space.begin(), p.space.end());
        s.labels.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(classes))));
    }
    return s;
}

// 10. Production ranking and metrics against brute force.
Outcome retrieval_oracle() {
    Rng rng(10);
    std::size_t ranking_mismatch = 0;
    double worst = 0.0;
    std::size_t skipped = 0;
    const double curvatures[] = {0.1, 0.5, 1.0, 1.5};
    for (std::size_t t = 0; t < kRetrievalInstances; ++t) {
        const double k = curvatures[rng.below(4)];
        const std::size_t dim = 1 + rng.below(6);
        const int classes = 1 + static_cast<int>(rng.below(6));
        const bool dup = rng.uniform() < 0.5;
        const auto g = random_embeddings(rng, 2 + rng.below(30), dim, k, classes, dup);
        const bool same = rng.uniform() < 0.25;
        const auto q = same ? g : random_embeddings(rng, 1 + rng.below(12), dim, k, classes, dup);
        const EmbeddingSet& qs = same ? g : q;
        for (std::size_t i = 0; i < qs.size(); ++i) {
            std::optional<std::size_t> ex;
            if (same) {
                ex = i;
            }
            if (retrieve(qs.row(i), g, ex) != scan_ranking(qs.row(i), g, ex)) {
                ++ranking_mismatch;
            }
        }
        const auto want = counting_metrics(qs, g, same);
        if (want.map_excluded == qs.size()) {
            ++skipped; // no query has a relevant item; mAP is undefined
            continue;
        }
        const auto got = evaluate_retrieval(qs, g);
        worst = std::max({worst, std::abs(got.cmc1 - want.cmc1), std::abs(got.cmc5 - want.cmc5),
                          std::abs(got.map - want.map)});
        if (got.map_excluded != want.map_excluded) {
            worst = std::max(worst, 1.0);
        }
    }
    return {ranking_mismatch == 0 && worst <= kRetrievalTol,
            std::to_string(ranking_mismatch) + " ranking mismatches, worst metric gap " + fmt(worst) + " (" +
                std::to_string(skipped) + " instances without any relevant pair)"};
}

} // namespace

// Optional arguments select criteria by number; all run by default.
int main(int argc, char** argv) {
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) {
        selected.push_back(std::atoi(argv[i]));
    }
    const std::vector<Criterion> criteria{
        {1, "manifold invariants", 10.0, manifold_suite},
        {2, "gradient oracle", 60.0, gradient_oracle},
        {3, "closed-form anchors", 0.0, anchors},
        {4, "RINCE to InfoNCE limit", 0.0, rince_limit},
        {5, "P_com arithmetic on published numbers", 0.0, p_com_arithmetic},
        {6, "extended-class experiment", 300.0, ext_class_experiment},
        {7, "entailment ablation, new architecture", 300.0, entailment_ablation},
        {8, "sequential compatibility matrix", 600.0, sequential_matrix},
        {9, "uncertainty split on unseen classes", 0.0, uncertainty_split},
        {10, "retrieval oracle equivalence", 0.0, retrieval_oracle},
    };
    int failures = 0;
    std::size_t ran = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) {
            continue;
        }
        ++ran;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.budget_s > 0.0 && secs > c.budget_s) {
            o.pass = false;
            o.detail += "; over the " + fmt(c.budget_s) + " s budget";
        }
        failures += o.pass ? 0 : 1;
        std::printf("%s  criterion %d  %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                    o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failures, ran);
    return failures == 0 ? 0 : 1;
}
