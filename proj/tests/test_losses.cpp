#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "hbct/losses.hpp"
#include "hbct/rng.hpp"

using namespace hbct;

namespace {

std::vector<double> gaussian(Rng& rng, std::size_t n, double scale = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) {
        x = scale * rng.normal();
    }
    return v;
}

std::vector<Point> random_batch(Rng& rng, std::size_t n, const ManifoldConfig& cfg, double scale = 0.6) {
    std::vector<Point> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(expm_origin(gaussian(rng, cfg.dim, scale), cfg));
    }
    return out;
}

// Geodesic distance straight from the definition.
double oracle_distance(const Point& x, const Point& y, double k) {
    double inner = -x.time * y.time;
    for (std::size_t i = 0; i < x.space.size(); ++i) {
        inner += x.space[i] * y.space[i];
    }
    return std::acosh(std::max(1.0, -k * inner)) / std::sqrt(k);
}

double oracle_logsumexp(const std::vector<double>& v) {
    double m = v[0];
    for (double x : v) {
        m = std::max(m, x);
    }
    double s = 0.0;
    for (double x : v) {
        s += std::exp(x - m);
    }
    return m + std::log(s);
}

double oracle_infonce(const std::vector<Point>& a, const std::vector<Point>& b, double k, double tau) {
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        std::vector<double> logits;
        for (std::size_t j = 0; j < b.size(); ++j) {
            logits.push_back(-oracle_distance(a[i], b[j], k) / tau);
        }
        total += oracle_logsumexp(logits) - logits[i];
    }
    return total / static_cast<double>(a.size());
}

double oracle_rince(const std::vector<Point>& a, const std::vector<Point>& b, const std::vector<double>& q, double k,
                    double tau, double beta) {
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < b.size(); ++j) {
            s += std::exp(-oracle_distance(a[i], b[j], k) / tau);
        }
        const double dii = oracle_distance(a[i], b[i], k);
        total += (std::pow(beta * s, q[i]) - std::exp(-q[i] * dii / tau)) / q[i];
    }
    return total / static_cast<double>(a.size());
}

// Angle at h_o of the triangle (origin, h_o, h_n) via the hyperbolic law of cosines.
double oracle_exterior(const Point& ho, const Point& hn, double k) {
    const double sk = std::sqrt(k);
    const Point o{1.0 / sk, std::vector<double>(ho.space.size(), 0.0)};
    const double b = sk * oracle_distance(o, ho, k);
    const double c = sk * oracle_distance(ho, hn, k);
    const double a = sk * oracle_distance(o, hn, k);
    const double cos_angle = (std::cosh(b) * std::cosh(c) - std::cosh(a)) / (std::sinh(b) * std::sinh(c));
    return std::numbers::pi - std::acos(std::clamp(cos_angle, -1.0, 1.0));
}

} // namespace

TEST(AlignmentConfig, Validation) {
    AlignmentConfig a;
    EXPECT_NO_THROW(a.validate());
    a.tau = 0.0;
    EXPECT_THROW(a.validate(), InvalidArgument);
    a = {};
    a.beta = 1.5;
    EXPECT_THROW(a.validate(), InvalidArgument);
    a = {};
    a.lambda = -0.1;
    EXPECT_THROW(a.validate(), InvalidArgument);
    a = {};
    a.q_mode = QMode::fixed;
    a.q = 0.0;
    EXPECT_THROW(a.validate(), InvalidArgument);
}

TEST(Mlr, LogitsMatchClosedForm) {
    Rng rng(1);
    for (double k : {0.5, 1.0, 2.0}) {
        const ManifoldConfig cfg{k, 3};
        const MlrHead<double> head{4, 3, gaussian(rng, 12)};
        const auto h = expm_origin(gaussian(rng, 3), cfg);
        const auto logits = mlr_logits(h, head, cfg);
        ASSERT_EQ(logits.size(), 4u);
        for (std::size_t c = 0; c < 4; ++c) {
            const auto w = head.row(c);
            double wn = 0.0, wh = 0.0;
            for (std::size_t i = 0; i < 3; ++i) {
                wn += w[i] * w[i];
                wh += w[i] * h.space[i];
            }
            wn = std::sqrt(wn);
            const double dist = std::abs(std::asinh(std::sqrt(k) * wh / wn)) / std::sqrt(k);
            const double expected = (wh >= 0 ? 1.0 : -1.0) * wn * dist;
            EXPECT_NEAR(logits[c], expected, 1e-12);
        }
    }
}

TEST(Mlr, DegenerateRowGivesZeroLogit) {
    const ManifoldConfig cfg{1.0, 2};
    const MlrHead<double> head{2, 2, {0.0, 0.0, 1.0, 0.0}};
    const auto logits = mlr_logits(expm_origin(std::vector<double>{0.3, 0.1}, cfg), head, cfg);
    EXPECT_EQ(logits[0], 0.0);
    EXPECT_GT(logits[1], 0.0);
}

TEST(Mlr, OriginIsOnEveryHyperplane) {
    const ManifoldConfig cfg{1.0, 2};
    const MlrHead<double> head{3, 2, {1.0, 2.0, -1.0, 0.5, 3.0, 3.0}};
    for (double l : mlr_logits(origin(cfg), head, cfg)) {
        EXPECT_EQ(l, 0.0);
    }
    EXPECT_NEAR(base_loss(origin(cfg), 1, head, cfg), std::log(3.0), 1e-15);
}

TEST(CrossEntropy, UniformAndStable) {
    const std::vector<double> same(5, 2.0);
    EXPECT_NEAR(cross_entropy(std::span<const double>(same), 3), std::log(5.0), 1e-15);
    const std::vector<double> big{1000.0, 999.0, 0.0};
    const double ce = cross_entropy(std::span<const double>(big), 1);
    EXPECT_TRUE(std::isfinite(ce));
    EXPECT_NEAR(ce, oracle_logsumexp(big) - 999.0, 1e-12);
    EXPECT_THROW(cross_entropy(std::span<const double>(big), 3), InvalidArgument);
}

TEST(BaseLoss, LabelOutOfRangeThrows) {
    const ManifoldConfig cfg{1.0, 2};
    const MlrHead<double> head{2, 2, {1.0, 0.0, 0.0, 1.0}};
    EXPECT_THROW(base_loss(origin(cfg), 2, head, cfg), InvalidArgument);
    const MlrHead<double> wrong{2, 3, std::vector<double>(6, 1.0)};
    EXPECT_THROW(mlr_logits(origin(cfg), wrong, cfg), InvalidArgument);
}

TEST(Aperture, ClosedFormAndSaturation) {
    const ManifoldConfig cfg{1.0, 2};
    const Point h = lift(std::vector<double>{0.4, 0.0}, cfg);
    EXPECT_NEAR(aperture(h, cfg, 0.1), std::numbers::pi / 6, 1e-12);
    EXPECT_EQ(aperture(lift(std::vector<double>{0.1, 0.05}, cfg), cfg, 0.1), std::numbers::pi / 2);
    EXPECT_EQ(aperture(origin(cfg), cfg, 0.1), std::numbers::pi / 2);
    // Wider cones for less certain (smaller) embeddings.
    EXPECT_GT(aperture(lift(std::vector<double>{0.5, 0.0}, cfg), cfg, 0.1),
              aperture(lift(std::vector<double>{2.0, 0.0}, cfg), cfg, 0.1));
}

TEST(ExteriorAngle, MatchesLawOfCosines) {
    Rng rng(4);
    for (double k : {0.5, 1.0, 2.0}) {
        const ManifoldConfig cfg{k, 3};
        for (int i = 0; i < 200; ++i) {
            const auto ho = expm_origin(gaussian(rng, 3), cfg);
            const auto hn = expm_origin(gaussian(rng, 3), cfg);
            EXPECT_NEAR(exterior_angle(ho, hn, cfg), oracle_exterior(ho, hn, k), 1e-7);
        }
    }
}

TEST(ExteriorAngle, RadialContinuationIsInsideCone) {
    const ManifoldConfig cfg{1.0, 2};
    const auto ho = expm_origin(std::vector<double>{0.6, 0.8}, cfg);
    const auto hn = expm_origin(std::vector<double>{1.2, 1.6}, cfg);
    EXPECT_NEAR(exterior_angle(ho, hn, cfg), 0.0, 1e-6);
    EXPECT_EQ(entailment_loss(hn, ho, cfg, 0.1), 0.0);
    // Pointing back toward the origin is maximally outside.
    const auto back = expm_origin(std::vector<double>{0.3, 0.4}, cfg);
    EXPECT_NEAR(exterior_angle(ho, back, cfg), std::numbers::pi, 1e-6);
    EXPECT_THROW(exterior_angle(origin(cfg), hn, cfg), NumericalDomainError);
}

TEST(Entailment, HingeOfAngleGap) {
    Rng rng(6);
    const ManifoldConfig cfg{1.0, 3};
    for (int i = 0; i < 100; ++i) {
        const auto ho = expm_origin(gaussian(rng, 3), cfg);
        const auto hn = expm_origin(gaussian(rng, 3), cfg);
        const double expected = std::max(0.0, oracle_exterior(ho, hn, 1.0) - aperture(ho, cfg, 0.1));
        EXPECT_NEAR(entailment_loss(hn, ho, cfg, 0.1), expected, 1e-7);
    }
}

TEST(PairDistance, Kinds) {
    Rng rng(7);
    for (double k : {0.5, 1.0, 2.0}) {
        const ManifoldConfig cfg{k, 3};
        const auto x = expm_origin(gaussian(rng, 3), cfg);
        const auto y = expm_origin(gaussian(rng, 3), cfg);
        const double inner = lorentz_inner(x, y);
        EXPECT_NEAR(pair_distance(x, y, cfg, DistanceKind::geodesic), oracle_distance(x, y, k), 1e-12);
        EXPECT_DOUBLE_EQ(pair_distance(x, y, cfg, DistanceKind::lorentz_inner), -inner);
        EXPECT_NEAR(pair_distance(x, y, cfg, DistanceKind::squared_lorentz), -2.0 / k - 2.0 * inner, 1e-12);
        EXPECT_NEAR(pair_distance(x, x, cfg, DistanceKind::squared_lorentz), 0.0, 1e-12);
    }
}

TEST(Rince, MatchesOracle) {
    Rng rng(9);
    for (double k : {0.5, 1.0}) {
        const ManifoldConfig cfg{k, 4};
        for (int trial = 0; trial < 20; ++trial) {
            const auto a = random_batch(rng, 8, cfg);
            const auto b = random_batch(rng, 8, cfg);
            std::vector<double> u;
            for (const auto& p : b) {
                u.push_back(uncertainty(p, cfg));
            }
            AlignmentConfig adaptive;
            const auto q = rince_exponents(u, adaptive);
            EXPECT_NEAR(contrastive_loss(a, b, u, cfg, adaptive), oracle_rince(a, b, q, k, 0.5, 0.01), 1e-12);
            AlignmentConfig fixed;
            fixed.q_mode = QMode::fixed;
            fixed.q = 0.3;
            fixed.tau = 0.8;
            EXPECT_NEAR(contrastive_loss(a, b, u, cfg, fixed),
                        oracle_rince(a, b, std::vector<double>(8, 0.3), k, 0.8, 0.01), 1e-12);
        }
    }
}

TEST(Rince, AdaptiveExponentIsClampedUncertainty) {
    AlignmentConfig a;
    const std::vector<double> u{-0.5, 0.0, 0.2, 0.9, 1.5};
    const auto q = rince_exponents(u, a);
    EXPECT_EQ(q, (std::vector<double>{1e-3, 1e-3, 0.2, 0.9, 1.0}));
    a.q_mode = QMode::fixed;
    a.q = 0.25;
    EXPECT_EQ(rince_exponents(u, a), std::vector<double>(5, 0.25));
}

TEST(Rince, ApproachesInfoNceAsQShrinks) {
    Rng rng(10);
    const ManifoldConfig cfg{1.0, 4};
    const auto a = random_batch(rng, 16, cfg);
    const auto b = random_batch(rng, 16, cfg);
    const std::vector<double> u(16, 0.5);
    AlignmentConfig align;
    align.q_mode = QMode::fixed;
    align.beta = 1.0;
    const double info = infonce_loss(a, b, cfg, align);
    double prev = INFINITY;
    for (double q : {0.5, 0.1, 0.01, 0.001}) {
        align.q = q;
        const double gap = std::abs(contrastive_loss(a, b, u, cfg, align) - info);
        EXPECT_LT(gap, prev);
        prev = gap;
    }
    EXPECT_LT(prev, 1e-2);
    // With beta < 1 the small-q limit is shifted by log(beta).
    align.beta = 0.01;
    align.q = 1e-5;
    EXPECT_NEAR(contrastive_loss(a, b, u, cfg, align), info + std::log(0.01), 1e-3);
}

TEST(Rince, BatchChecks) {
    const ManifoldConfig cfg{1.0, 2};
    const std::vector<Point> one{origin(cfg)};
    const std::vector<double> u{1.0};
    EXPECT_THROW(contrastive_loss(one, one, u, cfg, AlignmentConfig{}), InvalidArgument);
    const std::vector<Point> two{origin(cfg), origin(cfg)};
    EXPECT_THROW(contrastive_loss(two, one, u, cfg, AlignmentConfig{}), InvalidArgument);
    EXPECT_THROW(contrastive_loss(two, two, u, cfg, AlignmentConfig{}), InvalidArgument);
}

TEST(InfoNce, MatchesOracleAndUniformCase) {
    Rng rng(12);
    const ManifoldConfig cfg{1.0, 3};
    AlignmentConfig align;
    for (int trial = 0; trial < 50; ++trial) {
        const auto a = random_batch(rng, 6, cfg);
        const auto b = random_batch(rng, 6, cfg);
        EXPECT_NEAR(infonce_loss(a, b, cfg, align), oracle_infonce(a, b, 1.0, 0.5), 1e-10);
    }
    const std::vector<Point> same(7, expm_origin(std::vector<double>{0.1, 0.2, 0.3}, cfg));
    EXPECT_NEAR(infonce_loss(same, same, cfg, align), std::log(7.0), 1e-12);
}

TEST(MeanDistortion, HandSummed) {
    Rng rng(13);
    const ManifoldConfig cfg{1.0, 3};
    AlignmentConfig align;
    const auto a = random_batch(rng, 5, cfg);
    const auto b = random_batch(rng, 5, cfg);
    double s = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
        s += oracle_distance(a[i], b[i], 1.0);
    }
    EXPECT_NEAR(mean_distortion_loss(a, b, cfg, align), s / 5.0, 1e-12);
    EXPECT_EQ(mean_distortion_loss(a, a, cfg, align), 0.0);
}

TEST(TotalLoss, ComposesTerms) {
    Rng rng(14);
    const ManifoldConfig cfg{1.0, 3};
    const auto a = random_batch(rng, 6, cfg);
    const OldBatch<double> old{random_batch(rng, 6, cfg), std::vector<double>(6, 0.4)};
    const MlrHead<double> head{3, 3, gaussian(rng, 9)};
    const std::vector<int> labels{0, 1, 2, 0, 1, 2};
    AlignmentConfig align;
    const double base = mean_base_loss(a, labels, head, cfg);
    const double entail = mean_entailment_loss(a, old.points, cfg, align.epsilon);
    const double contrast = contrastive_loss(a, old.points, old.uncertainties, cfg, align);
    EXPECT_NEAR(total_loss(a, labels, old, head, cfg, align), base + 0.3 * (entail + contrast), 1e-12);

    align.lambda_entail = 0.0;
    EXPECT_NEAR(total_loss(a, labels, old, head, cfg, align), base + 0.3 * contrast, 1e-12);

    align.lambda = 0.0;
    EXPECT_EQ(total_loss(a, labels, old, head, cfg, align), base);

    align = {};
    align.contrast = ContrastKind::mean_distortion;
    EXPECT_NEAR(total_loss(a, labels, old, head, cfg, align),
                base + 0.3 * (entail + mean_distortion_loss(a, old.points, cfg, align)), 1e-12);
}

TEST(TotalLoss, LambdaZeroIgnoresMalformedOldBatch) {
    const ManifoldConfig cfg{1.0, 2};
    const std::vector<Point> a{origin(cfg), origin(cfg)};
    const MlrHead<double> head{2, 2, {1.0, 0.0, 0.0, 1.0}};
    const std::vector<int> labels{0, 1};
    AlignmentConfig align;
    align.lambda = 0.0;
    EXPECT_NO_THROW(total_loss(a, labels, OldBatch<double>{}, head, cfg, align));
    const std::vector<int> bad{0, -1};
    EXPECT_THROW(mean_base_loss(a, bad, head, cfg), InvalidArgument);
}
