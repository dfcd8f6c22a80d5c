#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "hbct/autodiff.hpp"
#include "hbct/rng.hpp"

using namespace hbct;
using ad::Tape;
using ad::Var;

namespace {

double central_difference(const std::function<double(double)>& f, double x, double h = 1e-6) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Derivative of a unary Var function at x via the tape.
double tape_derivative(const std::function<Var(const Var&)>& f, double x) {
    Tape t;
    const Var v = t.variable(x);
    const Var y = f(v);
    return t.backward(y)[v];
}

} // namespace

TEST(Tape, RecordsVariablesAndConstants) {
    Tape t;
    const Var a = t.variable(2.0);
    const Var c = 3.0;
    EXPECT_FALSE(a.is_constant());
    EXPECT_TRUE(c.is_constant());
    const Var y = a * c + c;
    EXPECT_DOUBLE_EQ(y.value(), 9.0);
    const auto g = t.backward(y);
    EXPECT_DOUBLE_EQ(g[a], 3.0);
    EXPECT_DOUBLE_EQ(g[c], 0.0);
}

TEST(Tape, ConstantArithmeticStaysOffTape) {
    Tape t;
    const Var a = 2.0;
    const Var b = 5.0;
    const Var y = exp(a * b);
    EXPECT_TRUE(y.is_constant());
    EXPECT_EQ(t.size(), 0u);
}

TEST(Tape, ProductRuleAndSharing) {
    Tape t;
    const Var x = t.variable(1.5);
    const Var y = t.variable(-0.5);
    const Var f = x * x * y + x / y - y;
    const auto g = t.backward(f);
    // df/dx = 2xy + 1/y, df/dy = x^2 - x/y^2 - 1
    EXPECT_NEAR(g[x], 2 * 1.5 * -0.5 + 1 / -0.5, 1e-14);
    EXPECT_NEAR(g[y], 1.5 * 1.5 - 1.5 / 0.25 - 1.0, 1e-14);
}

TEST(Tape, BackwardOnConstantIsZero) {
    Tape t;
    const Var x = t.variable(1.0);
    const auto g = t.backward(Var(4.0));
    EXPECT_EQ(g[x], 0.0);
}

TEST(Tape, MixingTapesThrows) {
    Tape a;
    Tape b;
    const Var x = a.variable(1.0);
    const Var y = b.variable(2.0);
    EXPECT_THROW(x + y, InvalidArgument);
    EXPECT_THROW(b.backward(x), InvalidArgument);
}

TEST(Tape, ClearResets) {
    Tape t;
    const Var x = t.variable(1.0);
    (void)(x * x);
    EXPECT_GT(t.size(), 1u);
    EXPECT_GT(t.edge_count(), 0u);
    t.clear();
    EXPECT_EQ(t.size(), 0u);
    EXPECT_EQ(t.edge_count(), 0u);
}

TEST(Elementary, DerivativesMatchFiniteDifferences) {
    struct Case {
        const char* name;
        std::function<Var(const Var&)> f;
        std::function<double(double)> g;
        double x;
    };
    const std::vector<Case> cases{
        {"exp", [](const Var& v) { return exp(v); }, [](double v) { return std::exp(v); }, 0.7},
        {"log", [](const Var& v) { return log(v); }, [](double v) { return std::log(v); }, 1.3},
        {"sqrt", [](const Var& v) { return sqrt(v); }, [](double v) { return std::sqrt(v); }, 2.2},
        {"tanh", [](const Var& v) { return tanh(v); }, [](double v) { return std::tanh(v); }, -0.4},
        {"cosh", [](const Var& v) { return cosh(v); }, [](double v) { return std::cosh(v); }, 0.9},
        {"sinh", [](const Var& v) { return sinh(v); }, [](double v) { return std::sinh(v); }, -1.1},
        {"asinh", [](const Var& v) { return asinh(v); }, [](double v) { return std::asinh(v); }, 2.5},
        {"acosh", [](const Var& v) { return safe_acosh(v); }, [](double v) { return std::acosh(v); }, 1.7},
        {"asin", [](const Var& v) { return safe_asin(v); }, [](double v) { return std::asin(v); }, 0.3},
        {"acos", [](const Var& v) { return safe_acos(v); }, [](double v) { return std::acos(v); }, -0.6},
        {"pow", [](const Var& v) { return pow(v, 0.37); }, [](double v) { return std::pow(v, 0.37); }, 1.9},
        {"hinge", [](const Var& v) { return hinge(v); }, [](double v) { return v > 0 ? v : 0.0; }, 0.4},
    };
    for (const auto& c : cases) {
        const double fd = central_difference(c.g, c.x);
        EXPECT_NEAR(tape_derivative(c.f, c.x), fd, 1e-7 * std::max(1.0, std::abs(fd))) << c.name;
    }
}

TEST(Elementary, ClampPolicy) {
    // Inside the tolerance band the value is clamped and the partial stays finite.
    EXPECT_EQ(safe_acosh(Var(1.0 - 1e-9)).value(), 0.0);
    EXPECT_TRUE(std::isfinite(tape_derivative([](const Var& v) { return safe_acosh(v); }, 1.0)));
    EXPECT_TRUE(std::isfinite(tape_derivative([](const Var& v) { return safe_asin(v); }, 1.0)));
    EXPECT_TRUE(std::isfinite(tape_derivative([](const Var& v) { return safe_acos(v); }, -1.0)));
    EXPECT_THROW(safe_acosh(Var(0.5)), NumericalDomainError);
    EXPECT_THROW(safe_asin(Var(1.1)), NumericalDomainError);
    EXPECT_THROW(safe_acos(Var(-1.01)), NumericalDomainError);
    EXPECT_THROW(log(Var(0.0)), NumericalDomainError);
    EXPECT_THROW(sqrt(Var(0.0)), NumericalDomainError);
}

TEST(Elementary, HingeSubgradientAtZero) {
    EXPECT_EQ(tape_derivative([](const Var& v) { return hinge(v); }, 0.0), 0.0);
    EXPECT_EQ(tape_derivative([](const Var& v) { return hinge(v); }, -1.0), 0.0);
    EXPECT_EQ(tape_derivative([](const Var& v) { return hinge(v); }, 1e-300), 1.0);
}

TEST(Elementary, NonFiniteResultsThrow) {
    Tape t;
    const Var x = t.variable(1000.0);
    EXPECT_THROW(exp(x), NumericalDomainError);
    const Var z = t.variable(0.0);
    EXPECT_THROW(Var(1.0) / z, NumericalDomainError);
}

TEST(Fused, DotNormSum) {
    Tape t;
    const std::vector<double> av{1.0, -2.0, 0.5};
    const std::vector<double> bv{0.3, 0.7, -1.5};
    const auto a = t.variables(av);
    const auto b = t.variables(bv);
    const Var d = dot(a, b);
    EXPECT_NEAR(d.value(), 0.3 - 1.4 - 0.75, 1e-15);
    const auto gd = t.backward(d);
    EXPECT_EQ(gd.wrt(a), bv);
    EXPECT_EQ(gd.wrt(b), av);

    const Var n = norm(a);
    const double nv = std::sqrt(1.0 + 4.0 + 0.25);
    EXPECT_NEAR(n.value(), nv, 1e-15);
    const auto gn = t.backward(n);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_NEAR(gn[a[i]], av[i] / nv, 1e-15);
    }

    const Var s = sum(b);
    const auto gs = t.backward(s);
    for (const Var& v : b) {
        EXPECT_EQ(gs[v], 1.0);
    }

    const Var dm = dot(std::span<const Var>(a), std::span<const double>(bv));
    EXPECT_EQ(t.backward(dm).wrt(a), bv);
}

TEST(Fused, NormOfZeroHasZeroSubgradient) {
    Tape t;
    const auto a = t.variables(std::vector<double>{0.0, 0.0});
    const Var n = norm(a);
    EXPECT_EQ(n.value(), 0.0);
    const auto g = t.backward(n);
    EXPECT_EQ(g[a[0]], 0.0);
    EXPECT_EQ(g[a[1]], 0.0);
}

TEST(Fused, LengthMismatchThrows) {
    Tape t;
    const auto a = t.variables(std::vector<double>{1.0, 2.0});
    const auto b = t.variables(std::vector<double>{1.0});
    EXPECT_THROW(dot(a, b), InvalidArgument);
}

TEST(Composite, GradientOfRandomExpressionMatchesFiniteDifferences) {
    Rng rng(17);
    auto f = [](const auto& x, const auto& y, const auto& z) {
        using std::exp;
        using std::log;
        using std::tanh;
        return tanh(x * y) + log(1.0 + exp(z - x)) * y / (1.0 + z * z);
    };
    for (int trial = 0; trial < 100; ++trial) {
        const double x = rng.uniform(-2, 2), y = rng.uniform(-2, 2), z = rng.uniform(-2, 2);
        Tape t;
        const Var vx = t.variable(x), vy = t.variable(y), vz = t.variable(z);
        const auto g = t.backward(f(vx, vy, vz));
        const double h = 1e-6;
        EXPECT_NEAR(g[vx], (f(x + h, y, z) - f(x - h, y, z)) / (2 * h), 1e-7);
        EXPECT_NEAR(g[vy], (f(x, y + h, z) - f(x, y - h, z)) / (2 * h), 1e-7);
        EXPECT_NEAR(g[vz], (f(x, y, z + h) - f(x, y, z - h)) / (2 * h), 1e-7);
    }
}
