#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hbct/errors.hpp"
#include "hbct/numeric.hpp"

/**
 * @file autodiff.hpp
 *
 * Reverse-mode differentiation over a dynamically recorded scalar graph.
 *
 * Every operation on a `Var` appends one node to its `Tape`. A node stores its
 * primal value and, for each parent, the local partial derivative. Vector
 * reductions (`dot`, `norm`, `sum`) are fused into a single node with many
 * parents. `Tape::backward` accumulates adjoints in reverse recording order.
 *
 * A default-constructed or double-constructed `Var` is a constant: it belongs
 * to no tape and contributes no edges.
 */

namespace hbct::ad {

class Tape;

class Var {
public:
    Var() = default;
    Var(double value) : value_(value) {} // NOLINT: constants convert implicitly

    double value() const noexcept { return value_; }
    Tape* tape() const noexcept { return tape_; }
    std::uint32_t index() const noexcept { return index_; }
    bool is_constant() const noexcept { return tape_ == nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::uint32_t index, double value) : tape_(tape), index_(index), value_(value) {}

    Tape* tape_ = nullptr;
    std::uint32_t index_ = 0;
    double value_ = 0.0;
};

/// Adjoints of every node on a tape with respect to one output.
class Gradients {
public:
    explicit Gradients(std::vector<double> adjoints) : adjoints_(std::move(adjoints)) {}

    double operator[](const Var& v) const { return v.is_constant() ? 0.0 : adjoints_.at(v.index()); }

    std::vector<double> wrt(std::span<const Var> vars) const {
        std::vector<double> out(vars.size());
        for (std::size_t i = 0; i < vars.size(); ++i) {
            out[i] = (*this)[vars[i]];
        }
        return out;
    }

    std::span<const double> adjoints() const noexcept { return adjoints_; }

private:
    std::vector<double> adjoints_;
};

class Tape {
public:
    Tape() { edge_begin_.push_back(0); }

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// New leaf node (a differentiable input).
    Var variable(double value) {
        check_finite(value, "variable");
        return finish(value);
    }

    std::vector<Var> variables(std::span<const double> values) {
        std::vector<Var> out;
        out.reserve(values.size());
        for (double v : values) {
            out.push_back(variable(v));
        }
        return out;
    }

    std::size_t size() const noexcept { return values_.size(); }
    std::size_t edge_count() const noexcept { return parents_.size(); }

    void clear() {
        values_.clear();
        parents_.clear();
        partials_.clear();
        edge_begin_.assign(1, 0);
    }

    Gradients backward(const Var& output) const {
        std::vector<double> adj(values_.size(), 0.0);
        if (output.is_constant()) {
            return Gradients(std::move(adj));
        }
        if (output.tape() != this) {
            throw InvalidArgument("backward: output recorded on a different tape");
        }
        adj[output.index()] = 1.0;
        for (std::size_t i = output.index() + 1; i-- > 0;) {
            const double a = adj[i];
            if (a == 0.0) {
                continue;
            }
            for (std::uint32_t e = edge_begin_[i]; e < edge_begin_[i + 1]; ++e) {
                adj[parents_[e]] += partials_[e] * a;
            }
        }
        return Gradients(std::move(adj));
    }

    // Recording interface used by the operator overloads. A node is built by
    // zero or more `edge` calls followed by `finish`.
    void edge(const Var& parent, double partial) {
        if (parent.is_constant()) {
            return;
        }
        if (parent.tape() != this) {
            throw InvalidArgument("autodiff: operands recorded on different tapes");
        }
        parents_.push_back(parent.index());
        partials_.push_back(partial);
    }

    Var finish(double value) {
        values_.push_back(value);
        edge_begin_.push_back(static_cast<std::uint32_t>(parents_.size()));
        return Var(this, static_cast<std::uint32_t>(values_.size() - 1), value);
    }

    static void check_finite(double value, const char* op) {
        if (!std::isfinite(value)) {
            throw NumericalDomainError(std::string("autodiff: non-finite result in ") + op);
        }
    }

private:
    std::vector<double> values_;
    std::vector<std::uint32_t> edge_begin_;
    std::vector<std::uint32_t> parents_;
    std::vector<double> partials_;
};

namespace detail {

inline Tape* common_tape(const Var& a, const Var& b) {
    if (a.is_constant()) {
        return b.tape();
    }
    if (!b.is_constant() && a.tape() != b.tape()) {
        throw InvalidArgument("autodiff: operands recorded on different tapes");
    }
    return a.tape();
}

inline Var unary(const Var& x, double value, double partial, const char* op) {
    Tape::check_finite(value, op);
    if (x.is_constant()) {
        return Var(value);
    }
    Tape& t = *x.tape();
    t.edge(x, partial);
    return t.finish(value);
}

inline Var binary(const Var& a, const Var& b, double value, double pa, double pb, const char* op) {
    Tape::check_finite(value, op);
    Tape* t = common_tape(a, b);
    if (t == nullptr) {
        return Var(value);
    }
    t->edge(a, pa);
    t->edge(b, pb);
    return t->finish(value);
}

template <class Range>
Tape* tape_of(const Range& vars) {
    Tape* t = nullptr;
    for (const Var& v : vars) {
        if (!v.is_constant()) {
            if (t != nullptr && t != v.tape()) {
                throw InvalidArgument("autodiff: operands recorded on different tapes");
            }
            t = v.tape();
        }
    }
    return t;
}

} // namespace detail

inline Var operator+(const Var& a, const Var& b) {
    return detail::binary(a, b, a.value() + b.value(), 1.0, 1.0, "add");
}
inline Var operator-(const Var& a, const Var& b) {
    return detail::binary(a, b, a.value() - b.value(), 1.0, -1.0, "sub");
}
inline Var operator*(const Var& a, const Var& b) {
    return detail::binary(a, b, a.value() * b.value(), b.value(), a.value(), "mul");
}
inline Var operator/(const Var& a, const Var& b) {
    const double inv = 1.0 / b.value();
    return detail::binary(a, b, a.value() * inv, inv, -a.value() * inv * inv, "div");
}
inline Var operator-(const Var& x) { return detail::unary(x, -x.value(), -1.0, "neg"); }

inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }
inline Var& operator/=(Var& a, const Var& b) { return a = a / b; }

inline double value_of(const Var& x) noexcept { return x.value(); }

inline Var exp(const Var& x) {
    const double v = std::exp(x.value());
    return detail::unary(x, v, v, "exp");
}

inline Var log(const Var& x) {
    if (!(x.value() > 0.0)) {
        throw NumericalDomainError("autodiff: log of non-positive value");
    }
    return detail::unary(x, std::log(x.value()), 1.0 / x.value(), "log");
}

inline Var sqrt(const Var& x) {
    if (!(x.value() > 0.0)) {
        throw NumericalDomainError("autodiff: sqrt requires a positive argument");
    }
    const double v = std::sqrt(x.value());
    return detail::unary(x, v, 0.5 / v, "sqrt");
}

inline Var tanh(const Var& x) {
    const double v = std::tanh(x.value());
    return detail::unary(x, v, 1.0 - v * v, "tanh");
}

inline Var cosh(const Var& x) { return detail::unary(x, std::cosh(x.value()), std::sinh(x.value()), "cosh"); }
inline Var sinh(const Var& x) { return detail::unary(x, std::sinh(x.value()), std::cosh(x.value()), "sinh"); }

inline Var asinh(const Var& x) {
    return detail::unary(x, std::asinh(x.value()), 1.0 / std::sqrt(1.0 + x.value() * x.value()), "asinh");
}

/// acosh with the manifold clamp policy: value at max(x, 1), partial at max(x, 1 + 1e-12).
inline Var safe_acosh(const Var& x) {
    const double arg = numeric::acosh_arg(x.value());
    const double p = numeric::acosh_partial_arg(x.value());
    return detail::unary(x, std::acosh(arg), 1.0 / std::sqrt(p * p - 1.0), "acosh");
}

inline Var safe_asin(const Var& x) {
    const double arg = numeric::unit_arg(x.value(), "asin");
    const double p = numeric::unit_partial_arg(x.value());
    return detail::unary(x, std::asin(arg), 1.0 / std::sqrt(1.0 - p * p), "asin");
}

inline Var safe_acos(const Var& x) {
    const double arg = numeric::unit_arg(x.value(), "acos");
    const double p = numeric::unit_partial_arg(x.value());
    return detail::unary(x, std::acos(arg), -1.0 / std::sqrt(1.0 - p * p), "acos");
}

/// x^p for a constant exponent; requires x > 0 unless p is a positive integer.
inline Var pow(const Var& x, double p) {
    const double v = std::pow(x.value(), p);
    const double d = p * std::pow(x.value(), p - 1.0);
    return detail::unary(x, v, std::isfinite(d) ? d : 0.0, "pow");
}

/// max(0, x) with subgradient 0 at exactly 0.
inline Var hinge(const Var& x) {
    return x.value() > 0.0 ? detail::unary(x, x.value(), 1.0, "max0") : detail::unary(x, 0.0, 0.0, "max0");
}

inline Var dot(std::span<const Var> a, std::span<const Var> b) {
    if (a.size() != b.size()) {
        throw InvalidArgument("dot: length mismatch");
    }
    double v = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        v += a[i].value() * b[i].value();
    }
    Tape::check_finite(v, "dot");
    Tape* t = detail::tape_of(a);
    Tape* tb = detail::tape_of(b);
    if (t != nullptr && tb != nullptr && t != tb) {
        throw InvalidArgument("autodiff: operands recorded on different tapes");
    }
    t = t != nullptr ? t : tb;
    if (t == nullptr) {
        return Var(v);
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        t->edge(a[i], b[i].value());
        t->edge(b[i], a[i].value());
    }
    return t->finish(v);
}

inline Var dot(std::span<const Var> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw InvalidArgument("dot: length mismatch");
    }
    double v = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        v += a[i].value() * b[i];
    }
    Tape::check_finite(v, "dot");
    Tape* t = detail::tape_of(a);
    if (t == nullptr) {
        return Var(v);
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        t->edge(a[i], b[i]);
    }
    return t->finish(v);
}

/// Euclidean norm; the subgradient at the zero vector is 0.
inline Var norm(std::span<const Var> a) {
    double sq = 0.0;
    for (const Var& x : a) {
        sq += x.value() * x.value();
    }
    const double v = std::sqrt(sq);
    Tape::check_finite(v, "norm");
    Tape* t = detail::tape_of(a);
    if (t == nullptr) {
        return Var(v);
    }
    for (const Var& x : a) {
        t->edge(x, v > 0.0 ? x.value() / v : 0.0);
    }
    return t->finish(v);
}

inline Var sum(std::span<const Var> a) {
    double v = 0.0;
    for (const Var& x : a) {
        v += x.value();
    }
    Tape::check_finite(v, "sum");
    Tape* t = detail::tape_of(a);
    if (t == nullptr) {
        return Var(v);
    }
    for (const Var& x : a) {
        t->edge(x, 1.0);
    }
    return t->finish(v);
}

inline std::vector<double> values(std::span<const Var> vars) {
    std::vector<double> out(vars.size());
    for (std::size_t i = 0; i < vars.size(); ++i) {
        out[i] = vars[i].value();
    }
    return out;
}

} // namespace hbct::ad
