#pragma once

// Shared numeric kernels: isotonic projection (pool-adjacent-violators),
// adaptive Simpson quadrature, classical RK4 stepping, finite differences,
// Gauss-Legendre nodes.

#include "mmdflow/errors.hpp"

#include <cmath>
#include <cstddef>
#include <span>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

namespace mmdflow {

// ============================================================================
// Isotonic projection (PAV)
// ============================================================================

/// L2 projection of `v` onto the cone of nondecreasing vectors, uniform
/// weights. Linear-time block-merge stack. Blocks are merged only on strict
/// violation (previous mean > next mean); equal means stay separate, which
/// yields the same vector either way but keeps the scan deterministic.
inline std::vector<double> isotonic_project(std::span<const double> v) {
    struct Block {
        double sum;
        std::size_t count;
        double mean;
    };
    std::vector<Block> blocks;
    blocks.reserve(v.size());
    for (double x : v) {
        blocks.push_back({x, 1, x});
        while (blocks.size() >= 2) {
            Block& prev = blocks[blocks.size() - 2];
            Block& last = blocks.back();
            if (prev.mean > last.mean) {
                prev.sum += last.sum;
                prev.count += last.count;
                prev.mean = prev.sum / static_cast<double>(prev.count);
                blocks.pop_back();
            } else {
                break;
            }
        }
    }
    std::vector<double> out;
    out.reserve(v.size());
    for (const Block& b : blocks)
        out.insert(out.end(), b.count, b.mean);
    return out;
}

inline std::vector<double> isotonic_project(const std::vector<double>& v) {
    return isotonic_project(std::span<const double>(v));
}

inline bool is_nondecreasing(std::span<const double> v, double slack = 0.0) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] < v[i - 1] - slack) return false;
    return true;
}

// ============================================================================
// Adaptive Simpson quadrature
// ============================================================================

namespace detail {

template <typename F>
double simpson_adaptive(F& f, double a, double fa, double m, double fm, double b,
                        double fb, double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double err = (left + right - whole) / 15.0;
    if (std::abs(err) <= tol || depth <= 0) {
        if (depth <= 0 && std::abs(err) > tol) {
            char buf[96];
            std::snprintf(buf, sizeof(buf),
                          "quad_adaptive: max depth exceeded, partial estimate %.17g",
                          left + right + err);
            throw NumericError(buf);
        }
        return left + right + err;
    }
    return simpson_adaptive(f, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1) +
           simpson_adaptive(f, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1);
}

} // namespace detail

/// Adaptive Simpson estimate of the integral of f over [a,b] with absolute
/// tolerance `tol`. Exact on polynomials up to degree 5 (Richardson-corrected);
/// kinks like |x| are handled by refinement. Throws NumericError if the
/// recursion depth is exhausted before the tolerance is met.
template <typename F>
double quad_adaptive(F&& f, double a, double b, double tol, int max_depth = 48) {
    if (!(a < b)) throw InvariantError("quad_adaptive: requires a < b");
    if (!(tol > 0.0)) throw InvariantError("quad_adaptive: requires tol > 0");
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::simpson_adaptive(f, a, fa, m, fm, b, fb, whole, tol, max_depth);
}

/// Integral over a closed interval of a quadratic integrand, via the exact
/// three-point Simpson rule. The caller guarantees g is (at most) quadratic
/// on [a,b]; then the value is exact up to rounding.
template <typename G>
double simpson_exact(G&& g, double a, double b) {
    return (b - a) / 6.0 * (g(a) + 4.0 * g(0.5 * (a + b)) + g(b));
}

// ============================================================================
// Runge-Kutta 4
// ============================================================================

inline bool all_finite(double x) { return std::isfinite(x); }

template <typename T>
bool all_finite(const std::vector<T>& v) {
    for (const T& x : v)
        if (!all_finite(x)) return false;
    return true;
}

/// One classical 4th-order step of the autonomous-or-not ODE y' = field(t, y).
/// The state type needs +, and scalar *. Throws NumericError on a non-finite
/// stage derivative.
template <typename State, typename Field>
State rk4_step(Field&& field, double t, const State& y, double h) {
    if (!(h > 0.0)) throw InvariantError("rk4_step: requires h > 0");
    const State k1 = field(t, y);
    const State k2 = field(t + 0.5 * h, y + k1 * (0.5 * h));
    const State k3 = field(t + 0.5 * h, y + k2 * (0.5 * h));
    const State k4 = field(t + h, y + k3 * h);
    State out = y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    if (!all_finite(out)) throw NumericError("rk4_step: non-finite state derivative");
    return out;
}

// double is a valid State via the builtin operators.

// ============================================================================
// Finite differences
// ============================================================================

template <typename F>
double central_diff(F&& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

template <typename F>
double second_diff(F&& f, double x, double h) {
    return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

// ============================================================================
// Gauss-Legendre nodes on [-1, 1]
// ============================================================================

/// n-point Gauss-Legendre rule (nodes, weights) on [-1,1]. Newton iteration
/// on the Legendre recurrence from Chebyshev initial guesses.
inline std::vector<std::pair<double, double>> gauss_legendre(int n) {
    if (n < 1) throw InvariantError("gauss_legendre: requires n >= 1");
    std::vector<std::pair<double, double>> rule(static_cast<std::size_t>(n));
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            const double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * pp * pp);
        rule[static_cast<std::size_t>(i)] = {-x, w};
        rule[static_cast<std::size_t>(n - 1 - i)] = {x, w};
    }
    return rule;
}

/// Integral of f over [a,b] with an n-point Gauss-Legendre rule.
template <typename F>
double gauss_legendre_integrate(F&& f, double a, double b, int n) {
    const auto rule = gauss_legendre(n);
    const double c = 0.5 * (a + b), r = 0.5 * (b - a);
    double acc = 0.0;
    for (const auto& [x, w] : rule) acc += w * f(c + r * x);
    return acc * r;
}

} // namespace mmdflow
