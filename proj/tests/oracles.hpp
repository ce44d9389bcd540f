#pragma once

// Test-only oracles and generators. Everything in here is deliberately
// independent of the library's computation paths: brute-force enumeration,
// dense Riemann sums, sorted matchings, and plain Monte Carlo, used to freeze
// or cross-check expected values.

#include "mmdflow/measure.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace oracles {

// ----------------------------------------------------------------------------
// Quadrature oracles
// ----------------------------------------------------------------------------

/// Dense midpoint Riemann sum; slow but has no refinement logic to share bugs
/// with the adaptive integrator.
template <typename F>
double riemann_midpoint(F&& f, double a, double b, int n) {
    double acc = 0.0;
    const double h = (b - a) / n;
    for (int i = 0; i < n; ++i) acc += f(a + (i + 0.5) * h);
    return acc * h;
}

template <typename F2>
double riemann_midpoint_2d(F2&& f, double ax, double bx, double ay, double by, int n) {
    auto outer = [&](double x) {
        auto inner = [&](double y) { return f(x, y); };
        return riemann_midpoint(inner, ay, by, n);
    };
    return riemann_midpoint(outer, ax, bx, n);
}

// ----------------------------------------------------------------------------
// Isotonic regression by exhaustive block enumeration (n <= 8)
// ----------------------------------------------------------------------------

/// Global minimizer of ||g - v||^2 over nondecreasing g, found by enumerating
/// every partition of the index range into contiguous blocks, setting each
/// block to its mean, and keeping the feasible candidate of least error. The
/// true projection is itself such a candidate, so the minimum is exact.
inline std::vector<double> brute_force_isotonic(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<double> best;
    double best_sse = std::numeric_limits<double>::infinity();
    const std::uint32_t masks = 1u << (n - 1);
    for (std::uint32_t mask = 0; mask < masks; ++mask) {
        std::vector<double> cand(n);
        bool feasible = true;
        double prev_mean = -std::numeric_limits<double>::infinity();
        std::size_t start = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const bool boundary = (i + 1 == n) || (mask & (1u << i));
            if (!boundary) continue;
            double sum = 0.0;
            for (std::size_t j = start; j <= i; ++j) sum += v[j];
            const double mean = sum / static_cast<double>(i - start + 1);
            if (mean < prev_mean) {
                feasible = false;
                break;
            }
            for (std::size_t j = start; j <= i; ++j) cand[j] = mean;
            prev_mean = mean;
            start = i + 1;
        }
        if (!feasible) continue;
        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) sse += (cand[i] - v[i]) * (cand[i] - v[i]);
        if (sse < best_sse) {
            best_sse = sse;
            best = cand;
        }
    }
    return best;
}

// ----------------------------------------------------------------------------
// Optimal transport oracle for equal-weight empirical measures
// ----------------------------------------------------------------------------

/// W2 between equal-weight empirical measures by the sorted matching, which
/// is optimal on the line.
inline double sorted_matching_w2(std::vector<double> xs, std::vector<double> ys) {
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    double acc = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double d = xs[i] - ys[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(xs.size()));
}

// ----------------------------------------------------------------------------
// Random generators (fixed-seed reproducibility is the caller's business)
// ----------------------------------------------------------------------------

inline std::vector<double> random_points(std::mt19937_64& rng, int n, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> xs(static_cast<std::size_t>(n));
    for (double& x : xs) x = u(rng);
    return xs;
}

/// Random mixed measure: a few atoms plus a few uniform pieces with positive
/// masses normalized to total 1. Supports land in [-range, range].
inline mmdflow::Measure1D random_mixed_measure(std::mt19937_64& rng, double range = 1.0,
                                               int max_atoms = 4, int max_uniforms = 3) {
    std::uniform_int_distribution<int> na(0, max_atoms);
    std::uniform_int_distribution<int> nu(0, max_uniforms);
    std::uniform_real_distribution<double> pos(-range, range);
    std::uniform_real_distribution<double> mass(0.1, 1.0);
    int atoms_n = na(rng), unif_n = nu(rng);
    if (atoms_n + unif_n == 0) atoms_n = 1;

    std::vector<mmdflow::Atom> atoms;
    for (int i = 0; i < atoms_n; ++i) atoms.push_back({pos(rng), mass(rng)});
    std::vector<mmdflow::UniformPiece> unifs;
    for (int i = 0; i < unif_n; ++i) {
        double a = pos(rng), b = pos(rng);
        if (a > b) std::swap(a, b);
        if (b - a < 1e-3) b = a + 1e-3;
        unifs.push_back({a, b, mass(rng)});
    }
    double total = 0.0;
    for (const auto& a : atoms) total += a.w;
    for (const auto& u : unifs) total += u.w;
    for (auto& a : atoms) a.w /= total;
    for (auto& u : unifs) u.w /= total;
    return mmdflow::Measure1D(std::move(atoms), std::move(unifs));
}

/// Random equal-weight empirical measure with k support points in
/// [-range, range].
inline mmdflow::Measure1D random_empirical(std::mt19937_64& rng, int k, double range = 1.0) {
    return mmdflow::Measure1D::empirical(random_points(rng, k, -range, range));
}

/// Random monotone grid of size n with values in about [-range, range].
inline mmdflow::QuantileGrid random_monotone_grid(std::mt19937_64& rng, int n,
                                                  double range = 1.0) {
    std::uniform_real_distribution<double> jump(0.0, 2.0 * range / n);
    std::uniform_real_distribution<double> start(-range, 0.0);
    mmdflow::QuantileGrid g;
    g.values.resize(static_cast<std::size_t>(n));
    double v = start(rng);
    for (auto& x : g.values) {
        v += jump(rng);
        x = v;
    }
    return g;
}

/// Random grid (not necessarily monotone) with values in [-range, range].
inline mmdflow::QuantileGrid random_grid(std::mt19937_64& rng, int n, double range = 1.0) {
    std::uniform_real_distribution<double> u(-range, range);
    mmdflow::QuantileGrid g;
    g.values.resize(static_cast<std::size_t>(n));
    for (auto& x : g.values) x = u(rng);
    return g;
}

} // namespace oracles
