#pragma once

// Gradient flows of F_nu in quantile space:
//
//  * closed_form_flow_to_dirac: the exact flow toward a Dirac target,
//      g_t(s) = min{Q_0(s) + 2st, q}   where Q_0(s) < q,
//      g_t(s) = q                      where Q_0(s) = q,
//      g_t(s) = max{Q_0(s) + 2st - 2t, q} where Q_0(s) > q,
//    applied segment-wise so the piecewise-affine representation stays exact.
//
//  * subgradient_flow: explicit Euler on the minimal-norm subgradient with
//    isotonic projection back onto the monotone cone after each step.
//
//  * jko_step: one implicit (minimizing-movement) step, the unique minimizer
//    of F_nu(g) + ||g - f||^2/(2 tau) over monotone grids. Solved exactly by
//    pool-adjacent-violators with convex per-block subproblems; a first-order
//    optimality certificate is checked before returning.

#include "mmdflow/energy.hpp"
#include "mmdflow/errors.hpp"
#include "mmdflow/measure.hpp"
#include "mmdflow/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace mmdflow {

// ============================================================================
// FlowTrajectory
// ============================================================================

/// Time-stamped sequence of flow snapshots with the energy F_nu recorded at
/// each snapshot. Times are strictly increasing and start at 0; recorded
/// energies are nonincreasing along a well-behaved flow.
template <typename StateT>
struct FlowTrajectory {
    std::vector<double> times;
    std::vector<StateT> states;
    std::vector<double> energies;

    /// Largest single-step energy increase observed by the integrator across
    /// all internal steps (not only the recorded ones). Zero for exact flows.
    double max_step_energy_increase = 0.0;

    void record(double t, StateT state, double energy) {
        if (!times.empty() && !(t > times.back()))
            throw InvariantError("FlowTrajectory: times must be strictly increasing");
        times.push_back(t);
        states.push_back(std::move(state));
        energies.push_back(energy);
    }

    std::size_t size() const { return times.size(); }
};

using GridTrajectory = FlowTrajectory<QuantileGrid>;
using QuantileTrajectory = FlowTrajectory<QuantileFn>;

// ============================================================================
// Closed-form flow toward a Dirac target
// ============================================================================

/// Exact state at time t of the flow of F_{delta_q} started at the measure
/// with quantile q0. Each affine segment of q0 is split at the activation
/// points of the min/max clamps, so the result is again exact
/// piecewise-affine with flats pinned to exactly q.
inline QuantileFn closed_form_flow_to_dirac(const QuantileFn& q0, double q, double t) {
    if (t < 0.0) throw InvariantError("closed_form_flow_to_dirac: requires t >= 0");
    if (t == 0.0) return q0;

    std::vector<QuantileSegment> out;
    out.reserve(2 * q0.segments().size() + 2);

    for (const QuantileSegment& seg : q0.segments()) {
        const double beta = (seg.v_hi - seg.v_lo) / (seg.s_hi - seg.s_lo);
        const double alpha = seg.v_lo - beta * seg.s_lo;
        const double rate = beta + 2.0 * t; // slope of both shifted lines, >= 0

        // Rising line below the target reaches q at sA; the line shifted down
        // by 2t re-emerges above q at sB. Between them the state is pinned.
        double sA, sB;
        if (rate > 0.0) {
            sA = (q - alpha) / rate;
            sB = (q - alpha + 2.0 * t) / rate;
        } else {
            sA = (alpha < q) ? seg.s_hi : seg.s_lo;
            sB = (alpha > q) ? seg.s_lo : seg.s_hi;
        }
        sA = std::clamp(sA, seg.s_lo, seg.s_hi);
        sB = std::clamp(std::max(sB, sA), seg.s_lo, seg.s_hi);

        auto g_exact = [&](double s, double v) {
            if (v < q) return std::min(v + 2.0 * s * t, q);
            if (v > q) return std::max(v + 2.0 * t * (s - 1.0), q);
            return q;
        };

        double bounds[4] = {seg.s_lo, sA, sB, seg.s_hi};
        for (int b = 0; b + 1 < 4; ++b) {
            const double x = bounds[b], y = bounds[b + 1];
            if (!(y > x)) continue;
            const double vx = g_exact(x, seg.value_at(x));
            const double vy = g_exact(y, seg.value_at(y));
            out.push_back({x, y, vx, vy});
        }
    }

    // Coalesce adjacent segments pinned at q (and any colinear continuations
    // produced by the splitting) to keep the representation tidy.
    std::vector<QuantileSegment> tidy;
    tidy.reserve(out.size());
    for (const QuantileSegment& s : out) {
        if (!tidy.empty()) {
            QuantileSegment& p = tidy.back();
            if (p.flat() && s.flat() && p.v_lo == s.v_lo) {
                p.s_hi = s.s_hi;
                continue;
            }
        }
        tidy.push_back(s);
    }
    return QuantileFn(std::move(tidy));
}

/// Closed-form trajectory sampled at the given nonnegative ascending times
/// (0 is prepended if missing), with exact energies.
inline QuantileTrajectory closed_form_trajectory(const QuantileFn& q0, double q,
                                                 const std::vector<double>& times) {
    const Measure1D target = Measure1D::dirac(q);
    FnuEvaluator ev(target);
    QuantileTrajectory traj;
    std::vector<double> ts = times;
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    if (ts.empty() || ts.front() > 0.0) ts.insert(ts.begin(), 0.0);
    for (double t : ts) {
        if (t < 0.0) throw InvariantError("closed_form_trajectory: negative time");
        QuantileFn g = closed_form_flow_to_dirac(q0, q, t);
        const double e = ev.value_exact(g);
        traj.record(t, std::move(g), e);
    }
    return traj;
}

// ============================================================================
// Explicit subgradient flow
// ============================================================================

/// Explicit Euler iteration f_{k+1} = PAV(f_k - tau * h(f_k)) on the
/// minimal-norm subgradient h of F_nu, recording every `record_every` steps
/// plus the initial and final state. Each recorded state is monotone. The
/// per-step energy change is tracked; explicit steps can overshoot the
/// stationary set by O(tau), which bounds the observed increase by O(tau^2).
inline GridTrajectory subgradient_flow(const QuantileGrid& f0, const Measure1D& nu,
                                       double tau, int steps, int record_every) {
    if (!(tau > 0.0)) throw InvariantError("subgradient_flow: requires tau > 0");
    if (steps < 0) throw InvariantError("subgradient_flow: requires steps >= 0");
    if (record_every < 1) throw InvariantError("subgradient_flow: requires record_every >= 1");
    if (!f0.is_monotone())
        throw InvariantError("subgradient_flow: initial grid must be nondecreasing");

    FnuEvaluator ev(nu);
    GridTrajectory traj;
    QuantileGrid f = f0;
    double energy = ev.value_grid(f);
    traj.record(0.0, f, energy);

    std::vector<double> h(f.values.size());
    for (int k = 1; k <= steps; ++k) {
        ev.subgrad_minnorm(f, h);
        for (std::size_t i = 0; i < f.values.size(); ++i)
            f.values[i] -= tau * h[i];
        f.values = isotonic_project(f.values);
        const double e = ev.value_grid(f);
        traj.max_step_energy_increase =
            std::max(traj.max_step_energy_increase, e - energy);
        energy = e;
        if (k % record_every == 0 || k == steps)
            traj.record(static_cast<double>(k) * tau, f, energy);
    }
    return traj;
}

// ============================================================================
// JKO / minimizing-movement step
// ============================================================================

namespace detail {

/// Solves min_v sum_{i in B} [ (1-2 s_i) v + A_nu(v) + (v - f_i)^2 / (2 tau) ]
/// by bisection on the monotone subgradient. Returns the unique minimizer.
class JkoBlockSolver {
public:
    JkoBlockSolver(const FnuEvaluator& ev, double tau) : ev_(ev), tau_(tau) {}

    double solve(double sum_s, double sum_f, double count, double f_min, double f_max) const {
        double lo = f_min - 2.0 * tau_ - 1.0;
        double hi = f_max + 2.0 * tau_ + 1.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double pen = (count * mid - sum_f) / tau_;
            const double d_hi = 2.0 * (count * ev_.cdf(mid) - sum_s) + pen;
            const double d_lo = 2.0 * (count * ev_.cdf_left_limit(mid) - sum_s) + pen;
            if (d_hi < 0.0)
                lo = mid;
            else if (d_lo > 0.0)
                hi = mid;
            else
                return mid; // 0 lies in the subdifferential
            if (hi - lo <= 1e-15 * std::max(1.0, std::max(std::abs(lo), std::abs(hi))))
                break;
        }
        return 0.5 * (lo + hi);
    }

private:
    const FnuEvaluator& ev_;
    double tau_;
};

} // namespace detail

/// One minimizing-movement step: the unique minimizer of
///   F_nu(g) + (1/(2 tau)) ||g - f||_grid^2
/// over monotone grids g (strongly convex, separable plus the cone
/// constraint). Pool-adjacent-violators with per-block convex solves yields
/// the exact minimizer; a first-order optimality (KKT) residual below 1e-8 is
/// certified before returning, otherwise a NumericError reports the residual.
inline QuantileGrid jko_step(const QuantileGrid& f, const Measure1D& nu, double tau) {
    if (!(tau > 0.0)) throw InvariantError("jko_step: requires tau > 0");
    if (!f.is_monotone())
        throw InvariantError("jko_step: input grid must be nondecreasing");
    const int n = f.n();
    if (n < 1) throw InvariantError("jko_step: empty grid");

    FnuEvaluator ev(nu);
    detail::JkoBlockSolver solver(ev, tau);

    struct Block {
        std::size_t first, last;
        double sum_s, sum_f, f_min, f_max;
        double v;
    };
    std::vector<Block> blocks;
    blocks.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double s = QuantileGrid::midpoint(i, n);
        const double fi = f.values[static_cast<std::size_t>(i)];
        Block b{static_cast<std::size_t>(i), static_cast<std::size_t>(i), s, fi, fi, fi, 0.0};
        b.v = solver.solve(b.sum_s, b.sum_f, 1.0, b.f_min, b.f_max);
        blocks.push_back(b);
        while (blocks.size() >= 2 && blocks[blocks.size() - 2].v > blocks.back().v) {
            Block& p = blocks[blocks.size() - 2];
            const Block& q = blocks.back();
            p.last = q.last;
            p.sum_s += q.sum_s;
            p.sum_f += q.sum_f;
            p.f_min = std::min(p.f_min, q.f_min);
            p.f_max = std::max(p.f_max, q.f_max);
            const double count = static_cast<double>(p.last - p.first + 1);
            p.v = solver.solve(p.sum_s, p.sum_f, count, p.f_min, p.f_max);
            blocks.pop_back();
        }
    }

    QuantileGrid g;
    g.values.resize(static_cast<std::size_t>(n));
    for (const Block& b : blocks)
        for (std::size_t i = b.first; i <= b.last; ++i) g.values[i] = b.v;

    // KKT certificate: within each block every prefix must resist moving down
    // (sum of upper subgradients >= 0) and every suffix must resist moving up
    // (sum of lower subgradients <= 0).
    double residual = 0.0;
    for (const Block& b : blocks) {
        const double a_cdf = ev.cdf_left_limit(b.v);
        const double b_cdf = ev.cdf(b.v);
        double pre_hi = 0.0, suf_lo = 0.0, min_pre = 0.0, max_suf = 0.0;
        for (std::size_t i = b.first; i <= b.last; ++i) {
            const double s = QuantileGrid::midpoint(static_cast<int>(i), n);
            const double pen = (b.v - f.values[i]) / tau;
            pre_hi += 2.0 * (b_cdf - s) + pen;
            min_pre = std::min(min_pre, pre_hi);
            const std::size_t j = b.last - (i - b.first);
            const double sj = QuantileGrid::midpoint(static_cast<int>(j), n);
            suf_lo += 2.0 * (a_cdf - sj) + (b.v - f.values[j]) / tau;
            max_suf = std::max(max_suf, suf_lo);
        }
        residual = std::max(residual, std::max(-min_pre, max_suf));
    }
    if (residual >= 1e-8)
        throw NumericError("jko_step: first-order optimality residual " +
                           std::to_string(residual) + " >= 1e-8");
    return g;
}

// ============================================================================
// Decoding snapshots back to measures
// ============================================================================

/// Grid snapshot -> piecewise-affine quantile function: consecutive values
/// within `flat_tol` * (value range) form one flat run (an atom after
/// push-forward); distinct neighbors are joined affinely between the grid
/// midpoints; constant extension fills (0, s_0] and (s_{n-1}, 1).
inline QuantileFn grid_to_quantile_fn(const QuantileGrid& grid, double flat_tol = 1e-9) {
    const int n = grid.n();
    if (n < 1) throw InvariantError("grid_to_quantile_fn: empty grid");
    if (!grid.is_monotone())
        throw InvariantError("grid_to_quantile_fn: grid must be nondecreasing");
    const std::vector<double>& v = grid.values;
    const double range = v.back() - v.front();
    const double thr = flat_tol * range;

    struct Knot {
        double s, v;
    };
    std::vector<Knot> knots;
    knots.reserve(static_cast<std::size_t>(2 * n + 2));

    std::size_t i = 0;
    double first_val = 0.0, last_val = 0.0;
    bool first_run = true;
    while (i < v.size()) {
        std::size_t j = i;
        double sum = v[i];
        while (j + 1 < v.size() && v[j + 1] - v[j] <= thr) {
            ++j;
            sum += v[j];
        }
        const double mean = sum / static_cast<double>(j - i + 1);
        if (first_run) {
            first_val = mean;
            first_run = false;
        }
        last_val = mean;
        knots.push_back({QuantileGrid::midpoint(static_cast<int>(i), n), mean});
        if (j > i) knots.push_back({QuantileGrid::midpoint(static_cast<int>(j), n), mean});
        i = j + 1;
    }
    knots.insert(knots.begin(), {0.0, first_val});
    knots.push_back({1.0, last_val});

    std::vector<QuantileSegment> segs;
    segs.reserve(knots.size());
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
        if (knots[k + 1].s > knots[k].s)
            segs.push_back({knots[k].s, knots[k + 1].s, knots[k].v, knots[k + 1].v});
    }
    return QuantileFn(std::move(segs));
}

/// Decode a grid snapshot into a measure.
inline Measure1D grid_to_measure(const QuantileGrid& grid, double flat_tol = 1e-9) {
    return pushforward_from_quantile(grid_to_quantile_fn(grid, flat_tol));
}

/// Decode the indexed snapshot of a grid trajectory.
inline Measure1D flow_to_measure(const GridTrajectory& traj, std::size_t index,
                                 double flat_tol = 1e-9) {
    if (index >= traj.states.size()) throw InvariantError("flow_to_measure: index out of range");
    return grid_to_measure(traj.states[index], flat_tol);
}

/// Decode the indexed snapshot of an exact quantile trajectory.
inline Measure1D flow_to_measure(const QuantileTrajectory& traj, std::size_t index) {
    if (index >= traj.states.size()) throw InvariantError("flow_to_measure: index out of range");
    return pushforward_from_quantile(traj.states[index]);
}

} // namespace mmdflow
