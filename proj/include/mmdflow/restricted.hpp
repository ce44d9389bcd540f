#pragma once

// Flows restricted to the Dirac family S1 = { delta_x } and the location-scale
// uniform family S2 = { mu_{m,sigma} }, where mu_{m,sigma} is the uniform
// probability measure on [m - sqrt(3) sigma, m + sqrt(3) sigma] with mean m
// and standard deviation sigma. The quantile of mu_{m,sigma} is the affine
// function f_{m,sigma}(s) = m + 2 sqrt(3) sigma (s - 1/2), so S2 corresponds
// to a two-dimensional subspace of L2((0,1)) and the restricted flows are
// plane ODEs (ṁ, σ̇) = -grad F(m, sigma).
//
// For the distance kernel and a Dirac target delta_q the restricted energy
// has the closed form
//
//   F(m, sigma) = -sigma/sqrt(3) + |m-q|                        if |m-q| >= sqrt(3) sigma
//                 -sigma/sqrt(3) + ((m-q)^2 + 3 sigma^2)
//                                   / (2 sqrt(3) sigma)         otherwise,
//
// validated against direct quadrature of the quantile-space functional; the
// two branches agree (C^1, in fact) on the seam |m-q| = sqrt(3) sigma.

#include "mmdflow/energy.hpp"
#include "mmdflow/errors.hpp"
#include "mmdflow/flow.hpp"
#include "mmdflow/measure.hpp"
#include "mmdflow/numerics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

namespace mmdflow {

// ============================================================================
// Parameter families
// ============================================================================

struct DiracParam {
    double x = 0.0;
};

struct UniformParam {
    double m = 0.0;     ///< mean
    double sigma = 0.0; ///< standard deviation, >= 0
};

inline UniformParam operator+(UniformParam a, UniformParam b) {
    return {a.m + b.m, a.sigma + b.sigma};
}
inline UniformParam operator*(UniformParam a, double c) { return {a.m * c, a.sigma * c}; }
inline bool all_finite(UniformParam p) {
    return std::isfinite(p.m) && std::isfinite(p.sigma);
}

inline constexpr double kSqrt3 = 1.7320508075688772;

inline Measure1D uniform_param_measure(UniformParam p) {
    if (p.sigma < 0.0) throw InvariantError("uniform_param_measure: sigma must be >= 0");
    if (p.sigma == 0.0) return Measure1D::dirac(p.m);
    return Measure1D::uniform(p.m - kSqrt3 * p.sigma, p.m + kSqrt3 * p.sigma);
}

inline QuantileFn uniform_param_quantile(UniformParam p) {
    if (p.sigma < 0.0) throw InvariantError("uniform_param_quantile: sigma must be >= 0");
    if (p.sigma == 0.0) return QuantileFn::constant(p.m);
    return QuantileFn::affine(p.m - kSqrt3 * p.sigma, p.m + kSqrt3 * p.sigma);
}

using ScalarTrajectory = FlowTrajectory<double>;
using ParamTrajectory = FlowTrajectory<UniformParam>;
using ParticleTrajectory = FlowTrajectory<std::vector<double>>;

// ============================================================================
// S1: Dirac family
// ============================================================================

/// Restricted energy on S1: F(x) = D^2(delta_x, nu) for the distance kernel;
/// convex in x, minimized on the median set of nu.
inline double f1_potential(double x, const Measure1D& nu) {
    return expected_distance(nu, x) + interaction_energy(nu, Kernel::distance());
}

namespace detail {

/// Minimal-norm element of the subdifferential of F1 at x:
/// the interval [2 R_nu(x-) - 1, 2 R_nu(x) - 1] clamped to its nearest-zero
/// element. Vanishes exactly on the median set of nu.
inline double f1_subgrad_minnorm(const Measure1D& nu, double x) {
    const double lo = 2.0 * cdf_left(nu, x) - 1.0;
    const double hi = 2.0 * cdf_eval(nu, x) - 1.0;
    if (lo <= 0.0 && 0.0 <= hi) return 0.0;
    return (lo > 0.0) ? lo : hi;
}

/// Stationary set of F1: [Q_nu(1/2), Q_nu^+(1/2)].
inline std::pair<double, double> median_set(const QuantileFn& qnu) {
    return {qnu(0.5), qnu.value_right(0.5)};
}

} // namespace detail

/// Scalar gradient flow ẋ = -∂F1(x) integrated by RK4 with arrival capture:
/// the flow moves monotonically toward the median set of nu; a step that
/// would cross its boundary lands exactly on it and the state stays there.
/// For nu = delta_q this reproduces x0 ± t with exact arrival at q; for an
/// interval target the interior law is exponential decay toward the midpoint.
inline ScalarTrajectory s1_flow(double x0, const Measure1D& nu, double t_end, double h) {
    if (!(h > 0.0)) throw InvariantError("s1_flow: requires h > 0");
    if (t_end < 0.0) throw InvariantError("s1_flow: requires t_end >= 0");
    if (!std::isfinite(x0)) throw InvariantError("s1_flow: non-finite start");

    const QuantileFn qnu = quantile(nu);
    const auto [med_lo, med_hi] = detail::median_set(qnu);
    const double e_nu = interaction_energy(nu, Kernel::distance());
    auto energy = [&](double x) { return expected_distance(nu, x) + e_nu; };

    ScalarTrajectory traj;
    double x = x0;
    traj.record(0.0, x, energy(x));

    double t = 0.0;
    while (t < t_end - 1e-12) {
        const double hs = std::min(h, t_end - t);
        if (x < med_lo) {
            const double speed = -detail::f1_subgrad_minnorm(nu, x); // > 0
            if (x + hs * speed >= med_lo) {
                x = med_lo; // ballistic arrival within this step
            } else {
                auto field = [&](double, double y) {
                    return -detail::f1_subgrad_minnorm(nu, std::min(y, med_lo));
                };
                x = std::min(rk4_step(field, t, x, hs), med_lo);
            }
        } else if (x > med_hi) {
            const double speed = detail::f1_subgrad_minnorm(nu, x); // > 0
            if (x - hs * speed <= med_hi) {
                x = med_hi;
            } else {
                auto field = [&](double, double y) {
                    return -detail::f1_subgrad_minnorm(nu, std::max(y, med_hi));
                };
                x = std::max(rk4_step(field, t, x, hs), med_hi);
            }
        }
        // inside the median set the minimal-norm subgradient is zero
        t += hs;
        traj.record(t, x, energy(x));
    }
    return traj;
}

// ============================================================================
// S2: location-scale uniform family
// ============================================================================

namespace detail {

/// Piecewise Gauss-Legendre with explicit kink splitting; `nodes` points per
/// smooth piece. The smooth kernel is piecewise-polynomial, so a modest node
/// count per piece is already exact; a doubling check guards the claim.
template <typename F>
double gl_split(F&& f, double a, double b, const std::vector<double>& kinks, int nodes) {
    std::vector<double> cuts = {a, b};
    for (double c : kinks)
        if (c > a && c < b) cuts.push_back(c);
    std::sort(cuts.begin(), cuts.end());
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        acc += gauss_legendre_integrate(f, cuts[i], cuts[i + 1], nodes);
    return acc;
}

/// Mean of the smooth kernel over x in [a,b] (unit mass) against the point c:
/// (1/(b-a)) int_a^b kappa(c - x) dx, kinks of kappa at c -+ 2.
inline double smooth_mean_against_point(double c, double a, double b, int nodes) {
    auto f = [&](double x) { return smooth_profile(c - x); };
    return gl_split(f, a, b, {c - 2.0, c + 2.0}, nodes) / (b - a);
}

/// Mean of the smooth kernel over [a,b] x [c,d] (unit masses), Gauss-Legendre
/// per axis with kink splitting, doubled until the change is below 1e-9.
inline double smooth_mean_uniform_uniform(double a, double b, double c, double d) {
    auto eval = [&](int nodes) {
        auto outer = [&](double x) {
            auto inner = [&](double y) { return smooth_profile(x - y); };
            return gl_split(inner, c, d, {x - 2.0, x + 2.0}, nodes) / (d - c);
        };
        return gl_split(outer, a, b, {c - 2.0, c + 2.0, d - 2.0, d + 2.0}, nodes) / (b - a);
    };
    double prev = eval(32);
    for (int nodes = 64; nodes <= 256; nodes *= 2) {
        const double next = eval(nodes);
        if (std::abs(next - prev) < 1e-9) return next;
        prev = next;
    }
    return prev;
}

/// Mean smooth-kernel value between two measure components.
inline double smooth_mean_components(const Component& p, const Component& q) {
    if (p.is_atom && q.is_atom) return smooth_profile(p.x - q.x);
    if (p.is_atom) return smooth_mean_against_point(p.x, q.a, q.b, 64);
    if (q.is_atom) return smooth_mean_against_point(q.x, p.a, p.b, 64);
    return smooth_mean_uniform_uniform(p.a, p.b, q.a, q.b);
}

/// D^2 for the smooth kernel with mu in the location-scale family, by
/// Gauss-Legendre quadrature; `e_nu` caches interaction_energy(nu, smooth).
inline double smooth_mmd_param(UniformParam p, const Measure1D& nu, double e_nu) {
    const auto cn = components(nu);
    double e_mu, v;
    if (p.sigma == 0.0) {
        e_mu = 0.5 * smooth_profile(0.0);
        v = 0.0;
        Component at{true, p.m, 0.0, 0.0, 1.0};
        for (const auto& q : cn) v -= q.w * smooth_mean_components(at, q);
    } else {
        const double lo = p.m - kSqrt3 * p.sigma, hi = p.m + kSqrt3 * p.sigma;
        Component un{false, 0.0, lo, hi, 1.0};
        e_mu = 0.5 * smooth_mean_uniform_uniform(lo, hi, lo, hi);
        v = 0.0;
        for (const auto& q : cn) v -= q.w * smooth_mean_components(un, q);
    }
    return e_mu + v + e_nu;
}

/// Cached evaluation context for F(m, sigma) = D^2(mu_{m,sigma}, nu).
class F2Context {
public:
    F2Context(const Measure1D& nu, Kernel k)
        : kernel_(k), ev_(nu), nu_(nu) {
        if (k.type == KernelType::CompactSmooth)
            e_nu_smooth_ = interaction_energy(nu, k);
        if (k.type == KernelType::NegDistance && nu.uniforms().empty() &&
            nu.atoms().size() == 1) {
            analytic_ = true;
            q_ = nu.atoms().front().x;
        }
    }

    double energy(UniformParam p) const {
        if (p.sigma < 0.0) throw InvariantError("f2_energy: sigma must be >= 0");
        if (kernel_.type == KernelType::NegDistance)
            return ev_.value_exact(uniform_param_quantile(p));
        return smooth_mmd_param(p, nu_, e_nu_smooth_);
    }

    bool analytic() const { return analytic_; }
    double target() const { return q_; }

    /// Gradient of F. Analytic for the distance kernel with a Dirac target;
    /// central finite differences of the energy otherwise. In sigma the
    /// smooth-kernel energy is even, so the reflected central difference is
    /// used there (exact zero at sigma = 0); the distance kernel is kinked at
    /// sigma = 0 and falls back to the one-sided quotient.
    std::array<double, 2> gradient(UniformParam p) const {
        const double sig = std::max(p.sigma, 0.0);
        if (analytic_) return analytic_gradient(p.m, sig);
        const double step = 1e-5;
        auto F = [&](double m, double s) { return energy({m, s}); };
        const double gm = (F(p.m + step, sig) - F(p.m - step, sig)) / (2.0 * step);
        double gs;
        if (kernel_.type == KernelType::CompactSmooth) {
            gs = (F(p.m, std::abs(sig + step)) - F(p.m, std::abs(sig - step))) / (2.0 * step);
        } else if (sig > step) {
            gs = (F(p.m, sig + step) - F(p.m, sig - step)) / (2.0 * step);
        } else {
            gs = (F(p.m, sig + step) - F(p.m, sig)) / step;
        }
        return {gm, gs};
    }

    /// Seam function |m - q| - sqrt(3) sigma of the analytic case.
    double seam(UniformParam p) const { return std::abs(p.m - q_) - kSqrt3 * p.sigma; }

private:
    std::array<double, 2> analytic_gradient(double m, double sigma) const {
        const double d = m - q_;
        if (d == 0.0 && sigma == 0.0) return {0.0, 0.0}; // global minimizer
        if (std::abs(d) >= kSqrt3 * sigma) {
            const double sgn = (d > 0.0) ? 1.0 : -1.0;
            return {sgn, -1.0 / kSqrt3};
        }
        const double r = d / sigma;
        return {d / (kSqrt3 * sigma), (1.0 - r * r) / (2.0 * kSqrt3)};
    }

    Kernel kernel_;
    FnuEvaluator ev_;
    Measure1D nu_;
    double e_nu_smooth_ = 0.0;
    bool analytic_ = false;
    double q_ = 0.0;
};

} // namespace detail

/// Restricted energy F(m, sigma) = D^2(mu_{m,sigma}, nu). For the distance
/// kernel this is evaluated exactly through the quantile-space functional;
/// for the smooth kernel by Gauss-Legendre quadrature.
inline double f2_energy(UniformParam p, const Measure1D& nu, Kernel k) {
    return detail::F2Context(nu, k).energy(p);
}

/// Gradient of F(m, sigma); see F2Context::gradient for the selection of
/// analytic vs finite-difference paths.
inline std::array<double, 2> f2_gradient(UniformParam p, const Measure1D& nu, Kernel k) {
    if (p.sigma < 0.0) throw InvariantError("f2_gradient: sigma must be >= 0");
    return detail::F2Context(nu, k).gradient(p);
}

/// Closed form of F(m, sigma) for the distance kernel and target delta_q.
/// Used by tests and the landscape fast path; the general evaluator must
/// agree with it to quadrature accuracy.
inline double f2_closed_form_dirac(UniformParam p, double q) {
    const double d = std::abs(p.m - q);
    const double base = -p.sigma / kSqrt3;
    if (d >= kSqrt3 * p.sigma) return base + d;
    return base + (d * d + 3.0 * p.sigma * p.sigma) / (2.0 * kSqrt3 * p.sigma);
}

// ============================================================================
// S2 flow
// ============================================================================

namespace detail {

class S2Integrator {
public:
    S2Integrator(const F2Context& ctx) : ctx_(ctx) {}

    /// Advance by dt keeping the recorded energy nonincreasing (up to 1e-12
    /// per accepted sub-step); rejected steps are halved, up to 40 times.
    UniformParam advance(UniformParam p, double dt, int depth = 0) const {
        UniformParam cand = sub_step(p, dt);
        if (ctx_.analytic()) {
            // land exactly on the case seam, then relaunch
            const double s0 = ctx_.seam(p), s1 = ctx_.seam(cand);
            if (s0 * s1 < 0.0 && std::abs(s0) > 1e-10) {
                double lo = 0.0, hi = dt;
                for (int it = 0; it < 80; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    const double sm = ctx_.seam(sub_step(p, mid));
                    if (std::abs(sm) <= 1e-10) {
                        hi = mid;
                        break;
                    }
                    (sm * s0 > 0.0 ? lo : hi) = mid;
                }
                UniformParam at_seam = sub_step(p, hi);
                if (accept(p, at_seam))
                    return advance_checked(at_seam, dt - hi, depth);
            }
        }
        if (accept(p, cand)) return cand;
        if (depth >= 40)
            throw NumericError("s2_flow: energy increased after 40 step halvings");
        UniformParam mid = advance(p, 0.5 * dt, depth + 1);
        return advance(mid, 0.5 * dt, depth + 1);
    }

private:
    UniformParam advance_checked(UniformParam p, double dt, int depth) const {
        if (dt <= 0.0) return p;
        return advance(p, dt, depth);
    }

    bool accept(UniformParam from, UniformParam to) const {
        return ctx_.energy(to) <= ctx_.energy(from) + 1e-12;
    }

    UniformParam sub_step(UniformParam p, double dt) const {
        if (p.sigma == 0.0) {
            const auto g = ctx_.gradient(p);
            if (g[1] > 0.0) {
                // boundary flow: sigma stays 0, m follows the S1 law
                UniformParam out = p;
                out.m -= dt * g[0];
                if (ctx_.analytic()) {
                    // arrival capture at the target
                    if ((p.m - ctx_.target()) * (out.m - ctx_.target()) < 0.0)
                        out.m = ctx_.target();
                }
                return out;
            }
        }
        auto field = [&](double, UniformParam s) {
            const auto g = ctx_.gradient({s.m, std::max(s.sigma, 0.0)});
            return UniformParam{-g[0], -g[1]};
        };
        UniformParam out = rk4_step(field, 0.0, p, dt);
        out.sigma = std::max(out.sigma, 0.0);
        return out;
    }

    const F2Context& ctx_;
};

} // namespace detail

/// Plane gradient flow (ṁ, σ̇) = -grad F(m, sigma) by RK4 with seam event
/// detection (analytic Dirac-target case), sigma >= 0 enforced by projection,
/// and per-step energy rejection (halve the step on an energy increase, fail
/// after 40 halvings).
inline ParamTrajectory s2_flow(UniformParam p0, const Measure1D& nu, Kernel k,
                               double t_end, double h) {
    if (!(h > 0.0)) throw InvariantError("s2_flow: requires h > 0");
    if (t_end < 0.0) throw InvariantError("s2_flow: requires t_end >= 0");
    if (p0.sigma < 0.0) throw InvariantError("s2_flow: sigma must be >= 0");

    detail::F2Context ctx(nu, k);
    detail::S2Integrator integ(ctx);

    ParamTrajectory traj;
    UniformParam p = p0;
    double energy = ctx.energy(p);
    traj.record(0.0, p, energy);

    double t = 0.0;
    while (t < t_end - 1e-12) {
        const double hs = std::min(h, t_end - t);
        p = integ.advance(p, hs);
        const double e = ctx.energy(p);
        traj.max_step_energy_increase = std::max(traj.max_step_energy_increase, e - energy);
        energy = e;
        t += hs;
        traj.record(t, p, energy);
    }
    return traj;
}

// ============================================================================
// Energy landscape over the (m, sigma) plane
// ============================================================================

struct LandscapeGrid {
    std::vector<double> m_coords;
    std::vector<double> sigma_coords;
    std::vector<double> values; ///< row-major: values[si * m_coords.size() + mi]

    double at(std::size_t si, std::size_t mi) const {
        return values[si * m_coords.size() + mi];
    }
};

/// F(m, sigma) on the tensor grid [m_lo, m_hi] x [sigma_lo, sigma_hi].
/// Cells are evaluated independently (optionally in parallel); the result is
/// NaN-free or a NumericError is raised.
inline LandscapeGrid landscape_grid(const Measure1D& nu, Kernel k, double m_lo,
                                    double m_hi, double sigma_lo, double sigma_hi,
                                    int m_res, int sigma_res, int threads = 1) {
    if (m_res < 2 || sigma_res < 2)
        throw InvariantError("landscape_grid: resolution must be >= 2 per axis");
    if (!(m_lo < m_hi) || !(sigma_lo < sigma_hi) || sigma_lo < 0.0)
        throw InvariantError("landscape_grid: invalid ranges");

    LandscapeGrid grid;
    grid.m_coords.resize(static_cast<std::size_t>(m_res));
    grid.sigma_coords.resize(static_cast<std::size_t>(sigma_res));
    for (int i = 0; i < m_res; ++i)
        grid.m_coords[static_cast<std::size_t>(i)] =
            m_lo + (m_hi - m_lo) * i / (m_res - 1.0);
    for (int j = 0; j < sigma_res; ++j)
        grid.sigma_coords[static_cast<std::size_t>(j)] =
            sigma_lo + (sigma_hi - sigma_lo) * j / (sigma_res - 1.0);
    grid.values.assign(grid.m_coords.size() * grid.sigma_coords.size(), 0.0);

    detail::F2Context ctx(nu, k);
    auto run_rows = [&](std::size_t begin, std::size_t end) {
        for (std::size_t sj = begin; sj < end; ++sj)
            for (std::size_t mi = 0; mi < grid.m_coords.size(); ++mi)
                grid.values[sj * grid.m_coords.size() + mi] =
                    ctx.energy({grid.m_coords[mi], grid.sigma_coords[sj]});
    };

    const std::size_t rows = grid.sigma_coords.size();
    if (threads <= 1) {
        run_rows(0, rows);
    } else {
        std::vector<std::thread> pool;
        const std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(threads), rows);
        for (std::size_t t = 0; t < nt; ++t) {
            const std::size_t b = rows * t / nt, e = rows * (t + 1) / nt;
            pool.emplace_back(run_rows, b, e);
        }
        for (auto& th : pool) th.join();
    }

    for (double v : grid.values)
        if (!std::isfinite(v)) throw NumericError("landscape_grid: non-finite value");
    return grid;
}

/// Finite-difference gradient of F at p through the even sigma-extension
/// F(m, -sigma) = F(m, sigma) (central differences stay meaningful on the
/// boundary sigma = 0; only sensible for the smooth kernel there).
inline std::array<double, 2> f2_fd_gradient_even(UniformParam p, const Measure1D& nu,
                                                 Kernel k, double eps = 1e-5) {
    detail::F2Context ctx(nu, k);
    auto F = [&](double m, double s) { return ctx.energy({m, std::abs(s)}); };
    return {(F(p.m + eps, p.sigma) - F(p.m - eps, p.sigma)) / (2.0 * eps),
            (F(p.m, p.sigma + eps) - F(p.m, p.sigma - eps)) / (2.0 * eps)};
}

/// Finite-difference Hessian entries (h_mm, h_ms, h_ss) with the same even
/// extension.
inline std::array<double, 3> f2_fd_hessian_even(UniformParam p, const Measure1D& nu,
                                                Kernel k, double eps = 1e-3) {
    detail::F2Context ctx(nu, k);
    auto F = [&](double m, double s) { return ctx.energy({m, std::abs(s)}); };
    const double f0 = F(p.m, p.sigma);
    const double h_mm = (F(p.m + eps, p.sigma) - 2.0 * f0 + F(p.m - eps, p.sigma)) / (eps * eps);
    const double h_ss = (F(p.m, p.sigma + eps) - 2.0 * f0 + F(p.m, p.sigma - eps)) / (eps * eps);
    const double h_ms = (F(p.m + eps, p.sigma + eps) - F(p.m + eps, p.sigma - eps) -
                         F(p.m - eps, p.sigma + eps) + F(p.m - eps, p.sigma - eps)) /
                        (4.0 * eps * eps);
    return {h_mm, h_ms, h_ss};
}

/// Eigenvalues of the symmetric 2x2 matrix [[a, b], [b, c]].
inline std::array<double, 2> sym2_eigenvalues(double a, double b, double c) {
    const double tr = a + c;
    const double disc = std::sqrt(std::max(0.0, 0.25 * (a - c) * (a - c) + b * b));
    return {0.5 * tr - disc, 0.5 * tr + disc};
}

// ============================================================================
// Particle flow (smooth kernel)
// ============================================================================

/// Explicit gradient descent on particle positions of D^2(mu_N, nu) with
/// mu_N the equal-weight empirical measure. Only defined for the smooth
/// kernel: with the distance kernel particle flows are not gradient flows of
/// the discrepancy (particles spread into absolutely continuous measures).
inline ParticleTrajectory particle_flow_smooth(std::vector<double> xs, const Measure1D& nu,
                                               Kernel k, double h, int steps,
                                               int record_every = 1) {
    if (k.type != KernelType::CompactSmooth)
        throw InvariantError("particle_flow_smooth: requires the smooth kernel");
    if (!(h > 0.0)) throw InvariantError("particle_flow_smooth: requires h > 0");
    if (steps < 0) throw InvariantError("particle_flow_smooth: requires steps >= 0");
    if (record_every < 1) throw InvariantError("particle_flow_smooth: record_every >= 1");
    if (xs.empty()) throw InvariantError("particle_flow_smooth: no particles");

    const double n = static_cast<double>(xs.size());
    const auto cn = detail::components(nu);
    const double e_nu = interaction_energy(nu, k);

    // -int K(x, y) d nu(y) and its x-derivative, exact through the kernel
    // antiderivative on uniform pieces.
    auto potential_at = [&](double x) {
        double v = 0.0;
        for (const auto& c : cn) {
            if (c.is_atom)
                v -= c.w * detail::smooth_profile(x - c.x);
            else
                v -= c.w / (c.b - c.a) *
                     (detail::smooth_profile_antiderivative(x - c.a) -
                      detail::smooth_profile_antiderivative(x - c.b));
        }
        return v;
    };
    auto potential_grad_at = [&](double x) {
        double g = 0.0;
        for (const auto& c : cn) {
            if (c.is_atom)
                g -= c.w * detail::smooth_profile_d(x - c.x);
            else
                g -= c.w / (c.b - c.a) *
                     (detail::smooth_profile(x - c.a) - detail::smooth_profile(x - c.b));
        }
        return g;
    };
    auto energy = [&](const std::vector<double>& p) {
        double e_mu = 0.0, v = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            for (std::size_t j = 0; j < p.size(); ++j)
                e_mu += detail::smooth_profile(p[i] - p[j]);
            v += potential_at(p[i]);
        }
        return 0.5 * e_mu / (n * n) + v / n + e_nu;
    };

    ParticleTrajectory traj;
    double e = energy(xs);
    traj.record(0.0, xs, e);
    std::vector<double> grad(xs.size());
    for (int k_step = 1; k_step <= steps; ++k_step) {
        for (std::size_t i = 0; i < xs.size(); ++i) {
            double g = 0.0;
            for (std::size_t j = 0; j < xs.size(); ++j)
                g += detail::smooth_profile_d(xs[i] - xs[j]);
            grad[i] = g / (n * n) + potential_grad_at(xs[i]) / n;
        }
        for (std::size_t i = 0; i < xs.size(); ++i) xs[i] -= h * grad[i];
        const double e_new = energy(xs);
        traj.max_step_energy_increase = std::max(traj.max_step_energy_increase, e_new - e);
        e = e_new;
        if (k_step % record_every == 0 || k_step == steps)
            traj.record(static_cast<double>(k_step) * h, xs, e);
    }
    return traj;
}

} // namespace mmdflow
