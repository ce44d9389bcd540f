#pragma once

// Exact representation of probability measures on the real line as weighted
// atoms plus weighted uniform segments, together with the CDF / quantile
// machinery that embeds them isometrically into L2((0,1)):
//
//   R_mu(x)  = mu((-inf, x])                          (right-continuous CDF)
//   Q_mu(p)  = min { x : R_mu(x) >= p }               (left-continuous quantile)
//   mu       = (Q_mu)_# lambda_(0,1)                  (push-forward identity)
//   W2^2(mu, nu) = int_0^1 |Q_mu(s) - Q_nu(s)|^2 ds   (quantile isometry)
//
// Everything here is exact piecewise-linear/piecewise-quadratic arithmetic;
// no sampling error enters the W2 or energy computations downstream.

#include "mmdflow/errors.hpp"
#include "mmdflow/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace mmdflow {

// ============================================================================
// Measure1D
// ============================================================================

struct Atom {
    double x; ///< position
    double w; ///< mass, > 0
};

struct UniformPiece {
    double a; ///< left endpoint
    double b; ///< right endpoint, > a
    double w; ///< total mass of the piece, > 0
};

/// Probability measure on R: finitely many atoms plus finitely many uniform
/// pieces. Canonical form: atoms sorted by position with exactly coincident
/// positions merged, uniform pieces sorted by (a, b). Pieces may overlap each
/// other and atoms; the CDF sums contributions. Total mass must be 1 within
/// 1e-12.
class Measure1D {
public:
    Measure1D(std::vector<Atom> atoms, std::vector<UniformPiece> uniforms)
        : atoms_(std::move(atoms)), uniforms_(std::move(uniforms)) {
        canonicalize();
        validate();
    }

    static Measure1D dirac(double x) { return Measure1D({{x, 1.0}}, {}); }

    static Measure1D uniform(double a, double b, double mass = 1.0) {
        return Measure1D({}, {{a, b, mass}});
    }

    /// Equal-weight empirical measure on the given support points
    /// (coincident points merge their mass).
    static Measure1D empirical(const std::vector<double>& points) {
        if (points.empty()) throw InvariantError("empirical: no support points");
        const double w = 1.0 / static_cast<double>(points.size());
        std::vector<Atom> atoms;
        atoms.reserve(points.size());
        for (double x : points) atoms.push_back({x, w});
        return Measure1D(std::move(atoms), {});
    }

    const std::vector<Atom>& atoms() const { return atoms_; }
    const std::vector<UniformPiece>& uniforms() const { return uniforms_; }

    double total_mass() const {
        double t = 0.0;
        for (const Atom& a : atoms_) t += a.w;
        for (const UniformPiece& u : uniforms_) t += u.w;
        return t;
    }

    /// Smallest interval containing the support.
    std::pair<double, double> support_bounds() const {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const Atom& a : atoms_) {
            lo = std::min(lo, a.x);
            hi = std::max(hi, a.x);
        }
        for (const UniformPiece& u : uniforms_) {
            lo = std::min(lo, u.a);
            hi = std::max(hi, u.b);
        }
        return {lo, hi};
    }

private:
    void canonicalize() {
        std::sort(atoms_.begin(), atoms_.end(),
                  [](const Atom& l, const Atom& r) { return l.x < r.x; });
        std::vector<Atom> merged;
        merged.reserve(atoms_.size());
        for (const Atom& a : atoms_) {
            if (!merged.empty() && merged.back().x == a.x)
                merged.back().w += a.w;
            else
                merged.push_back(a);
        }
        atoms_ = std::move(merged);
        std::sort(uniforms_.begin(), uniforms_.end(),
                  [](const UniformPiece& l, const UniformPiece& r) {
                      return l.a < r.a || (l.a == r.a && l.b < r.b);
                  });
    }

    void validate() const {
        for (const Atom& a : atoms_) {
            if (!std::isfinite(a.x)) throw InvariantError("Measure1D: non-finite atom position");
            if (!(a.w > 0.0)) throw InvariantError("Measure1D: atom mass must be > 0");
        }
        for (const UniformPiece& u : uniforms_) {
            if (!std::isfinite(u.a) || !std::isfinite(u.b))
                throw InvariantError("Measure1D: non-finite uniform endpoint");
            if (!(u.a < u.b)) throw InvariantError("Measure1D: uniform piece needs a < b");
            if (!(u.w > 0.0)) throw InvariantError("Measure1D: uniform mass must be > 0");
        }
        if (atoms_.empty() && uniforms_.empty())
            throw InvariantError("Measure1D: empty measure");
        const double t = total_mass();
        if (std::abs(t - 1.0) > 1e-12)
            throw InvariantError("Measure1D: total mass " + std::to_string(t) +
                                 " differs from 1 beyond 1e-12");
    }

    std::vector<Atom> atoms_;
    std::vector<UniformPiece> uniforms_;
};

// ============================================================================
// CDF
// ============================================================================

/// R_mu(x) = mu((-inf, x]); right-continuous, nondecreasing, limits 0 / 1.
inline double cdf_eval(const Measure1D& mu, double x) {
    double r = 0.0;
    for (const Atom& a : mu.atoms())
        if (a.x <= x) r += a.w;
    for (const UniformPiece& u : mu.uniforms()) {
        if (x <= u.a) continue;
        r += (x >= u.b) ? u.w : u.w * (x - u.a) / (u.b - u.a);
    }
    return r;
}

/// Left limit R_mu(x-) = mu((-inf, x)).
inline double cdf_left(const Measure1D& mu, double x) {
    double r = 0.0;
    for (const Atom& a : mu.atoms())
        if (a.x < x) r += a.w;
    for (const UniformPiece& u : mu.uniforms()) {
        if (x <= u.a) continue;
        r += (x >= u.b) ? u.w : u.w * (x - u.a) / (u.b - u.a);
    }
    return r;
}

// ============================================================================
// QuantileFn
// ============================================================================

/// One affine segment of a quantile function, valid on (s_lo, s_hi] in the
/// parameter domain with values running affinely from v_lo to v_hi.
struct QuantileSegment {
    double s_lo;
    double s_hi;
    double v_lo;
    double v_hi;

    double value_at(double s) const {
        if (s_hi == s_lo) return v_hi;
        const double t = (s - s_lo) / (s_hi - s_lo);
        return v_lo + (v_hi - v_lo) * t;
    }
    bool flat() const { return v_lo == v_hi; }
};

/// Nondecreasing, left-continuous, piecewise-affine function on (0,1) with an
/// explicit segment partition. This is the exact image of a Measure1D under
/// the quantile embedding: atoms become flat segments (length = mass) and
/// uniform pieces become strictly increasing affine segments. Gaps in the
/// support appear as jumps between consecutive segments.
class QuantileFn {
public:
    explicit QuantileFn(std::vector<QuantileSegment> segments)
        : segs_(std::move(segments)) {
        validate();
    }

    static QuantileFn constant(double q) { return QuantileFn({{0.0, 1.0, q, q}}); }

    /// Affine function s -> v0 + (v1 - v0) s on (0,1); requires v0 <= v1.
    static QuantileFn affine(double v0, double v1) {
        return QuantileFn({{0.0, 1.0, v0, v1}});
    }

    const std::vector<QuantileSegment>& segments() const { return segs_; }

    /// Left-continuous evaluation: the segment with s in (s_lo, s_hi].
    double operator()(double s) const {
        return segs_[find_left(s)].value_at(s);
    }

    /// Right-continuous evaluation: the segment with s in [s_lo, s_hi).
    /// Differs from operator() only at the jump points.
    double value_right(double s) const {
        return segs_[find_right(s)].value_at(s);
    }

    /// Parameter partition points, including 0 and 1.
    std::vector<double> breakpoints() const {
        std::vector<double> b;
        b.reserve(segs_.size() + 1);
        b.push_back(segs_.front().s_lo);
        for (const QuantileSegment& s : segs_) b.push_back(s.s_hi);
        return b;
    }

    double min_value() const { return segs_.front().v_lo; }
    double max_value() const { return segs_.back().v_hi; }

private:
    std::size_t find_left(double s) const {
        // first segment with s_hi >= s
        std::size_t lo = 0, hi = segs_.size() - 1;
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (segs_[mid].s_hi >= s)
                hi = mid;
            else
                lo = mid + 1;
        }
        return lo;
    }

    std::size_t find_right(double s) const {
        // last segment with s_lo <= s
        std::size_t lo = 0, hi = segs_.size() - 1;
        while (lo < hi) {
            const std::size_t mid = (lo + hi + 1) / 2;
            if (segs_[mid].s_lo <= s)
                lo = mid;
            else
                hi = mid - 1;
        }
        return lo;
    }

    void validate() const {
        if (segs_.empty()) throw InvariantError("QuantileFn: no segments");
        if (segs_.front().s_lo != 0.0 || segs_.back().s_hi != 1.0)
            throw InvariantError("QuantileFn: segments must span (0,1)");
        const QuantileSegment* prev = nullptr;
        for (const QuantileSegment& s : segs_) {
            if (!(s.s_lo < s.s_hi))
                throw InvariantError("QuantileFn: degenerate segment");
            if (!std::isfinite(s.v_lo) || !std::isfinite(s.v_hi))
                throw InvariantError("QuantileFn: non-finite value");
            if (s.v_hi < s.v_lo)
                throw InvariantError("QuantileFn: decreasing segment");
            if (prev) {
                if (prev->s_hi != s.s_lo)
                    throw InvariantError("QuantileFn: segments must partition (0,1)");
                if (s.v_lo < prev->v_hi)
                    throw InvariantError("QuantileFn: decreasing across segments");
            }
            prev = &s;
        }
    }

    std::vector<QuantileSegment> segs_;
};

// ============================================================================
// QuantileGrid
// ============================================================================

/// Quantile values sampled on the uniform midpoint grid s_i = (i + 1/2)/n.
/// This is the state vector of the discretized flows. No intrinsic
/// monotonicity invariant: flow intermediates may transiently violate it
/// before projection back onto the cone.
struct QuantileGrid {
    std::vector<double> values;

    int n() const { return static_cast<int>(values.size()); }

    static double midpoint(int i, int n) {
        return (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    }

    double midpoint(int i) const { return midpoint(i, n()); }

    bool is_monotone(double slack = 0.0) const {
        return is_nondecreasing(values, slack);
    }
};

// ============================================================================
// quantile: Measure1D -> QuantileFn
// ============================================================================

/// Exact quantile function of a mixed measure. Atoms of mass w become flat
/// segments of parameter length w; regions of positive density become
/// strictly increasing affine segments; support gaps become jumps.
inline QuantileFn quantile(const Measure1D& mu) {
    // Critical x positions: atom locations and uniform endpoints.
    std::vector<double> xs;
    xs.reserve(mu.atoms().size() + 2 * mu.uniforms().size());
    for (const Atom& a : mu.atoms()) xs.push_back(a.x);
    for (const UniformPiece& u : mu.uniforms()) {
        xs.push_back(u.a);
        xs.push_back(u.b);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

    struct RawSeg {
        double mass;
        double v_lo, v_hi;
    };
    std::vector<RawSeg> raw;
    raw.reserve(2 * xs.size());

    auto atom_mass_at = [&](double x) {
        for (const Atom& a : mu.atoms())
            if (a.x == x) return a.w;
        return 0.0;
    };

    for (std::size_t j = 0; j < xs.size(); ++j) {
        const double m = atom_mass_at(xs[j]);
        if (m > 0.0) raw.push_back({m, xs[j], xs[j]});
        if (j + 1 < xs.size()) {
            // density over (xs[j], xs[j+1]) from all covering uniform pieces
            double mass = 0.0;
            for (const UniformPiece& u : mu.uniforms())
                if (u.a <= xs[j] && xs[j + 1] <= u.b)
                    mass += u.w * (xs[j + 1] - xs[j]) / (u.b - u.a);
            if (mass > 0.0) raw.push_back({mass, xs[j], xs[j + 1]});
        }
    }

    // Cumulative masses, normalized so the partition ends exactly at 1.
    double total = 0.0;
    for (const RawSeg& r : raw) total += r.mass;
    std::vector<QuantileSegment> segs;
    segs.reserve(raw.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double lo = (i == 0) ? 0.0 : acc / total;
        acc += raw[i].mass;
        const double hi = (i + 1 == raw.size()) ? 1.0 : acc / total;
        if (hi > lo) segs.push_back({lo, hi, raw[i].v_lo, raw[i].v_hi});
    }
    return QuantileFn(std::move(segs));
}

// ============================================================================
// pushforward_from_quantile: QuantileFn -> Measure1D
// ============================================================================

/// Push-forward of Lebesgue measure on (0,1) through a quantile function:
/// flat segments of total parameter length w at value x become the atom
/// (x, w); strictly increasing segments become uniform pieces. Inverse of
/// `quantile` up to representation (the measures agree exactly).
inline Measure1D pushforward_from_quantile(const QuantileFn& q) {
    std::vector<Atom> atoms;
    std::vector<UniformPiece> uniforms;
    for (const QuantileSegment& s : q.segments()) {
        const double w = s.s_hi - s.s_lo;
        if (s.flat()) {
            if (!atoms.empty() && atoms.back().x == s.v_lo)
                atoms.back().w += w;
            else
                atoms.push_back({s.v_lo, w});
        } else {
            uniforms.push_back({s.v_lo, s.v_hi, w});
        }
    }
    return Measure1D(std::move(atoms), std::move(uniforms));
}

// ============================================================================
// W2 by exact quantile integration
// ============================================================================

namespace detail {

/// Merged parameter partition of two quantile functions.
inline std::vector<double> merged_breakpoints(const QuantileFn& a, const QuantileFn& b) {
    std::vector<double> pa = a.breakpoints();
    std::vector<double> pb = b.breakpoints();
    std::vector<double> out;
    out.reserve(pa.size() + pb.size());
    std::merge(pa.begin(), pa.end(), pb.begin(), pb.end(), std::back_inserter(out));
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

} // namespace detail

/// Squared Wasserstein-2 distance, integrated exactly over the union of the
/// two quantile partitions (the integrand is quadratic on each cell, so the
/// three-point Simpson rule is exact).
inline double w2_squared(const Measure1D& mu, const Measure1D& nu) {
    const QuantileFn qa = quantile(mu);
    const QuantileFn qb = quantile(nu);
    const std::vector<double> bp = detail::merged_breakpoints(qa, qb);
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
        const double p = bp[i], r = bp[i + 1];
        const double m = 0.5 * (p + r);
        // affine endpoint values inside the cell (right/left limits at edges)
        const double da = qa.value_right(p) - qb.value_right(p);
        const double dm = qa(m) - qb(m);
        const double db = qa(r) - qb(r);
        acc += (r - p) / 6.0 * (da * da + 4.0 * dm * dm + db * db);
    }
    return acc;
}

/// Wasserstein-2 distance (not squared).
inline double w2(const Measure1D& mu, const Measure1D& nu) {
    return std::sqrt(std::max(0.0, w2_squared(mu, nu)));
}

// ============================================================================
// Grid sampling
// ============================================================================

/// Quantile values at the cell midpoints s_i = (i + 1/2)/n. Midpoints avoid
/// the boundary of (0,1) where quantiles of unbounded measures would diverge.
inline QuantileGrid sample_quantile_grid(const QuantileFn& q, int n) {
    if (n < 2) throw InvariantError("sample_quantile_grid: requires n >= 2");
    QuantileGrid g;
    g.values.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        g.values[static_cast<std::size_t>(i)] = q(QuantileGrid::midpoint(i, n));
    return g;
}

// ============================================================================
// Expected distance to a measure (used by the energy formulas)
// ============================================================================

namespace detail {

/// E |v - Y| for Y uniform on [a, b] with total mass 1.
inline double mean_abs_to_uniform(double v, double a, double b) {
    if (v <= a) return 0.5 * (a + b) - v;
    if (v >= b) return v - 0.5 * (a + b);
    const double l = v - a, r = b - v;
    return 0.5 * (l * l + r * r) / (b - a);
}

} // namespace detail

/// A_nu(v) = integral of |v - y| d nu(y); convex piecewise-quadratic in v with
/// breakpoints at the atoms and uniform endpoints of nu.
inline double expected_distance(const Measure1D& nu, double v) {
    double acc = 0.0;
    for (const Atom& a : nu.atoms()) acc += a.w * std::abs(v - a.x);
    for (const UniformPiece& u : nu.uniforms())
        acc += u.w * detail::mean_abs_to_uniform(v, u.a, u.b);
    return acc;
}

// ============================================================================
// Measure equality (canonical comparison through the quantile embedding)
// ============================================================================

/// Wasserstein-1 distance int_0^1 |Q_mu - Q_nu| ds, integrated exactly over
/// the merged partition (the difference is affine per cell; cells with a sign
/// change are split at the zero crossing). This is the natural
/// mass-times-position metric: zero iff the measures are equal.
inline double w1(const Measure1D& mu, const Measure1D& nu) {
    const QuantileFn qa = quantile(mu);
    const QuantileFn qb = quantile(nu);
    const std::vector<double> bp = detail::merged_breakpoints(qa, qb);
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
        const double p = bp[i], r = bp[i + 1];
        const double da = qa.value_right(p) - qb.value_right(p);
        const double db = qa(r) - qb(r);
        if (da * db >= 0.0) {
            acc += 0.5 * (std::abs(da) + std::abs(db)) * (r - p);
        } else {
            const double sc = p + (r - p) * da / (da - db);
            acc += 0.5 * std::abs(da) * (sc - p) + 0.5 * std::abs(db) * (r - sc);
        }
    }
    return acc;
}

/// Equality of measures up to `tol` in transported mass x position (W1).
inline bool approx_equal(const Measure1D& mu, const Measure1D& nu, double tol = 1e-12) {
    return w1(mu, nu) <= tol;
}

} // namespace mmdflow
