#pragma once

// Minimal self-contained SVG rendering: axes, polylines, filled regions,
// impulse markers, and marching-squares contours. Enough to draw density
// panels (absolutely continuous part as a filled curve whose area equals its
// mass, atoms as vertical impulses whose height equals their mass) and
// energy-landscape contour plots with trajectory overlays.

#include "mmdflow/measure.hpp"
#include "mmdflow/restricted.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

namespace mmdflow {

namespace svg_detail {

inline std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", x);
    return buf;
}

} // namespace svg_detail

/// A fixed-size canvas mapping a data rectangle to pixel coordinates.
class SvgCanvas {
public:
    SvgCanvas(double x_min, double x_max, double y_min, double y_max, int width = 640,
              int height = 420, int margin = 48)
        : x_min_(x_min), x_max_(x_max), y_min_(y_min), y_max_(y_max), width_(width),
          height_(height), margin_(margin) {}

    double px(double x) const {
        return margin_ + (x - x_min_) / (x_max_ - x_min_) * (width_ - 2.0 * margin_);
    }
    double py(double y) const {
        return height_ - margin_ -
               (y - y_min_) / (y_max_ - y_min_) * (height_ - 2.0 * margin_);
    }

    void polyline(const std::vector<std::pair<double, double>>& pts,
                  const std::string& stroke, double width = 1.5) {
        if (pts.size() < 2) return;
        body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\""
              << width << "\" points=\"";
        for (const auto& [x, y] : pts)
            body_ << svg_detail::num(px(x)) << "," << svg_detail::num(py(y)) << " ";
        body_ << "\"/>\n";
    }

    void filled_region(const std::vector<std::pair<double, double>>& pts,
                       const std::string& fill, double baseline = 0.0) {
        if (pts.size() < 2) return;
        body_ << "<path fill=\"" << fill << "\" fill-opacity=\"0.45\" stroke=\"none\" d=\"M "
              << svg_detail::num(px(pts.front().first)) << " "
              << svg_detail::num(py(baseline));
        for (const auto& [x, y] : pts)
            body_ << " L " << svg_detail::num(px(x)) << " " << svg_detail::num(py(y));
        body_ << " L " << svg_detail::num(px(pts.back().first)) << " "
              << svg_detail::num(py(baseline)) << " Z\"/>\n";
    }

    void line(double x0, double y0, double x1, double y1, const std::string& stroke,
              double width = 1.0, const std::string& dash = "") {
        body_ << "<line x1=\"" << svg_detail::num(px(x0)) << "\" y1=\""
              << svg_detail::num(py(y0)) << "\" x2=\"" << svg_detail::num(px(x1))
              << "\" y2=\"" << svg_detail::num(py(y1)) << "\" stroke=\"" << stroke
              << "\" stroke-width=\"" << width << "\"";
        if (!dash.empty()) body_ << " stroke-dasharray=\"" << dash << "\"";
        body_ << "/>\n";
    }

    void circle(double x, double y, double r, const std::string& fill) {
        body_ << "<circle cx=\"" << svg_detail::num(px(x)) << "\" cy=\""
              << svg_detail::num(py(y)) << "\" r=\"" << r << "\" fill=\"" << fill
              << "\"/>\n";
    }

    void text(double x, double y, const std::string& s, int size = 11,
              const std::string& anchor = "middle") {
        body_ << "<text x=\"" << svg_detail::num(px(x)) << "\" y=\""
              << svg_detail::num(py(y)) << "\" font-size=\"" << size
              << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\">" << s
              << "</text>\n";
    }

    /// Vertical impulse from the baseline with a mass label (atom convention).
    void impulse(double x, double height, const std::string& stroke,
                 const std::string& label) {
        line(x, 0.0, x, height, stroke, 2.5, "4,3");
        circle(x, height, 3.0, stroke);
        if (!label.empty()) text(x, height + 0.04 * (y_max_ - y_min_), label, 10);
    }

    void axes(const std::string& x_label = "", const std::string& y_label = "") {
        const double y0 = std::clamp(0.0, y_min_, y_max_);
        line(x_min_, y0, x_max_, y0, "#333", 1.0);
        const double x0 = std::clamp(0.0, x_min_, x_max_);
        line(x0, y_min_, x0, y_max_, "#333", 1.0);
        for (int i = 0; i <= 4; ++i) {
            const double x = x_min_ + (x_max_ - x_min_) * i / 4.0;
            const double y = y_min_ + (y_max_ - y_min_) * i / 4.0;
            text(x, y_min_ - 0.06 * (y_max_ - y_min_), svg_detail::num(x), 10);
            text(x_min_ - 0.04 * (x_max_ - x_min_), y, svg_detail::num(y), 10, "end");
        }
        if (!x_label.empty())
            text(0.5 * (x_min_ + x_max_), y_min_ - 0.12 * (y_max_ - y_min_), x_label, 12);
        if (!y_label.empty())
            text(x_min_, y_max_ + 0.03 * (y_max_ - y_min_), y_label, 12, "start");
    }

    std::string finish() const {
        std::ostringstream os;
        os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_
           << "\" height=\"" << height_ << "\" viewBox=\"0 0 " << width_ << " "
           << height_ << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
           << body_.str() << "</svg>\n";
        return os.str();
    }

    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }
    double y_min() const { return y_min_; }
    double y_max() const { return y_max_; }

private:
    double x_min_, x_max_, y_min_, y_max_;
    int width_, height_, margin_;
    std::ostringstream body_;
};

// ============================================================================
// Density panel for a measure
// ============================================================================

namespace svg_detail {

/// Piecewise-constant density of the absolutely continuous part, as a
/// step-outline polyline over [lo, hi].
inline std::vector<std::pair<double, double>> density_outline(const Measure1D& mu,
                                                              double lo, double hi) {
    std::vector<double> cuts = {lo, hi};
    for (const UniformPiece& u : mu.uniforms()) {
        cuts.push_back(u.a);
        cuts.push_back(u.b);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        double d = 0.0;
        for (const UniformPiece& u : mu.uniforms())
            if (u.a <= cuts[i] && cuts[i + 1] <= u.b) d += u.w / (u.b - u.a);
        pts.emplace_back(cuts[i], d);
        pts.emplace_back(cuts[i + 1], d);
    }
    return pts;
}

} // namespace svg_detail

/// Density panel: filled piecewise-constant density (area equals mass) plus
/// red impulses for atoms (height equals mass), labeled with the mass.
inline std::string render_density_svg(const Measure1D& mu, const std::string& title) {
    auto [lo, hi] = mu.support_bounds();
    const double pad = std::max(0.2, 0.1 * (hi - lo));
    lo -= pad;
    hi += pad;
    double y_max = 1.0;
    const auto outline = svg_detail::density_outline(mu, lo, hi);
    for (const auto& [x, d] : outline) y_max = std::max(y_max, d);
    for (const Atom& a : mu.atoms()) y_max = std::max(y_max, a.w);
    SvgCanvas canvas(lo, hi, 0.0, 1.15 * y_max);
    canvas.axes("x", "density / atom mass");
    canvas.filled_region(outline, "#4477cc");
    canvas.polyline(outline, "#224488", 1.5);
    for (const Atom& a : mu.atoms()) {
        char label[32];
        std::snprintf(label, sizeof(label), "%.4g", a.w);
        canvas.impulse(a.x, a.w, "#cc3333", label);
    }
    if (!title.empty())
        canvas.text(0.5 * (lo + hi), 1.1 * y_max, title, 13);
    return canvas.finish();
}

// ============================================================================
// Landscape contours (marching squares) with optional trajectory overlay
// ============================================================================

inline std::string render_landscape_svg(const LandscapeGrid& grid,
                                        const std::vector<std::pair<double, double>>& traj,
                                        int levels = 12) {
    const double m_lo = grid.m_coords.front(), m_hi = grid.m_coords.back();
    const double s_lo = grid.sigma_coords.front(), s_hi = grid.sigma_coords.back();
    SvgCanvas canvas(m_lo, m_hi, s_lo, s_hi);
    canvas.axes("m", "sigma");

    double v_min = grid.values.front(), v_max = v_min;
    std::size_t arg_min = 0;
    for (std::size_t i = 0; i < grid.values.size(); ++i) {
        if (grid.values[i] < v_min) {
            v_min = grid.values[i];
            arg_min = i;
        }
        v_max = std::max(v_max, grid.values[i]);
    }

    // marching-squares iso-lines, emitted as short segments per cell
    const std::size_t M = grid.m_coords.size(), S = grid.sigma_coords.size();
    for (int l = 1; l <= levels; ++l) {
        const double c = v_min + (v_max - v_min) * l / (levels + 1.0);
        for (std::size_t sj = 0; sj + 1 < S; ++sj) {
            for (std::size_t mi = 0; mi + 1 < M; ++mi) {
                const double x0 = grid.m_coords[mi], x1 = grid.m_coords[mi + 1];
                const double y0 = grid.sigma_coords[sj], y1 = grid.sigma_coords[sj + 1];
                const double v00 = grid.at(sj, mi), v10 = grid.at(sj, mi + 1);
                const double v01 = grid.at(sj + 1, mi), v11 = grid.at(sj + 1, mi + 1);
                std::vector<std::pair<double, double>> hits;
                auto edge = [&](double va, double vb, double xa, double ya, double xb,
                                double yb) {
                    if ((va < c) == (vb < c)) return;
                    const double t = (c - va) / (vb - va);
                    hits.emplace_back(xa + t * (xb - xa), ya + t * (yb - ya));
                };
                edge(v00, v10, x0, y0, x1, y0);
                edge(v10, v11, x1, y0, x1, y1);
                edge(v01, v11, x0, y1, x1, y1);
                edge(v00, v01, x0, y0, x0, y1);
                if (hits.size() >= 2)
                    canvas.line(hits[0].first, hits[0].second, hits[1].first,
                                hits[1].second, "#888888", 0.8);
                if (hits.size() == 4)
                    canvas.line(hits[2].first, hits[2].second, hits[3].first,
                                hits[3].second, "#888888", 0.8);
            }
        }
    }

    // grid minimum marker
    const std::size_t min_sj = arg_min / M, min_mi = arg_min % M;
    canvas.circle(grid.m_coords[min_mi], grid.sigma_coords[min_sj], 4.0, "#cc3333");

    if (!traj.empty()) {
        canvas.polyline(traj, "#000000", 1.8);
        canvas.circle(traj.front().first, traj.front().second, 3.0, "#000000");
    }
    return canvas.finish();
}

/// Scalar trajectory plot (t, x(t)).
inline std::string render_scalar_trajectory_svg(const ScalarTrajectory& traj) {
    double y_lo = traj.states.front(), y_hi = y_lo;
    for (double x : traj.states) {
        y_lo = std::min(y_lo, x);
        y_hi = std::max(y_hi, x);
    }
    if (y_hi - y_lo < 1e-9) {
        y_lo -= 1.0;
        y_hi += 1.0;
    }
    const double pad = 0.1 * (y_hi - y_lo);
    SvgCanvas canvas(traj.times.front(), traj.times.back(), y_lo - pad, y_hi + pad);
    canvas.axes("t", "x");
    std::vector<std::pair<double, double>> pts;
    pts.reserve(traj.size());
    for (std::size_t i = 0; i < traj.size(); ++i)
        pts.emplace_back(traj.times[i], traj.states[i]);
    canvas.polyline(pts, "#000000", 1.8);
    return canvas.finish();
}

} // namespace mmdflow
