#include "kh/harness/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <utility>
#include <vector>

namespace kh::harness {

namespace {

constexpr const char* kOrbitColour = "#333333";
constexpr const char* kDomainColour = "#7b3fa0";  // purple
constexpr const char* kImageColour = "#e8801a";   // orange
constexpr const char* kSunColour = "#f2b705";
constexpr int kMargin = 48;

std::string num(double v, const char* fmt = "%.2f")
{
    char buf[48];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

struct Bounds {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -std::numeric_limits<double>::infinity();
    double y0 = std::numeric_limits<double>::infinity(), y1 = -std::numeric_limits<double>::infinity();

    void add(double x, double y)
    {
        if (!std::isfinite(x) || !std::isfinite(y))
            return;
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
    }

    void pad()
    {
        if (!(x1 >= x0)) {
            x0 = -1;
            x1 = 1;
        }
        if (!(y1 >= y0)) {
            y0 = -1;
            y1 = 1;
        }
        auto widen = [](double& lo, double& hi) {
            const double span = hi - lo;
            const double d = span > 0 ? 0.05 * span : std::max(1.0, std::abs(lo)) * 0.5;
            lo -= d;
            hi += d;
        };
        widen(x0, x1);
        widen(y0, y1);
    }

    void equalize(double aspect)
    {
        const double w = x1 - x0, h = y1 - y0;
        if (w / h > aspect) {
            const double c = 0.5 * (y0 + y1);
            y0 = c - 0.5 * w / aspect;
            y1 = c + 0.5 * w / aspect;
        } else {
            const double c = 0.5 * (x0 + x1);
            x0 = c - 0.5 * h * aspect;
            x1 = c + 0.5 * h * aspect;
        }
    }
};

class Panel {
public:
    Panel(double left, double top, double width, double height, Bounds b)
        : left_(left), top_(top), width_(width), height_(height), b_(b)
    {
    }

    [[nodiscard]] double px(double x) const { return left_ + (x - b_.x0) / (b_.x1 - b_.x0) * width_; }
    [[nodiscard]] double py(double y) const { return top_ + height_ - (y - b_.y0) / (b_.y1 - b_.y0) * height_; }
    [[nodiscard]] const Bounds& bounds() const { return b_; }

    void frame(std::ostringstream& out, const std::string& xlabel, const std::string& ylabel) const
    {
        out << "<rect x=\"" << num(left_) << "\" y=\"" << num(top_) << "\" width=\"" << num(width_) << "\" height=\""
            << num(height_) << "\" fill=\"none\" stroke=\"#999999\"/>\n";
        const double bottom = top_ + height_;
        out << "<text x=\"" << num(left_) << "\" y=\"" << num(bottom + 16) << "\">" << num(b_.x0, "%.4g")
            << "</text>\n";
        out << "<text x=\"" << num(left_ + width_) << "\" y=\"" << num(bottom + 16)
            << "\" text-anchor=\"end\">" << num(b_.x1, "%.4g") << "</text>\n";
        out << "<text x=\"" << num(left_ + 0.5 * width_) << "\" y=\"" << num(bottom + 32)
            << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
        out << "<text x=\"" << num(left_ - 4) << "\" y=\"" << num(bottom) << "\" text-anchor=\"end\">"
            << num(b_.y0, "%.4g") << "</text>\n";
        out << "<text x=\"" << num(left_ - 4) << "\" y=\"" << num(top_ + 10) << "\" text-anchor=\"end\">"
            << num(b_.y1, "%.4g") << "</text>\n";
        out << "<text x=\"" << num(left_ - 30) << "\" y=\"" << num(top_ + 0.5 * height_)
            << "\" text-anchor=\"middle\">" << ylabel << "</text>\n";
    }

    void polyline(std::ostringstream& out, const std::vector<std::pair<double, double>>& pts, const char* colour,
                  double width) const
    {
        if (pts.size() < 2)
            return;
        out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"" << num(width, "%.1f")
            << "\" points=\"";
        bool first = true;
        for (const auto& [x, y] : pts) {
            if (!std::isfinite(x) || !std::isfinite(y))
                continue;
            if (!first)
                out << ' ';
            out << num(px(x)) << ',' << num(py(y));
            first = false;
        }
        out << "\"/>\n";
    }

    void vline(std::ostringstream& out, double x, const char* colour, bool dashed) const
    {
        if (x < b_.x0 || x > b_.x1)
            return;
        out << "<line x1=\"" << num(px(x)) << "\" y1=\"" << num(top_) << "\" x2=\"" << num(px(x)) << "\" y2=\""
            << num(top_ + height_) << "\" stroke=\"" << colour << "\" stroke-width=\"0.8\""
            << (dashed ? " stroke-dasharray=\"4 3\"" : "") << "/>\n";
    }

    void hline(std::ostringstream& out, double y, const char* colour) const
    {
        if (y < b_.y0 || y > b_.y1)
            return;
        out << "<line x1=\"" << num(left_) << "\" y1=\"" << num(py(y)) << "\" x2=\"" << num(left_ + width_)
            << "\" y2=\"" << num(py(y)) << "\" stroke=\"" << colour << "\" stroke-width=\"0.6\"/>\n";
    }

private:
    double left_, top_, width_, height_;
    Bounds b_;
};

} // namespace

std::string render_orbit_svg(const Series& s, const OrbitOverlay& overlay, const PlotOptions& opts)
{
    const std::size_t n = s.t.size();
    std::vector<std::pair<double, double>> xy(n), tz(n);
    for (std::size_t i = 0; i < n; ++i) {
        xy[i] = {s.x[i], s.y[i]};
        tz[i] = {s.t[i], s.z[i]};
    }

    // Fundamental domain and its image: t -> t2 + lambda^2 (t - t0), (x, y) -> lambda R_phi (x, y), z -> lambda^2 z.
    std::vector<std::pair<double, double>> dom_xy, dom_tz, img_xy, img_tz;
    if (overlay.t0 && overlay.t2 && overlay.lambda && overlay.phi) {
        const double lam = *overlay.lambda, c = std::cos(*overlay.phi), sn = std::sin(*overlay.phi);
        for (std::size_t i = 0; i < n; ++i) {
            if (s.t[i] < *overlay.t0 || s.t[i] > *overlay.t2)
                continue;
            dom_xy.push_back(xy[i]);
            dom_tz.push_back(tz[i]);
            img_xy.emplace_back(lam * (c * s.x[i] - sn * s.y[i]), lam * (sn * s.x[i] + c * s.y[i]));
            img_tz.emplace_back(*overlay.t2 + lam * lam * (s.t[i] - *overlay.t0), lam * lam * s.z[i]);
        }
    }

    Bounds bxy, btz;
    bxy.add(0.0, 0.0);
    for (const auto& p : xy)
        bxy.add(p.first, p.second);
    for (const auto& p : img_xy)
        bxy.add(p.first, p.second);
    for (const auto& p : tz)
        btz.add(p.first, p.second);
    for (const auto& p : img_tz)
        btz.add(p.first, p.second);
    bxy.pad();
    bxy.equalize(static_cast<double>(opts.panel_width) / opts.panel_height);
    btz.pad();

    const int w = opts.panel_width, h = opts.panel_height;
    const int total_w = 2 * w + 3 * kMargin + kMargin / 2;
    const int total_h = h + 2 * kMargin + (opts.title.empty() ? 0 : 20);
    const double top = kMargin + (opts.title.empty() ? 0 : 20);
    const Panel left(kMargin + kMargin / 2, top, w, h, bxy);
    const Panel right(2 * kMargin + kMargin / 2 + w, top, w, h, btz);

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << total_w << "\" height=\"" << total_h
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!opts.title.empty())
        out << "<text x=\"" << total_w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << opts.title
            << "</text>\n";

    left.frame(out, "x", "y");
    left.polyline(out, xy, kOrbitColour, 1.0);
    left.polyline(out, dom_xy, kDomainColour, 2.0);
    left.polyline(out, img_xy, kImageColour, 2.0);
    out << "<circle cx=\"" << num(left.px(0.0)) << "\" cy=\"" << num(left.py(0.0)) << "\" r=\"5\" fill=\""
        << kSunColour << "\" stroke=\"#a07800\"/>\n";

    right.frame(out, "t", "z");
    right.hline(out, 0.0, "#cccccc");
    for (double t : overlay.zeros)
        right.vline(out, t, "#888888", true);
    right.polyline(out, tz, kOrbitColour, 1.0);
    right.polyline(out, dom_tz, kDomainColour, 2.0);
    right.polyline(out, img_tz, kImageColour, 2.0);

    out << "</svg>\n";
    return out.str();
}

} // namespace kh::harness
