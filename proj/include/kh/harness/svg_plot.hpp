// Plain SVG figures of an orbit: the (x, y) projection with the sun at the origin and
// the height z(t) with its zeros marked. Optionally the fundamental domain (purple) and
// its image under the rotation-dilation (orange) are drawn over both panels.
#pragma once

#include "kh/harness/report_io.hpp"

#include <string>

namespace kh::harness {

struct PlotOptions {
    int panel_width = 420;
    int panel_height = 420;
    std::string title;
};

[[nodiscard]] std::string render_orbit_svg(const Series& series, const OrbitOverlay& overlay,
                                           const PlotOptions& opts = {});

} // namespace kh::harness
