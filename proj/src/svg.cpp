#include "patchkit/svg.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace patchkit {

namespace {

constexpr int kCanvas = 900;

struct Mapper {
  double x0, y0, scale;
  double px(double x) const { return (x - x0) * scale; }
  double py(double y) const { return kCanvas - (y - y0) * scale; }
};

const char* palette(int i) {
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                 "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                 "#bcbd22", "#17becf"};
  return colors[i % 10];
}

void outline_region(std::ostream& out, const Mapper& m, const Region& r, const char* stroke,
                    const char* dash) {
  if (r.is_empty()) return;
  if (r.is_ball()) {
    const auto& b = r.as_ball();
    out << "<circle cx='" << m.px(b.center[0]) << "' cy='" << m.py(b.center[1]) << "' r='"
        << b.radius * m.scale << "' fill='none' stroke='" << stroke << "' stroke-dasharray='"
        << dash << "'/>\n";
    return;
  }
  out << "<polyline fill='none' stroke='" << stroke << "' stroke-dasharray='" << dash
      << "' points='";
  double per = r.ring_perimeter();
  int n = 256;
  for (int k = 0; k <= n; ++k) {
    Vec p = r.ring_point(per * k / n);
    out << m.px(p[0]) << ',' << m.py(p[1]) << ' ';
  }
  out << "'/>\n";
}

void outline_patch(std::ostream& out, const Mapper& m, const Region& S, const Patch& p) {
  if (const auto* t = std::get_if<TubeDomain>(&p.domain.shape)) {
    double w = 0;
    for (double r : t->radii) w += 2 * r;
    w /= static_cast<double>(t->radii.size());
    out << "<polyline fill='none' stroke='" << palette(p.control_index)
        << "' stroke-opacity='0.25' stroke-linecap='round' stroke-width='" << w * m.scale
        << "' points='";
    for (const Vec& k : t->knots) out << m.px(k[0]) << ',' << m.py(k[1]) << ' ';
    out << "'/>\n";
    return;
  }
  auto pts = p.domain.boundary_with_normals(S, 48, 0xa11ceull);
  if (pts.empty()) return;
  Vec c = p.domain.center_point(S);
  std::sort(pts.begin(), pts.end(), [&](const auto& a, const auto& b) {
    return std::atan2(a.first[1] - c[1], a.first[0] - c[0]) <
           std::atan2(b.first[1] - c[1], b.first[0] - c[0]);
  });
  out << "<polygon fill='none' stroke='#555555' stroke-opacity='0.5' stroke-width='0.7' points='";
  for (const auto& [z, n] : pts) out << m.px(z[0]) << ',' << m.py(z[1]) << ' ';
  out << "'/>\n";
}

}  // namespace

void render_scene_svg(const std::string& path, const Region& S, const Region& target,
                      double delta, const PatchyFeedback& fb,
                      const std::vector<ClosedLoopRun>& runs) {
  if (S.dim() != 2) throw std::runtime_error("render supports d=2 only");
  auto [lo, hi] = S.bounding_box();
  double span = std::max(hi[0] - lo[0], hi[1] - lo[1]) * 1.15;
  Mapper m{lo[0] - 0.075 * span, lo[1] - 0.075 * span, kCanvas / span};

  std::ofstream out(path);
  if (!out) throw std::runtime_error("render: cannot open " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kCanvas << "' height='" << kCanvas
      << "' viewBox='0 0 " << kCanvas << ' ' << kCanvas << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";

  outline_region(out, m, S, "#000000", "none");
  if (fb.crown_depth > 0) outline_region(out, m, S.eroded(fb.crown_depth), "#888888", "6,4");
  if (target.is_ball()) {
    const auto& b = target.as_ball();
    out << "<circle cx='" << m.px(b.center[0]) << "' cy='" << m.py(b.center[1]) << "' r='"
        << (b.radius + delta) * m.scale
        << "' fill='#fde9c8' fill-opacity='0.8' stroke='#c08020'/>\n";
  } else {
    outline_region(out, m, target, "#c08020", "2,2");
  }

  for (const Patch& p : fb.patches()) outline_patch(out, m, S, p);

  for (const auto& run : runs) {
    const auto& traj = run.trajectory;
    std::size_t k = 0;
    while (k + 1 < traj.states.size()) {
      int patch = k < run.patch_log.size() ? run.patch_log[k] : 0;
      std::size_t j = k;
      while (j + 1 < traj.states.size() &&
             (j >= run.patch_log.size() || run.patch_log[j] == patch))
        ++j;
      out << "<polyline fill='none' stroke='" << palette(patch) << "' stroke-width='1.4' points='";
      for (std::size_t i = k; i <= j; ++i)
        out << m.px(traj.states[i][0]) << ',' << m.py(traj.states[i][1]) << ' ';
      out << "'/>\n";
      k = j;
    }
    if (!traj.states.empty())
      out << "<circle cx='" << m.px(traj.states.front()[0]) << "' cy='"
          << m.py(traj.states.front()[1]) << "' r='2.4' fill='#222222'/>\n";
  }
  out << "</svg>\n";
}

}  // namespace patchkit
