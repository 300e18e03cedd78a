#include "ilsim/svg.hpp"

#include <algorithm>
#include <limits>

#include <fmt/format.h>

namespace ilsim {

namespace {

struct View {
  double min_x = 0.0;
  double max_y = 0.0;
  double scale = 4.0;
  double margin = 10.0;

  double px(const Point2& p) const { return margin + (p.x - min_x) * scale; }
  double py(const Point2& p) const { return margin + (max_y - p.y) * scale; }
};

std::string points_attr(const View& v, const std::vector<Point2>& pts) {
  std::string out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i > 0) out += ' ';
    out += fmt::format("{:.2f},{:.2f}", v.px(pts[i]), v.py(pts[i]));
  }
  return out;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_scene_svg(const TrafficLog& log, const SceneDrawing& d) {
  double lo_x = std::numeric_limits<double>::infinity(), lo_y = lo_x;
  double hi_x = -lo_x, hi_y = -lo_x;
  auto grow = [&](const Point2& p) {
    lo_x = std::min(lo_x, p.x);
    lo_y = std::min(lo_y, p.y);
    hi_x = std::max(hi_x, p.x);
    hi_y = std::max(hi_y, p.y);
  };
  for (const auto& c : log.curbs) std::for_each(c.begin(), c.end(), grow);
  for (const auto& p : log.reference_paths) std::for_each(p.points().begin(), p.points().end(), grow);
  for (const auto& e : d.ego_paths) std::for_each(e.begin(), e.end(), grow);
  if (!std::isfinite(lo_x)) lo_x = lo_y = hi_x = hi_y = 0.0;

  View v;
  v.min_x = lo_x;
  v.max_y = hi_y;
  v.scale = d.pixels_per_meter;
  const double width = 2.0 * v.margin + (hi_x - lo_x) * v.scale;
  const double height = 2.0 * v.margin + (hi_y - lo_y) * v.scale;

  std::string out = fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\">\n"
      "<rect x=\"0\" y=\"0\" width=\"{:.0f}\" height=\"{:.0f}\" fill=\"white\"/>\n",
      width, height, width, height, width, height);
  out += "<g id=\"curbs\">\n";
  for (const auto& c : log.curbs) {
    out += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
                       points_attr(v, c), kCurbColor);
  }
  out += "</g>\n";
  if (d.path_index && *d.path_index >= 0 && static_cast<std::size_t>(*d.path_index) < log.reference_paths.size()) {
    const auto& path = log.reference_paths[static_cast<std::size_t>(*d.path_index)];
    out += fmt::format(
        "<polyline id=\"reference-path\" points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" "
        "stroke-dasharray=\"6,4\"/>\n",
        points_attr(v, path.points()), kPathColor);
  }
  if (d.vehicle_window) {
    out += "<g id=\"vehicles\">\n";
    for (const auto& [id, tr] : log.tracks) {
      if (id == d.exclude_track) continue;
      std::vector<Point2> pts;
      for (const auto& s : tr.states) {
        if (s.t() >= d.vehicle_window->first && s.t() <= d.vehicle_window->second) pts.push_back(s.pos);
      }
      if (pts.empty()) continue;
      if (pts.size() > 1) {
        out += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
                           points_attr(v, pts), kVehicleColor);
      }
      out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"{}\"/>\n", v.px(pts.front()),
                         v.py(pts.front()), kVehicleColor);
    }
    out += "</g>\n";
  }
  for (const auto& e : d.ego_paths) {
    if (e.empty()) continue;
    out += fmt::format("<polyline class=\"ego\" points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                       points_attr(v, e), kEgoColor);
  }
  out += "</svg>\n";
  return out;
}

std::string render_curve_svg(const std::string& title, const std::vector<CurveSeries>& series) {
  constexpr double w = 480.0, h = 320.0, left = 50.0, right = 20.0, top = 30.0, bottom = 40.0;
  std::size_t n = 1;
  for (const auto& s : series) n = std::max(n, s.values.size());
  const double span = n > 1 ? static_cast<double>(n - 1) : 1.0;
  auto x_of = [&](std::size_t i) { return left + (w - left - right) * static_cast<double>(i) / span; };
  auto y_of = [&](double r) { return top + (h - top - bottom) * (1.0 - std::clamp(r, 0.0, 1.0)); };

  std::string out = fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\">\n"
      "<rect x=\"0\" y=\"0\" width=\"{:.0f}\" height=\"{:.0f}\" fill=\"white\"/>\n"
      "<text x=\"{:.1f}\" y=\"18\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
      w, h, w, h, w, h, w / 2.0, escape(title));
  out += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"black\"/>\n", left,
                     top, h - bottom);
  out += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"black\"/>\n", left,
                     h - bottom, w - right);
  for (int pct = 0; pct <= 100; pct += 25) {
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"10\" text-anchor=\"end\">{}%</text>\n",
                       left - 4.0, y_of(pct / 100.0) + 3.0, pct);
  }
  for (std::size_t i = 0; i < n; ++i) {
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"10\" text-anchor=\"middle\">{}</text>\n",
                       x_of(i), h - bottom + 14.0, i);
  }
  out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"11\" text-anchor=\"middle\">iteration</text>\n",
                     (left + w - right) / 2.0, h - 6.0);
  static constexpr const char* palette[] = {kEgoColor, kVehicleColor, "#2ca02c", "#9467bd", "#ff7f0e"};
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = palette[k % 5];
    std::string pts;
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      if (i > 0) pts += ' ';
      pts += fmt::format("{:.2f},{:.2f}", x_of(i), y_of(s.values[i]));
    }
    out += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n", pts, color);
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"{}\"/>\n", x_of(i), y_of(s.values[i]),
                         color);
    }
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"11\" fill=\"{}\">{}</text>\n", left + 8.0,
                       top + 14.0 * static_cast<double>(k + 1), color, escape(s.label));
  }
  out += "</svg>\n";
  return out;
}

}  // namespace ilsim
