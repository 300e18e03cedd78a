#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ilsim/dataset.hpp"

namespace ilsim {

inline constexpr const char* kCurbColor = "#808080";
inline constexpr const char* kVehicleColor = "#d62728";
inline constexpr const char* kEgoColor = "#1f77b4";
inline constexpr const char* kPathColor = "#ff69b4";

struct SceneDrawing {
  std::optional<int> path_index;  ///< reference path drawn pink dashed
  std::vector<std::vector<Point2>> ego_paths;  ///< blue polylines
  /// Replay vehicles drawn over this time window as red paths with start dots.
  std::optional<std::pair<double, double>> vehicle_window;
  int exclude_track = -1;
  double pixels_per_meter = 4.0;
};

/// Static top-down view. Output bytes depend only on the inputs.
std::string render_scene_svg(const TrafficLog& log, const SceneDrawing& drawing);

struct CurveSeries {
  std::string label;
  std::vector<double> values;  ///< rates in [0, 1], one per iteration
};

/// Success rate versus iteration.
std::string render_curve_svg(const std::string& title, const std::vector<CurveSeries>& series);

}  // namespace ilsim
