#include "ilsim/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "ilsim/errors.hpp"

namespace ilsim {

namespace {

constexpr std::array<const char*, 10> kColumns{"track_id", "frame_id", "timestamp_ms", "x",       "y",
                                               "vx",       "vy",       "psi_rad",      "length", "width"};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& cell, std::size_t line_no, const char* column) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != cell.size() || !std::isfinite(v)) {
    throw ParseError(fmt::format("line {}: column '{}' is not a finite number: '{}'", line_no, column, cell));
  }
  return v;
}

std::int64_t parse_int(const std::string& cell, std::size_t line_no, const char* column) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != cell.size()) {
    throw ParseError(fmt::format("line {}: column '{}' is not an integer: '{}'", line_no, column, cell));
  }
  return v;
}

Point2 parse_point(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ParseError(fmt::format("{}: expected [x, y]", where));
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ParseError(fmt::format("cannot open '{}'", p.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write '{}'", p.string()));
  out << content;
}

}  // namespace

const VehicleTrack& TrafficLog::track(int track_id) const {
  const auto it = tracks.find(track_id);
  if (it == tracks.end()) throw ValidationError(fmt::format("unknown track {}", track_id));
  return it->second;
}

void TrafficLog::validate() const {
  if (tracks.empty()) throw ValidationError("no tracks");
  if (frame_period_ms <= 0) throw ValidationError("frame period must be positive");
  if (reference_paths.empty()) throw ValidationError("log has no reference path");
  for (const auto& [id, tr] : tracks) {
    if (tr.track_id != id) throw ValidationError(fmt::format("track {} stored under key {}", tr.track_id, id));
    if (tr.states.size() < 2) throw ValidationError(fmt::format("track {} has fewer than 2 states", id));
    if (!(tr.length > 0.0) || !(tr.width > 0.0)) {
      throw ValidationError(fmt::format("track {} has non-positive dimensions", id));
    }
    for (std::size_t i = 1; i < tr.states.size(); ++i) {
      const auto dt = tr.states[i].timestamp_ms - tr.states[i - 1].timestamp_ms;
      if (dt <= 0) {
        throw ValidationError(fmt::format("track {}: timestamps not increasing at frame {}", id,
                                          tr.first_frame_id + static_cast<std::int64_t>(i)));
      }
      if (dt != frame_period_ms) {
        throw ValidationError(fmt::format("track {}: frame period {} ms differs from log period {} ms", id,
                                          dt, frame_period_ms));
      }
    }
  }
  for (std::size_t i = 0; i < curbs.size(); ++i) {
    if (curbs[i].size() < 2) throw ValidationError(fmt::format("curb {} has fewer than 2 points", i));
  }
}

std::optional<VehicleState> state_at(const VehicleTrack& track, std::int64_t frame_period_ms, double t) {
  if (track.states.empty()) return std::nullopt;
  const double ms = t * 1000.0;
  const auto first_ms = static_cast<double>(track.states.front().timestamp_ms);
  const auto last_ms = static_cast<double>(track.states.back().timestamp_ms);
  constexpr double snap = 1e-6;  // ms
  if (ms < first_ms - snap || ms > last_ms + snap) return std::nullopt;
  const double rel = (ms - first_ms) / static_cast<double>(frame_period_ms);
  auto idx = static_cast<std::size_t>(std::max(0.0, std::floor(rel)));
  double u = rel - static_cast<double>(idx);
  if (u > 1.0 - snap / static_cast<double>(frame_period_ms)) {
    ++idx;
    u = 0.0;
  } else if (u < snap / static_cast<double>(frame_period_ms)) {
    u = 0.0;
  }
  if (idx >= track.states.size() - 1) {
    idx = track.states.size() - 1;
    u = 0.0;
  }
  const TrackState& a = track.states[idx];
  VehicleState out;
  if (u == 0.0) {
    out.pos = a.pos;
    out.vel = a.vel;
    out.heading = a.heading;
  } else {
    const TrackState& b = track.states[idx + 1];
    out.pos = a.pos + u * (b.pos - a.pos);
    out.vel = a.vel + u * (b.vel - a.vel);
    out.heading = wrap_angle(a.heading + u * wrap_angle(b.heading - a.heading));
  }
  out.speed = std::hypot(out.vel.x, out.vel.y);
  return out;
}

std::optional<VehicleState> state_at(const VehicleTrack& track, double t) {
  const std::int64_t period =
      track.states.size() >= 2 ? track.states[1].timestamp_ms - track.states[0].timestamp_ms : 100;
  return state_at(track, period, t);
}

TrafficLog parse_log(const std::string& tracks_csv, const std::string& map_json) {
  TrafficLog log;
  std::istringstream in(tracks_csv);
  std::string line;
  std::size_t line_no = 0;
  std::vector<int> column_of(kColumns.size(), -1);
  bool header_seen = false;
  std::int64_t period = -1;
  std::map<int, std::int64_t> next_frame;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (!header_seen) {
      header_seen = true;
      for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto it = std::find(kColumns.begin(), kColumns.end(), cells[c]);
        if (it == kColumns.end()) {
          spdlog::warn("tracks file: ignoring unknown column '{}'", cells[c]);
          continue;
        }
        column_of[static_cast<std::size_t>(std::distance(kColumns.begin(), it))] = static_cast<int>(c);
      }
      for (std::size_t k = 0; k < kColumns.size(); ++k) {
        if (column_of[k] < 0) throw ValidationError(fmt::format("tracks file: missing column '{}'", kColumns[k]));
      }
      continue;
    }
    auto cell = [&](std::size_t k) -> const std::string& {
      const auto c = static_cast<std::size_t>(column_of[k]);
      if (c >= cells.size()) {
        throw ParseError(fmt::format("line {}: expected at least {} cells, got {}", line_no, c + 1, cells.size()));
      }
      return cells[c];
    };
    const auto track_id = static_cast<int>(parse_int(cell(0), line_no, kColumns[0]));
    const auto frame_id = parse_int(cell(1), line_no, kColumns[1]);
    TrackState st;
    st.timestamp_ms = parse_int(cell(2), line_no, kColumns[2]);
    st.pos = {parse_double(cell(3), line_no, kColumns[3]), parse_double(cell(4), line_no, kColumns[4])};
    st.vel = {parse_double(cell(5), line_no, kColumns[5]), parse_double(cell(6), line_no, kColumns[6])};
    st.heading = parse_double(cell(7), line_no, kColumns[7]);
    const double length = parse_double(cell(8), line_no, kColumns[8]);
    const double width = parse_double(cell(9), line_no, kColumns[9]);

    auto [it, inserted] = log.tracks.try_emplace(track_id);
    VehicleTrack& tr = it->second;
    if (inserted) {
      tr.track_id = track_id;
      tr.first_frame_id = frame_id;
      tr.length = length;
      tr.width = width;
    } else {
      if (frame_id != next_frame[track_id]) {
        throw ValidationError(fmt::format("line {}: track {} frame_id {} is not consecutive (expected {})",
                                          line_no, track_id, frame_id, next_frame[track_id]));
      }
      const auto dt = st.timestamp_ms - tr.states.back().timestamp_ms;
      if (dt <= 0) {
        throw ValidationError(
            fmt::format("line {}: track {} has non-increasing timestamps", line_no, track_id));
      }
      if (period < 0) period = dt;
      if (dt != period) {
        throw ValidationError(fmt::format("line {}: track {} frame period {} ms differs from {} ms", line_no,
                                          track_id, dt, period));
      }
    }
    next_frame[track_id] = frame_id + 1;
    tr.states.push_back(st);
  }
  if (log.tracks.empty()) throw ValidationError("no tracks");
  log.frame_period_ms = period > 0 ? period : 100;

  nlohmann::json map;
  try {
    map = nlohmann::json::parse(map_json);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(fmt::format("map file: {}", e.what()));
  }
  if (!map.is_object()) throw ParseError("map file: top level must be an object");
  for (const auto& [key, _] : map.items()) {
    if (key != "curbs" && key != "reference_paths") spdlog::warn("map file: ignoring unknown key '{}'", key);
  }
  if (map.contains("curbs")) {
    for (std::size_t i = 0; i < map["curbs"].size(); ++i) {
      Polyline curb;
      for (const auto& p : map["curbs"][i]) curb.push_back(parse_point(p, fmt::format("curb {}", i)));
      log.curbs.push_back(std::move(curb));
    }
  }
  if (map.contains("reference_paths")) {
    for (const auto& jp : map["reference_paths"]) {
      if (!jp.is_object() || !jp.contains("points")) throw ParseError("map file: reference path needs 'points'");
      for (const auto& [key, _] : jp.items()) {
        if (key != "id" && key != "points") spdlog::warn("map file: ignoring unknown path key '{}'", key);
      }
      std::string id;
      if (jp.contains("id")) id = jp["id"].is_string() ? jp["id"].get<std::string>() : jp["id"].dump();
      std::vector<Point2> pts;
      for (const auto& p : jp["points"]) pts.push_back(parse_point(p, fmt::format("path '{}'", id)));
      log.reference_paths.push_back(ReferencePath::densified(pts, id));
    }
  }
  log.validate();
  return log;
}

TrafficLog load_log(const std::filesystem::path& tracks_file, const std::filesystem::path& map_file) {
  return parse_log(read_file(tracks_file), read_file(map_file));
}

std::string tracks_to_csv(const TrafficLog& log) {
  std::string out = "track_id,frame_id,timestamp_ms,x,y,vx,vy,psi_rad,length,width\n";
  for (const auto& [id, tr] : log.tracks) {
    for (std::size_t i = 0; i < tr.states.size(); ++i) {
      const TrackState& s = tr.states[i];
      out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", id, tr.first_frame_id + static_cast<std::int64_t>(i),
                         s.timestamp_ms, s.pos.x, s.pos.y, s.vel.x, s.vel.y, s.heading, tr.length, tr.width);
    }
  }
  return out;
}

std::string map_to_json(const TrafficLog& log) {
  nlohmann::json j;
  j["curbs"] = nlohmann::json::array();
  for (const auto& curb : log.curbs) {
    auto jc = nlohmann::json::array();
    for (const auto& p : curb) jc.push_back({p.x, p.y});
    j["curbs"].push_back(std::move(jc));
  }
  j["reference_paths"] = nlohmann::json::array();
  for (const auto& path : log.reference_paths) {
    auto jp = nlohmann::json::array();
    for (const auto& p : path.points()) jp.push_back({p.x, p.y});
    j["reference_paths"].push_back({{"id", path.id()}, {"points", std::move(jp)}});
  }
  return j.dump() + "\n";
}

void write_log(const TrafficLog& log, const std::filesystem::path& tracks_file,
               const std::filesystem::path& map_file) {
  write_file(tracks_file, tracks_to_csv(log));
  write_file(map_file, map_to_json(log));
}

int route_for_track(const TrafficLog& log, const VehicleTrack& track) {
  int best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  const std::size_t stride = std::max<std::size_t>(1, track.states.size() / 40);
  for (std::size_t p = 0; p < log.reference_paths.size(); ++p) {
    const ReferencePath& path = log.reference_paths[p];
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < track.states.size(); i += stride) {
      sum += std::abs(path.project(track.states[i].pos).lateral_offset);
      ++count;
    }
    sum += std::abs(path.project(track.states.back().pos).lateral_offset);
    const double cost = sum / static_cast<double>(count + 1);
    if (cost < best_cost ||
        (cost == best_cost && path.id() < log.reference_paths[static_cast<std::size_t>(best)].id())) {
      best_cost = cost;
      best = static_cast<int>(p);
    }
  }
  return best;
}

int default_horizon_frames(int remaining) { return remaining + std::max(20, remaining / 2); }

std::vector<EpisodeSpec> enumerate_episodes(const TrafficLog& log, int stride_frames, int min_remaining) {
  if (stride_frames < 1) throw ValidationError("episode stride must be >= 1");
  std::vector<EpisodeSpec> out;
  for (const auto& [id, tr] : log.tracks) {
    const int n = static_cast<int>(tr.states.size());
    int route = -1;
    for (int f = 0; f < n; f += stride_frames) {
      const int remaining = n - 1 - f;
      if (remaining < min_remaining || remaining < 1) break;
      if (route < 0) route = route_for_track(log, tr);
      out.push_back({id, f, default_horizon_frames(remaining), route});
    }
  }
  return out;
}

double mean_speed(const VehicleTrack& track) {
  double sum = 0.0;
  for (const auto& s : track.states) sum += s.speed();
  return track.states.empty() ? 0.0 : sum / static_cast<double>(track.states.size());
}

std::optional<ScenarioKind> parse_scenario_kind(const std::string& name) {
  if (name == "roundabout") return ScenarioKind::Roundabout;
  if (name == "intersection") return ScenarioKind::Intersection;
  if (name == "merging") return ScenarioKind::Merging;
  return std::nullopt;
}

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Roundabout:
      return "roundabout";
    case ScenarioKind::Intersection:
      return "intersection";
    case ScenarioKind::Merging:
      return "merging";
  }
  return "unknown";
}

}  // namespace ilsim
