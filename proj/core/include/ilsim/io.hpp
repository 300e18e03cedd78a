#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ilsim/dagger.hpp"
#include "ilsim/planner.hpp"
#include "ilsim/policy.hpp"
#include "ilsim/simulator.hpp"

namespace ilsim {

using nlohmann::json;

json trajectory_to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const json& j);

json plan_to_json(const PlanResult& plan);
PlanResult plan_from_json(const json& j);

json rollout_to_json(const RolloutResult& r);
RolloutResult rollout_from_json(const json& j);
/// One episode per line; errored episodes are written as {"spec", "error"}.
void write_rollouts(const std::filesystem::path& file, const std::vector<EpisodeRecord>& episodes);
std::vector<RolloutResult> read_rollouts(const std::filesystem::path& file);

json sample_to_json(const LabeledSample& s, double period);
/// One LabeledSample per line.
void write_dataset(const std::filesystem::path& file, const Dataset& ds);
std::string dataset_to_jsonl(const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& file);
Dataset dataset_from_jsonl(const std::string& text);

json metrics_to_json(const Metrics& m);
Metrics metrics_from_json(const json& j);
/// Suc. / Fail-V / Fail-C / Timeout table as aligned text.
std::string metrics_table(const Metrics& m);

json report_to_json(const DaggerReport& r);
DaggerReport report_from_json(const json& j);

std::string read_text(const std::filesystem::path& file);
/// Writes via a temporary file and rename so readers never see partial output.
void write_text(const std::filesystem::path& file, const std::string& text);

}  // namespace ilsim
