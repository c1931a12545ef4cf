#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "relloc/eval_metrics.hpp"
#include "relloc/pipeline.hpp"
#include "relloc/range_corrector.hpp"
#include "relloc/scenario_sim.hpp"

namespace relloc::io {

using nlohmann::json;

/// Throws InvalidConfig naming the missing or malformed field.
ScenarioConfig scenario_from_json(const json& j);
json scenario_to_json(const ScenarioConfig& cfg);

/// Missing keys keep their defaults; unknown keys are rejected.
PipelineConfig pipeline_config_from_json(const json& j);
json pipeline_config_to_json(const PipelineConfig& cfg);

/// Parses a JSON file; syntax errors carry line and column.
json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// JSONL event records: {"t": ..., "kind": ..., "payload": {...}}.
std::string truth_jsonl(const GroundTruthLog& truth);
std::string ranges_jsonl(std::span<const UwbRange> ranges);
std::string odometry_jsonl(std::span<const OdometryDelta> odom, std::span<const double> initial_headings);
std::string detections_jsonl(std::span<const CooperativeDetection> dets);
std::string estimates_jsonl(std::span<const StateEstimate> estimates);

GroundTruthLog parse_truth(const std::filesystem::path& path);
std::vector<UwbRange> parse_ranges(const std::filesystem::path& path);
/// Fills odometry and initial_headings.
void parse_odometry(const std::filesystem::path& path, ScenarioStreams& streams);
std::vector<CooperativeDetection> parse_detections(const std::filesystem::path& path);
std::vector<StateEstimate> parse_estimates(const std::filesystem::path& path);

std::string truth_csv(const GroundTruthLog& truth);
std::string ranges_csv(std::span<const UwbRange> ranges);
std::string odometry_csv(std::span<const OdometryDelta> odom);
std::string detections_csv(std::span<const CooperativeDetection> dets);
std::string estimates_csv(std::span<const StateEstimate> estimates);

json model_to_json(const CorrectorModel& model);
CorrectorModel model_from_json(const json& j);

json summary_to_json(const ErrorSummary& s);

/// 64-bit FNV-1a; used for config hashes and the manifest file inventory.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

}  // namespace relloc::io
