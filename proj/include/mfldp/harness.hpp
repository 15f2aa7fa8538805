#pragma once

#include "mfldp/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mfldp {

inline constexpr std::string_view kVersion = "0.1.0";

/// 64-bit FNV-1a.
[[nodiscard]] std::uint64_t fnv1a64(std::string_view bytes) noexcept;
[[nodiscard]] std::string hex64(std::uint64_t h);

struct TaskSpec {
  std::string name;  // output subdirectory
  std::string task;  // validate | simulate | stationary | ldp-slope | mkv | action | qp | report
  nlohmann::json params = nlohmann::json::object();
  std::uint64_t seed = 1;
};

/// Experiment config file:
///
///     {"model": "const2", "seed": 7, "out": "runs/const2",
///      "tasks": [{"task": "stationary", "name": "hist", "params": {"N": 100, "sample": 5000}},
///                {"task": "report"}]}
///
/// "model" is a built-in name, a model file path, or an inline model object. A single
/// task may be given as top-level "task" and "params". Task seeds default to the
/// experiment seed; names default to the task kind, suffixed when repeated.
struct ExperimentConfig {
  nlohmann::json model;
  std::vector<TaskSpec> tasks;
  std::uint64_t seed = 1;
  std::string out = "out";
  int threads = 0;

  /// Throws ValidationError on malformed configs.
  [[nodiscard]] static ExperimentConfig from_json(const nlohmann::json& j);
  [[nodiscard]] static ExperimentConfig load(const std::filesystem::path& file);
  /// Canonical form; its dump is what the manifest hashes.
  [[nodiscard]] nlohmann::json to_json() const;
};

struct TaskOutcome {
  std::string name;
  std::string task;
  int status = 0;  // exit-code convention
  std::string error;
  nlohmann::json summary;
  std::vector<std::string> files;  // relative to the experiment directory
  double wall_time = 0.0;
};

struct ExperimentOutcome {
  std::vector<TaskOutcome> tasks;
  int exit_code = 0;  // worst task status
  std::filesystem::path manifest;
};

/// 0 ok, 2 validation failure, 3 numerical failure, 1 anything else.
[[nodiscard]] int exit_code_for(const std::exception& e) noexcept;

/// Loads and validates the model, runs every task into <out>/<name>/ (summary.json
/// plus task CSV/JSON files) and writes <out>/manifest.json. Task errors are recorded
/// in the outcome and the manifest rather than thrown; a model that fails to load or
/// validate fails every task with status 2.
[[nodiscard]] ExperimentOutcome run_experiment(const ExperimentConfig& cfg);

/// Runs one task into dir and returns its summary; the written file names are appended
/// to files. Throws on failure.
[[nodiscard]] nlohmann::json run_task(const Model& m, const TaskSpec& task, const std::filesystem::path& dir,
                                      std::vector<std::string>& files);

}  // namespace mfldp
