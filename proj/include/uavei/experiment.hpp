// Experiment configuration (strict JSON schema) and the train / eval / sweep
// commands behind the CLI.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uavei/agent.hpp"
#include "uavei/metrics.hpp"
#include "uavei/sim_config.hpp"
#include "uavei/task_model.hpp"

namespace uavei {

struct ExperimentConfig {
    PolicyKind policy = PolicyKind::HdrlMoe;
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    int eval_episodes = 200;
    SimConfig sim;
    TaskModelConfig task;
    TrainConfig train;
};

// Parses and validates a config document. Unknown keys, malformed values,
// and violated invariants raise std::invalid_argument naming the problem.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

// Sweepable parameters: devWeight, gdCount, offloadCap, seed, ratioSet
// (colon-separated values, applied to every GD). gdCount may only shrink the
// configured per-GD lists; offloadCap is clamped to the new count.
void apply_sweep_value(ExperimentConfig& cfg, const std::string& param,
                       const std::string& value);

struct TrainOutput {
    std::string metrics_path;
    std::string checkpoint_path;
    std::vector<MetricsRow> rows;
};
// Trains from scratch, writing <outputDir>/metrics.csv and
// <outputDir>/checkpoint.json. If training aborts on a non-finite loss the
// rows so far and the current (still finite) nets are flushed before the
// exception propagates.
TrainOutput cmd_train(const ExperimentConfig& cfg, bool quiet = false);

struct EvalOutput {
    std::string report_path;
    std::string trajectory_path;
    EvalReport report;
};
// Greedy evaluation of a checkpoint (checkpoint optional only for the random
// policy); writes <outputDir>/eval_report.csv and <outputDir>/trajectory.csv.
EvalOutput cmd_eval(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                    bool quiet = false);

struct SweepRow {
    std::string param;
    std::string value;
    EvalReport report;
};
struct SweepOutput {
    std::string table_path;
    std::vector<SweepRow> rows;
};
// Trains and evaluates one run per value (artifacts under
// <outputDir>/sweep_<param>_<value>/) and writes the comparison table
// <outputDir>/sweep.csv.
SweepOutput cmd_sweep(const ExperimentConfig& base, const std::string& param,
                      const std::vector<std::string>& values, bool quiet = false);

} // namespace uavei
