// Per-episode metric rows, evaluation summaries, and deterministic CSV
// serialization (fixed columns, 17-significant-digit doubles, no wall-clock
// fields so equal seeds reproduce byte-identical files).
#pragma once

#include <string>
#include <vector>

namespace uavei {

struct MetricsRow {
    int episode = 0;
    double reward = 0.0;
    double accuracy = 0.0;
    double d_dev = 0.0;
    double offload_ratio = 0.0; // delivered / attempted within the episode
    double critic_loss = 0.0;
    double actor_objective = 0.0;
};

struct TrajectoryRow {
    int episode = 0;
    int slot = 0;
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;  // executed
    double reward = 0.0;
    double deviation = 0.0; // instantaneous distance to the slot's checkpoint
};

struct EvalReport {
    int episodes = 0;
    double accuracy_mean = 0.0, accuracy_std = 0.0;
    double reward_mean = 0.0, reward_std = 0.0;
    double d_dev_mean = 0.0, d_dev_std = 0.0;
    double offload_ratio_overall = 0.0;        // all GDs pooled
    std::vector<double> gd_success_ratio;      // delivered/attempted per GD
    std::vector<double> gd_share;              // attempted_k / total attempts
    std::vector<TrajectoryRow> first_episode;  // per-slot log of episode 0
};

std::string format_double(double v); // shortest round-trip-safe decimal

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);
void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryRow>& rows);
// Summary table: one metric per row (metric,mean,std or metric,value).
void write_eval_report_csv(const std::string& path, const EvalReport& report,
                           double dev_threshold);

double vec_mean(const std::vector<double>& v);
double vec_std(const std::vector<double>& v); // population

} // namespace uavei
