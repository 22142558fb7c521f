// Surrogate classification-task model: per-sample difficulty drives a
// two-level class distribution for local inference; offloading at a higher
// compression ratio lifts the true-class mass.
#pragma once

#include <vector>

#include "uavei/rng.hpp"

namespace uavei {

enum class DifficultyKind {
    Uniform,     // u ~ U(lo, hi)
    Beta,        // u ~ Beta(alpha, beta) scaled into [lo, hi]
    SortedShard, // GD k draws from the k-th hardest of K equal bands of [lo, hi]
};

struct DifficultySpec {
    DifficultyKind kind = DifficultyKind::Uniform;
    double lo = 0.0;
    double hi = 0.5;
    double alpha = 2.0; // Beta only
    double beta = 2.0;  // Beta only
};

struct TaskModelConfig {
    int class_count = 10;                  // C
    std::vector<DifficultySpec> difficulty; // one spec per GD
    double uplift_gain = 0.6;              // G, true-class mass gain per unit ratio
    double local_noise_std = 0.05;         // sigma on the local true-class mass
    double mass_floor = 0.10;              // p_min
    double mass_ceil = 0.95;               // p_max

    void validate(int gd_count) const; // throws std::invalid_argument
};

struct TaskSample {
    double difficulty = 0.0;          // u in [0,1]
    int true_class = 0;               // 0-based
    double local_true_mass = 0.0;     // clamped to [mass_floor, mass_ceil]
    std::vector<double> local_dist;   // C probabilities, two-level
    double entropy = 0.0;             // nats, of local_dist
};

// Two-level distribution putting `true_mass` on `true_class` and spreading
// the remainder uniformly over the other C-1 classes.
std::vector<double> two_level_dist(int class_count, int true_class, double true_mass);

// Shannon entropy (nats) of a probability vector; 0*ln(0) treated as 0.
double dist_entropy(const std::vector<double>& p);

// Draw one task for ground device gd (0-based, of gd_count): difficulty from
// the GD's spec, uniform true class, local mass clamp(1 - u + eps).
TaskSample sample_task(const TaskModelConfig& cfg, int gd, int gd_count, Rng& rng);

// Class distribution after offloading at compression ratio `ratio`:
// true-class mass lifted by uplift_gain*ratio (clamped) when delivered,
// otherwise the local distribution unchanged.
std::vector<double> remote_distribution(const TaskModelConfig& cfg, const TaskSample& sample,
                                        double ratio, bool delivered);

// Cross-entropy -ln p[true_class], floored at p = 1e-12 to stay finite.
double ce_loss(const std::vector<double>& dist, int true_class);

// Argmax class, lowest index on ties.
int predicted_class(const std::vector<double>& dist);

} // namespace uavei
