// Episodic mission environment: UAV kinematics, uplink channel, periodic
// sensing/offloading windows, and the deviation + accuracy reward.
#pragma once

#include <cstdint>
#include <vector>

#include "uavei/rng.hpp"
#include "uavei/sim_config.hpp"
#include "uavei/task_model.hpp"
#include "uavei/vec2.hpp"

namespace uavei {

// Slots are 1-based: n = 1..N. Periods start at sensing slots
// m = l*sync+1; the offloading decision takes effect at m+local and
// transmission runs through the period's last slot m+sync-1.
inline int period_start(int slot, int sync) { return ((slot - 1) / sync) * sync + 1; }
inline bool is_sensing_slot(int slot, int sync) { return (slot - 1) % sync == 0; }
inline int decision_slot_of(int slot, int sync, int local) {
    return period_start(slot, sync) + local;
}
inline bool in_local_window(int slot, int sync, int local) {
    return slot - period_start(slot, sync) < local;
}
inline bool is_period_end(int slot, int sync) { return slot - period_start(slot, sync) == sync - 1; }

struct Observation {
    double slot_norm = 0.0;          // n / N
    Vec2 pos_norm;                   // q / areaBounds
    std::vector<double> entropies;   // per GD, nats, current period's samples

    std::vector<double> to_vector() const;
};
inline int observation_dim(int gd_count) { return 3 + gd_count; }

struct Action {
    double heading = 0.0;                 // radians, clamped to [-pi, pi]
    std::vector<std::uint8_t> offload;    // xi per GD (0/1)
    std::vector<double> ratios;           // omega per GD, element of the GD's ratio set
};

// Per-GD transmission ledger for the current period.
struct GdLedger {
    bool selected = false;
    double ratio = 0.0;
    double bits_required = 0.0;
    double bits_accum = 0.0;
    bool delivered = false;
};

struct StepInfo {
    double executed_heading = 0.0;  // after override, what the UAV actually flew
    double instant_dev = 0.0;       // ||q[n] - ref[n]|| in meters
    bool period_resolved = false;
    double period_ce_sum = 0.0;     // accuracy penalty charged this slot
    int resolutions = 0;            // GD tasks resolved this slot
    int correct = 0;                // of those, predicted class == true class
    std::vector<std::uint8_t> attempted;  // per GD: offload attempted this period
    std::vector<std::uint8_t> delivered;  // per GD: payload fully delivered
};

struct StepOutcome {
    Observation obs;
    double reward = 0.0;
    bool done = false;
    StepInfo info;
};

// --- channel and kinematics -------------------------------------------------

// Free-space SNR from GD gd to the UAV hovering over q at the flight altitude.
double uplink_snr(const SimConfig& cfg, Vec2 q, int gd);
// Shannon rate B*log2(1+SNR) in bit/s.
double uplink_rate(const SimConfig& cfg, Vec2 q, int gd);
// One slot of constant-speed flight along `heading`.
Vec2 advance_uav(Vec2 q, double heading, const SimConfig& cfg);
// Replaces the policy heading with the direct bearing to endPos whenever the
// remaining slots may no longer cover the post-move distance; guarantees
// arrival within one step length of endPos by slot N.
double straight_flight_override(const SimConfig& cfg, Vec2 q, int slot, double heading);

// --- environment --------------------------------------------------------------

class Environment {
public:
    Environment(SimConfig cfg, TaskModelConfig task);

    Observation reset(std::uint64_t seed);
    // Processes slot n: latches decisions at the decision slot, accumulates
    // transmissions, charges the deviation penalty (plus the period's
    // cross-entropy sum on its last slot), then advances the UAV. Throws if
    // the episode is already done.
    StepOutcome step(const Action& action);

    Observation observation() const;

    const SimConfig& cfg() const { return cfg_; }
    const TaskModelConfig& task_cfg() const { return task_; }
    const ReferencePath& ref() const { return ref_; }
    int slot() const { return slot_; }
    Vec2 position() const { return pos_; }
    bool done() const { return done_; }
    const std::vector<Vec2>& trajectory() const { return traj_; }
    const std::vector<TaskSample>& samples() const { return samples_; }
    const std::vector<GdLedger>& ledger() const { return ledger_; }
    // RMS path deviation of the flown trajectory (full episodes only).
    double episode_deviation() const { return deviation(traj_, ref_); }

private:
    void draw_samples();

    SimConfig cfg_;
    TaskModelConfig task_;
    ReferencePath ref_;
    Rng rng_;
    int slot_ = 1;
    Vec2 pos_;
    bool done_ = false;
    std::vector<TaskSample> samples_;
    std::vector<GdLedger> ledger_;
    std::vector<Vec2> traj_;
};

} // namespace uavei
