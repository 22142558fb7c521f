// Mission, channel and offloading constants plus the reference-path builder.
#pragma once

#include <vector>

#include "uavei/vec2.hpp"

namespace uavei {

struct SimConfig {
    // timing
    double mission_duration = 60.0; // seconds
    int slot_count = 48;            // N
    int sync_period = 4;            // N_sync, slots per sensing period
    int local_slots = 1;            // N_local, local-inference slots per period

    // platform
    double altitude = 100.0;  // meters (fixed flight level)
    double speed = 30.0;      // meters/second (constant)
    double area_bounds = 1000.0; // meters, used only to normalize observations
    Vec2 start_pos{0.0, 0.0};
    Vec2 end_pos{0.0, 0.0};

    // reference trajectory: segment start->circle, one full circle, segment->end
    Vec2 ref_circle_center{0.0, 300.0};
    double ref_circle_radius = 150.0;

    // ground devices
    std::vector<Vec2> gd_positions; // K entries, required
    int offload_cap = 2;            // U, max simultaneous offloads per period

    // channel (free space, inverse-square)
    double bandwidth = 1e6;     // Hz
    double noise_power = 1e-14; // W  (-110 dBm)
    double ref_gain = 1e-5;     // channel gain at 1 m (-50 dB)
    std::vector<double> tx_power; // W per GD (0.01 = 10 dBm)

    // offloading payloads
    std::vector<double> feat_dim;     // feature dimension per GD
    std::vector<double> bits_per_dim; // quantization bits per GD
    std::vector<std::vector<double>> ratio_sets; // Omega_k, sorted, first element 0

    // reward shaping
    double dev_weight = 1e-4;    // lambda_dev, weight on squared path deviation
    double dev_threshold = 800.0; // meters, reporting-only flag in eval output

    double slot_len() const { return mission_duration / slot_count; }
    double step_len() const { return speed * slot_len(); }
    int gd_count() const { return static_cast<int>(gd_positions.size()); }

    // Throws std::invalid_argument describing the first violated constraint.
    void validate() const;
};

struct ReferencePath {
    std::vector<Vec2> checkpoints; // exactly slot_count points, [0] == start_pos
};

// Evenly spaced checkpoints along start -> circle entry -> full circle ->
// end. Throws if the total length exceeds what the UAV can cover in a
// mission (which would make per-slot tracking impossible).
ReferencePath build_reference_path(const SimConfig& cfg);

// RMS distance between a flown trajectory and the reference checkpoints.
// Both sequences must have the same length.
double deviation(const std::vector<Vec2>& traj, const ReferencePath& ref);

} // namespace uavei
