// Non-learned policy pieces used by the comparison baselines.
#pragma once

#include <cstdint>
#include <vector>

#include "uavei/env.hpp"
#include "uavei/rng.hpp"
#include "uavei/sim_config.hpp"

namespace uavei {

// Reference-tracking heading: bearing from q toward the next reference
// checkpoint (slot n steers toward checkpoint n+1). Valid for n in [1, N-1];
// at slot N there is no move, callers pass the previous heading through.
double ft_heading(const SimConfig& cfg, const ReferencePath& ref, Vec2 q, int slot);

struct InferenceChoice {
    std::vector<std::uint8_t> offload; // xi per GD
    std::vector<double> ratios;        // omega per GD
};

// Greedy inference heuristic: rank GDs by current-sample entropy (highest
// first, lowest index on ties), select the top offloadCap, and give each the
// largest ratio whose payload fits the transmission budget at the current
// rates; GDs whose budget fits nothing (beyond ratio 0) are left local.
InferenceChoice gi_inference(const SimConfig& cfg, const std::vector<double>& entropies,
                             const std::vector<double>& rates_now);

// Uniformly random heading plus a uniformly random feasible inference choice
// (a random subset of exactly offloadCap GDs, each with a uniform ratio from
// its set, possibly 0).
double random_heading(Rng& rng);
InferenceChoice random_inference(const SimConfig& cfg, Rng& rng);

} // namespace uavei
