#include "uavei/baselines.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace uavei {

double ft_heading(const SimConfig& cfg, const ReferencePath& ref, Vec2 q, int slot) {
    if (slot < 1 || slot >= cfg.slot_count)
        throw std::invalid_argument("ft_heading: slot must be in [1, N-1]");
    return bearing(q, ref.checkpoints[slot]); // checkpoint index slot = slot+1 in 1-based terms
}

InferenceChoice gi_inference(const SimConfig& cfg, const std::vector<double>& entropies,
                             const std::vector<double>& rates_now) {
    const int k = cfg.gd_count();
    if (static_cast<int>(entropies.size()) != k || static_cast<int>(rates_now.size()) != k)
        throw std::invalid_argument("gi_inference: need one entropy and rate per GD");

    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return entropies[a] > entropies[b]; });

    InferenceChoice choice;
    choice.offload.assign(k, 0);
    choice.ratios.assign(k, 0.0);
    const double window =
        (cfg.sync_period - cfg.local_slots) * cfg.slot_len(); // transmission seconds
    for (int i = 0; i < cfg.offload_cap; ++i) {
        const int g = order[i];
        const double budget = rates_now[g] * window;
        double best = 0.0;
        for (double ratio : cfg.ratio_sets[g]) {
            const double bits = ratio * cfg.feat_dim[g] * cfg.bits_per_dim[g];
            if (bits <= budget && ratio > best) best = ratio;
        }
        if (best > 0.0) {
            choice.offload[g] = 1;
            choice.ratios[g] = best;
        }
    }
    return choice;
}

double random_heading(Rng& rng) {
    return std::uniform_real_distribution<double>(-kPi, kPi)(rng);
}

InferenceChoice random_inference(const SimConfig& cfg, Rng& rng) {
    const int k = cfg.gd_count();
    InferenceChoice choice;
    choice.offload.assign(k, 0);
    choice.ratios.assign(k, 0.0);
    // Random subset of exactly offloadCap GDs via partial Fisher-Yates.
    std::vector<int> pool(k);
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < cfg.offload_cap; ++i) {
        const int j = std::uniform_int_distribution<int>(i, k - 1)(rng);
        std::swap(pool[i], pool[j]);
    }
    for (int i = 0; i < cfg.offload_cap; ++i) {
        const int g = pool[i];
        const auto& omega = cfg.ratio_sets[g];
        const int idx = std::uniform_int_distribution<int>(0, static_cast<int>(omega.size()) - 1)(rng);
        if (omega[idx] > 0.0) {
            choice.offload[g] = 1;
            choice.ratios[g] = omega[idx];
        }
    }
    return choice;
}

} // namespace uavei
