#include "uavei/task_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace uavei {

void TaskModelConfig::validate(int gd_count) const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("taskModel: " + msg); };
    if (class_count < 2) fail("classCount must be at least 2");
    if (difficulty.size() != static_cast<std::size_t>(gd_count))
        fail("difficulty must have one spec per ground device");
    for (const auto& d : difficulty) {
        if (d.lo < 0.0 || d.hi > 1.0 || d.lo > d.hi)
            fail("difficulty range must satisfy 0 <= lo <= hi <= 1");
        if (d.kind == DifficultyKind::Beta && (d.alpha <= 0.0 || d.beta <= 0.0))
            fail("beta difficulty requires positive alpha and beta");
    }
    if (uplift_gain < 0.0) fail("upliftGain must be non-negative");
    if (local_noise_std < 0.0) fail("localNoiseStd must be non-negative");
    if (!(mass_floor > 0.0 && mass_floor < mass_ceil && mass_ceil < 1.0))
        fail("mass bounds must satisfy 0 < massFloor < massCeil < 1");
    if (mass_floor * class_count >= 1.0 + 1e-12)
        fail("massFloor too large: floor*classCount must not exceed 1");
}

std::vector<double> two_level_dist(int class_count, int true_class, double true_mass) {
    std::vector<double> p(class_count, (1.0 - true_mass) / (class_count - 1));
    p[true_class] = true_mass;
    return p;
}

double dist_entropy(const std::vector<double>& p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

namespace {

double draw_difficulty(const DifficultySpec& spec, int gd, int gd_count, Rng& rng) {
    switch (spec.kind) {
    case DifficultyKind::Uniform: {
        if (spec.hi == spec.lo) return spec.lo;
        return std::uniform_real_distribution<double>(spec.lo, spec.hi)(rng);
    }
    case DifficultyKind::Beta: {
        // Beta(a,b) via two gamma draws, scaled into [lo, hi].
        std::gamma_distribution<double> ga(spec.alpha, 1.0);
        std::gamma_distribution<double> gb(spec.beta, 1.0);
        const double x = ga(rng);
        const double y = gb(rng);
        const double b = (x + y) > 0.0 ? x / (x + y) : 0.5;
        return spec.lo + (spec.hi - spec.lo) * b;
    }
    case DifficultyKind::SortedShard: {
        // GD 0 draws from the hardest (top) band, GD K-1 from the easiest.
        const double width = (spec.hi - spec.lo) / gd_count;
        const double band_hi = spec.hi - width * gd;
        const double band_lo = band_hi - width;
        if (band_hi == band_lo) return band_lo;
        return std::uniform_real_distribution<double>(band_lo, band_hi)(rng);
    }
    }
    throw std::logic_error("unknown difficulty kind");
}

} // namespace

TaskSample sample_task(const TaskModelConfig& cfg, int gd, int gd_count, Rng& rng) {
    if (gd < 0 || gd >= gd_count) throw std::invalid_argument("sample_task: gd out of range");
    const DifficultySpec& spec = cfg.difficulty.at(gd);

    TaskSample s;
    s.difficulty = std::clamp(draw_difficulty(spec, gd, gd_count, rng), 0.0, 1.0);
    s.true_class = std::uniform_int_distribution<int>(0, cfg.class_count - 1)(rng);
    double eps = 0.0;
    if (cfg.local_noise_std > 0.0)
        eps = std::normal_distribution<double>(0.0, cfg.local_noise_std)(rng);
    s.local_true_mass = std::clamp(1.0 - s.difficulty + eps, cfg.mass_floor, cfg.mass_ceil);
    s.local_dist = two_level_dist(cfg.class_count, s.true_class, s.local_true_mass);
    s.entropy = dist_entropy(s.local_dist);
    return s;
}

std::vector<double> remote_distribution(const TaskModelConfig& cfg, const TaskSample& sample,
                                        double ratio, bool delivered) {
    if (!delivered || ratio <= 0.0) return sample.local_dist;
    const double mass = std::clamp(sample.local_true_mass + cfg.uplift_gain * ratio,
                                   cfg.mass_floor, cfg.mass_ceil);
    return two_level_dist(cfg.class_count, sample.true_class, mass);
}

double ce_loss(const std::vector<double>& dist, int true_class) {
    if (true_class < 0 || true_class >= static_cast<int>(dist.size()))
        throw std::invalid_argument("ce_loss: class out of range");
    return -std::log(std::max(dist[true_class], 1e-12));
}

int predicted_class(const std::vector<double>& dist) {
    if (dist.empty()) throw std::invalid_argument("predicted_class: empty distribution");
    int best = 0;
    for (int i = 1; i < static_cast<int>(dist.size()); ++i)
        if (dist[i] > dist[best]) best = i;
    return best;
}

} // namespace uavei
