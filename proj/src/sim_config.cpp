#include "uavei/sim_config.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace uavei {

namespace {

void fail(const std::string& msg) { throw std::invalid_argument("config: " + msg); }

void require_per_gd(std::size_t got, std::size_t k, const char* name) {
    if (got != k) {
        fail(std::string(name) + " must have one entry per ground device (expected " +
             std::to_string(k) + ", got " + std::to_string(got) + ")");
    }
}

} // namespace

void SimConfig::validate() const {
    if (mission_duration <= 0.0) fail("missionDuration must be positive");
    if (slot_count <= 0) fail("slotCount must be positive");
    if (sync_period <= 0) fail("syncPeriod must be positive");
    if (local_slots <= 0 || local_slots >= sync_period)
        fail("localSlots must satisfy 0 < localSlots < syncPeriod");
    if (altitude <= 0.0) fail("altitude must be positive");
    if (speed <= 0.0) fail("speed must be positive");
    if (area_bounds <= 0.0) fail("areaBounds must be positive");
    if (ref_circle_radius < 0.0) fail("refCircleRadius must be non-negative");
    if (gd_positions.empty()) fail("gdPositions is required and must be non-empty");
    const std::size_t k = gd_positions.size();
    if (offload_cap < 1 || offload_cap > static_cast<int>(k))
        fail("offloadCap must be in [1, gdCount]");
    if (bandwidth <= 0.0) fail("bandwidth must be positive");
    if (noise_power <= 0.0) fail("noisePower must be positive");
    if (ref_gain <= 0.0) fail("refGain must be positive");
    require_per_gd(tx_power.size(), k, "txPower");
    for (double p : tx_power)
        if (p <= 0.0) fail("txPower entries must be positive");
    require_per_gd(feat_dim.size(), k, "featDim");
    for (double d : feat_dim)
        if (d <= 0.0) fail("featDim entries must be positive");
    require_per_gd(bits_per_dim.size(), k, "bitsPerDim");
    for (double b : bits_per_dim)
        if (b <= 0.0) fail("bitsPerDim entries must be positive");
    require_per_gd(ratio_sets.size(), k, "ratioSet");
    for (const auto& omega : ratio_sets) {
        if (omega.empty() || omega.front() != 0.0)
            fail("each ratioSet must start with 0");
        for (std::size_t i = 0; i < omega.size(); ++i) {
            if (omega[i] < 0.0 || omega[i] > 1.0) fail("ratioSet entries must lie in [0,1]");
            if (i > 0 && omega[i] <= omega[i - 1]) fail("ratioSet must be strictly increasing");
        }
    }
    if (dev_weight < 0.0) fail("devWeight must be non-negative");
    if (dev_threshold <= 0.0) fail("devThreshold must be positive");
    // The straight-flight override can only guarantee on-time arrival if the
    // destination is reachable when it first engages.
    const double reach = (slot_count - 1) * step_len();
    if (dist(start_pos, end_pos) > reach + 1e-9)
        fail("endPos unreachable: dist(startPos,endPos) exceeds (slotCount-1)*speed*slotLen");
}

namespace {

Vec2 lerp(Vec2 a, Vec2 b, double t) { return {a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t}; }

} // namespace

ReferencePath build_reference_path(const SimConfig& cfg) {
    const int n = cfg.slot_count;
    const Vec2 c = cfg.ref_circle_center;
    const double r = cfg.ref_circle_radius;

    // Circle entry point: radially outward from the center through startPos
    // (angle 0 when the start coincides with the center).
    double angle0 = 0.0;
    {
        const Vec2 d = cfg.start_pos - c;
        if (!(d.x == 0.0 && d.y == 0.0)) angle0 = std::atan2(d.y, d.x);
    }
    const Vec2 entry{c.x + r * std::cos(angle0), c.y + r * std::sin(angle0)};

    const double l_in = dist(cfg.start_pos, entry);
    const double l_arc = 2.0 * kPi * r;
    const double l_out = dist(entry, cfg.end_pos);
    const double total = l_in + l_arc + l_out;

    if (total > n * cfg.step_len() * (1.0 + 1e-12)) {
        throw std::invalid_argument(
            "reference path length " + std::to_string(total) +
            " m exceeds mission coverage " + std::to_string(n * cfg.step_len()) + " m");
    }

    ReferencePath path;
    path.checkpoints.reserve(n);
    const double spacing = total / n;
    for (int i = 0; i < n; ++i) {
        double s = spacing * i;
        Vec2 p;
        if (total == 0.0) {
            p = cfg.start_pos;
        } else if (s <= l_in) {
            p = l_in > 0.0 ? lerp(cfg.start_pos, entry, s / l_in) : entry;
        } else if (s <= l_in + l_arc) {
            const double phi = angle0 + (s - l_in) / r; // counter-clockwise
            p = {c.x + r * std::cos(phi), c.y + r * std::sin(phi)};
        } else {
            const double t = l_out > 0.0 ? (s - l_in - l_arc) / l_out : 0.0;
            p = lerp(entry, cfg.end_pos, t);
        }
        path.checkpoints.push_back(p);
    }
    path.checkpoints[0] = cfg.start_pos;
    return path;
}

double deviation(const std::vector<Vec2>& traj, const ReferencePath& ref) {
    if (traj.size() != ref.checkpoints.size()) {
        throw std::invalid_argument("deviation: trajectory has " + std::to_string(traj.size()) +
                                    " points, reference has " +
                                    std::to_string(ref.checkpoints.size()));
    }
    if (traj.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < traj.size(); ++i) acc += dist_sq(traj[i], ref.checkpoints[i]);
    return std::sqrt(acc / static_cast<double>(traj.size()));
}

} // namespace uavei
