#include "uavei/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace uavei {

std::vector<double> Observation::to_vector() const {
    std::vector<double> v;
    v.reserve(3 + entropies.size());
    v.push_back(slot_norm);
    v.push_back(pos_norm.x);
    v.push_back(pos_norm.y);
    v.insert(v.end(), entropies.begin(), entropies.end());
    return v;
}

double uplink_snr(const SimConfig& cfg, Vec2 q, int gd) {
    const double d_sq = dist_sq(q, cfg.gd_positions.at(gd)) + cfg.altitude * cfg.altitude;
    return cfg.ref_gain * cfg.tx_power.at(gd) / (cfg.noise_power * d_sq);
}

double uplink_rate(const SimConfig& cfg, Vec2 q, int gd) {
    return cfg.bandwidth * std::log2(1.0 + uplink_snr(cfg, q, gd));
}

Vec2 advance_uav(Vec2 q, double heading, const SimConfig& cfg) {
    const double step = cfg.step_len();
    return {q.x + step * std::cos(heading), q.y + step * std::sin(heading)};
}

double straight_flight_override(const SimConfig& cfg, Vec2 q, int slot, double heading) {
    if (slot < 1 || slot >= cfg.slot_count)
        throw std::invalid_argument("straight_flight_override: slot must be in [1, N-1]");
    const Vec2 next = advance_uav(q, heading, cfg);
    const double t_min = std::ceil(dist(next, cfg.end_pos) / cfg.step_len());
    if (static_cast<double>(cfg.slot_count - slot - 1) <= t_min)
        return bearing(q, cfg.end_pos);
    return heading;
}

Environment::Environment(SimConfig cfg, TaskModelConfig task)
    : cfg_(std::move(cfg)), task_(std::move(task)) {
    cfg_.validate();
    task_.validate(cfg_.gd_count());
    ref_ = build_reference_path(cfg_);
    pos_ = cfg_.start_pos;
    samples_.resize(cfg_.gd_count());
    ledger_.resize(cfg_.gd_count());
}

void Environment::draw_samples() {
    const int k = cfg_.gd_count();
    for (int g = 0; g < k; ++g) samples_[g] = sample_task(task_, g, k, rng_);
    std::fill(ledger_.begin(), ledger_.end(), GdLedger{});
}

Observation Environment::reset(std::uint64_t seed) {
    rng_.seed(derive_seed(seed, Stream::EnvTask, 0));
    slot_ = 1;
    pos_ = cfg_.start_pos;
    done_ = false;
    traj_.assign(1, pos_);
    draw_samples();
    return observation();
}

Observation Environment::observation() const {
    Observation o;
    o.slot_norm = static_cast<double>(slot_) / cfg_.slot_count;
    o.pos_norm = {pos_.x / cfg_.area_bounds, pos_.y / cfg_.area_bounds};
    o.entropies.resize(samples_.size());
    for (std::size_t g = 0; g < samples_.size(); ++g) o.entropies[g] = samples_[g].entropy;
    return o;
}

StepOutcome Environment::step(const Action& action) {
    if (done_) throw std::runtime_error("step: episode already done");
    const int k = cfg_.gd_count();
    if (static_cast<int>(action.offload.size()) != k ||
        static_cast<int>(action.ratios.size()) != k)
        throw std::invalid_argument("step: action must carry one offload flag and ratio per GD");

    const int n = slot_;
    const double heading = std::clamp(action.heading, -kPi, kPi);
    const int m = period_start(n, cfg_.sync_period);
    const int decision = m + cfg_.local_slots;

    if (n == decision) {
        int selected = 0;
        for (int g = 0; g < k; ++g) {
            const bool sel = action.offload[g] != 0;
            const double ratio = action.ratios[g];
            const auto& omega = cfg_.ratio_sets[g];
            if (std::find(omega.begin(), omega.end(), ratio) == omega.end())
                throw std::invalid_argument("step: ratio for GD " + std::to_string(g) +
                                            " is not an element of its ratio set");
            if (ratio > 0.0 && !sel)
                throw std::invalid_argument("step: positive ratio for unselected GD " +
                                            std::to_string(g));
            selected += sel ? 1 : 0;
            ledger_[g] = GdLedger{};
            ledger_[g].selected = sel;
            ledger_[g].ratio = sel ? ratio : 0.0;
            ledger_[g].bits_required = ratio * cfg_.feat_dim[g] * cfg_.bits_per_dim[g];
        }
        if (selected > cfg_.offload_cap)
            throw std::invalid_argument("step: offload count exceeds cap");
    }

    if (n >= decision) {
        for (int g = 0; g < k; ++g) {
            GdLedger& led = ledger_[g];
            if (!led.selected || led.ratio <= 0.0 || led.delivered) continue;
            led.bits_accum += uplink_rate(cfg_, pos_, g) * cfg_.slot_len();
            if (led.bits_accum >= led.bits_required) led.delivered = true;
        }
    }

    StepOutcome out;
    out.info.executed_heading = heading;
    out.info.instant_dev = dist(pos_, ref_.checkpoints[n - 1]);
    out.reward = -cfg_.dev_weight * dist_sq(pos_, ref_.checkpoints[n - 1]);

    if (is_period_end(n, cfg_.sync_period)) {
        out.info.period_resolved = true;
        out.info.attempted.resize(k);
        out.info.delivered.resize(k);
        for (int g = 0; g < k; ++g) {
            const GdLedger& led = ledger_[g];
            const auto final_dist =
                remote_distribution(task_, samples_[g], led.selected ? led.ratio : 0.0,
                                    led.delivered);
            const double ce = ce_loss(final_dist, samples_[g].true_class);
            out.info.period_ce_sum += ce;
            out.info.resolutions += 1;
            out.info.correct += predicted_class(final_dist) == samples_[g].true_class ? 1 : 0;
            out.info.attempted[g] = (led.selected && led.ratio > 0.0) ? 1 : 0;
            out.info.delivered[g] = led.delivered ? 1 : 0;
        }
        out.reward -= out.info.period_ce_sum;
    }

    if (n < cfg_.slot_count) {
        const double exec = straight_flight_override(cfg_, pos_, n, heading);
        out.info.executed_heading = exec;
        pos_ = advance_uav(pos_, exec, cfg_);
        slot_ = n + 1;
        traj_.push_back(pos_);
        if (is_sensing_slot(slot_, cfg_.sync_period)) draw_samples();
    } else {
        done_ = true;
    }

    out.done = done_;
    out.obs = observation();
    return out;
}

} // namespace uavei
