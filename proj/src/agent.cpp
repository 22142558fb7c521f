#include "uavei/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace uavei {

PolicyKind parse_policy(const std::string& name) {
    if (name == "hdrl_moe") return PolicyKind::HdrlMoe;
    if (name == "hdrl") return PolicyKind::Hdrl;
    if (name == "hdrl_ue") return PolicyKind::HdrlUe;
    if (name == "ft") return PolicyKind::Ft;
    if (name == "gi") return PolicyKind::Gi;
    if (name == "random") return PolicyKind::Random;
    throw std::invalid_argument("unknown policy '" + name +
                                "' (expected hdrl_moe|hdrl|hdrl_ue|ft|gi|random)");
}

std::string policy_name(PolicyKind kind) {
    switch (kind) {
    case PolicyKind::HdrlMoe: return "hdrl_moe";
    case PolicyKind::Hdrl: return "hdrl";
    case PolicyKind::HdrlUe: return "hdrl_ue";
    case PolicyKind::Ft: return "ft";
    case PolicyKind::Gi: return "gi";
    case PolicyKind::Random: return "random";
    }
    throw std::logic_error("unknown policy kind");
}

void TrainConfig::validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("train: " + m); };
    if (actor_lr <= 0.0 || critic_lr <= 0.0) fail("learning rates must be positive");
    if (actor_tau <= 0.0 || actor_tau > 1.0 || critic_tau <= 0.0 || critic_tau > 1.0)
        fail("soft-update taus must lie in (0, 1]");
    if (gate_temp0 <= 0.0 || ratio_temp0 <= 0.0) fail("initial temperatures must be positive");
    if (heading_noise_var0 < 0.0) fail("headingNoiseVar0 must be non-negative");
    if (decay <= 0.0 || decay > 1.0) fail("decay must lie in (0, 1]");
    if (batch_size <= 0) fail("batchSize must be positive");
    if (buffer_capacity <= 0) fail("bufferCapacity must be positive");
    if (episodes < 0) fail("episodes must be non-negative");
    if (discount < 0.0 || discount > 1.0) fail("discount must lie in [0, 1]");
    if (hidden_sizes.empty()) fail("hiddenSizes must be non-empty");
    for (int h : hidden_sizes)
        if (h <= 0) fail("hiddenSizes entries must be positive");
    if (critic_input != "stored" && critic_input != "refreshed")
        fail("criticInput must be 'stored' or 'refreshed'");
    if (joint_action_cap <= 0) fail("jointActionCap must be positive");
    if (threads < 0) fail("threads must be non-negative");
}

AnnealState anneal_at(const TrainConfig& cfg, int episode) {
    const double k = std::pow(cfg.decay, static_cast<double>(episode));
    AnnealState a;
    a.heading_noise_std = std::sqrt(cfg.heading_noise_var0 * k);
    a.gate_temp = cfg.gate_temp0 * k;
    a.ratio_temp = cfg.ratio_temp0 * k;
    return a;
}

int ActionLayout::tail_dim() const {
    if (mono) return static_cast<int>(joint_count);
    int d = gd_count;
    for (int c : ratio_counts) d += c;
    return d;
}

int ActionLayout::expert_offset(int gd) const {
    int off = gd_count;
    for (int k = 0; k < gd; ++k) off += ratio_counts[k];
    return off;
}

long long feasible_joint_count(int gd_count, int offload_cap,
                               const std::vector<int>& ratio_counts, long long cap) {
    const long long lim = cap + 1; // saturation sentinel
    std::vector<long long> f(offload_cap + 1, 0);
    f[0] = 1;
    for (int k = 0; k < gd_count; ++k) {
        const long long c = ratio_counts[k];
        for (int j = std::min(offload_cap, k + 1); j >= 1; --j) {
            long long add = f[j - 1] > lim / c ? lim : f[j - 1] * c;
            f[j] = std::min(lim, f[j] + add);
        }
    }
    return f[offload_cap];
}

std::vector<JointAction> enumerate_joint_actions(const std::vector<std::vector<double>>& ratio_sets,
                                                 int offload_cap) {
    const int k = static_cast<int>(ratio_sets.size());
    std::vector<JointAction> out;
    std::vector<int> subset;

    auto emit = [&]() {
        std::vector<int> odo(subset.size(), 0);
        while (true) {
            JointAction ja;
            ja.offload.assign(k, 0);
            ja.ratios.assign(k, 0.0);
            for (std::size_t i = 0; i < subset.size(); ++i) {
                ja.offload[subset[i]] = 1;
                ja.ratios[subset[i]] = ratio_sets[subset[i]][odo[i]];
            }
            out.push_back(std::move(ja));
            int pos = static_cast<int>(odo.size()) - 1;
            while (pos >= 0) {
                if (++odo[pos] < static_cast<int>(ratio_sets[subset[pos]].size())) break;
                odo[pos] = 0;
                --pos;
            }
            if (pos < 0) break;
        }
    };

    std::function<void(int)> rec = [&](int start) {
        if (static_cast<int>(subset.size()) == offload_cap) {
            emit();
            return;
        }
        const int need = offload_cap - static_cast<int>(subset.size());
        for (int g = start; g <= k - need; ++g) {
            subset.push_back(g);
            rec(g + 1);
            subset.pop_back();
        }
    };
    rec(0);
    return out;
}

namespace {

// In-place exactly-u selection; strict comparison keeps the lowest index on ties.
void top_u_into(std::span<const double> scores, int u, std::vector<std::uint8_t>& out) {
    const int n = static_cast<int>(scores.size());
    if (u < 0 || u > n) throw std::invalid_argument("top_u: u out of range");
    out.assign(n, 0);
    for (int pick = 0; pick < u; ++pick) {
        int best = -1;
        for (int i = 0; i < n; ++i)
            if (!out[i] && (best < 0 || scores[i] > scores[best])) best = i;
        out[best] = 1;
    }
}

} // namespace

std::vector<std::uint8_t> top_u(std::span<const double> scores, int u) {
    std::vector<std::uint8_t> flags;
    top_u_into(scores, u, flags);
    return flags;
}

std::vector<double> Agent::obs_vector(const Observation& o) const {
    // Network input encoding: the raw observation plus a one-hot of the
    // slot's phase within the sync period. The phase is derived from the slot
    // index (no extra information), but as an explicit basis it lets the
    // value nets separate where-in-the-period effects (local window, sensing,
    // period-end accuracy charge) from the action representation.
    std::vector<double> v = o.to_vector();
    const int slot = static_cast<int>(std::lround(o.slot_norm * slot_count));
    const int phase = slot - period_start(slot, sync_period);
    std::vector<double> ph(sync_period, 0.0);
    ph.at(phase) = 1.0;
    v.insert(v.begin() + 3, ph.begin(), ph.end());
    if (masks_entropy()) std::fill(v.begin() + 3 + sync_period, v.end(), 0.0);
    return v;
}

Agent make_agent(PolicyKind kind, const SimConfig& sim, const TrainConfig& tcfg,
                 std::uint64_t seed) {
    sim.validate();
    tcfg.validate();

    Agent a;
    a.kind = kind;
    a.tcfg = tcfg;
    const int k = sim.gd_count();
    a.obs_dim = observation_dim(k) + sim.sync_period; // + phase one-hot
    a.slot_count = sim.slot_count;
    a.sync_period = sim.sync_period;
    a.local_slots = sim.local_slots;
    a.ratio_sets = sim.ratio_sets;
    a.layout.gd_count = k;
    a.layout.offload_cap = sim.offload_cap;
    a.layout.ratio_counts.resize(k);
    for (int g = 0; g < k; ++g)
        a.layout.ratio_counts[g] = static_cast<int>(sim.ratio_sets[g].size());

    if (kind == PolicyKind::Hdrl) {
        a.layout.mono = true;
        const long long count = feasible_joint_count(k, sim.offload_cap, a.layout.ratio_counts,
                                                     tcfg.joint_action_cap);
        if (count > tcfg.joint_action_cap) {
            throw std::invalid_argument(
                "monolithic joint action space exceeds the cap of " +
                std::to_string(tcfg.joint_action_cap) +
                " entries; use the mixture-of-experts policy for this mission size");
        }
        a.layout.joint_count = count;
        a.joint_actions = enumerate_joint_actions(sim.ratio_sets, sim.offload_cap);
        if (static_cast<long long>(a.joint_actions.size()) != count)
            throw std::logic_error("joint action enumeration disagrees with the count");
    }

    auto sizes_of = [&](int in, int out) {
        std::vector<int> s;
        s.reserve(tcfg.hidden_sizes.size() + 2);
        s.push_back(in);
        s.insert(s.end(), tcfg.hidden_sizes.begin(), tcfg.hidden_sizes.end());
        s.push_back(out);
        return s;
    };
    auto rng_for = [&](std::uint64_t idx) { return make_rng(seed, Stream::NetInit, idx); };

    if (a.learned_inference()) {
        if (a.layout.mono) {
            Rng r = rng_for(100);
            a.mono = make_dense(sizes_of(a.obs_dim, static_cast<int>(a.layout.joint_count)),
                                OutputActivation::Identity, r);
            a.t_mono = a.mono;
            a.ad_mono = make_adam(a.mono);
        } else {
            Rng rg = rng_for(0);
            a.gating = make_dense(sizes_of(a.obs_dim, k), OutputActivation::Identity, rg);
            a.t_gating = a.gating;
            a.ad_gating = make_adam(a.gating);
            a.experts.resize(k);
            a.ad_experts.resize(k);
            for (int g = 0; g < k; ++g) {
                Rng re = rng_for(1 + static_cast<std::uint64_t>(g));
                a.experts[g] = make_dense(sizes_of(a.obs_dim, a.layout.ratio_counts[g]),
                                          OutputActivation::Identity, re);
                a.ad_experts[g] = make_adam(a.experts[g]);
            }
            a.t_experts = a.experts;
        }
    }
    if (a.learned_heading()) {
        Rng r = rng_for(101);
        a.uav = make_dense(sizes_of(a.obs_dim + 2 * k, 1), OutputActivation::Tanh, r);
        a.t_uav = a.uav;
        a.ad_uav = make_adam(a.uav);
    }
    if (a.trains()) {
        Rng r = rng_for(102);
        a.critic = make_dense(sizes_of(a.obs_dim + a.layout.rep_dim(), 1),
                              OutputActivation::Identity, r);
        a.t_critic = a.critic;
        a.ad_critic = make_adam(a.critic);
    }
    a.gate_temp_now = tcfg.gate_temp0;
    a.ratio_temp_now = tcfg.ratio_temp0;
    a.relax_seed = seed;
    return a;
}

InferenceDecision act_inference(const Agent& a, std::span<const double> obs, bool explore,
                                const AnnealState& anneal, Rng& rng) {
    if (!a.learned_inference())
        throw std::logic_error("act_inference: policy has no learned inference actor");
    InferenceDecision dec;
    if (a.layout.mono) {
        const std::vector<double> z = forward(a.mono, obs);
        const std::vector<double> zs = explore ? gumbel_perturb(z, rng) : z;
        const int pick = argmax(zs);
        dec.offload = a.joint_actions[pick].offload;
        dec.ratios = a.joint_actions[pick].ratios;
        dec.relaxed_gate = softmax_temp(zs, anneal.gate_temp);
        dec.rep_tail = dec.relaxed_gate;
        return dec;
    }
    const int k = a.layout.gd_count;
    const std::vector<double> z = forward(a.gating, obs);
    const std::vector<double> zs = explore ? gumbel_perturb(z, rng) : z;
    dec.offload = top_u(zs, a.layout.offload_cap);
    dec.relaxed_gate = softmax_temp(zs, anneal.gate_temp);
    dec.ratios.assign(k, 0.0);
    dec.rep_tail.assign(a.layout.tail_dim(), 0.0);
    std::copy(dec.relaxed_gate.begin(), dec.relaxed_gate.end(), dec.rep_tail.begin());
    for (int g = 0; g < k; ++g) {
        if (!dec.offload[g]) continue;
        const std::vector<double> ze = forward(a.experts[g], obs);
        const std::vector<double> zes = explore ? gumbel_perturb(ze, rng) : ze;
        const int choice = argmax(zes);
        dec.ratios[g] = a.ratio_sets[g][choice];
        const std::vector<double> rel = softmax_temp(zes, anneal.ratio_temp);
        std::copy(rel.begin(), rel.end(), dec.rep_tail.begin() + a.layout.expert_offset(g));
    }
    return dec;
}

namespace {

void build_uav_input(std::span<const double> obs, std::span<const std::uint8_t> xi,
                     std::span<const double> omega, std::vector<double>& out) {
    out.clear();
    out.reserve(obs.size() + xi.size() + omega.size());
    out.insert(out.end(), obs.begin(), obs.end());
    for (std::uint8_t f : xi) out.push_back(static_cast<double>(f));
    out.insert(out.end(), omega.begin(), omega.end());
}

void build_critic_input(std::span<const double> obs, double heading,
                        std::span<const double> tail, std::vector<double>& out) {
    out.clear();
    out.reserve(obs.size() + 1 + tail.size());
    out.insert(out.end(), obs.begin(), obs.end());
    out.push_back(heading);
    out.insert(out.end(), tail.begin(), tail.end());
}

} // namespace

double act_heading(const Agent& a, std::span<const double> obs,
                   std::span<const std::uint8_t> cond_offload,
                   std::span<const double> cond_ratios, bool explore,
                   const AnnealState& anneal, Rng& rng) {
    if (!a.learned_heading())
        throw std::logic_error("act_heading: policy has no learned heading actor");
    std::vector<double> in;
    build_uav_input(obs, cond_offload, cond_ratios, in);
    double theta = kPi * forward(a.uav, in)[0];
    if (explore && anneal.heading_noise_std > 0.0)
        theta += std::normal_distribution<double>(0.0, anneal.heading_noise_std)(rng);
    return std::clamp(theta, -kPi, kPi);
}

std::vector<double> assemble_action_rep(const ActionLayout& layout, double heading,
                                        std::span<const double> tail) {
    if (static_cast<int>(tail.size()) != layout.tail_dim())
        throw std::invalid_argument("assemble_action_rep: tail size mismatch");
    std::vector<double> rep;
    rep.reserve(layout.rep_dim());
    rep.push_back(heading);
    rep.insert(rep.end(), tail.begin(), tail.end());
    return rep;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
}

void ReplayBuffer::push(EpisodeTrace trace) {
    buf_.push_back(std::move(trace));
    if (buf_.size() > capacity_) buf_.pop_front();
}

ActorGrads make_actor_grads(const Agent& a) {
    ActorGrads g;
    g.uav = make_grads(a.uav);
    g.gating = make_grads(a.gating);
    g.mono = make_grads(a.mono);
    g.experts.resize(a.experts.size());
    for (std::size_t k = 0; k < a.experts.size(); ++k) g.experts[k] = make_grads(a.experts[k]);
    g.expert_touched.assign(a.layout.gd_count, 0);
    return g;
}

// --- shared per-sample machinery ---------------------------------------------

namespace {

struct Ws {
    ForwardTrace critic_tr, uav_tr, gate_tr, mono_tr, tmp_tr;
    std::vector<ForwardTrace> expert_tr;
    BackwardWs bw;
    std::vector<double> uav_in, critic_in, tail, dx, dz, zs;
    std::vector<std::uint8_t> mask;
    double one[1] = {1.0};
    double theta_up[1] = {0.0};
};

// softmax(z / tau) written into out[off .. off+n); max-shifted for stability.
void relax_into(std::span<const double> z, double tau, std::vector<double>& out, int off) {
    double mx = z[0];
    for (double v : z) mx = std::max(mx, v);
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double e = std::exp((z[i] - mx) / tau);
        out[off + i] = e;
        sum += e;
    }
    for (std::size_t i = 0; i < z.size(); ++i) out[off + i] /= sum;
}

// Pulls an upstream gradient g back through s = softmax(z/tau):
// dz_i = (s_i / tau) * (g_i - <g, s>). Written into out (resized).
void relax_vjp(const double* s, const double* g, int n, double tau, std::vector<double>& out) {
    double dot = 0.0;
    for (int i = 0; i < n; ++i) dot += g[i] * s[i];
    out.resize(n);
    for (int i = 0; i < n; ++i) out[i] = s[i] * (g[i] - dot) / tau;
}

// Fills ws.tail (and ws.mask for MoE layouts) from the given actor nets
// without keeping traces; used for target actions and refreshed critic inputs.
// Blocks carry the same relaxed representation the rollout stores.
void tail_from_nets(const Agent& a, const DenseNet& gate, const std::vector<DenseNet>& experts,
                    const DenseNet& mono, std::span<const double> obs, Ws& ws) {
    if (a.layout.mono) {
        const std::vector<double>& z = forward(mono, obs, ws.tmp_tr);
        ws.tail.resize(z.size());
        relax_into(z, a.gate_temp_now, ws.tail, 0);
        return;
    }
    const int k = a.layout.gd_count;
    ws.tail.assign(a.layout.tail_dim(), 0.0);
    const std::vector<double>& zg = forward(gate, obs, ws.tmp_tr);
    top_u_into(zg, a.layout.offload_cap, ws.mask);
    relax_into(zg, a.gate_temp_now, ws.tail, 0);
    for (int g = 0; g < k; ++g) {
        if (!ws.mask[g]) continue;
        const std::vector<double>& ze = forward(experts[g], obs, ws.tmp_tr);
        relax_into(ze, a.ratio_temp_now, ws.tail, a.layout.expert_offset(g));
    }
}

double net_heading(const DenseNet& uav, std::span<const double> obs,
                   std::span<const std::uint8_t> xi, std::span<const double> omega, Ws& ws,
                   ForwardTrace& tr) {
    build_uav_input(obs, xi, omega, ws.uav_in);
    return kPi * forward(uav, ws.uav_in, tr)[0];
}

// Squared TD residual for one (episode, slot) sample; critic parameter
// gradients (scaled by 2*resid/M) accumulate into `g` when non-null.
double critic_sample(const Agent& a, const EpisodeTrace& tr, int i, double inv_m, NetGrads* g,
                     Ws& ws) {
    const SlotRecord& rec = tr.slots[i];
    double y = rec.reward;
    if (i + 1 < static_cast<int>(tr.slots.size())) {
        const SlotRecord& next = tr.slots[i + 1];
        const int slot_next = i + 2; // 1-based
        double theta_hat;
        if (a.learned_heading())
            theta_hat = net_heading(a.t_uav, next.obs, next.cond_offload, next.cond_ratios, ws,
                                    ws.tmp_tr);
        else
            theta_hat = next.heading;
        if (in_local_window(slot_next, a.sync_period, a.local_slots))
            ws.tail.assign(a.layout.tail_dim(), 0.0);
        else if (a.learned_inference())
            tail_from_nets(a, a.t_gating, a.t_experts, a.t_mono, next.obs, ws);
        else
            ws.tail.assign(next.rep_tail.begin(), next.rep_tail.end());
        build_critic_input(next.obs, theta_hat, ws.tail, ws.critic_in);
        y += a.tcfg.discount * forward(a.t_critic, ws.critic_in, ws.tmp_tr)[0];
    }

    if (a.tcfg.critic_input == "stored") {
        build_critic_input(rec.obs, rec.heading, rec.rep_tail, ws.critic_in);
    } else { // refreshed: greedy online reconstruction of the slot's action
        const int slot = i + 1;
        double theta;
        if (a.learned_heading())
            theta = net_heading(a.uav, rec.obs, rec.cond_offload, rec.cond_ratios, ws, ws.tmp_tr);
        else
            theta = rec.heading;
        if (in_local_window(slot, a.sync_period, a.local_slots))
            ws.tail.assign(a.layout.tail_dim(), 0.0);
        else if (a.learned_inference())
            tail_from_nets(a, a.gating, a.experts, a.mono, rec.obs, ws);
        else
            ws.tail.assign(rec.rep_tail.begin(), rec.rep_tail.end());
        build_critic_input(rec.obs, theta, ws.tail, ws.critic_in);
    }

    const double q = forward(a.critic, ws.critic_in, ws.critic_tr)[0];
    const double resid = q - y;
    if (g) {
        ws.one[0] = 2.0 * resid * inv_m;
        backward_accum(a.critic, ws.critic_tr, std::span<const double>(ws.one, 1), 1.0, g, {},
                       ws.bw);
    }
    return resid * resid;
}

// Critic value of the rebuilt on-policy action for one sample; actor
// gradients of the mean objective (ascent) accumulate into `g`. The rebuild
// redraws Gumbel noise (selection included) so the critic is queried on the
// same relaxed-action distribution the stored tails come from; the noise is
// keyed by (update_serial, sample index) and enters the chain rule as a
// constant shift of the logits.
double actor_sample(const Agent& a, const EpisodeTrace& tr, int i, long sample_idx, double inv_m,
                    ActorGrads* g, Ws& ws) {
    const SlotRecord& rec = tr.slots[i];
    const int slot = i + 1;
    const bool local = in_local_window(slot, a.sync_period, a.local_slots);
    const int obs_dim = a.obs_dim;

    double theta;
    if (a.learned_heading())
        theta = net_heading(a.uav, rec.obs, rec.cond_offload, rec.cond_ratios, ws, ws.uav_tr);
    else
        theta = rec.heading;

    const bool inf_active = a.learned_inference() && !local;
    if (local) {
        ws.tail.assign(a.layout.tail_dim(), 0.0);
    } else if (a.learned_inference()) {
        Rng rng = make_rng(a.relax_seed, Stream::ActorRelax,
                           (a.update_serial << 32) | static_cast<std::uint64_t>(sample_idx));
        if (a.layout.mono) {
            const std::vector<double>& z = forward(a.mono, rec.obs, ws.mono_tr);
            ws.zs = gumbel_perturb(z, rng);
            ws.tail.resize(ws.zs.size());
            relax_into(ws.zs, a.gate_temp_now, ws.tail, 0);
        } else {
            const std::vector<double>& zg = forward(a.gating, rec.obs, ws.gate_tr);
            ws.zs = gumbel_perturb(zg, rng);
            top_u_into(ws.zs, a.layout.offload_cap, ws.mask);
            ws.tail.assign(a.layout.tail_dim(), 0.0);
            relax_into(ws.zs, a.gate_temp_now, ws.tail, 0);
            for (int k = 0; k < a.layout.gd_count; ++k) {
                if (!ws.mask[k]) continue;
                ws.expert_tr.resize(a.layout.gd_count);
                const std::vector<double>& ze = forward(a.experts[k], rec.obs, ws.expert_tr[k]);
                ws.zs = gumbel_perturb(ze, rng);
                relax_into(ws.zs, a.ratio_temp_now, ws.tail, a.layout.expert_offset(k));
            }
        }
    } else {
        ws.tail.assign(rec.rep_tail.begin(), rec.rep_tail.end());
    }

    build_critic_input(rec.obs, theta, ws.tail, ws.critic_in);
    const double q = forward(a.critic, ws.critic_in, ws.critic_tr)[0];

    if (g && (a.learned_heading() || inf_active)) {
        ws.dx.resize(ws.critic_in.size());
        ws.one[0] = 1.0;
        backward_accum(a.critic, ws.critic_tr, std::span<const double>(ws.one, 1), 1.0, nullptr,
                       ws.dx, ws.bw);
        const double scale = -inv_m; // Adam descends; objective is maximized
        if (a.learned_heading()) {
            ws.theta_up[0] = ws.dx[obs_dim] * kPi;
            backward_accum(a.uav, ws.uav_tr, std::span<const double>(ws.theta_up, 1), scale,
                           &g->uav, {}, ws.bw);
        }
        if (inf_active) {
            // Upstream gradients address the relaxed blocks; pull each back
            // through its softmax before reaching the logits.
            const double* dtail = ws.dx.data() + obs_dim + 1;
            const double* s = ws.tail.data();
            if (a.layout.mono) {
                const int n = static_cast<int>(a.layout.joint_count);
                relax_vjp(s, dtail, n, a.gate_temp_now, ws.dz);
                backward_accum(a.mono, ws.mono_tr, ws.dz, scale, &g->mono, {}, ws.bw);
            } else {
                relax_vjp(s, dtail, a.layout.gd_count, a.gate_temp_now, ws.dz);
                backward_accum(a.gating, ws.gate_tr, ws.dz, scale, &g->gating, {}, ws.bw);
                for (int k = 0; k < a.layout.gd_count; ++k) {
                    if (!ws.mask[k]) continue;
                    const int off = a.layout.expert_offset(k);
                    relax_vjp(s + off, dtail + off, a.layout.ratio_counts[k], a.ratio_temp_now,
                              ws.dz);
                    backward_accum(a.experts[k], ws.expert_tr[k], ws.dz, scale, &g->experts[k],
                                   {}, ws.bw);
                    g->expert_touched[k] = 1;
                }
            }
        }
    }
    return q;
}

void check_batch(const Agent& a, const Batch& batch) {
    if (!a.trains()) throw std::logic_error("update: this policy kind does not train");
    if (batch.empty()) throw std::invalid_argument("update: empty batch");
    for (const EpisodeTrace* t : batch) {
        if (!t || static_cast<int>(t->slots.size()) != a.slot_count)
            throw std::invalid_argument("update: every trace must cover the full episode");
    }
}

int resolve_threads(int requested) {
#ifdef _OPENMP
    return requested > 0 ? requested : omp_get_max_threads();
#else
    (void)requested;
    return 1;
#endif
}

void add_grads(NetGrads& into, const NetGrads& from) {
    for (std::size_t l = 0; l < into.dw.size(); ++l) {
        for (std::size_t i = 0; i < into.dw[l].size(); ++i) into.dw[l][i] += from.dw[l][i];
        for (std::size_t i = 0; i < into.db[l].size(); ++i) into.db[l][i] += from.db[l][i];
    }
}

} // namespace

double critic_grads_serial(const Agent& a, const Batch& batch, NetGrads& out) {
    check_batch(a, batch);
    out.zero();
    const long total = static_cast<long>(batch.size()) * a.slot_count;
    const double inv_m = 1.0 / static_cast<double>(total);
    Ws ws;
    double sq = 0.0;
    for (long idx = 0; idx < total; ++idx) {
        const EpisodeTrace& tr = *batch[idx / a.slot_count];
        sq += critic_sample(a, tr, static_cast<int>(idx % a.slot_count), inv_m, &out, ws);
    }
    return sq * inv_m;
}

double critic_grads_omp(const Agent& a, const Batch& batch, NetGrads& out, int threads) {
    check_batch(a, batch);
    out.zero();
    const long total = static_cast<long>(batch.size()) * a.slot_count;
    const double inv_m = 1.0 / static_cast<double>(total);
    const int t = static_cast<int>(std::min<long>(resolve_threads(threads), total));
    std::vector<NetGrads> partial(t, make_grads(a.critic));
    std::vector<double> sq(t, 0.0);
#ifdef _OPENMP
#pragma omp parallel num_threads(t)
#endif
    {
#ifdef _OPENMP
        const int me = omp_get_thread_num();
#else
        const int me = 0;
#endif
        Ws ws;
        const long lo = total * me / t;
        const long hi = total * (me + 1) / t;
        for (long idx = lo; idx < hi; ++idx) {
            const EpisodeTrace& tr = *batch[idx / a.slot_count];
            sq[me] +=
                critic_sample(a, tr, static_cast<int>(idx % a.slot_count), inv_m, &partial[me], ws);
        }
    }
    double total_sq = 0.0;
    for (int i = 0; i < t; ++i) {
        add_grads(out, partial[i]);
        total_sq += sq[i];
    }
    return total_sq * inv_m;
}

namespace {

void add_actor_grads(ActorGrads& into, const ActorGrads& from) {
    add_grads(into.uav, from.uav);
    add_grads(into.gating, from.gating);
    add_grads(into.mono, from.mono);
    for (std::size_t k = 0; k < into.experts.size(); ++k)
        add_grads(into.experts[k], from.experts[k]);
    for (std::size_t k = 0; k < into.expert_touched.size(); ++k)
        into.expert_touched[k] = into.expert_touched[k] || from.expert_touched[k];
}

} // namespace

double actor_grads_serial(const Agent& a, const Batch& batch, ActorGrads& out) {
    check_batch(a, batch);
    out = make_actor_grads(a);
    const long total = static_cast<long>(batch.size()) * a.slot_count;
    const double inv_m = 1.0 / static_cast<double>(total);
    Ws ws;
    double obj = 0.0;
    for (long idx = 0; idx < total; ++idx) {
        const EpisodeTrace& tr = *batch[idx / a.slot_count];
        obj += actor_sample(a, tr, static_cast<int>(idx % a.slot_count), idx, inv_m, &out, ws);
    }
    return obj * inv_m;
}

double actor_grads_omp(const Agent& a, const Batch& batch, ActorGrads& out, int threads) {
    check_batch(a, batch);
    out = make_actor_grads(a);
    const long total = static_cast<long>(batch.size()) * a.slot_count;
    const double inv_m = 1.0 / static_cast<double>(total);
    const int t = static_cast<int>(std::min<long>(resolve_threads(threads), total));
    std::vector<ActorGrads> partial;
    partial.reserve(t);
    for (int i = 0; i < t; ++i) partial.push_back(make_actor_grads(a));
    std::vector<double> obj(t, 0.0);
#ifdef _OPENMP
#pragma omp parallel num_threads(t)
#endif
    {
#ifdef _OPENMP
        const int me = omp_get_thread_num();
#else
        const int me = 0;
#endif
        Ws ws;
        const long lo = total * me / t;
        const long hi = total * (me + 1) / t;
        for (long idx = lo; idx < hi; ++idx) {
            const EpisodeTrace& tr = *batch[idx / a.slot_count];
            obj[me] += actor_sample(a, tr, static_cast<int>(idx % a.slot_count), idx, inv_m,
                                    &partial[me], ws);
        }
    }
    double total_obj = 0.0;
    for (int i = 0; i < t; ++i) {
        add_actor_grads(out, partial[i]);
        total_obj += obj[i];
    }
    return total_obj * inv_m;
}

double critic_update(Agent& a, const Batch& batch) {
    NetGrads g = make_grads(a.critic);
    const double loss = critic_grads_omp(a, batch, g, a.tcfg.threads);
    adam_step(a.critic, g, a.ad_critic, a.tcfg.critic_lr);
    return loss;
}

double actor_update(Agent& a, const Batch& batch) {
    ActorGrads g = make_actor_grads(a);
    const double obj = actor_grads_omp(a, batch, g, a.tcfg.threads);
    if (a.learned_heading()) adam_step(a.uav, g.uav, a.ad_uav, a.tcfg.actor_lr);
    if (a.learned_inference()) {
        if (a.layout.mono) {
            adam_step(a.mono, g.mono, a.ad_mono, a.tcfg.actor_lr);
        } else {
            adam_step(a.gating, g.gating, a.ad_gating, a.tcfg.actor_lr);
            // Experts untouched by the whole batch keep bit-identical
            // parameters and Adam state.
            for (int k = 0; k < a.layout.gd_count; ++k)
                if (g.expert_touched[k])
                    adam_step(a.experts[k], g.experts[k], a.ad_experts[k], a.tcfg.actor_lr);
        }
    }
    return obj;
}

void update_targets(Agent& a) {
    if (!a.trains()) throw std::logic_error("update_targets: this policy kind does not train");
    soft_update(a.t_critic, a.critic, a.tcfg.critic_tau);
    if (a.learned_heading()) soft_update(a.t_uav, a.uav, a.tcfg.actor_tau);
    if (a.learned_inference()) {
        if (a.layout.mono) {
            soft_update(a.t_mono, a.mono, a.tcfg.actor_tau);
        } else {
            soft_update(a.t_gating, a.gating, a.tcfg.actor_tau);
            for (std::size_t k = 0; k < a.experts.size(); ++k)
                soft_update(a.t_experts[k], a.experts[k], a.tcfg.actor_tau);
        }
    }
}

// --- rollout / train / evaluate ----------------------------------------------

namespace {

std::vector<double> heuristic_tail(const Agent& a, const InferenceChoice& c) {
    std::vector<double> tail(a.layout.tail_dim(), 0.0);
    const int k = a.layout.gd_count;
    for (int g = 0; g < k; ++g) tail[g] = static_cast<double>(c.offload[g]);
    for (int g = 0; g < k; ++g) {
        if (!c.offload[g]) continue;
        const auto& omega = a.ratio_sets[g];
        for (int i = 0; i < static_cast<int>(omega.size()); ++i) {
            if (omega[i] == c.ratios[g]) {
                tail[a.layout.expert_offset(g) + i] = 1.0;
                break;
            }
        }
    }
    return tail;
}

} // namespace

EpisodeStats rollout_episode(const Agent& a, Environment& env, std::uint64_t env_seed,
                             bool explore, const AnnealState& anneal, Rng& policy_rng,
                             EpisodeTrace* trace_out, std::vector<TrajectoryRow>* traj_out,
                             int episode_label) {
    const SimConfig& cfg = env.cfg();
    const int k = cfg.gd_count();
    const int n_slots = cfg.slot_count;

    Observation obs = env.reset(env_seed);
    std::vector<std::uint8_t> cond_xi(k, 0);
    std::vector<double> cond_om(k, 0.0);
    std::vector<double> cur_tail(a.layout.tail_dim(), 0.0);
    Action action;
    action.offload.assign(k, 0);
    action.ratios.assign(k, 0.0);

    EpisodeStats st;
    st.attempted.assign(k, 0);
    st.delivered.assign(k, 0);
    if (trace_out) {
        trace_out->slots.clear();
        trace_out->slots.reserve(n_slots);
    }

    for (int n = 1; n <= n_slots; ++n) {
        const std::vector<double> ov = a.obs_vector(obs);
        const int dslot = decision_slot_of(n, cfg.sync_period, cfg.local_slots);
        if (n == dslot) {
            if (a.learned_inference()) {
                InferenceDecision dec = act_inference(a, ov, explore, anneal, policy_rng);
                cond_xi = dec.offload;
                cond_om = dec.ratios;
                cur_tail = std::move(dec.rep_tail);
            } else if (a.kind == PolicyKind::Gi) {
                std::vector<double> rates(k);
                for (int g = 0; g < k; ++g) rates[g] = uplink_rate(cfg, env.position(), g);
                const InferenceChoice c = gi_inference(cfg, obs.entropies, rates);
                cond_xi = c.offload;
                cond_om = c.ratios;
                cur_tail = heuristic_tail(a, c);
            } else { // Random
                const InferenceChoice c = random_inference(cfg, policy_rng);
                cond_xi = c.offload;
                cond_om = c.ratios;
                cur_tail = heuristic_tail(a, c);
            }
            action.offload = cond_xi;
            action.ratios = cond_om;
        } else if (n < dslot) { // local window: no decision in effect yet
            std::fill(action.offload.begin(), action.offload.end(), 0);
            std::fill(action.ratios.begin(), action.ratios.end(), 0.0);
        }

        double theta;
        if (a.kind == PolicyKind::Ft)
            theta = n < n_slots ? ft_heading(cfg, env.ref(), env.position(), n) : 0.0;
        else if (a.kind == PolicyKind::Random)
            theta = random_heading(policy_rng);
        else
            theta = act_heading(a, ov, cond_xi, cond_om, explore, anneal, policy_rng);
        action.heading = theta;

        const Vec2 pos_n = env.position();
        const StepOutcome out = env.step(action);

        if (trace_out) {
            SlotRecord rec;
            rec.obs = ov;
            rec.heading = out.info.executed_heading;
            rec.cond_offload = cond_xi;
            rec.cond_ratios = cond_om;
            rec.rep_tail = n < dslot ? std::vector<double>(a.layout.tail_dim(), 0.0) : cur_tail;
            rec.reward = out.reward;
            trace_out->slots.push_back(std::move(rec));
        }
        if (traj_out) {
            traj_out->push_back({episode_label, n, pos_n.x, pos_n.y, out.info.executed_heading,
                                 out.reward, out.info.instant_dev});
        }

        st.reward += out.reward;
        if (out.info.period_resolved) {
            st.resolutions += out.info.resolutions;
            st.correct += out.info.correct;
            for (int g = 0; g < k; ++g) {
                st.attempted[g] += out.info.attempted[g];
                st.delivered[g] += out.info.delivered[g];
            }
        }
        obs = out.obs;
    }

    st.accuracy = st.resolutions > 0 ? static_cast<double>(st.correct) / st.resolutions : 0.0;
    st.d_dev = env.episode_deviation();
    long att = 0, del = 0;
    for (int g = 0; g < k; ++g) {
        att += st.attempted[g];
        del += st.delivered[g];
    }
    st.offload_ratio = att > 0 ? static_cast<double>(del) / static_cast<double>(att) : 0.0;
    return st;
}

std::vector<MetricsRow> train(Agent& a, Environment& env, std::uint64_t seed,
                              const EpisodeCallback& on_episode) {
    ReplayBuffer buffer(a.tcfg.buffer_capacity);
    std::vector<MetricsRow> rows;
    rows.reserve(a.tcfg.episodes);
    Batch batch;

    for (int e = 0; e < a.tcfg.episodes; ++e) {
        const AnnealState anneal = anneal_at(a.tcfg, e);
        a.gate_temp_now = anneal.gate_temp;
        a.ratio_temp_now = anneal.ratio_temp;
        a.update_serial = static_cast<std::uint64_t>(e);
        Rng prng = make_rng(seed, Stream::Explore, e);
        EpisodeTrace trace;
        const std::uint64_t env_seed = derive_seed(seed, Stream::Episode, e);
        const EpisodeStats st = rollout_episode(a, env, env_seed, /*explore=*/true, anneal, prng,
                                                a.trains() ? &trace : nullptr, nullptr, e);

        MetricsRow row;
        row.episode = e;
        row.reward = st.reward;
        row.accuracy = st.accuracy;
        row.d_dev = st.d_dev;
        row.offload_ratio = st.offload_ratio;

        if (a.trains()) {
            buffer.push(std::move(trace));
            Rng brng = make_rng(seed, Stream::Batch, e);
            std::uniform_int_distribution<std::size_t> pick(0, buffer.size() - 1);
            batch.clear();
            for (int b = 0; b < a.tcfg.batch_size; ++b) batch.push_back(&buffer.at(pick(brng)));
            row.critic_loss = critic_update(a, batch);
            row.actor_objective = actor_update(a, batch);
            update_targets(a);
            if (!std::isfinite(row.critic_loss) || !std::isfinite(row.actor_objective))
                throw std::runtime_error("training diverged: non-finite loss at episode " +
                                         std::to_string(e));
        }
        rows.push_back(row);
        if (on_episode) on_episode(row);
    }
    return rows;
}

EvalReport evaluate(const Agent& a, const SimConfig& sim, const TaskModelConfig& task,
                    std::uint64_t seed, int episodes) {
    if (episodes <= 0) throw std::invalid_argument("evaluate: episodes must be positive");
    const int k = sim.gd_count();
    std::vector<EpisodeStats> stats(episodes);
    std::vector<TrajectoryRow> first_traj;
    const AnnealState anneal{}; // greedy rollouts ignore it
    const int t = resolve_threads(a.tcfg.threads);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(t)
#endif
    for (int i = 0; i < episodes; ++i) {
        Environment env(sim, task);
        Rng prng = make_rng(seed, Stream::EvalPolicy, i);
        std::vector<TrajectoryRow> traj;
        stats[i] = rollout_episode(a, env, derive_seed(seed, Stream::EvalEnv, i),
                                   /*explore=*/false, anneal, prng, nullptr,
                                   i == 0 ? &traj : nullptr, i);
        if (i == 0) first_traj = std::move(traj);
    }
    (void)t;

    EvalReport rep;
    rep.episodes = episodes;
    std::vector<double> acc, rew, dev;
    acc.reserve(episodes);
    rew.reserve(episodes);
    dev.reserve(episodes);
    std::vector<long> att(k, 0), del(k, 0);
    for (const EpisodeStats& s : stats) {
        acc.push_back(s.accuracy);
        rew.push_back(s.reward);
        dev.push_back(s.d_dev);
        for (int g = 0; g < k; ++g) {
            att[g] += s.attempted[g];
            del[g] += s.delivered[g];
        }
    }
    rep.accuracy_mean = vec_mean(acc);
    rep.accuracy_std = vec_std(acc);
    rep.reward_mean = vec_mean(rew);
    rep.reward_std = vec_std(rew);
    rep.d_dev_mean = vec_mean(dev);
    rep.d_dev_std = vec_std(dev);
    long att_total = 0, del_total = 0;
    rep.gd_success_ratio.resize(k);
    rep.gd_share.resize(k);
    for (int g = 0; g < k; ++g) {
        att_total += att[g];
        del_total += del[g];
        rep.gd_success_ratio[g] =
            att[g] > 0 ? static_cast<double>(del[g]) / static_cast<double>(att[g]) : 0.0;
    }
    for (int g = 0; g < k; ++g)
        rep.gd_share[g] =
            att_total > 0 ? static_cast<double>(att[g]) / static_cast<double>(att_total) : 0.0;
    rep.offload_ratio_overall =
        att_total > 0 ? static_cast<double>(del_total) / static_cast<double>(att_total) : 0.0;
    rep.first_episode = std::move(first_traj);
    return rep;
}

} // namespace uavei
