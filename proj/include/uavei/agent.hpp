// Hierarchical actor-critic agent: mixture-of-experts inference actor
// (gating + per-GD ratio experts), heading actor, unified critic with target
// copies, episode replay, and the training/evaluation drivers. The batch
// gradient kernels exist in two forms: a plain serial reference and the
// OpenMP production path (bit-identical at one thread).
#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "uavei/baselines.hpp"
#include "uavei/env.hpp"
#include "uavei/metrics.hpp"
#include "uavei/nn.hpp"
#include "uavei/rng.hpp"

namespace uavei {

enum class PolicyKind {
    HdrlMoe, // learned heading + mixture-of-experts inference
    Hdrl,    // learned heading + one monolithic net over all joint inference actions
    HdrlUe,  // HdrlMoe with entropy observations zeroed
    Ft,      // reference-tracking heading + learned MoE inference
    Gi,      // learned heading + greedy entropy/rate inference heuristic
    Random,  // uniform random everything, no learning
};

PolicyKind parse_policy(const std::string& name); // throws on unknown name
std::string policy_name(PolicyKind kind);

struct TrainConfig {
    double actor_lr = 1e-4;
    double critic_lr = 1e-3;
    double actor_tau = 0.001;
    double critic_tau = 0.001;
    double gate_temp0 = 0.5;         // selection Gumbel temperature at episode 0
    double ratio_temp0 = 0.5;        // ratio Gumbel temperature at episode 0
    double heading_noise_var0 = 0.1; // exploration noise variance at episode 0
    double decay = 0.995;            // per-episode multiplicative anneal factor
    int batch_size = 64;             // episodes per update
    int buffer_capacity = 1000;      // episodes kept (FIFO)
    int episodes = 5000;
    double discount = 1.0;
    std::vector<int> hidden_sizes = {128, 128};
    std::string critic_input = "stored"; // or "refreshed" (rebuilt from online actors)
    long long joint_action_cap = 10000000; // refuse monolithic layouts above this
    int threads = 0;                 // OpenMP threads for updates/eval; 0 = runtime default

    void validate() const; // throws std::invalid_argument
};

// Exploration schedule values for a 0-based episode index.
struct AnnealState {
    double heading_noise_std = 0.0;
    double gate_temp = 0.5;
    double ratio_temp = 0.5;
};
AnnealState anneal_at(const TrainConfig& cfg, int episode);

// Geometry of the critic's action representation
// [heading, gate block, expert blocks...] or [heading, joint block].
struct ActionLayout {
    int gd_count = 0;
    int offload_cap = 0;
    std::vector<int> ratio_counts; // per GD
    bool mono = false;
    long long joint_count = 0;     // monolithic only

    int tail_dim() const;               // everything after the heading entry
    int rep_dim() const { return 1 + tail_dim(); }
    int expert_offset(int gd) const;    // offset of GD's block within the tail
};

struct JointAction {
    std::vector<std::uint8_t> offload;
    std::vector<double> ratios;
};

// Number of (exactly-U subset, per-selected ratio) combinations, saturated
// at cap+1 to stay overflow-safe.
long long feasible_joint_count(int gd_count, int offload_cap,
                               const std::vector<int>& ratio_counts, long long cap);
// Lexicographic enumeration (subsets by ascending indices, then ratio odometer).
std::vector<JointAction> enumerate_joint_actions(const std::vector<std::vector<double>>& ratio_sets,
                                                 int offload_cap);

// Exactly `u` flags set; ties broken toward the lower index.
std::vector<std::uint8_t> top_u(std::span<const double> scores, int u);

// rep_tail holds the relaxed (temperature-softmax) form of the executed
// choice per block: softmax((z+gumbel)/temp) under exploration, softmax(z/temp)
// greedily, zeros for unselected expert blocks. The critic consumes this
// representation directly, so the same map must be used wherever a tail is
// rebuilt from actor nets. The actor update rebuilds with fresh Gumbel draws
// (selection included), keeping its inputs on the same distribution the
// stored tails come from; target actions stay noise-free.
struct InferenceDecision {
    std::vector<std::uint8_t> offload;
    std::vector<double> ratios;
    std::vector<double> rep_tail;     // executed representation (heading excluded)
    std::vector<double> relaxed_gate; // gate-block relaxation over GDs or joint actions
};

// One slot of an episode as the agent experienced it.
struct SlotRecord {
    std::vector<double> obs;                  // after any entropy masking
    double heading = 0.0;                     // flown heading (post override)
    std::vector<std::uint8_t> cond_offload;   // heading-actor conditioning
    std::vector<double> cond_ratios;
    std::vector<double> rep_tail;             // zeros during local windows
    double reward = 0.0;
};

struct EpisodeTrace {
    std::vector<SlotRecord> slots;
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);
    void push(EpisodeTrace trace); // evicts the oldest episode when full
    const EpisodeTrace& at(std::size_t i) const { return buf_.at(i); }
    std::size_t size() const { return buf_.size(); }
    std::size_t capacity() const { return capacity_; }

private:
    std::size_t capacity_;
    std::deque<EpisodeTrace> buf_;
};

struct Agent {
    PolicyKind kind = PolicyKind::HdrlMoe;
    TrainConfig tcfg;
    int obs_dim = 0;
    int slot_count = 0;
    int sync_period = 4;
    int local_slots = 1;
    ActionLayout layout;
    std::vector<std::vector<double>> ratio_sets;
    std::vector<JointAction> joint_actions; // monolithic only

    DenseNet gating, uav, critic, mono;
    std::vector<DenseNet> experts;
    DenseNet t_gating, t_uav, t_critic, t_mono;
    std::vector<DenseNet> t_experts;
    NetAdam ad_gating, ad_uav, ad_critic, ad_mono;
    std::vector<NetAdam> ad_experts;

    // Temperatures of the relaxed action representation for the current
    // training episode; the update kernels rebuild tails with these so that
    // stored, target, and actor-side representations share one map. train()
    // refreshes them from the anneal schedule each episode.
    double gate_temp_now = 0.5;
    double ratio_temp_now = 0.5;

    // The actor update redraws Gumbel noise for its rebuilt actions. Draws
    // are a pure function of (relax_seed, update_serial, sample index), so
    // the serial and OpenMP kernels see identical noise and repeated
    // evaluations at a fixed serial are reproducible (the finite-difference
    // tests rely on that). train() advances update_serial once per episode.
    std::uint64_t relax_seed = 0;
    std::uint64_t update_serial = 0;

    bool masks_entropy() const { return kind == PolicyKind::HdrlUe; }
    bool trains() const { return kind != PolicyKind::Random; }
    bool learned_heading() const {
        return kind != PolicyKind::Ft && kind != PolicyKind::Random;
    }
    bool learned_inference() const {
        return kind == PolicyKind::HdrlMoe || kind == PolicyKind::Hdrl ||
               kind == PolicyKind::HdrlUe || kind == PolicyKind::Ft;
    }

    // Observation vector with entropies zeroed for the entropy-excluded variant.
    std::vector<double> obs_vector(const Observation& o) const;
};

// Builds nets sized from the mission dimensions. Throws when a monolithic
// layout would exceed tcfg.joint_action_cap.
Agent make_agent(PolicyKind kind, const SimConfig& sim, const TrainConfig& tcfg,
                 std::uint64_t seed);

// MoE (or monolithic) inference decision from an observation vector.
InferenceDecision act_inference(const Agent& a, std::span<const double> obs, bool explore,
                                const AnnealState& anneal, Rng& rng);
// Heading actor: tanh output scaled to [-pi, pi], Gaussian exploration noise,
// clamped. Conditioning carries the period's in-effect offload decision.
double act_heading(const Agent& a, std::span<const double> obs,
                   std::span<const std::uint8_t> cond_offload,
                   std::span<const double> cond_ratios, bool explore,
                   const AnnealState& anneal, Rng& rng);

std::vector<double> assemble_action_rep(const ActionLayout& layout, double heading,
                                        std::span<const double> tail);

// --- batch update kernels ----------------------------------------------------

struct ActorGrads {
    NetGrads uav, gating, mono;
    std::vector<NetGrads> experts;
    std::vector<char> expert_touched; // experts selected by at least one sample
};
ActorGrads make_actor_grads(const Agent& a);

using Batch = std::vector<const EpisodeTrace*>;

// Mean-squared TD loss over every (episode, slot) sample; gradients of the
// critic parameters accumulate into `out`. Serial reference and OpenMP paths
// compute the same sums (identical order at one thread).
double critic_grads_serial(const Agent& a, const Batch& batch, NetGrads& out);
double critic_grads_omp(const Agent& a, const Batch& batch, NetGrads& out, int threads);

// Mean critic value of the rebuilt on-policy actions; gradients for the
// actors accumulate into `out` (ascent direction handled by the caller's
// Adam step on the negated objective).
double actor_grads_serial(const Agent& a, const Batch& batch, ActorGrads& out);
double actor_grads_omp(const Agent& a, const Batch& batch, ActorGrads& out, int threads);

// Full updates (OpenMP kernels + Adam). Return the loss / objective.
double critic_update(Agent& a, const Batch& batch);
double actor_update(Agent& a, const Batch& batch);
// Soft-update every target net toward its online twin.
void update_targets(Agent& a);

// --- rollout / train / evaluate ----------------------------------------------

struct EpisodeStats {
    double reward = 0.0;
    double accuracy = 0.0;
    double d_dev = 0.0;
    double offload_ratio = 0.0;
    int resolutions = 0;
    int correct = 0;
    std::vector<long> attempted; // per GD
    std::vector<long> delivered; // per GD
};

// Runs one episode. `policy_rng` supplies exploration / random-policy draws;
// `trace_out` (optional) receives the slot records; `traj_out` (optional)
// receives per-slot trajectory rows labeled `episode_label`.
EpisodeStats rollout_episode(const Agent& a, Environment& env, std::uint64_t env_seed,
                             bool explore, const AnnealState& anneal, Rng& policy_rng,
                             EpisodeTrace* trace_out, std::vector<TrajectoryRow>* traj_out,
                             int episode_label);

using EpisodeCallback = std::function<void(const MetricsRow&)>;

// Full training loop: explore-rollout, replay push, critic + actor updates,
// target soft updates, annealing. Deterministic for a fixed seed and thread
// count. Throws std::runtime_error on non-finite losses/gradients.
std::vector<MetricsRow> train(Agent& a, Environment& env, std::uint64_t seed,
                              const EpisodeCallback& on_episode = {});

// Greedy evaluation over independent episodes (parallelized across episodes;
// results are position-stable and thread-count independent).
EvalReport evaluate(const Agent& a, const SimConfig& sim, const TaskModelConfig& task,
                    std::uint64_t seed, int episodes);

} // namespace uavei
