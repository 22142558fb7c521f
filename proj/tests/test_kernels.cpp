#include <doctest.h>

#include <uavei/agent.hpp>

#include <cmath>
#include <stdexcept>

#include "test_util.hpp"

using namespace uavei;

namespace {

TrainConfig kernel_train() {
    TrainConfig t;
    t.hidden_sizes = {8, 6};
    t.batch_size = 2;
    t.buffer_capacity = 8;
    t.episodes = 4;
    return t;
}

std::vector<EpisodeTrace> rollout_traces(const Agent& a, Environment& env, int count,
                                         std::uint64_t seed) {
    std::vector<EpisodeTrace> traces(count);
    for (int e = 0; e < count; ++e) {
        Rng prng = make_rng(seed, Stream::Explore, e);
        rollout_episode(a, env, derive_seed(seed, Stream::Episode, e), true,
                        anneal_at(a.tcfg, e), prng, &traces[e], nullptr, e);
    }
    return traces;
}

Batch as_batch(const std::vector<EpisodeTrace>& traces) {
    Batch b;
    for (const auto& t : traces) b.push_back(&t);
    return b;
}

std::vector<double> flatten_actor(const ActorGrads& g) {
    std::vector<double> out = testutil::flatten_grads(g.uav);
    auto app = [&](const NetGrads& n) {
        auto f = testutil::flatten_grads(n);
        out.insert(out.end(), f.begin(), f.end());
    };
    app(g.gating);
    app(g.mono);
    for (const auto& e : g.experts) app(e);
    return out;
}

void check_serial_omp_identity(PolicyKind kind, std::uint64_t seed) {
    SimConfig sim = testutil::tiny_sim();
    TaskModelConfig task = testutil::default_task(2);
    Environment env(sim, task);
    Agent a = make_agent(kind, sim, kernel_train(), seed);
    auto traces = rollout_traces(a, env, 3, seed + 1000);
    Batch batch = as_batch(traces);

    // One-thread OpenMP path must reproduce the serial reference bit for bit.
    NetGrads cs = make_grads(a.critic);
    NetGrads c1 = make_grads(a.critic);
    const double loss_s = critic_grads_serial(a, batch, cs);
    const double loss_1 = critic_grads_omp(a, batch, c1, 1);
    CHECK(loss_1 == loss_s);
    CHECK(testutil::flatten_grads(c1) == testutil::flatten_grads(cs));

    ActorGrads as = make_actor_grads(a);
    ActorGrads a1 = make_actor_grads(a);
    const double obj_s = actor_grads_serial(a, batch, as);
    const double obj_1 = actor_grads_omp(a, batch, a1, 1);
    CHECK(obj_1 == obj_s);
    CHECK(flatten_actor(a1) == flatten_actor(as));

    // Multi-threaded path reassociates the sums; allow rounding-level drift.
    NetGrads c4 = make_grads(a.critic);
    const double loss_4 = critic_grads_omp(a, batch, c4, 4);
    CHECK(loss_4 == doctest::Approx(loss_s).epsilon(1e-12));
    auto fs = testutil::flatten_grads(cs);
    auto f4 = testutil::flatten_grads(c4);
    REQUIRE(fs.size() == f4.size());
    for (std::size_t i = 0; i < fs.size(); ++i)
        CHECK(testutil::close_rel(fs[i], f4[i], 1e-10, 1e-14));

    ActorGrads a4 = make_actor_grads(a);
    const double obj_4 = actor_grads_omp(a, batch, a4, 4);
    CHECK(obj_4 == doctest::Approx(obj_s).epsilon(1e-12));
    auto gs = flatten_actor(as);
    auto g4 = flatten_actor(a4);
    REQUIRE(gs.size() == g4.size());
    for (std::size_t i = 0; i < gs.size(); ++i)
        CHECK(testutil::close_rel(gs[i], g4[i], 1e-10, 1e-14));
}

} // namespace

TEST_CASE("OpenMP kernels match the serial reference") {
    SUBCASE("mixture-of-experts") { check_serial_omp_identity(PolicyKind::HdrlMoe, 41); }
    SUBCASE("monolithic") { check_serial_omp_identity(PolicyKind::Hdrl, 43); }
    SUBCASE("fixed-heading") { check_serial_omp_identity(PolicyKind::Ft, 47); }
    SUBCASE("heuristic inference") { check_serial_omp_identity(PolicyKind::Gi, 53); }
}

TEST_CASE("critic batch gradient agrees with finite differences") {
    SimConfig sim = testutil::tiny_sim();
    TaskModelConfig task = testutil::default_task(2);
    Environment env(sim, task);
    Agent a = make_agent(PolicyKind::HdrlMoe, sim, kernel_train(), 61);
    auto traces = rollout_traces(a, env, 2, 2000);
    Batch batch = as_batch(traces);

    NetGrads analytic = make_grads(a.critic);
    critic_grads_serial(a, batch, analytic);
    auto flat = testutil::flatten_grads(analytic);

    // Loss as a function of the online critic parameters only (targets and
    // actors are held fixed inside critic_grads_serial).
    NetGrads scratch = make_grads(a.critic);
    const double h = 1e-5;
    std::size_t idx = 0;
    int checked = 0;
    testutil::for_each_param(a.critic, [&](double& p) {
        const double keep = p;
        p = keep + h;
        const double up = critic_grads_serial(a, batch, scratch);
        p = keep - h;
        const double dn = critic_grads_serial(a, batch, scratch);
        p = keep;
        const double fd = (up - dn) / (2.0 * h);
        CHECK(testutil::close_rel(flat[idx], fd, 1e-4, 1e-8));
        ++idx;
        ++checked;
    });
    CHECK(checked == static_cast<int>(a.critic.param_count()));
}

TEST_CASE("actor batch gradient agrees with finite differences") {
    SimConfig sim = testutil::tiny_sim();
    TaskModelConfig task = testutil::default_task(2);
    Environment env(sim, task);
    Agent a = make_agent(PolicyKind::HdrlMoe, sim, kernel_train(), 67);
    auto traces = rollout_traces(a, env, 2, 3000);
    Batch batch = as_batch(traces);

    ActorGrads analytic = make_actor_grads(a);
    actor_grads_serial(a, batch, analytic);

    // The kernels accumulate descent-direction gradients of the maximized
    // objective, so finite differences of the objective flip the sign.
    ActorGrads scratch = make_actor_grads(a);
    const double h = 1e-5;
    auto fd_check = [&](DenseNet& net, const NetGrads& grads) {
        auto flat = testutil::flatten_grads(grads);
        std::size_t idx = 0;
        testutil::for_each_param(net, [&](double& p) {
            const double keep = p;
            p = keep + h;
            const double up = actor_grads_serial(a, batch, scratch);
            p = keep - h;
            const double dn = actor_grads_serial(a, batch, scratch);
            p = keep;
            const double fd = (up - dn) / (2.0 * h);
            CHECK(testutil::close_rel(flat[idx], -fd, 1e-4, 1e-8));
            ++idx;
        });
    };

    fd_check(a.uav, analytic.uav);
    fd_check(a.gating, analytic.gating);
    for (int g = 0; g < 2; ++g)
        if (analytic.expert_touched[g]) fd_check(a.experts[g], analytic.experts[g]);
}

TEST_CASE("monolithic actor gradient agrees with finite differences") {
    SimConfig sim = testutil::tiny_sim();
    TaskModelConfig task = testutil::default_task(2);
    Environment env(sim, task);
    Agent a = make_agent(PolicyKind::Hdrl, sim, kernel_train(), 71);
    auto traces = rollout_traces(a, env, 2, 4000);
    Batch batch = as_batch(traces);

    ActorGrads analytic = make_actor_grads(a);
    actor_grads_serial(a, batch, analytic);
    ActorGrads scratch = make_actor_grads(a);
    auto flat = testutil::flatten_grads(analytic.mono);
    const double h = 1e-5;
    std::size_t idx = 0;
    testutil::for_each_param(a.mono, [&](double& p) {
        const double keep = p;
        p = keep + h;
        const double up = actor_grads_serial(a, batch, scratch);
        p = keep - h;
        const double dn = actor_grads_serial(a, batch, scratch);
        p = keep;
        CHECK(testutil::close_rel(flat[idx], -(up - dn) / (2.0 * h), 1e-4, 1e-8));
        ++idx;
    });
}

TEST_CASE("update kernels validate their inputs") {
    SimConfig sim = testutil::tiny_sim();
    TaskModelConfig task = testutil::default_task(2);
    Agent a = make_agent(PolicyKind::HdrlMoe, sim, kernel_train(), 73);

    NetGrads g = make_grads(a.critic);
    Batch empty;
    CHECK_THROWS_AS(critic_grads_serial(a, empty, g), std::invalid_argument);

    EpisodeTrace short_trace;
    short_trace.slots.resize(3); // episodes must cover all 8 slots
    Batch bad{&short_trace};
    CHECK_THROWS_AS(critic_grads_serial(a, bad, g), std::invalid_argument);

    Agent r = make_agent(PolicyKind::Random, sim, kernel_train(), 73);
    Environment env(sim, task);
    auto traces = rollout_traces(a, env, 1, 5000);
    Batch batch = as_batch(traces);
    CHECK_THROWS_AS(critic_update(r, batch), std::logic_error);
    CHECK_THROWS_AS(update_targets(r), std::logic_error);
}

TEST_CASE("episode-boundary target uses the reward alone") {
    // With a discount of zero every TD target collapses to the slot reward;
    // compare the kernel's loss against a direct computation.
    SimConfig sim = testutil::tiny_sim();
    TaskModelConfig task = testutil::default_task(2);
    Environment env(sim, task);
    TrainConfig tcfg = kernel_train();
    tcfg.discount = 0.0;
    Agent a = make_agent(PolicyKind::HdrlMoe, sim, tcfg, 79);
    auto traces = rollout_traces(a, env, 2, 6000);
    Batch batch = as_batch(traces);

    NetGrads g = make_grads(a.critic);
    const double loss = critic_grads_serial(a, batch, g);

    double want = 0.0;
    int m = 0;
    for (const EpisodeTrace* tr : batch) {
        for (const SlotRecord& rec : tr->slots) {
            std::vector<double> in(rec.obs);
            in.push_back(rec.heading);
            in.insert(in.end(), rec.rep_tail.begin(), rec.rep_tail.end());
            const double q = forward(a.critic, in)[0];
            want += (q - rec.reward) * (q - rec.reward);
            ++m;
        }
    }
    want /= m;
    CHECK(loss == doctest::Approx(want).epsilon(1e-12));
}
