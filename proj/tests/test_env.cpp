#include <doctest.h>

#include <uavei/env.hpp>

#include <cmath>
#include <stdexcept>

#include "test_util.hpp"

using namespace uavei;

namespace {

Action zero_action(int k, double heading = 0.0) {
    Action a;
    a.heading = heading;
    a.offload.assign(k, 0);
    a.ratios.assign(k, 0.0);
    return a;
}

} // namespace

TEST_CASE("slot arithmetic for sync periods") {
    // sync = 4, local = 1: periods {1..4}, {5..8}; decisions at 2 and 6.
    const int sync = 4, local = 1;
    CHECK(period_start(1, sync) == 1);
    CHECK(period_start(4, sync) == 1);
    CHECK(period_start(5, sync) == 5);
    CHECK(period_start(8, sync) == 5);
    CHECK(is_sensing_slot(1, sync));
    CHECK_FALSE(is_sensing_slot(2, sync));
    CHECK(is_sensing_slot(5, sync));
    for (int n = 1; n <= 4; ++n) CHECK(decision_slot_of(n, sync, local) == 2);
    for (int n = 5; n <= 8; ++n) CHECK(decision_slot_of(n, sync, local) == 6);
    CHECK(in_local_window(1, sync, local));
    CHECK_FALSE(in_local_window(2, sync, local));
    CHECK(in_local_window(5, sync, local));
    CHECK(is_period_end(4, sync));
    CHECK(is_period_end(8, sync));
    CHECK_FALSE(is_period_end(3, sync));
    // 48 is the last slot of its period under the default timing.
    CHECK(is_period_end(48, 4));
}

TEST_CASE("uplink channel oracle") {
    SimConfig cfg = testutil::default_sim();

    SUBCASE("directly overhead: squared distance is altitude^2") {
        // snr = 1e-5 * 0.01 / (1e-14 * 100^2) = 1000;
        // rate = 1e6 * log2(1001) = 9967226.258835994 bit/s.
        const Vec2 over = cfg.gd_positions[0];
        CHECK(uplink_snr(cfg, over, 0) == doctest::Approx(1000.0).epsilon(1e-12));
        CHECK(uplink_rate(cfg, over, 0) ==
              doctest::Approx(9967226.258835994).epsilon(1e-12));
    }
    SUBCASE("inverse-square law: snr * d^2 is constant") {
        const double c0 = uplink_snr(cfg, cfg.gd_positions[1], 1) *
                          (cfg.altitude * cfg.altitude);
        for (double off : {50.0, 200.0, 800.0, 1500.0}) {
            const Vec2 q{cfg.gd_positions[1].x + off, cfg.gd_positions[1].y};
            const double d_sq = off * off + cfg.altitude * cfg.altitude;
            CHECK(uplink_snr(cfg, q, 1) * d_sq == doctest::Approx(c0).epsilon(1e-12));
        }
    }
    SUBCASE("rate decreases monotonically with horizontal distance") {
        double prev = uplink_rate(cfg, cfg.gd_positions[2], 2);
        for (double off = 20.0; off <= 2000.0; off += 20.0) {
            const Vec2 q{cfg.gd_positions[2].x, cfg.gd_positions[2].y + off};
            const double r = uplink_rate(cfg, q, 2);
            CHECK(r < prev);
            CHECK(r > 0.0);
            prev = r;
        }
    }
}

TEST_CASE("UAV kinematics") {
    SimConfig cfg = testutil::default_sim();

    SUBCASE("one slot of flight at heading pi/4") {
        const Vec2 next = advance_uav({100.0, 200.0}, kPi / 4.0, cfg);
        CHECK(next.x == doctest::Approx(126.51650429449553).epsilon(1e-14));
        CHECK(next.y == doctest::Approx(226.51650429449552).epsilon(1e-14));
    }
    SUBCASE("displacement length always equals one step") {
        Rng rng = make_rng(9, Stream::Explore, 0);
        std::uniform_real_distribution<double> u(-kPi, kPi);
        for (int i = 0; i < 100; ++i) {
            const Vec2 q{u(rng) * 100.0, u(rng) * 100.0};
            const Vec2 next = advance_uav(q, u(rng), cfg);
            CHECK(dist(q, next) == doctest::Approx(cfg.step_len()).epsilon(1e-12));
        }
    }
}

TEST_CASE("straight-flight override") {
    SimConfig cfg = testutil::default_sim(); // start == end == (0,0), N = 48

    SUBCASE("inactive when plenty of slots remain") {
        CHECK(straight_flight_override(cfg, {0.0, 0.0}, 1, kPi / 2.0) == kPi / 2.0);
    }
    SUBCASE("engages when remaining slots just cover the return") {
        // q = (0, 375), slot 37: flying further out needs ceil(412.5/37.5)=11
        // more slots but only 10 remain, so the UAV must turn home (-pi/2).
        const double h = straight_flight_override(cfg, {0.0, 375.0}, 37, kPi / 2.0);
        CHECK(h == doctest::Approx(-kPi / 2.0).epsilon(1e-14));
    }
    SUBCASE("keeps a safe heading near the deadline") {
        // Heading already toward the destination stays within budget.
        const double h = straight_flight_override(cfg, {0.0, 300.0}, 38, -kPi / 2.0);
        CHECK(h == doctest::Approx(-kPi / 2.0).epsilon(1e-14));
    }
    SUBCASE("rejects out-of-range slots") {
        CHECK_THROWS_AS(straight_flight_override(cfg, {0.0, 0.0}, 0, 0.0),
                        std::invalid_argument);
        CHECK_THROWS_AS(straight_flight_override(cfg, {0.0, 0.0}, 48, 0.0),
                        std::invalid_argument);
    }
}

TEST_CASE("environment reset is deterministic per seed") {
    Environment env(testutil::tiny_sim(), testutil::default_task(2));

    auto o1 = env.reset(77).to_vector();
    auto o2 = env.reset(77).to_vector();
    CHECK(o1 == o2);
    REQUIRE(o1.size() == static_cast<std::size_t>(observation_dim(2)));
    CHECK(o1[0] == doctest::Approx(1.0 / 8.0).epsilon(1e-15)); // slot 1 of 8
    CHECK(o1[1] == 0.0);
    CHECK(o1[2] == 0.0);

    auto o3 = env.reset(78).to_vector();
    CHECK(o1 != o3); // different task draws
}

TEST_CASE("offload delivery happens within a single transmission slot near a GD") {
    SimConfig sim = testutil::tiny_sim();
    TaskModelConfig task = testutil::default_task(2);
    Environment env(sim, task);
    env.reset(5);

    // Slot 1: local window, fly straight up the reference path.
    env.step(zero_action(2, kPi / 2.0));
    REQUIRE(env.slot() == 2);

    // Slot 2 (decision): offload GD 0 at ratio 0.2 -> 0.2*18432*8 = 29491.2
    // bits. The UAV is ~37.5 m from GD 0, rate ~9.8 Mbit/s, so one 1.25 s
    // slot delivers the payload outright.
    Action a = zero_action(2, kPi / 2.0);
    a.offload[0] = 1;
    a.ratios[0] = 0.2;
    auto out = env.step(a);
    CHECK(env.ledger()[0].bits_required == doctest::Approx(29491.2).epsilon(1e-12));
    CHECK(env.ledger()[0].delivered);
    CHECK_FALSE(env.ledger()[1].selected);

    // Slot 3: transmission continues (nothing left to send), no resolution yet.
    out = env.step(zero_action(2, kPi / 2.0));
    CHECK_FALSE(out.info.period_resolved);

    // Slot 4: period end resolves both tasks; GD 0 counts as attempted and
    // delivered.
    out = env.step(zero_action(2, kPi / 2.0));
    CHECK(out.info.period_resolved);
    REQUIRE(out.info.attempted.size() == 2);
    CHECK(out.info.attempted[0] == 1);
    CHECK(out.info.delivered[0] == 1);
    CHECK(out.info.attempted[1] == 0);
    CHECK(out.info.resolutions == 2);
}

TEST_CASE("starved uplink never delivers") {
    SimConfig sim = testutil::tiny_sim();
    sim.bandwidth = 10.0; // ~130 bit/s: 29 kbit cannot arrive in 2 slots
    TaskModelConfig task = testutil::default_task(2);
    Environment env(sim, task);
    env.reset(5);

    env.step(zero_action(2, kPi / 2.0));
    Action a = zero_action(2, kPi / 2.0);
    a.offload[0] = 1;
    a.ratios[0] = 0.2;
    env.step(a);
    env.step(zero_action(2));
    auto out = env.step(zero_action(2));
    CHECK(out.info.period_resolved);
    CHECK(out.info.attempted[0] == 1);
    CHECK(out.info.delivered[0] == 0);
}

TEST_CASE("reward is deviation penalty plus period-end cross-entropy") {
    SimConfig sim = testutil::tiny_sim();
    sim.dev_weight = 0.0;
    TaskModelConfig task = testutil::default_task(2);
    task.local_noise_std = 0.0;
    for (auto& d : task.difficulty) {
        d.lo = 0.5;
        d.hi = 0.5;
    }
    Environment env(sim, task);
    env.reset(1);

    // With difficulty fixed at 0.5 and no noise, every local distribution has
    // true-class mass exactly 0.5, so each resolved task costs ln 2.
    double expected_period = -2.0 * std::log(2.0);
    for (int n = 1; n <= 8; ++n) {
        auto out = env.step(zero_action(2, kPi / 2.0));
        if (n == 4 || n == 8) {
            CHECK(out.reward == doctest::Approx(expected_period).epsilon(1e-12));
            CHECK(out.info.period_ce_sum == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
        } else {
            CHECK(out.reward == 0.0);
        }
    }
    CHECK(env.done());
}

TEST_CASE("deviation penalty uses the squared instantaneous miss") {
    SimConfig sim = testutil::tiny_sim();
    sim.dev_weight = 0.01;
    Environment env(sim, testutil::default_task(2));
    env.reset(3);

    // Slot 1: UAV sits on the first checkpoint, so no penalty.
    auto out = env.step(zero_action(2, 0.0)); // fly +x, off the path
    CHECK(out.info.instant_dev == 0.0);
    CHECK(out.reward == 0.0);

    // Slot 2: position (37.5, 0); compare with checkpoint 2 independently.
    const Vec2 q{37.5, 0.0};
    const double want_dev = dist(q, env.ref().checkpoints[1]);
    out = env.step(zero_action(2, kPi / 2.0));
    CHECK(out.info.instant_dev == doctest::Approx(want_dev).epsilon(1e-12));
    CHECK(out.reward == doctest::Approx(-0.01 * want_dev * want_dev).epsilon(1e-12));
}

TEST_CASE("episode runs exactly N slots and then refuses to step") {
    Environment env(testutil::tiny_sim(), testutil::default_task(2));
    env.reset(9);

    std::vector<double> devs;
    for (int n = 1; n <= 8; ++n) {
        CHECK_FALSE(env.done());
        auto out = env.step(zero_action(2, kPi / 2.0));
        devs.push_back(out.info.instant_dev);
        CHECK(out.done == (n == 8));
    }
    CHECK(env.done());
    CHECK(env.trajectory().size() == 8);
    CHECK_THROWS_AS(env.step(zero_action(2)), std::runtime_error);

    // Episode deviation is the RMS of the per-slot misses.
    double acc = 0.0;
    for (double d : devs) acc += d * d;
    CHECK(env.episode_deviation() == doctest::Approx(std::sqrt(acc / 8.0)).epsilon(1e-12));
}

TEST_CASE("task samples refresh at sensing slots and persist within a period") {
    Environment env(testutil::tiny_sim(), testutil::default_task(2));
    env.reset(21);
    const auto h0 = env.observation().entropies;

    // Slots 1..3: same period, same samples.
    env.step(zero_action(2, kPi / 2.0));
    CHECK(env.observation().entropies == h0);
    env.step(zero_action(2, kPi / 2.0));
    CHECK(env.observation().entropies == h0);
    env.step(zero_action(2, kPi / 2.0));
    CHECK(env.observation().entropies == h0);

    // Stepping past slot 4 enters slot 5, a sensing slot: fresh draws.
    env.step(zero_action(2, kPi / 2.0));
    CHECK(env.observation().entropies != h0);
}

TEST_CASE("invalid actions are rejected at the decision slot") {
    Environment env(testutil::tiny_sim(), testutil::default_task(2));

    SUBCASE("ratio outside the ratio set") {
        env.reset(2);
        env.step(zero_action(2));
        Action a = zero_action(2);
        a.offload[0] = 1;
        a.ratios[0] = 0.3; // set is {0, 0.2, 0.55, 1.0}
        CHECK_THROWS_AS(env.step(a), std::invalid_argument);
    }
    SUBCASE("positive ratio without selection") {
        env.reset(2);
        env.step(zero_action(2));
        Action a = zero_action(2);
        a.ratios[1] = 0.2;
        CHECK_THROWS_AS(env.step(a), std::invalid_argument);
    }
    SUBCASE("more selections than the cap") {
        env.reset(2);
        env.step(zero_action(2));
        Action a = zero_action(2); // cap is 1
        a.offload[0] = 1;
        a.ratios[0] = 0.2;
        a.offload[1] = 1;
        a.ratios[1] = 0.2;
        CHECK_THROWS_AS(env.step(a), std::invalid_argument);
    }
    SUBCASE("wrong action arity") {
        env.reset(2);
        CHECK_THROWS_AS(env.step(zero_action(3)), std::invalid_argument);
    }
}

TEST_CASE("UAV always lands within one step of the destination") {
    SimConfig sim = testutil::default_sim();
    TaskModelConfig task = testutil::default_task(4);
    Environment env(sim, task);
    Rng rng = make_rng(123, Stream::EvalPolicy, 0);
    std::uniform_real_distribution<double> u(-kPi, kPi);

    for (int ep = 0; ep < 50; ++ep) {
        env.reset(1000 + ep);
        while (!env.done()) env.step(zero_action(4, u(rng)));
        CHECK(dist(env.position(), sim.end_pos) <= sim.step_len() + 1e-9);
    }
}
