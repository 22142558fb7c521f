#include <doctest.h>

#include <uavei/rng.hpp>
#include <uavei/task_model.hpp>

#include <cmath>
#include <stdexcept>

#include "test_util.hpp"

using namespace uavei;

TEST_CASE("two-level distribution and its entropy") {
    SUBCASE("mass placement and normalization") {
        auto p = two_level_dist(10, 3, 0.95);
        REQUIRE(p.size() == 10);
        CHECK(p[3] == doctest::Approx(0.95).epsilon(1e-15));
        double sum = 0.0;
        for (int i = 0; i < 10; ++i) {
            sum += p[i];
            if (i != 3) CHECK(p[i] == doctest::Approx(0.05 / 9.0).epsilon(1e-15));
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("confident-sample entropy") {
        // -0.95 ln 0.95 - 0.05 ln(0.05/9), derived by hand.
        auto p = two_level_dist(10, 0, 0.95);
        CHECK(dist_entropy(p) == doctest::Approx(0.30837647221268377).epsilon(1e-12));
    }
    SUBCASE("uniform distribution entropy is ln C") {
        auto p = two_level_dist(10, 0, 0.1);
        CHECK(dist_entropy(p) == doctest::Approx(std::log(10.0)).epsilon(1e-12));
        CHECK(std::log(10.0) == doctest::Approx(2.302585092994046).epsilon(1e-15));
    }
    SUBCASE("entropy ignores zero-probability classes") {
        CHECK(dist_entropy({1.0, 0.0, 0.0}) == 0.0);
        CHECK(dist_entropy({0.5, 0.5, 0.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
}

TEST_CASE("entropy decreases strictly as the true-class mass grows") {
    double prev = dist_entropy(two_level_dist(10, 0, 0.11));
    for (double m = 0.12; m <= 0.951; m += 0.01) {
        const double h = dist_entropy(two_level_dist(10, 0, m));
        CHECK(h < prev);
        prev = h;
    }
}

TEST_CASE("task sampling is deterministic and respects the difficulty spec") {
    TaskModelConfig cfg = testutil::default_task(2);
    cfg.validate(2);

    SUBCASE("same seed, same sample") {
        Rng a = make_rng(42, Stream::EnvTask, 0);
        Rng b = make_rng(42, Stream::EnvTask, 0);
        for (int i = 0; i < 10; ++i) {
            TaskSample sa = sample_task(cfg, i % 2, 2, a);
            TaskSample sb = sample_task(cfg, i % 2, 2, b);
            CHECK(sa.difficulty == sb.difficulty);
            CHECK(sa.true_class == sb.true_class);
            CHECK(sa.local_true_mass == sb.local_true_mass);
            CHECK(sa.entropy == sb.entropy);
        }
    }
    SUBCASE("different streams diverge") {
        Rng a = make_rng(42, Stream::EnvTask, 0);
        Rng b = make_rng(42, Stream::EnvTask, 1);
        bool any_diff = false;
        for (int i = 0; i < 10; ++i) {
            TaskSample sa = sample_task(cfg, 0, 2, a);
            TaskSample sb = sample_task(cfg, 0, 2, b);
            any_diff = any_diff || sa.difficulty != sb.difficulty ||
                       sa.true_class != sb.true_class;
        }
        CHECK(any_diff);
    }
}

TEST_CASE("noise-free mass is clamp(1 - difficulty)") {
    TaskModelConfig cfg = testutil::default_task();
    cfg.local_noise_std = 0.0;
    Rng rng = make_rng(3, Stream::EnvTask, 0);

    SUBCASE("interior difficulty maps exactly") {
        cfg.difficulty = {DifficultySpec{DifficultyKind::Uniform, 0.3, 0.3, 2.0, 2.0}};
        TaskSample s = sample_task(cfg, 0, 1, rng);
        CHECK(s.local_true_mass == doctest::Approx(0.7).epsilon(1e-15));
    }
    SUBCASE("hardest task hits the floor") {
        cfg.difficulty = {DifficultySpec{DifficultyKind::Uniform, 1.0, 1.0, 2.0, 2.0}};
        TaskSample s = sample_task(cfg, 0, 1, rng);
        CHECK(s.local_true_mass == 0.10);
        CHECK(s.entropy == doctest::Approx(std::log(10.0)).epsilon(1e-12));
    }
    SUBCASE("easiest task hits the ceiling") {
        cfg.difficulty = {DifficultySpec{DifficultyKind::Uniform, 0.0, 0.0, 2.0, 2.0}};
        TaskSample s = sample_task(cfg, 0, 1, rng);
        CHECK(s.local_true_mass == 0.95);
    }
}

TEST_CASE("offloading lifts the true-class mass proportionally to the ratio") {
    TaskModelConfig cfg = testutil::default_task();
    cfg.difficulty = {DifficultySpec{}};
    TaskSample s;
    s.true_class = 4;
    s.local_true_mass = 0.5;
    s.local_dist = two_level_dist(10, 4, 0.5);
    s.entropy = dist_entropy(s.local_dist);

    SUBCASE("delivered at ratio 0.55: 0.5 + 0.6*0.55 = 0.83") {
        auto p = remote_distribution(cfg, s, 0.55, true);
        CHECK(p[4] == doctest::Approx(0.83).epsilon(1e-12));
    }
    SUBCASE("not delivered leaves the local distribution") {
        auto p = remote_distribution(cfg, s, 0.55, false);
        CHECK(p == s.local_dist);
    }
    SUBCASE("ratio zero leaves the local distribution") {
        auto p = remote_distribution(cfg, s, 0.0, true);
        CHECK(p == s.local_dist);
    }
    SUBCASE("uplift clamps at the ceiling") {
        s.local_true_mass = 0.9;
        s.local_dist = two_level_dist(10, 4, 0.9);
        auto p = remote_distribution(cfg, s, 1.0, true);
        CHECK(p[4] == doctest::Approx(0.95).epsilon(1e-12));
    }
    SUBCASE("remote mass never falls below local") {
        Rng rng = make_rng(5, Stream::EnvTask, 2);
        TaskModelConfig c2 = testutil::default_task();
        c2.difficulty = {DifficultySpec{}};
        for (int i = 0; i < 200; ++i) {
            TaskSample t = sample_task(c2, 0, 1, rng);
            for (double ratio : {0.2, 0.55, 1.0}) {
                auto p = remote_distribution(c2, t, ratio, true);
                CHECK(p[t.true_class] >= t.local_true_mass - 1e-15);
            }
        }
    }
}

TEST_CASE("cross-entropy loss and prediction") {
    SUBCASE("perfect prediction has zero loss") {
        CHECK(ce_loss({0.0, 0.0, 1.0, 0.0}, 2) == 0.0);
    }
    SUBCASE("uniform loss is ln C") {
        std::vector<double> p(10, 0.1);
        CHECK(ce_loss(p, 7) == doctest::Approx(std::log(10.0)).epsilon(1e-12));
    }
    SUBCASE("zero mass is floored, not infinite") {
        const double l = ce_loss({0.0, 1.0}, 0);
        CHECK(std::isfinite(l));
        CHECK(l == doctest::Approx(-std::log(1e-12)).epsilon(1e-12));
    }
    SUBCASE("argmax prediction, ties to the lowest index") {
        CHECK(predicted_class({0.1, 0.7, 0.2}) == 1);
        CHECK(predicted_class({0.25, 0.25, 0.25, 0.25}) == 0);
        CHECK(predicted_class({0.3, 0.4, 0.4}) == 1);
    }
    SUBCASE("two-level prediction is correct iff mass exceeds uniform") {
        auto above = two_level_dist(10, 6, 0.2);
        CHECK(predicted_class(above) == 6);
        auto at_uniform = two_level_dist(10, 6, 0.1);
        CHECK(predicted_class(at_uniform) == 0); // tie -> lowest index
    }
}

TEST_CASE("sorted-shard difficulty assigns the hardest band to device 0") {
    TaskModelConfig cfg = testutil::default_task();
    DifficultySpec shard;
    shard.kind = DifficultyKind::SortedShard;
    shard.lo = 0.0;
    shard.hi = 1.0;
    cfg.difficulty = {shard, shard};
    cfg.validate(2);

    Rng rng = make_rng(11, Stream::EnvTask, 0);
    double min0 = 1.0, max0 = 0.0, min1 = 1.0, max1 = 0.0;
    for (int i = 0; i < 500; ++i) {
        const double d0 = sample_task(cfg, 0, 2, rng).difficulty;
        const double d1 = sample_task(cfg, 1, 2, rng).difficulty;
        min0 = std::min(min0, d0);
        max0 = std::max(max0, d0);
        min1 = std::min(min1, d1);
        max1 = std::max(max1, d1);
    }
    CHECK(min0 >= 0.5);
    CHECK(max0 <= 1.0);
    CHECK(min1 >= 0.0);
    CHECK(max1 <= 0.5);
    // Both bands actually filled.
    CHECK(max0 - min0 > 0.3);
    CHECK(max1 - min1 > 0.3);
}

TEST_CASE("beta difficulty stays inside its range and varies") {
    TaskModelConfig cfg = testutil::default_task();
    DifficultySpec beta;
    beta.kind = DifficultyKind::Beta;
    beta.lo = 0.2;
    beta.hi = 0.8;
    beta.alpha = 2.0;
    beta.beta = 5.0;
    cfg.difficulty = {beta};
    cfg.validate(1);

    Rng rng = make_rng(13, Stream::EnvTask, 0);
    double lo = 1.0, hi = 0.0, sum = 0.0;
    const int n = 2000;
    for (int i = 0; i < n; ++i) {
        const double d = sample_task(cfg, 0, 1, rng).difficulty;
        lo = std::min(lo, d);
        hi = std::max(hi, d);
        sum += d;
    }
    CHECK(lo >= 0.2);
    CHECK(hi <= 0.8);
    // Mean of Beta(2,5) is 2/7; scaled: 0.2 + 0.6 * 2/7 = 0.3714...
    CHECK(sum / n == doctest::Approx(0.2 + 0.6 * 2.0 / 7.0).epsilon(0.05));
}

TEST_CASE("task model validation") {
    TaskModelConfig cfg = testutil::default_task();
    cfg.difficulty = {DifficultySpec{}};

    SUBCASE("valid") { CHECK_NOTHROW(cfg.validate(1)); }
    SUBCASE("class count") {
        cfg.class_count = 1;
        CHECK_THROWS_AS(cfg.validate(1), std::invalid_argument);
    }
    SUBCASE("difficulty count mismatch") {
        CHECK_THROWS_AS(cfg.validate(2), std::invalid_argument);
    }
    SUBCASE("floor above ceiling") {
        cfg.mass_floor = 0.96;
        CHECK_THROWS_AS(cfg.validate(1), std::invalid_argument);
    }
    SUBCASE("floor too large for class count") {
        cfg.mass_floor = 0.2; // 0.2 * 10 = 2 > 1
        CHECK_THROWS_AS(cfg.validate(1), std::invalid_argument);
    }
}
