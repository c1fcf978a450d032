#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "orlab/advantage.hpp"
#include "orlab/bon.hpp"
#include "orlab/envsim.hpp"
#include "orlab/policy.hpp"
#include "orlab/rng.hpp"

using namespace orlab;

namespace {

EnvSpec treepath_env(int alphabet, int horizon, int modulus) {
    EnvSpec env;
    env.kind = EnvKind::Treepath;
    env.alphabet = alphabet;
    env.horizon = horizon;
    env.modulus = modulus;
    return env;
}

Question treepath_question(int m, int target = 0, int id = 0) {
    Question q;
    q.id = id;
    q.m = m;
    q.target = target;
    q.answer = target;
    q.skill = m;
    return q;
}

RolloutGroup group_from_rewards(const std::vector<int>& rewards) {
    std::vector<Trajectory> trajs(rewards.size());
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        trajs[i].reward = rewards[i];
        trajs[i].tokens = {0};
        trajs[i].contexts = {pack_context(0, 0, 0)};
        trajs[i].post_contexts = {pack_context(0, 1, 1)};
    }
    return make_rollout_group(0, std::move(trajs));
}

}  // namespace

TEST_CASE("groups expose rewards and the empirical pass rate") {
    const RolloutGroup g = group_from_rewards({1, 0, 0, 1});
    CHECK(g.rewards == std::vector<int>{1, 0, 0, 1});
    CHECK(g.pass_rate == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("negative shaping weight is one minus the pass rate") {
    CHECK(shape_negative_coefficient(0.25) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(shape_negative_coefficient(0.5) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(shape_negative_coefficient(0.75) == doctest::Approx(0.25).epsilon(1e-15));
    // Linearity: equal spacing in p gives equal spacing in the weight.
    const double d1 = shape_negative_coefficient(0.25) - shape_negative_coefficient(0.5);
    const double d2 = shape_negative_coefficient(0.5) - shape_negative_coefficient(0.75);
    CHECK(std::abs(d1 - d2) <= 1e-15);
}

TEST_CASE("leave-one-out advantages on (1,0,0,1)") {
    const auto adv = rloo_advantages({1, 0, 0, 1});
    REQUIRE(adv.size() == 4);
    CHECK(adv[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(adv[1] == doctest::Approx(-2.0 / 3.0).epsilon(1e-12));
    CHECK(adv[2] == doctest::Approx(-2.0 / 3.0).epsilon(1e-12));
    CHECK(adv[3] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("leave-one-out advantages sum to zero") {
    Rng rng(123);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = 2 + uniform_int(rng, 0, 14);
        std::vector<int> rewards(static_cast<std::size_t>(k));
        for (int& r : rewards) {
            r = uniform_int(rng, 0, 1);
        }
        const auto adv = rloo_advantages(rewards);
        double sum = 0.0;
        for (double a : adv) {
            sum += a;
        }
        CHECK(std::abs(sum) <= 1e-12);
    }
}

TEST_CASE("group standardization on the worked examples") {
    const auto a = grpo_standardize({1, 1, 0, 0});
    REQUIRE(a.size() == 4);
    CHECK(a[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(a[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(a[2] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(a[3] == doctest::Approx(-1.0).epsilon(1e-12));
    const auto b = grpo_standardize({1, 0});
    CHECK(b[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(b[1] == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("group standardization yields mean zero and population stddev one") {
    Rng rng(321);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = 2 + uniform_int(rng, 0, 14);
        std::vector<int> rewards(static_cast<std::size_t>(k));
        int ones = 0;
        for (int& r : rewards) {
            r = uniform_int(rng, 0, 1);
            ones += r;
        }
        if (ones == 0 || ones == k) {
            continue;  // degenerate groups are filtered upstream
        }
        const auto a = grpo_standardize(rewards);
        double mean = 0.0;
        double var = 0.0;
        for (double v : a) {
            mean += v;
        }
        mean /= static_cast<double>(k);
        for (double v : a) {
            var += (v - mean) * (v - mean);
        }
        var /= static_cast<double>(k);
        CHECK(std::abs(mean) <= 1e-12);
        CHECK(std::abs(std::sqrt(var) - 1.0) <= 1e-12);
    }
}

TEST_CASE("value differences telescope back to the endpoint gap") {
    const AdvantageSeq seq = first_differences({0.2, 0.5, 0.9}, 1.0);
    REQUIRE(seq.values.size() == 2);
    CHECK(seq.values[0] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(seq.values[1] == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(telescope_return(seq, {0.2, 0.5, 0.9}) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("constant value sequences telescope to zero") {
    const AdvantageSeq seq = first_differences({0.4, 0.4, 0.4, 0.4}, 1.0);
    CHECK(telescope_return(seq, {0.4, 0.4, 0.4, 0.4}) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("telescoping holds on random value sequences") {
    Rng rng(777);
    for (int trial = 0; trial < 100; ++trial) {
        const int len = 2 + uniform_int(rng, 0, 10);
        std::vector<double> values(static_cast<std::size_t>(len));
        for (double& v : values) {
            v = uniform01(rng) * 4.0 - 2.0;
        }
        const AdvantageSeq seq = first_differences(values, 1.0);
        const double total = telescope_return(seq, values);
        CHECK(std::abs(total - (values.back() - values.front())) <= 1e-12);
    }
}

TEST_CASE("mismatched value lengths are rejected") {
    const AdvantageSeq seq = first_differences({0.2, 0.5, 0.9}, 1.0);
    CHECK_THROWS_AS(telescope_return(seq, {0.2, 0.5}), std::invalid_argument);
}

TEST_CASE("pairwise win rate is a logistic of the return gap") {
    CHECK(win_rate(1.3, 1.3) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(win_rate(std::log(3.0), 0.0) == doctest::Approx(0.75).epsilon(1e-12));
    Rng rng(555);
    for (int trial = 0; trial < 100; ++trial) {
        const double r1 = uniform01(rng) * 6.0 - 3.0;
        const double r2 = uniform01(rng) * 6.0 - 3.0;
        CHECK(std::abs(win_rate(r1, r2) + win_rate(r2, r1) - 1.0) <= 1e-12);
    }
}

TEST_CASE("failure coefficients dispatch by mode") {
    const RolloutGroup g = group_from_rewards({1, 0, 0, 1});
    CHECK(negative_coefficient(g, AdvantageMode::Shaped, 1) ==
          doctest::Approx(0.5).epsilon(1e-12));
    CHECK(negative_coefficient(g, AdvantageMode::Rloo, 1) ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(negative_coefficient(g, AdvantageMode::Grpo, 1) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(negative_coefficient(g, AdvantageMode::Shaped, 0), std::invalid_argument);
    CHECK_THROWS_AS(negative_coefficient(g, AdvantageMode::Shaped, 9), std::invalid_argument);
}

TEST_CASE("mode names round-trip") {
    CHECK(std::string(advantage_mode_name(AdvantageMode::Shaped)) == "shaped");
    CHECK(std::string(advantage_mode_name(AdvantageMode::Rloo)) == "rloo");
    CHECK(std::string(advantage_mode_name(AdvantageMode::Grpo)) == "grpo");
}

TEST_CASE("shaping weight equals the enumerated coefficient ratio") {
    const EnvSpec env = treepath_env(2, 3, 2);
    const Question q = treepath_question(2);
    PolicyTable policy = make_uniform_policy(2);
    randomize_policy(policy, env, q, 0.8, 13);
    for (int n : {2, 4, 8}) {
        const auto rep = gradient_consistency_check(policy, env, q, n);
        CHECK(std::abs(shape_negative_coefficient(rep.p) - rep.ratio) <= 1e-9);
    }
}

TEST_CASE("large-group pass rates concentrate on the enumerated probability") {
    const EnvSpec env = treepath_env(3, 3, 3);
    const Question q = treepath_question(3);
    const PolicyTable policy = make_uniform_policy(3);
    const int k = 100000;
    std::vector<Trajectory> trajs;
    trajs.reserve(k);
    for (int i = 0; i < k; ++i) {
        trajs.push_back(sample_trajectory(policy, env, q, 900000 + static_cast<std::uint64_t>(i)));
    }
    const RolloutGroup g = make_rollout_group(q.id, std::move(trajs));
    CHECK(std::abs(g.pass_rate - 1.0 / 3.0) <= 0.01);
}
