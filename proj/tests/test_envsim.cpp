#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include "orlab/envsim.hpp"

using namespace orlab;

namespace {

EnvSpec summod_env(int alphabet = 6, int horizon = 3, int modulus = 5) {
    EnvSpec env;
    env.kind = EnvKind::Summod;
    env.alphabet = alphabet;
    env.horizon = horizon;
    env.modulus = modulus;
    return env;
}

EnvSpec treepath_env(int alphabet, int horizon, int modulus) {
    EnvSpec env;
    env.kind = EnvKind::Treepath;
    env.alphabet = alphabet;
    env.horizon = horizon;
    env.modulus = modulus;
    return env;
}

Question summod_question(int a, int b, int m, int id = 0) {
    Question q;
    q.id = id;
    q.a = a;
    q.b = b;
    q.m = m;
    q.answer = (a + b) % m;
    q.skill = m;
    return q;
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

}  // namespace

TEST_CASE("verify grades the final token under the sum rule") {
    const EnvSpec env = summod_env();
    const Question q = summod_question(3, 4, 5);
    CHECK(q.answer == 2);
    const Trajectory hit = make_trajectory(env, q, {1, 0, 2});
    CHECK(verify(env, q, hit) == 1);
    const Trajectory miss = make_trajectory(env, q, {1, 0, 0});
    CHECK(verify(env, q, miss) == 0);
}

TEST_CASE("verify grades the token-sum residue rule") {
    const EnvSpec env = treepath_env(3, 3, 3);
    const Question q = treepath_question(3);
    const Trajectory zeros = make_trajectory(env, q, {0, 0, 0});
    CHECK(verify(env, q, zeros) == 1);
    const Trajectory off = make_trajectory(env, q, {0, 0, 1});
    CHECK(verify(env, q, off) == 0);
}

TEST_CASE("verify rejects a horizon mismatch") {
    const EnvSpec env = summod_env();
    const Question q = summod_question(3, 4, 5);
    Trajectory short_traj = make_trajectory(env, q, {1, 0, 2});
    short_traj.tokens.pop_back();
    CHECK_THROWS_AS(verify(env, q, short_traj), std::invalid_argument);
}

TEST_CASE("verify is pure: repeated calls agree") {
    const EnvSpec env = summod_env();
    const Question q = summod_question(1, 1, 2);
    const Trajectory traj = make_trajectory(env, q, {5, 5, 0});
    const int first = verify(env, q, traj);
    CHECK(verify(env, q, traj) == first);
    CHECK(verify(env, q, traj) == first);
}

TEST_CASE("scratch tokens never change the outcome") {
    const EnvSpec env = summod_env();
    const Question q = summod_question(3, 4, 5);
    for (int s0 = 0; s0 < env.alphabet; ++s0) {
        for (int s1 = 0; s1 < env.alphabet; ++s1) {
            const Trajectory a = make_trajectory(env, q, {s0, s1, 2});
            const Trajectory b = make_trajectory(env, q, {0, 0, 2});
            CHECK(verify(env, q, a) == verify(env, q, b));
        }
    }
}

TEST_CASE("enumeration covers the whole token space in lexicographic order") {
    const EnvSpec env = treepath_env(2, 2, 2);
    const Question q = treepath_question(2);
    const auto all = enumerate_trajectories(env, q);
    REQUIRE(all.size() == 4);
    CHECK(all[0].tokens == std::vector<int>{0, 0});
    CHECK(all[1].tokens == std::vector<int>{0, 1});
    CHECK(all[2].tokens == std::vector<int>{1, 0});
    CHECK(all[3].tokens == std::vector<int>{1, 1});
}

TEST_CASE("enumeration reward counts match brute force") {
    const EnvSpec env = treepath_env(3, 3, 3);
    const Question q = treepath_question(3);
    const auto all = enumerate_trajectories(env, q);
    REQUIRE(all.size() == 27);
    int positives = 0;
    for (const auto& entry : all) {
        positives += entry.reward;
    }
    CHECK(positives == 9);
}

TEST_CASE("enumeration refuses spaces beyond the cap") {
    const EnvSpec env = treepath_env(4, 11, 3);
    const Question q = treepath_question(3);
    CHECK(space_size(env) == (1ull << 22));
    CHECK_FALSE(enumeration_capable(env));
    CHECK_THROWS_AS(enumerate_trajectories(env, q), std::length_error);
}

TEST_CASE("question banks are deterministic and well formed") {
    const EnvSpec env = summod_env();
    const auto bank1 = question_bank(env, 64, 7);
    const auto bank2 = question_bank(env, 64, 7);
    REQUIRE(bank1.size() == 64);
    REQUIRE(bank2.size() == 64);
    std::set<int> ids;
    for (std::size_t i = 0; i < bank1.size(); ++i) {
        CHECK(bank1[i].id == bank2[i].id);
        CHECK(bank1[i].a == bank2[i].a);
        CHECK(bank1[i].b == bank2[i].b);
        CHECK(bank1[i].m == bank2[i].m);
        CHECK(bank1[i].answer == bank2[i].answer);
        CHECK(bank1[i].skill == bank2[i].skill);
        ids.insert(bank1[i].id);
    }
    CHECK(ids.size() == bank1.size());
}

TEST_CASE("bank answers agree with re-evaluation of the rule") {
    const EnvSpec env = summod_env();
    for (const auto& q : question_bank(env, 64, 7)) {
        CHECK(q.answer == (q.a + q.b) % q.m);
        CHECK(q.skill == q.m);
        CHECK(q.answer < env.alphabet);
    }
}

TEST_CASE("empty banks are rejected") {
    const EnvSpec env = summod_env();
    CHECK_THROWS_AS(question_bank(env, 0, 7), std::invalid_argument);
}

TEST_CASE("positive fraction equals the uniform-policy success probability") {
    SUBCASE("residue-sum environment") {
        const EnvSpec env = treepath_env(3, 3, 3);
        const Question q = treepath_question(3);
        const auto all = enumerate_trajectories(env, q);
        int positives = 0;
        for (const auto& entry : all) {
            positives += entry.reward;
        }
        const double frac = static_cast<double>(positives) / static_cast<double>(all.size());
        CHECK(frac == doctest::Approx(uniform_success_probability(env, q)).epsilon(1e-12));
    }
    SUBCASE("final-answer environment") {
        const EnvSpec env = summod_env();
        const Question q = summod_question(3, 4, 5);
        const auto all = enumerate_trajectories(env, q);
        int positives = 0;
        for (const auto& entry : all) {
            positives += entry.reward;
        }
        const double frac = static_cast<double>(positives) / static_cast<double>(all.size());
        CHECK(frac == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
        CHECK(frac == doctest::Approx(uniform_success_probability(env, q)).epsilon(1e-12));
    }
}

TEST_CASE("context keys distinguish question, step, and predecessor") {
    const EnvSpec env = summod_env();
    const Question q1 = summod_question(3, 4, 5, 1);
    const Question q2 = summod_question(3, 4, 5, 2);
    const std::vector<int> prefix = {2, 3, 1};
    CHECK(context_at(env, q1, 0, prefix) != context_at(env, q1, 1, prefix));
    CHECK(context_at(env, q1, 1, prefix) != context_at(env, q2, 1, prefix));
    const std::vector<int> other = {4, 3, 1};
    CHECK(context_at(env, q1, 1, prefix) != context_at(env, q1, 1, other));
}

TEST_CASE("trajectories carry consistent context sequences") {
    const EnvSpec env = summod_env();
    const Question q = summod_question(2, 2, 3);
    const std::vector<int> tokens = {4, 1, 1};
    const Trajectory traj = make_trajectory(env, q, tokens);
    REQUIRE(traj.tokens.size() == 3);
    REQUIRE(traj.contexts.size() == 3);
    REQUIRE(traj.post_contexts.size() == 3);
    for (int t = 0; t < 3; ++t) {
        CHECK(traj.contexts[static_cast<std::size_t>(t)] == context_at(env, q, t, tokens));
    }
    CHECK(traj.reward == verify(env, q, traj));
}

TEST_CASE("bank CSV export writes one row per question plus a header") {
    namespace fs = std::filesystem;
    const EnvSpec env = summod_env();
    const auto bank = question_bank(env, 8, 3);
    const fs::path path = fs::temp_directory_path() / "orlab_test_bank.csv";
    write_bank_csv(path.string(), bank);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    int lines = 0;
    std::string header;
    while (std::getline(in, line)) {
        if (lines == 0) {
            header = line;
        }
        ++lines;
    }
    CHECK(lines == 9);
    CHECK(header.rfind("id,", 0) == 0);
    in.close();
    fs::remove(path);
}

TEST_CASE("environment validation rejects malformed specs") {
    EnvSpec env = summod_env();
    env.alphabet = 1;
    CHECK_THROWS_AS(validate_env(env), std::invalid_argument);
    env = summod_env();
    env.horizon = 0;
    CHECK_THROWS_AS(validate_env(env), std::invalid_argument);
    env = summod_env();
    env.modulus = 1;
    CHECK_THROWS_AS(validate_env(env), std::invalid_argument);
    env = summod_env(6, 3, 7);  // answers mod 7 cannot all be emitted with 6 tokens
    CHECK_THROWS_AS(validate_env(env), std::invalid_argument);
}
