#include <doctest.h>

#include <array>
#include <cmath>
#include <sstream>

#include "ekert/eavesdrop.hpp"
#include "ekert/protocol.hpp"
#include "test_util.hpp"

using namespace ekert;

namespace {

// Sessions are cached per test binary run; several cases share the big one.
const SessionData& big_clean_session() {
    static const SessionData data = [] {
        SessionConfig cfg;
        cfg.seed = 2024;
        cfg.n_trials = 1000000;
        cfg.visibility = 1.0;
        return run_session(cfg, AttackSpec{});
    }();
    return data;
}

}  // namespace

TEST_CASE("pick_setting is uniform and reproducible") {
    Xoshiro256 rng(5);
    std::array<int, 5> counts{};
    const int n = 1000000;
    for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(pick_setting(rng))];
    CHECK(counts[0] == 0);
    for (int idx = 1; idx <= 4; ++idx)
        CHECK(std::abs(counts[static_cast<std::size_t>(idx)] / double(n) - 0.25) <
              4 * testutil::binomial_sigma(0.25, n));

    Xoshiro256 a(123), b(123);
    for (int i = 0; i < 100; ++i) CHECK(pick_setting(a) == pick_setting(b));
}

TEST_CASE("alice and bob setting streams are independent") {
    const SeedStream alice(42, "alice-settings");
    const SeedStream bob(42, "bob-settings");
    const int n = 100000;
    double sum_a = 0, sum_b = 0, sum_ab = 0, sum_a2 = 0, sum_b2 = 0;
    for (int i = 0; i < n; ++i) {
        Xoshiro256 ra = alice.at(static_cast<std::uint64_t>(i));
        Xoshiro256 rb = bob.at(static_cast<std::uint64_t>(i));
        const double x = pick_setting(ra);
        const double y = pick_setting(rb);
        sum_a += x;
        sum_b += y;
        sum_ab += x * y;
        sum_a2 += x * x;
        sum_b2 += y * y;
    }
    const double cov = sum_ab / n - (sum_a / n) * (sum_b / n);
    const double var_a = sum_a2 / n - (sum_a / n) * (sum_a / n);
    const double var_b = sum_b2 / n - (sum_b / n) * (sum_b / n);
    const double r = cov / std::sqrt(var_a * var_b);
    CHECK(std::abs(r) < 4.0 / std::sqrt(double(n)));
}

TEST_CASE("classify reproduces the setting table cell for cell") {
    using enum SettingClass;
    const SettingClass expected[4][4] = {
        {bell_s, discard, bell_s, key},
        {discard, bell_s_prime, key, bell_s_prime},
        {bell_s, key, bell_s, discard},
        {key, bell_s_prime, discard, bell_s_prime},
    };
    int n_key = 0, n_s = 0, n_sp = 0, n_d = 0;
    for (int a = 1; a <= 4; ++a) {
        for (int b = 1; b <= 4; ++b) {
            const SettingClass got = classify(a, b);
            CHECK(got == expected[a - 1][b - 1]);
            switch (got) {
                case key: ++n_key; break;
                case bell_s: ++n_s; break;
                case bell_s_prime: ++n_sp; break;
                case discard: ++n_d; break;
            }
        }
    }
    CHECK(n_key == 4);
    CHECK(n_s == 4);
    CHECK(n_sp == 4);
    CHECK(n_d == 4);

    CHECK(classify(1, 4) == key);
    CHECK(classify(3, 3) == bell_s);
    CHECK(classify(2, 1) == discard);
    CHECK_THROWS_AS(classify(0, 1), std::invalid_argument);
    CHECK_THROWS_AS(classify(1, 5), std::invalid_argument);

    SUBCASE("key settings satisfy alpha + beta = 180") {
        for (int a = 1; a <= 4; ++a)
            for (int b = 1; b <= 4; ++b)
                if (classify(a, b) == key)
                    CHECK(kAliceAngles[a - 1] + kBobAngles[b - 1] == 180.0);
    }
}

TEST_CASE("outcome_to_bit implements the detector relabeling") {
    CHECK(outcome_to_bit(Party::alice, 1, DetPort::direct) == 0);
    CHECK(outcome_to_bit(Party::alice, 4, DetPort::direct) == 1);
    CHECK(outcome_to_bit(Party::bob, 2, DetPort::prime) == 0);
    CHECK(outcome_to_bit(Party::bob, 1, DetPort::prime) == 1);
    CHECK(outcome_to_bit(Party::bob, 4, DetPort::prime) == 0);

    SUBCASE("flipping the detector flips the bit") {
        for (Party party : {Party::alice, Party::bob})
            for (int idx = 1; idx <= 4; ++idx)
                CHECK(outcome_to_bit(party, idx, DetPort::direct) !=
                      outcome_to_bit(party, idx, DetPort::prime));
    }
    CHECK_THROWS_AS(outcome_to_bit(Party::alice, 0, DetPort::direct), std::invalid_argument);
}

TEST_CASE("run_session statistics without attack") {
    const SessionData& data = big_clean_session();
    const double n = static_cast<double>(data.trials.size());
    REQUIRE(n == 1000000);

    std::uint64_t n_key = 0, n_s = 0, n_sp = 0, n_d = 0;
    for (const TrialRecord& t : data.trials) {
        switch (t.cls) {
            case SettingClass::key: ++n_key; break;
            case SettingClass::bell_s: ++n_s; break;
            case SettingClass::bell_s_prime: ++n_sp; break;
            case SettingClass::discard: ++n_d; break;
        }
    }
    const double sigma = 4 * testutil::binomial_sigma(0.25, n);
    CHECK(std::abs(n_key / n - 0.25) < sigma);
    CHECK(std::abs(n_s / n - 0.25) < sigma);
    CHECK(std::abs(n_sp / n - 0.25) < sigma);
    CHECK(std::abs((n_s + n_sp) / n - 0.5) < 4 * testutil::binomial_sigma(0.5, n));

    SUBCASE("perfect visibility means identical key bits") {
        for (const TrialRecord& t : data.trials)
            if (t.cls == SettingClass::key && !t.background) CHECK(t.alice_bit == t.bob_bit);
    }
    SUBCASE("key bits are balanced") {
        const SiftResult sifted = sift(data);
        std::uint64_t ones = 0;
        for (auto bit : sifted.alice_key) ones += bit;
        const double kn = static_cast<double>(sifted.alice_key.size());
        CHECK(std::abs(ones / kn - 0.5) < 4 * testutil::binomial_sigma(0.5, kn));
    }
}

TEST_CASE("run_session duration accounting matches the throughput model") {
    SessionConfig cfg;
    cfg.seed = 7;
    cfg.duration_s = 2400.0;  // 40-minute-equivalent
    cfg.visibility = 1.0;
    const SessionData data = run_session(cfg, AttackSpec{});

    const double usable = static_cast<double>(data.trials.size());
    CHECK(usable == doctest::Approx(96000).epsilon(0.02));

    std::uint64_t n_key = 0;
    for (const TrialRecord& t : data.trials)
        if (t.cls == SettingClass::key) ++n_key;
    CHECK(static_cast<double>(n_key) == doctest::Approx(24000).epsilon(0.03));
}

TEST_CASE("run_session validates its config before running") {
    SessionConfig cfg;
    cfg.n_trials = 100;
    cfg.duration_s = 10.0;  // both set
    CHECK_THROWS_AS(run_session(cfg, AttackSpec{}), std::invalid_argument);

    SessionConfig none;
    CHECK_THROWS_AS(run_session(none, AttackSpec{}), std::invalid_argument);

    SessionConfig zero;
    zero.n_trials = 0;
    CHECK_THROWS_AS(run_session(zero, AttackSpec{}), std::invalid_argument);

    SessionConfig bad_attack;
    bad_attack.n_trials = 10;
    CHECK_THROWS_AS(run_session(bad_attack, AttackSpec{AttackMode::dephase, {}, 1.5}),
                    std::invalid_argument);
}

TEST_CASE("parallel session equals the serial reference") {
    SessionConfig cfg;
    cfg.seed = 31;
    cfg.visibility = 0.9388;

    auto equal_sessions = [](const SessionData& a, const SessionData& b) {
        REQUIRE(a.trials.size() == b.trials.size());
        CHECK(a.windows_run == b.windows_run);
        for (std::size_t i = 0; i < a.trials.size(); ++i) {
            const TrialRecord& x = a.trials[i];
            const TrialRecord& y = b.trials[i];
            CHECK(x.window == y.window);
            CHECK(x.alice_index == y.alice_index);
            CHECK(x.bob_index == y.bob_index);
            CHECK(x.alice_out == y.alice_out);
            CHECK(x.bob_out == y.bob_out);
            CHECK(x.cls == y.cls);
            CHECK(x.alice_bit == y.alice_bit);
            CHECK(x.bob_bit == y.bob_bit);
            CHECK(x.double_pair == y.double_pair);
            CHECK(x.background == y.background);
            CHECK(x.eve_guess == y.eve_guess);
        }
    };

    SUBCASE("trial-count mode with an attack") {
        cfg.n_trials = 20000;
        const AttackSpec attack{AttackMode::dephase, {Plane::B, 30.0}, 0.5};
        equal_sessions(run_session(cfg, attack), run_session_serial(cfg, attack));
    }
    SUBCASE("duration mode with a lossy attack") {
        cfg.duration_s = 300.0;
        const AttackSpec attack{AttackMode::filter, {Plane::A, 45.0}, 0.7};
        equal_sessions(run_session(cfg, attack), run_session_serial(cfg, attack));
    }
}

TEST_CASE("sift") {
    SUBCASE("empty session") {
        SessionData data;
        const SiftResult sifted = sift(data);
        CHECK(sifted.alice_key.empty());
        CHECK(sifted.bob_key.empty());
        CHECK(sifted.bell_s_trials.empty());
        CHECK(sifted.bell_s_prime_trials.empty());
        CHECK(sifted.n_discarded == 0);
    }
    SUBCASE("three hand-built trials partition as classified") {
        SessionData data;
        TrialRecord key_trial;
        key_trial.alice_index = 1;
        key_trial.bob_index = 4;
        key_trial.cls = classify(1, 4);
        key_trial.alice_bit = 1;
        key_trial.bob_bit = 1;
        TrialRecord bell_trial;
        bell_trial.alice_index = 3;
        bell_trial.bob_index = 3;
        bell_trial.cls = classify(3, 3);
        TrialRecord discard_trial;
        discard_trial.alice_index = 2;
        discard_trial.bob_index = 1;
        discard_trial.cls = classify(2, 1);
        data.trials = {key_trial, bell_trial, discard_trial};

        const SiftResult sifted = sift(data);
        CHECK(sifted.alice_key.size() == 1);
        CHECK(sifted.bell_s_trials.size() == 1);
        CHECK(sifted.bell_s_prime_trials.empty());
        CHECK(sifted.n_discarded == 1);
    }
    SUBCASE("sifting conserves trials") {
        const SessionData& data = big_clean_session();
        const SiftResult sifted = sift(data);
        CHECK(sifted.alice_key.size() == sifted.bob_key.size());
        CHECK(sifted.alice_key.size() + sifted.bell_s_trials.size() +
                  sifted.bell_s_prime_trials.size() + sifted.n_discarded ==
              data.trials.size());
    }
}

TEST_CASE("detector asymmetry skews counts but the relabeling keeps the key balanced") {
    SessionConfig cfg;
    cfg.seed = 61;
    cfg.n_trials = 400000;
    cfg.source.detector_asymmetry = 0.3;  // primed detectors 30% less efficient
    const SessionData data = run_session(cfg, AttackSpec{});

    std::uint64_t bob_direct = 0, total = 0, key_ones = 0, key_bits = 0;
    for (const TrialRecord& t : data.trials) {
        ++total;
        if (t.bob_out == DetPort::direct) ++bob_direct;
        if (t.cls == SettingClass::key) {
            ++key_bits;
            key_ones += static_cast<std::uint64_t>(t.bob_bit);
        }
    }
    // raw detector counts are visibly biased toward the direct port...
    const double direct_frac = bob_direct / double(total);
    CHECK(direct_frac > 0.53);
    // ...but the per-setting relabeling averages the bias out of the key
    const double ones_frac = key_ones / double(key_bits);
    CHECK(std::abs(ones_frac - 0.5) < 4 * testutil::binomial_sigma(0.5, double(key_bits)));
}

TEST_CASE("session log round-trips") {
    SessionConfig cfg;
    cfg.seed = 55;
    cfg.n_trials = 500;
    cfg.visibility = 0.9;
    const AttackSpec attack{AttackMode::dephase, {Plane::C, 120.0}, 0.4};
    const SessionData data = run_session(cfg, attack);

    std::stringstream stream;
    write_session_log(stream, data);
    const SessionData back = read_session_log(stream);

    REQUIRE(back.trials.size() == data.trials.size());
    CHECK(back.windows_run == data.windows_run);
    CHECK(back.config.seed == cfg.seed);
    CHECK(back.config.visibility == doctest::Approx(cfg.visibility));
    CHECK(back.attack.mode == attack.mode);
    CHECK(back.attack.basis.plane == attack.basis.plane);
    for (std::size_t i = 0; i < data.trials.size(); ++i) {
        CHECK(back.trials[i].window == data.trials[i].window);
        CHECK(back.trials[i].cls == data.trials[i].cls);
        CHECK(back.trials[i].alice_bit == data.trials[i].alice_bit);
        CHECK(back.trials[i].eve_guess == data.trials[i].eve_guess);
    }
}
