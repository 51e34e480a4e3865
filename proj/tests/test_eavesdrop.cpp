#include <doctest.h>

#include <cmath>

#include "ekert/eavesdrop.hpp"
#include "test_util.hpp"

using namespace ekert;
using testutil::kSqrt2;

namespace {

// Enumeration oracle for Eve's agreement with Bob: exact sum over her
// measurement outcomes and Bob's detector response to the resent eigenstate,
// averaged over the four key settings. Independent of the sampling path.
double agreement_oracle(const AttackSpec& spec, double visibility) {
    const JointState base = visibility_mix(phi_plus(), visibility);
    const PureQubit chi = poincare_state(spec.basis);
    double total = 0.0;
    for (int b = 1; b <= 4; ++b) {
        const int a = 5 - b;
        double setting = 0.0;
        for (int outcome = 0; outcome < 2; ++outcome) {
            const PureQubit eigenstate = outcome == 0 ? chi : chi.orthogonal();
            const auto [collapsed, p_outcome] = filter_channel(base, eigenstate);
            const auto probs =
                coincidence_probs(collapsed, kAliceAngles[a - 1], kBobAngles[b - 1]);
            const double p_bob_direct = probs.p_12 + probs.p_1p2;
            const int guess = eve_guess_bit(spec, outcome, b);
            const double p_direct_bit_matches =
                outcome_to_bit(Party::bob, b, DetPort::direct) == guess ? p_bob_direct
                                                                        : 1.0 - p_bob_direct;
            setting += p_outcome * p_direct_bit_matches;
        }
        total += setting;
    }
    return total / 4.0;
}

SessionData attacked_session(const AttackSpec& attack, std::uint64_t trials,
                             std::uint64_t seed, double visibility = 1.0) {
    SessionConfig cfg;
    cfg.seed = seed;
    cfg.n_trials = trials;
    cfg.visibility = visibility;
    cfg.source.double_pair_key_frac = 0.0;  // isolate interception effects
    return run_session(cfg, attack);
}

}  // namespace

TEST_CASE("intercept") {
    Xoshiro256 rng(8);
    const JointState state = phi_plus();

    SUBCASE("mode none is the identity") {
        const AttackSpec spec{};
        for (int i = 0; i < 20; ++i) {
            const InterceptResult r = intercept(state, spec, rng);
            CHECK(!r.eve_outcome.has_value());
            CHECK(!r.lost);
            CHECK((r.state.rho - state.rho).cwiseAbs().maxCoeff() == 0.0);
        }
    }
    SUBCASE("H filter loses half the intercepted pairs") {
        const AttackSpec spec{AttackMode::filter, {Plane::B, 0.0}, 1.0};
        const int n = 100000;
        int lost = 0;
        for (int i = 0; i < n; ++i)
            if (intercept(state, spec, rng).lost) ++lost;
        CHECK(std::abs(lost / double(n) - 0.5) < 3 * testutil::binomial_sigma(0.5, n));
    }
    SUBCASE("dephase interception records an outcome and keeps the pair") {
        const AttackSpec spec{AttackMode::dephase, {Plane::A, 0.0}, 1.0};
        int chi_count = 0;
        const int n = 100000;
        for (int i = 0; i < n; ++i) {
            const InterceptResult r = intercept(state, spec, rng);
            CHECK(!r.lost);
            REQUIRE(r.eve_outcome.has_value());
            if (*r.eve_outcome == 0) ++chi_count;
        }
        CHECK(std::abs(chi_count / double(n) - 0.5) < 3 * testutil::binomial_sigma(0.5, n));
    }
    SUBCASE("partial interception leaves the complement untouched") {
        const AttackSpec spec{AttackMode::dephase, {Plane::A, 0.0}, 0.3};
        const int n = 100000;
        int touched = 0;
        for (int i = 0; i < n; ++i)
            if (intercept(state, spec, rng).eve_outcome) ++touched;
        CHECK(std::abs(touched / double(n) - 0.3) < 3 * testutil::binomial_sigma(0.3, n));
    }
}

TEST_CASE("full in-plane dephase drives the key error rate to 25%") {
    const AttackSpec attack{AttackMode::dephase, {Plane::A, 0.0}, 1.0};
    const SessionData data = attacked_session(attack, 40000, 17);
    const SiftResult sifted = sift(data);
    std::size_t errors = 0;
    for (std::size_t i = 0; i < sifted.alice_key.size(); ++i)
        if (sifted.alice_key[i] != sifted.bob_key[i]) ++errors;
    const double n = static_cast<double>(sifted.alice_key.size());
    CHECK(std::abs(errors / n - 0.25) < 3 * testutil::binomial_sigma(0.25, n));
}

TEST_CASE("eve_information") {
    SUBCASE("no attack and no double pairs means no knowledge") {
        const SessionData data = attacked_session(AttackSpec{}, 20000, 5);
        CHECK(eve_information(data) == 0.0);
    }
    SUBCASE("double pairs count as known bits") {
        SessionConfig cfg;
        cfg.seed = 6;
        cfg.n_trials = 200000;
        const SessionData data = run_session(cfg, AttackSpec{});
        const double info = eve_information(data);
        CHECK(info > 0.0);
        CHECK(std::abs(info - 0.007) < 3 * testutil::binomial_sigma(0.007, 50000));
    }
    SUBCASE("full in-plane dephase agreement matches the enumeration oracle") {
        const AttackSpec attack{AttackMode::dephase, {Plane::A, 0.0}, 1.0};
        const double expected = agreement_oracle(attack, 1.0);
        // frozen closed form: (5 + sqrt(2))/8
        CHECK(std::abs(expected - (5.0 + kSqrt2) / 8.0) < 1e-12);

        const SessionData data = attacked_session(attack, 120000, 18);
        std::uint64_t key_bits = 0;
        for (const TrialRecord& t : data.trials)
            if (t.cls == SettingClass::key) ++key_bits;
        CHECK(std::abs(eve_information(data) - expected) <
              3 * testutil::binomial_sigma(expected, double(key_bits)));
    }
    SUBCASE("half interception marks about half the key bits") {
        const AttackSpec attack{AttackMode::dephase, {Plane::A, 0.0}, 0.5};
        const SessionData data = attacked_session(attack, 50000, 19);
        std::uint64_t key_bits = 0, guessed = 0;
        for (const TrialRecord& t : data.trials) {
            if (t.cls != SettingClass::key) continue;
            ++key_bits;
            if (t.eve_guess >= 0) ++guessed;
        }
        CHECK(std::abs(guessed / double(key_bits) - 0.5) <
              4 * testutil::binomial_sigma(0.5, double(key_bits)));
    }
}

TEST_CASE("sweep") {
    SweepParams params;
    params.trials_per_point = 20000;
    params.seed = 77;
    params.source.double_pair_key_frac = 0.0;

    SUBCASE("plane A dephase rows are flat at -sqrt(2)") {
        const std::vector<double> angles{0.0, 45.0, 90.0, 150.0};
        const auto rows = sweep(Plane::A, angles, params);
        REQUIRE(rows.size() == angles.size());
        for (const SweepRow& row : rows) {
            CHECK(std::abs(row.S_analytic - (-kSqrt2)) < 1e-12);
            CHECK(std::abs(row.ber_analytic - 0.25) < 1e-12);
            CHECK(std::abs(row.S_mc - row.S_analytic) < 4 * row.S_mc_sigma);
            CHECK(std::abs(row.ber_mc - row.ber_analytic) < 4 * row.ber_mc_sigma);
        }
    }
    SUBCASE("plane B filter landmarks") {
        params.mode = AttackMode::filter;
        const std::vector<double> angles{0.0, 45.0};
        const auto rows = sweep(Plane::B, angles, params);
        CHECK(std::abs(rows[0].S_analytic - 0.0) < 1e-12);
        CHECK(std::abs(rows[0].ber_analytic - 0.5) < 1e-12);
        CHECK(std::abs(rows[1].S_analytic - (-kSqrt2)) < 1e-12);
        CHECK(std::abs(rows[1].ber_analytic - 0.25) < 1e-12);
        for (const SweepRow& row : rows) {
            CHECK(std::abs(row.S_mc - row.S_analytic) < 4 * row.S_mc_sigma);
            CHECK(std::abs(row.ber_mc - row.ber_analytic) < 4 * row.ber_mc_sigma);
        }
    }
    SUBCASE("empty angle list throws") {
        CHECK_THROWS_AS(sweep(Plane::A, std::vector<double>{}, params), std::invalid_argument);
    }
    SUBCASE("parallel and serial sweeps agree exactly") {
        const std::vector<double> angles{10.0, 60.0, 110.0};
        params.trials_per_point = 4000;
        auto par = sweep(Plane::B, angles, params);
        params.parallel = false;
        auto ser = sweep(Plane::B, angles, params);
        REQUIRE(par.size() == ser.size());
        for (std::size_t i = 0; i < par.size(); ++i) {
            CHECK(par[i].S_mc == ser[i].S_mc);
            CHECK(par[i].ber_mc == ser[i].ber_mc);
            CHECK(par[i].eve_info == ser[i].eve_info);
        }
    }
}

TEST_CASE("plane_average") {
    SUBCASE("measurement plane: flat attack strength") {
        const PlaneAverage avg = plane_average(Plane::A, AttackMode::dephase, 72);
        CHECK(std::abs(avg.avg_abs_S - kSqrt2) < 1e-12);
        CHECK(std::abs(avg.avg_ber - 0.25) < 1e-12);
    }
    SUBCASE("orthogonal planes average to 1/sqrt(2) and 37.5%") {
        for (Plane plane : {Plane::B, Plane::C}) {
            const PlaneAverage avg = plane_average(plane, AttackMode::dephase, 360);
            CHECK(std::abs(avg.avg_abs_S - kSqrt2 / 2.0) < 1e-3);
            CHECK(std::abs(avg.avg_ber - 0.375) < 1e-3);
        }
    }
    SUBCASE("user-supplied point sets are averaged verbatim") {
        const std::vector<double> points{0.0, 45.0};
        const PlaneAverage avg = plane_average(Plane::B, AttackMode::dephase, points);
        const Observables at0 = predicted_observables({AttackMode::dephase, {Plane::B, 0.0}, 1.0}, 1.0);
        const Observables at45 =
            predicted_observables({AttackMode::dephase, {Plane::B, 45.0}, 1.0}, 1.0);
        CHECK(std::abs(avg.avg_abs_S - (std::abs(at0.S) + std::abs(at45.S)) / 2) < 1e-12);
        CHECK(std::abs(avg.avg_ber - (at0.ber_avg + at45.ber_avg) / 2) < 1e-12);
    }
    SUBCASE("too few angles") {
        CHECK_THROWS_AS(plane_average(Plane::A, AttackMode::dephase, 1), std::invalid_argument);
    }
}

TEST_CASE("invariant: filter and dephase give identical full-interception predictions") {
    Xoshiro256 rng(2718);
    for (int i = 0; i < 100; ++i) {
        const Plane plane = static_cast<Plane>(rng() % 3);
        const double angle = uniform01(rng) * plane_period_deg(plane);
        const Observables d =
            predicted_observables({AttackMode::dephase, {plane, angle}, 1.0}, 1.0);
        const Observables f =
            predicted_observables({AttackMode::filter, {plane, angle}, 1.0}, 1.0);
        CHECK(std::abs(d.S - f.S) < 1e-12);
        CHECK(std::abs(d.S_prime - f.S_prime) < 1e-12);
        CHECK(std::abs(d.ber_avg - f.ber_avg) < 1e-12);
    }
}

TEST_CASE("invariant: interception fraction moves S and BER linearly") {
    for (int i = 0; i <= 10; ++i) {
        const double f = i / 10.0;
        const Observables obs =
            predicted_observables({AttackMode::dephase, {Plane::A, 20.0}, f}, 1.0);
        CHECK(std::abs(obs.S - (-(2.0 * kSqrt2 - kSqrt2 * f))) < 1e-12);
        CHECK(std::abs(obs.ber_avg - 0.25 * f) < 1e-12);
    }
}

TEST_CASE("invariant: measuring every pair caps |S| at sqrt(2)") {
    for (Plane plane : {Plane::A, Plane::B, Plane::C}) {
        for (double angle = 0.0; angle < plane_period_deg(plane); angle += 5.0) {
            const Observables obs =
                predicted_observables({AttackMode::dephase, {plane, angle}, 1.0}, 1.0);
            CHECK(std::abs(obs.S) <= kSqrt2 + 1e-9);
            CHECK(std::abs(obs.S_prime) <= kSqrt2 + 1e-9);
        }
    }
}
