#include "ekert/eavesdrop.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "ekert/postprocess.hpp"

namespace ekert {

InterceptResult intercept(const JointState& state, const AttackSpec& spec, Xoshiro256& rng) {
    spec.validate();
    if (!spec.active() || uniform01(rng) >= spec.fraction)
        return {state, std::nullopt, false};

    const PureQubit chi = poincare_state(spec.basis);
    if (spec.mode == AttackMode::dephase) {
        // Measurement in (chi, chi-perp); the eigenstate travels on to Bob.
        const auto [collapsed, p_chi] = filter_channel(state, chi);
        if (uniform01(rng) < p_chi) return {collapsed, 0, false};
        const auto [collapsed_perp, p_perp] = filter_channel(state, chi.orthogonal());
        (void)p_perp;
        return {collapsed_perp, 1, false};
    }

    const auto [filtered, pass] = filter_channel(state, chi);
    if (uniform01(rng) < pass) return {filtered, 0, false};
    return {state, std::nullopt, true};
}

int eve_guess_bit(const AttackSpec& spec, int eve_outcome, int bob_index) {
    const PureQubit chi = poincare_state(spec.basis);
    const PureQubit eigenstate = eve_outcome == 0 ? chi : chi.orthogonal();
    const auto [p_plus, p_minus] = analyzer_projectors(kBobAngles[bob_index - 1]);
    const double overlap =
        (eigenstate.vec().adjoint() * p_plus * eigenstate.vec())(0).real();
    const DetPort nearest = overlap >= 0.5 ? DetPort::direct : DetPort::prime;
    return outcome_to_bit(Party::bob, bob_index, nearest);
}

double eve_information(const SessionData& data) {
    std::uint64_t key_bits = 0;
    std::uint64_t known = 0;
    for (const TrialRecord& t : data.trials) {
        if (t.cls != SettingClass::key) continue;
        ++key_bits;
        if (t.double_pair || (t.eve_guess >= 0 && t.eve_guess == t.bob_bit)) ++known;
    }
    return key_bits == 0 ? 0.0 : static_cast<double>(known) / static_cast<double>(key_bits);
}

namespace {

SweepRow sweep_point(Plane plane, double angle_deg, const SweepParams& params,
                     std::uint64_t point_index) {
    AttackSpec spec{params.mode, {plane, angle_deg}, params.fraction};
    const Observables analytic = predicted_observables(spec, params.visibility);

    SessionConfig config;
    config.seed = derive_seed(params.seed, "sweep-point", point_index);
    config.n_trials = params.trials_per_point;
    config.visibility = params.visibility;
    config.source = params.source;
    const SessionData session = run_session_serial(config, spec);
    const SiftResult sifted = sift(session);
    const BellEstimate bell = estimate_bell(sifted.bell_s_trials, sifted.bell_s_prime_trials);

    SweepRow row{};
    row.angle_deg = angle_deg;
    row.S_analytic = analytic.S;
    row.S_mc = bell.S;
    row.S_mc_sigma = bell.S_sigma;
    row.S_prime_analytic = analytic.S_prime;
    row.S_prime_mc = bell.S_prime;
    row.S_prime_mc_sigma = bell.S_prime_sigma;
    row.ber_analytic = analytic.ber_avg;
    row.ber_mc = ber(sifted.alice_key, sifted.bob_key);
    const double n = static_cast<double>(sifted.alice_key.size());
    row.ber_mc_sigma = std::sqrt(std::max(row.ber_mc * (1.0 - row.ber_mc), 1.0 / n) / n);
    row.eve_info = eve_information(session);
    return row;
}

}  // namespace

std::vector<SweepRow> sweep(Plane plane, std::span<const double> angles_deg,
                            const SweepParams& params) {
    if (angles_deg.empty()) throw std::invalid_argument("sweep needs at least one angle");
    std::vector<SweepRow> rows(angles_deg.size());
    const std::int64_t n = static_cast<std::int64_t>(angles_deg.size());
    if (params.parallel) {
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t i = 0; i < n; ++i)
            rows[i] = sweep_point(plane, angles_deg[i], params, static_cast<std::uint64_t>(i));
    } else {
        for (std::int64_t i = 0; i < n; ++i)
            rows[i] = sweep_point(plane, angles_deg[i], params, static_cast<std::uint64_t>(i));
    }
    return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
    out << "angle,S_analytic,S_mc,S_mc_sigma,S_prime_analytic,S_prime_mc,S_prime_mc_sigma,"
           "ber_analytic,ber_mc,ber_mc_sigma,eve_info\n";
    char buf[360];
    for (const SweepRow& r : rows) {
        std::snprintf(buf, sizeof(buf),
                      "%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n", r.angle_deg,
                      r.S_analytic, r.S_mc, r.S_mc_sigma, r.S_prime_analytic, r.S_prime_mc,
                      r.S_prime_mc_sigma, r.ber_analytic, r.ber_mc, r.ber_mc_sigma, r.eve_info);
        out << buf;
    }
}

PlaneAverage plane_average(Plane plane, AttackMode mode, int n_angles) {
    if (n_angles < 2) throw std::invalid_argument("plane average needs at least 2 angles");
    const double period = plane_period_deg(plane);
    std::vector<double> angles(static_cast<std::size_t>(n_angles));
    for (int i = 0; i < n_angles; ++i) angles[static_cast<std::size_t>(i)] = period * i / n_angles;
    return plane_average(plane, mode, angles);
}

PlaneAverage plane_average(Plane plane, AttackMode mode, std::span<const double> angles_deg) {
    if (angles_deg.size() < 2)
        throw std::invalid_argument("plane average needs at least 2 angles");
    double sum_abs_s = 0.0;
    double sum_ber = 0.0;
    for (double angle : angles_deg) {
        AttackSpec spec{mode, {plane, angle}, 1.0};
        const Observables obs = predicted_observables(spec, 1.0);
        sum_abs_s += std::abs(obs.S);
        sum_ber += obs.ber_avg;
    }
    const double n = static_cast<double>(angles_deg.size());
    return {sum_abs_s / n, sum_ber / n};
}

}  // namespace ekert
