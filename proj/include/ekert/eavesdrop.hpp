#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ekert/attack.hpp"
#include "ekert/protocol.hpp"
#include "ekert/qstate.hpp"
#include "ekert/rng.hpp"

namespace ekert {

struct InterceptResult {
    JointState state;
    // 0 when the chi projector fired (or the filter passed), 1 for chi-perp.
    std::optional<int> eve_outcome;
    bool lost = false;
};

// Per-pair interception. With probability 1-fraction the pair passes
// untouched. Dephase mode measures Bob's photon in (chi, chi_perp) and
// resends the eigenstate; filter mode projects onto chi and destroys the
// pair when the projection fails.
InterceptResult intercept(const JointState& state, const AttackSpec& spec, Xoshiro256& rng);

// Maps Eve's measurement outcome to a key-bit guess once Bob's setting is
// public: the outcome eigenstate is identified with the nearer of Bob's two
// detector states and run through the detector relabeling.
int eve_guess_bit(const AttackSpec& spec, int eve_outcome, int bob_index);

// Fraction of sifted key bits Eve knows: guesses that match Bob's bit, plus
// double-pair bits which count as fully known.
double eve_information(const SessionData& data);

struct SweepRow {
    double angle_deg;
    double S_analytic;
    double S_mc;
    double S_mc_sigma;
    double S_prime_analytic;
    double S_prime_mc;
    double S_prime_mc_sigma;
    double ber_analytic;
    double ber_mc;
    double ber_mc_sigma;
    double eve_info;
};

struct SweepParams {
    AttackMode mode = AttackMode::dephase;
    double fraction = 1.0;
    std::uint64_t trials_per_point = 20000;
    std::uint64_t seed = 1;
    double visibility = 1.0;
    SourceParams source{};
    bool parallel = true;
};

// One row per angle: closed-form predictions next to Monte-Carlo estimates
// from full sessions. Points get independent derived seeds, so they can run
// in parallel; rows come back in angle order either way.
std::vector<SweepRow> sweep(Plane plane, std::span<const double> angles_deg,
                            const SweepParams& params);

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

struct PlaneAverage {
    double avg_abs_S;
    double avg_ber;
};

// Analytic attack-strength averages over a basis plane: uniform grid over the
// plane's period, or any user-supplied angle set.
PlaneAverage plane_average(Plane plane, AttackMode mode, int n_angles);
PlaneAverage plane_average(Plane plane, AttackMode mode, std::span<const double> angles_deg);

}  // namespace ekert
