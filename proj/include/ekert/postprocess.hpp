#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "ekert/protocol.hpp"
#include "ekert/rng.hpp"

namespace ekert {

// Finite-sample Bell estimate. Counts per setting combination are the four
// detector-pair tallies (1,2), (1,2'), (1',2), (1',2'); sigmas come from
// independent-Poisson error propagation through E, summed in quadrature.
struct BellEstimate {
    struct Combo {
        int alice_index = 0;
        int bob_index = 0;
        std::array<std::uint64_t, 4> counts{};  // R12, R12', R1'2, R1'2'
        double E = 0.0;
        double sigma = 0.0;

        std::uint64_t total() const {
            return counts[0] + counts[1] + counts[2] + counts[3];
        }
    };

    double S = 0.0;
    double S_sigma = 0.0;
    double S_prime = 0.0;
    double S_prime_sigma = 0.0;
    std::array<Combo, 4> s_combos;
    std::array<Combo, 4> s_prime_combos;
};

BellEstimate estimate_bell(std::span<const TrialRecord> bell_s_trials,
                           std::span<const TrialRecord> bell_s_prime_trials);

// Bit error rate: Hamming distance over length. Throws on mismatched or
// empty keys.
double ber(const Key& alice_key, const Key& bob_key);

// Upper bound on Eve's key knowledge from the observed error rate and the
// double-pair fraction: dp + (4/sqrt(2)) * ber, capped at 1.
double eve_bound(double ber_conservative, double double_pair_frac);

// Initial block size ceil(0.73/ber), doubled for each further round.
std::vector<std::size_t> default_block_schedule(double ber_estimate, int rounds = 4);

struct ReconcileResult {
    Key key;                         // identical final keys of both parties
    std::uint64_t bits_disclosed = 0;
    int rounds = 0;
};

// Iterated block-parity error detection with bisection. Every disclosed
// parity discards one bit. After the scheduled rounds, shuffled verification
// rounds repeat at the last block size until one passes clean (plus a
// whole-key check parity); exceeding round_cap throws.
ReconcileResult reconcile(const Key& alice_key, const Key& bob_key,
                          std::span<const std::size_t> block_schedule, Xoshiro256& rng,
                          int round_cap = 64);

// Privacy amplification by a seeded binary Toeplitz matrix.
Key amplify(const Key& key, std::size_t n_final, std::uint64_t hash_seed);

// Same hash with explicit diagonal coefficients (length n_in + n_out - 1);
// coefficient layout: out[i] = XOR_j coeffs[i + (n_in-1) - j] * key[j].
Key amplify_with_coefficients(const Key& key, std::size_t n_final,
                              std::span<const std::uint8_t> coeffs);

struct ResidualInfo {
    double s;       // n_ec - n_final - eve_bits
    double bound;   // 2^{-s}/ln 2 when s >= 0
    bool sufficient;  // false when the compression cannot cover Eve's bits
};

ResidualInfo residual_info(std::int64_t n_ec, std::int64_t n_final, std::int64_t eve_bits);

struct DetectionResult {
    bool detected = false;
    double seconds = 0.0;      // first time the margin is crossed
    double final_margin = 0.0; // |S_est| - k_sigma*sigma - threshold at stream end
};

// Time to certify a Bell violation: running estimates over both of the
// session's Bell streams, pooled as (|S| + |S'|)/2, with trials accruing at
// usable_rate. Detection fires at the first point where the pooled estimate
// exceeds the threshold by k_sigma standard errors, once every setting
// combination holds at least min_per_combo counts.
DetectionResult detection_time(const SessionData& data, double usable_rate,
                               double threshold = 1.4142135623730951,
                               double k_sigma = 2.0, std::uint64_t min_per_combo = 1);

// End-to-end accounting of one key-generation run.
struct SessionReport {
    std::uint64_t n_raw = 0;
    double ber_value = 0.0;
    double ber_conservative = 0.0;
    double double_pair_frac = 0.0;
    double eve_bound_value = 0.0;
    std::uint64_t eve_bits = 0;
    std::uint64_t n_ec = 0;
    std::uint64_t bits_disclosed = 0;
    std::uint64_t n_final = 0;
    double residual_s = 0.0;
    double residual_bound = 0.0;
    BellEstimate bell;
    bool eavesdropper_flagged = false;  // Bell margin below the alarm threshold
    double detection_time_s = 0.0;
    bool detection_crossed = false;
    double duration_s = 0.0;
    double raw_rate = 0.0;
    double final_rate = 0.0;

    void write_kv(std::ostream& out) const;
    void write_csv_row(std::ostream& out, bool header) const;
};

}  // namespace ekert
