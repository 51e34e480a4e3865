#include "ekert/postprocess.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

namespace ekert {

namespace {

constexpr std::array<std::pair<int, int>, 4> kSCombos{{{1, 1}, {1, 3}, {3, 1}, {3, 3}}};
constexpr std::array<std::pair<int, int>, 4> kSPrimeCombos{{{2, 2}, {2, 4}, {4, 2}, {4, 4}}};

int outcome_slot(const TrialRecord& t) {
    return (t.alice_out == DetPort::prime ? 2 : 0) + (t.bob_out == DetPort::prime ? 1 : 0);
}

// E and its uncertainty from the four coincidence counts, treating them as
// independent Poisson variables (delta method). The half-count smoothing
// keeps the uncertainty finite when one of the agree/disagree sums is empty.
void combo_statistics(BellEstimate::Combo& combo) {
    const auto n = combo.total();
    if (n == 0) return;
    const double agree = static_cast<double>(combo.counts[0] + combo.counts[3]);
    const double disagree = static_cast<double>(combo.counts[1] + combo.counts[2]);
    const double total = agree + disagree;
    combo.E = (agree - disagree) / total;
    const double ts = total + 1.0;
    combo.sigma = 2.0 * std::sqrt((agree + 0.5) * (disagree + 0.5) / (ts * ts * ts));
}

void tally(std::span<const TrialRecord> trials, const std::array<std::pair<int, int>, 4>& combos,
           std::array<BellEstimate::Combo, 4>& out, const char* which) {
    for (std::size_t i = 0; i < combos.size(); ++i) {
        out[i].alice_index = combos[i].first;
        out[i].bob_index = combos[i].second;
    }
    for (const TrialRecord& t : trials) {
        for (auto& combo : out) {
            if (combo.alice_index == t.alice_index && combo.bob_index == t.bob_index) {
                ++combo.counts[static_cast<std::size_t>(outcome_slot(t))];
                break;
            }
        }
    }
    for (auto& combo : out) {
        if (combo.total() == 0)
            throw std::invalid_argument(std::string("no trials for ") + which + " combination (alpha_" +
                                        std::to_string(combo.alice_index) + ", beta_" +
                                        std::to_string(combo.bob_index) + ")");
        combo_statistics(combo);
    }
}

}  // namespace

BellEstimate estimate_bell(std::span<const TrialRecord> bell_s_trials,
                           std::span<const TrialRecord> bell_s_prime_trials) {
    BellEstimate est;
    tally(bell_s_trials, kSCombos, est.s_combos, "S");
    tally(bell_s_prime_trials, kSPrimeCombos, est.s_prime_combos, "S'");

    est.S = -est.s_combos[0].E + est.s_combos[1].E + est.s_combos[2].E + est.s_combos[3].E;
    est.S_prime = est.s_prime_combos[0].E + est.s_prime_combos[1].E + est.s_prime_combos[2].E -
                  est.s_prime_combos[3].E;

    auto quad = [](const std::array<BellEstimate::Combo, 4>& combos) {
        double sum = 0.0;
        for (const auto& c : combos) sum += c.sigma * c.sigma;
        return std::sqrt(sum);
    };
    est.S_sigma = quad(est.s_combos);
    est.S_prime_sigma = quad(est.s_prime_combos);
    return est;
}

double ber(const Key& alice_key, const Key& bob_key) {
    if (alice_key.size() != bob_key.size())
        throw std::invalid_argument("keys have different lengths");
    if (alice_key.empty()) throw std::invalid_argument("keys are empty");
    std::size_t errors = 0;
    for (std::size_t i = 0; i < alice_key.size(); ++i)
        if (alice_key[i] != bob_key[i]) ++errors;
    return static_cast<double>(errors) / static_cast<double>(alice_key.size());
}

double eve_bound(double ber_conservative, double double_pair_frac) {
    if (ber_conservative < 0 || ber_conservative > 1 || double_pair_frac < 0 ||
        double_pair_frac > 1)
        throw std::invalid_argument("eve_bound inputs must lie in [0,1]");
    const double bound = double_pair_frac + 4.0 / std::sqrt(2.0) * ber_conservative;
    return std::min(bound, 1.0);
}

std::vector<std::size_t> default_block_schedule(double ber_estimate, int rounds) {
    if (rounds < 1) throw std::invalid_argument("schedule needs at least one round");
    const double p = std::max(ber_estimate, 1e-4);
    std::vector<std::size_t> schedule(static_cast<std::size_t>(rounds));
    schedule[0] = static_cast<std::size_t>(std::ceil(0.73 / p));
    for (std::size_t i = 1; i < schedule.size(); ++i) schedule[i] = schedule[i - 1] * 2;
    return schedule;
}

namespace {

int block_parity(const Key& key, std::size_t lo, std::size_t hi) {
    int parity = 0;
    for (std::size_t i = lo; i < hi; ++i) parity ^= key[i];
    return parity;
}

struct RoundOutcome {
    std::uint64_t disclosed = 0;
    std::size_t errors_fixed = 0;
    std::vector<std::size_t> discard;  // distinct positions, one per disclosed parity
};

// One pass of block parities over the current arrangement; mismatched blocks
// are bisected and Bob's erroneous bit flipped.
RoundOutcome parity_round(const Key& alice, Key& bob, std::size_t block) {
    RoundOutcome out;
    const std::size_t n = alice.size();
    for (std::size_t lo = 0; lo < n; lo += block) {
        const std::size_t hi = std::min(lo + block, n);
        ++out.disclosed;
        out.discard.push_back(hi - 1);
        if (block_parity(alice, lo, hi) == block_parity(bob, lo, hi)) continue;

        std::size_t a = lo;
        std::size_t b = hi;
        while (b - a > 1) {
            const std::size_t mid = a + (b - a) / 2;
            ++out.disclosed;
            out.discard.push_back(mid - 1);
            if (block_parity(alice, a, mid) != block_parity(bob, a, mid))
                b = mid;
            else
                a = mid;
        }
        bob[a] ^= 1;
        ++out.errors_fixed;
    }
    return out;
}

void apply_discards(Key& alice, Key& bob, std::vector<std::size_t>& positions) {
    std::sort(positions.begin(), positions.end());
    positions.erase(std::unique(positions.begin(), positions.end()), positions.end());
    Key na, nb;
    na.reserve(alice.size() - positions.size());
    nb.reserve(bob.size() - positions.size());
    std::size_t next = 0;
    for (std::size_t i = 0; i < alice.size(); ++i) {
        if (next < positions.size() && positions[next] == i) {
            ++next;
            continue;
        }
        na.push_back(alice[i]);
        nb.push_back(bob[i]);
    }
    alice.swap(na);
    bob.swap(nb);
}

void shared_shuffle(Key& alice, Key& bob, Xoshiro256& rng) {
    std::vector<std::size_t> perm(alice.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    Key na(alice.size()), nb(bob.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        na[i] = alice[perm[i]];
        nb[i] = bob[perm[i]];
    }
    alice.swap(na);
    bob.swap(nb);
}

}  // namespace

ReconcileResult reconcile(const Key& alice_key, const Key& bob_key,
                          std::span<const std::size_t> block_schedule, Xoshiro256& rng,
                          int round_cap) {
    if (alice_key.size() != bob_key.size())
        throw std::invalid_argument("keys have different lengths");
    if (alice_key.empty()) throw std::invalid_argument("keys are empty");
    if (block_schedule.empty()) throw std::invalid_argument("empty block schedule");

    Key alice = alice_key;
    Key bob = bob_key;
    ReconcileResult result;
    bool corrected_any = false;

    auto run_round = [&](std::size_t block) {
        block = std::clamp<std::size_t>(block, 1, alice.size());
        RoundOutcome outcome = parity_round(alice, bob, block);
        result.bits_disclosed += outcome.disclosed;
        ++result.rounds;
        if (outcome.errors_fixed > 0) corrected_any = true;
        // One bit per disclosed parity; waived only while the keys have never
        // disagreed (the pristine case short-circuits below).
        if (corrected_any) apply_discards(alice, bob, outcome.discard);
        return outcome.errors_fixed;
    };

    auto whole_key_check = [&] {
        ++result.bits_disclosed;
        if (block_parity(alice, 0, alice.size()) != block_parity(bob, 0, bob.size()))
            throw std::runtime_error("whole-key parity mismatch after verification");
        if (corrected_any) {
            alice.pop_back();
            bob.pop_back();
        }
    };

    for (std::size_t r = 0; r < block_schedule.size(); ++r) {
        if (alice.empty()) break;
        if (r > 0) shared_shuffle(alice, bob, rng);
        const std::size_t fixed = run_round(block_schedule[r]);
        if (fixed == 0 && !corrected_any) {
            // Keys were already identical: the first round doubles as the
            // verification round.
            whole_key_check();
            result.key = std::move(alice);
            return result;
        }
    }

    // Verification: reshuffled fine-grained parity rounds until one comes
    // back clean, then a whole-key check parity. Fine blocks make it unlikely
    // that a residual error pair hides inside one block.
    const std::size_t verify_block =
        block_schedule.size() > 1 ? block_schedule[1] : block_schedule[0];
    while (!alice.empty()) {
        if (result.rounds >= round_cap)
            throw std::runtime_error(
                "reconciliation failed to converge; error rate far above estimate");
        shared_shuffle(alice, bob, rng);
        if (run_round(verify_block) == 0) break;
    }
    if (!alice.empty()) whole_key_check();

    if (alice != bob) throw std::runtime_error("reconciled keys differ");
    result.key = std::move(alice);
    return result;
}

Key amplify_with_coefficients(const Key& key, std::size_t n_final,
                              std::span<const std::uint8_t> coeffs) {
    const std::size_t n_in = key.size();
    if (n_final > n_in)
        throw std::invalid_argument("amplified length exceeds input key length");
    if (n_final == 0) return {};
    if (coeffs.size() != n_in + n_final - 1)
        throw std::invalid_argument("Toeplitz coefficient count must be n_in + n_out - 1");

    // out[i] = XOR_j coeffs[i + (n_in-1) - j] * key[j]; with the key reversed
    // this is a sliding AND/popcount window over the coefficient bits.
    const std::size_t words = (n_in + 63) / 64;
    std::vector<std::uint64_t> key_rev(words, 0);
    for (std::size_t j = 0; j < n_in; ++j)
        if (key[j]) key_rev[(n_in - 1 - j) / 64] |= 1ull << ((n_in - 1 - j) % 64);

    const std::size_t cwords = (coeffs.size() + 63) / 64 + 1;
    std::vector<std::uint64_t> cbits(cwords, 0);
    for (std::size_t m = 0; m < coeffs.size(); ++m)
        if (coeffs[m]) cbits[m / 64] |= 1ull << (m % 64);

    Key out(n_final, 0);
    for (std::size_t i = 0; i < n_final; ++i) {
        const std::size_t q = i / 64;
        const unsigned r = i % 64;
        int parity = 0;
        for (std::size_t w = 0; w < words; ++w) {
            std::uint64_t window = cbits[q + w] >> r;
            if (r != 0) window |= cbits[q + w + 1] << (64 - r);
            parity ^= std::popcount(window & key_rev[w]) & 1;
        }
        out[i] = static_cast<std::uint8_t>(parity);
    }
    return out;
}

Key amplify(const Key& key, std::size_t n_final, std::uint64_t hash_seed) {
    const std::size_t n_in = key.size();
    if (n_final > n_in)
        throw std::invalid_argument("amplified length exceeds input key length");
    if (n_final == 0) return {};
    Xoshiro256 rng(derive_seed(hash_seed, "toeplitz"));
    std::vector<std::uint8_t> coeffs(n_in + n_final - 1);
    std::uint64_t word = 0;
    for (std::size_t m = 0; m < coeffs.size(); ++m) {
        if (m % 64 == 0) word = rng();
        coeffs[m] = static_cast<std::uint8_t>((word >> (m % 64)) & 1);
    }
    return amplify_with_coefficients(key, n_final, coeffs);
}

ResidualInfo residual_info(std::int64_t n_ec, std::int64_t n_final, std::int64_t eve_bits) {
    if (n_ec < 0 || n_final < 0 || eve_bits < 0)
        throw std::invalid_argument("residual_info inputs must be nonnegative");
    const double s = static_cast<double>(n_ec - n_final - eve_bits);
    if (s < 0.0) return {s, std::numeric_limits<double>::infinity(), false};
    return {s, std::exp2(-s) / std::log(2.0), true};
}

DetectionResult detection_time(const SessionData& data, double usable_rate, double threshold,
                               double k_sigma, std::uint64_t min_per_combo) {
    if (usable_rate <= 0.0) throw std::invalid_argument("usable_rate must be positive");

    // Running estimates over both Bell streams; the certified statistic is
    // the pooled magnitude (|S| + |S'|)/2, matching the practice of checking
    // the two violations side by side.
    std::array<BellEstimate::Combo, 8> combos{};
    for (std::size_t i = 0; i < 4; ++i) {
        combos[i].alice_index = kSCombos[i].first;
        combos[i].bob_index = kSCombos[i].second;
        combos[i + 4].alice_index = kSPrimeCombos[i].first;
        combos[i + 4].bob_index = kSPrimeCombos[i].second;
    }

    // Small-sample guards for sequential testing: the pooled estimate is
    // clamped at the physical 2*sqrt(2) ceiling, and each per-combination
    // variance is floored at its threshold-hypothesis value (1 - E^2 >= 1/2
    // whenever |E| <= 1/sqrt(2), which is where a full-interception attack
    // lives). Without them a handful of early aligned counts can fake a
    // violation.
    auto floored_sigma2 = [](const BellEstimate::Combo& c) {
        const double n = static_cast<double>(c.total());
        return std::max(c.sigma * c.sigma, 0.5 / n);
    };

    DetectionResult result;
    double margin = -threshold;
    for (std::size_t i = 0; i < data.trials.size(); ++i) {
        const TrialRecord& t = data.trials[i];
        if (t.cls != SettingClass::bell_s && t.cls != SettingClass::bell_s_prime) continue;
        bool ready = true;
        for (auto& combo : combos) {
            if (combo.alice_index == t.alice_index && combo.bob_index == t.bob_index)
                ++combo.counts[static_cast<std::size_t>(outcome_slot(t))];
            if (combo.total() < min_per_combo) ready = false;
        }
        if (!ready) continue;

        double var = 0.0;
        std::array<double, 8> e{};
        for (std::size_t c = 0; c < combos.size(); ++c) {
            combo_statistics(combos[c]);
            e[c] = combos[c].E;
            var += floored_sigma2(combos[c]);
        }
        const double s = -e[0] + e[1] + e[2] + e[3];
        const double s_prime = e[4] + e[5] + e[6] - e[7];
        const double ceiling = 2.0 * 1.4142135623730951;
        const double s_est = std::min((std::abs(s) + std::abs(s_prime)) / 2.0, ceiling);
        margin = s_est - k_sigma * std::sqrt(var) / 2.0 - threshold;
        if (margin > 0.0) {
            result.detected = true;
            result.seconds = static_cast<double>(i + 1) / usable_rate;
            result.final_margin = margin;
            return result;
        }
    }
    result.final_margin = margin;
    result.seconds = static_cast<double>(data.trials.size()) / usable_rate;
    return result;
}

void SessionReport::write_kv(std::ostream& out) const {
    out.precision(17);
    out << "n_raw=" << n_raw << "\n";
    out << "ber=" << ber_value << "\n";
    out << "ber_conservative=" << ber_conservative << "\n";
    out << "double_pair_frac=" << double_pair_frac << "\n";
    out << "eve_bound=" << eve_bound_value << "\n";
    out << "eve_bits=" << eve_bits << "\n";
    out << "n_ec=" << n_ec << "\n";
    out << "bits_disclosed=" << bits_disclosed << "\n";
    out << "n_final=" << n_final << "\n";
    out << "residual_s=" << residual_s << "\n";
    out << "residual_bound=" << residual_bound << "\n";
    out << "S=" << bell.S << "\n";
    out << "S_sigma=" << bell.S_sigma << "\n";
    out << "S_prime=" << bell.S_prime << "\n";
    out << "S_prime_sigma=" << bell.S_prime_sigma << "\n";
    out << "eavesdropper_flagged=" << (eavesdropper_flagged ? 1 : 0) << "\n";
    out << "detection_time_s=" << detection_time_s << "\n";
    out << "detection_crossed=" << (detection_crossed ? 1 : 0) << "\n";
    out << "duration_s=" << duration_s << "\n";
    out << "raw_rate=" << raw_rate << "\n";
    out << "final_rate=" << final_rate << "\n";
}

void SessionReport::write_csv_row(std::ostream& out, bool header) const {
    if (header)
        out << "n_raw,ber,ber_conservative,double_pair_frac,eve_bound,eve_bits,n_ec,"
               "bits_disclosed,n_final,residual_s,residual_bound,S,S_sigma,S_prime,"
               "S_prime_sigma,eavesdropper_flagged,detection_time_s,detection_crossed,"
               "duration_s,raw_rate,final_rate\n";
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "%llu,%.6g,%.6g,%.6g,%.6g,%llu,%llu,%llu,%llu,%.6g,%.6g,%.6g,%.6g,%.6g,"
                  "%.6g,%d,%.6g,%d,%.6g,%.6g,%.6g\n",
                  static_cast<unsigned long long>(n_raw), ber_value, ber_conservative,
                  double_pair_frac, eve_bound_value, static_cast<unsigned long long>(eve_bits),
                  static_cast<unsigned long long>(n_ec),
                  static_cast<unsigned long long>(bits_disclosed),
                  static_cast<unsigned long long>(n_final), residual_s, residual_bound, bell.S,
                  bell.S_sigma, bell.S_prime, bell.S_prime_sigma, eavesdropper_flagged ? 1 : 0,
                  detection_time_s, detection_crossed ? 1 : 0, duration_s, raw_rate, final_rate);
    out << buf;
}

}  // namespace ekert
