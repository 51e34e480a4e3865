#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "ekert/attack.hpp"
#include "ekert/qstate.hpp"
#include "ekert/rng.hpp"
#include "ekert/source.hpp"

namespace ekert {

using Key = std::vector<std::uint8_t>;

// How one analyzer-setting pair is used, following the fixed 4x4 table:
// alpha+beta=180 pairs feed the key, two disjoint quadruples feed the two
// Bell sums, the remaining four combinations are discarded.
enum class SettingClass : char {
    key = 'K',
    bell_s = 'S',
    bell_s_prime = 'P',
    discard = 'D',
};

// One usable collection window, including the publicly disclosed setting
// indices (the per-trial transcript of the basis discussion).
struct TrialRecord {
    std::uint64_t window = 0;
    std::uint8_t alice_index = 0;  // 1..4
    std::uint8_t bob_index = 0;    // 1..4
    DetPort alice_out = DetPort::direct;
    DetPort bob_out = DetPort::direct;
    SettingClass cls = SettingClass::discard;
    std::int8_t alice_bit = -1;  // set iff cls == key
    std::int8_t bob_bit = -1;
    bool double_pair = false;
    bool background = false;
    std::int8_t eve_guess = -1;  // Eve's key-bit guess when she intercepted
};

struct SessionConfig {
    std::uint64_t seed = 1;
    std::optional<double> duration_s;
    std::optional<std::uint64_t> n_trials;
    double visibility = 1.0;
    SourceParams source{};

    void validate() const;
};

struct SessionData {
    SessionConfig config;
    AttackSpec attack;
    std::vector<TrialRecord> trials;  // usable trials in window order
    std::uint64_t windows_run = 0;

    double duration_seconds() const { return windows_run * config.source.cycle_period; }
};

// Uniform setting choice 1..4.
int pick_setting(Xoshiro256& rng);

SettingClass classify(int alice_index, int bob_index);

// Detector-to-bit relabeling: detector 1 (2') encodes 0 for alpha_1, alpha_3
// (beta_4, beta_2) and 1 for alpha_2, alpha_4 (beta_3, beta_1); the orthogonal
// detector encodes the complement. Averages out detector-efficiency bias.
int outcome_to_bit(Party party, int setting_index, DetPort outcome);

// Full Alice/Bob session. Per window: settings are drawn, the pair state is
// built (visibility noise, then Bernoulli(fraction) interception), the source
// is sampled, the trial classified and key bits extracted. Deterministic in
// the seed; the OpenMP variant produces the identical trial stream.
SessionData run_session(const SessionConfig& config, const AttackSpec& attack);
SessionData run_session_serial(const SessionConfig& config, const AttackSpec& attack);

struct SiftResult {
    Key alice_key;
    Key bob_key;
    std::vector<TrialRecord> bell_s_trials;
    std::vector<TrialRecord> bell_s_prime_trials;
    std::uint64_t n_discarded = 0;
};

// Partition trials by class; key bits keep window order.
SiftResult sift(const SessionData& data);

// Line-oriented session log (one trial per line) consumed by the report
// command.
void write_session_log(std::ostream& out, const SessionData& data);
SessionData read_session_log(std::istream& in);

}  // namespace ekert
