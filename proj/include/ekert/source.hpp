#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "ekert/qstate.hpp"
#include "ekert/rng.hpp"

namespace ekert {

// Which detector fired on one side: `direct` is the detector behind the
// analyzer state (1 resp. 2), `prime` the orthogonal output (1' resp. 2').
enum class DetPort : std::uint8_t { direct = 0, prime = 1 };

inline DetPort flip(DetPort p) {
    return p == DetPort::direct ? DetPort::prime : DetPort::direct;
}

// Physical-layer parameters. Rates are per second, durations in seconds.
// coincidence_rate is the *detected* pair rate between the two parties'
// detectors, so detector efficiency is already folded into it.
struct SourceParams {
    double coincidence_rate = 5000.0;
    double window = 1e-3;
    double cycle_period = 22e-3;
    double gate = 5e-9;
    double dead_time = 35e-9;
    double detector_efficiency = 0.60;
    double dark_rate = 400.0;
    double accidental_rate = 1e-5;
    double ambiguous_setting_prob = 0.119;
    double double_pair_key_frac = 0.007;
    // Efficiency deficit of the primed detectors relative to the direct ones;
    // skews raw detector counts while the bit relabeling keeps the key
    // balanced. Coincidence-conditioned, so rates are unaffected.
    double detector_asymmetry = 0.0;

    void validate() const;

    // Background coincidences: measured accidentals plus dark-dark AND
    // coincidences of the two detectors on each side within the gate.
    double background_rate() const {
        return accidental_rate + 4.0 * dark_rate * dark_rate * gate;
    }
};

struct WindowStats {
    double p_at_least_one;
    double p_more_than_one;
};

// Poisson statistics of pair detections within one collection window.
WindowStats window_statistics(const SourceParams& params);

// Draws one coincidence outcome from the four joint detection probabilities
// of the state at the given analyzer settings (renormalized in case a lossy
// channel left them summing below one).
std::pair<DetPort, DetPort> sample_outcome(const JointState& state, double alpha_deg,
                                           double beta_deg, Xoshiro256& rng);
std::pair<DetPort, DetPort> sample_outcome(const CoincidenceProbs& probs, Xoshiro256& rng);

// Reweights the joint probabilities for unequal detector efficiencies and
// renormalizes onto recorded coincidences.
CoincidenceProbs apply_detector_asymmetry(const CoincidenceProbs& probs, double asymmetry);

struct DetectionRecord {
    DetPort alice_out;
    DetPort bob_out;
    bool double_pair = false;
    bool background = false;  // record came from a dark/accidental coincidence
};

// One collection window: Poisson pair count, background injection, and the
// first-event rule. Returns nothing when no coincidence occurred.
std::optional<DetectionRecord> simulate_window(const SourceParams& params,
                                               const JointState& state, double alpha_deg,
                                               double beta_deg, Xoshiro256& rng);

struct Throughput {
    double max_rate;
    double usable_rate;
};

// Cycle-limited collection rate and the part of it that survives window
// occupancy and ambiguous analyzer settings.
Throughput throughput(const SourceParams& params);

}  // namespace ekert
