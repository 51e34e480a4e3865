#include "ekert/source.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace ekert {

void SourceParams::validate() const {
    if (coincidence_rate < 0 || dark_rate < 0 || accidental_rate < 0)
        throw std::invalid_argument("source rates must be nonnegative");
    if (window <= 0 || cycle_period <= 0 || gate < 0 || dead_time < 0)
        throw std::invalid_argument("source durations must be positive");
    if (window >= cycle_period)
        throw std::invalid_argument("collection window must be shorter than the cycle period");
    for (double frac : {detector_efficiency, ambiguous_setting_prob, double_pair_key_frac}) {
        if (frac < 0.0 || frac > 1.0)
            throw std::invalid_argument("source fractions must lie in [0,1]");
    }
    if (detector_asymmetry < 0.0 || detector_asymmetry >= 1.0)
        throw std::invalid_argument("detector_asymmetry must lie in [0,1)");
}

WindowStats window_statistics(const SourceParams& params) {
    params.validate();
    const double lambda = params.coincidence_rate * params.window;
    const double p0 = std::exp(-lambda);
    return {1.0 - p0, 1.0 - p0 * (1.0 + lambda)};
}

std::pair<DetPort, DetPort> sample_outcome(const CoincidenceProbs& probs, Xoshiro256& rng) {
    const double u = uniform01(rng) * probs.sum();
    if (u < probs.p_12) return {DetPort::direct, DetPort::direct};
    if (u < probs.p_12 + probs.p_12p) return {DetPort::direct, DetPort::prime};
    if (u < probs.p_12 + probs.p_12p + probs.p_1p2) return {DetPort::prime, DetPort::direct};
    return {DetPort::prime, DetPort::prime};
}

std::pair<DetPort, DetPort> sample_outcome(const JointState& state, double alpha_deg,
                                           double beta_deg, Xoshiro256& rng) {
    return sample_outcome(coincidence_probs(state, alpha_deg, beta_deg), rng);
}

CoincidenceProbs apply_detector_asymmetry(const CoincidenceProbs& probs, double asymmetry) {
    if (asymmetry == 0.0) return probs;
    const double r = 1.0 - asymmetry;  // primed-detector relative efficiency
    CoincidenceProbs weighted{probs.p_12, probs.p_12p * r, probs.p_1p2 * r,
                              probs.p_1p2p * r * r};
    const double total = weighted.sum();
    return {weighted.p_12 / total, weighted.p_12p / total, weighted.p_1p2 / total,
            weighted.p_1p2p / total};
}

std::optional<DetectionRecord> simulate_window(const SourceParams& params,
                                               const JointState& state, double alpha_deg,
                                               double beta_deg, Xoshiro256& rng) {
    params.validate();

    std::poisson_distribution<int> pair_count(params.coincidence_rate * params.window);
    const int n_pairs = pair_count(rng);

    std::poisson_distribution<int> bg_count(params.background_rate() * params.window);
    const int n_background = bg_count(rng);

    if (n_pairs == 0 && n_background == 0) return std::nullopt;

    DetectionRecord record{};
    // Events are exchangeable within the window, so the first one is a
    // background event with probability n_bg / (n_pairs + n_bg).
    const bool background_first =
        uniform01(rng) * (n_pairs + n_background) < static_cast<double>(n_background);

    if (background_first) {
        record.background = true;
        record.alice_out = uniform01(rng) < 0.5 ? DetPort::direct : DetPort::prime;
        record.bob_out = uniform01(rng) < 0.5 ? DetPort::direct : DetPort::prime;
        return record;
    }

    auto [alice, bob] = sample_outcome(
        apply_detector_asymmetry(coincidence_probs(state, alpha_deg, beta_deg),
                                 params.detector_asymmetry),
        rng);
    record.alice_out = alice;
    record.bob_out = bob;
    // A second emission within gate + dead_time of the kept event is
    // indistinguishable from it, so its key bit counts as leaked. The flag
    // rate is the configured per-key-bit fraction.
    record.double_pair = uniform01(rng) < params.double_pair_key_frac;
    return record;
}

Throughput throughput(const SourceParams& params) {
    const WindowStats stats = window_statistics(params);
    const double max_rate = 1.0 / params.cycle_period;
    return {max_rate, max_rate * stats.p_at_least_one * (1.0 - params.ambiguous_setting_prob)};
}

}  // namespace ekert
