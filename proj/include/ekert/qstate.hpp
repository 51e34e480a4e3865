#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <utility>

#include "ekert/attack.hpp"

namespace ekert {

using Complex = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;
using Vec2 = Eigen::Vector2cd;

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }

enum class Party { alice, bob };

// Single-photon polarization state in the (H, V) amplitude basis.
// Construction normalizes; a zero vector is rejected.
struct PureQubit {
    Complex amp_h;
    Complex amp_v;

    PureQubit(Complex h, Complex v);

    Vec2 vec() const { return Vec2(amp_h, amp_v); }
    Mat2 projector() const;
    PureQubit orthogonal() const;

    // Bloch/Stokes components (s1: H-V, s2: +45/-45, s3: circular).
    std::array<double, 3> stokes() const;
};

// Two-photon polarization density matrix. Basis order is fixed as
// (HH, HV, VH, VV); the first slot is Alice's photon, the second Bob's.
struct JointState {
    Mat4 rho;

    double trace() const { return rho.trace().real(); }
    bool is_valid(double herm_tol = 1e-12, double trace_tol = 1e-12,
                  double eig_tol = -1e-10) const;
    double min_eigenvalue() const;
};

// Analyzer setting of one party. Alice's settings map 1..4 onto
// {45, 90, 135, 180} degrees, Bob's onto {0, 45, 90, 135}.
struct AnalyzerPhase {
    Party party;
    int index;
    double angle_deg;
};

inline constexpr std::array<double, 4> kAliceAngles{45.0, 90.0, 135.0, 180.0};
inline constexpr std::array<double, 4> kBobAngles{0.0, 45.0, 90.0, 135.0};

AnalyzerPhase analyzer_phase(Party party, int index);

// Joint detection probabilities for one analyzer-pair setting; the four
// entries correspond to detector pairs (1,2), (1,2'), (1',2), (1',2').
struct CoincidenceProbs {
    double p_12;
    double p_12p;
    double p_1p2;
    double p_1p2p;

    double sum() const { return p_12 + p_12p + p_1p2 + p_1p2p; }
};

// The maximally entangled pair state (|HH> + |VV>)/sqrt(2) as a density matrix.
JointState phi_plus();

// Projectors of the phase analyzer: P_plus onto (|H> + e^{i phase}|V>)/sqrt(2),
// P_minus onto the orthogonal state. They sum to the identity.
std::pair<Mat2, Mat2> analyzer_projectors(double phase_deg);

CoincidenceProbs coincidence_probs(const JointState& state, double alpha_deg, double beta_deg);

// Correlation value E = (p_12 + p_1'2' - p_12' - p_1'2) / sum. Throws when the
// probabilities sum to zero.
double correlation_E(const CoincidenceProbs& probs);

// CHSH combinations over the fixed analyzer settings:
//   S  = -E(a1,b1) + E(a1,b3) + E(a3,b1) + E(a3,b3)
//   S' =  E(a2,b2) + E(a2,b4) + E(a4,b2) - E(a4,b4)
double bell_S(const JointState& state);
double bell_S_prime(const JointState& state);

// The pure state sitting at a given point of one of the three Poincaré planes.
PureQubit poincare_state(const PoincarePoint& point);

// Projective filter |chi><chi| on Bob's photon. Returns the renormalized
// post-filter state and the pass probability; throws when the filter is
// orthogonal to the state's support.
std::pair<JointState, double> filter_channel(const JointState& state, const PureQubit& chi);

// Phase-randomizing (QND-style) channel on Bob's photon: the coherences
// between chi and chi-perp are destroyed, populations kept. This is the exact
// average over a uniformly random relative phase.
JointState dephase_channel(const JointState& state, const PureQubit& chi);

// Convex mixture f*attacked + (1-f)*clean. Throws for f outside [0,1].
JointState blend(const JointState& attacked, const JointState& clean, double f);

// V*state + (1-V)*I/4; the key-setting error rate of the result on the ideal
// pair state is (1-V)/2. Throws for V outside [0,1].
JointState visibility_mix(const JointState& state, double visibility);

// Closed-form protocol observables under a given attack and visibility.
struct Observables {
    double S;
    double S_prime;
    double ber_avg;
    std::array<double, 4> ber_per_setting;  // keyed by Bob's index 1..4
};

Observables predicted_observables(const AttackSpec& attack, double visibility);

// Effective pair state seen by the analyzers when Eve applies `attack` to the
// fraction of pairs given in the spec (coincidence-conditioned for the lossy
// filter). Shared by predicted_observables and the analytic sweep columns.
JointState attacked_state(const AttackSpec& attack, double visibility);

}  // namespace ekert
