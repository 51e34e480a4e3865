#include "ekert/qstate.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>
#include <string>

namespace ekert {

namespace {

// Kronecker product of two 2x2 operators in the fixed (HH, HV, VH, VV) order.
Mat4 kron(const Mat2& a, const Mat2& b) {
    Mat4 out;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    return out;
}

Mat4 bob_operator(const Mat2& op) { return kron(Mat2::Identity(), op); }

double real_trace(const Mat4& m) { return m.trace().real(); }

}  // namespace

PureQubit::PureQubit(Complex h, Complex v) : amp_h(h), amp_v(v) {
    const double norm = std::sqrt(std::norm(amp_h) + std::norm(amp_v));
    if (norm < 1e-15)
        throw std::invalid_argument("PureQubit amplitudes must not both vanish");
    amp_h /= norm;
    amp_v /= norm;
}

Mat2 PureQubit::projector() const {
    const Vec2 v = vec();
    return v * v.adjoint();
}

PureQubit PureQubit::orthogonal() const {
    return PureQubit(-std::conj(amp_v), std::conj(amp_h));
}

std::array<double, 3> PureQubit::stokes() const {
    const Complex cross = std::conj(amp_h) * amp_v;
    return {std::norm(amp_h) - std::norm(amp_v), 2.0 * cross.real(), 2.0 * cross.imag()};
}

bool JointState::is_valid(double herm_tol, double trace_tol, double eig_tol) const {
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > herm_tol) return false;
    if (std::abs(trace() - 1.0) > trace_tol) return false;
    return min_eigenvalue() >= eig_tol;
}

double JointState::min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Mat4> solver((rho + rho.adjoint()) / 2.0);
    return solver.eigenvalues().minCoeff();
}

AnalyzerPhase analyzer_phase(Party party, int index) {
    if (index < 1 || index > 4)
        throw std::invalid_argument("analyzer index must be 1..4, got " + std::to_string(index));
    const double angle =
        party == Party::alice ? kAliceAngles[index - 1] : kBobAngles[index - 1];
    return {party, index, angle};
}

JointState phi_plus() {
    Eigen::Vector4cd psi = Eigen::Vector4cd::Zero();
    psi(0) = 1.0 / std::sqrt(2.0);  // HH
    psi(3) = 1.0 / std::sqrt(2.0);  // VV
    return {psi * psi.adjoint()};
}

std::pair<Mat2, Mat2> analyzer_projectors(double phase_deg) {
    const PureQubit plus(1.0 / std::sqrt(2.0),
                         std::polar(1.0 / std::sqrt(2.0), deg2rad(phase_deg)));
    return {plus.projector(), plus.orthogonal().projector()};
}

CoincidenceProbs coincidence_probs(const JointState& state, double alpha_deg, double beta_deg) {
    const auto [pa, pa_perp] = analyzer_projectors(alpha_deg);
    const auto [pb, pb_perp] = analyzer_projectors(beta_deg);
    return {
        real_trace(kron(pa, pb) * state.rho),
        real_trace(kron(pa, pb_perp) * state.rho),
        real_trace(kron(pa_perp, pb) * state.rho),
        real_trace(kron(pa_perp, pb_perp) * state.rho),
    };
}

double correlation_E(const CoincidenceProbs& probs) {
    const double total = probs.sum();
    if (total <= 0.0)
        throw std::domain_error("correlation undefined: no coincidences in any detector pair");
    return (probs.p_12 + probs.p_1p2p - probs.p_12p - probs.p_1p2) / total;
}

namespace {

double correlation_at(const JointState& state, int alice_index, int bob_index) {
    return correlation_E(coincidence_probs(state, kAliceAngles[alice_index - 1],
                                           kBobAngles[bob_index - 1]));
}

}  // namespace

double bell_S(const JointState& state) {
    return -correlation_at(state, 1, 1) + correlation_at(state, 1, 3) +
           correlation_at(state, 3, 1) + correlation_at(state, 3, 3);
}

double bell_S_prime(const JointState& state) {
    return correlation_at(state, 2, 2) + correlation_at(state, 2, 4) +
           correlation_at(state, 4, 2) - correlation_at(state, 4, 4);
}

PureQubit poincare_state(const PoincarePoint& point) {
    const double a = deg2rad(point.angle_deg);
    switch (point.plane) {
        case Plane::A:
            return PureQubit(1.0, std::polar(1.0, a));
        case Plane::B:
            return PureQubit(std::cos(a), std::sin(a));
        case Plane::C: {
            // (|45> + e^{i psi}|-45>)/sqrt(2) expanded in H/V.
            const Complex phase = std::polar(1.0, a);
            return PureQubit(1.0 + phase, 1.0 - phase);
        }
    }
    throw std::logic_error("unreachable plane");
}

std::pair<JointState, double> filter_channel(const JointState& state, const PureQubit& chi) {
    const Mat4 k = bob_operator(chi.projector());
    const Mat4 projected = k * state.rho * k;
    const double pass_prob = real_trace(projected);
    if (pass_prob < 1e-12)
        throw std::domain_error("filter is orthogonal to the state's support (pass probability 0)");
    return {JointState{projected / pass_prob}, pass_prob};
}

JointState dephase_channel(const JointState& state, const PureQubit& chi) {
    const Mat4 p = bob_operator(chi.projector());
    const Mat4 p_perp = bob_operator(chi.orthogonal().projector());
    return {p * state.rho * p + p_perp * state.rho * p_perp};
}

JointState blend(const JointState& attacked, const JointState& clean, double f) {
    if (f < 0.0 || f > 1.0)
        throw std::invalid_argument("blend fraction must lie in [0,1], got " + std::to_string(f));
    return {f * attacked.rho + (1.0 - f) * clean.rho};
}

JointState visibility_mix(const JointState& state, double visibility) {
    if (visibility < 0.0 || visibility > 1.0)
        throw std::invalid_argument("visibility must lie in [0,1], got " +
                                    std::to_string(visibility));
    return {visibility * state.rho + (1.0 - visibility) * Mat4::Identity() / 4.0};
}

JointState attacked_state(const AttackSpec& attack, double visibility) {
    attack.validate();
    const JointState clean = visibility_mix(phi_plus(), visibility);
    if (!attack.active()) return clean;

    const PureQubit chi = poincare_state(attack.basis);
    const double f = attack.fraction;
    if (attack.mode == AttackMode::dephase)
        return blend(dephase_channel(clean, chi), clean, f);

    // Lossy filter: conditioning on a coincidence reweights the mixture by the
    // pass probability of the intercepted pairs.
    const auto [filtered, pass] = filter_channel(clean, chi);
    const double w = f * pass / (f * pass + (1.0 - f));
    return blend(filtered, clean, w);
}

Observables predicted_observables(const AttackSpec& attack, double visibility) {
    const JointState state = attacked_state(attack, visibility);

    Observables out{};
    out.S = bell_S(state);
    out.S_prime = bell_S_prime(state);

    // Key settings pair Bob's index b with Alice's index 5-b (alpha+beta=180);
    // with the detector relabeling an error is a (1,2) or (1',2') coincidence.
    for (int b = 1; b <= 4; ++b) {
        const int a = 5 - b;
        const auto probs =
            coincidence_probs(state, kAliceAngles[a - 1], kBobAngles[b - 1]);
        out.ber_per_setting[b - 1] = (probs.p_12 + probs.p_1p2p) / probs.sum();
    }
    out.ber_avg = (out.ber_per_setting[0] + out.ber_per_setting[1] +
                   out.ber_per_setting[2] + out.ber_per_setting[3]) / 4.0;
    return out;
}

}  // namespace ekert
