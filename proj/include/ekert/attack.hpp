#pragma once

#include <stdexcept>
#include <string>

namespace ekert {

// Great circles on the Poincaré sphere used to parameterize analysis and
// attack bases.
//   A: (|H> + e^{i phi}|V>)/sqrt(2)    — the plane the analyzers live in
//   B: cos(theta)|H> + sin(theta)|V>   — linear polarizations (equator)
//   C: (|45> + e^{i psi}|-45>)/sqrt(2) — contains H/V and the circular poles
enum class Plane { A, B, C };

struct PoincarePoint {
    Plane plane = Plane::A;
    double angle_deg = 0.0;
};

// Angular period of a plane's parameter: one full loop around its great circle.
inline double plane_period_deg(Plane plane) {
    return plane == Plane::B ? 180.0 : 360.0;
}

enum class AttackMode { none, filter, dephase };

// Declarative eavesdropping strategy: which channel Eve applies, in what
// basis, and the fraction of pairs she touches. mode==none ignores the rest.
struct AttackSpec {
    AttackMode mode = AttackMode::none;
    PoincarePoint basis{};
    double fraction = 1.0;

    void validate() const {
        if (fraction < 0.0 || fraction > 1.0)
            throw std::invalid_argument("attack fraction must lie in [0,1], got " +
                                        std::to_string(fraction));
    }

    bool active() const { return mode != AttackMode::none && fraction > 0.0; }
};

inline const char* to_string(Plane p) {
    switch (p) {
        case Plane::A: return "A";
        case Plane::B: return "B";
        default: return "C";
    }
}

inline const char* to_string(AttackMode m) {
    switch (m) {
        case AttackMode::none: return "none";
        case AttackMode::filter: return "filter";
        default: return "dephase";
    }
}

}  // namespace ekert
