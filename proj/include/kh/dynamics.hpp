// Hamiltonian H = K + U of the Kepler-Heisenberg problem, its vector field and first integrals.
#pragma once

#include "kh/phase_geometry.hpp"

namespace kh {

/// Time derivatives of the six Cartesian phase coordinates.
struct PhaseVelocity {
    double dx = 0, dy = 0, dz = 0;
    double dpx = 0, dpy = 0, dpz = 0;

    [[nodiscard]] Vec6 to_array() const { return {dx, dy, dz, dpx, dpy, dpz}; }
};

/// Energy, angular momentum and dilational momentum of a phase point.
/// H and p_theta are first integrals; J is one only on the H = 0 level set, since dJ/dt = 2H.
struct ConservedTriple {
    double H = 0;
    double ptheta = 0;
    double J = 0;
};

/// Sub-Riemannian kinetic energy (P_X^2 + P_Y^2) / 2.
[[nodiscard]] double kinetic_energy(const CartesianState& c);

/// Heisenberg sub-Laplacian potential -1 / (8 pi sqrt((x^2+y^2)^2 + 16 z^2)).
/// Throws SingularityError at the origin.
[[nodiscard]] double potential_energy(const CartesianState& c);

[[nodiscard]] double hamiltonian_cartesian(const CartesianState& c);

/// H = exp(-2s) (Q(u; p) - 1/(4 pi)) / 2 with Q the quadratic form
///   [cos u, sin u, 0; sin u, sec u, 2 cos u; 0, 2 cos u, 4 cos u]
/// in (p_s, p_theta, p_u). Throws DomainError for |u| >= pi/2.
[[nodiscard]] double hamiltonian_adapted(const AdaptedState& a);

/// Hamilton's equations in Cartesian coordinates. Throws SingularityError at the origin.
[[nodiscard]] PhaseVelocity vector_field(const CartesianState& c);

/// Allocation-free form used by the integrator: writes dy/dt for state y.
void vector_field(const Vec6& y, Vec6& dydt);

[[nodiscard]] ConservedTriple conserved_triple(const CartesianState& c);

/// J = x p_x + y p_y + 2 z p_z.
[[nodiscard]] inline double dilational_momentum(const CartesianState& c)
{
    return c.x * c.px + c.y * c.py + 2.0 * c.z * c.pz;
}

/// p_theta = x p_y - y p_x.
[[nodiscard]] inline double angular_momentum(const CartesianState& c) { return c.x * c.py - c.y * c.px; }

} // namespace kh
