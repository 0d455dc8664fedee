#include "kh/dynamics.hpp"

#include <cmath>

namespace kh {

namespace {

constexpr double kInvFourPi = 1.0 / (4.0 * kPi);

/// (x^2+y^2)^2 + 16 z^2, the squared denominator of the potential.
double potential_radicand(double planar, double z)
{
    const double q = planar * planar + 16.0 * z * z;
    if (!(q > 0.0))
        throw SingularityError("collision singularity: state at the origin");
    return q;
}

} // namespace

double kinetic_energy(const CartesianState& c)
{
    const double PX = c.px - 0.5 * c.y * c.pz;
    const double PY = c.py + 0.5 * c.x * c.pz;
    return 0.5 * (PX * PX + PY * PY);
}

double potential_energy(const CartesianState& c)
{
    const double q = potential_radicand(c.planar_radius_sq(), c.z);
    return -1.0 / (8.0 * kPi * std::sqrt(q));
}

double hamiltonian_cartesian(const CartesianState& c) { return kinetic_energy(c) + potential_energy(c); }

double hamiltonian_adapted(const AdaptedState& a)
{
    if (!(std::abs(a.u) < 0.5 * kPi))
        throw DomainError("hamiltonian_adapted: inclination outside (-pi/2, pi/2)");
    const double cu = std::cos(a.u);
    const double su = std::sin(a.u);
    const double quad = cu * a.ps * a.ps + 2.0 * su * a.ps * a.ptheta + a.ptheta * a.ptheta / cu
                        + 4.0 * cu * a.ptheta * a.pu + 4.0 * cu * a.pu * a.pu;
    return 0.5 * std::exp(-2.0 * a.s) * (quad - kInvFourPi);
}

void vector_field(const Vec6& y, Vec6& dydt)
{
    const double x = y[0], yy = y[1], z = y[2];
    const double px = y[3], py = y[4], pz = y[5];

    const double PX = px - 0.5 * yy * pz;
    const double PY = py + 0.5 * x * pz;
    const double planar = x * x + yy * yy;
    const double q = potential_radicand(planar, z);
    // grad U = (x R / (4 pi), y R / (4 pi), 2 z / pi) / q^(3/2)
    const double inv_q32 = 1.0 / (q * std::sqrt(q));

    dydt[0] = PX;
    dydt[1] = PY;
    dydt[2] = 0.5 * (x * PY - yy * PX);
    dydt[3] = -0.5 * pz * PY - x * planar * kInvFourPi * inv_q32;
    dydt[4] = 0.5 * pz * PX - yy * planar * kInvFourPi * inv_q32;
    dydt[5] = -2.0 * z * inv_q32 / kPi;
}

PhaseVelocity vector_field(const CartesianState& c)
{
    Vec6 d{};
    vector_field(c.to_array(), d);
    return {d[0], d[1], d[2], d[3], d[4], d[5]};
}

ConservedTriple conserved_triple(const CartesianState& c)
{
    return {hamiltonian_cartesian(c), angular_momentum(c), dilational_momentum(c)};
}

} // namespace kh
