#include "kh/phase_geometry.hpp"

#include <cmath>
#include <string>

namespace kh {

double heis_radius(double x, double y, double z)
{
    const double planar = x * x + y * y;
    return std::sqrt(std::hypot(planar, 4.0 * z));
}

double unwrap_angle(double angle, double reference)
{
    constexpr double two_pi = 2.0 * kPi;
    return angle + two_pi * std::round((reference - angle) / two_pi);
}

AdaptedState to_adapted(const CartesianState& c, std::optional<double> prev_theta)
{
    const double planar = c.planar_radius_sq();
    if (!(planar > 0.0) || !std::isfinite(planar))
        throw DomainError("to_adapted: state on the z-axis lies outside the adapted chart");

    const double w = 4.0 * c.z;
    const double radial = c.x * c.px + c.y * c.py;  // r * p_r

    AdaptedState a;
    a.s = 0.5 * std::log(std::hypot(planar, w));
    a.theta = std::atan2(c.y, c.x);
    if (prev_theta)
        a.theta = unwrap_angle(a.theta, *prev_theta);
    a.u = std::atan2(w, planar);
    a.ps = radial + 2.0 * c.z * c.pz;
    a.ptheta = c.x * c.py - c.y * c.px;
    a.pu = 0.25 * c.pz * planar - 2.0 * c.z * radial / planar;
    return a;
}

CartesianState to_cartesian(const AdaptedState& a)
{
    if (!(std::abs(a.u) < 0.5 * kPi))
        throw DomainError("to_cartesian: inclination u = " + std::to_string(a.u) + " outside (-pi/2, pi/2)");

    const double rho_sq = std::exp(2.0 * a.s);
    const double cos_u = std::cos(a.u);
    const double sin_u = std::sin(a.u);
    const double planar = rho_sq * cos_u;
    const double r = std::sqrt(planar);
    if (!(r > 0.0))
        throw DomainError("to_cartesian: planar radius underflows to zero");

    const double cos_t = std::cos(a.theta);
    const double sin_t = std::sin(a.theta);

    CartesianState c;
    c.x = r * cos_t;
    c.y = r * sin_t;
    c.z = 0.25 * rho_sq * sin_u;

    // Inverting p_s = r p_r + 2 z p_z and p_u = R p_z / 4 - 2 z r p_r / R for (p_r, p_z).
    c.pz = (4.0 * cos_u * a.pu + 2.0 * sin_u * a.ps) / rho_sq;
    const double p_r = (a.ps - 2.0 * c.z * c.pz) / r;
    const double p_t = a.ptheta / r;
    c.px = cos_t * p_r - sin_t * p_t;
    c.py = sin_t * p_r + cos_t * p_t;
    return c;
}

namespace {

void require_positive_scale(double lambda)
{
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw DomainError("dilate: factor must be positive and finite, got " + std::to_string(lambda));
}

} // namespace

CartesianState dilate(const CartesianState& c, double lambda)
{
    require_positive_scale(lambda);
    const double inv = 1.0 / lambda;
    return {lambda * c.x, lambda * c.y, lambda * lambda * c.z, inv * c.px, inv * c.py, inv * inv * c.pz};
}

AdaptedState dilate(const AdaptedState& a, double lambda)
{
    require_positive_scale(lambda);
    AdaptedState out = a;
    out.s += std::log(lambda);
    return out;
}

CartesianState rotate(const CartesianState& c, double phi)
{
    const double cs = std::cos(phi);
    const double sn = std::sin(phi);
    return {cs * c.x - sn * c.y, sn * c.x + cs * c.y, c.z, cs * c.px - sn * c.py, sn * c.px + cs * c.py, c.pz};
}

AdaptedState rotate(const AdaptedState& a, double phi)
{
    AdaptedState out = a;
    out.theta += phi;
    return out;
}

} // namespace kh
