// Phase space of the Kepler-Heisenberg problem: Cartesian and adapted charts,
// and the rotation / Carnot dilation symmetries acting on both.
#pragma once

#include <array>
#include <numbers>
#include <optional>
#include <stdexcept>

namespace kh {

inline constexpr double kPi = std::numbers::pi;

/// Upper bound on |J| for orbits that cross the z = 0 plane: 1 / (2 sqrt(pi)).
inline constexpr double kMaxDilationalMomentum = 0.5 * std::numbers::inv_sqrtpi;

using Vec6 = std::array<double, 6>;

/// Input outside the domain of a chart, map or formula.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// The collision singularity at the origin was reached.
class SingularityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Point of T*H in global coordinates (x, y, z, p_x, p_y, p_z).
struct CartesianState {
    double x = 0, y = 0, z = 0;
    double px = 0, py = 0, pz = 0;

    [[nodiscard]] Vec6 to_array() const { return {x, y, z, px, py, pz}; }
    [[nodiscard]] static CartesianState from_array(const Vec6& v)
    {
        return {v[0], v[1], v[2], v[3], v[4], v[5]};
    }
    /// Squared planar radius x^2 + y^2.
    [[nodiscard]] double planar_radius_sq() const { return x * x + y * y; }

    bool operator==(const CartesianState&) const = default;
};

/// Point of T*H in the adapted chart (s, theta, u, p_s, p_theta, p_u).
///
/// s is the log Heisenberg radius, theta the planar angle kept as a continuous
/// lift (never reduced mod 2 pi), u the inclination angle in (-pi/2, pi/2).
/// Dilations translate s, rotations translate theta; u and all momenta are
/// invariant under both.
struct AdaptedState {
    double s = 0, theta = 0, u = 0;
    double ps = 0, ptheta = 0, pu = 0;

    [[nodiscard]] Vec6 to_array() const { return {s, theta, u, ps, ptheta, pu}; }
    [[nodiscard]] static AdaptedState from_array(const Vec6& v)
    {
        return {v[0], v[1], v[2], v[3], v[4], v[5]};
    }

    bool operator==(const AdaptedState&) const = default;
};

/// ((x^2+y^2)^2 + 16 z^2)^(1/4); zero only at the origin.
[[nodiscard]] double heis_radius(double x, double y, double z);
[[nodiscard]] inline double heis_radius(const CartesianState& c) { return heis_radius(c.x, c.y, c.z); }

/// Lift of `angle` to the branch closest to `reference` (differs by a multiple of 2 pi).
[[nodiscard]] double unwrap_angle(double angle, double reference);

/// Cartesian -> adapted. Throws DomainError on the z-axis, where the chart is undefined.
/// When `prev_theta` is given, theta is returned on the lift closest to it.
[[nodiscard]] AdaptedState to_adapted(const CartesianState& c, std::optional<double> prev_theta = std::nullopt);

/// Adapted -> Cartesian, the exact inverse of to_adapted. Throws DomainError for |u| >= pi/2.
[[nodiscard]] CartesianState to_cartesian(const AdaptedState& a);

/// Carnot dilation delta_lambda. Throws DomainError unless lambda > 0.
[[nodiscard]] CartesianState dilate(const CartesianState& c, double lambda);
[[nodiscard]] AdaptedState dilate(const AdaptedState& a, double lambda);

/// Rotation rho_phi about the z-axis.
[[nodiscard]] CartesianState rotate(const CartesianState& c, double phi);
[[nodiscard]] AdaptedState rotate(const AdaptedState& a, double phi);

} // namespace kh
