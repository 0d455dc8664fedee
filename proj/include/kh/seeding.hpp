// Zero-energy initial conditions on the z = 0 plane.
//
// Every off-axis phase point with u = 0 is, up to a rotation and a dilation, one with
// s = 0 and theta = 0, i.e. (x, y, z) = (1, 0, 0). What remains is (p_s, p_theta) and
// the choice between the two roots p_u of the H = 0 constraint.
#pragma once

#include "kh/phase_geometry.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace kh {

struct SeedSpec {
    double ps = 0;      ///< dilational momentum J
    double ptheta = 0;  ///< angular momentum
    int branch = 1;     ///< +1 or -1: which root of the p_u quadratic
    /// Provenance when drawn by sample_seeds.
    std::optional<std::uint64_t> rng_seed;
    std::optional<std::uint64_t> index;

    bool operator==(const SeedSpec&) const = default;
};

/// Roots p_u = -p_theta/2 +- sqrt(1/(4 pi) - p_s^2)/2 of the H = 0 constraint at u = 0,
/// ordered (minus, plus); nullopt when the discriminant is negative.
[[nodiscard]] std::optional<std::pair<double, double>> pu_branches(double ps, double ptheta);

/// Interval of p_s on which the H = 0 constraint at inclination u has real p_u,
/// -tan(u) p_theta -+ sqrt(1 / (4 pi cos u)). Throws DomainError for |u| >= pi/2.
[[nodiscard]] std::pair<double, double> j_bounds(double u, double ptheta);

/// Discriminant cos(u)/(4 pi) - (cos(u) p_s + sin(u) p_theta)^2 of the H = 0 constraint in p_u.
[[nodiscard]] double zero_energy_discriminant(double u, double ps, double ptheta);

/// Adapted state (0, 0, 0, p_s, p_theta, p_u(branch)) in Cartesian coordinates.
/// Throws DomainError when p_u is not real or branch is not +-1.
[[nodiscard]] CartesianState seed_zero_energy(const SeedSpec& spec);

/// Box in the (p_s, p_theta) plane; degenerate sides (min == max) sample a line or point.
struct SeedRegion {
    double ps_min = -kMaxDilationalMomentum + 1e-6;
    double ps_max = kMaxDilationalMomentum - 1e-6;
    double ptheta_min = -1.0;
    double ptheta_max = 1.0;
    /// Points with |p_s| > 1/(2 sqrt(pi)) - margin are rejected.
    double margin = 1e-6;
};

/// n seeds drawn uniformly from the admissible part of `region`. Seed i depends only on
/// (rng_seed, i), so any subset can be regenerated independently.
/// Throws DomainError for n == 0 or an empty admissible region.
[[nodiscard]] std::vector<SeedSpec> sample_seeds(std::size_t n, std::uint64_t rng_seed, const SeedRegion& region = {});

/// The i-th seed of sample_seeds(., rng_seed, region).
[[nodiscard]] SeedSpec sample_seed(std::uint64_t rng_seed, std::uint64_t index, const SeedRegion& region = {});

} // namespace kh
