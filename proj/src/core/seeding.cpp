#include "kh/seeding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace kh {

namespace {

constexpr double kQuarterInvPi = 1.0 / (4.0 * kPi);

// SplitMix64 finalizer; seeds are a pure function of (rng_seed, index, attempt, lane).
std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t counter_bits(std::uint64_t seed, std::uint64_t index, std::uint64_t attempt, std::uint64_t lane)
{
    std::uint64_t h = mix64(seed);
    h = mix64(h ^ index);
    h = mix64(h ^ (attempt << 2 | lane));
    return h;
}

double unit_interval(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

void validate_region(const SeedRegion& r)
{
    const bool finite = std::isfinite(r.ps_min) && std::isfinite(r.ps_max) && std::isfinite(r.ptheta_min)
                        && std::isfinite(r.ptheta_max) && std::isfinite(r.margin);
    if (!finite || r.ps_min > r.ps_max || r.ptheta_min > r.ptheta_max || r.margin < 0.0)
        throw DomainError("seed region must be a finite box with min <= max and margin >= 0");
    const double limit = kMaxDilationalMomentum - r.margin;
    if (std::max(r.ps_min, -limit) > std::min(r.ps_max, limit))
        throw DomainError("seed region has no admissible p_s (|p_s| must not exceed 1/(2 sqrt(pi)) - margin)");
}

} // namespace

std::optional<std::pair<double, double>> pu_branches(double ps, double ptheta)
{
    double disc = kQuarterInvPi - ps * ps;
    if (disc < 0.0 && disc > -4.0 * std::numeric_limits<double>::epsilon() * kQuarterInvPi)
        disc = 0.0;
    if (disc < 0.0)
        return std::nullopt;
    const double half_root = 0.5 * std::sqrt(disc);
    return std::make_pair(-0.5 * ptheta - half_root, -0.5 * ptheta + half_root);
}

std::pair<double, double> j_bounds(double u, double ptheta)
{
    if (!(std::abs(u) < 0.5 * kPi))
        throw DomainError("j_bounds: inclination outside (-pi/2, pi/2)");
    const double centre = -std::tan(u) * ptheta;
    const double half_width = std::sqrt(kQuarterInvPi / std::cos(u));
    return {centre - half_width, centre + half_width};
}

double zero_energy_discriminant(double u, double ps, double ptheta)
{
    const double cu = std::cos(u);
    const double lin = cu * ps + std::sin(u) * ptheta;
    return kQuarterInvPi * cu - lin * lin;
}

CartesianState seed_zero_energy(const SeedSpec& spec)
{
    if (spec.branch != 1 && spec.branch != -1)
        throw DomainError("seed_zero_energy: branch must be +1 or -1");
    const auto roots = pu_branches(spec.ps, spec.ptheta);
    if (!roots)
        throw DomainError("seed_zero_energy: |p_s| = " + std::to_string(std::abs(spec.ps))
                          + " exceeds 1/(2 sqrt(pi)); p_u would be complex");
    const double pu = spec.branch > 0 ? roots->second : roots->first;
    return to_cartesian(AdaptedState{0.0, 0.0, 0.0, spec.ps, spec.ptheta, pu});
}

SeedSpec sample_seed(std::uint64_t rng_seed, std::uint64_t index, const SeedRegion& region)
{
    validate_region(region);
    const double limit = kMaxDilationalMomentum - region.margin;
    constexpr std::uint64_t kMaxAttempts = 100000;
    for (std::uint64_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
        const double ps = region.ps_min + (region.ps_max - region.ps_min) * unit_interval(counter_bits(rng_seed, index, attempt, 0));
        if (std::abs(ps) > limit)
            continue;
        const double pt = region.ptheta_min
                          + (region.ptheta_max - region.ptheta_min) * unit_interval(counter_bits(rng_seed, index, attempt, 1));
        const int branch = (counter_bits(rng_seed, index, attempt, 2) >> 63) ? 1 : -1;
        SeedSpec spec{ps, pt, branch, rng_seed, index};
        return spec;
    }
    throw DomainError("sample_seed: admissible part of the region too small for rejection sampling");
}

std::vector<SeedSpec> sample_seeds(std::size_t n, std::uint64_t rng_seed, const SeedRegion& region)
{
    if (n == 0)
        throw DomainError("sample_seeds: n must be positive");
    validate_region(region);
    std::vector<SeedSpec> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(sample_seed(rng_seed, i, region));
    return out;
}

} // namespace kh
