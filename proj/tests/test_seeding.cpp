#include "kh/dynamics.hpp"
#include "kh/seeding.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace kh;
using kh::test::uniform;

namespace {

constexpr double kInvSqrtPi = std::numbers::inv_sqrtpi;

/// Largest real root of a concave-down quadratic in p_s, by bisection on the discriminant.
double discriminant_edge(double u, double ptheta, double inside, double outside)
{
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (inside + outside);
        (zero_energy_discriminant(u, mid, ptheta) >= 0 ? inside : outside) = mid;
    }
    return 0.5 * (inside + outside);
}

} // namespace

TEST_CASE("p_u branches: worked values")
{
    auto b = pu_branches(0, 0);
    REQUIRE(b);
    CHECK(b->first == doctest::Approx(-0.25 * kInvSqrtPi));
    CHECK(b->second == doctest::Approx(0.25 * kInvSqrtPi));
    CHECK(b->second == doctest::Approx(0.14104740).epsilon(1e-7));

    b = pu_branches(0.5 * kInvSqrtPi, 5);
    REQUIRE(b);
    CHECK(b->first == doctest::Approx(-2.5));
    CHECK(b->second == doctest::Approx(-2.5));

    CHECK_FALSE(pu_branches(0.3, 0));
    CHECK(0.5 * kInvSqrtPi == doctest::Approx(0.28209479).epsilon(1e-8));
}

TEST_CASE("p_u branches solve the zero-energy constraint")
{
    for (int i = 0; i < 1000; ++i) {
        const double ps = uniform(-0.28, 0.28), pt = uniform(-3, 3);
        const auto b = pu_branches(ps, pt);
        REQUIRE(b);
        CHECK(b->first <= b->second);
        for (double pu : {b->first, b->second})
            CHECK(std::abs(hamiltonian_adapted({0, 0, 0, ps, pt, pu})) < 1e-14 * std::max(1.0, pt * pt));
    }
}

TEST_CASE("J bounds")
{
    for (double pt : {-3.0, 0.0, 0.4, 7.0}) {
        const auto [lo, hi] = j_bounds(0, pt);
        CHECK(lo == doctest::Approx(-0.5 * kInvSqrtPi));
        CHECK(hi == doctest::Approx(0.5 * kInvSqrtPi));
    }
    CHECK_THROWS_AS((void)j_bounds(0.5 * kPi, 1), DomainError);

    // Oracle: the edges of the real-p_u interval found by bisection on the discriminant.
    for (int i = 0; i < 200; ++i) {
        const double u = uniform(-1.4, 1.4), pt = uniform(-2, 2);
        const auto [lo, hi] = j_bounds(u, pt);
        const double centre = 0.5 * (lo + hi);
        CHECK(zero_energy_discriminant(u, centre, pt) > 0);
        CHECK(hi == doctest::Approx(discriminant_edge(u, pt, centre, centre + 100)).epsilon(1e-9));
        CHECK(lo == doctest::Approx(discriminant_edge(u, pt, centre, centre - 100)).epsilon(1e-9));
    }
    const auto [lo, hi] = j_bounds(kPi / 4, 1);
    const double w = std::sqrt(std::sqrt(2.0) / (4 * kPi));
    CHECK(lo == doctest::Approx(-1 - w));
    CHECK(hi == doctest::Approx(-1 + w));
}

TEST_CASE("zero-energy seeds: worked values")
{
    const CartesianState c = seed_zero_energy({0, 0, 1, {}, {}});
    CHECK(test::max_abs_diff(c.to_array(), {1, 0, 0, 0, 0, kInvSqrtPi}) < 1e-15);
    CHECK(std::abs(hamiltonian_cartesian(c)) < 1e-16);

    const CartesianState d = seed_zero_energy({0, 1, 1, {}, {}});
    CHECK(to_adapted(d).pu == doctest::Approx(-0.5 + 0.25 * kInvSqrtPi));
    CHECK(std::abs(hamiltonian_cartesian(d)) < 1e-12);

    const CartesianState e = seed_zero_energy({-0.2, 0.5, -1, {}, {}});
    CHECK(dilational_momentum(e) == doctest::Approx(-0.2));

    CHECK_THROWS_AS((void)seed_zero_energy({0.3, 0, 1, {}, {}}), DomainError);
    CHECK_THROWS_AS((void)seed_zero_energy({0.1, 0, 0, {}, {}}), DomainError);
}

TEST_CASE("seed states lie on the normalized slice")
{
    for (const SeedSpec& s : sample_seeds(300, 5)) {
        const CartesianState c = seed_zero_energy(s);
        CHECK(c.x == 1.0);
        CHECK(c.y == 0.0);
        CHECK(c.z == 0.0);
        const ConservedTriple q = conserved_triple(c);
        CHECK(std::abs(q.H) < 1e-15);
        CHECK(q.J == doctest::Approx(s.ps).epsilon(1e-15));
        CHECK(q.ptheta == doctest::Approx(s.ptheta).epsilon(1e-15));
        const AdaptedState a = to_adapted(c);
        const double gamma_part = a.pu + 0.5 * a.ptheta;
        CHECK((gamma_part >= 0 ? 1 : -1) == s.branch);
    }
}

TEST_CASE("sampling is deterministic and stays in the region")
{
    const SeedRegion region{-0.1, 0.2, -0.5, 0.5, 1e-6};
    const auto a = sample_seeds(500, 42, region);
    const auto b = sample_seeds(500, 42, region);
    CHECK(a == b);
    CHECK(sample_seeds(1, 42, region) == sample_seeds(1, 42, region));
    std::set<int> branches;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i] == sample_seed(42, i, region));
        CHECK(a[i].ps >= -0.1);
        CHECK(a[i].ps <= 0.2);
        CHECK(a[i].ptheta >= -0.5);
        CHECK(a[i].ptheta <= 0.5);
        CHECK(a[i].index == i);
        CHECK(a[i].rng_seed == 42u);
        branches.insert(a[i].branch);
    }
    CHECK(branches.size() == 2);
    CHECK_FALSE(sample_seeds(5, 43, region) == sample_seeds(5, 42, region));

    // Default region: every |p_s| clear of the bound by the margin.
    const SeedRegion def;
    for (const SeedSpec& s : sample_seeds(2000, 1))
        CHECK(std::abs(s.ps) <= kMaxDilationalMomentum - def.margin);
}

TEST_CASE("sampling a line of the region")
{
    SeedRegion line;
    line.ps_min = line.ps_max = 0.0;
    for (const SeedSpec& s : sample_seeds(100, 3, line))
        CHECK(s.ps == 0.0);
}

TEST_CASE("sampling rejects empty requests")
{
    CHECK_THROWS_AS((void)sample_seeds(0, 1), DomainError);
    SeedRegion outside;
    outside.ps_min = 0.29;
    outside.ps_max = 0.5;
    CHECK_THROWS_AS((void)sample_seeds(3, 1, outside), DomainError);
    SeedRegion inverted;
    inverted.ptheta_min = 1;
    inverted.ptheta_max = -1;
    CHECK_THROWS_AS((void)sample_seeds(3, 1, inverted), DomainError);
}
