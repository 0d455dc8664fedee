#include "kh/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kh {

NotAnAOrbit::NotAnAOrbit(std::size_t zero_count)
    : std::runtime_error("not an A-orbit: z(t) has " + std::to_string(zero_count) + " recorded zeros, need 3"),
      count_(zero_count)
{
}

FundamentalDomain fundamental_domain(const Trajectory& traj, std::span<const double> zeros, std::size_t offset)
{
    if (zeros.size() < offset + 3)
        throw NotAnAOrbit(zeros.size() < offset ? 0 : zeros.size() - offset);
    FundamentalDomain dom;
    dom.t0 = zeros[offset];
    dom.t1 = zeros[offset + 1];
    dom.t2 = zeros[offset + 2];
    if (!(dom.t0 < dom.t1 && dom.t1 < dom.t2))
        throw DomainError("fundamental_domain: zeros are not strictly increasing");
    dom.a0 = traj.sample_adapted(dom.t0);
    dom.a2 = traj.sample_adapted(dom.t2);
    return dom;
}

SimilarityFactors similarity_factors(const FundamentalDomain& dom)
{
    SimilarityFactors f;
    f.log_lambda = dom.a2.s - dom.a0.s;
    f.lambda = std::exp(f.log_lambda);
    f.phi = dom.a2.theta - dom.a0.theta;
    f.t0 = dom.t0;
    f.t2 = dom.t2;
    if (std::abs(std::expm1(f.log_lambda)) >= kUnitDilationThreshold)
        f.t_col = dom.t0 - dom.length() / std::expm1(2.0 * f.log_lambda);
    return f;
}

// ---------------------------------------------------------------------------

namespace {

void check_clock_args(double t0, double t2)
{
    if (!(t2 > t0) || !std::isfinite(t0) || !std::isfinite(t2))
        throw DomainError("self-similar clock needs finite t0 < t2");
}

} // namespace

SelfSimilarClock::SelfSimilarClock(double t0, double t2, double lambda)
    : t0_(t0), t2_(t2), lambda_(lambda), log_lambda_(0), unit_(true)
{
    check_clock_args(t0, t2);
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw DomainError("self-similar clock needs lambda > 0");
    log_lambda_ = std::log(lambda);
    unit_ = std::abs(lambda - 1.0) < kUnitDilationThreshold;
}

SelfSimilarClock::SelfSimilarClock(const SimilarityFactors& f)
    : t0_(f.t0), t2_(f.t2), lambda_(f.lambda), log_lambda_(f.log_lambda), unit_(f.unit_dilation())
{
    check_clock_args(f.t0, f.t2);
}

std::optional<double> SelfSimilarClock::collision_time() const
{
    if (unit_)
        return std::nullopt;
    // t0 + T / (1 - lambda^2)
    return t0_ - (t2_ - t0_) / std::expm1(2.0 * log_lambda_);
}

double SelfSimilarClock::xi(double t) const
{
    if (unit_)
        return t;
    // log argument minus one: -(t - t0)(1 - lambda^2)/T
    const double arg_m1 = (t - t0_) * std::expm1(2.0 * log_lambda_) / (t2_ - t0_);
    if (!(arg_m1 > -1.0))
        throw DomainError("xi: time " + std::to_string(t) + " at or beyond the collision time");
    return 0.5 * std::log1p(arg_m1) / log_lambda_;
}

AffineTimeMap SelfSimilarClock::tau_shift(double psi) const
{
    if (unit_)
        return {t0_, 0.0, 1.0};
    const double two_l = 2.0 * log_lambda_;
    const double offset = (t2_ - t0_) * std::expm1(psi * two_l) / std::expm1(two_l);
    return {t0_, offset, std::exp(psi * two_l)};
}

double SelfSimilarClock::tau(double t) const
{
    if (unit_)
        return t;
    return tau_shift(std::floor(xi(t)))(t);
}

double SelfSimilarClock::tau_closed_form(double t) const
{
    if (unit_)
        return t;
    const double x = xi(t);
    const double exponent = 2.0 * x + 2.0 * std::floor(x);
    // (1 - lambda^e) / (1 - lambda^2)
    return t0_ + (t2_ - t0_) * std::expm1(exponent * log_lambda_) / std::expm1(2.0 * log_lambda_);
}

double SelfSimilarClock::domain_coordinate(double t) const
{
    if (unit_)
        return (t - t0_) / (t2_ - t0_);
    return xi(t);
}

long SelfSimilarClock::domain_index(double t) const
{
    return static_cast<long>(std::floor(domain_coordinate(t)));
}

AffineTimeMap SelfSimilarClock::domain_shift(long k) const
{
    if (unit_)
        return {t0_, static_cast<double>(k) * (t2_ - t0_), 1.0};
    return tau_shift(static_cast<double>(k));
}

double SelfSimilarClock::boundary(long k) const { return domain_shift(k)(t0_); }

// ---------------------------------------------------------------------------

std::string_view to_string(Classification c)
{
    switch (c) {
    case Classification::FutureCollision: return "FutureCollision";
    case Classification::PastCollision: return "PastCollision";
    case Classification::QuasiPeriodic: return "QuasiPeriodic";
    case Classification::PlanarLine: return "PlanarLine";
    case Classification::InsufficientZeros: return "insufficient-zeros";
    }
    return "unknown";
}

std::optional<Classification> classification_from_string(std::string_view name)
{
    for (auto c : {Classification::FutureCollision, Classification::PastCollision, Classification::QuasiPeriodic,
                   Classification::PlanarLine, Classification::InsufficientZeros})
        if (to_string(c) == name)
            return c;
    return std::nullopt;
}

Classification classify(double J, double tol_J)
{
    if (J < -tol_J)
        return Classification::FutureCollision;
    if (J > tol_J)
        return Classification::PastCollision;
    return Classification::QuasiPeriodic;
}

// ---------------------------------------------------------------------------

namespace {

/// (rho_phi o delta_lambda)^k applied to the source orbit at domain_shift(-k)(t).
AdaptedState replicate_on_domain(const Trajectory& traj, const SimilarityFactors& f, const SelfSimilarClock& clock,
                                 long k, double t)
{
    double source_time = clock.domain_shift(-k)(t);
    // Pulling back a domain boundary can land an ulp outside [t0, t2].
    const double slack = 1e-9 * (clock.t2() - clock.t0());
    if (source_time < clock.t0() && source_time > clock.t0() - slack)
        source_time = clock.t0();
    else if (source_time > clock.t2() && source_time < clock.t2() + slack)
        source_time = clock.t2();
    AdaptedState a = traj.sample_adapted(source_time);
    a.s += static_cast<double>(k) * f.log_lambda;
    a.theta += static_cast<double>(k) * f.phi;
    return a;
}

double max_abs_diff(const AdaptedState& a, const AdaptedState& b)
{
    const Vec6 x = a.to_array();
    const Vec6 y = b.to_array();
    double m = 0;
    for (std::size_t i = 0; i < 6; ++i)
        m = std::max(m, std::abs(x[i] - y[i]));
    return m;
}

/// Domains k != 0 lying entirely inside the trajectory, in increasing order.
std::vector<long> covered_shifts(const Trajectory& traj, const SelfSimilarClock& clock, long max_shift)
{
    constexpr long kHardCap = 100000;
    const long cap = max_shift > 0 ? std::min(max_shift, kHardCap) : kHardCap;
    const double lo = traj.t_min();
    const double hi = traj.t_max();
    std::vector<long> out;
    for (int dir : {1, -1}) {
        for (long m = 1; m <= cap; ++m) {
            const long k = dir * m;
            const double a = clock.boundary(k);
            const double b = clock.boundary(k + 1);
            if (!(a >= lo && b <= hi) || !(b > a))
                break;
            out.push_back(k);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<double> uniform_grid(double a, double b, std::size_t n)
{
    std::vector<double> g(n);
    if (n == 1) {
        g[0] = 0.5 * (a + b);
        return g;
    }
    for (std::size_t j = 0; j < n; ++j)
        g[j] = a + (b - a) * static_cast<double>(j) / static_cast<double>(n - 1);
    g.back() = b;
    return g;
}

} // namespace

AdaptedState replicate_adapted(const Trajectory& traj, const FundamentalDomain& dom, const SimilarityFactors& factors,
                               double t)
{
    if (factors.t0 != dom.t0 || factors.t2 != dom.t2)
        throw DomainError("replicate: similarity factors belong to a different domain");
    const SelfSimilarClock clock(factors);
    return replicate_on_domain(traj, factors, clock, clock.domain_index(t), t);
}

CartesianState replicate(const Trajectory& traj, const FundamentalDomain& dom, const SimilarityFactors& factors,
                         double t)
{
    return to_cartesian(replicate_adapted(traj, dom, factors, t));
}

SimilarityReport verify(const Trajectory& traj, const FundamentalDomain& dom, const VerifyOptions& opts)
{
    if (opts.grid_per_domain == 0)
        throw DomainError("verify: grid_per_domain must be positive");

    SimilarityReport report;
    report.factors = similarity_factors(dom);
    report.J = dom.a0.ps;
    report.classification = classify(report.J, opts.tol_J);
    report.zeros_found = traj.z_zeros().size();

    AdaptedState image = dom.a0;
    image.s += report.factors.log_lambda;
    image.theta += report.factors.phi;
    report.endpoint_residual = max_abs_diff(image, dom.a2);

    const SelfSimilarClock clock(report.factors);
    report.shifts_checked = covered_shifts(traj, clock, opts.max_shift);
    if (report.shifts_checked.empty())
        throw InsufficientCoverage("verify: trajectory covers no domain besides the fundamental one");

    double worst = 0;
    for (long k : report.shifts_checked) {
        for (double t : uniform_grid(clock.boundary(k), clock.boundary(k + 1), opts.grid_per_domain)) {
            const AdaptedState rep = replicate_on_domain(traj, report.factors, clock, k, t);
            const AdaptedState actual = traj.sample_adapted(t);
            worst = std::max(worst, max_abs_diff(actual, rep));
        }
    }
    report.domain_residual = worst;
    return report;
}

double quasi_periodicity_residual(const Trajectory& traj, const FundamentalDomain& dom, std::size_t grid_per_domain,
                                  long max_shift)
{
    const SimilarityFactors f = similarity_factors(dom);
    const SelfSimilarClock translation(dom.t0, dom.t2, 1.0);
    const std::vector<long> shifts = covered_shifts(traj, translation, max_shift);
    if (shifts.empty())
        throw InsufficientCoverage("quasi_periodicity_residual: trajectory covers no translated domain");

    const double period = dom.length();
    double worst = 0;
    for (long k : shifts) {
        for (double t : uniform_grid(dom.t0, dom.t2, grid_per_domain)) {
            AdaptedState expected = traj.sample_adapted(t);
            expected.theta += static_cast<double>(k) * f.phi;
            const AdaptedState actual = traj.sample_adapted(t + static_cast<double>(k) * period);
            worst = std::max(worst, max_abs_diff(actual, expected));
        }
    }
    return worst;
}

PiecewiseCurve::PiecewiseCurve(const Trajectory& traj, FundamentalDomain dom, long k_first, long k_last)
    : traj_(&traj), dom_(dom), factors_(similarity_factors(dom)), k_first_(k_first), k_last_(k_last)
{
    if (k_last < k_first)
        throw DomainError("extend: empty domain range");
    const SelfSimilarClock clock(factors_);
    boundaries_.reserve(static_cast<std::size_t>(k_last - k_first + 2));
    for (long k = k_first; k <= k_last + 1; ++k)
        boundaries_.push_back(clock.boundary(k));
}

CartesianState PiecewiseCurve::operator()(double t) const { return replicate(*traj_, dom_, factors_, t); }

PiecewiseCurve extend(const Trajectory& traj, const FundamentalDomain& dom, long k_first, long k_last)
{
    return PiecewiseCurve(traj, dom, k_first, k_last);
}

} // namespace kh
