// Self-similarity of zero-energy orbits: fundamental time domains, the dilation and
// rotation factors, the time reparametrizations, replication of a domain along the
// orbit, residual checks and the stratification by dilational momentum.
#pragma once

#include "kh/integrator.hpp"
#include "kh/phase_geometry.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace kh {

/// Three consecutive zeros t0 < t1 < t2 of z(t) and the adapted states at t0 and t2.
struct FundamentalDomain {
    double t0 = 0, t1 = 0, t2 = 0;
    AdaptedState a0;
    AdaptedState a2;

    [[nodiscard]] double length() const { return t2 - t0; }
};

/// Fewer than three zeros of z were found; the orbit cannot be analysed as an A-orbit.
class NotAnAOrbit : public std::runtime_error {
public:
    explicit NotAnAOrbit(std::size_t zero_count);
    [[nodiscard]] std::size_t zero_count() const { return count_; }

private:
    std::size_t count_;
};

/// The coverage of a trajectory does not include any replicated domain.
class InsufficientCoverage : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// |lambda - 1| below this threshold is treated as lambda = 1.
inline constexpr double kUnitDilationThreshold = 1e-13;

struct SimilarityFactors {
    double lambda = 1;
    /// log(lambda) = s(t2) - s(t0), kept separately for accuracy near lambda = 1.
    double log_lambda = 0;
    double phi = 0;
    double t0 = 0, t2 = 0;
    /// Collision time t0 + (t2 - t0) / (1 - lambda^2); absent when lambda = 1.
    std::optional<double> t_col;

    [[nodiscard]] bool unit_dilation() const { return !t_col.has_value(); }
};

/// Returns (t0, t1, t2) = zeros[offset .. offset+2] with adapted endpoint states.
/// Throws NotAnAOrbit when fewer than offset + 3 zeros are available.
[[nodiscard]] FundamentalDomain fundamental_domain(const Trajectory& traj, std::span<const double> zeros,
                                                   std::size_t offset = 0);

[[nodiscard]] SimilarityFactors similarity_factors(const FundamentalDomain& dom);

/// An affine time map t -> t0 + offset + slope (t - t0).
class AffineTimeMap {
public:
    AffineTimeMap() = default;
    AffineTimeMap(double t0, double offset, double slope) : t0_(t0), offset_(offset), slope_(slope) {}

    [[nodiscard]] double operator()(double t) const { return t0_ + offset_ + slope_ * (t - t0_); }
    [[nodiscard]] double inverse(double t) const { return t0_ + (t - t0_ - offset_) / slope_; }
    [[nodiscard]] double slope() const { return slope_; }
    [[nodiscard]] double offset() const { return offset_; }

private:
    double t0_ = 0;
    double offset_ = 0;
    double slope_ = 1;
};

/// Time bookkeeping of a self-similar orbit with domain [t0, t2] and dilation lambda.
///
/// For lambda != 1, successive domains have lengths (t2 - t0) lambda^(2k) and
/// accumulate at the collision time. With lambda = 1 the reparametrizations xi,
/// tau_psi and tau are the identity, and domains are translated by multiples of
/// t2 - t0 (see domain_shift).
class SelfSimilarClock {
public:
    SelfSimilarClock(double t0, double t2, double lambda);
    explicit SelfSimilarClock(const SimilarityFactors& f);

    [[nodiscard]] double t0() const { return t0_; }
    [[nodiscard]] double t2() const { return t2_; }
    [[nodiscard]] double lambda() const { return lambda_; }
    [[nodiscard]] bool unit_dilation() const { return unit_; }
    [[nodiscard]] std::optional<double> collision_time() const;

    /// xi(t) = log_lambda(1 - (t - t0)(1 - lambda^2)/(t2 - t0)) / 2; the identity for lambda = 1.
    /// Throws DomainError at or beyond the collision time.
    [[nodiscard]] double xi(double t) const;
    /// tau_psi; the identity for lambda = 1.
    [[nodiscard]] AffineTimeMap tau_shift(double psi) const;
    /// tau(t) = tau_{floor(xi(t))}(t).
    [[nodiscard]] double tau(double t) const;
    /// t0 + (t2 - t0)(1 - lambda^(2 xi + 2 floor(xi))) / (1 - lambda^2), evaluated independently of tau_shift.
    [[nodiscard]] double tau_closed_form(double t) const;

    /// Continuous domain coordinate: xi(t) for lambda != 1, (t - t0)/(t2 - t0) for lambda = 1.
    [[nodiscard]] double domain_coordinate(double t) const;
    /// floor(domain_coordinate(t)).
    [[nodiscard]] long domain_index(double t) const;
    /// Map sending [t0, t2] onto domain k: tau_k, or translation by k (t2 - t0) when lambda = 1.
    [[nodiscard]] AffineTimeMap domain_shift(long k) const;
    /// Start time of domain k, domain_shift(k)(t0).
    [[nodiscard]] double boundary(long k) const;

private:
    double t0_, t2_, lambda_, log_lambda_;
    bool unit_;
};

enum class Classification { FutureCollision, PastCollision, QuasiPeriodic, PlanarLine, InsufficientZeros };

[[nodiscard]] std::string_view to_string(Classification c);
[[nodiscard]] std::optional<Classification> classification_from_string(std::string_view name);

/// Stratification by the sign of J: below -tol_J future collision, above tol_J past collision.
[[nodiscard]] Classification classify(double J, double tol_J = 1e-9);

/// c(t) on any domain k covered by the extension: (rho_phi o delta_lambda)^k applied to the
/// source orbit at domain_shift(-k)(t). Throws DomainError when the pulled-back time is
/// outside the trajectory.
[[nodiscard]] CartesianState replicate(const Trajectory& traj, const FundamentalDomain& dom,
                                       const SimilarityFactors& factors, double t);
[[nodiscard]] AdaptedState replicate_adapted(const Trajectory& traj, const FundamentalDomain& dom,
                                             const SimilarityFactors& factors, double t);

struct VerifyOptions {
    std::size_t grid_per_domain = 512;
    double tol_J = 1e-9;
    /// Largest |k| of replicated domains to check; 0 checks every domain the trajectory covers.
    long max_shift = 0;
};

struct SimilarityReport {
    SimilarityFactors factors;
    double J = 0;
    Classification classification = Classification::QuasiPeriodic;
    double endpoint_residual = 0;
    double domain_residual = 0;
    std::size_t zeros_found = 0;
    /// Replicated domains k != 0 entering domain_residual.
    std::vector<long> shifts_checked;
};

/// Residuals of the endpoint identity c(t2) = rho_phi delta_lambda c(t0) and of the
/// replication identity over every covered domain, in adapted coordinates.
/// Throws InsufficientCoverage when no domain besides [t0, t2] is covered.
[[nodiscard]] SimilarityReport verify(const Trajectory& traj, const FundamentalDomain& dom,
                                      const VerifyOptions& opts = {});

/// Max over covered domains k != 0 of |a(t + k T) - rho_{k phi} a(t)| with no dilation
/// and no reparametrization: periodicity modulo rotation, expected when J = 0.
[[nodiscard]] double quasi_periodicity_residual(const Trajectory& traj, const FundamentalDomain& dom,
                                                std::size_t grid_per_domain = 512, long max_shift = 0);

/// Piecewise description of the orbit built from copies of one fundamental domain.
class PiecewiseCurve {
public:
    PiecewiseCurve(const Trajectory& traj, FundamentalDomain dom, long k_first, long k_last);

    [[nodiscard]] long k_first() const { return k_first_; }
    [[nodiscard]] long k_last() const { return k_last_; }
    /// Start times of domains k_first .. k_last + 1.
    [[nodiscard]] const std::vector<double>& boundaries() const { return boundaries_; }
    [[nodiscard]] const SimilarityFactors& factors() const { return factors_; }
    /// State at t via replicate. The trajectory must outlive the curve.
    [[nodiscard]] CartesianState operator()(double t) const;

private:
    const Trajectory* traj_;
    FundamentalDomain dom_;
    SimilarityFactors factors_;
    long k_first_, k_last_;
    std::vector<double> boundaries_;
};

[[nodiscard]] PiecewiseCurve extend(const Trajectory& traj, const FundamentalDomain& dom, long k_first, long k_last);

} // namespace kh
