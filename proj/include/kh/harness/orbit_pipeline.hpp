// One orbit from initial condition to similarity report.
//
// The analysis run goes in the direction in which the orbit expands (backward in time
// for J < 0, forward otherwise), so the fundamental domain nearest the seed is the
// smallest one and the replicated domains are larger copies of it. A second run in
// the opposite direction, without dense output, locates the collision.
#pragma once

#include "kh/integrator.hpp"
#include "kh/seeding.hpp"
#include "kh/similarity.hpp"

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace kh::harness {

/// Integrator settings of the analysis. Tighter than the integrator defaults: on close
/// passages to the z-axis p_u changes fast, and the replicated-domain check turns the
/// error of lambda and of the domain endpoints into a time shift there.
[[nodiscard]] inline IntegratorOptions analysis_integrator_defaults()
{
    IntegratorOptions o;
    o.rel_tol = 1e-12;
    o.abs_tol = 1e-12;
    return o;
}

struct OrbitConfig {
    IntegratorOptions integrator = analysis_integrator_defaults();
    VerifyOptions verify;
    /// Number of fundamental domains the analysis run covers (>= 2).
    std::size_t domains = 3;
    /// Time budget of the analysis run.
    double analysis_span = 1e20;
    /// Time budget of the collision run; 0 skips it.
    double collision_span = 1e7;
    /// rel_tol = abs_tol of the collision run. Near J = 0 it crosses thousands of
    /// domains, and the drift of J it accumulates moves the observed collision time
    /// by roughly drift / J relative; hence tighter than the analysis run.
    double collision_tol = 1e-12;
    /// Skip the collision run when reaching the collision radius would take more
    /// domains than this (|lambda - 1| tiny); t_col_observed is then absent.
    double collision_max_domains = 1e6;
    /// Keep the analysis trajectory in the result (needed for time series output).
    bool keep_trajectory = false;

    /// Throws ConfigError on inconsistent values.
    void validate() const;
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Largest deviation of the conserved quantities from their initial values, taken
/// over the accepted step endpoints of a trajectory.
struct ConservationCheck {
    double max_abs_H = 0;
    double max_dJ = 0;
    double max_dptheta = 0;
    /// Largest energy error of a single step before projection, relative to max(1, K).
    double max_step_energy_defect = 0;
};

struct OrbitResult {
    CartesianState initial;
    ConservedTriple invariants;
    std::optional<SeedSpec> seed;

    Classification classification = Classification::InsufficientZeros;
    Termination termination = Termination::SpanEnd;
    bool planar = false;
    bool axis_proximity = false;
    bool energy_drift_exceeded = false;
    /// Zeros of z on the analysis run, increasing.
    std::vector<double> zeros;
    ConservationCheck conservation;

    std::optional<FundamentalDomain> domain;
    std::optional<SimilarityReport> report;
    /// Observed collision time from the collision run.
    std::optional<double> t_col_observed;
    std::optional<Termination> collision_termination;

    /// Empty on success; otherwise why no similarity report was produced.
    std::string failure;

    std::shared_ptr<const Trajectory> trajectory;

    [[nodiscard]] bool ok() const { return failure.empty(); }
    /// A-orbit candidate: neither planar nor close to the z-axis.
    [[nodiscard]] bool a_candidate() const { return !planar && !axis_proximity; }
};

[[nodiscard]] ConservationCheck conservation_check(const Trajectory& traj);

/// Integrates, locates the fundamental domain, verifies and (for J != 0) observes the
/// collision. Analysis failures are reported in-band through OrbitResult::failure; only
/// invalid configuration throws.
[[nodiscard]] OrbitResult analyze_orbit(const CartesianState& c0, const OrbitConfig& cfg);
[[nodiscard]] OrbitResult analyze_seed(const SeedSpec& seed, const OrbitConfig& cfg);

} // namespace kh::harness
