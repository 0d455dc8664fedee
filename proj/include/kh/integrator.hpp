// Adaptive integration of Hamilton's equations with dense output and z = 0 event detection.
//
// The stepper is the Dormand-Prince 8(5,3) pair with a sixth-order continuous
// extension. The error norm weights each coordinate by the power of the Heisenberg
// radius it carries under the Carnot dilation (x, y ~ rho; z ~ rho^2; p_x, p_y ~ 1/rho;
// p_z ~ 1/rho^2), so step control is invariant under delta_lambda and an orbit
// shrinking towards collision keeps the same relative accuracy as at unit scale.
#pragma once

#include "kh/dynamics.hpp"
#include "kh/phase_geometry.hpp"

#include <array>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace kh {

struct IntegratorOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-10;
    /// Cap on |t_end - t_start|; longer requested spans are truncated.
    double max_span = 1e7;
    /// Stop once the Heisenberg radius drops below this value.
    double collision_radius = 1e-6;
    /// Raise the axis-proximity flag once the planar radius drops below this value.
    double axis_radius = 1e-8;
    /// Width of the bracket left by bisection when refining a zero of z.
    double zero_refine_tol = 1e-14;
    /// Bound on |H(t) - level| / max(1, K(t)) checked at accepted step endpoints.
    double energy_drift_bound = 1e-9;
    std::size_t max_steps = 50'000'000;
    /// Stop at the end of the step where the n-th zero of z is found (0 = never).
    std::size_t max_zeros = 0;
    /// Keep the per-step interpolants; without them only events and endpoints survive.
    bool dense_output = true;
    /// After each accepted step, return the state to the initial energy level by a
    /// correction that leaves J and p_theta unchanged to first order. Without it a
    /// zero-energy orbit keeps the small energy error of its closest approach, and
    /// dJ/dt = 2H turns that into a drift of J proportional to elapsed time.
    bool project_energy = true;
    /// Level the projection aims at; the initial energy when unset. Zero-energy seeds
    /// carry an energy of rounding size, which dJ/dt = 2H would turn into a drift over
    /// long spans, so callers analysing the zero-energy family pass 0 here.
    std::optional<double> energy_level;
    /// Also require the local error estimate, mapped into adapted coordinates, to meet
    /// the tolerances. Tightens steps on close passages to the z-axis.
    bool adapted_error_control = true;

    /// Throws DomainError if any tolerance is nonpositive or nonfinite.
    void validate() const;
};

struct TimeSpan {
    double start = 0;
    double end = 0;
};

enum class Termination {
    SpanEnd,        ///< reached the requested end time
    Collision,      ///< Heisenberg radius fell below collision_radius
    StepUnderflow,  ///< step size fell below the time resolution; collision suspected
    ZeroLimit,      ///< max_zeros zeros of z recorded
    StepLimit,      ///< max_steps accepted steps taken
};

[[nodiscard]] std::string_view to_string(Termination t);

struct IntegrationStats {
    std::size_t steps = 0;
    std::size_t rejections = 0;
    std::size_t evaluations = 0;
    double min_step = std::numeric_limits<double>::infinity();
    /// max over accepted endpoints, before projection, of |H - level| / max(1, K), where
    /// level is energy_level or H(0).
    double max_energy_drift = 0;
};

/// One accepted step with its continuous extension. Segment times run in the
/// integration direction: t_from() is where the step began, t_to() where it ended.
class DenseSegment {
public:
    static constexpr std::size_t kOrder = 8;  // number of interpolation coefficient vectors

    DenseSegment(double t_from, double t_to, const std::array<Vec6, kOrder>& coeffs, const Vec6& end_state,
                 double theta_from);

    [[nodiscard]] double t_from() const { return t_from_; }
    [[nodiscard]] double t_to() const { return t_to_; }
    [[nodiscard]] double t_lo() const { return t_from_ < t_to_ ? t_from_ : t_to_; }
    [[nodiscard]] double t_hi() const { return t_from_ < t_to_ ? t_to_ : t_from_; }
    [[nodiscard]] bool contains(double t) const { return t >= t_lo() && t <= t_hi(); }

    /// Interpolated state; exact stored state at either endpoint.
    [[nodiscard]] Vec6 state(double t) const;
    [[nodiscard]] double z(double t) const;
    [[nodiscard]] Vec6 from_state() const { return coeffs_[0]; }
    [[nodiscard]] const Vec6& to_state() const { return end_; }
    /// Continuous lift of the planar angle at t_from().
    [[nodiscard]] double theta_from() const { return theta_from_; }
    /// Continuous lift of the planar angle at t, unwrapped along kLiftSubsteps points
    /// between t_from() and t, since a near-axis passage can turn it by more than pi in one step.
    [[nodiscard]] double theta_at(double t) const;

    static constexpr int kLiftSubsteps = 16;

private:
    double t_from_;
    double t_to_;
    std::array<Vec6, kOrder> coeffs_;
    Vec6 end_;
    double theta_from_;
};

/// Numerical solution on [t_min(), t_max()]; immutable once returned by integrate().
class Trajectory {
public:
    [[nodiscard]] double t_start() const { return t_start_; }
    [[nodiscard]] double t_final() const { return t_final_; }
    [[nodiscard]] double t_min() const { return t_start_ < t_final_ ? t_start_ : t_final_; }
    [[nodiscard]] double t_max() const { return t_start_ < t_final_ ? t_final_ : t_start_; }
    /// +1 for forward integration, -1 for backward.
    [[nodiscard]] int direction() const { return direction_; }

    [[nodiscard]] const CartesianState& initial_state() const { return initial_; }
    [[nodiscard]] const CartesianState& final_state() const { return final_; }
    [[nodiscard]] const ConservedTriple& initial_invariants() const { return invariants0_; }

    /// Segments ordered by increasing time (empty without dense output).
    [[nodiscard]] std::span<const DenseSegment> segments() const { return segments_; }
    [[nodiscard]] bool has_dense_output() const { return !segments_.empty(); }

    /// Zeros of z(t) recorded during integration, in increasing time order.
    [[nodiscard]] const std::vector<double>& z_zeros() const { return zeros_; }
    [[nodiscard]] bool planar() const { return planar_; }
    [[nodiscard]] bool axis_proximity() const { return axis_proximity_; }
    [[nodiscard]] bool energy_drift_exceeded() const { return drift_exceeded_; }
    [[nodiscard]] Termination termination() const { return termination_; }
    /// Time of the collision event, or of the step underflow that suggests one.
    [[nodiscard]] std::optional<double> collision_time() const { return collision_time_; }
    [[nodiscard]] const IntegrationStats& stats() const { return stats_; }

    /// Segment containing t. Throws DomainError outside [t_min, t_max].
    [[nodiscard]] const DenseSegment& segment_at(double t) const;

    /// Interpolated Cartesian state.
    [[nodiscard]] CartesianState sample(double t) const;
    /// Interpolated adapted state with theta on the trajectory's continuous lift.
    [[nodiscard]] AdaptedState sample_adapted(double t) const;

private:
    friend Trajectory integrate(const CartesianState&, TimeSpan, const IntegratorOptions&);

    double t_start_ = 0;
    double t_final_ = 0;
    int direction_ = 1;
    CartesianState initial_;
    CartesianState final_;
    ConservedTriple invariants0_;
    std::vector<DenseSegment> segments_;
    std::vector<double> zeros_;
    bool planar_ = false;
    bool axis_proximity_ = false;
    bool drift_exceeded_ = false;
    Termination termination_ = Termination::SpanEnd;
    std::optional<double> collision_time_;
    IntegrationStats stats_;
};

/// Integrates from c0 at span.start towards span.end (either direction).
/// Throws SingularityError if c0 is at or within collision_radius of the origin,
/// DomainError for an empty or nonfinite span or invalid options.
[[nodiscard]] Trajectory integrate(const CartesianState& c0, TimeSpan span, const IntegratorOptions& opts = {});

struct ZeroScan {
    std::vector<double> times;
    /// z vanishes identically (the orbit is a line through the origin in the plane).
    bool planar = false;
};

/// Zeros of z along the dense output, in increasing order. Falls back to the
/// events recorded during integration when the trajectory has no dense output.
[[nodiscard]] ZeroScan find_z_zeros(const Trajectory& traj, double refine_tol = 1e-14);

/// Dense-output evaluation; throws DomainError outside the trajectory's range.
[[nodiscard]] CartesianState sample(const Trajectory& traj, double t);

/// Bisection for a sign change of f on [a, b] (f(a) f(b) < 0 required, else DomainError).
/// Stops when the bracket is narrower than tol or cannot be split further.
[[nodiscard]] double refine_root(const std::function<double(double)>& f, double a, double b, double tol);

} // namespace kh
