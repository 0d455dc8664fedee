#include "kh/harness/orbit_pipeline.hpp"

#include "kh/dynamics.hpp"

#include <cmath>
#include <exception>
#include <limits>

namespace kh::harness {

void OrbitConfig::validate() const
{
    try {
        integrator.validate();
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    if (domains < 2)
        throw ConfigError("domains must be at least 2 (one fundamental domain and one replica)");
    if (!(analysis_span > 0.0) || !std::isfinite(analysis_span))
        throw ConfigError("analysis span must be positive and finite");
    if (!(collision_span >= 0.0) || !std::isfinite(collision_span))
        throw ConfigError("collision span must be nonnegative and finite");
    if (!(collision_tol > 0.0) || !std::isfinite(collision_tol))
        throw ConfigError("collision tolerance must be positive and finite");
    if (!(collision_max_domains > 0.0))
        throw ConfigError("collision_max_domains must be positive");
    if (verify.grid_per_domain == 0)
        throw ConfigError("verification grid must have at least one point per domain");
    if (!(verify.tol_J >= 0.0))
        throw ConfigError("tol_J must be nonnegative");
    if (verify.max_shift < 0)
        throw ConfigError("max_shift must be nonnegative");
}

ConservationCheck conservation_check(const Trajectory& traj)
{
    const ConservedTriple ref = traj.initial_invariants();
    ConservationCheck out;
    auto visit = [&](const CartesianState& c) {
        const ConservedTriple q = conserved_triple(c);
        out.max_abs_H = std::max(out.max_abs_H, std::abs(q.H));
        out.max_dJ = std::max(out.max_dJ, std::abs(q.J - ref.J));
        out.max_dptheta = std::max(out.max_dptheta, std::abs(q.ptheta - ref.ptheta));
    };
    visit(traj.initial_state());
    for (const DenseSegment& seg : traj.segments())
        visit(CartesianState::from_array(seg.to_state()));
    visit(traj.final_state());
    out.max_step_energy_defect = traj.stats().max_energy_drift;
    return out;
}

namespace {

void observe_collision(OrbitResult& res, int analysis_direction, const IntegratorOptions& base, const OrbitConfig& cfg)
{
    if (cfg.collision_span <= 0.0 || !res.report || res.report->factors.unit_dilation())
        return;
    const double rho0 = heis_radius(res.initial);
    const double domains_needed =
        std::log(rho0 / base.collision_radius) / std::abs(res.report->factors.log_lambda);
    if (!(domains_needed <= cfg.collision_max_domains))
        return;
    IntegratorOptions opts = base;
    opts.dense_output = false;
    opts.max_zeros = 0;
    opts.rel_tol = std::min(opts.rel_tol, cfg.collision_tol);
    opts.abs_tol = std::min(opts.abs_tol, cfg.collision_tol);
    const double end = -static_cast<double>(analysis_direction) * cfg.collision_span;
    const Trajectory run = integrate(res.initial, {0.0, end}, opts);
    res.collision_termination = run.termination();
    if (run.termination() == Termination::Collision || run.termination() == Termination::StepUnderflow)
        res.t_col_observed = run.collision_time();
}

} // namespace

OrbitResult analyze_orbit(const CartesianState& c0, const OrbitConfig& cfg)
{
    cfg.validate();

    OrbitResult res;
    res.initial = c0;
    try {
        res.invariants = conserved_triple(c0);
    } catch (const std::exception& e) {
        res.failure = std::string("invalid initial state: ") + e.what();
        return res;
    }

    const int direction = res.invariants.J < -cfg.verify.tol_J ? -1 : 1;
    IntegratorOptions base = cfg.integrator;
    // A state on the zero-energy level up to rounding is held on that level exactly.
    if (!base.energy_level) {
        const double scale = kinetic_energy(c0) + std::abs(potential_energy(c0));
        if (std::abs(res.invariants.H) <= 64.0 * std::numeric_limits<double>::epsilon() * scale)
            base.energy_level = 0.0;
    }
    IntegratorOptions opts = base;
    // One zero past the last domain boundary, so that the boundary predicted from
    // lambda cannot fall a rounding error beyond the end of the run.
    opts.max_zeros = 2 * cfg.domains + 2;
    opts.max_span = std::max(opts.max_span, cfg.analysis_span);

    std::shared_ptr<const Trajectory> traj;
    try {
        traj = std::make_shared<const Trajectory>(
            integrate(c0, {0.0, static_cast<double>(direction) * cfg.analysis_span}, opts));
    } catch (const std::exception& e) {
        res.failure = std::string("integration failed: ") + e.what();
        return res;
    }
    if (cfg.keep_trajectory)
        res.trajectory = traj;

    res.termination = traj->termination();
    res.planar = traj->planar();
    res.axis_proximity = traj->axis_proximity();
    res.energy_drift_exceeded = traj->energy_drift_exceeded();
    res.zeros = traj->z_zeros();
    res.conservation = conservation_check(*traj);

    if (res.planar) {
        res.classification = Classification::PlanarLine;
        res.failure = "planar-line";
        return res;
    }
    if (res.axis_proximity) {
        res.failure = "axis-proximity";
        return res;
    }
    if (res.zeros.size() < 3) {
        res.failure = "insufficient-zeros";
        return res;
    }

    try {
        const std::size_t offset = direction > 0 ? 0 : res.zeros.size() - 3;
        res.domain = fundamental_domain(*traj, res.zeros, offset);
        res.report = verify(*traj, *res.domain, cfg.verify);
        res.classification = res.report->classification;
    } catch (const InsufficientCoverage&) {
        res.failure = "insufficient-coverage";
        return res;
    } catch (const std::exception& e) {
        res.failure = std::string("verification failed: ") + e.what();
        return res;
    }

    try {
        observe_collision(res, direction, base, cfg);
    } catch (const std::exception& e) {
        res.failure = std::string("collision run failed: ") + e.what();
    }
    return res;
}

OrbitResult analyze_seed(const SeedSpec& seed, const OrbitConfig& cfg)
{
    cfg.validate();
    CartesianState c0;
    try {
        c0 = seed_zero_energy(seed);
    } catch (const std::exception& e) {
        OrbitResult res;
        res.seed = seed;
        res.failure = std::string("invalid seed: ") + e.what();
        return res;
    }
    OrbitResult res = analyze_orbit(c0, cfg);
    res.seed = seed;
    return res;
}

} // namespace kh::harness
