// Batch runs over sampled zero-energy seeds.
#pragma once

#include "kh/harness/orbit_pipeline.hpp"
#include "kh/seeding.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace kh::harness {

struct SurveyConfig {
    std::size_t n = 500;
    std::uint64_t rng_seed = 1;
    SeedRegion region;
    /// Worker threads; 0 uses the hardware concurrency.
    std::size_t width = 0;
    OrbitConfig orbit;
    /// |J| above which the sign of J must match the sign of lambda - 1.
    double table1_min_abs_J = 1e-6;
    /// Bound on |t_col observed - predicted| / |predicted|.
    double t_col_rel_tol = 1e-4;

    void validate() const;
};

struct SurveyAggregate {
    std::size_t requested = 0;
    std::size_t succeeded = 0;
    std::size_t failed = 0;

    std::size_t future_collision = 0;
    std::size_t past_collision = 0;
    std::size_t quasi_periodic = 0;

    /// Successful rows with |J| > table1_min_abs_J, and those whose lambda or
    /// classification contradicts the sign of J.
    std::size_t table1_checked = 0;
    std::size_t table1_violations = 0;

    /// Orbits that are neither planar nor near the z-axis, and how many of them
    /// showed at least three zeros of z.
    std::size_t a_candidates = 0;
    std::size_t three_zeros = 0;
    double three_zero_fraction = 0;

    /// Rows with a predicted collision outside the quasi-periodic family, and those where the observation is missing,
    /// disagrees beyond t_col_rel_tol, or the prediction is not beyond the domain.
    std::size_t t_col_checked = 0;
    std::size_t t_col_violations = 0;
    double max_t_col_rel_error = 0;

    double max_abs_J = 0;
    double max_endpoint_residual = 0;
    double max_domain_residual = 0;
};

struct SurveyReport {
    SurveyConfig config;
    /// One result per requested seed, ordered by sample index; failures included.
    std::vector<OrbitResult> results;
    SurveyAggregate aggregate;
};

/// Relative disagreement of the observed and predicted collision times, if both exist.
[[nodiscard]] std::optional<double> t_col_relative_error(const OrbitResult& r);

/// Runs every seed of sample_seeds(n, rng_seed, region) through analyze_seed on
/// `width` threads. The result does not depend on width. `progress` (optional) is
/// called with the number of finished orbits, from worker threads.
[[nodiscard]] SurveyReport run_survey(const SurveyConfig& cfg,
                                      const std::function<void(std::size_t)>& progress = {});

[[nodiscard]] SurveyAggregate aggregate(const std::vector<OrbitResult>& results, const SurveyConfig& cfg);

} // namespace kh::harness
