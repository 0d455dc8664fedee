#include "kh/harness/survey.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

namespace kh::harness {

void SurveyConfig::validate() const
{
    if (n == 0)
        throw ConfigError("survey size n must be at least 1");
    if (!(table1_min_abs_J >= 0.0))
        throw ConfigError("table1_min_abs_J must be nonnegative");
    if (!(t_col_rel_tol > 0.0))
        throw ConfigError("t_col_rel_tol must be positive");
    orbit.validate();
    try {
        (void)sample_seed(rng_seed, 0, region);
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
}

std::optional<double> t_col_relative_error(const OrbitResult& r)
{
    if (!r.report || !r.report->factors.t_col || !r.t_col_observed)
        return std::nullopt;
    const double predicted = *r.report->factors.t_col;
    return std::abs(*r.t_col_observed - predicted) / std::abs(predicted);
}

SurveyAggregate aggregate(const std::vector<OrbitResult>& results, const SurveyConfig& cfg)
{
    SurveyAggregate a;
    a.requested = results.size();
    for (const OrbitResult& r : results) {
        if (r.a_candidate()) {
            ++a.a_candidates;
            if (r.zeros.size() >= 3)
                ++a.three_zeros;
        }
        if (!r.ok()) {
            ++a.failed;
            continue;
        }
        ++a.succeeded;
        const SimilarityReport& rep = *r.report;
        switch (rep.classification) {
        case Classification::FutureCollision: ++a.future_collision; break;
        case Classification::PastCollision: ++a.past_collision; break;
        default: ++a.quasi_periodic; break;
        }
        a.max_abs_J = std::max(a.max_abs_J, std::abs(rep.J));
        a.max_endpoint_residual = std::max(a.max_endpoint_residual, rep.endpoint_residual);
        a.max_domain_residual = std::max(a.max_domain_residual, rep.domain_residual);

        if (std::abs(rep.J) > cfg.table1_min_abs_J) {
            ++a.table1_checked;
            const double dl = rep.factors.log_lambda;
            const bool lambda_ok = rep.J < 0 ? dl < 0 : dl > 0;
            const bool class_ok = rep.J < 0 ? rep.classification == Classification::FutureCollision
                                            : rep.classification == Classification::PastCollision;
            if (!lambda_ok || !class_ok)
                ++a.table1_violations;
        }

        // Quasi-periodic rows have lambda = 1 up to the integration error, which leaves a
        // predicted collision time astronomically far away; there is nothing to observe.
        if (rep.factors.t_col && rep.classification != Classification::QuasiPeriodic) {
            ++a.t_col_checked;
            const double predicted = *rep.factors.t_col;
            // A future collision lies beyond the domain, a past one before it.
            const bool beyond = rep.factors.log_lambda < 0 ? predicted > rep.factors.t2 : predicted < rep.factors.t0;
            const auto err = t_col_relative_error(r);
            if (err)
                a.max_t_col_rel_error = std::max(a.max_t_col_rel_error, *err);
            if (!beyond || !err || !(*err < cfg.t_col_rel_tol))
                ++a.t_col_violations;
        }
    }
    a.three_zero_fraction = a.a_candidates > 0 ? static_cast<double>(a.three_zeros) / a.a_candidates : 0.0;
    return a;
}

SurveyReport run_survey(const SurveyConfig& cfg, const std::function<void(std::size_t)>& progress)
{
    cfg.validate();
    const std::vector<SeedSpec> seeds = sample_seeds(cfg.n, cfg.rng_seed, cfg.region);

    SurveyReport report;
    report.config = cfg;
    report.results.resize(seeds.size());

    std::size_t width = cfg.width > 0 ? cfg.width : std::max(1u, std::thread::hardware_concurrency());
    width = std::min(width, seeds.size());

    // Each worker owns the slots it claims, so the merge is just the index order.
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::mutex progress_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < seeds.size(); i = next++) {
            report.results[i] = analyze_seed(seeds[i], cfg.orbit);
            const std::size_t finished = ++done;
            if (progress) {
                const std::lock_guard lock(progress_mutex);
                progress(finished);
            }
        }
    };
    if (width == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(width);
        for (std::size_t w = 0; w < width; ++w)
            pool.emplace_back(worker);
    }

    report.aggregate = aggregate(report.results, cfg);
    return report;
}

} // namespace kh::harness
