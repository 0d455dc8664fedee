// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only if all pass.
//
//   acceptance [--width N]    (N worker threads for the surveys; default hardware concurrency)
#include "kh/dynamics.hpp"
#include "kh/harness/orbit_pipeline.hpp"
#include "kh/harness/report_io.hpp"
#include "kh/harness/survey.hpp"
#include "kh/integrator.hpp"
#include "kh/phase_geometry.hpp"
#include "kh/seeding.hpp"
#include "kh/similarity.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <numbers>
#include <random>
#include <string>

using namespace kh;
using namespace kh::harness;

namespace {

constexpr std::uint64_t kSurveySeed = 12345;
int g_failures = 0;
std::size_t g_width = 0;

void report(int id, bool pass, const std::string& what)
{
    std::printf("%s  %2d  %s\n", pass ? "PASS" : "FAIL", id, what.c_str());
    std::fflush(stdout);
    if (!pass)
        ++g_failures;
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

CartesianState random_offaxis_state(std::mt19937_64& gen)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double r = 0.1 + 1.9 * 0.5 * (u(gen) + 1.0);
    const double a = kPi * u(gen);
    return {r * std::cos(a), r * std::sin(a), u(gen), u(gen), u(gen), u(gen)};
}

void criterion_1()
{
    std::mt19937_64 gen(1);
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0;
    for (int i = 0; i < 10000; ++i) {
        const CartesianState c = random_offaxis_state(gen);
        worst = std::max(worst, std::abs(hamiltonian_adapted(to_adapted(c)) - hamiltonian_cartesian(c)));
    }
    const double secs = seconds_since(t0);
    report(1, worst < 1e-12 && secs < 1.0,
           fmt("cross-chart Hamiltonian: max |H_adapted - H_cartesian| = %.3g over 1e4 states in %.3f s", worst, secs));
}

void criterion_2()
{
    std::mt19937_64 gen(2);
    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
        const CartesianState c = random_offaxis_state(gen);
        const Vec6 base = c.to_array();
        Vec6 grad{};
        for (int j = 0; j < 6; ++j) {
            const double h = 1e-6 * std::max(1.0, std::abs(base[j]));
            Vec6 p = base, m = base;
            p[j] += h;
            m[j] -= h;
            grad[j] = (hamiltonian_cartesian(CartesianState::from_array(p)) -
                       hamiltonian_cartesian(CartesianState::from_array(m))) / (2 * h);
        }
        const Vec6 fd{grad[3], grad[4], grad[5], -grad[0], -grad[1], -grad[2]};
        const Vec6 an = vector_field(c).to_array();
        double num = 0, den = 0;
        for (int j = 0; j < 6; ++j) {
            num = std::max(num, std::abs(an[j] - fd[j]));
            den = std::max(den, std::abs(an[j]));
        }
        worst = std::max(worst, num / den);
    }
    report(2, worst < 1e-6, fmt("gradient oracle: max relative error %.3g over 1e3 states", worst));
}

void criterion_3()
{
    SurveyConfig cfg;
    cfg.n = 100;
    cfg.rng_seed = kSurveySeed;
    cfg.width = g_width;
    cfg.orbit.integrator.rel_tol = 1e-10;
    cfg.orbit.integrator.abs_tol = 1e-10;
    cfg.orbit.collision_span = 0;
    cfg.orbit.domains = 3;
    const SurveyReport rep = run_survey(cfg);
    double h = 0, dj = 0, dpt = 0, defect = 0;
    std::size_t covered = 0;
    for (const OrbitResult& r : rep.results) {
        h = std::max(h, r.conservation.max_abs_H);
        dj = std::max(dj, r.conservation.max_dJ);
        dpt = std::max(dpt, r.conservation.max_dptheta);
        defect = std::max(defect, r.conservation.max_step_energy_defect);
        // Three domains need seven zeros.
        if (r.zeros.size() >= 7)
            ++covered;
    }
    const bool pass = covered == cfg.n && h < 1e-9 && dj < 1e-8 && dpt < 1e-9 && defect < 1e-9;
    report(3, pass,
           fmt("conservation at tol 1e-10: %zu/%zu seeds over >= 3 domains, max |H| %.3g, |dJ| %.3g, |dp_theta| %.3g, "
               "per-step energy defect %.3g",
               covered, cfg.n, h, dj, dpt, defect));
}

/// Zero-energy states off the z = 0 plane with |J| above the bound never reach it.
std::pair<std::size_t, std::size_t> off_plane_states_beyond_bound()
{
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::size_t tried = 0, crossed = 0;
    IntegratorOptions o;
    o.max_zeros = 1;
    while (tried < 100) {
        const double u = (unit(gen) < 0.5 ? -1 : 1) * (0.2 + 1.1 * unit(gen));
        const double pt = 2.0 * unit(gen) - 1.0;
        const auto [lo, hi] = j_bounds(u, pt);
        const double ps = lo + (hi - lo) * unit(gen);
        if (std::abs(ps) <= kMaxDilationalMomentum + 1e-3)
            continue;
        // Roots of the H = 0 constraint in p_u: -p_theta/2 +- sqrt(discriminant) / (2 cos u).
        const double cu = std::cos(u);
        const double disc = zero_energy_discriminant(u, ps, pt);
        const double pu = -0.5 * pt + (unit(gen) < 0.5 ? -1 : 1) * 0.5 * std::sqrt(std::max(0.0, disc)) / cu;
        const CartesianState c = to_cartesian({0.0, 0.0, u, ps, pt, pu});
        ++tried;
        for (double end : {1e6, -1e6}) {
            const Trajectory tr = integrate(c, {0.0, end}, o);
            if (!tr.z_zeros().empty())
                ++crossed;
        }
    }
    return {tried, crossed};
}

void criterion_4(const SurveyReport& survey)
{
    double worst = 0;
    std::size_t orbits = 0;
    for (const OrbitResult& r : survey.results) {
        if (!r.ok())
            continue;
        ++orbits;
        worst = std::max(worst, std::abs(r.invariants.J) + r.conservation.max_dJ);
    }
    const auto [tried, crossed] = off_plane_states_beyond_bound();
    const double bound = kMaxDilationalMomentum + 1e-12;
    report(4, worst <= bound && crossed == 0,
           fmt("J bound: max |J| = %.10f <= %.10f over %zu surveyed A-orbits; %zu of %zu off-plane states with "
               "|J| beyond the bound crossed z = 0",
               worst, bound, orbits, crossed, tried));
}

void criteria_5_to_7(const SurveyReport& survey)
{
    std::size_t ok = 0, few_replicas = 0, endpoint_bad = 0, domain_bad = 0;
    double ep = 0, dr = 0;
    std::size_t contracting = 0, tcol_bad = 0, quasi = 0;
    double tcol_err = 0;
    for (const OrbitResult& r : survey.results) {
        if (!r.ok())
            continue;
        ++ok;
        const SimilarityReport& rep = *r.report;
        ep = std::max(ep, rep.endpoint_residual);
        dr = std::max(dr, rep.domain_residual);
        if (!(rep.endpoint_residual < 1e-6))
            ++endpoint_bad;
        if (!(rep.domain_residual < 1e-5))
            ++domain_bad;
        if (rep.shifts_checked.size() < 2)
            ++few_replicas;
        if (rep.classification == Classification::QuasiPeriodic) {
            ++quasi;
        } else if (rep.factors.t_col && rep.factors.lambda < 1.0) {
            ++contracting;
            const auto err = t_col_relative_error(r);
            if (err)
                tcol_err = std::max(tcol_err, *err);
            if (!(*rep.factors.t_col > rep.factors.t2) || !err || !(*err < 1e-4))
                ++tcol_bad;
        }
    }
    const std::size_t n = survey.results.size();
    report(5, ok == n && endpoint_bad == 0,
           fmt("endpoint identity: max residual %.3g over %zu/%zu orbits (%zu above 1e-6)", ep, ok, n, endpoint_bad));
    report(6, ok == n && domain_bad == 0 && few_replicas == 0,
           fmt("replicated domains: max residual %.3g over %zu orbits, %zu with fewer than 2 replicas", dr, ok,
               few_replicas));
    report(7, contracting > 0 && tcol_bad == 0,
           fmt("collision time: %zu lambda<1 orbits, max relative error %.3g, %zu violations (%zu quasi-periodic "
               "rows excluded)",
               contracting, tcol_err, tcol_bad, quasi));
}

void criterion_8(const SurveyReport& survey)
{
    SurveyConfig cfg;
    cfg.n = 20;
    cfg.rng_seed = kSurveySeed;
    cfg.width = g_width;
    cfg.region.ps_min = cfg.region.ps_max = 0.0;
    cfg.orbit.keep_trajectory = true;
    const SurveyReport line = run_survey(cfg);
    double dl = 0, qres = 0;
    std::size_t good = 0;
    for (const OrbitResult& r : line.results) {
        if (!r.ok() || !r.trajectory)
            continue;
        const double dev = std::abs(r.report->factors.lambda - 1.0);
        const double q = quasi_periodicity_residual(*r.trajectory, *r.domain);
        dl = std::max(dl, dev);
        qres = std::max(qres, q);
        if (dev < 1e-6 && q < 1e-5 && r.report->shifts_checked.size() >= 2)
            ++good;
    }
    const SurveyAggregate& a = survey.aggregate;
    report(8, a.table1_violations == 0 && a.table1_checked > 0 && good == cfg.n,
           fmt("stratification: %zu sign violations of %zu with |J| > 1e-6; J = 0 seeds %zu/%zu with max |lambda-1| "
               "%.3g and periodicity residual %.3g",
               a.table1_violations, a.table1_checked, good, cfg.n, dl, qres));
}

void criterion_9()
{
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double group = 0, inverse = 0, fixed = 0, forms = 0;
    for (int i = 0; i < 10000; ++i) {
        const double t0 = 20 * u(gen) - 10;
        const double t2 = t0 + 0.1 + 5 * u(gen);
        // lambda in [1/2, 2] brackets every surveyed orbit with room to spare; far outside it
        // the slope lambda^(2 psi) amplifies the rounding of the argument past 1e-12.
        const double lambda = std::exp(std::numbers::ln2 * (2 * u(gen) - 1));
        const SelfSimilarClock c(t0, t2, lambda);
        const double a = 6 * u(gen) - 3, b = 6 * u(gen) - 3;
        const double t = t0 + (t2 - t0) * (3 * u(gen) - 1);
        const AffineTimeMap ta = c.tau_shift(a), tb = c.tau_shift(b), tab = c.tau_shift(a + b);
        // Relative to the largest time involved, the scale of the rounding in an affine map.
        const double scale = std::max({1.0, std::abs(t), std::abs(ta(t)), std::abs(tb(t)), std::abs(tab(t))});
        group = std::max(group, std::abs(ta(tb(t)) - tab(t)) / scale);
        inverse = std::max(inverse, std::abs(c.tau_shift(-a)(ta(t)) - t) / scale);
        if (auto tc = c.collision_time()) {
            fixed = std::max(fixed, std::abs(c.tau_shift(a)(*tc) - *tc) / std::max(1.0, std::abs(*tc)));
            // Times on the collision side of the domain, from several domains in.
            const double k = std::floor(8 * u(gen));
            const double s = c.tau_shift(k)(t0 + (t2 - t0) * u(gen));
            const double ts = c.tau(s);
            forms = std::max(forms, std::abs(ts - c.tau_closed_form(s)) / std::max({1.0, std::abs(s), std::abs(ts)}));
        }
    }
    const double worst = std::max({group, inverse, fixed, forms});
    report(9, worst < 1e-12,
           fmt("time maps over lambda in [1/2, 2], psi in [-3, 3]: group law %.3g, inverse %.3g, fixed point %.3g, two forms of tau %.3g", group, inverse,
               fixed, forms));
}

void criterion_10(const SurveyReport& survey)
{
    const SurveyAggregate& a = survey.aggregate;
    report(10, a.a_candidates > 0 && a.three_zeros == a.a_candidates,
           fmt("oscillation survey: %zu of %zu A-candidate orbits (n = %zu, seed %llu) reached >= 3 zeros of z; "
               "%zu failed analysis",
               a.three_zeros, a.a_candidates, a.requested, static_cast<unsigned long long>(kSurveySeed), a.failed));
}

void criterion_11()
{
    const Trajectory st = integrate({0, 0, 1, 0, 0, 0}, {0, 10});
    const double slope = -1.0 / (32 * kPi);
    double err = 0, moved = 0;
    for (int i = 0; i <= 100; ++i) {
        const double t = 0.1 * i;
        const CartesianState c = st.sample(t);
        err = std::max(err, std::abs(c.pz - slope * t));
        moved = std::max({moved, std::abs(c.x), std::abs(c.y), std::abs(c.z - 1.0)});
    }
    const Trajectory line = integrate({1, 0, 0, -0.5 * std::numbers::inv_sqrtpi, 0, 0}, {0, 100});
    double off_line = 0;
    for (const DenseSegment& seg : line.segments())
        off_line = std::max({off_line, std::abs(seg.to_state()[1]), std::abs(seg.to_state()[2])});
    const bool collided =
        line.termination() == Termination::Collision || line.termination() == Termination::StepUnderflow;
    report(11, err < 1e-8 && moved < 1e-12 && line.planar() && off_line == 0.0 && collided,
           fmt("degenerate fixtures: z-axis p_z slope error %.3g, drift %.3g; planar line off-line %.3g, %s at t = %.6f",
               err, moved, off_line, std::string(to_string(line.termination())).c_str(),
               line.collision_time().value_or(NAN)));
}

} // namespace

int main(int argc, char** argv)
{
    for (int i = 1; i + 1 < argc; ++i)
        if (std::strcmp(argv[i], "--width") == 0)
            g_width = static_cast<std::size_t>(std::strtoul(argv[i + 1], nullptr, 10));

    const auto t0 = std::chrono::steady_clock::now();
    criterion_1();
    criterion_2();
    criterion_3();

    SurveyConfig cfg;
    cfg.n = 500;
    cfg.rng_seed = kSurveySeed;
    cfg.width = g_width;
    const SurveyReport survey = run_survey(cfg);

    criterion_4(survey);
    criteria_5_to_7(survey);
    criterion_8(survey);
    criterion_9();
    criterion_10(survey);
    criterion_11();

    std::printf("%d of 11 criteria failed (%.1f s)\n", g_failures, seconds_since(t0));
    return g_failures == 0 ? 0 : 1;
}
