// khsim: command-line front end for the Kepler-Heisenberg toolkit.
//
//   khsim integrate --ps -0.05 --ptheta 0.2 --series
//   khsim seed --n 100 --rng-seed 7
//   khsim survey --n 500 --rng-seed 1 --width 8
//   khsim verify --ps 0.1 --ptheta -0.3
//   khsim plot --series out/orbit.csv --report out/orbit.json
//
// Exit codes: 0 success, 1 runtime or I/O error, 2 invalid configuration,
// 3 malformed input file, 4 verification residuals above threshold.
// CLI11 reports its own parse errors with its own nonzero codes.
#include "kh/harness/orbit_pipeline.hpp"
#include "kh/harness/report_io.hpp"
#include "kh/harness/survey.hpp"
#include "kh/harness/svg_plot.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace kh;
using namespace kh::harness;

namespace {

enum ExitCode { kOk = 0, kRuntime = 1, kConfig = 2, kInput = 3, kVerifyFailed = 4 };

struct RunConfig {
    fs::path output_dir = ".";
    std::string name;

    // Initial condition: an explicit seed, a Cartesian state, or an entry of a seeds file.
    std::optional<double> ps, ptheta;
    int branch = 1;
    std::vector<double> state;
    fs::path seed_file;
    std::size_t seed_index = 0;

    OrbitConfig orbit;

    std::size_t n = 500;
    std::uint64_t rng_seed = 1;
    SeedRegion region;
    std::size_t width = 0;
    double table1_min_abs_J = 1e-6;
    double t_col_rel_tol = 1e-4;
    bool quiet = false;

    bool series = false;
    std::size_t per_step = 4;

    double max_endpoint_residual = 1e-6;
    double max_domain_residual = 1e-5;

    fs::path series_path;
    fs::path report_path;
    fs::path svg_path;
    std::string title;
    int panel_size = 420;

    [[nodiscard]] SurveyConfig survey() const
    {
        SurveyConfig s;
        s.n = n;
        s.rng_seed = rng_seed;
        s.region = region;
        s.width = width;
        s.orbit = orbit;
        s.table1_min_abs_J = table1_min_abs_J;
        s.t_col_rel_tol = t_col_rel_tol;
        return s;
    }
};

void add_orbit_options(CLI::App* cmd, RunConfig& rc)
{
    IntegratorOptions& in = rc.orbit.integrator;
    const std::string g = "Integrator";
    cmd->add_option("--rel-tol", in.rel_tol, "Relative tolerance of the analysis run")->group(g);
    cmd->add_option("--abs-tol", in.abs_tol, "Absolute tolerance (dilation weighted)")->group(g);
    cmd->add_option("--collision-radius", in.collision_radius, "Heisenberg radius treated as collision")->group(g);
    cmd->add_option("--axis-radius", in.axis_radius, "Planar radius that raises the axis-proximity flag")->group(g);
    cmd->add_option("--zero-refine-tol", in.zero_refine_tol, "Bracket width when refining zeros of z")->group(g);
    cmd->add_option("--energy-drift-bound", in.energy_drift_bound, "Energy drift that raises the drift flag")
        ->group(g);
    cmd->add_option("--max-steps", in.max_steps, "Step budget per run")->group(g);
    cmd->add_option("--energy-level", in.energy_level,
                    "Energy the projection holds (default: 0 for zero-energy states, else H(0))")
        ->group(g);
    cmd->add_flag("--energy-projection,!--no-energy-projection", in.project_energy,
                  "Project accepted steps back onto the energy level")
        ->group(g);
    cmd->add_flag("--adapted-error-control,!--no-adapted-error-control", in.adapted_error_control,
                  "Also control the local error in adapted coordinates")
        ->group(g);

    OrbitConfig& o = rc.orbit;
    const std::string a = "Analysis";
    cmd->add_option("--domains", o.domains, "Fundamental domains covered by the analysis run")->group(a);
    cmd->add_option("--analysis-span", o.analysis_span, "Time budget of the analysis run")->group(a);
    cmd->add_option("--collision-span", o.collision_span, "Time budget of the collision run (0 skips it)")
        ->group(a);
    cmd->add_option("--collision-tol", o.collision_tol, "Tolerance of the collision run")->group(a);
    cmd->add_option("--collision-max-domains", o.collision_max_domains,
                    "Skip the collision run when it would cross more domains")
        ->group(a);
    cmd->add_option("--grid", o.verify.grid_per_domain, "Verification points per domain")->group(a);
    cmd->add_option("--tol-j", o.verify.tol_J, "|J| below which an orbit counts as quasi-periodic")->group(a);
    cmd->add_option("--max-shift", o.verify.max_shift, "Largest replicated domain checked (0 = all covered)")
        ->group(a);
}

void add_initial_options(CLI::App* cmd, RunConfig& rc)
{
    const std::string g = "Initial condition";
    auto* ps = cmd->add_option("--ps", rc.ps, "Seed dilational momentum p_s = J")->group(g);
    auto* pt = cmd->add_option("--ptheta", rc.ptheta, "Seed angular momentum")->group(g);
    cmd->add_option("--branch", rc.branch, "Root of the p_u quadratic (+1 or -1)")
        ->check(CLI::IsMember({-1, 1}))
        ->group(g);
    auto* st = cmd->add_option("--state", rc.state, "Cartesian state x,y,z,p_x,p_y,p_z")
        ->expected(6)
        ->delimiter(',')
        ->group(g);
    auto* sf = cmd->add_option("--seed-file", rc.seed_file, "Seeds file written by `khsim seed`")->group(g);
    cmd->add_option("--index", rc.seed_index, "Entry of --seed-file")->group(g);
    ps->needs(pt);
    pt->needs(ps);
    st->excludes(ps)->excludes(pt)->excludes(sf);
    sf->excludes(ps)->excludes(pt);
}

void add_region_options(CLI::App* cmd, RunConfig& rc)
{
    const std::string g = "Sampling";
    cmd->add_option("--n", rc.n, "Number of seeds")->group(g);
    cmd->add_option("--rng-seed", rc.rng_seed, "Seed of the counter-based generator")->group(g);
    cmd->add_option("--ps-min", rc.region.ps_min, "Lower end of the p_s range")->group(g);
    cmd->add_option("--ps-max", rc.region.ps_max, "Upper end of the p_s range")->group(g);
    cmd->add_option("--ptheta-min", rc.region.ptheta_min, "Lower end of the p_theta range")->group(g);
    cmd->add_option("--ptheta-max", rc.region.ptheta_max, "Upper end of the p_theta range")->group(g);
    cmd->add_option("--margin", rc.region.margin, "Rejection margin below the |J| bound")->group(g);
}

/// Resolves the initial condition. Throws ConfigError if none or an invalid one is given.
std::pair<CartesianState, std::optional<SeedSpec>> initial_condition(const RunConfig& rc)
{
    if (rc.state.size() == 6) {
        const CartesianState c{rc.state[0], rc.state[1], rc.state[2], rc.state[3], rc.state[4], rc.state[5]};
        for (double v : rc.state)
            if (!std::isfinite(v))
                throw ConfigError("--state must be finite");
        if (heis_radius(c) == 0.0)
            throw ConfigError("--state is the collision point");
        return {c, std::nullopt};
    }
    SeedSpec seed;
    if (!rc.seed_file.empty()) {
        std::ifstream f(rc.seed_file);
        if (!f)
            throw InputError("cannot open " + rc.seed_file.string());
        Json j;
        try {
            j = Json::parse(f);
            const Json& list = j.at("seeds");
            if (rc.seed_index >= list.size())
                throw ConfigError("--index " + std::to_string(rc.seed_index) + " beyond the " +
                                  std::to_string(list.size()) + " seeds of " + rc.seed_file.string());
            seed = seed_from_json(list.at(rc.seed_index));
        } catch (const Json::exception& e) {
            throw InputError(rc.seed_file.string() + ": " + e.what());
        }
    } else if (rc.ps && rc.ptheta) {
        seed.ps = *rc.ps;
        seed.ptheta = *rc.ptheta;
        seed.branch = rc.branch;
    } else {
        throw ConfigError("an initial condition is required: --ps/--ptheta, --state or --seed-file");
    }
    try {
        return {seed_zero_energy(seed), seed};
    } catch (const DomainError& e) {
        throw ConfigError(std::string("invalid seed: ") + e.what());
    }
}

OrbitResult run_orbit(const RunConfig& rc, bool keep_trajectory)
{
    OrbitConfig cfg = rc.orbit;
    cfg.keep_trajectory = keep_trajectory;
    cfg.validate();
    const auto [c0, seed] = initial_condition(rc);
    OrbitResult res = analyze_orbit(c0, cfg);
    res.seed = seed;
    return res;
}

void print_summary(const OrbitResult& r)
{
    std::cout << "status          " << (r.ok() ? "ok" : r.failure) << '\n';
    std::cout << "classification  " << to_string(r.classification) << '\n';
    std::cout << "J               " << format_double(r.invariants.J) << '\n';
    std::cout << "zeros           " << r.zeros.size() << '\n';
    if (r.report) {
        const SimilarityReport& rep = *r.report;
        std::cout << "lambda          " << format_double(rep.factors.lambda) << '\n';
        std::cout << "phi             " << format_double(rep.factors.phi) << '\n';
        std::cout << "domain          [" << format_double(rep.factors.t0) << ", " << format_double(rep.factors.t2)
                  << "]\n";
        std::cout << "endpoint resid  " << format_double(rep.endpoint_residual) << '\n';
        std::cout << "domain resid    " << format_double(rep.domain_residual) << " over "
                  << rep.shifts_checked.size() << " replicas\n";
        if (rep.factors.t_col)
            std::cout << "t_col predicted " << format_double(*rep.factors.t_col) << '\n';
    }
    if (r.t_col_observed)
        std::cout << "t_col observed  " << format_double(*r.t_col_observed) << '\n';
}

int cmd_integrate(const RunConfig& rc)
{
    const OrbitResult res = run_orbit(rc, rc.series);
    const std::string name = rc.name.empty() ? "orbit" : rc.name;
    write_text_file(rc.output_dir / (name + ".json"), dump(to_json(res)));
    if (rc.series && res.trajectory) {
        std::ostringstream csv;
        write_series_csv(csv, *res.trajectory, rc.per_step);
        write_text_file(rc.output_dir / (name + ".csv"), csv.str());
    }
    print_summary(res);
    return kOk;
}

int cmd_seed(const RunConfig& rc)
{
    std::vector<SeedSpec> seeds;
    if (rc.ps && rc.ptheta) {
        SeedSpec s{*rc.ps, *rc.ptheta, rc.branch, std::nullopt, std::nullopt};
        (void)initial_condition(rc);  // validates
        seeds.push_back(s);
    } else {
        if (rc.n == 0)
            throw ConfigError("--n must be at least 1");
        try {
            seeds = sample_seeds(rc.n, rc.rng_seed, rc.region);
        } catch (const DomainError& e) {
            throw ConfigError(e.what());
        }
    }
    const std::string name = rc.name.empty() ? "seeds" : rc.name;
    write_text_file(rc.output_dir / (name + ".json"), dump(seeds_to_json(seeds, rc.rng_seed, rc.region)));
    std::cout << seeds.size() << " seed(s) written to " << (rc.output_dir / (name + ".json")).string() << '\n';
    return kOk;
}

int cmd_survey(const RunConfig& rc)
{
    const SurveyConfig cfg = rc.survey();
    cfg.validate();
    std::function<void(std::size_t)> progress;
    const std::size_t step = std::max<std::size_t>(1, cfg.n / 20);
    if (!rc.quiet)
        progress = [&](std::size_t done) {
            if (done % step == 0 || done == cfg.n)
                std::fprintf(stderr, "\r%zu / %zu orbits", done, cfg.n);
        };
    const SurveyReport rep = run_survey(cfg, progress);
    if (!rc.quiet)
        std::fprintf(stderr, "\n");

    const std::string name = rc.name.empty() ? "survey" : rc.name;
    write_text_file(rc.output_dir / (name + ".json"), dump(to_json(rep)));
    std::ostringstream csv;
    write_survey_csv(csv, rep);
    write_text_file(rc.output_dir / (name + ".csv"), csv.str());

    const SurveyAggregate& a = rep.aggregate;
    std::cout << "orbits            " << a.succeeded << " ok, " << a.failed << " failed of " << a.requested << '\n';
    std::cout << "families          future " << a.future_collision << ", past " << a.past_collision
              << ", quasi-periodic " << a.quasi_periodic << '\n';
    std::cout << "three zeros       " << a.three_zeros << " of " << a.a_candidates << " candidates ("
              << format_double(a.three_zero_fraction) << ")\n";
    std::cout << "sign(J) vs lambda " << a.table1_violations << " violations of " << a.table1_checked << '\n';
    std::cout << "t_col             " << a.t_col_violations << " violations of " << a.t_col_checked
              << ", max rel error " << format_double(a.max_t_col_rel_error) << '\n';
    std::cout << "max |J|           " << format_double(a.max_abs_J) << '\n';
    std::cout << "max residuals     endpoint " << format_double(a.max_endpoint_residual) << ", domain "
              << format_double(a.max_domain_residual) << '\n';
    return kOk;
}

int cmd_verify(const RunConfig& rc)
{
    if (!(rc.max_endpoint_residual > 0.0) || !(rc.max_domain_residual > 0.0))
        throw ConfigError("residual thresholds must be positive");
    const OrbitResult res = run_orbit(rc, false);
    print_summary(res);
    if (!res.ok()) {
        std::cout << "FAIL no similarity report: " << res.failure << '\n';
        return kVerifyFailed;
    }
    const bool pass = res.report->endpoint_residual < rc.max_endpoint_residual &&
                      res.report->domain_residual < rc.max_domain_residual;
    std::cout << (pass ? "PASS" : "FAIL") << " endpoint < " << format_double(rc.max_endpoint_residual)
              << ", domain < " << format_double(rc.max_domain_residual) << '\n';
    return pass ? kOk : kVerifyFailed;
}

int cmd_plot(const RunConfig& rc)
{
    if (rc.panel_size < 100)
        throw ConfigError("--panel-size must be at least 100");
    const Series series = read_series_csv(rc.series_path);
    OrbitOverlay overlay;
    if (!rc.report_path.empty())
        overlay = read_orbit_overlay(rc.report_path);
    PlotOptions opts;
    opts.panel_width = opts.panel_height = rc.panel_size;
    opts.title = rc.title;
    fs::path out = rc.svg_path;
    if (out.empty())
        out = rc.output_dir / (rc.series_path.stem().string() + ".svg");
    write_text_file(out, render_orbit_svg(series, overlay, opts));
    std::cout << "wrote " << out.string() << '\n';
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Numerical toolkit for zero-energy orbits of the Kepler-Heisenberg problem"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.fallthrough();

    RunConfig rc;
    app.add_option("--output-dir,-o", rc.output_dir, "Directory for reports and tables")
        ->envname("KHSIM_OUTPUT_DIR");
    app.add_option("--name", rc.name, "Base name of output files (default depends on the subcommand)");

    auto* integrate = app.add_subcommand("integrate", "Integrate one orbit, verify it and write a JSON report");
    add_initial_options(integrate, rc);
    add_orbit_options(integrate, rc);
    integrate->add_flag("--series", rc.series, "Also write the time series CSV");
    integrate->add_option("--per-step", rc.per_step, "Interior series points per integrator step");

    auto* seed = app.add_subcommand("seed", "Write zero-energy seeds (explicit or sampled) to a JSON file");
    add_region_options(seed, rc);
    {
        const std::string g = "Explicit seed";
        auto* ps = seed->add_option("--ps", rc.ps, "Seed dilational momentum p_s = J")->group(g);
        auto* pt = seed->add_option("--ptheta", rc.ptheta, "Seed angular momentum")->group(g);
        seed->add_option("--branch", rc.branch, "Root of the p_u quadratic (+1 or -1)")
            ->check(CLI::IsMember({-1, 1}))
            ->group(g);
        ps->needs(pt);
        pt->needs(ps);
    }

    auto* survey = app.add_subcommand("survey", "Analyse n sampled seeds in parallel and tabulate the results");
    add_region_options(survey, rc);
    add_orbit_options(survey, rc);
    survey->add_option("--width", rc.width, "Worker threads (0 = hardware concurrency)");
    survey->add_option("--table1-min-abs-j", rc.table1_min_abs_J, "|J| above which sign(J) is checked");
    survey->add_option("--t-col-rel-tol", rc.t_col_rel_tol, "Relative tolerance on the collision time");
    survey->add_flag("--quiet,-q", rc.quiet, "No progress output");

    auto* verify = app.add_subcommand("verify", "Integrate one orbit and check its similarity residuals");
    add_initial_options(verify, rc);
    add_orbit_options(verify, rc);
    verify->add_option("--max-endpoint-residual", rc.max_endpoint_residual, "Threshold on the endpoint residual");
    verify->add_option("--max-domain-residual", rc.max_domain_residual, "Threshold on the domain residual");

    auto* plot = app.add_subcommand("plot", "Render a time series (and optional report overlay) as SVG");
    plot->add_option("--series", rc.series_path, "Time series CSV from `khsim integrate --series`")
        ->required()
        ->check(CLI::ExistingFile);
    plot->add_option("--report", rc.report_path, "Orbit report JSON for zero lines and the domain overlay")
        ->check(CLI::ExistingFile);
    plot->add_option("--out", rc.svg_path, "SVG path (default: <output-dir>/<series stem>.svg)");
    plot->add_option("--title", rc.title, "Figure title");
    plot->add_option("--panel-size", rc.panel_size, "Panel width and height in pixels");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*integrate)
            return cmd_integrate(rc);
        if (*seed)
            return cmd_seed(rc);
        if (*survey)
            return cmd_survey(rc);
        if (*verify)
            return cmd_verify(rc);
        if (*plot)
            return cmd_plot(rc);
    } catch (const ConfigError& e) {
        std::cerr << "khsim: invalid configuration: " << e.what() << '\n';
        return kConfig;
    } catch (const InputError& e) {
        std::cerr << "khsim: malformed input: " << e.what() << '\n';
        return kInput;
    } catch (const std::exception& e) {
        std::cerr << "khsim: " << e.what() << '\n';
        return kRuntime;
    }
    return kRuntime;
}
