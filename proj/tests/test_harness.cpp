#include "kh/harness/orbit_pipeline.hpp"
#include "kh/harness/report_io.hpp"
#include "kh/harness/survey.hpp"
#include "kh/harness/svg_plot.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

using namespace kh;
using namespace kh::harness;
namespace fs = std::filesystem;

namespace {

constexpr double kInvSqrtPi = std::numbers::inv_sqrtpi;

fs::path scratch_dir(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("kh_harness_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string survey_csv(const SurveyReport& rep)
{
    std::ostringstream out;
    write_survey_csv(out, rep);
    return out.str();
}

/// y coordinates of the n-th <polyline> of an SVG document.
std::vector<double> polyline_ys(const std::string& svg, int n)
{
    std::size_t pos = 0;
    for (int i = 0; i <= n; ++i) {
        pos = svg.find("<polyline", pos);
        REQUIRE(pos != std::string::npos);
        ++pos;
    }
    const std::size_t start = svg.find("points=\"", pos) + 8;
    const std::size_t end = svg.find('"', start);
    std::istringstream pts(svg.substr(start, end - start));
    std::vector<double> ys;
    std::string pair;
    while (pts >> pair)
        ys.push_back(std::stod(pair.substr(pair.find(',') + 1)));
    return ys;
}

} // namespace

TEST_CASE("shortest round-trip number formatting")
{
    std::mt19937_64 gen(3);
    for (int i = 0; i < 10000; ++i) {
        const double v = std::ldexp(std::uniform_real_distribution<double>(-1, 1)(gen),
                                    std::uniform_int_distribution<int>(-300, 300)(gen));
        const std::string text = format_double(v);
        double back = 0;
        std::from_chars(text.data(), text.data() + text.size(), back);
        CHECK(back == v);
    }
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(NAN) == "nan");
    CHECK(format_double(-INFINITY) == "-inf");
}

TEST_CASE("configuration validation")
{
    OrbitConfig o;
    CHECK_NOTHROW(o.validate());
    o.domains = 1;
    CHECK_THROWS_AS(o.validate(), ConfigError);
    o = {};
    o.integrator.rel_tol = -1;
    CHECK_THROWS_AS(o.validate(), ConfigError);
    o = {};
    o.verify.grid_per_domain = 0;
    CHECK_THROWS_AS(o.validate(), ConfigError);

    SurveyConfig s;
    s.n = 0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    CHECK_THROWS_AS((void)run_survey(s), ConfigError);
    s.n = 3;
    s.region.ps_min = 0.4;
    s.region.ps_max = 0.5;
    CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("orbit pipeline: degenerate fixtures")
{
    const OrbitConfig cfg;
    const OrbitResult axis = analyze_orbit({0, 0, 1, 0, 0, 0}, cfg);
    CHECK(axis.axis_proximity);
    CHECK_FALSE(axis.ok());
    CHECK_FALSE(axis.domain);
    CHECK_FALSE(axis.report);
    CHECK_FALSE(axis.a_candidate());

    const OrbitResult line = analyze_orbit({1, 0, 0, -0.5 * kInvSqrtPi, 0, 0}, cfg);
    CHECK(line.planar);
    CHECK(line.classification == Classification::PlanarLine);
    CHECK(line.zeros.empty());
    CHECK_FALSE(line.report);
    const Json j = to_json(line);
    CHECK(j["classification"] == "PlanarLine");
    CHECK(j["flags"]["planar"] == true);
    CHECK(j["similarity"].is_null());
}

TEST_CASE("orbit pipeline: the three families")
{
    const OrbitConfig cfg;

    const OrbitResult quasi = analyze_seed({0.0, 0.3, 1, {}, {}}, cfg);
    REQUIRE(quasi.ok());
    CHECK(quasi.classification == Classification::QuasiPeriodic);
    CHECK(std::abs(quasi.report->factors.lambda - 1.0) < 1e-6);
    CHECK_FALSE(quasi.t_col_observed);

    const OrbitResult future = analyze_seed({-0.2, 0.5, -1, {}, {}}, cfg);
    REQUIRE(future.ok());
    CHECK(future.classification == Classification::FutureCollision);
    const SimilarityFactors& f = future.report->factors;
    CHECK(f.lambda < 1.0);
    REQUIRE(f.t_col);
    CHECK(*f.t_col > f.t2);
    REQUIRE(future.t_col_observed);
    CHECK(*t_col_relative_error(future) < 1e-4);
    // Successive domains scale by lambda^2.
    const auto& z = future.zeros;
    REQUIRE(z.size() >= 6);
    for (std::size_t k = 0; k + 4 < z.size(); k += 2)
        CHECK((z[k + 4] - z[k + 2]) / (z[k + 2] - z[k]) == doctest::Approx(f.lambda * f.lambda).epsilon(1e-6));

    const OrbitResult past = analyze_seed({0.2, -0.1, 1, {}, {}}, cfg);
    REQUIRE(past.ok());
    CHECK(past.classification == Classification::PastCollision);
    CHECK(past.report->factors.lambda > 1.0);
    REQUIRE(past.t_col_observed);
    CHECK(*past.t_col_observed < past.report->factors.t0);
    CHECK(*t_col_relative_error(past) < 1e-4);

    for (const OrbitResult* r : {&quasi, &future, &past}) {
        CHECK(r->conservation.max_abs_H < 1e-12);
        CHECK(r->conservation.max_dJ < 1e-9);
        CHECK(r->conservation.max_dptheta < 1e-9);
    }
}

TEST_CASE("invalid seeds are reported in-band")
{
    const OrbitResult r = analyze_seed({0.3, 0.0, 1, {}, {}}, OrbitConfig{});
    CHECK_FALSE(r.ok());
    CHECK(r.failure.rfind("invalid seed", 0) == 0);
}

TEST_CASE("survey output does not depend on the worker count")
{
    SurveyConfig cfg;
    cfg.n = 12;
    cfg.rng_seed = 7;
    cfg.width = 1;
    const SurveyReport one = run_survey(cfg);
    cfg.width = 8;
    const SurveyReport eight = run_survey(cfg);
    CHECK(survey_csv(one) == survey_csv(eight));
    CHECK(dump(to_json(one)) == dump(to_json(eight)));

    const SurveyAggregate& a = one.aggregate;
    CHECK(a.requested == 12);
    CHECK(a.succeeded + a.failed == a.requested);
    CHECK(a.future_collision + a.past_collision + a.quasi_periodic == a.succeeded);

    const Json j = to_json(one);
    CHECK(j["rows"].size() + j["failures"].size() == cfg.n);
    CHECK(j["schema_version"] == kSchemaVersion);

    // One CSV line per requested seed, ordered by index.
    std::istringstream lines(survey_csv(one));
    std::string line;
    std::getline(lines, line);
    CHECK(line == kSurveyHeader);
    for (std::size_t i = 0; i < cfg.n; ++i) {
        REQUIRE(std::getline(lines, line));
        CHECK(line.rfind(std::to_string(i) + ",7,", 0) == 0);
    }
    CHECK_FALSE(std::getline(lines, line));
}

TEST_CASE("aggregate flags sign and collision-time violations")
{
    OrbitResult r;
    r.seed = SeedSpec{-0.1, 0, 1, 1, 0};
    SimilarityReport rep;
    rep.J = -0.1;
    rep.classification = Classification::FutureCollision;
    rep.factors.lambda = 1.2;  // wrong side of 1 for J < 0
    rep.factors.log_lambda = std::log(1.2);
    rep.factors.t0 = 0;
    rep.factors.t2 = 1;
    rep.factors.t_col = 0.5;  // inside the domain
    r.report = rep;
    r.t_col_observed = 0.5;
    const SurveyAggregate a = aggregate({r}, SurveyConfig{});
    CHECK(a.table1_checked == 1);
    CHECK(a.table1_violations == 1);
    CHECK(a.t_col_checked == 1);
    CHECK(a.t_col_violations == 1);

    OrbitResult missing = r;
    missing.report->factors.lambda = 0.8;
    missing.report->factors.log_lambda = std::log(0.8);
    missing.report->factors.t_col = 1 / (1 - 0.64);
    missing.t_col_observed.reset();
    const SurveyAggregate b = aggregate({missing}, SurveyConfig{});
    CHECK(b.table1_violations == 0);
    CHECK(b.t_col_violations == 1);
}

TEST_CASE("orbit reports are reproducible")
{
    const OrbitResult a = analyze_seed({-0.05, 0.2, 1, {}, {}}, OrbitConfig{});
    const OrbitResult b = analyze_seed({-0.05, 0.2, 1, {}, {}}, OrbitConfig{});
    CHECK(dump(to_json(a)) == dump(to_json(b)));
    const Json j = to_json(a);
    CHECK(j["schema_version"] == 1);
    CHECK(j["kind"] == "orbit");
    CHECK(j["status"] == "ok");
    CHECK(j["similarity"]["lambda"].get<double>() == a.report->factors.lambda);
    CHECK(seed_from_json(j["seed"]) == *a.seed);
}

TEST_CASE("time series and overlay files")
{
    const fs::path dir = scratch_dir("series");
    OrbitConfig cfg;
    cfg.keep_trajectory = true;
    const OrbitResult r = analyze_seed({-0.05, 0.2, 1, {}, {}}, cfg);
    REQUIRE(r.trajectory);

    std::ostringstream csv;
    write_series_csv(csv, *r.trajectory, 3);
    write_text_file(dir / "orbit.csv", csv.str());
    write_text_file(dir / "orbit.json", dump(to_json(r)));

    const Series s = read_series_csv(dir / "orbit.csv");
    CHECK(s.t.size() == 4 * r.trajectory->segments().size() + 1);
    for (std::size_t i = 1; i < s.t.size(); ++i)
        CHECK(s.t[i] > s.t[i - 1]);
    const CartesianState mid = r.trajectory->sample(s.t[17]);
    CHECK(s.x[17] == mid.x);
    CHECK(s.pz[17] == mid.pz);

    const OrbitOverlay o = read_orbit_overlay(dir / "orbit.json");
    CHECK(o.zeros == r.zeros);
    REQUIRE(o.lambda);
    CHECK(*o.lambda == r.report->factors.lambda);
    CHECK(*o.t0 == r.report->factors.t0);

    write_text_file(dir / "bad_header.csv", "t,x\n1,2\n");
    CHECK_THROWS_AS((void)read_series_csv(dir / "bad_header.csv"), InputError);
    write_text_file(dir / "short.csv", std::string(kSeriesHeader) + "\n1,2,3\n");
    CHECK_THROWS_AS((void)read_series_csv(dir / "short.csv"), InputError);
    write_text_file(dir / "word.csv", std::string(kSeriesHeader) + "\n1,2,3,4,5,6,x,8,9,10,11,12,13\n");
    CHECK_THROWS_AS((void)read_series_csv(dir / "word.csv"), InputError);
    CHECK_THROWS_AS((void)read_series_csv(dir / "absent.csv"), InputError);
    write_text_file(dir / "seeds.json", dump(seeds_to_json({{0.1, 0.2, 1, {}, {}}}, 1, SeedRegion{})));
    CHECK_THROWS_AS((void)read_orbit_overlay(dir / "seeds.json"), InputError);
    write_text_file(dir / "garbage.json", "{ not json");
    CHECK_THROWS_AS((void)read_orbit_overlay(dir / "garbage.json"), InputError);
    fs::remove_all(dir);
}

TEST_CASE("SVG figure")
{
    OrbitConfig cfg;
    cfg.keep_trajectory = true;
    const OrbitResult r = analyze_seed({-0.05, 0.2, 1, {}, {}}, cfg);
    REQUIRE(r.trajectory);
    const fs::path dir = scratch_dir("svg");
    std::ostringstream csv;
    write_series_csv(csv, *r.trajectory);
    write_text_file(dir / "o.csv", csv.str());
    write_text_file(dir / "o.json", dump(to_json(r)));
    const Series s = read_series_csv(dir / "o.csv");
    const OrbitOverlay o = read_orbit_overlay(dir / "o.json");

    const std::string svg = render_orbit_svg(s, o, {.title = "J < 0"});
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("<circle") != std::string::npos);  // sun marker
    CHECK(svg.find("#7b3fa0") != std::string::npos);  // fundamental domain
    CHECK(svg.find("#e8801a") != std::string::npos);  // its image
    std::size_t dashed = 0;
    for (std::size_t p = svg.find("stroke-dasharray"); p != std::string::npos; p = svg.find("stroke-dasharray", p + 1))
        ++dashed;
    CHECK(dashed == r.zeros.size());

    // A planar line has z identically zero: the right panel is a flat line.
    const OrbitResult line = [] {
        OrbitConfig c;
        c.keep_trajectory = true;
        return analyze_orbit({1, 0, 0, -0.5 * kInvSqrtPi, 0, 0}, c);
    }();
    REQUIRE(line.trajectory);
    std::ostringstream lcsv;
    write_series_csv(lcsv, *line.trajectory);
    write_text_file(dir / "line.csv", lcsv.str());
    const std::string flat = render_orbit_svg(read_series_csv(dir / "line.csv"), OrbitOverlay{});
    const std::vector<double> ys = polyline_ys(flat, 1);
    REQUIRE(ys.size() > 10);
    for (double y : ys)
        CHECK(y == ys.front());
    fs::remove_all(dir);
}
