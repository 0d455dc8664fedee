#include "kh/harness/report_io.hpp"

#include "kh/dynamics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

namespace kh::harness {

std::string format_double(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::string csv_field(std::string text)
{
    for (char& c : text)
        if (c == ',' || c == '\n' || c == '\r' || c == '"')
            c = ';';
    return text;
}

std::string csv_number(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

} // namespace

Json to_json(const SeedSpec& seed)
{
    Json j;
    j["p_s"] = seed.ps;
    j["p_theta"] = seed.ptheta;
    j["branch"] = seed.branch;
    j["rng_seed"] = seed.rng_seed ? Json(*seed.rng_seed) : Json(nullptr);
    j["index"] = seed.index ? Json(*seed.index) : Json(nullptr);
    return j;
}

SeedSpec seed_from_json(const Json& j)
{
    SeedSpec s;
    s.ps = j.at("p_s").get<double>();
    s.ptheta = j.at("p_theta").get<double>();
    s.branch = j.value("branch", 1);
    if (j.contains("rng_seed") && !j["rng_seed"].is_null())
        s.rng_seed = j["rng_seed"].get<std::uint64_t>();
    if (j.contains("index") && !j["index"].is_null())
        s.index = j["index"].get<std::uint64_t>();
    return s;
}

Json to_json(const CartesianState& c)
{
    return Json{{"x", c.x}, {"y", c.y}, {"z", c.z}, {"p_x", c.px}, {"p_y", c.py}, {"p_z", c.pz}};
}

Json to_json(const SimilarityReport& r)
{
    Json j;
    j["lambda"] = r.factors.lambda;
    j["phi"] = r.factors.phi;
    j["t0"] = r.factors.t0;
    j["t2"] = r.factors.t2;
    j["t_col"] = optional_number(r.factors.t_col);
    j["J"] = r.J;
    j["classification"] = std::string(to_string(r.classification));
    j["endpoint_residual"] = r.endpoint_residual;
    j["domain_residual"] = r.domain_residual;
    j["zeros_found"] = r.zeros_found;
    return j;
}

Json to_json(const OrbitResult& r)
{
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "orbit";
    j["status"] = r.ok() ? std::string("ok") : r.failure;
    j["seed"] = r.seed ? to_json(*r.seed) : Json(nullptr);
    j["initial_state"] = to_json(r.initial);
    j["invariants"] = Json{{"H", r.invariants.H}, {"J", r.invariants.J}, {"p_theta", r.invariants.ptheta}};
    j["classification"] = std::string(to_string(r.classification));
    j["termination"] = std::string(to_string(r.termination));
    j["flags"] = Json{{"planar", r.planar},
                      {"axis_proximity", r.axis_proximity},
                      {"energy_drift_exceeded", r.energy_drift_exceeded}};
    j["zeros"] = r.zeros;
    j["conservation"] = Json{{"max_abs_H", r.conservation.max_abs_H},
                             {"max_dJ", r.conservation.max_dJ},
                             {"max_dp_theta", r.conservation.max_dptheta},
                             {"max_step_energy_defect", r.conservation.max_step_energy_defect}};
    if (r.domain) {
        j["domain"] = Json{{"t0", r.domain->t0}, {"t1", r.domain->t1}, {"t2", r.domain->t2}};
    } else {
        j["domain"] = nullptr;
    }
    if (r.report) {
        j["similarity"] = to_json(*r.report);
        j["shifts_checked"] = r.report->shifts_checked;
    } else {
        j["similarity"] = nullptr;
        j["shifts_checked"] = Json::array();
    }
    Json col;
    col["predicted"] = r.report ? optional_number(r.report->factors.t_col) : Json(nullptr);
    col["observed"] = optional_number(r.t_col_observed);
    col["termination"] = r.collision_termination ? Json(std::string(to_string(*r.collision_termination)))
                                                 : Json(nullptr);
    j["collision"] = col;
    return j;
}

Json to_json(const SurveyAggregate& a)
{
    Json j;
    j["requested"] = a.requested;
    j["succeeded"] = a.succeeded;
    j["failed"] = a.failed;
    j["families"] = Json{{"FutureCollision", a.future_collision},
                         {"PastCollision", a.past_collision},
                         {"QuasiPeriodic", a.quasi_periodic}};
    j["table1"] = Json{{"checked", a.table1_checked}, {"violations", a.table1_violations}};
    j["three_zeros"] = Json{{"candidates", a.a_candidates},
                            {"reached", a.three_zeros},
                            {"fraction", a.three_zero_fraction}};
    j["t_col"] = Json{{"checked", a.t_col_checked},
                      {"violations", a.t_col_violations},
                      {"max_relative_error", a.max_t_col_rel_error}};
    j["max_abs_J"] = a.max_abs_J;
    j["max_endpoint_residual"] = a.max_endpoint_residual;
    j["max_domain_residual"] = a.max_domain_residual;
    return j;
}

namespace {

Json region_json(const SeedRegion& r)
{
    return Json{{"p_s_min", r.ps_min},
                {"p_s_max", r.ps_max},
                {"p_theta_min", r.ptheta_min},
                {"p_theta_max", r.ptheta_max},
                {"margin", r.margin}};
}

Json row_json(const OrbitResult& r)
{
    Json row;
    row["index"] = r.seed && r.seed->index ? Json(*r.seed->index) : Json(nullptr);
    row["seed"] = r.seed ? to_json(*r.seed) : Json(nullptr);
    row["J"] = r.report->J;
    row["lambda"] = r.report->factors.lambda;
    row["phi"] = r.report->factors.phi;
    row["classification"] = std::string(to_string(r.report->classification));
    row["zeros_found"] = r.report->zeros_found;
    row["endpoint_residual"] = r.report->endpoint_residual;
    row["domain_residual"] = r.report->domain_residual;
    row["t_col_predicted"] = optional_number(r.report->factors.t_col);
    row["t_col_observed"] = optional_number(r.t_col_observed);
    return row;
}

} // namespace

Json to_json(const SurveyReport& report)
{
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "survey";
    j["n"] = report.config.n;
    j["rng_seed"] = report.config.rng_seed;
    j["region"] = region_json(report.config.region);
    j["aggregate"] = to_json(report.aggregate);
    Json rows = Json::array();
    Json failures = Json::array();
    for (const OrbitResult& r : report.results) {
        if (r.ok()) {
            rows.push_back(row_json(r));
        } else {
            Json f;
            f["index"] = r.seed && r.seed->index ? Json(*r.seed->index) : Json(nullptr);
            f["seed"] = r.seed ? to_json(*r.seed) : Json(nullptr);
            f["reason"] = r.failure;
            f["zeros_found"] = r.zeros.size();
            failures.push_back(f);
        }
    }
    j["rows"] = rows;
    j["failures"] = failures;
    return j;
}

Json seeds_to_json(const std::vector<SeedSpec>& seeds, std::uint64_t rng_seed, const SeedRegion& region)
{
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "seeds";
    j["rng_seed"] = rng_seed;
    j["region"] = region_json(region);
    Json list = Json::array();
    for (const SeedSpec& s : seeds) {
        Json e = to_json(s);
        const CartesianState c = seed_zero_energy(s);
        e["state"] = to_json(c);
        e["H"] = hamiltonian_cartesian(c);
        e["J"] = dilational_momentum(c);
        list.push_back(e);
    }
    j["seeds"] = list;
    return j;
}

void write_series_csv(std::ostream& out, const Trajectory& traj, std::size_t per_step)
{
    out << kSeriesHeader << '\n';
    auto row = [&](double t) {
        const CartesianState c = traj.sample(t);
        std::optional<AdaptedState> a;
        if (c.planar_radius_sq() > 0.0)
            a = traj.sample_adapted(t);
        const double nan = std::numeric_limits<double>::quiet_NaN();
        const double values[] = {t,
                                 c.x,
                                 c.y,
                                 c.z,
                                 c.px,
                                 c.py,
                                 c.pz,
                                 hamiltonian_cartesian(c),
                                 dilational_momentum(c),
                                 angular_momentum(c),
                                 a ? a->s : nan,
                                 a ? a->theta : nan,
                                 a ? a->u : nan};
        bool first = true;
        for (double v : values) {
            if (!first)
                out << ',';
            out << format_double(v);
            first = false;
        }
        out << '\n';
    };
    for (const DenseSegment& seg : traj.segments()) {
        const double lo = seg.t_lo();
        const double hi = seg.t_hi();
        for (std::size_t j = 0; j <= per_step; ++j)
            row(lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(per_step + 1));
    }
    row(traj.t_max());
}

void write_survey_csv(std::ostream& out, const SurveyReport& report)
{
    out << kSurveyHeader << '\n';
    for (const OrbitResult& r : report.results) {
        const SeedSpec seed = r.seed.value_or(SeedSpec{});
        out << (seed.index ? std::to_string(*seed.index) : std::string()) << ','
            << (seed.rng_seed ? std::to_string(*seed.rng_seed) : std::string()) << ',' << format_double(seed.ps) << ','
            << format_double(seed.ptheta) << ',' << seed.branch << ',' << csv_field(r.ok() ? "ok" : r.failure) << ',';
        if (r.report) {
            const SimilarityReport& rep = *r.report;
            out << format_double(rep.J) << ',' << format_double(rep.factors.lambda) << ','
                << format_double(rep.factors.phi) << ',' << to_string(rep.classification) << ',' << rep.zeros_found
                << ',' << format_double(rep.endpoint_residual) << ',' << format_double(rep.domain_residual) << ','
                << csv_number(rep.factors.t_col) << ',' << csv_number(r.t_col_observed);
        } else {
            out << format_double(r.invariants.J) << ",,," << to_string(r.classification) << ',' << r.zeros.size()
                << ",,,,";
        }
        out << '\n';
    }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

void write_text_file(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    f << text;
    if (!f)
        throw std::runtime_error("error writing " + path.string());
}

namespace {

double parse_field(std::string_view text, const std::string& where)
{
    double v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw InputError(where + ": not a number: '" + std::string(text) + "'");
    return v;
}

} // namespace

Series read_series_csv(const std::filesystem::path& path)
{
    std::ifstream f(path);
    if (!f)
        throw InputError("cannot open " + path.string());
    std::string line;
    if (!std::getline(f, line) || line != kSeriesHeader)
        throw InputError(path.string() + ": missing or unexpected header (want " + kSeriesHeader + ")");
    Series s;
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty())
            continue;
        std::vector<std::string_view> fields;
        std::string_view rest(line);
        for (;;) {
            const auto comma = rest.find(',');
            fields.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos)
                break;
            rest.remove_prefix(comma + 1);
        }
        const std::string where = path.string() + ":" + std::to_string(lineno);
        if (fields.size() != 13)
            throw InputError(where + ": expected 13 fields, got " + std::to_string(fields.size()));
        s.t.push_back(parse_field(fields[0], where));
        s.x.push_back(parse_field(fields[1], where));
        s.y.push_back(parse_field(fields[2], where));
        s.z.push_back(parse_field(fields[3], where));
        s.px.push_back(parse_field(fields[4], where));
        s.py.push_back(parse_field(fields[5], where));
        s.pz.push_back(parse_field(fields[6], where));
    }
    if (s.t.empty())
        throw InputError(path.string() + ": no samples");
    return s;
}

OrbitOverlay read_orbit_overlay(const std::filesystem::path& path)
{
    std::ifstream f(path);
    if (!f)
        throw InputError("cannot open " + path.string());
    Json j;
    try {
        j = Json::parse(f);
    } catch (const Json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
    try {
        if (j.at("kind").get<std::string>() != "orbit")
            throw InputError(path.string() + ": not an orbit report");
        OrbitOverlay o;
        o.zeros = j.at("zeros").get<std::vector<double>>();
        const Json& sim = j.at("similarity");
        if (!sim.is_null()) {
            o.t0 = sim.at("t0").get<double>();
            o.t2 = sim.at("t2").get<double>();
            o.lambda = sim.at("lambda").get<double>();
            o.phi = sim.at("phi").get<double>();
        }
        return o;
    } catch (const Json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

} // namespace kh::harness
