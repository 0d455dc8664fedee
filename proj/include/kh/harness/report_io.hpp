// JSON reports, CSV tables and their readers.
//
// Every floating-point number is written in its shortest round-trip form, so equal
// results give byte-identical files.
#pragma once

#include "kh/harness/orbit_pipeline.hpp"
#include "kh/harness/survey.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace kh::harness {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// Shortest representation that parses back to the same double; "nan", "inf", "-inf" otherwise.
[[nodiscard]] std::string format_double(double v);

[[nodiscard]] Json to_json(const SeedSpec& seed);
[[nodiscard]] Json to_json(const CartesianState& c);
/// Fixed field set: lambda, phi, t0, t2, t_col, J, classification, endpoint_residual,
/// domain_residual, zeros_found.
[[nodiscard]] Json to_json(const SimilarityReport& report);
[[nodiscard]] Json to_json(const OrbitResult& result);
[[nodiscard]] Json to_json(const SurveyAggregate& aggregate);
[[nodiscard]] Json to_json(const SurveyReport& report);
[[nodiscard]] Json seeds_to_json(const std::vector<SeedSpec>& seeds, std::uint64_t rng_seed, const SeedRegion& region);

[[nodiscard]] SeedSpec seed_from_json(const Json& j);

/// One row per sample: t,x,y,z,p_x,p_y,p_z,H,J,p_theta,s,theta,u.
inline constexpr const char* kSeriesHeader = "t,x,y,z,p_x,p_y,p_z,H,J,p_theta,s,theta,u";

/// Samples at every step boundary plus `per_step` interior points of each step,
/// in increasing time.
void write_series_csv(std::ostream& out, const Trajectory& traj, std::size_t per_step = 4);

/// One row per requested seed, ordered by index; failed orbits carry their reason in
/// `status` and leave the analysis columns empty.
inline constexpr const char* kSurveyHeader =
    "index,rng_seed,p_s,p_theta,branch,status,J,lambda,phi,classification,zeros_found,"
    "endpoint_residual,domain_residual,t_col_predicted,t_col_observed";
void write_survey_csv(std::ostream& out, const SurveyReport& report);

/// Writes text to path, creating parent directories. Throws std::runtime_error on failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);
/// JSON text with two-space indentation and a trailing newline.
[[nodiscard]] std::string dump(const Json& j);

class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Series {
    std::vector<double> t, x, y, z, px, py, pz;
};

/// Reads a series CSV written by write_series_csv. Throws InputError when malformed.
[[nodiscard]] Series read_series_csv(const std::filesystem::path& path);

/// What a plot needs from an orbit report.
struct OrbitOverlay {
    std::vector<double> zeros;
    std::optional<double> t0, t2, lambda, phi;
};

/// Reads an orbit report written by the integrate subcommand. Throws InputError when malformed.
[[nodiscard]] OrbitOverlay read_orbit_overlay(const std::filesystem::path& path);

} // namespace kh::harness
