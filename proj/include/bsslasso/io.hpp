#pragma once

// File formats: profile CSV, link JSON, detection report JSON.

#include <bsslasso/fiber_model.hpp>
#include <bsslasso/pipeline.hpp>

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace bsslasso::io {

using nlohmann::json;

// Shortest round-trip decimal form.
std::string format_double(double v);

std::string profile_to_csv(const FrequencyProfile& profile);
FrequencyProfile profile_from_csv(const std::string& text, const std::string& where);
FrequencyProfile read_profile_csv(const std::filesystem::path& path);
void write_profile_csv(const FrequencyProfile& profile, const std::filesystem::path& path);

json link_to_json(const FiberLink& link);
FiberLink link_from_json(const json& j, const std::string& where);
FiberLink read_link(const std::filesystem::path& path);
void write_link(const FiberLink& link, const std::filesystem::path& path);

json constants_to_json(const PhysicalConstants& c);
PhysicalConstants constants_from_json(const json& j, const std::string& where);

json config_to_json(const DetectConfig& config);
// Fields absent from `j` keep the values already in `config`.
void merge_config(const json& j, DetectConfig& config, const std::string& where);

json reconstruct_config_to_json(const ReconstructConfig& config);
void merge_reconstruct_config(const json& j, ReconstructConfig& config, const std::string& where);

struct ReportOptions {
  std::string fitted_profile_ref;  // file name of the fitted profile CSV
  bool record_runtime = false;     // runtime_ms is null otherwise
  std::vector<NaiveMagnitude> naive;
};
json report_to_json(const DetectionReport& report, const ReportOptions& options);
// Estimates, stage coefficients and config; the fitted profile is loaded from
// `fitted_profile_ref` relative to the report's directory.
DetectionReport report_from_json(const json& j, const std::filesystem::path& dir, const std::string& where);
DetectionReport read_report(const std::filesystem::path& path);

json read_json(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
// Writes through a temporary sibling and renames it into place.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
void write_json(const json& j, const std::filesystem::path& path);

// Typed field access raising SchemaError("where.key", ...).
double get_number(const json& j, const std::string& key, const std::string& where);
const json& get_field(const json& j, const std::string& key, const std::string& where);

}  // namespace bsslasso::io
