#include <bsslasso/io.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

namespace bsslasso::io {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// -- text files ---------------------------------------------------------------

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError(path.string(), "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

json read_json(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string(), std::string("malformed JSON: ") + e.what());
  }
}

void write_json(const json& j, const std::filesystem::path& path) { write_text_atomic(path, j.dump(2) + "\n"); }

const json& get_field(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw SchemaError(where + "." + key, "missing field");
  return *it;
}

double get_number(const json& j, const std::string& key, const std::string& where) {
  const json& v = get_field(j, key, where);
  if (!v.is_number()) throw SchemaError(where + "." + key, "expected a number");
  return v.get<double>();
}

namespace {

bool get_bool(const json& j, const std::string& key, const std::string& where) {
  const json& v = get_field(j, key, where);
  if (!v.is_boolean()) throw SchemaError(where + "." + key, "expected a boolean");
  return v.get<bool>();
}

std::size_t get_index(const json& j, const std::string& key, const std::string& where) {
  const json& v = get_field(j, key, where);
  if (!v.is_number_unsigned()) throw SchemaError(where + "." + key, "expected a nonnegative integer");
  return v.get<std::size_t>();
}

std::optional<double> get_optional_number(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return get_number(j, key, where);
}

json optional_number(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

double parse_double(std::string_view field, const std::string& where) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) field.remove_suffix(1);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size())
    throw SchemaError(where, "malformed number '" + std::string(field) + "'");
  return v;
}

}  // namespace

// -- profile CSV --------------------------------------------------------------

std::string profile_to_csv(const FrequencyProfile& profile) {
  std::string out = "frequency_hz,re,im\n";
  for (std::size_t i = 0; i < profile.size(); ++i) {
    out += format_double(profile.frequencies[i]);
    out += ',';
    out += format_double(profile.samples[i].real());
    out += ',';
    out += format_double(profile.samples[i].imag());
    out += '\n';
  }
  return out;
}

FrequencyProfile profile_from_csv(const std::string& text, const std::string& where) {
  FrequencyProfile p;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      if (line != "frequency_hz,re,im") throw SchemaError(where + ":1", "expected header 'frequency_hz,re,im'");
      header = true;
      continue;
    }
    const std::string lw = where + ":" + std::to_string(line_no);
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos)
      throw SchemaError(lw, "expected three comma-separated fields");
    const std::string_view sv(line);
    p.frequencies.push_back(parse_double(sv.substr(0, c1), lw));
    const double re = parse_double(sv.substr(c1 + 1, c2 - c1 - 1), lw);
    const double im = parse_double(sv.substr(c2 + 1), lw);
    p.samples.emplace_back(re, im);
  }
  if (!header) throw SchemaError(where, "empty profile file");
  if (!text.empty() && text.back() != '\n') throw SchemaError(where, "truncated file (no final newline)");
  try {
    p.validate();
  } catch (const InvalidInput& e) {
    throw SchemaError(where, e.what());
  }
  return p;
}

FrequencyProfile read_profile_csv(const std::filesystem::path& path) {
  return profile_from_csv(read_text(path), path.string());
}

void write_profile_csv(const FrequencyProfile& profile, const std::filesystem::path& path) {
  write_text_atomic(path, profile_to_csv(profile));
}

// -- link JSON ----------------------------------------------------------------

json link_to_json(const FiberLink& link) {
  json events = json::array();
  for (const Event& e : link.events) {
    events.push_back({{"position_m", e.position_m}, {"loss_db", e.loss_db}, {"reflectance_db", optional_number(e.reflectance_db)}});
  }
  json j{{"length_m", link.length_m}, {"events", std::move(events)}};
  j["seed"] = link.seed ? json(*link.seed) : json(nullptr);
  return j;
}

FiberLink link_from_json(const json& j, const std::string& where) {
  FiberLink link;
  link.length_m = get_number(j, "length_m", where);
  const json& events = get_field(j, "events", where);
  if (!events.is_array()) throw SchemaError(where + ".events", "expected an array");
  for (std::size_t i = 0; i < events.size(); ++i) {
    const std::string ew = where + ".events[" + std::to_string(i) + "]";
    Event e;
    e.position_m = get_number(events[i], "position_m", ew);
    e.loss_db = get_number(events[i], "loss_db", ew);
    e.reflectance_db = get_optional_number(events[i], "reflectance_db", ew);
    link.events.push_back(e);
  }
  if (j.contains("seed") && !j.at("seed").is_null()) {
    if (!j.at("seed").is_number_unsigned()) throw SchemaError(where + ".seed", "expected a nonnegative integer");
    link.seed = j.at("seed").get<std::uint64_t>();
  }
  try {
    link.validate();
  } catch (const InvalidInput& e) {
    throw SchemaError(where, e.what());
  }
  return link;
}

FiberLink read_link(const std::filesystem::path& path) { return link_from_json(read_json(path), path.string()); }

void write_link(const FiberLink& link, const std::filesystem::path& path) { write_json(link_to_json(link), path); }

// -- config -------------------------------------------------------------------

json constants_to_json(const PhysicalConstants& c) {
  return json{{"alpha_per_m", c.alpha}, {"group_index", c.group_index}, {"light_speed_m_s", c.light_speed},
              {"amplitude", c.amplitude}};
}

PhysicalConstants constants_from_json(const json& j, const std::string& where) {
  PhysicalConstants c = PhysicalConstants::standard_fiber();
  if (!j.is_object()) throw SchemaError(where, "expected an object");
  if (j.contains("alpha_per_m")) c.alpha = get_number(j, "alpha_per_m", where);
  if (j.contains("alpha_db_per_km"))
    c.alpha = PhysicalConstants::alpha_from_db_per_km(get_number(j, "alpha_db_per_km", where));
  if (j.contains("group_index")) c.group_index = get_number(j, "group_index", where);
  if (j.contains("light_speed_m_s")) c.light_speed = get_number(j, "light_speed_m_s", where);
  if (j.contains("amplitude")) c.amplitude = get_number(j, "amplitude", where);
  try {
    c.validate();
  } catch (const InvalidInput& e) {
    throw SchemaError(where, e.what());
  }
  return c;
}

json config_to_json(const DetectConfig& c) {
  return json{{"mode", to_string(c.mode)},
              {"grid_step_m", c.grid_step_m},
              {"gamma", c.gamma},
              {"epsilon", c.epsilon},
              {"ebic_gamma", c.ebic_gamma},
              {"lambda_count", c.lambda_count},
              {"lambda_decades", c.lambda_decades},
              {"intercept", c.intercept},
              {"cluster_reflections", c.cluster_reflections},
              {"enumeration_cap", c.enumeration_cap},
              {"reflective_threshold", c.reflective_threshold},
              {"reflection_attach_radius_m", c.reflection_attach_radius_m},
              {"constants", constants_to_json(c.constants)},
              {"solver",
               {{"max_sweeps", c.solver.max_sweeps},
                {"update_tolerance", c.solver.update_tolerance},
                {"kkt_tolerance", c.solver.kkt_tolerance},
                {"polish", c.solver.polish}}}};
}

void merge_config(const json& j, DetectConfig& c, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where, "expected an object");
  if (j.contains("mode")) {
    const json& m = j.at("mode");
    if (!m.is_string()) throw SchemaError(where + ".mode", "expected a string");
    try {
      c.mode = parse_mode(m.get<std::string>());
    } catch (const InvalidInput& e) {
      throw SchemaError(where + ".mode", e.what());
    }
  }
  if (j.contains("grid_step_m")) c.grid_step_m = get_number(j, "grid_step_m", where);
  if (j.contains("gamma")) c.gamma = get_number(j, "gamma", where);
  if (j.contains("epsilon")) c.epsilon = get_number(j, "epsilon", where);
  if (j.contains("ebic_gamma")) c.ebic_gamma = get_number(j, "ebic_gamma", where);
  if (j.contains("lambda_count")) c.lambda_count = get_index(j, "lambda_count", where);
  if (j.contains("lambda_decades")) c.lambda_decades = get_number(j, "lambda_decades", where);
  if (j.contains("intercept")) c.intercept = get_bool(j, "intercept", where);
  if (j.contains("cluster_reflections")) c.cluster_reflections = get_bool(j, "cluster_reflections", where);
  if (j.contains("enumeration_cap")) c.enumeration_cap = get_index(j, "enumeration_cap", where);
  if (j.contains("reflective_threshold")) c.reflective_threshold = get_number(j, "reflective_threshold", where);
  if (j.contains("reflection_attach_radius_m"))
    c.reflection_attach_radius_m = get_number(j, "reflection_attach_radius_m", where);
  if (j.contains("constants")) c.constants = constants_from_json(j.at("constants"), where + ".constants");
  if (j.contains("solver")) {
    const json& s = j.at("solver");
    const std::string sw = where + ".solver";
    if (s.contains("max_sweeps")) c.solver.max_sweeps = get_index(s, "max_sweeps", sw);
    if (s.contains("update_tolerance")) c.solver.update_tolerance = get_number(s, "update_tolerance", sw);
    if (s.contains("kkt_tolerance")) c.solver.kkt_tolerance = get_number(s, "kkt_tolerance", sw);
    if (s.contains("polish")) c.solver.polish = get_bool(s, "polish", sw);
  }
}

json reconstruct_config_to_json(const ReconstructConfig& c) {
  return json{{"loss_max_db", c.loss_max_db},
              {"loss_coarse_step_db", c.loss_coarse_step_db},
              {"loss_fine_step_db", c.loss_fine_step_db},
              {"loss_fine_halfwidth_db", c.loss_fine_halfwidth_db},
              {"reflectance_max_db", c.reflectance_max_db},
              {"reflectance_step_db", c.reflectance_step_db},
              {"score_against_observation", c.score_against_observation},
              {"exhaustive_cap", c.exhaustive_cap}};
}

void merge_reconstruct_config(const json& j, ReconstructConfig& c, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where, "expected an object");
  if (j.contains("loss_max_db")) c.loss_max_db = get_number(j, "loss_max_db", where);
  if (j.contains("loss_coarse_step_db")) c.loss_coarse_step_db = get_number(j, "loss_coarse_step_db", where);
  if (j.contains("loss_fine_step_db")) c.loss_fine_step_db = get_number(j, "loss_fine_step_db", where);
  if (j.contains("loss_fine_halfwidth_db")) c.loss_fine_halfwidth_db = get_number(j, "loss_fine_halfwidth_db", where);
  if (j.contains("reflectance_max_db")) c.reflectance_max_db = get_number(j, "reflectance_max_db", where);
  if (j.contains("reflectance_step_db")) c.reflectance_step_db = get_number(j, "reflectance_step_db", where);
  if (j.contains("score_against_observation"))
    c.score_against_observation = get_bool(j, "score_against_observation", where);
  if (j.contains("exhaustive_cap")) c.exhaustive_cap = get_index(j, "exhaustive_cap", where);
}

// -- report -------------------------------------------------------------------

namespace {

const char* failure_name(MagnitudeFailure f) {
  return f == MagnitudeFailure::NegativeRadicand ? "negative_radicand" : "zero_level";
}

Stage parse_stage(const std::string& s, const std::string& where) {
  for (Stage st : {Stage::Selection, Stage::Correction2, Stage::Correction3, Stage::Treated}) {
    if (to_string(st) == s) return st;
  }
  throw SchemaError(where, "unknown stage '" + s + "'");
}

Block parse_block(const std::string& s, const std::string& where) {
  if (s == "fault") return Block::Fault;
  if (s == "reflection") return Block::Reflection;
  throw SchemaError(where, "unknown block '" + s + "'");
}

json sparse(const Eigen::VectorXd& v, double skip) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v(i) != skip) out.push_back(json::array({i, v(i)}));
  }
  return out;
}

Eigen::VectorXd dense(const json& j, std::size_t size, double fill, const std::string& where) {
  if (!j.is_array()) throw SchemaError(where, "expected an array of [index, value] pairs");
  Eigen::VectorXd v = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(size), fill);
  for (const json& e : j) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_unsigned() || !e[1].is_number())
      throw SchemaError(where, "expected [index, value]");
    const auto i = e[0].get<std::size_t>();
    if (i >= size) throw SchemaError(where, "index out of range");
    v(static_cast<Eigen::Index>(i)) = e[1].get<double>();
  }
  return v;
}

}  // namespace

json report_to_json(const DetectionReport& r, const ReportOptions& options) {
  json estimates = json::array();
  for (std::size_t i = 0; i < r.estimates.size(); ++i) {
    const Estimate& e = r.estimates[i];
    json je{{"position_m", e.position_m},
            {"is_reflective", e.is_reflective},
            {"loss_db", optional_number(e.loss_db)},
            {"reflectance_db", optional_number(e.reflectance_db)},
            {"grid_index", e.grid_index},
            {"fault_coefficient", e.fault_coefficient},
            {"reflection_coefficient", e.reflection_coefficient},
            {"cluster", {{"first", e.source.first}, {"last", e.source.last}}}};
    if (i < options.naive.size()) {
      const NaiveMagnitude& n = options.naive[i];
      json jn{{"loss_db", optional_number(n.loss_db)},
              {"loss_failure", n.loss_failure ? json(failure_name(*n.loss_failure)) : json(nullptr)}};
      if (e.is_reflective) {
        jn["reflectance_db"] = optional_number(n.reflectance_db);
        jn["reflectance_failure"] =
            n.reflectance_failure ? json(failure_name(*n.reflectance_failure)) : json(nullptr);
      }
      je["naive"] = std::move(jn);
    }
    estimates.push_back(std::move(je));
  }
  json clusters = json::array();
  for (const Cluster& c : r.clusters) clusters.push_back({{"first", c.first}, {"last", c.last}, {"block", to_string(c.block)}});
  json stages = json::array();
  for (const StageOutput& s : r.diagnostics) {
    json js{{"stage", to_string(s.stage)}, {"lambda", s.lambda}, {"ebic", s.ebic}, {"rss", s.rss},
            {"nnz", s.nnz}, {"size", s.beta.size()}, {"beta", sparse(s.beta, 0.0)}};
    js["weights"] = s.weights_used.size() ? sparse(s.weights_used, 1.0) : json(nullptr);
    stages.push_back(std::move(js));
  }
  json j;
  j["format"] = "bsslasso-report";
  j["version"] = 1;
  j["length_m"] = r.length_m;
  j["grid_size"] = r.grid_size;
  j["estimates"] = std::move(estimates);
  j["clusters"] = std::move(clusters);
  j["treatment"] = {{"combinations", r.combinations}, {"narrowed", r.narrowed}};
  j["stage_diagnostics"] = std::move(stages);
  j["fitted_profile_ref"] = options.fitted_profile_ref.empty() ? json(nullptr) : json(options.fitted_profile_ref);
  j["runtime_ms"] = options.record_runtime ? json(r.runtime_ms) : json(nullptr);
  j["config"] = config_to_json(r.config);
  return j;
}

DetectionReport report_from_json(const json& j, const std::filesystem::path& dir, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where, "expected an object");
  const json& format = get_field(j, "format", where);
  if (!format.is_string() || format.get<std::string>() != "bsslasso-report")
    throw SchemaError(where + ".format", "not a detection report");
  DetectionReport r;
  r.length_m = get_number(j, "length_m", where);
  r.grid_size = get_index(j, "grid_size", where);
  merge_config(get_field(j, "config", where), r.config, where + ".config");

  const json& estimates = get_field(j, "estimates", where);
  if (!estimates.is_array()) throw SchemaError(where + ".estimates", "expected an array");
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const std::string ew = where + ".estimates[" + std::to_string(i) + "]";
    const json& je = estimates[i];
    Estimate e;
    e.position_m = get_number(je, "position_m", ew);
    e.is_reflective = get_bool(je, "is_reflective", ew);
    e.loss_db = get_optional_number(je, "loss_db", ew);
    e.reflectance_db = get_optional_number(je, "reflectance_db", ew);
    e.grid_index = get_index(je, "grid_index", ew);
    e.fault_coefficient = get_number(je, "fault_coefficient", ew);
    e.reflection_coefficient = get_number(je, "reflection_coefficient", ew);
    const json& c = get_field(je, "cluster", ew);
    e.source = Cluster{get_index(c, "first", ew + ".cluster"), get_index(c, "last", ew + ".cluster"), Block::Fault};
    r.estimates.push_back(e);
  }
  const json& clusters = get_field(j, "clusters", where);
  if (!clusters.is_array()) throw SchemaError(where + ".clusters", "expected an array");
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const std::string cw = where + ".clusters[" + std::to_string(i) + "]";
    const json& block = get_field(clusters[i], "block", cw);
    if (!block.is_string()) throw SchemaError(cw + ".block", "expected a string");
    r.clusters.push_back(Cluster{get_index(clusters[i], "first", cw), get_index(clusters[i], "last", cw),
                                 parse_block(block.get<std::string>(), cw + ".block")});
  }
  if (j.contains("treatment")) {
    r.combinations = get_index(j.at("treatment"), "combinations", where + ".treatment");
    r.narrowed = get_bool(j.at("treatment"), "narrowed", where + ".treatment");
  }
  const json& stages = get_field(j, "stage_diagnostics", where);
  if (!stages.is_array()) throw SchemaError(where + ".stage_diagnostics", "expected an array");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const std::string sw = where + ".stage_diagnostics[" + std::to_string(i) + "]";
    const json& js = stages[i];
    StageOutput s;
    const json& name = get_field(js, "stage", sw);
    if (!name.is_string()) throw SchemaError(sw + ".stage", "expected a string");
    s.stage = parse_stage(name.get<std::string>(), sw + ".stage");
    s.lambda = get_number(js, "lambda", sw);
    s.ebic = get_number(js, "ebic", sw);
    s.rss = get_number(js, "rss", sw);
    s.nnz = get_index(js, "nnz", sw);
    const std::size_t size = get_index(js, "size", sw);
    s.beta = dense(get_field(js, "beta", sw), size, 0.0, sw + ".beta");
    if (js.contains("weights") && !js.at("weights").is_null())
      s.weights_used = dense(js.at("weights"), size, 1.0, sw + ".weights");
    r.diagnostics.push_back(std::move(s));
  }
  if (j.contains("runtime_ms") && j.at("runtime_ms").is_number()) r.runtime_ms = j.at("runtime_ms").get<double>();
  if (j.contains("fitted_profile_ref") && j.at("fitted_profile_ref").is_string())
    r.fitted_profile = read_profile_csv(dir / j.at("fitted_profile_ref").get<std::string>());
  return r;
}

DetectionReport read_report(const std::filesystem::path& path) {
  return report_from_json(read_json(path), path.parent_path(), path.string());
}

}  // namespace bsslasso::io
