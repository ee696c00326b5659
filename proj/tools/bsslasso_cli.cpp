// bsslasso: bench generation, detection, magnitude reconstruction, evaluation
// and forward-model validation.

#include <bsslasso/benchgen.hpp>
#include <bsslasso/dictionary.hpp>
#include <bsslasso/io.hpp>
#include <bsslasso/metrics.hpp>
#include <bsslasso/pipeline.hpp>

#include <CLI11.hpp>

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <optional>
#include <thread>

namespace fs = std::filesystem;
using namespace bsslasso;
using io::json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kSolver = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path default_out(const char* leaf) {
  const char* base = std::getenv("BSSLASSO_OUTPUT_DIR");
  return fs::path(base ? base : ".") / leaf;
}

// Runs fn(i) for i in [0, n) on `jobs` threads; returns one status per index.
template <class Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) fn(i);
  };
  if (jobs == 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

int classify(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const SolverError&) {
    return kSolver;
  } catch (const UsageError&) {
    return kUsage;
  } catch (const InvalidInput&) {
    return kData;
  } catch (const SchemaError&) {
    return kData;
  } catch (...) {
    return kData;
  }
}

std::string describe(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const std::exception& ex) {
    return ex.what();
  } catch (...) {
    return "unknown error";
  }
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  json j = io::read_json(path);
  if (!j.is_object()) throw SchemaError(path, "config must be a JSON object");
  return j;
}

// -- gen-bench ------------------------------------------------------------------

struct GenArgs {
  std::string config;
  std::size_t faults = 1, links = 100;
  std::uint64_t seed = 0;
  double noise = 0.0, f_start = 100.0, f_stop = 100000.0, f_step = 100.0;
  std::string out;
  unsigned jobs = 1;
};

void apply_spec_json(const json& j, BenchSpec& s, const std::string& where) {
  const auto num = [&](const char* key, double& dst) {
    if (j.contains(key)) dst = io::get_number(j, key, where);
  };
  const auto count = [&](const char* key, std::size_t& dst) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_number_unsigned()) throw SchemaError(where + "." + key, "expected a nonnegative integer");
    dst = j.at(key).get<std::size_t>();
  };
  count("n_links", s.n_links);
  count("n_faults", s.n_faults);
  num("length_min_m", s.length_min_m);
  num("length_max_m", s.length_max_m);
  num("fault_floor_m", s.fault_floor_m);
  num("min_spacing_m", s.min_spacing_m);
  num("reflection_probability", s.reflection_probability);
  num("loss_min_db", s.loss_min_db);
  num("loss_max_db", s.loss_max_db);
  num("reflectance_max_db", s.reflectance_max_db);
  num("freq_start_hz", s.freq_start_hz);
  num("freq_stop_hz", s.freq_stop_hz);
  num("freq_step_hz", s.freq_step_hz);
  num("dz_m", s.dz_m);
  num("noise_sigma", s.noise_sigma);
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw SchemaError(where + ".seed", "expected a nonnegative integer");
    s.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("constants")) s.constants = io::constants_from_json(j.at("constants"), where + ".constants");
}

int run_gen_bench(CLI::App& app, const GenArgs& a) {
  BenchSpec spec;
  apply_spec_json(load_config_file(a.config), spec, a.config);
  if (app.count("--faults")) spec.n_faults = a.faults;
  if (app.count("--links")) spec.n_links = a.links;
  if (app.count("--seed")) spec.seed = a.seed;
  if (app.count("--noise-sigma")) spec.noise_sigma = a.noise;
  if (app.count("--freq-start")) spec.freq_start_hz = a.f_start;
  if (app.count("--freq-stop")) spec.freq_stop_hz = a.f_stop;
  if (app.count("--freq-step")) spec.freq_step_hz = a.f_step;
  try {
    spec.validate();
  } catch (const InvalidInput& e) {
    throw UsageError(e.what());
  }
  const fs::path out = a.out.empty() ? default_out("bench") : fs::path(a.out);
  fs::create_directories(out);

  std::vector<FiberLink> links(spec.n_links);
  std::vector<std::exception_ptr> errors(spec.n_links);
  parallel_for(spec.n_links, a.jobs, [&](std::size_t i) {
    try {
      BenchLink bl = generate_bench_link(spec, i);
      io::write_profile_csv(bl.profile, out / profile_filename(i));
      links[i] = std::move(bl.link);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i]) {
      std::cerr << "link " << i << ": " << describe(errors[i]) << "\n";
      return classify(errors[i]);
    }
  }
  save_bench_manifest(spec, links, out);
  std::cout << "wrote " << spec.n_links << " links to " << out.string() << "\n";
  return kOk;
}

// -- detect -----------------------------------------------------------------------

struct DetectArgs {
  std::string config, profile, bench, out, mode, dump_dictionary;
  double length = 0.0, grid_step = 10.0, gamma = 0.5, epsilon = 0.05, ebic_gamma = 1.0, alpha_db_km = 0.2,
         group_index = 1.468, amplitude = 1.0;
  std::size_t lambda_count = 100, enumeration_cap = 100000;
  bool intercept = false, fault_clusters_only = false, reconstruct = false, record_runtime = false;
  unsigned jobs = 1;
};

void apply_detect_flags(const CLI::App& app, const DetectArgs& a, DetectConfig& c, ReconstructConfig& rc,
                        const json& file, const std::string& where) {
  io::merge_config(file, c, where);
  if (file.contains("reconstruct")) io::merge_reconstruct_config(file.at("reconstruct"), rc, where + ".reconstruct");
  if (app.count("--mode")) {
    try {
      c.mode = parse_mode(a.mode);
    } catch (const InvalidInput& e) {
      throw UsageError(e.what());
    }
  }
  if (app.count("--grid-step")) c.grid_step_m = a.grid_step;
  if (app.count("--gamma")) c.gamma = a.gamma;
  if (app.count("--epsilon")) c.epsilon = a.epsilon;
  if (app.count("--ebic-gamma")) c.ebic_gamma = a.ebic_gamma;
  if (app.count("--lambda-count")) c.lambda_count = a.lambda_count;
  if (app.count("--enumeration-cap")) c.enumeration_cap = a.enumeration_cap;
  if (app.count("--intercept")) c.intercept = a.intercept;
  if (app.count("--fault-clusters-only")) c.cluster_reflections = !a.fault_clusters_only;
  if (app.count("--alpha-db-km")) c.constants.alpha = PhysicalConstants::alpha_from_db_per_km(a.alpha_db_km);
  if (app.count("--group-index")) c.constants.group_index = a.group_index;
  if (app.count("--amplitude")) c.constants.amplitude = a.amplitude;
  try {
    c.validate();
  } catch (const InvalidInput& e) {
    throw UsageError(e.what());
  }
}

void write_report(const DetectionReport& report, const fs::path& json_path, bool record_runtime,
                  const std::optional<ReconstructConfig>& rc) {
  io::ReportOptions opt;
  opt.fitted_profile_ref = json_path.stem().string() + "_fitted.csv";
  opt.record_runtime = record_runtime;
  opt.naive = naive_magnitudes(report);
  io::write_profile_csv(report.fitted_profile, json_path.parent_path() / opt.fitted_profile_ref);
  json j = io::report_to_json(report, opt);
  if (rc) j["reconstruct_config"] = io::reconstruct_config_to_json(*rc);
  io::write_json(j, json_path);
}

DetectionReport detect_one(const FrequencyProfile& profile, double length, const DetectConfig& c,
                           const std::optional<ReconstructConfig>& rc, const std::string& dump) {
  const Workspace ws = Workspace::prepare(profile, length, c);
  if (!dump.empty()) {
    std::string text;
    const Eigen::MatrixXd& m = ws.dict.matrix;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index k = 0; k < m.cols(); ++k) {
        if (k) text += ',';
        text += io::format_double(m(r, k));
      }
      text += '\n';
    }
    io::write_text_atomic(dump, text);
  }
  DetectionReport report = detect(ws, c);
  if (rc) report = reconstruct_magnitudes(report, c.constants, *rc, &profile);
  return report;
}

int run_detect(CLI::App& app, const DetectArgs& a) {
  DetectConfig c;
  ReconstructConfig rc;
  apply_detect_flags(app, a, c, rc, load_config_file(a.config), a.config);
  const std::optional<ReconstructConfig> rcopt = a.reconstruct ? std::optional(rc) : std::nullopt;

  if (a.bench.empty() == a.profile.empty()) throw UsageError("give exactly one of --profile or --bench");
  if (!a.profile.empty()) {
    if (!(a.length > 0.0)) throw UsageError("--length is required with --profile");
    const FrequencyProfile profile = io::read_profile_csv(a.profile);
    const DetectionReport report = detect_one(profile, a.length, c, rcopt, a.dump_dictionary);
    const fs::path out = a.out.empty() ? default_out("report.json") : fs::path(a.out);
    write_report(report, out, a.record_runtime, rcopt);
    std::cout << "wrote " << out.string() << " (" << report.estimates.size() << " estimates)\n";
    return kOk;
  }

  if (!a.dump_dictionary.empty()) throw UsageError("--dump-dictionary needs a single --profile");
  const Bench bench = load_bench(a.bench);
  const fs::path out = a.out.empty() ? default_out("reports") : fs::path(a.out);
  fs::create_directories(out);
  const std::size_t n = bench.links.size();
  std::vector<std::exception_ptr> errors(n);
  parallel_for(n, a.jobs, [&](std::size_t i) {
    const fs::path path = out / ("report_" + std::to_string(i) + ".json");
    try {
      const BenchLink& bl = bench.links[i];
      write_report(detect_one(bl.profile, bl.link.length_m, c, rcopt, ""), path, a.record_runtime, rcopt);
    } catch (...) {
      errors[i] = std::current_exception();
      io::write_json(json{{"format", "bsslasso-error"}, {"link", i}, {"error", describe(errors[i])}},
                     out / ("error_" + std::to_string(i) + ".json"));
    }
  });
  int code = kOk;
  json index = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) {
      const int k = classify(errors[i]);
      code = std::max(code, k == kSolver ? int{kSolver} : int{kData});
      std::cerr << "link " << i << ": " << describe(errors[i]) << "\n";
      index.push_back({{"link", i}, {"status", "error"}, {"file", "error_" + std::to_string(i) + ".json"}});
    } else {
      index.push_back({{"link", i}, {"status", "ok"}, {"file", "report_" + std::to_string(i) + ".json"}});
    }
  }
  json manifest{{"format", "bsslasso-batch"}, {"bench", fs::path(a.bench).filename().string()}, {"links", index},
                {"config", io::config_to_json(c)}};
  if (rcopt) manifest["reconstruct_config"] = io::reconstruct_config_to_json(rc);
  io::write_json(manifest, out / "batch.json");
  std::cout << "processed " << n << " links into " << out.string() << "\n";
  return code;
}

// -- reconstruct ------------------------------------------------------------------

struct ReconArgs {
  std::string config, report, observed, out;
  bool against_observation = false;
};

int run_reconstruct(CLI::App& app, const ReconArgs& a) {
  ReconstructConfig rc;
  const json file = load_config_file(a.config);
  io::merge_reconstruct_config(file.contains("reconstruct") ? file.at("reconstruct") : file, rc, a.config);
  if (app.count("--against-observation")) rc.score_against_observation = a.against_observation;
  const DetectionReport report = io::read_report(a.report);
  std::optional<FrequencyProfile> observed;
  if (!a.observed.empty()) observed = io::read_profile_csv(a.observed);
  if (rc.score_against_observation && !observed) throw UsageError("--against-observation needs --observed");
  const DetectionReport filled =
      reconstruct_magnitudes(report, report.config.constants, rc, observed ? &*observed : nullptr);
  const fs::path out = a.out.empty() ? default_out("reconstructed.json") : fs::path(a.out);
  write_report(filled, out, false, rc);
  std::cout << "wrote " << out.string() << "\n";
  return kOk;
}

// -- evaluate -----------------------------------------------------------------------

struct EvalArgs {
  std::string bench, out;
  std::vector<std::string> reports;
  double radius = kMatchRadius;
};

int run_evaluate(const EvalArgs& a) {
  const Bench bench = load_bench(a.bench);
  std::vector<FiberLink> truths;
  for (const BenchLink& bl : bench.links) truths.push_back(bl.link);

  std::vector<ModeEvaluation> modes;
  for (const std::string& dir : a.reports) {
    const json batch = io::read_json(fs::path(dir) / "batch.json");
    const json& links = io::get_field(batch, "links", dir);
    if (!links.is_array() || links.size() != truths.size())
      throw SchemaError(dir, "report count does not match the bench");
    DetectConfig c;
    io::merge_config(io::get_field(batch, "config", dir), c, dir + ".config");
    std::vector<std::vector<double>> estimates(truths.size());
    for (std::size_t i = 0; i < truths.size(); ++i) {
      const fs::path path = fs::path(dir) / ("report_" + std::to_string(i) + ".json");
      if (!fs::exists(path)) continue;  // errored link: no estimates
      const DetectionReport r = io::read_report(path);
      if (std::abs(r.length_m - truths[i].length_m) > 1e-9 * truths[i].length_m)
        throw SchemaError(path.string(), "link length does not match the bench");
      for (const Estimate& e : r.estimates) estimates[i].push_back(e.position_m);
    }
    modes.push_back(evaluate_mode(to_string(c.mode), truths, estimates, c.grid_step_m, a.radius));
  }

  const fs::path out = a.out.empty() ? default_out("evaluation") : fs::path(a.out);
  fs::create_directories(out);
  json summary = json::array();
  for (const ModeEvaluation& m : modes) {
    json bands = json::object();
    for (std::size_t b = 0; b < kBandLabels.size(); ++b)
      bands[kBandLabels[b]] = {{"count", m.bands.counts[b]}, {"percent", m.bands.percent(b)}};
    const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    summary.push_back({{"mode", m.label},
                       {"faults", m.bands.total},
                       {"bands", bands},
                       {"contingency",
                        {{"true_positives", m.table.true_positives},
                         {"false_positives", m.table.false_positives},
                         {"false_negatives", m.table.false_negatives},
                         {"true_negatives", m.table.true_negatives},
                         {"sensitivity", opt(m.table.sensitivity())},
                         {"specificity", opt(m.table.specificity())},
                         {"precision", opt(m.table.precision())}}}});
  }
  io::write_json(json{{"format", "bsslasso-evaluation"}, {"radius_m", a.radius}, {"modes", summary}},
                 out / "evaluation.json");
  const std::string text = evaluation_text(modes);
  io::write_text_atomic(out / "evaluation.txt", text);
  io::write_text_atomic(out / "errors.csv", evaluation_csv(modes));
  std::cout << text;
  return kOk;
}

// -- validate-model ------------------------------------------------------------------

struct ValidateArgs {
  std::string link, out;
  double dz = 0.25, f_start = 100.0, f_stop = 100000.0, f_step = 100.0;
};

int run_validate(const ValidateArgs& a) {
  const FiberLink link = io::read_link(a.link);
  const PhysicalConstants c = PhysicalConstants::standard_fiber();
  const std::vector<double> f = frequency_grid(a.f_start, a.f_stop, a.f_step);
  const std::vector<double> z = profile_grid(link, a.dz);
  const FrequencyProfile numeric = frequency_response_numeric(z, time_domain_profile(link, c, z), c, f);
  const FrequencyProfile analytic = frequency_response_analytic(link, c, f);
  const double err = relative_l2_error(numeric, analytic);
  bool reflective = false;
  for (const Event& e : link.events) reflective = reflective || e.reflective();
  const double tol = reflective ? 1e-3 : 1e-6;
  const json j{{"relative_l2_error", err},     {"tolerance", tol}, {"within_tolerance", err < tol},
               {"reflective", reflective},      {"dz_m", a.dz},     {"frequencies", f.size()},
               {"constants", io::constants_to_json(c)}};
  if (!a.out.empty()) io::write_json(j, a.out);
  std::cout << j.dump(2) << "\n";
  return err < tol ? kOk : kData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fiber fault localization from baseband subcarrier sweeps"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen-bench", "generate a randomized bench directory");
  g->add_option("--config", gen.config, "JSON file with bench spec fields");
  g->add_option("--faults", gen.faults, "faults per link (>= 1)");
  g->add_option("--links", gen.links, "number of links");
  g->add_option("--seed", gen.seed, "generator seed");
  g->add_option("--noise-sigma", gen.noise, "std of additive complex noise per component");
  g->add_option("--freq-start", gen.f_start, "first frequency [Hz]");
  g->add_option("--freq-stop", gen.f_stop, "last frequency [Hz]");
  g->add_option("--freq-step", gen.f_step, "frequency step [Hz]");
  g->add_option("--out", gen.out, "output directory");
  g->add_option("--jobs", gen.jobs, "worker threads")->check(CLI::PositiveNumber);

  DetectArgs det;
  auto* d = app.add_subcommand("detect", "locate faults in one profile or a whole bench");
  d->add_option("--config", det.config, "JSON file with detection settings");
  d->add_option("--profile", det.profile, "profile CSV (frequency_hz,re,im)");
  d->add_option("--length", det.length, "link length [m], required with --profile");
  d->add_option("--bench", det.bench, "bench directory for batch mode");
  d->add_option("--out", det.out, "report file (single) or directory (batch)");
  d->add_option("--mode", det.mode, "bss-lasso | bss-1 | sinclasso");
  d->add_option("--grid-step", det.grid_step, "position grid step [m]");
  d->add_option("--gamma", det.gamma, "reduced penalty factor");
  d->add_option("--epsilon", det.epsilon, "reflection sensitivity threshold");
  d->add_option("--ebic-gamma", det.ebic_gamma, "EBIC gamma");
  d->add_option("--lambda-count", det.lambda_count, "points on the lambda path");
  d->add_option("--enumeration-cap", det.enumeration_cap, "treatment combination cap");
  d->add_flag("--intercept", det.intercept, "fit a free offset");
  d->add_flag("--fault-clusters-only", det.fault_clusters_only, "cluster the fault block only");
  d->add_option("--alpha-db-km", det.alpha_db_km, "fiber attenuation [dB/km]");
  d->add_option("--group-index", det.group_index, "group index n");
  d->add_option("--amplitude", det.amplitude, "amplitude scale A");
  d->add_flag("--reconstruct", det.reconstruct, "also reconstruct magnitudes");
  d->add_flag("--record-runtime", det.record_runtime, "write wall-clock runtime into reports");
  d->add_option("--dump-dictionary", det.dump_dictionary, "write the design matrix to this CSV");
  d->add_option("--jobs", det.jobs, "worker threads")->check(CLI::PositiveNumber);

  ReconArgs rec;
  auto* r = app.add_subcommand("reconstruct", "fill magnitudes of an existing report");
  r->add_option("--config", rec.config, "JSON file with reconstruction settings");
  r->add_option("--report", rec.report, "report JSON")->required();
  r->add_option("--observed", rec.observed, "observed profile CSV");
  r->add_flag("--against-observation", rec.against_observation, "score against the observed profile");
  r->add_option("--out", rec.out, "output report JSON");

  EvalArgs ev;
  auto* e = app.add_subcommand("evaluate", "error bands and contingency tables");
  e->add_option("--bench", ev.bench, "bench directory")->required();
  e->add_option("--reports", ev.reports, "batch report directory, repeatable")->required();
  e->add_option("--radius", ev.radius, "match radius [m]")->check(CLI::PositiveNumber);
  e->add_option("--out", ev.out, "output directory");

  ValidateArgs val;
  auto* v = app.add_subcommand("validate-model", "numeric vs closed-form frequency response of a link");
  v->add_option("--link", val.link, "link JSON")->required();
  v->add_option("--dz", val.dz, "quadrature step [m]");
  v->add_option("--freq-start", val.f_start, "first frequency [Hz]");
  v->add_option("--freq-stop", val.f_stop, "last frequency [Hz]");
  v->add_option("--freq-step", val.f_step, "frequency step [Hz]");
  v->add_option("--out", val.out, "write the result JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*g) return run_gen_bench(*g, gen);
    if (*d) return run_detect(*d, det);
    if (*r) return run_reconstruct(*r, rec);
    if (*e) return run_evaluate(ev);
    if (*v) return run_validate(val);
  } catch (const UsageError& err) {
    std::cerr << "usage error: " << err.what() << "\n";
    return kUsage;
  } catch (const SolverError& err) {
    std::cerr << "solver did not converge: " << err.what() << " (kkt " << err.kkt_violation() << ")\n";
    return kSolver;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kData;
  }
  return kUsage;
}
