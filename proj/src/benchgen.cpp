#include <bsslasso/benchgen.hpp>

#include <bsslasso/io.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace bsslasso {

void BenchSpec::validate() const {
  if (n_links == 0) throw InvalidInput("bench needs at least one link");
  if (n_faults == 0) throw InvalidInput("bench needs at least one fault per link");
  if (!(length_min_m > 0.0) || !(length_max_m >= length_min_m)) throw InvalidInput("invalid length range");
  if (!(fault_floor_m >= 0.0) || !(fault_floor_m <= length_min_m))
    throw InvalidInput("fault floor must not exceed the shortest link");
  if (!(min_spacing_m >= 0.0)) throw InvalidInput("minimum spacing must be >= 0");
  if (!(reflection_probability >= 0.0 && reflection_probability <= 1.0))
    throw InvalidInput("reflection probability must lie in [0, 1]");
  if (!(loss_min_db >= 0.0) || !(loss_max_db >= loss_min_db)) throw InvalidInput("invalid loss range");
  if (!(reflectance_max_db > 0.0)) throw InvalidInput("reflectance maximum must be positive");
  if (!(dz_m > 0.0)) throw InvalidInput("profile grid step must be positive");
  if (!(noise_sigma >= 0.0)) throw InvalidInput("noise sigma must be >= 0");
  if (spacing_retries == 0) throw InvalidInput("spacing retries must be positive");
  constants.validate();
  (void)frequencies();
}

std::vector<double> BenchSpec::frequencies() const { return frequency_grid(freq_start_hz, freq_stop_hz, freq_step_hz); }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

LinkRng::LinkRng(std::uint64_t seed, std::uint64_t link_index, std::uint64_t stream)
    : key_(splitmix64(splitmix64(splitmix64(seed) ^ link_index) ^ stream)) {}

std::uint64_t LinkRng::next_u64() { return splitmix64(key_ ^ splitmix64(counter_++)); }

double LinkRng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double LinkRng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

constexpr std::size_t kDrawsPerLength = 100;

FiberLink generate_link(const BenchSpec& spec, std::size_t index) {
  LinkRng rng(spec.seed, index);
  FiberLink link;
  link.length_m = rng.uniform(spec.length_min_m, spec.length_max_m);
  link.seed = spec.seed;

  std::vector<double> positions;
  const std::size_t extra = spec.n_faults - 1;
  std::size_t attempt = 0;
  while (true) {
    positions.clear();
    for (std::size_t i = 0; i < extra; ++i) positions.push_back(rng.uniform(spec.fault_floor_m, link.length_m));
    positions.push_back(link.length_m);
    std::sort(positions.begin(), positions.end());
    bool ok = true;
    for (std::size_t i = 1; i < positions.size(); ++i) {
      if (!(positions[i] - positions[i - 1] >= spec.min_spacing_m) || !(positions[i] > positions[i - 1])) ok = false;
    }
    if (ok) break;
    if (++attempt >= spec.spacing_retries)
      throw NumericalError("link " + std::to_string(index) + ": fault spacing not met after " +
                           std::to_string(spec.spacing_retries) + " attempts");
    // a window too short for the extra faults gets a fresh length
    if (attempt % kDrawsPerLength == 0) link.length_m = rng.uniform(spec.length_min_m, spec.length_max_m);
  }

  for (double x : positions) {
    Event e;
    e.position_m = x;
    const bool reflective = rng.uniform() < spec.reflection_probability;
    e.loss_db = rng.uniform(spec.loss_min_db, spec.loss_max_db);
    const double u = rng.uniform();
    if (reflective) e.reflectance_db = spec.reflectance_max_db * (1.0 - u);
    link.events.push_back(e);
  }
  link.validate();
  return link;
}

FrequencyProfile synthesize_profile(const FiberLink& link, const BenchSpec& spec, std::size_t index) {
  const std::vector<double> z = profile_grid(link, spec.dz_m);
  const std::vector<double> p = time_domain_profile(link, spec.constants, z);
  FrequencyProfile profile = frequency_response_numeric(z, p, spec.constants, spec.frequencies());
  if (spec.noise_sigma > 0.0) {
    LinkRng rng(spec.seed, index, 1);
    for (Complex& s : profile.samples) {
      const double re = rng.normal();
      const double im = rng.normal();
      s += Complex(spec.noise_sigma * re, spec.noise_sigma * im);
    }
  }
  return profile;
}

BenchLink generate_bench_link(const BenchSpec& spec, std::size_t index) {
  BenchLink out;
  out.link = generate_link(spec, index);
  out.profile = synthesize_profile(out.link, spec, index);
  return out;
}

Bench generate_bench(const BenchSpec& spec) {
  spec.validate();
  Bench bench;
  bench.spec = spec;
  bench.links.reserve(spec.n_links);
  for (std::size_t i = 0; i < spec.n_links; ++i) bench.links.push_back(generate_bench_link(spec, i));
  return bench;
}

std::string profile_filename(std::size_t index) { return "link_" + std::to_string(index) + ".csv"; }

namespace {

io::json spec_to_json(const BenchSpec& s) {
  return io::json{{"n_links", s.n_links},
                  {"n_faults", s.n_faults},
                  {"length_min_m", s.length_min_m},
                  {"length_max_m", s.length_max_m},
                  {"fault_floor_m", s.fault_floor_m},
                  {"min_spacing_m", s.min_spacing_m},
                  {"reflection_probability", s.reflection_probability},
                  {"loss_min_db", s.loss_min_db},
                  {"loss_max_db", s.loss_max_db},
                  {"reflectance_max_db", s.reflectance_max_db},
                  {"seed", s.seed},
                  {"dz_m", s.dz_m},
                  {"noise_sigma", s.noise_sigma},
                  {"spacing_retries", s.spacing_retries}};
}

void warn_unknown(const io::json& j, const std::set<std::string>& known, const std::string& where,
                  std::vector<std::string>* warnings) {
  if (!warnings || !j.is_object()) return;
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) warnings->push_back(where + ": unknown field '" + key + "' ignored");
  }
}

std::size_t get_count(const io::json& j, const std::string& key, const std::string& where) {
  const io::json& v = io::get_field(j, key, where);
  if (!v.is_number_unsigned()) throw SchemaError(where + "." + key, "expected a nonnegative integer");
  return v.get<std::size_t>();
}

BenchSpec spec_from_json(const io::json& j, const std::string& where, std::vector<std::string>* warnings) {
  if (!j.is_object()) throw SchemaError(where, "expected an object");
  BenchSpec s;
  s.n_links = get_count(j, "n_links", where);
  s.n_faults = get_count(j, "n_faults", where);
  s.length_min_m = io::get_number(j, "length_min_m", where);
  s.length_max_m = io::get_number(j, "length_max_m", where);
  s.fault_floor_m = io::get_number(j, "fault_floor_m", where);
  s.min_spacing_m = io::get_number(j, "min_spacing_m", where);
  s.reflection_probability = io::get_number(j, "reflection_probability", where);
  s.loss_min_db = io::get_number(j, "loss_min_db", where);
  s.loss_max_db = io::get_number(j, "loss_max_db", where);
  s.reflectance_max_db = io::get_number(j, "reflectance_max_db", where);
  const io::json& seed = io::get_field(j, "seed", where);
  if (!seed.is_number_unsigned()) throw SchemaError(where + ".seed", "expected a nonnegative integer");
  s.seed = seed.get<std::uint64_t>();
  s.dz_m = io::get_number(j, "dz_m", where);
  s.noise_sigma = io::get_number(j, "noise_sigma", where);
  if (j.contains("spacing_retries")) s.spacing_retries = get_count(j, "spacing_retries", where);
  warn_unknown(j,
               {"n_links", "n_faults", "length_min_m", "length_max_m", "fault_floor_m", "min_spacing_m",
                "reflection_probability", "loss_min_db", "loss_max_db", "reflectance_max_db", "seed", "dz_m",
                "noise_sigma", "spacing_retries"},
               where, warnings);
  return s;
}

}  // namespace

void save_bench_manifest(const BenchSpec& spec, const std::vector<FiberLink>& links,
                         const std::filesystem::path& dir) {
  io::json manifest;
  manifest["format"] = "bsslasso-bench";
  manifest["version"] = 1;
  manifest["spec"] = spec_to_json(spec);
  manifest["constants"] = io::constants_to_json(spec.constants);
  manifest["frequency_grid"] = {{"start_hz", spec.freq_start_hz},
                                {"stop_hz", spec.freq_stop_hz},
                                {"step_hz", spec.freq_step_hz}};
  io::json entries = io::json::array();
  for (std::size_t i = 0; i < links.size(); ++i) {
    entries.push_back({{"index", i}, {"link", io::link_to_json(links[i])}, {"profile", profile_filename(i)}});
  }
  manifest["links"] = std::move(entries);
  std::filesystem::create_directories(dir);
  io::write_json(manifest, dir / "bench.json");
}

void save_bench(const Bench& bench, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<FiberLink> links;
  for (std::size_t i = 0; i < bench.links.size(); ++i) {
    io::write_profile_csv(bench.links[i].profile, dir / profile_filename(i));
    links.push_back(bench.links[i].link);
  }
  save_bench_manifest(bench.spec, links, dir);
}

Bench load_bench(const std::filesystem::path& dir, std::vector<std::string>* warnings) {
  const std::filesystem::path manifest_path = dir / "bench.json";
  const std::string where = manifest_path.string();
  const io::json m = io::read_json(manifest_path);
  if (!m.is_object()) throw SchemaError(where, "expected an object");
  warn_unknown(m, {"format", "version", "spec", "constants", "frequency_grid", "links"}, where, warnings);
  const io::json& format = io::get_field(m, "format", where);
  if (!format.is_string() || format.get<std::string>() != "bsslasso-bench")
    throw SchemaError(where + ".format", "not a bench manifest");

  Bench bench;
  bench.spec = spec_from_json(io::get_field(m, "spec", where), where + ".spec", warnings);
  bench.spec.constants = io::constants_from_json(io::get_field(m, "constants", where), where + ".constants");
  const io::json& grid = io::get_field(m, "frequency_grid", where);
  bench.spec.freq_start_hz = io::get_number(grid, "start_hz", where + ".frequency_grid");
  bench.spec.freq_stop_hz = io::get_number(grid, "stop_hz", where + ".frequency_grid");
  bench.spec.freq_step_hz = io::get_number(grid, "step_hz", where + ".frequency_grid");
  try {
    bench.spec.validate();
  } catch (const InvalidInput& e) {
    throw SchemaError(where + ".spec", e.what());
  }
  const std::vector<double> freqs = bench.spec.frequencies();

  const io::json& links = io::get_field(m, "links", where);
  if (!links.is_array()) throw SchemaError(where + ".links", "expected an array");
  if (links.size() != bench.spec.n_links)
    throw SchemaError(where + ".links", "expected " + std::to_string(bench.spec.n_links) + " links, found " +
                                            std::to_string(links.size()));
  for (std::size_t i = 0; i < links.size(); ++i) {
    const std::string lw = where + ".links[" + std::to_string(i) + "]";
    const io::json& entry = links[i];
    if (!entry.is_object()) throw SchemaError(lw, "expected an object");
    warn_unknown(entry, {"index", "link", "profile"}, lw, warnings);
    if (get_count(entry, "index", lw) != i) throw SchemaError(lw + ".index", "out of order");
    BenchLink bl;
    bl.link = io::link_from_json(io::get_field(entry, "link", lw), lw + ".link");
    const io::json& ref = io::get_field(entry, "profile", lw);
    if (!ref.is_string()) throw SchemaError(lw + ".profile", "expected a file name");
    bl.profile = io::read_profile_csv(dir / ref.get<std::string>());
    if (bl.profile.frequencies != freqs)
      throw SchemaError((dir / ref.get<std::string>()).string(), "frequency grid differs from the manifest");
    bench.links.push_back(std::move(bl));
  }
  return bench;
}

}  // namespace bsslasso
