#include <bsslasso/benchgen.hpp>
#include <bsslasso/io.hpp>

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

using namespace bsslasso;
namespace fs = std::filesystem;

namespace {

// One-sample Kolmogorov-Smirnov statistic against U[0, 1].
double ks_uniform(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    d = std::max(d, std::max(static_cast<double>(i + 1) / n - u[i], u[i] - static_cast<double>(i) / n));
  }
  return d;
}

// 1% critical value, asymptotic.
double ks_critical(std::size_t n) { return 1.628 / std::sqrt(static_cast<double>(n)); }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("bsslasso_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

BenchSpec small_spec() {
  BenchSpec s;
  s.n_links = 3;
  s.n_faults = 2;
  s.length_min_m = 2000.0;
  s.length_max_m = 3000.0;
  s.freq_stop_hz = 20'000.0;
  s.seed = 99;
  return s;
}

}  // namespace

TEST_CASE("rng is a pure function of its key") {
  LinkRng a(7, 3), b(7, 3), c(7, 4), d(7, 3, 1);
  const auto x = a.next_u64();
  CHECK(x == b.next_u64());
  CHECK(x != c.next_u64());
  CHECK(x != d.next_u64());
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("spec validation") {
  BenchSpec s;
  s.n_faults = 0;
  CHECK_THROWS_AS(s.validate(), InvalidInput);
  s = BenchSpec{};
  s.reflection_probability = 1.5;
  CHECK_THROWS_AS(s.validate(), InvalidInput);
  CHECK_NOTHROW(BenchSpec{}.validate());
}

TEST_CASE("single-fault links end at L") {
  BenchSpec s;
  s.n_faults = 1;
  for (std::size_t i = 0; i < 200; ++i) {
    const FiberLink link = generate_link(s, i);
    REQUIRE(link.events.size() == 1);
    CHECK(link.events[0].position_m == link.length_m);
  }
}

TEST_CASE("property: structure and distributions over 1000 links") {
  BenchSpec s;
  s.n_faults = 3;
  s.seed = 2024;
  const std::size_t n = 1000;
  std::vector<double> lengths, losses, reflectances, positions;
  std::size_t reflective = 0, events = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const FiberLink link = generate_link(s, i);
    CHECK_NOTHROW(link.validate());
    REQUIRE(link.events.size() == 3);
    CHECK(link.events.back().position_m == link.length_m);
    lengths.push_back((link.length_m - s.length_min_m) / (s.length_max_m - s.length_min_m));
    for (std::size_t b = 0; b < link.events.size(); ++b) {
      const Event& e = link.events[b];
      ++events;
      if (b > 0) CHECK(e.position_m - link.events[b - 1].position_m >= s.min_spacing_m);
      losses.push_back((e.loss_db - s.loss_min_db) / (s.loss_max_db - s.loss_min_db));
      if (e.reflective()) {
        ++reflective;
        CHECK(*e.reflectance_db > 0.0);
        CHECK(*e.reflectance_db <= s.reflectance_max_db);
        reflectances.push_back(*e.reflectance_db / s.reflectance_max_db);
      }
    }
    // the first extra fault of each link, conditioned on L
    positions.push_back((link.events[0].position_m - s.fault_floor_m) / (link.length_m - s.fault_floor_m));
  }
  const double frac = static_cast<double>(reflective) / static_cast<double>(events);
  CHECK(frac >= 0.45);
  CHECK(frac <= 0.55);
  CHECK(ks_uniform(lengths) < ks_critical(lengths.size()));
  CHECK(ks_uniform(losses) < ks_critical(losses.size()));
  CHECK(ks_uniform(reflectances) < ks_critical(reflectances.size()));
  // the minimum of two uniforms has cdf 1 - (1 - u)^2
  std::vector<double> mins;
  for (double u : positions) mins.push_back(1.0 - (1.0 - u) * (1.0 - u));
  CHECK(ks_uniform(mins) < ks_critical(mins.size()));
}

TEST_CASE("links regenerate independently of generation order") {
  BenchSpec s = small_spec();
  const Bench all = generate_bench(s);
  const BenchLink two = generate_bench_link(s, 2);
  CHECK(io::link_to_json(two.link) == io::link_to_json(all.links[2].link));
  CHECK(two.profile.samples == all.links[2].profile.samples);
  CHECK(synthesize_profile(all.links[1].link, s, 1).samples == all.links[1].profile.samples);
}

TEST_CASE("noise is keyed and additive") {
  BenchSpec s = small_spec();
  BenchSpec noisy = s;
  noisy.noise_sigma = 1e-3;
  const BenchLink clean = generate_bench_link(s, 0);
  const BenchLink a = generate_bench_link(noisy, 0), b = generate_bench_link(noisy, 0);
  CHECK(a.profile.samples == b.profile.samples);
  double var = 0.0;
  for (std::size_t i = 0; i < a.profile.size(); ++i) var += std::norm(a.profile.samples[i] - clean.profile.samples[i]);
  var /= 2.0 * static_cast<double>(a.profile.size());
  CHECK(std::sqrt(var) == doctest::Approx(1e-3).epsilon(0.1));
}

TEST_CASE("save and load round trip") {
  const fs::path dir = scratch("roundtrip");
  const Bench bench = generate_bench(small_spec());
  save_bench(bench, dir);
  std::vector<std::string> warnings;
  const Bench back = load_bench(dir, &warnings);
  CHECK(warnings.empty());
  REQUIRE(back.links.size() == bench.links.size());
  for (std::size_t i = 0; i < bench.links.size(); ++i) {
    CHECK(io::link_to_json(back.links[i].link) == io::link_to_json(bench.links[i].link));
    CHECK(back.links[i].profile.frequencies == bench.links[i].profile.frequencies);
    CHECK(back.links[i].profile.samples == bench.links[i].profile.samples);
  }
  // saving again is byte identical
  const fs::path again = scratch("roundtrip2");
  save_bench(back, again);
  CHECK(io::read_text(dir / "bench.json") == io::read_text(again / "bench.json"));
  CHECK(io::read_text(dir / profile_filename(1)) == io::read_text(again / profile_filename(1)));
  fs::remove_all(dir);
  fs::remove_all(again);
}

TEST_CASE("malformed benches raise schema errors") {
  const fs::path dir = scratch("broken");
  save_bench(generate_bench(small_spec()), dir);
  SUBCASE("truncated manifest") {
    const std::string text = io::read_text(dir / "bench.json");
    std::ofstream(dir / "bench.json", std::ios::trunc) << text.substr(0, text.size() / 2);
    CHECK_THROWS_AS(load_bench(dir), SchemaError);
  }
  SUBCASE("truncated profile") {
    const std::string text = io::read_text(dir / profile_filename(0));
    std::ofstream(dir / profile_filename(0), std::ios::trunc) << text.substr(0, text.size() / 2);
    CHECK_THROWS_AS(load_bench(dir), SchemaError);
  }
  SUBCASE("missing field") {
    auto j = io::read_json(dir / "bench.json");
    j.erase("links");
    io::write_json(j, dir / "bench.json");
    CHECK_THROWS_AS(load_bench(dir), SchemaError);
  }
  SUBCASE("unknown fields are tolerated with a warning") {
    auto j = io::read_json(dir / "bench.json");
    j["comment"] = "extra";
    j["spec"]["operator"] = "someone";
    io::write_json(j, dir / "bench.json");
    std::vector<std::string> warnings;
    CHECK_NOTHROW(load_bench(dir, &warnings));
    CHECK(warnings.size() == 2);
  }
  fs::remove_all(dir);
}
