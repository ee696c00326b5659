#pragma once

// Randomized test bench: links with a fault at the far end plus uniformly
// placed extra faults, each reflective with some probability, and their
// frequency profiles synthesized by quadrature of the time-domain profile.

#include <bsslasso/fiber_model.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace bsslasso {

struct BenchSpec {
  std::size_t n_links = 100;
  std::size_t n_faults = 1;
  double length_min_m = 2000.0;
  double length_max_m = 15000.0;
  double fault_floor_m = 2000.0;
  double min_spacing_m = 10.0;
  double reflection_probability = 0.5;
  double loss_min_db = 1.0;
  double loss_max_db = 5.0;
  double reflectance_max_db = 20.0;
  std::uint64_t seed = 0;
  double freq_start_hz = 100.0;
  double freq_stop_hz = 100'000.0;
  double freq_step_hz = 100.0;
  double dz_m = 0.25;
  double noise_sigma = 0.0;  // per-component std of additive complex noise
  std::size_t spacing_retries = 10'000;
  PhysicalConstants constants = PhysicalConstants::standard_fiber();

  void validate() const;
  std::vector<double> frequencies() const;
};

// Counter-based generator: draw i of stream s for link index n is a pure
// function of (seed, n, s, i), so any link regenerates on its own.
class LinkRng {
 public:
  LinkRng(std::uint64_t seed, std::uint64_t link_index, std::uint64_t stream = 0);
  std::uint64_t next_u64();
  double uniform();  // [0, 1), 53 random bits
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();   // Box-Muller

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

struct BenchLink {
  FiberLink link;
  FrequencyProfile profile;
};

struct Bench {
  BenchSpec spec;
  std::vector<BenchLink> links;
};

FiberLink generate_link(const BenchSpec& spec, std::size_t index);
// Noiseless quadrature profile, plus noise keyed by the link seed when configured.
FrequencyProfile synthesize_profile(const FiberLink& link, const BenchSpec& spec, std::size_t index);
BenchLink generate_bench_link(const BenchSpec& spec, std::size_t index);
Bench generate_bench(const BenchSpec& spec);

std::string profile_filename(std::size_t index);

// bench.json plus link_<idx>.csv per link. Writes each file through a
// temporary and a rename.
void save_bench(const Bench& bench, const std::filesystem::path& dir);
void save_bench_manifest(const BenchSpec& spec, const std::vector<FiberLink>& links,
                         const std::filesystem::path& dir);

// Throws SchemaError on missing or malformed fields; unknown fields are
// reported through `warnings`.
Bench load_bench(const std::filesystem::path& dir, std::vector<std::string>* warnings = nullptr);

}  // namespace bsslasso
