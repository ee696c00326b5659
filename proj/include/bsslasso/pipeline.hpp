#pragma once

// Fault localization from a frequency-domain profile: selection Lasso,
// reflection-guided penalty correction, and l0 cluster treatment, plus
// magnitude reconstruction by forward-model grid search.

#include <bsslasso/dictionary.hpp>
#include <bsslasso/fiber_model.hpp>
#include <bsslasso/lasso.hpp>

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace bsslasso {

enum class Mode { BssLasso, Bss1, SincLasso };
enum class Stage { Selection, Correction2, Correction3, Treated };
enum class Block { Fault, Reflection };

std::string to_string(Mode mode);
std::string to_string(Stage stage);
std::string to_string(Block block);
Mode parse_mode(const std::string& text);  // "bss-lasso" | "bss-1" | "sinclasso"

struct DetectConfig {
  Mode mode = Mode::BssLasso;
  double grid_step_m = 10.0;
  double gamma = 0.5;     // reduced penalty for fault atoms under a reflection
  double epsilon = 0.05;  // reflection sensitivity threshold
  double ebic_gamma = 1.0;
  std::size_t lambda_count = 100;
  double lambda_decades = 4.0;
  bool intercept = false;
  bool cluster_reflections = true;  // false: cluster the fault block only
  std::size_t enumeration_cap = 100'000;
  double reflective_threshold = 1e-8;   // relative to max treated coefficient
  double reflection_attach_radius_m = 50.0;
  PhysicalConstants constants = PhysicalConstants::standard_fiber();
  SolverOptions solver;

  void validate() const;
};

struct StageOutput {
  Stage stage = Stage::Selection;
  Eigen::VectorXd beta;          // fault block, then reflection block if present
  Eigen::VectorXd weights_used;  // empty for the treated stage
  double lambda = 0.0;
  double ebic = 0.0;
  double rss = 0.0;
  std::size_t nnz = 0;
};

struct Cluster {
  std::size_t first = 0;  // grid indices, inclusive
  std::size_t last = 0;
  Block block = Block::Fault;

  std::size_t size() const { return last - first + 1; }
  bool contains(std::size_t j) const { return j >= first && j <= last; }
  bool operator==(const Cluster&) const = default;
};

struct Estimate {
  double position_m = 0.0;
  std::size_t grid_index = 0;
  bool is_reflective = false;
  std::optional<double> loss_db;
  std::optional<double> reflectance_db;
  double fault_coefficient = 0.0;
  double reflection_coefficient = 0.0;
  Cluster source;  // fault cluster the estimate was narrowed from
};

struct DetectionReport {
  double length_m = 0.0;
  std::vector<Estimate> estimates;  // sorted by position
  FrequencyProfile fitted_profile;
  std::vector<StageOutput> diagnostics;
  std::vector<Cluster> clusters;
  std::size_t grid_size = 0;
  std::size_t combinations = 0;  // candidate supports enumerated by treatment
  bool narrowed = false;         // weighted-average pre-narrowing was needed
  double runtime_ms = 0.0;
  DetectConfig config;
};

// Dictionary, observation and Gram system for one profile.
struct Workspace {
  Dictionary dict;
  Eigen::VectorXd y;
  std::shared_ptr<const Design> design;

  static Workspace prepare(const FrequencyProfile& profile, double length_m, const DetectConfig& config);
  // Same problem without the reflection block, reusing the Gram entries.
  Workspace without_reflections() const;
};

StageOutput run_lasso(const Workspace& ws, const Eigen::VectorXd& weights, Stage stage, const DetectConfig& config);

StageOutput selection_stage(const Workspace& ws, const DetectConfig& config);

// Up to two reweighted Lasso runs guided by the reflection block. Every
// run it performs is appended to `trace` when given.
StageOutput correction_stage(const Workspace& ws, const StageOutput& selection, const DetectConfig& config,
                             std::vector<StageOutput>* trace = nullptr);

// Maximal runs of strictly positive coefficients, fault block first.
std::vector<Cluster> find_clusters(const Eigen::VectorXd& beta, std::size_t q, bool has_reflections,
                                   bool include_reflection_block = true);

// Magnitude-weighted mean index of a cluster, rounded with ties to the lower index.
std::size_t weighted_average_index(const Eigen::VectorXd& beta, const Cluster& cluster, std::size_t q);

struct TreatmentResult {
  StageOutput output;
  std::vector<std::size_t> chosen;  // one grid index per cluster, same order
  std::size_t combinations = 0;
  bool narrowed = false;
};

// One index per cluster minimizing the nonnegative least-squares residual,
// by exhaustive enumeration after weighted-average narrowing of the widest
// clusters when the combination count exceeds the cap.
TreatmentResult treatment_stage(const Workspace& ws, const StageOutput& input, const std::vector<Cluster>& clusters,
                                const DetectConfig& config);

DetectionReport detect(const FrequencyProfile& profile, double length_m, const DetectConfig& config);
DetectionReport detect(const Workspace& ws, const DetectConfig& config);

// -- magnitude reconstruction ------------------------------------------------

struct ReconstructConfig {
  double loss_max_db = 5.0;
  double loss_coarse_step_db = 0.5;
  double loss_fine_step_db = 0.1;
  double loss_fine_halfwidth_db = 0.5;
  double reflectance_max_db = 20.0;
  double reflectance_step_db = 2.0;
  bool score_against_observation = false;
  std::size_t exhaustive_cap = 4'000'000;  // joint grid points before falling back to cyclic search
};

// Magnitudes read straight off the last Lasso stage: the
// cluster mass of each estimate fed to the magnitude recursion. Reflections
// go through the same recursion, so they come out infinite whenever the
// spike weight exceeds the running level.
struct NaiveMagnitude {
  double loss_db = 0.0;  // +inf on failure
  std::optional<MagnitudeFailure> loss_failure;
  std::optional<double> reflectance_db;
  std::optional<MagnitudeFailure> reflectance_failure;
};
std::vector<NaiveMagnitude> naive_magnitudes(const DetectionReport& report);

// Fills loss_db (and reflectance_db for reflective estimates) by a coarse then
// fine grid search over candidate links scored by l2 distance to the fitted
// profile, or to `observed` when score_against_observation is set.
DetectionReport reconstruct_magnitudes(const DetectionReport& report, const PhysicalConstants& constants,
                                       const ReconstructConfig& config = {},
                                       const FrequencyProfile* observed = nullptr);

}  // namespace bsslasso
