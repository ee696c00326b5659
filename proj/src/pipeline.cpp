#include <bsslasso/pipeline.hpp>

#include <bsslasso/nnls.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace bsslasso {

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::BssLasso: return "bss-lasso";
    case Mode::Bss1: return "bss-1";
    case Mode::SincLasso: return "sinclasso";
  }
  return "unknown";
}

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::Selection: return "selection";
    case Stage::Correction2: return "correction_2";
    case Stage::Correction3: return "correction_3";
    case Stage::Treated: return "treated";
  }
  return "unknown";
}

std::string to_string(Block block) { return block == Block::Fault ? "fault" : "reflection"; }

Mode parse_mode(const std::string& text) {
  if (text == "bss-lasso") return Mode::BssLasso;
  if (text == "bss-1") return Mode::Bss1;
  if (text == "sinclasso") return Mode::SincLasso;
  throw InvalidInput("unknown mode '" + text + "' (expected bss-lasso, bss-1 or sinclasso)");
}

void DetectConfig::validate() const {
  if (!(grid_step_m > 0.0)) throw InvalidInput("grid step must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidInput("gamma must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw InvalidInput("epsilon must be positive");
  if (!(ebic_gamma >= 0.0)) throw InvalidInput("ebic gamma must be >= 0");
  if (lambda_count == 0) throw InvalidInput("lambda count must be positive");
  if (!(lambda_decades > 0.0)) throw InvalidInput("lambda decades must be positive");
  if (enumeration_cap == 0) throw InvalidInput("enumeration cap must be positive");
  if (!(reflective_threshold >= 0.0)) throw InvalidInput("reflective threshold must be >= 0");
  if (!(reflection_attach_radius_m >= 0.0)) throw InvalidInput("attach radius must be >= 0");
  constants.validate();
}

Workspace Workspace::prepare(const FrequencyProfile& profile, double length_m, const DetectConfig& config) {
  config.validate();
  profile.validate();
  Workspace ws;
  const PositionGrid grid = PositionGrid::uniform(length_m, config.grid_step_m);
  ws.dict = build_dictionary(grid, profile.frequencies, config.constants, length_m,
                             config.mode != Mode::SincLasso, config.intercept);
  ws.y = build_observation(profile);
  ws.design = std::make_shared<const Design>(Design::from_dictionary(ws.dict, ws.y));
  return ws;
}

Workspace Workspace::without_reflections() const {
  if (!dict.has_reflections) return *this;
  Workspace ws;
  ws.dict = dict;
  const auto q = static_cast<Eigen::Index>(dict.q());
  Eigen::MatrixXd m(dict.matrix.rows(), q + (dict.has_intercept ? 1 : 0));
  m.leftCols(q) = dict.matrix.leftCols(q);
  if (dict.has_intercept) m.col(q) = dict.matrix.col(static_cast<Eigen::Index>(dict.intercept_column()));
  ws.dict.matrix = std::move(m);
  ws.dict.has_reflections = false;
  ws.y = y;
  std::vector<Eigen::Index> keep(static_cast<std::size_t>(q));
  std::iota(keep.begin(), keep.end(), Eigen::Index{0});
  ws.design = std::make_shared<const Design>(design->restricted(keep));
  return ws;
}

StageOutput run_lasso(const Workspace& ws, const Eigen::VectorXd& weights, Stage stage, const DetectConfig& config) {
  LassoProblem problem;
  problem.design = ws.design;
  problem.weights = weights;
  problem.lambda_grid = default_lambda_grid(*ws.design, weights, config.lambda_count, config.lambda_decades);
  PathOptions options;
  options.solver = config.solver;
  options.ebic_gamma = config.ebic_gamma;
  PathResult path = solve_path(problem, options);

  StageOutput out;
  out.stage = stage;
  out.beta = std::move(path.best.beta);
  out.weights_used = weights;
  out.lambda = path.best.lambda;
  out.ebic = path.best.ebic;
  out.rss = path.best.rss;
  out.nnz = path.best.nnz;
  return out;
}

StageOutput selection_stage(const Workspace& ws, const DetectConfig& config) {
  const auto p = static_cast<Eigen::Index>(ws.design->n_cols());
  if (ws.y.isZero(0.0)) {
    StageOutput out;
    out.stage = Stage::Selection;
    out.beta = Eigen::VectorXd::Zero(p);
    out.weights_used = Eigen::VectorXd::Ones(p);
    return out;
  }
  return run_lasso(ws, Eigen::VectorXd::Ones(p), Stage::Selection, config);
}

StageOutput correction_stage(const Workspace& ws, const StageOutput& selection, const DetectConfig& config,
                             std::vector<StageOutput>* trace) {
  if (!ws.dict.has_reflections) return selection;
  const auto q = static_cast<Eigen::Index>(ws.dict.q());
  const auto p = static_cast<Eigen::Index>(ws.design->n_cols());
  StageOutput previous = selection;
  for (Stage stage : {Stage::Correction2, Stage::Correction3}) {
    const auto reflections = previous.beta.segment(q, q);
    const double peak = reflections.maxCoeff();
    if (!(peak > 0.0)) return previous;
    Eigen::VectorXd weights = Eigen::VectorXd::Ones(p);
    for (Eigen::Index j = 0; j < q; ++j) {
      if (reflections(j) > config.epsilon * peak) weights(j) = config.gamma;
    }
    previous = run_lasso(ws, weights, stage, config);
    if (trace) trace->push_back(previous);
  }
  return previous;
}

std::vector<Cluster> find_clusters(const Eigen::VectorXd& beta, std::size_t q, bool has_reflections,
                                   bool include_reflection_block) {
  std::vector<Cluster> clusters;
  auto scan = [&](std::size_t offset, Block block) {
    std::size_t j = 0;
    while (j < q) {
      if (beta(static_cast<Eigen::Index>(offset + j)) > 0.0) {
        Cluster c{j, j, block};
        while (c.last + 1 < q && beta(static_cast<Eigen::Index>(offset + c.last + 1)) > 0.0) ++c.last;
        clusters.push_back(c);
        j = c.last + 1;
      } else {
        ++j;
      }
    }
  };
  if (static_cast<std::size_t>(beta.size()) < (has_reflections ? 2 * q : q))
    throw InvalidInput("coefficient vector shorter than the dictionary blocks");
  scan(0, Block::Fault);
  if (has_reflections && include_reflection_block) scan(q, Block::Reflection);
  return clusters;
}

std::size_t weighted_average_index(const Eigen::VectorXd& beta, const Cluster& cluster, std::size_t q) {
  const std::size_t offset = cluster.block == Block::Fault ? 0 : q;
  double mass = 0.0;
  double moment = 0.0;
  for (std::size_t j = cluster.first; j <= cluster.last; ++j) {
    const double b = std::max(0.0, beta(static_cast<Eigen::Index>(offset + j)));
    mass += b;
    moment += b * static_cast<double>(j);
  }
  if (!(mass > 0.0)) return cluster.first;
  const double mean = moment / mass;
  const double below = std::floor(mean);
  const double frac = mean - below;
  auto idx = static_cast<std::size_t>(below);
  if (frac > 0.5 + 1e-9) ++idx;
  return std::clamp(idx, cluster.first, cluster.last);
}

TreatmentResult treatment_stage(const Workspace& ws, const StageOutput& input, const std::vector<Cluster>& clusters,
                                const DetectConfig& config) {
  const Design& d = *ws.design;
  const std::size_t q = ws.dict.q();
  const auto p = static_cast<Eigen::Index>(d.n_cols());
  const auto column_of = [q](Block block, std::size_t j) {
    return static_cast<Eigen::Index>(block == Block::Fault ? j : q + j);
  };
  if (!ws.dict.has_reflections) {
    for (const Cluster& c : clusters) {
      if (c.block == Block::Reflection) throw InvalidInput("reflection cluster without a reflection block");
    }
  }

  TreatmentResult result;
  result.output.stage = Stage::Treated;
  result.output.beta = Eigen::VectorXd::Zero(p);
  if (clusters.empty()) {
    result.output.rss = d.rss(result.output.beta);
    return result;
  }

  // candidate indices per cluster
  std::vector<std::vector<std::size_t>> options(clusters.size());
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    for (std::size_t j = clusters[i].first; j <= clusters[i].last; ++j) options[i].push_back(j);
  }
  const auto count_combinations = [&options]() {
    double total = 1.0;
    for (const auto& o : options) total *= static_cast<double>(o.size());
    return total;
  };
  while (count_combinations() > static_cast<double>(config.enumeration_cap)) {
    std::size_t widest = 0;
    for (std::size_t i = 1; i < options.size(); ++i) {
      if (options[i].size() > options[widest].size()) widest = i;
    }
    if (options[widest].size() <= 1) throw NumericalError("treatment enumeration cap below one combination");
    options[widest] = {weighted_average_index(input.beta, clusters[widest], q)};
    result.narrowed = true;
  }

  const std::size_t k = clusters.size();
  const Eigen::MatrixXd& gram = d.gram();
  const Eigen::VectorXd& corr = d.correlation();
  std::vector<std::size_t> counter(k, 0);
  std::vector<Eigen::Index> cols(k);
  Eigen::MatrixXd gs(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  Eigen::VectorXd cs(static_cast<Eigen::Index>(k));

  double best_score = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_x;
  std::vector<std::size_t> best_choice;
  std::size_t combos = 0;
  while (true) {
    for (std::size_t i = 0; i < k; ++i) cols[i] = column_of(clusters[i].block, options[i][counter[i]]);
    for (std::size_t a = 0; a < k; ++a) {
      cs(static_cast<Eigen::Index>(a)) = corr(cols[a]);
      for (std::size_t b = 0; b < k; ++b) gs(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = gram(cols[a], cols[b]);
    }
    const NnlsResult fit = nnls_gram(gs, cs);
    const double score = fit.x.dot(gs * fit.x) - 2.0 * cs.dot(fit.x);
    ++combos;
    if (score < best_score) {
      best_score = score;
      best_x = fit.x;
      best_choice.resize(k);
      for (std::size_t i = 0; i < k; ++i) best_choice[i] = options[i][counter[i]];
    }
    // mixed-radix increment, last cluster fastest
    std::size_t pos = k;
    while (pos > 0) {
      --pos;
      if (++counter[pos] < options[pos].size()) break;
      counter[pos] = 0;
      if (pos == 0) {
        pos = k + 1;
        break;
      }
    }
    if (pos == k + 1) break;
  }

  for (std::size_t i = 0; i < k; ++i) {
    result.output.beta(column_of(clusters[i].block, best_choice[i])) = best_x(static_cast<Eigen::Index>(i));
  }
  result.chosen = std::move(best_choice);
  result.combinations = combos;
  result.output.rss = d.rss(result.output.beta);
  result.output.nnz = static_cast<std::size_t>((result.output.beta.array() > 0.0).count());
  return result;
}

DetectionReport detect(const FrequencyProfile& profile, double length_m, const DetectConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const Workspace ws = Workspace::prepare(profile, length_m, config);
  DetectionReport report = detect(ws, config);
  report.runtime_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return report;
}

DetectionReport detect(const Workspace& full, const DetectConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const Workspace reduced = config.mode == Mode::SincLasso && full.dict.has_reflections ? full.without_reflections()
                                                                                         : Workspace{};
  const Workspace& ws = config.mode == Mode::SincLasso && full.dict.has_reflections ? reduced : full;
  const std::size_t q = ws.dict.q();
  const bool refl = ws.dict.has_reflections;

  DetectionReport report;
  report.length_m = ws.dict.length_m;
  report.grid_size = q;
  report.config = config;

  StageOutput current = selection_stage(ws, config);
  report.diagnostics.push_back(current);
  if (config.mode == Mode::BssLasso && refl) current = correction_stage(ws, current, config, &report.diagnostics);

  report.clusters = find_clusters(current.beta, q, refl, config.cluster_reflections);
  const TreatmentResult treated = treatment_stage(ws, current, report.clusters, config);
  report.diagnostics.push_back(treated.output);
  report.combinations = treated.combinations;
  report.narrowed = treated.narrowed;

  const Eigen::VectorXd& beta = treated.output.beta;
  const double peak = beta.size() ? beta.maxCoeff() : 0.0;
  const double threshold = config.reflective_threshold * peak;

  for (std::size_t i = 0; i < report.clusters.size(); ++i) {
    const Cluster& c = report.clusters[i];
    if (c.block != Block::Fault) continue;
    Estimate e;
    e.grid_index = treated.chosen[i];
    e.position_m = ws.dict.grid.positions[e.grid_index];
    e.fault_coefficient = beta(static_cast<Eigen::Index>(e.grid_index));
    e.source = c;
    report.estimates.push_back(e);
  }

  // attach each surviving reflection to the nearest fault estimate
  const auto attach = [&](std::size_t refl_index, double coefficient) {
    const double x = ws.dict.grid.positions[refl_index];
    Estimate* nearest = nullptr;
    double best = std::numeric_limits<double>::infinity();
    for (Estimate& e : report.estimates) {
      const double dist = std::abs(e.position_m - x);
      if (dist < best) {
        best = dist;
        nearest = &e;
      }
    }
    if (nearest && best <= config.reflection_attach_radius_m + 1e-9) {
      nearest->is_reflective = true;
      nearest->reflection_coefficient += coefficient;
    }
  };
  if (refl && config.cluster_reflections) {
    for (std::size_t i = 0; i < report.clusters.size(); ++i) {
      if (report.clusters[i].block != Block::Reflection) continue;
      const double coef = beta(static_cast<Eigen::Index>(q + treated.chosen[i]));
      if (coef > threshold) attach(treated.chosen[i], coef);
    }
  } else if (refl) {
    // fault-only treatment: read reflections off the last Lasso stage
    const double lasso_peak = current.beta.maxCoeff();
    for (std::size_t j = 0; j < q; ++j) {
      const double coef = current.beta(static_cast<Eigen::Index>(q + j));
      if (coef > config.reflective_threshold * lasso_peak) attach(j, coef);
    }
  }

  report.fitted_profile = profile_from_observation(ws.design->fitted(beta), ws.dict.frequencies);
  report.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace bsslasso
