#include <bsslasso/pipeline.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace bsslasso {

namespace {

const StageOutput& last_lasso_stage(const DetectionReport& report) {
  for (auto it = report.diagnostics.rbegin(); it != report.diagnostics.rend(); ++it) {
    if (it->stage != Stage::Treated) return *it;
  }
  throw InvalidInput("report carries no Lasso stage");
}

std::vector<double> value_grid(double lo, double hi, double step) {
  std::vector<double> v;
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long i = 0; i <= n; ++i) v.push_back(lo + static_cast<double>(i) * step);
  return v;
}

// Quadratic scorer: candidate coefficient vector v against a fixed target.
struct Scorer {
  Eigen::MatrixXd h;
  Eigen::VectorXd g;
  double target_norm2 = 0.0;

  double operator()(const Eigen::VectorXd& v) const { return v.dot(h * v) - 2.0 * g.dot(v) + target_norm2; }
};

// Search over one value list per dimension, exhaustive when small enough,
// otherwise cyclic coordinate search from `start`.
template <class Eval>
std::vector<std::size_t> grid_search(const std::vector<std::vector<double>>& values, std::vector<std::size_t> start,
                                     std::size_t cap, Eval&& eval) {
  const std::size_t dims = values.size();
  double total = 1.0;
  for (const auto& v : values) total *= static_cast<double>(v.size());

  std::vector<std::size_t> best = start;
  double best_score = eval(best);
  if (total <= static_cast<double>(cap)) {
    std::vector<std::size_t> counter(dims, 0);
    while (true) {
      const double s = eval(counter);
      if (s < best_score) {
        best_score = s;
        best = counter;
      }
      std::size_t d = dims;
      bool done = true;
      while (d > 0) {
        --d;
        if (++counter[d] < values[d].size()) {
          done = false;
          break;
        }
        counter[d] = 0;
      }
      if (done) break;
    }
    return best;
  }
  for (int pass = 0; pass < 100; ++pass) {
    bool improved = false;
    for (std::size_t d = 0; d < dims; ++d) {
      std::vector<std::size_t> trial = best;
      for (std::size_t i = 0; i < values[d].size(); ++i) {
        trial[d] = i;
        const double s = eval(trial);
        if (s < best_score) {
          best_score = s;
          best = trial;
          improved = true;
        }
      }
    }
    if (!improved) break;
  }
  return best;
}

}  // namespace

std::vector<NaiveMagnitude> naive_magnitudes(const DetectionReport& report) {
  const StageOutput& lasso = last_lasso_stage(report);
  const std::size_t q = report.grid_size;
  const bool refl = static_cast<std::size_t>(lasso.beta.size()) >= 2 * q;
  const double scale = report.length_m * report.config.constants.amplitude;
  const double step = report.config.grid_step_m;
  const auto reach = static_cast<std::size_t>(std::floor(report.config.reflection_attach_radius_m / step + 1e-9));

  std::vector<NaiveMagnitude> out;
  double level = 1.0;
  for (const Estimate& e : report.estimates) {
    NaiveMagnitude m;
    if (refl && e.is_reflective) {
      const std::size_t lo = e.source.first >= reach ? e.source.first - reach : 0;
      const std::size_t hi = std::min(q - 1, e.source.last + reach);
      double mass = 0.0;
      for (std::size_t j = lo; j <= hi; ++j) mass += lasso.beta(static_cast<Eigen::Index>(q + j));
      const double theta = mass / scale;
      if (!(level > 0.0)) {
        m.reflectance_db = std::numeric_limits<double>::infinity();
        m.reflectance_failure = MagnitudeFailure::ZeroLevel;
      } else if (1.0 - theta / level < 0.0) {
        m.reflectance_db = std::numeric_limits<double>::infinity();
        m.reflectance_failure = MagnitudeFailure::NegativeRadicand;
      } else {
        m.reflectance_db = -10.0 * std::log10(1.0 - theta / level);
      }
    }
    double mass = 0.0;
    for (std::size_t j = e.source.first; j <= e.source.last; ++j) mass += lasso.beta(static_cast<Eigen::Index>(j));
    const double phi = mass / scale;
    if (!(level > 0.0)) {
      m.loss_db = std::numeric_limits<double>::infinity();
      m.loss_failure = MagnitudeFailure::ZeroLevel;
    } else {
      const double radicand = 1.0 - phi / level;
      if (radicand < 0.0) {
        m.loss_db = std::numeric_limits<double>::infinity();
        m.loss_failure = MagnitudeFailure::NegativeRadicand;
        level = 0.0;
      } else {
        m.loss_db = radicand > 0.0 ? -10.0 * std::log10(radicand) : std::numeric_limits<double>::infinity();
        if (radicand == 0.0) m.loss_failure = MagnitudeFailure::ZeroLevel;
        level -= phi;
        if (level < 0.0) level = 0.0;
      }
    }
    out.push_back(m);
  }
  return out;
}

DetectionReport reconstruct_magnitudes(const DetectionReport& report, const PhysicalConstants& constants,
                                       const ReconstructConfig& config, const FrequencyProfile* observed) {
  constants.validate();
  if (!(config.loss_max_db >= 0.0) || !(config.loss_coarse_step_db > 0.0) || !(config.loss_fine_step_db > 0.0) ||
      !(config.loss_fine_halfwidth_db >= 0.0) || !(config.reflectance_max_db >= 0.0) ||
      !(config.reflectance_step_db > 0.0))
    throw InvalidInput("invalid reconstruction grid");

  DetectionReport out = report;
  const std::size_t k = out.estimates.size();
  if (k == 0) return out;

  const FrequencyProfile* target = &report.fitted_profile;
  if (config.score_against_observation) {
    if (!observed) throw InvalidInput("observation-scored reconstruction needs the observed profile");
    target = observed;
  }
  if (target->size() == 0) throw InvalidInput("reconstruction target profile is empty");

  std::vector<std::size_t> reflective;
  for (std::size_t b = 0; b < k; ++b) {
    if (out.estimates[b].is_reflective) reflective.push_back(b);
  }
  const std::size_t r = reflective.size();
  const std::size_t n = k + r;

  // atom matrix B (m x n): step atoms for every estimate, then spike atoms
  const std::size_t m = target->size();
  Eigen::MatrixXcd atoms(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  Eigen::VectorXcd t(static_cast<Eigen::Index>(m));
  for (std::size_t l = 0; l < m; ++l) {
    const double wn = constants.wavenumber(target->frequencies[l]);
    const auto row = static_cast<Eigen::Index>(l);
    for (std::size_t b = 0; b < k; ++b)
      atoms(row, static_cast<Eigen::Index>(b)) =
          constants.amplitude * step_phasor(wn, constants.alpha, out.estimates[b].position_m);
    for (std::size_t i = 0; i < r; ++i)
      atoms(row, static_cast<Eigen::Index>(k + i)) =
          constants.amplitude * reflection_phasor(wn, constants.alpha, out.estimates[reflective[i]].position_m);
    t(row) = target->samples[l];
  }
  Scorer scorer;
  scorer.h = (atoms.adjoint() * atoms).real();
  scorer.g = (atoms.adjoint() * t).real();
  scorer.target_norm2 = t.squaredNorm();

  // Maps per-dimension dB values to step and spike coefficients.
  const auto coefficients = [&](const std::vector<double>& loss, const std::vector<double>& refl_db) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    double level = 1.0;
    std::size_t ri = 0;
    for (std::size_t b = 0; b < k; ++b) {
      const double xi2 = std::pow(10.0, -loss[b] / 10.0);
      if (ri < r && reflective[ri] == b) {
        v(static_cast<Eigen::Index>(k + ri)) = level * std::pow(10.0, refl_db[ri] / 10.0);
        ++ri;
      }
      v(static_cast<Eigen::Index>(b)) = level * (1.0 - xi2);
      level *= xi2;
    }
    return v;
  };

  // coarse: losses and reflectances jointly
  const std::vector<double> coarse_loss = value_grid(0.0, config.loss_max_db, config.loss_coarse_step_db);
  const std::vector<double> refl_grid = value_grid(0.0, config.reflectance_max_db, config.reflectance_step_db);
  std::vector<std::vector<double>> values(n);
  for (std::size_t b = 0; b < k; ++b) values[b] = coarse_loss;
  for (std::size_t i = 0; i < r; ++i) values[k + i] = refl_grid;

  std::vector<double> loss(k), refl_db(r);
  const auto unpack = [&](const std::vector<std::vector<double>>& vals, const std::vector<std::size_t>& idx) {
    for (std::size_t b = 0; b < k; ++b) loss[b] = vals[b][idx[b]];
    for (std::size_t i = 0; i < r; ++i) refl_db[i] = vals[k + i][idx[k + i]];
  };
  const auto eval_on = [&](const std::vector<std::vector<double>>& vals) {
    return [&](const std::vector<std::size_t>& idx) {
      unpack(vals, idx);
      return scorer(coefficients(loss, refl_db));
    };
  };

  std::vector<std::size_t> start(n, 0);
  for (std::size_t b = 0; b < k; ++b) start[b] = coarse_loss.size() / 2;
  std::vector<std::size_t> coarse = grid_search(values, start, config.exhaustive_cap, eval_on(values));
  unpack(values, coarse);

  // fine: losses in a window around the coarse winner, reflectances again over
  // their full grid since they absorb the coarse loss quantization
  std::vector<std::vector<double>> fine(n);
  std::vector<std::size_t> fine_start(n, 0);
  for (std::size_t b = 0; b < k; ++b) {
    const double centre = loss[b];
    const auto steps = static_cast<long>(std::floor(config.loss_fine_halfwidth_db / config.loss_fine_step_db + 1e-9));
    for (long s = -steps; s <= steps; ++s) {
      const double v = centre + static_cast<double>(s) * config.loss_fine_step_db;
      if (v < -1e-12 || v > config.loss_max_db + 1e-12) continue;
      if (s == 0) fine_start[b] = fine[b].size();
      fine[b].push_back(std::clamp(v, 0.0, config.loss_max_db));
    }
  }
  for (std::size_t i = 0; i < r; ++i) {
    fine[k + i] = refl_grid;
    fine_start[k + i] = coarse[k + i];
  }
  const std::vector<std::size_t> best = grid_search(fine, fine_start, config.exhaustive_cap, eval_on(fine));
  unpack(fine, best);

  for (std::size_t b = 0; b < k; ++b) out.estimates[b].loss_db = loss[b];
  for (std::size_t i = 0; i < r; ++i) out.estimates[reflective[i]].reflectance_db = refl_db[i];
  return out;
}

}  // namespace bsslasso
