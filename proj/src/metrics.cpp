#include <bsslasso/metrics.hpp>

#include <bsslasso/io.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace bsslasso {

std::size_t MatchResult::true_positives() const {
  return static_cast<std::size_t>(
      std::count_if(pairs.begin(), pairs.end(), [this](const MatchPair& p) { return p.error_m <= radius_m; }));
}

std::size_t MatchResult::false_negatives() const {
  return unmatched_truths.size() + (pairs.size() - true_positives());
}

std::size_t MatchResult::false_positives() const {
  return unmatched_estimates.size() + (pairs.size() - true_positives());
}

std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  if (n == 0) return {};
  const std::size_t m = cost.front().size();
  if (m < n) throw InvalidInput("assignment needs at least as many columns as rows");
  for (const auto& row : cost) {
    if (row.size() != m) throw InvalidInput("ragged cost matrix");
  }
  // Shortest augmenting path with potentials, 1-based with a virtual column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) assignment[p[j] - 1] = j - 1;
  }
  return assignment;
}

MatchResult match_events(std::span<const double> truth, std::span<const double> estimates, double radius_m) {
  if (!(radius_m > 0.0)) throw InvalidInput("match radius must be positive");
  MatchResult r;
  r.radius_m = radius_m;
  r.truth_count = truth.size();
  r.estimate_count = estimates.size();
  const bool truth_rows = truth.size() <= estimates.size();
  const std::size_t rows = truth_rows ? truth.size() : estimates.size();
  const std::size_t cols = truth_rows ? estimates.size() : truth.size();
  std::vector<std::vector<double>> cost(rows, std::vector<double>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      cost[i][j] = truth_rows ? std::abs(estimates[j] - truth[i]) : std::abs(estimates[i] - truth[j]);
    }
  }
  const std::vector<std::size_t> a = hungarian(cost);
  std::vector<char> truth_used(truth.size(), 0), est_used(estimates.size(), 0);
  for (std::size_t i = 0; i < rows; ++i) {
    MatchPair pair;
    pair.truth = truth_rows ? i : a[i];
    pair.estimate = truth_rows ? a[i] : i;
    pair.error_m = std::abs(estimates[pair.estimate] - truth[pair.truth]);
    truth_used[pair.truth] = 1;
    est_used[pair.estimate] = 1;
    r.pairs.push_back(pair);
  }
  std::sort(r.pairs.begin(), r.pairs.end(), [](const MatchPair& x, const MatchPair& y) { return x.truth < y.truth; });
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!truth_used[i]) r.unmatched_truths.push_back(i);
  }
  for (std::size_t j = 0; j < estimates.size(); ++j) {
    if (!est_used[j]) r.unmatched_estimates.push_back(j);
  }
  return r;
}

MatchResult match_events(const FiberLink& truth, std::span<const double> estimates, double radius_m) {
  std::vector<double> positions;
  for (const Event& e : truth.events) positions.push_back(e.position_m);
  return match_events(positions, estimates, radius_m);
}

double ErrorBands::percent(std::size_t band) const {
  return total ? 100.0 * static_cast<double>(counts.at(band)) / static_cast<double>(total) : 0.0;
}

std::size_t band_of(double error_m) {
  for (std::size_t b = 0; b < kBandEdges.size(); ++b) {
    if (error_m <= kBandEdges[b]) return b;
  }
  return kBandEdges.size();
}

ErrorBands stratify_errors(std::span<const MatchResult> matches) {
  ErrorBands bands;
  for (const MatchResult& m : matches) {
    for (const MatchPair& p : m.pairs) ++bands.counts[band_of(p.error_m)];
    bands.counts.back() += m.unmatched_truths.size();
    bands.total += m.truth_count;
  }
  if (bands.total == 0) throw InvalidInput("no truth events to stratify");
  return bands;
}

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::optional<double> ContingencyTable::sensitivity() const {
  return ratio(true_positives, true_positives + false_negatives);
}
std::optional<double> ContingencyTable::specificity() const {
  return ratio(true_negatives, true_negatives + false_positives);
}
std::optional<double> ContingencyTable::precision() const {
  return ratio(true_positives, true_positives + false_positives);
}

ContingencyTable contingency(std::span<const MatchResult> matches, std::span<const std::size_t> grid_sizes) {
  if (matches.size() != grid_sizes.size()) throw InvalidInput("one grid size per link is required");
  ContingencyTable t;
  std::size_t cells = 0;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    t.true_positives += matches[i].true_positives();
    t.false_positives += matches[i].false_positives();
    t.false_negatives += matches[i].false_negatives();
    cells += grid_sizes[i];
  }
  const std::size_t used = t.true_positives + t.false_positives + t.false_negatives;
  t.true_negatives = cells > used ? cells - used : 0;
  return t;
}

std::size_t grid_size_for(double length_m, double step_m) {
  if (!(length_m > 0.0) || !(step_m > 0.0)) throw InvalidInput("grid size needs positive length and step");
  return static_cast<std::size_t>(std::floor(length_m / step_m + 1e-9));
}

ModeEvaluation evaluate_mode(const std::string& label, std::span<const FiberLink> truths,
                             const std::vector<std::vector<double>>& estimates, double grid_step_m, double radius_m) {
  if (truths.size() != estimates.size()) throw InvalidInput("truth and estimate link counts differ");
  ModeEvaluation ev;
  ev.label = label;
  std::vector<std::size_t> sizes;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    ev.matches.push_back(match_events(truths[i], estimates[i], radius_m));
    std::vector<double> tp;
    for (const Event& e : truths[i].events) tp.push_back(e.position_m);
    ev.truth_positions.push_back(std::move(tp));
    ev.estimate_positions.push_back(estimates[i]);
    sizes.push_back(grid_size_for(truths[i].length_m, grid_step_m));
  }
  ev.bands = stratify_errors(ev.matches);
  ev.table = contingency(ev.matches, sizes);
  return ev;
}

namespace {

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string percent_or_dash(const std::optional<double>& v) { return v ? fixed2(100.0 * *v) + "%" : "undefined"; }

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string evaluation_text(std::span<const ModeEvaluation> modes) {
  std::string out = "Selection errors (% of faults)\n";
  out += pad("band", 12);
  for (const auto& m : modes) out += pad(m.label, 14);
  out += "\n";
  for (std::size_t b = 0; b < kBandLabels.size(); ++b) {
    out += pad(kBandLabels[b], 12);
    for (const auto& m : modes) out += pad(fixed2(m.bands.percent(b)) + "%", 14);
    out += "\n";
  }
  out += "\nContingency (+-" + fixed2(modes.empty() || modes.front().matches.empty()
                                           ? kMatchRadius
                                           : modes.front().matches.front().radius_m) +
         " m)\n";
  out += pad("", 14);
  for (const auto& m : modes) out += pad(m.label, 14);
  out += "\n";
  const auto row = [&](const std::string& name, auto get) {
    out += pad(name, 14);
    for (const auto& m : modes) out += pad(get(m), 14);
    out += "\n";
  };
  row("TP", [](const ModeEvaluation& m) { return std::to_string(m.table.true_positives); });
  row("FP", [](const ModeEvaluation& m) { return std::to_string(m.table.false_positives); });
  row("FN", [](const ModeEvaluation& m) { return std::to_string(m.table.false_negatives); });
  row("TN", [](const ModeEvaluation& m) { return std::to_string(m.table.true_negatives); });
  row("sensitivity", [](const ModeEvaluation& m) { return percent_or_dash(m.table.sensitivity()); });
  row("specificity", [](const ModeEvaluation& m) { return percent_or_dash(m.table.specificity()); });
  row("precision", [](const ModeEvaluation& m) { return percent_or_dash(m.table.precision()); });
  return out;
}

std::string evaluation_csv(std::span<const ModeEvaluation> modes) {
  std::string out = "mode,link,kind,truth_index,estimate_index,truth_position_m,estimate_position_m,error_m,band\n";
  for (const auto& m : modes) {
    for (std::size_t l = 0; l < m.matches.size(); ++l) {
      const MatchResult& r = m.matches[l];
      const std::string prefix = m.label + "," + std::to_string(l) + ",";
      for (const MatchPair& p : r.pairs) {
        out += prefix + (p.error_m <= r.radius_m ? "tp," : "far,") + std::to_string(p.truth) + "," +
               std::to_string(p.estimate) + "," + io::format_double(m.truth_positions[l][p.truth]) + "," +
               io::format_double(m.estimate_positions[l][p.estimate]) + "," + io::format_double(p.error_m) + "," +
               "\"" + kBandLabels[band_of(p.error_m)] + "\"\n";
      }
      for (std::size_t t : r.unmatched_truths) {
        out += prefix + "missed," + std::to_string(t) + ",," + io::format_double(m.truth_positions[l][t]) + ",,,\"" +
               kBandLabels.back() + "\"\n";
      }
      for (std::size_t e : r.unmatched_estimates) {
        out += prefix + "spurious,," + std::to_string(e) + ",," + io::format_double(m.estimate_positions[l][e]) +
               ",,\n";
      }
    }
  }
  return out;
}

}  // namespace bsslasso
