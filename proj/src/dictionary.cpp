#include <bsslasso/dictionary.hpp>

#include <cmath>

namespace bsslasso {

PositionGrid PositionGrid::uniform(double length_m, double step_m) {
  if (!(length_m > 0.0) || !(step_m > 0.0)) throw InvalidInput("position grid needs positive length and step");
  const auto q = static_cast<std::size_t>(std::floor(length_m / step_m + 1e-9));
  if (q == 0) throw InvalidInput("position grid step exceeds the link length");
  PositionGrid g;
  g.step = step_m;
  g.positions.resize(q);
  for (std::size_t j = 0; j < q; ++j) g.positions[j] = static_cast<double>(j + 1) * step_m;
  return g;
}

void PositionGrid::validate() const {
  if (positions.empty()) throw InvalidInput("position grid is empty");
  if (!(step > 0.0)) throw InvalidInput("position grid step must be positive");
  for (std::size_t j = 1; j < positions.size(); ++j) {
    if (std::abs(positions[j] - positions[j - 1] - step) > 1e-9 * step * static_cast<double>(j + 1))
      throw InvalidInput("position grid must be uniform with the declared step");
  }
}

Dictionary build_dictionary(const PositionGrid& grid, std::span<const double> frequencies,
                            const PhysicalConstants& constants, double length_m,
                            bool include_reflections, bool include_intercept) {
  grid.validate();
  constants.validate();
  if (frequencies.empty()) throw InvalidInput("dictionary needs at least one frequency");
  if (!(length_m > 0.0)) throw InvalidInput("dictionary needs a positive link length");

  Dictionary d;
  d.grid = grid;
  d.frequencies.assign(frequencies.begin(), frequencies.end());
  d.constants = constants;
  d.length_m = length_m;
  d.normalization = 1.0 / length_m;
  d.has_reflections = include_reflections;
  d.has_intercept = include_intercept;

  const auto m = static_cast<Eigen::Index>(frequencies.size());
  const std::size_t q = grid.size();
  const std::size_t cols = d.penalized_columns() + (include_intercept ? 1 : 0);
  d.matrix.resize(2 * m, static_cast<Eigen::Index>(cols));

  const double nu = d.normalization;
  for (std::size_t j = 0; j < q; ++j) {
    const double x = grid.positions[j];
    auto fault = d.matrix.col(static_cast<Eigen::Index>(d.fault_column(j)));
    for (Eigen::Index l = 0; l < m; ++l) {
      const Complex a = nu * step_phasor(constants.wavenumber(frequencies[l]), constants.alpha, x);
      fault(l) = a.real();
      fault(m + l) = a.imag();
    }
    if (include_reflections) {
      auto refl = d.matrix.col(static_cast<Eigen::Index>(d.reflection_column(j)));
      for (Eigen::Index l = 0; l < m; ++l) {
        const Complex r = nu * reflection_phasor(constants.wavenumber(frequencies[l]), constants.alpha, x);
        refl(l) = r.real();
        refl(m + l) = r.imag();
      }
    }
  }
  if (include_intercept) d.matrix.col(static_cast<Eigen::Index>(d.intercept_column())).setOnes();
  return d;
}

Eigen::VectorXd build_observation(const FrequencyProfile& profile) {
  if (profile.size() == 0) throw InvalidInput("empty profile");
  const auto m = static_cast<Eigen::Index>(profile.size());
  Eigen::VectorXd y(2 * m);
  for (Eigen::Index l = 0; l < m; ++l) {
    y(l) = profile.samples[static_cast<std::size_t>(l)].real();
    y(m + l) = profile.samples[static_cast<std::size_t>(l)].imag();
  }
  return y;
}

FrequencyProfile profile_from_observation(const Eigen::VectorXd& y, std::span<const double> frequencies) {
  const auto m = static_cast<Eigen::Index>(frequencies.size());
  if (y.size() != 2 * m) throw InvalidInput("observation length does not match the frequency grid");
  FrequencyProfile p;
  p.frequencies.assign(frequencies.begin(), frequencies.end());
  p.samples.resize(frequencies.size());
  for (Eigen::Index l = 0; l < m; ++l) p.samples[static_cast<std::size_t>(l)] = Complex(y(l), y(m + l));
  return p;
}

Eigen::MatrixXd penalized_gram(const Dictionary& dict) {
  // With E_i(f) = exp(s X_i), s = j k - 2 alpha, the atoms are (E_i - 1)/s and E_i.
  // Every real inner product splits into a lag sum over X_i - X_j, which only
  // depends on the index difference on a uniform grid, plus per-column sums.
  const std::size_t q = dict.q();
  const double step = dict.grid.step;
  const double alpha = dict.constants.alpha;
  const bool refl = dict.has_reflections;
  const double x0 = dict.grid.positions.front();

  std::vector<double> lag_ss(q, 0.0);           // sum cos(k d) / |s|^2
  std::vector<double> lag_rr(q, 0.0);           // sum cos(k d)
  std::vector<Complex> lag_sr_pos(q), lag_sr_neg(q);  // sum exp(+-j k d) / s
  std::vector<double> col_ss(q, 0.0);           // Re sum E_i / |s|^2
  std::vector<double> col_sr(q, 0.0);           // Re sum conj(E_j) / s
  double const_ss = 0.0;                        // sum 1 / |s|^2

  constexpr std::size_t kAnchor = 128;
  for (double f : dict.frequencies) {
    const double k = dict.constants.wavenumber(f);
    const Complex s(-2.0 * alpha, k);
    const double inv_s2 = 1.0 / std::norm(s);
    const Complex inv_s = 1.0 / s;
    const_ss += inv_s2;

    const Complex lag_rot = std::polar(1.0, k * step);
    Complex lag = 1.0;
    const Complex col_rot = std::exp(s * step);
    Complex e;
    for (std::size_t d = 0; d < q; ++d) {
      if (d % kAnchor == 0) {
        lag = std::polar(1.0, k * step * static_cast<double>(d));
        e = std::exp(s * (x0 + step * static_cast<double>(d)));
      }
      lag_ss[d] += lag.real() * inv_s2;
      col_ss[d] += e.real() * inv_s2;
      if (refl) {
        lag_rr[d] += lag.real();
        lag_sr_pos[d] += lag * inv_s;
        lag_sr_neg[d] += std::conj(lag) * inv_s;
        col_sr[d] += (std::conj(e) * inv_s).real();
      }
      lag *= lag_rot;
      e *= col_rot;
    }
  }

  std::vector<double> decay(q);
  for (std::size_t i = 0; i < q; ++i) decay[i] = std::exp(-2.0 * alpha * dict.grid.positions[i]);

  const std::size_t p = dict.penalized_columns();
  const double nu2 = dict.normalization * dict.normalization;
  Eigen::MatrixXd g(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < q; ++j) {
    for (std::size_t i = j; i < q; ++i) {
      const double ss = decay[i] * decay[j] * lag_ss[i - j] - col_ss[i] - col_ss[j] + const_ss;
      g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = nu2 * ss;
      g(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = nu2 * ss;
    }
  }
  if (refl) {
    for (std::size_t j = 0; j < q; ++j) {
      for (std::size_t i = j; i < q; ++i) {
        const double rr = nu2 * decay[i] * decay[j] * lag_rr[i - j];
        g(static_cast<Eigen::Index>(q + i), static_cast<Eigen::Index>(q + j)) = rr;
        g(static_cast<Eigen::Index>(q + j), static_cast<Eigen::Index>(q + i)) = rr;
      }
    }
    // fault i against reflection j
    for (std::size_t i = 0; i < q; ++i) {
      for (std::size_t j = 0; j < q; ++j) {
        const Complex lag = i >= j ? lag_sr_pos[i - j] : lag_sr_neg[j - i];
        const double sr = nu2 * (decay[i] * decay[j] * lag.real() - col_sr[j]);
        g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(q + j)) = sr;
        g(static_cast<Eigen::Index>(q + j), static_cast<Eigen::Index>(i)) = sr;
      }
    }
  }
  return g;
}

}  // namespace bsslasso
