#include <bsslasso/fiber_model.hpp>

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <numbers>
#include <string>

namespace bsslasso {

namespace {

std::string event_label(std::size_t i) { return "event[" + std::to_string(i) + "]"; }

bool uniform_spacing(std::span<const double> x) {
  if (x.size() < 3) return true;
  const double step = (x.back() - x.front()) / static_cast<double>(x.size() - 1);
  const double tol = 1e-9 * std::max(std::abs(x.back()), std::abs(x.front()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::abs(x[i] - (x.front() + static_cast<double>(i) * step)) > tol) return false;
  }
  return true;
}

}  // namespace

void FiberLink::validate() const {
  if (!(length_m > 0.0) || !std::isfinite(length_m)) throw InvalidInput("link length must be positive");
  double previous = 0.0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    if (!(e.position_m > 0.0) || !std::isfinite(e.position_m))
      throw InvalidInput(event_label(i) + ": position must be positive");
    if (e.position_m > length_m) throw InvalidInput(event_label(i) + ": position beyond link length");
    if (i > 0 && !(e.position_m > previous))
      throw InvalidInput(event_label(i) + ": positions must be strictly increasing");
    if (!(e.loss_db >= 0.0) || !std::isfinite(e.loss_db))
      throw InvalidInput(event_label(i) + ": loss_db must be finite and >= 0");
    if (e.reflectance_db && (!(*e.reflectance_db >= 0.0) || !std::isfinite(*e.reflectance_db)))
      throw InvalidInput(event_label(i) + ": reflectance_db must be finite and >= 0");
    previous = e.position_m;
  }
}

PhysicalConstants PhysicalConstants::standard_fiber() {
  return PhysicalConstants{alpha_from_db_per_km(0.2), 1.468, 299'792'458.0, 1.0};
}

double PhysicalConstants::alpha_from_db_per_km(double db_per_km) {
  return db_per_km * std::numbers::ln10 / 10.0 / 1000.0;
}

void PhysicalConstants::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidInput("alpha must be >= 0");
  if (!(group_index >= 1.0) || !std::isfinite(group_index)) throw InvalidInput("group_index must be >= 1");
  if (!(light_speed > 0.0) || !std::isfinite(light_speed)) throw InvalidInput("light_speed must be > 0");
  if (!(amplitude > 0.0) || !std::isfinite(amplitude)) throw InvalidInput("amplitude must be > 0");
}

double PhysicalConstants::wavenumber(double frequency_hz) const {
  return 4.0 * std::numbers::pi * frequency_hz * group_index / light_speed;
}

void FrequencyProfile::validate() const {
  if (frequencies.size() != samples.size()) throw InvalidInput("profile: frequency/sample count mismatch");
  for (std::size_t i = 0; i < frequencies.size(); ++i) {
    if (!(frequencies[i] > 0.0) || !std::isfinite(frequencies[i]))
      throw InvalidInput("profile: frequencies must be positive");
    if (i > 0 && !(frequencies[i] > frequencies[i - 1]))
      throw InvalidInput("profile: frequencies must be strictly increasing");
    if (!std::isfinite(samples[i].real()) || !std::isfinite(samples[i].imag()))
      throw InvalidInput("profile: non-finite sample");
  }
}

std::vector<double> frequency_grid(double start_hz, double stop_hz, double step_hz) {
  if (!(start_hz > 0.0) || !(step_hz > 0.0) || !(stop_hz >= start_hz))
    throw InvalidInput("frequency grid needs 0 < start <= stop and step > 0");
  const auto count = static_cast<std::size_t>(std::floor((stop_hz - start_hz) / step_hz + 1e-9)) + 1;
  std::vector<double> f(count);
  for (std::size_t i = 0; i < count; ++i) f[i] = start_hz + static_cast<double>(i) * step_hz;
  return f;
}

InvalidCoefficients::InvalidCoefficients(MagnitudeFailure kind, std::size_t index)
    : NumericalError(kind == MagnitudeFailure::NegativeRadicand
                         ? "step coefficient " + std::to_string(index) + " exceeds the remaining level"
                         : "level reached zero before step coefficient " + std::to_string(index)),
      kind_(kind),
      index_(index) {}

double transmission_from_loss_db(double loss_db) { return std::pow(10.0, -loss_db / 20.0); }

double loss_db_from_transmission(double xi) { return -20.0 * std::log10(xi); }

StepCoefficients coefficients_from_magnitudes(const FiberLink& link) {
  link.validate();
  StepCoefficients out;
  out.phi.reserve(link.events.size());
  out.theta.reserve(link.events.size());
  double level = 1.0;
  for (const Event& e : link.events) {
    const double xi2 = std::pow(10.0, -e.loss_db / 10.0);
    const double phi = level * (1.0 - xi2);
    if (!std::isfinite(phi)) throw NumericalError("non-finite step coefficient");
    out.phi.push_back(phi);
    if (e.reflectance_db) {
      out.theta.emplace_back(theta_from_reflectance_db(*e.reflectance_db, level));
    } else {
      out.theta.emplace_back(std::nullopt);
    }
    level *= xi2;
    if (!(level >= 0.0)) throw NumericalError("cumulative loss drives the level below zero");
  }
  return out;
}

std::vector<double> magnitudes_from_coefficients(std::span<const double> phi) {
  std::vector<double> xi;
  xi.reserve(phi.size());
  double level = 1.0;
  for (std::size_t b = 0; b < phi.size(); ++b) {
    if (!(level > 0.0)) throw InvalidCoefficients(MagnitudeFailure::ZeroLevel, b);
    const double radicand = 1.0 - phi[b] / level;
    if (radicand < 0.0 || !std::isfinite(radicand))
      throw InvalidCoefficients(MagnitudeFailure::NegativeRadicand, b);
    const double x = std::sqrt(radicand);
    xi.push_back(x);
    level *= radicand;
  }
  return xi;
}

double level_before(std::span<const double> phi, std::size_t index) {
  double level = 1.0;
  for (std::size_t j = 0; j < index && j < phi.size(); ++j) level -= phi[j];
  return level;
}

double reflectance_db_from_theta(double theta, double level) {
  return 10.0 * std::log10(theta / level);
}

double theta_from_reflectance_db(double reflectance_db, double level) {
  return level * std::pow(10.0, reflectance_db / 10.0);
}

std::vector<double> profile_grid(const FiberLink& link, double dz) {
  if (!(dz > 0.0)) throw InvalidInput("grid spacing must be positive");
  const double length = link.length_m;
  const auto count = static_cast<std::size_t>(std::floor(length / dz));
  std::vector<double> z;
  z.reserve(count + link.events.size() + 2);
  const double snap = dz * 1e-6;
  std::size_t next_event = 0;
  for (std::size_t i = 0; i <= count; ++i) {
    const double node = static_cast<double>(i) * dz;
    while (next_event < link.events.size() && link.events[next_event].position_m <= node + snap) {
      const double x = link.events[next_event].position_m;
      if (z.empty() || x > z.back() + snap) z.push_back(x);
      ++next_event;
    }
    if (z.empty() || node > z.back() + snap) z.push_back(node);
  }
  for (; next_event < link.events.size(); ++next_event) {
    const double x = link.events[next_event].position_m;
    if (x > z.back() + snap) z.push_back(x);
  }
  if (length > z.back() + snap) z.push_back(length);

  // Mirror the nearer neighbour of each interior event node so both adjacent
  // intervals match; the mean-valued jump node is then exact under the
  // trapezoid rule.
  std::vector<double> extra;
  for (const Event& e : link.events) {
    const auto it = std::lower_bound(z.begin(), z.end(), e.position_m - snap);
    if (it == z.begin() || it == z.end() || std::next(it) == z.end()) continue;
    const double x = *it;
    const double left = x - *std::prev(it);
    const double right = *std::next(it) - x;
    if (left < right - snap) extra.push_back(x + left);
    if (right < left - snap) extra.push_back(x - right);
  }
  if (!extra.empty()) {
    std::sort(extra.begin(), extra.end());
    std::vector<double> merged;
    merged.reserve(z.size() + extra.size());
    std::merge(z.begin(), z.end(), extra.begin(), extra.end(), std::back_inserter(merged));
    z.clear();
    for (double v : merged) {
      if (z.empty() || v > z.back() + snap) z.push_back(v);
    }
  }
  return z;
}

std::vector<double> trapezoid_weights(std::span<const double> z) {
  std::vector<double> w(z.size(), 0.0);
  for (std::size_t i = 0; i + 1 < z.size(); ++i) {
    const double h = 0.5 * (z[i + 1] - z[i]);
    w[i] += h;
    w[i + 1] += h;
  }
  return w;
}

std::vector<double> time_domain_profile(const FiberLink& link, const PhysicalConstants& constants,
                                        std::span<const double> z_grid) {
  if (z_grid.empty()) throw InvalidInput("empty z grid");
  for (std::size_t i = 0; i < z_grid.size(); ++i) {
    if (z_grid[i] < 0.0 || z_grid[i] > link.length_m) throw InvalidInput("z grid outside [0, length]");
    if (i > 0 && !(z_grid[i] > z_grid[i - 1])) throw InvalidInput("z grid must be strictly increasing");
  }
  const StepCoefficients coeffs = coefficients_from_magnitudes(link);
  const std::size_t n = z_grid.size();
  const double first = z_grid.front();
  const double last = z_grid.back();

  std::vector<double> p(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = z_grid[i];
    double level = 0.0;
    for (std::size_t b = 0; b < link.events.size(); ++b) {
      const double x = link.events[b].position_m;
      double h;
      if (z < x) {
        h = 1.0;
      } else if (z > x) {
        h = 0.0;
      } else if (n > 1 && z == last) {
        h = 1.0;
      } else if (n > 1 && z == first) {
        h = 0.0;
      } else {
        h = 0.5;
      }
      level += coeffs.phi[b] * h;
    }
    p[i] = std::exp(-2.0 * constants.alpha * z) * level;
  }

  const std::vector<double> w = trapezoid_weights(z_grid);
  for (std::size_t r = 0; r < link.events.size(); ++r) {
    if (!coeffs.theta[r]) continue;
    const double x = link.events[r].position_m;
    auto it = std::lower_bound(z_grid.begin(), z_grid.end(), x);
    std::size_t idx = static_cast<std::size_t>(it - z_grid.begin());
    if (idx == n) {
      idx = n - 1;
    } else if (idx > 0 && (x - z_grid[idx - 1]) <= (z_grid[idx] - x)) {
      idx = idx - 1;
    }
    const double width = n > 1 ? w[idx] : 1.0;
    p[idx] += *coeffs.theta[r] * std::exp(-2.0 * constants.alpha * x) / width;
  }
  return p;
}

Complex step_phasor(double wavenumber, double alpha, double position) {
  const double a = -2.0 * alpha * position;
  const double b = wavenumber * position;
  // exp(a + jb) - 1 without cancellation for small |a + jb|
  const double s = std::sin(0.5 * b);
  const Complex num(std::expm1(a) * std::cos(b) - 2.0 * s * s, std::exp(a) * std::sin(b));
  const Complex rate(-2.0 * alpha, wavenumber);
  if (rate == Complex(0.0, 0.0)) return Complex(position, 0.0);
  return num / rate;
}

Complex reflection_phasor(double wavenumber, double alpha, double position) {
  return std::polar(std::exp(-2.0 * alpha * position), wavenumber * position);
}

Complex link_response(const StepCoefficients& coeffs, const FiberLink& link,
                      const PhysicalConstants& constants, double frequency_hz) {
  const double k = constants.wavenumber(frequency_hz);
  Complex s(0.0, 0.0);
  for (std::size_t b = 0; b < link.events.size(); ++b) {
    const double x = link.events[b].position_m;
    s += coeffs.phi[b] * step_phasor(k, constants.alpha, x);
    if (coeffs.theta[b]) s += *coeffs.theta[b] * reflection_phasor(k, constants.alpha, x);
  }
  return constants.amplitude * s;
}

FrequencyProfile frequency_response_analytic(const FiberLink& link,
                                             const PhysicalConstants& constants,
                                             std::span<const double> frequencies) {
  constants.validate();
  const StepCoefficients coeffs = coefficients_from_magnitudes(link);
  FrequencyProfile out;
  out.frequencies.assign(frequencies.begin(), frequencies.end());
  out.samples.resize(frequencies.size());
  for (std::size_t i = 0; i < frequencies.size(); ++i) {
    if (!(frequencies[i] > 0.0)) throw InvalidInput("frequencies must be positive");
    out.samples[i] = link_response(coeffs, link, constants, frequencies[i]);
  }
  return out;
}

FrequencyProfile frequency_response_numeric(std::span<const double> z_grid,
                                            std::span<const double> power,
                                            const PhysicalConstants& constants,
                                            std::span<const double> frequencies) {
  constants.validate();
  if (z_grid.size() != power.size()) throw InvalidInput("profile and grid sizes differ");
  if (z_grid.size() < 2) throw InvalidInput("quadrature needs at least two nodes");
  double max_step = 0.0;
  for (std::size_t i = 1; i < z_grid.size(); ++i) {
    if (!(z_grid[i] > z_grid[i - 1])) throw InvalidInput("z grid must be strictly increasing");
    max_step = std::max(max_step, z_grid[i] - z_grid[i - 1]);
  }
  double f_max = 0.0;
  for (double f : frequencies) {
    if (!(f > 0.0)) throw InvalidInput("frequencies must be positive");
    f_max = std::max(f_max, f);
  }
  if (constants.wavenumber(f_max) * max_step > kMaxPhaseStep)
    throw InvalidInput("z grid too coarse for the highest frequency");

  const std::vector<double> w = trapezoid_weights(z_grid);
  const std::size_t m = frequencies.size();
  std::vector<Complex> acc(m, Complex(0.0, 0.0));

  // Uniform frequencies: walk the kernel exp(j k_l z) along l by rotation,
  // re-anchoring on an exact polar every kAnchor steps.
  constexpr std::size_t kAnchor = 64;
  const bool uniform = uniform_spacing(frequencies);
  const double k0 = m ? constants.wavenumber(frequencies.front()) : 0.0;
  const double dk = m > 1 ? (constants.wavenumber(frequencies.back()) - k0) / static_cast<double>(m - 1) : 0.0;

  for (std::size_t i = 0; i < z_grid.size(); ++i) {
    const double weight = w[i] * power[i];
    if (weight == 0.0) continue;
    const double z = z_grid[i];
    if (uniform) {
      const Complex rot = std::polar(1.0, dk * z);
      Complex phase;
      for (std::size_t l = 0; l < m; ++l) {
        if (l % kAnchor == 0) {
          phase = std::polar(weight, (k0 + static_cast<double>(l) * dk) * z);
        } else {
          phase *= rot;
        }
        acc[l] += phase;
      }
    } else {
      for (std::size_t l = 0; l < m; ++l) {
        acc[l] += std::polar(weight, constants.wavenumber(frequencies[l]) * z);
      }
    }
  }

  FrequencyProfile out;
  out.frequencies.assign(frequencies.begin(), frequencies.end());
  out.samples.resize(m);
  for (std::size_t l = 0; l < m; ++l) out.samples[l] = constants.amplitude * acc[l];
  return out;
}

double relative_l2_error(const FrequencyProfile& a, const FrequencyProfile& b) {
  if (a.size() != b.size()) throw InvalidInput("profiles differ in length");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.frequencies[i] != b.frequencies[i]) throw InvalidInput("profiles sampled on different grids");
    num += std::norm(a.samples[i] - b.samples[i]);
    den += std::norm(b.samples[i]);
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(num / den);
}

}  // namespace bsslasso
