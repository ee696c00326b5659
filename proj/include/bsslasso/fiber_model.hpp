#pragma once

// Physical forward model of a fiber link: step/spike backscatter profile P(z),
// the fault-magnitude <-> step-coefficient recursion, and the frequency-domain
// response S(f) computed either in closed form or by quadrature of P(z).

#include <bsslasso/error.hpp>

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace bsslasso {

using Complex = std::complex<double>;

struct Event {
  double position_m = 0.0;
  double loss_db = 0.0;                   // drop of the backscatter level at the step
  std::optional<double> reflectance_db;  // present iff the event is reflective

  bool reflective() const { return reflectance_db.has_value(); }
};

struct FiberLink {
  double length_m = 0.0;
  std::vector<Event> events;  // strictly increasing in position
  std::optional<std::uint64_t> seed;

  // Throws InvalidInput when an invariant does not hold.
  void validate() const;
};

struct PhysicalConstants {
  double alpha = 0.0;        // 1/m, round-trip power decays as exp(-2 alpha z)
  double group_index = 1.0;  // n
  double light_speed = 0.0;  // m/s
  double amplitude = 1.0;    // A, lumps every receiver/launch gain

  // 0.2 dB/km attenuation, n = 1.468, A = 1.
  static PhysicalConstants standard_fiber();
  static double alpha_from_db_per_km(double db_per_km);

  void validate() const;

  // Round-trip modulation wavenumber 4 pi f n / c, in rad/m.
  double wavenumber(double frequency_hz) const;
};

struct StepCoefficients {
  std::vector<double> phi;                   // one per event, in event order
  std::vector<std::optional<double>> theta;  // Dirac weight [level * m] for reflective events
};

struct FrequencyProfile {
  std::vector<double> frequencies;  // Hz, strictly increasing, > 0
  std::vector<Complex> samples;

  std::size_t size() const { return frequencies.size(); }
  void validate() const;
};

// Uniformly spaced frequencies start, start + step, ... up to and including stop.
std::vector<double> frequency_grid(double start_hz, double stop_hz, double step_hz);

// -- magnitude recursion ----------------------------------------------------

enum class MagnitudeFailure {
  NegativeRadicand,  // 1 - phi_b / prod_{j<b} xi_j^2 < 0
  ZeroLevel,         // running product of xi_j^2 reached 0
};

class InvalidCoefficients : public NumericalError {
 public:
  InvalidCoefficients(MagnitudeFailure kind, std::size_t index);
  MagnitudeFailure kind() const noexcept { return kind_; }
  std::size_t index() const noexcept { return index_; }

 private:
  MagnitudeFailure kind_;
  std::size_t index_;
};

// Linear transmission factor xi = 10^(-loss_db / 20), so xi^2 is the level ratio.
double transmission_from_loss_db(double loss_db);
double loss_db_from_transmission(double xi);

// Step coefficients phi_b = prod_{j<b} xi_j^2 - prod_{j<=b} xi_j^2 and Dirac weights
// theta_r = (backscatter level just before X_r) * 10^(R/10) * 1 m.
StepCoefficients coefficients_from_magnitudes(const FiberLink& link);

// xi_b = sqrt(1 - phi_b / prod_{j<b} xi_j^2). Throws InvalidCoefficients.
std::vector<double> magnitudes_from_coefficients(std::span<const double> phi);

// Level of P(z) (without attenuation) on the segment just before event `index`.
double level_before(std::span<const double> phi, std::size_t index);

// Reflectance in dB implied by a Dirac weight sitting on a given level.
double reflectance_db_from_theta(double theta, double level);
double theta_from_reflectance_db(double reflectance_db, double level);

// -- time domain ------------------------------------------------------------

// Uniform grid 0, dz, 2dz, ... , length merged with every event position so
// step discontinuities and spikes fall on nodes.
std::vector<double> profile_grid(const FiberLink& link, double dz = 0.25);

// Trapezoid weights of a strictly increasing grid.
std::vector<double> trapezoid_weights(std::span<const double> z);

// P(z) sampled on z_grid. A node sitting exactly on an interior step takes the
// mean of the one-sided limits; the two end nodes take their interior limit.
// Each spike goes to its nearest node with value theta * exp(-2 alpha X) / weight.
std::vector<double> time_domain_profile(const FiberLink& link, const PhysicalConstants& constants,
                                        std::span<const double> z_grid);

// -- frequency domain -------------------------------------------------------

// (exp((j k - 2 alpha) X) - 1) / (j k - 2 alpha), stable as k, alpha -> 0.
Complex step_phasor(double wavenumber, double alpha, double position);
// exp(j k X) exp(-2 alpha X).
Complex reflection_phasor(double wavenumber, double alpha, double position);

// Closed-form S(f) at a single, possibly negative, frequency.
Complex link_response(const StepCoefficients& coeffs, const FiberLink& link,
                      const PhysicalConstants& constants, double frequency_hz);

FrequencyProfile frequency_response_analytic(const FiberLink& link,
                                             const PhysicalConstants& constants,
                                             std::span<const double> frequencies);

// Largest k * dz tolerated by the quadrature.
inline constexpr double kMaxPhaseStep = 0.05;

// Trapezoid quadrature of A * P(z) * exp(j k z) over the sampled profile. The
// exp(-2 alpha z) decay must already be inside `power`.
FrequencyProfile frequency_response_numeric(std::span<const double> z_grid,
                                            std::span<const double> power,
                                            const PhysicalConstants& constants,
                                            std::span<const double> frequencies);

// ||a - b|| / ||b|| over the complex samples. Frequencies must coincide.
double relative_l2_error(const FrequencyProfile& a, const FrequencyProfile& b);

}  // namespace bsslasso
