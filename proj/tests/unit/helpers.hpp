#pragma once

#include <bsslasso/fiber_model.hpp>

#include <random>

namespace testutil {

// Random valid link with events on (0, L], optionally reflective.
inline bsslasso::FiberLink random_link(std::mt19937_64& rng, std::size_t n_events, bool reflections,
                                       double length_min = 1000.0, double length_max = 6000.0) {
  std::uniform_real_distribution<double> len(length_min, length_max), unit(0.0, 1.0);
  bsslasso::FiberLink link;
  link.length_m = len(rng);
  std::vector<double> pos;
  while (pos.size() + 1 < n_events) {
    const double p = 100.0 + unit(rng) * (link.length_m - 200.0);
    bool ok = true;
    for (double x : pos) ok = ok && std::abs(x - p) > 20.0;
    if (ok) pos.push_back(p);
  }
  std::sort(pos.begin(), pos.end());
  pos.push_back(link.length_m);
  for (double p : pos) {
    bsslasso::Event e;
    e.position_m = p;
    e.loss_db = 1.0 + 4.0 * unit(rng);
    if (reflections && unit(rng) < 0.5) e.reflectance_db = 20.0 * unit(rng);
    link.events.push_back(e);
  }
  return link;
}

inline bsslasso::PhysicalConstants standard() { return bsslasso::PhysicalConstants::standard_fiber(); }

}  // namespace testutil
