#include "segaug/rng.hpp"

#include <cmath>
#include <numbers>

namespace segaug {

double Rng::normal(double mean, double sigma) {
  // u1 in (0, 1] so the log is finite.
  double u1 = 1.0 - uniform_real();
  double u2 = uniform_real();
  double z = std::sqrt(-2.0 * std::log(u1)) *
             std::cos(2.0 * std::numbers::pi * u2);
  return mean + sigma * z;
}

}  // namespace segaug
