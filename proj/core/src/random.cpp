#include "fedcf/random.hpp"

#include <cmath>
#include <numbers>

namespace fedcf {

double Rng::normal() {
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  const double u1 = (static_cast<double>(engine_() >> 11) + 0.5) * kScale;
  const double u2 = static_cast<double>(engine_() >> 11) * kScale;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace fedcf
