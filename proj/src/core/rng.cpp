// Copyright 2026 the mooclet-engine authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "core/rng.hpp"

#include <cmath>

#include "core/error.hpp"

namespace mooclet {

std::uint64_t Rng::next_below(std::uint64_t n) {
  if (n == 0) fail(Errc::invalid_argument, "next_below: n must be positive");
  // Rejection sampling to avoid modulo bias.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  // Box-Muller; the second variate of the pair is discarded to keep the
  // stream position a pure function of the call sequence.
  double u1 = 1.0 - next_double();  // (0, 1]
  double u2 = next_double();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double Rng::gamma(double shape) {
  if (!(shape > 0.0)) fail(Errc::invalid_argument, "gamma: shape must be positive");
  if (shape < 1.0) {
    // Boost: G(a) = G(a + 1) * U^(1/a)
    double g = gamma(shape + 1.0);
    double u = 1.0 - next_double();
    return g * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    double u = next_double();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double Rng::beta(double a, double b) {
  double x = gamma(a);
  double y = gamma(b);
  if (x + y == 0.0) return 0.5;  // underflow guard for extreme parameters
  return x / (x + y);
}

void Rng::advance_to(std::uint64_t target) {
  if (target < draws_) {
    fail(Errc::invalid_argument, "advance_to: cannot rewind the stream");
  }
  if (target > draws_) {
    gen_.discard(target - draws_);
    draws_ = target;
  }
}

std::string Rng::state_tag() const {
  return std::to_string(seed_) + ":" + std::to_string(draws_);
}

std::uint64_t derive_seed(std::uint64_t parent, const std::string& label) {
  // FNV-1a over the label, then splitmix64 finalization mixed with the parent.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : label) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::uint64_t z = parent + 0x9E3779B97F4A7C15ULL + h;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace mooclet
