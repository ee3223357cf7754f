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

#ifndef MOOCLET_CORE_RNG_HPP
#define MOOCLET_CORE_RNG_HPP

#include <cstdint>
#include <random>
#include <string>

namespace mooclet {

// Counted random stream.  All variates are derived from raw 64-bit words of a
// seeded mt19937_64, so a (seed, draw count) pair pins the stream position
// exactly; replay fast-forwards with advance_to().  Distribution code is
// implemented here rather than via <random> distributions, whose output is
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed), seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t draws() const { return draws_; }

  std::uint64_t next_u64() {
    ++draws_;
    return gen_();
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n);

  double normal();                     // standard normal, Box-Muller
  double gamma(double shape);          // Gamma(shape, 1), Marsaglia-Tsang
  double beta(double a, double b);     // via two gamma draws

  // Discards raw draws until draws() == target.  target must be >= draws().
  void advance_to(std::uint64_t target);

  // "<seed>:<draws>" -- the opaque position tag stored in assignment records.
  std::string state_tag() const;

 private:
  std::mt19937_64 gen_;
  std::uint64_t seed_;
  std::uint64_t draws_ = 0;
};

// Mixes a parent seed with a label (e.g. a mooclet id) into a child seed, so
// per-mooclet streams are independent but reproducible.
std::uint64_t derive_seed(std::uint64_t parent, const std::string& label);

}  // namespace mooclet

#endif  // MOOCLET_CORE_RNG_HPP
