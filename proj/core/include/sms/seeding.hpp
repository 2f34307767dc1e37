//
// Copyright 2026 The SMS Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef SMS_SEEDING_HPP_
#define SMS_SEEDING_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sms/datasets.hpp"
#include "sms/tensor.hpp"

namespace sms {

enum class Placement { bottom_right, bottom_left, top_right, top_left };

std::string_view to_string(Placement p);
Placement parse_placement(std::string_view s);

// A user-secret pattern in input space. Exactly `security_n` entries of
// `pattern` are nonzero, all in (0, 1].
struct Seed {
  Tensor pattern;  // [d]
  std::uint64_t seed_id = 0;
  int owner = 0;
  int security_n = 0;
  int side = 0;
  std::uint64_t rng_seed = 0;
  Placement placement = Placement::bottom_right;

  // Indices of the nonzero pattern entries, ascending.
  std::vector<std::size_t> support() const;
};

// Renders a 3x5 digit glyph (digit = user_id mod 10) inside a small box at a
// seeded offset within the chosen corner's quadrant, adds seeded background noise (stronger inside the
// corner's quadrant), then keeps the N largest entries and zeroes the rest.
Seed generate_seed(int user_id, int security_n, int side, std::uint64_t rng_seed,
                   Placement placement = Placement::bottom_right);

// Re-derivable description of a seed; the pattern itself is never stored.
struct SeedRecord {
  int user_id = 0;
  std::uint64_t seed_id = 0;
  int security_n = 0;
  int side = 0;
  std::uint64_t rng_seed = 0;
  Placement placement = Placement::bottom_right;
};

SeedRecord record_of(const Seed& seed);
std::string seed_record_json(const SeedRecord& record);
SeedRecord parse_seed_record(std::string_view json);
// Regenerates the seed and checks that its id matches the record.
Seed regenerate(const SeedRecord& record);

// Per-element blend weights v in [0, 1]. A length-1 mask broadcasts.
struct SeedMask {
  Tensor v;

  static SeedMask scalar(double v);
  // v on the seed's support, 0 elsewhere: pixels off the seed stay untouched.
  static SeedMask on_support(const Seed& seed, double v);
  static SeedMask full(Tensor v);

  double at(std::size_t i) const { return v.size() == 1 ? v[0] : v[i]; }
  void validate(std::size_t d) const;
};

struct SeededSample {
  std::size_t original_index = 0;
  Tensor pixels;  // [d]
  std::uint64_t seed_id = 0;
};

// x_s = (1 - v) * x + v * s, element-wise.
Tensor blend(std::span<const double> x, std::span<const double> pattern,
             const SeedMask& mask);

SeededSample embed_seed(std::span<const double> x, const Seed& seed,
                        const SeedMask& mask, std::size_t original_index = 0);

enum class SeedingMode { per_user, per_sample };

struct SeedingResult {
  std::vector<SeededSample> samples;  // ascending by original_index
  std::vector<Seed> seeds;            // one per sample in per_sample mode
  std::vector<std::size_t> indices() const;
};

// Number of samples seeded for a partition of size n at rate ssr:
// ceil(ssr * n), robust to rounding noise in the product.
std::size_t seeded_count(double ssr, std::size_t n);

// Picks ceil(ssr * |part|) of the user's samples at random and embeds the
// seed in each. Labels are never touched. In per_sample mode each selected
// sample receives its own seed derived from (user, rng_seed, index) and
// `seed` only supplies N, side and placement.
SeedingResult seed_dataset(const UserPartition& part, const Dataset& ds,
                           const Seed& seed, double ser, double ssr,
                           std::uint64_t rng_seed,
                           SeedingMode mode = SeedingMode::per_user);

// Copy of ds with each seeded sample's row replaced.
Dataset apply_seeding(const Dataset& ds, std::span<const SeededSample> samples);

}  // namespace sms

#endif  // SMS_SEEDING_HPP_
