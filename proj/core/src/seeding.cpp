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

#include "sms/seeding.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>

#include "glyphs.hpp"
#include "sms/error.hpp"
#include "sms/rng.hpp"

namespace sms {
namespace {

struct Corner {
  int top;
  int left;
};

// Top-left of a w x h box at a random offset inside the chosen quadrant. The
// box may straddle the quadrant edge when the quadrant is too small for it.
Corner corner_box(Placement p, int side, int w, int h, Rng& rng) {
  const int half = side / 2;
  const bool bottom = p == Placement::bottom_right || p == Placement::bottom_left;
  const bool right = p == Placement::bottom_right || p == Placement::top_right;
  const int q_top = bottom ? half : 0;
  const int q_left = right ? half : 0;
  const int q_h = bottom ? side - half : half;
  const int q_w = right ? side - half : half;
  const int slack_r = std::max(0, q_h - h);
  const int slack_c = std::max(0, q_w - w);
  int top = q_top + static_cast<int>(rng.below(static_cast<std::uint64_t>(slack_r) + 1));
  int left = q_left + static_cast<int>(rng.below(static_cast<std::uint64_t>(slack_c) + 1));
  top = std::clamp(top, 0, side - h);
  left = std::clamp(left, 0, side - w);
  return {top, left};
}

bool in_quadrant(Placement p, int side, int row, int col) {
  const int half = side / 2;
  const bool bottom = row >= half;
  const bool right = col >= half;
  switch (p) {
    case Placement::bottom_right:
      return bottom && right;
    case Placement::bottom_left:
      return bottom && !right;
    case Placement::top_right:
      return !bottom && right;
    case Placement::top_left:
      return !bottom && !right;
  }
  return false;
}

}  // namespace

std::string_view to_string(Placement p) {
  switch (p) {
    case Placement::bottom_right:
      return "bottom_right";
    case Placement::bottom_left:
      return "bottom_left";
    case Placement::top_right:
      return "top_right";
    case Placement::top_left:
      return "top_left";
  }
  return "bottom_right";
}

Placement parse_placement(std::string_view s) {
  for (Placement p : {Placement::bottom_right, Placement::bottom_left,
                      Placement::top_right, Placement::top_left}) {
    if (to_string(p) == s) return p;
  }
  throw ParameterError("unknown seed placement '" + std::string(s) + "'");
}

std::vector<std::size_t> Seed::support() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < pattern.size(); ++k) {
    if (pattern[k] != 0.0) out.push_back(k);
  }
  return out;
}

Seed generate_seed(int user_id, int security_n, int side, std::uint64_t rng_seed,
                   Placement placement) {
  if (side < 4) throw ParameterError("generate_seed: side must be >= 4");
  const std::size_t d = static_cast<std::size_t>(side) * side;
  if (security_n < 1 || static_cast<std::size_t>(security_n) > d) {
    throw ParameterError("generate_seed: N = " + std::to_string(security_n) +
                         " must lie in [1, " + std::to_string(d) + "]");
  }
  const auto uid = static_cast<std::uint64_t>(static_cast<std::int64_t>(user_id));
  Rng rng(derive_seed(rng_seed, "seed-pattern", uid));

  std::vector<double> raw(d);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const bool near = in_quadrant(placement, side, r, c);
      raw[static_cast<std::size_t>(r * side + c)] =
          near ? rng.uniform(0.10, 0.40) : rng.uniform(0.01, 0.10);
    }
  }
  std::vector<double> ink(d, 0.0);
  const int box_w = std::max(3, side / 4);
  const int box_h = std::max(5, side * 5 / 12);
  const Corner at = corner_box(placement, side, box_w, box_h, rng);
  const auto digit = static_cast<std::size_t>(((user_id % 10) + 10) % 10);
  glyphs::stamp(glyphs::kDigit3x5[digit], box_w, box_h, at.top, at.left, side, ink);
  for (std::size_t k = 0; k < d; ++k) {
    if (ink[k] > 0.0) raw[k] = rng.uniform(0.80, 1.00);
  }

  // Keep the N largest entries; ties go to the lower index.
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return raw[a] > raw[b]; });
  Seed seed;
  seed.pattern = Tensor({d}, 0.0);
  for (int k = 0; k < security_n; ++k) {
    const std::size_t i = order[static_cast<std::size_t>(k)];
    seed.pattern[i] = raw[i];
  }
  seed.seed_id = derive_seed(rng_seed, "seed-id", uid) ^
                 (static_cast<std::uint64_t>(security_n) << 1);
  seed.owner = user_id;
  seed.security_n = security_n;
  seed.side = side;
  seed.rng_seed = rng_seed;
  seed.placement = placement;
  return seed;
}

SeedRecord record_of(const Seed& seed) {
  return {seed.owner, seed.seed_id, seed.security_n, seed.side, seed.rng_seed,
          seed.placement};
}

std::string seed_record_json(const SeedRecord& record) {
  nlohmann::ordered_json j;
  j["user_id"] = record.user_id;
  j["seed_id"] = record.seed_id;
  j["N"] = record.security_n;
  j["side"] = record.side;
  j["rng_seed"] = record.rng_seed;
  j["placement"] = std::string(to_string(record.placement));
  return j.dump(2);
}

SeedRecord parse_seed_record(std::string_view json) {
  try {
    const auto j = nlohmann::json::parse(json);
    SeedRecord r;
    r.user_id = j.at("user_id").get<int>();
    r.seed_id = j.at("seed_id").get<std::uint64_t>();
    r.security_n = j.at("N").get<int>();
    r.side = j.at("side").get<int>();
    r.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    r.placement = parse_placement(j.at("placement").get<std::string>());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("seed record: ") + e.what(), 0);
  }
}

Seed regenerate(const SeedRecord& record) {
  Seed s = generate_seed(record.user_id, record.security_n, record.side,
                         record.rng_seed, record.placement);
  if (s.seed_id != record.seed_id) {
    throw IntegrityError("seed record id does not match the regenerated seed");
  }
  return s;
}

SeedMask SeedMask::scalar(double v) {
  SeedMask m{Tensor::vector({v})};
  m.validate(1);
  return m;
}

SeedMask SeedMask::on_support(const Seed& seed, double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw ParameterError("seed embedding rate must lie in [0, 1]");
  SeedMask m{Tensor({seed.pattern.size()}, 0.0)};
  for (std::size_t k = 0; k < seed.pattern.size(); ++k) {
    if (seed.pattern[k] != 0.0) m.v[k] = v;
  }
  return m;
}

SeedMask SeedMask::full(Tensor v) {
  SeedMask m{std::move(v)};
  m.validate(m.v.size());
  return m;
}

void SeedMask::validate(std::size_t d) const {
  if (v.size() != 1 && v.size() != d) {
    throw DimensionError("seed mask has " + std::to_string(v.size()) +
                         " entries for a " + std::to_string(d) + "-pixel image");
  }
  for (double e : v.values()) {
    if (!(e >= 0.0 && e <= 1.0)) throw ParameterError("seed mask entries must lie in [0, 1]");
  }
}

Tensor blend(std::span<const double> x, std::span<const double> pattern,
             const SeedMask& mask) {
  if (x.size() != pattern.size()) {
    throw DimensionError("embed: sample has " + std::to_string(x.size()) +
                         " pixels, seed has " + std::to_string(pattern.size()));
  }
  mask.validate(x.size());
  Tensor out({x.size()}, 0.0);
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double v = mask.at(k);
    out[k] = std::clamp((1.0 - v) * x[k] + v * pattern[k], 0.0, 1.0);
  }
  return out;
}

SeededSample embed_seed(std::span<const double> x, const Seed& seed,
                        const SeedMask& mask, std::size_t original_index) {
  return {original_index, blend(x, seed.pattern.values(), mask), seed.seed_id};
}

std::vector<std::size_t> SeedingResult::indices() const {
  std::vector<std::size_t> out;
  out.reserve(samples.size());
  for (const SeededSample& s : samples) out.push_back(s.original_index);
  return out;
}

std::size_t seeded_count(double ssr, std::size_t n) {
  if (!(ssr >= 0.0 && ssr <= 1.0)) throw ParameterError("SSR must lie in [0, 1]");
  const double exact = ssr * static_cast<double>(n);
  return std::min(n, static_cast<std::size_t>(std::ceil(exact - 1e-9)));
}

SeedingResult seed_dataset(const UserPartition& part, const Dataset& ds,
                           const Seed& seed, double ser, double ssr,
                           std::uint64_t rng_seed, SeedingMode mode) {
  const std::size_t count = seeded_count(ssr, part.indices.size());
  Rng rng(derive_seed(rng_seed, "seed-select", static_cast<std::uint64_t>(part.user_id)));
  std::vector<std::size_t> chosen = part.indices;
  rng.shuffle(chosen);
  chosen.resize(count);
  std::sort(chosen.begin(), chosen.end());

  SeedingResult result;
  const SeedMask shared_mask = SeedMask::on_support(seed, ser);
  for (std::size_t i : chosen) {
    if (i >= ds.size()) throw InputError("partition index out of range");
    if (mode == SeedingMode::per_user) {
      result.samples.push_back(embed_seed(ds.images.row(i), seed, shared_mask, i));
    } else {
      const Seed own = generate_seed(part.user_id, seed.security_n, seed.side,
                                     derive_seed(rng_seed, "per-sample-seed", i),
                                     seed.placement);
      result.samples.push_back(
          embed_seed(ds.images.row(i), own, SeedMask::on_support(own, ser), i));
      result.seeds.push_back(own);
    }
  }
  return result;
}

Dataset apply_seeding(const Dataset& ds, std::span<const SeededSample> samples) {
  Dataset out = ds;
  for (const SeededSample& s : samples) {
    if (s.original_index >= out.size() || s.pixels.size() != out.dim()) {
      throw DimensionError("seeded sample does not fit the dataset");
    }
    std::copy(s.pixels.values().begin(), s.pixels.values().end(),
              out.images.row(s.original_index).begin());
  }
  return out;
}

}  // namespace sms
