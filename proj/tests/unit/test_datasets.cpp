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

#include <gtest/gtest.h>

#include <optional>
#include <set>

#include "sms/datasets.hpp"
#include "sms/error.hpp"
#include "sms/rng.hpp"

namespace sms {
namespace {

std::string be32(std::uint32_t v) {
  return {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
          static_cast<char>(v)};
}

struct IdxPair {
  std::string images;
  std::string labels;
};

IdxPair make_idx(std::uint32_t n, std::uint32_t side, Rng& rng) {
  IdxPair p;
  p.images = be32(0x803) + be32(n) + be32(side) + be32(side);
  p.labels = be32(0x801) + be32(n);
  for (std::uint32_t k = 0; k < n * side * side; ++k) {
    p.images.push_back(static_cast<char>(rng.below(256)));
  }
  for (std::uint32_t i = 0; i < n; ++i) p.labels.push_back(static_cast<char>(rng.below(10)));
  return p;
}

// Straightforward reference reader; nullopt on any malformed input.
std::optional<std::pair<std::vector<double>, std::vector<int>>> reference_decode(
    const std::string& img, const std::string& lab) {
  auto rd = [](const std::string& s, std::size_t at) -> std::optional<std::uint32_t> {
    if (at + 4 > s.size()) return std::nullopt;
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v = (v << 8) | static_cast<unsigned char>(s[at + k]);
    return v;
  };
  const auto m1 = rd(img, 0), n = rd(img, 4), r = rd(img, 8), c = rd(img, 12);
  const auto m2 = rd(lab, 0), n2 = rd(lab, 4);
  if (!m1 || !n || !r || !c || !m2 || !n2) return std::nullopt;
  if (*m1 != 0x803 || *m2 != 0x801 || *n != *n2 || *r != *c || *r == 0) return std::nullopt;
  const std::size_t d = static_cast<std::size_t>(*r) * *c;
  if (img.size() < 16 + *n * d || lab.size() < 8 + *n) return std::nullopt;
  std::vector<double> px(*n * d);
  for (std::size_t k = 0; k < px.size(); ++k) {
    px[k] = static_cast<unsigned char>(img[16 + k]) / 255.0;
  }
  std::vector<int> y(*n);
  for (std::size_t i = 0; i < *n; ++i) {
    y[i] = static_cast<unsigned char>(lab[8 + i]);
    if (y[i] > 9) return std::nullopt;
  }
  return std::make_pair(px, y);
}

TEST(Idx, DecodesHandBuiltFile) {
  const std::string img = be32(0x803) + be32(1) + be32(2) + be32(2) + std::string("\x00\xff\x80\x01", 4);
  const std::string lab = be32(0x801) + be32(1) + std::string("\x07", 1);
  const Dataset ds = decode_idx(img, lab);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.side, 2);
  EXPECT_EQ(ds.labels[0], 7);
  EXPECT_DOUBLE_EQ(ds.images[1], 1.0);
  EXPECT_DOUBLE_EQ(ds.images[2], 128.0 / 255.0);
}

TEST(Idx, BadMagicCarriesOffsetZero) {
  Rng rng(1);
  IdxPair p = make_idx(2, 4, rng);
  p.images[3] = 0x01;
  try {
    decode_idx(p.images, p.labels);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.position(), 0u);
  }
}

TEST(Idx, LimitKeepsPrefix) {
  Rng rng(2);
  const IdxPair p = make_idx(5, 3, rng);
  const Dataset all = decode_idx(p.images, p.labels);
  const Dataset few = decode_idx(p.images, p.labels, 2);
  ASSERT_EQ(few.size(), 2u);
  for (std::size_t k = 0; k < few.images.size(); ++k) EXPECT_EQ(few.images[k], all.images[k]);
}

TEST(Idx, FuzzAgainstReferenceDecoder) {
  Rng rng(3);
  for (int trial = 0; trial < 400; ++trial) {
    IdxPair p = make_idx(static_cast<std::uint32_t>(1 + rng.below(4)),
                         static_cast<std::uint32_t>(1 + rng.below(4)), rng);
    // Corrupt some files: flip a byte, truncate, or append.
    const auto mode = rng.below(4);
    std::string& target = rng.below(2) ? p.images : p.labels;
    if (mode == 1 && !target.empty()) {
      target[rng.below(target.size())] = static_cast<char>(rng.below(256));
    } else if (mode == 2) {
      target.resize(rng.below(target.size() + 1));
    } else if (mode == 3) {
      target.push_back('\x05');
    }
    const auto ref = reference_decode(p.images, p.labels);
    if (!ref) {
      EXPECT_THROW(decode_idx(p.images, p.labels), FormatError) << "trial " << trial;
      continue;
    }
    const Dataset ds = decode_idx(p.images, p.labels);
    ASSERT_EQ(ds.labels, ref->second) << "trial " << trial;
    ASSERT_EQ(ds.images.storage(), ref->first) << "trial " << trial;
  }
}

TEST(Synth, DeterministicAndInRange) {
  const Dataset a = synth_digits(5, 12, 10, 9);
  const Dataset b = synth_digits(5, 12, 10, 9);
  const Dataset c = synth_digits(5, 12, 10, 10);
  EXPECT_EQ(a.images, b.images);
  EXPECT_NE(a.images, c.images);
  EXPECT_NO_THROW(a.validate());
  ASSERT_EQ(a.size(), 50u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.labels[i], static_cast<int>(i % 10));
}

TEST(Synth, TinySideRejected) { EXPECT_THROW(synth_digits(1, 4, 10, 1), ParameterError); }

TEST(Partition, DisjointCoverWithBalancedSizes) {
  const Dataset ds = synth_digits(7, 8, 10, 1);  // 70 rows
  for (int users : {1, 2, 3, 9, 70}) {
    const auto parts = partition_users(ds, users, 4);
    ASSERT_EQ(parts.size(), static_cast<std::size_t>(users));
    std::set<std::size_t> seen;
    for (std::size_t u = 0; u < parts.size(); ++u) {
      EXPECT_EQ(parts[u].user_id, static_cast<int>(u));
      EXPECT_TRUE(std::is_sorted(parts[u].indices.begin(), parts[u].indices.end()));
      const std::size_t expect = 70 / users + (u < 70 % static_cast<std::size_t>(users) ? 1 : 0);
      EXPECT_EQ(parts[u].indices.size(), expect);
      for (std::size_t i : parts[u].indices) EXPECT_TRUE(seen.insert(i).second);
    }
    EXPECT_EQ(seen.size(), 70u);
  }
}

TEST(Partition, MoreUsersThanRowsRejected) {
  const Dataset ds = synth_digits(1, 8, 10, 1);
  EXPECT_THROW(partition_users(ds, 11, 1), ParameterError);
  EXPECT_THROW(partition_users(ds, 0, 1), ParameterError);
}

TEST(Split, DisjointAndSized) {
  const Dataset ds = synth_digits(10, 8, 10, 2);
  const auto [train, test] = split(ds, 0.8, 3);
  EXPECT_EQ(train.size(), 80u);
  EXPECT_EQ(test.size(), 20u);
  const auto [t2, s2] = split(ds, 0.8, 3);
  EXPECT_EQ(train.images, t2.images);
}

TEST(Dataset, SubsetWithoutAndConcat) {
  const Dataset ds = synth_digits(2, 8, 10, 5);
  const std::vector<std::size_t> pick = {3, 1};
  const Dataset s = ds.subset(pick);
  EXPECT_EQ(s.labels, (std::vector<int>{3, 1}));
  const Dataset w = ds.without(pick);
  EXPECT_EQ(w.size(), ds.size() - 2);
  EXPECT_EQ(w.labels[1], 2);
  const Dataset c = concat(w, s);
  EXPECT_EQ(c.size(), ds.size());
}

TEST(Dataset, ValidateCatchesBadPixelsAndLabels) {
  Dataset ds = synth_digits(1, 8, 10, 5);
  ds.images[0] = 1.5;
  EXPECT_THROW(ds.validate(), InputError);
  ds = synth_digits(1, 8, 10, 5);
  ds.labels[0] = 10;
  EXPECT_THROW(ds.validate(), InputError);
}

TEST(Cache, RoundTripAndCorruption) {
  const Dataset ds = synth_digits(3, 8, 10, 6);
  const std::string bytes = encode_dataset(ds);
  EXPECT_EQ(bytes.substr(0, 4), "SMSD");
  const Dataset back = decode_dataset(bytes);
  EXPECT_EQ(back.images, ds.images);
  EXPECT_EQ(back.labels, ds.labels);
  EXPECT_EQ(back.side, ds.side);
  EXPECT_THROW(decode_dataset(bytes.substr(0, bytes.size() - 1)), FormatError);
  std::string bad = bytes;
  bad[0] = 'Z';
  EXPECT_THROW(decode_dataset(bad), FormatError);
}

TEST(Erase, ValidateRequiresOwnership) {
  UserPartition part{0, {1, 4, 6}};
  EXPECT_NO_THROW(validate_erase({0, {1, 6}, EraseGranularity::samples}, part));
  EXPECT_THROW(validate_erase({0, {2}, EraseGranularity::samples}, part), InputError);
  EXPECT_THROW(validate_erase({1, {1}, EraseGranularity::samples}, part), InputError);
  EXPECT_EQ(parse_granularity(to_string(EraseGranularity::whole_user)),
            EraseGranularity::whole_user);
  EXPECT_THROW(parse_granularity("rows"), ParameterError);
}

}  // namespace
}  // namespace sms
