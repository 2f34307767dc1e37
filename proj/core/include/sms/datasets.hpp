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

#ifndef SMS_DATASETS_HPP_
#define SMS_DATASETS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sms/tensor.hpp"

namespace sms {

// Square grayscale images flattened to rows of `side * side` pixels in [0, 1].
struct Dataset {
  Tensor images;  // [N x d]
  std::vector<int> labels;
  int class_count = 0;
  int side = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(side) * side; }
  bool empty() const { return labels.empty(); }

  Dataset subset(std::span<const std::size_t> indices) const;
  // Rows in `indices` removed, order of the rest preserved.
  Dataset without(std::span<const std::size_t> indices) const;
  // Throws InputError if counts, pixel range or label range are violated.
  void validate() const;
};

// Concatenates b after a. Both must agree on side and class count.
Dataset concat(const Dataset& a, const Dataset& b);

struct UserPartition {
  int user_id = 0;
  std::vector<std::size_t> indices;  // ascending, into the parent dataset
};

enum class EraseGranularity { samples, whole_user };

std::string_view to_string(EraseGranularity g);
EraseGranularity parse_granularity(std::string_view s);

struct EraseRequest {
  int user_id = 0;
  std::vector<std::size_t> indices;
  EraseGranularity granularity = EraseGranularity::samples;
};

// Throws InputError unless every erased index belongs to the partition.
void validate_erase(const EraseRequest& request, const UserPartition& partition);

// Reads an IDX image/label file pair (magics 0x00000803 / 0x00000801,
// big-endian headers). Pixels are scaled by 1/255. `limit` > 0 keeps only the
// first `limit` samples.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path,
                 std::size_t limit = 0);

// Same, from in-memory file contents.
Dataset decode_idx(std::string_view image_bytes, std::string_view label_bytes,
                   std::size_t limit = 0);

// Renders `class_count` template digits at side x side, each sample with a
// +-1 pixel translation and additive uniform noise of amplitude 0.15,
// clamped to [0, 1]. Classes are interleaved: sample i has label i % C.
Dataset synth_digits(int n_per_class, int side, int class_count,
                     std::uint64_t rng_seed);

// Random permutation split into `n_users` disjoint near-equal parts; the
// first N % n_users users receive one extra sample.
std::vector<UserPartition> partition_users(const Dataset& ds, int n_users,
                                           std::uint64_t rng_seed);

// Disjoint reproducible split; the train part gets round(train_frac * N) rows.
std::pair<Dataset, Dataset> split(const Dataset& ds, double train_frac,
                                  std::uint64_t rng_seed);

// Cache format: "SMSD", u32 version, u32 N, u32 side, u32 C, u16 labels,
// f64 pixels; little-endian.
std::string encode_dataset(const Dataset& ds);
Dataset decode_dataset(std::string_view bytes);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace sms

#endif  // SMS_DATASETS_HPP_
