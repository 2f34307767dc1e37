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

#include "sms/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "glyphs.hpp"
#include "sms/error.hpp"
#include "sms/io.hpp"
#include "sms/rng.hpp"

namespace sms {
namespace {

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
constexpr std::string_view kCacheMagic = "SMSD";
constexpr std::uint32_t kCacheVersion = 1;
constexpr int kIdxClasses = 10;
constexpr double kSynthNoise = 0.15;

}  // namespace

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.images = gather_rows(images, indices);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(labels[i]);
  out.class_count = class_count;
  out.side = side;
  if (indices.empty()) out.images = Tensor::matrix(0, dim());
  return out;
}

Dataset Dataset::without(std::span<const std::size_t> indices) const {
  std::vector<bool> drop(size(), false);
  for (std::size_t i : indices) {
    if (i >= size()) {
      throw InputError("erase index " + std::to_string(i) + " out of range " +
                       std::to_string(size()));
    }
    drop[i] = true;
  }
  std::vector<std::size_t> keep;
  keep.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) {
    if (!drop[i]) keep.push_back(i);
  }
  return subset(keep);
}

void Dataset::validate() const {
  if (side <= 0) throw InputError("dataset side must be positive");
  if (images.rows() != labels.size() || (images.size() && images.cols() != dim())) {
    throw InputError("dataset images " + images.shape_string() + " do not match " +
                     std::to_string(labels.size()) + " labels of " +
                     std::to_string(dim()) + " pixels");
  }
  for (std::size_t k = 0; k < images.size(); ++k) {
    const double v = images[k];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw InputError("pixel " + std::to_string(k) + " = " + std::to_string(v) +
                       " outside [0, 1]");
    }
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= class_count) {
      throw InputError("label " + std::to_string(labels[i]) + " at row " +
                       std::to_string(i) + " outside [0, " +
                       std::to_string(class_count) + ")");
    }
  }
}

Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.side != b.side || a.class_count != b.class_count) {
    throw DimensionError("concat: datasets disagree on side or class count");
  }
  Dataset out;
  out.side = a.side;
  out.class_count = a.class_count;
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  std::vector<double> pixels = a.images.storage();
  pixels.insert(pixels.end(), b.images.storage().begin(), b.images.storage().end());
  out.images = Tensor({out.labels.size(), out.dim()}, std::move(pixels));
  return out;
}

std::string_view to_string(EraseGranularity g) {
  return g == EraseGranularity::samples ? "samples" : "whole_user";
}

EraseGranularity parse_granularity(std::string_view s) {
  if (s == "samples") return EraseGranularity::samples;
  if (s == "whole_user") return EraseGranularity::whole_user;
  throw ParameterError("unknown erase granularity '" + std::string(s) + "'");
}

void validate_erase(const EraseRequest& request, const UserPartition& partition) {
  if (request.user_id != partition.user_id) {
    throw InputError("erase request for user " + std::to_string(request.user_id) +
                     " checked against partition of user " +
                     std::to_string(partition.user_id));
  }
  const std::unordered_set<std::size_t> owned(partition.indices.begin(),
                                              partition.indices.end());
  for (std::size_t i : request.indices) {
    if (!owned.contains(i)) {
      throw InputError("erased index " + std::to_string(i) +
                       " is not in user " + std::to_string(request.user_id) +
                       "'s partition");
    }
  }
}

Dataset decode_idx(std::string_view image_bytes, std::string_view label_bytes,
                   std::size_t limit) {
  ByteReader img(image_bytes, "idx images");
  ByteReader lab(label_bytes, "idx labels");

  const std::uint32_t img_magic = img.u32_be();
  if (img_magic != kIdxImageMagic) {
    throw FormatError("idx images: bad magic 0x" + [&] {
      char buf[16];
      std::snprintf(buf, sizeof buf, "%08x", img_magic);
      return std::string(buf);
    }() + " at byte offset 0 (expected 0x00000803)", 0);
  }
  const std::uint32_t lab_magic = lab.u32_be();
  if (lab_magic != kIdxLabelMagic) {
    throw FormatError("idx labels: bad magic at byte offset 0 (expected 0x00000801)", 0);
  }
  const std::uint32_t count = img.u32_be();
  const std::uint32_t rows = img.u32_be();
  const std::uint32_t cols = img.u32_be();
  const std::uint32_t label_count = lab.u32_be();
  if (count != label_count) {
    throw FormatError("idx: image count " + std::to_string(count) +
                          " != label count " + std::to_string(label_count) +
                          " at byte offset 4",
                      4);
  }
  if (rows != cols || rows == 0) {
    throw FormatError("idx images: only non-empty square images supported, got " +
                          std::to_string(rows) + "x" + std::to_string(cols) +
                          " at byte offset 8",
                      8);
  }
  const std::size_t d = static_cast<std::size_t>(rows) * cols;
  if (img.remaining() < static_cast<std::size_t>(count) * d) {
    img.fail("truncated pixel block: need " + std::to_string(count * d) + " bytes");
  }
  if (lab.remaining() < count) lab.fail("truncated label block");

  const std::size_t n = limit > 0 ? std::min<std::size_t>(limit, count) : count;
  Dataset ds;
  ds.side = static_cast<int>(rows);
  ds.class_count = kIdxClasses;
  ds.images = Tensor::matrix(n, d);
  ds.labels.resize(n);
  std::string_view pixels = img.raw(static_cast<std::size_t>(count) * d);
  for (std::size_t k = 0; k < n * d; ++k) {
    ds.images[k] = static_cast<double>(static_cast<std::uint8_t>(pixels[k])) / 255.0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t at = lab.offset();
    const std::uint8_t y = lab.u8();
    if (y >= kIdxClasses) {
      throw FormatError("idx labels: label " + std::to_string(y) +
                            " >= 10 at byte offset " + std::to_string(at),
                        at);
    }
    ds.labels[i] = y;
  }
  return ds;
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path, std::size_t limit) {
  return decode_idx(read_file(images_path), read_file(labels_path), limit);
}

Dataset synth_digits(int n_per_class, int side, int class_count,
                     std::uint64_t rng_seed) {
  if (side < 8) throw ParameterError("synth_digits: side must be >= 8");
  if (class_count < 1 || class_count > 10) {
    throw ParameterError("synth_digits: class count must be in [1, 10]");
  }
  if (n_per_class < 1) throw ParameterError("synth_digits: n_per_class must be >= 1");

  Rng rng(rng_seed);
  const std::size_t d = static_cast<std::size_t>(side) * side;
  const std::size_t n = static_cast<std::size_t>(n_per_class) * class_count;
  const int box_w = std::max(3, side / 2);
  const int box_h = std::max(5, side * 3 / 4);
  const int top0 = (side - box_h) / 2;
  const int left0 = (side - box_w) / 2;

  Dataset ds;
  ds.side = side;
  ds.class_count = class_count;
  ds.images = Tensor::matrix(n, d);
  ds.labels.resize(n);
  std::vector<double> canvas(d);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % static_cast<std::size_t>(class_count));
    const int dy = static_cast<int>(rng.below(3)) - 1;
    const int dx = static_cast<int>(rng.below(3)) - 1;
    std::fill(canvas.begin(), canvas.end(), 0.0);
    glyphs::stamp(glyphs::kDigit5x7[static_cast<std::size_t>(label)], box_w, box_h,
                  top0 + dy, left0 + dx, side, canvas);
    std::span<double> row = ds.images.row(i);
    for (std::size_t k = 0; k < d; ++k) {
      row[k] = std::clamp(canvas[k] + rng.uniform(-kSynthNoise, kSynthNoise), 0.0, 1.0);
    }
    ds.labels[i] = label;
  }
  return ds;
}

std::vector<UserPartition> partition_users(const Dataset& ds, int n_users,
                                           std::uint64_t rng_seed) {
  if (n_users < 1) throw ParameterError("partition_users: need at least one user");
  if (static_cast<std::size_t>(n_users) > ds.size()) {
    throw ParameterError("partition_users: more users than samples");
  }
  Rng rng(rng_seed);
  const std::vector<std::size_t> perm = rng.permutation(ds.size());
  const std::size_t base = ds.size() / static_cast<std::size_t>(n_users);
  const std::size_t extra = ds.size() % static_cast<std::size_t>(n_users);
  std::vector<UserPartition> parts(static_cast<std::size_t>(n_users));
  std::size_t at = 0;
  for (std::size_t u = 0; u < parts.size(); ++u) {
    const std::size_t len = base + (u < extra ? 1 : 0);
    parts[u].user_id = static_cast<int>(u);
    parts[u].indices.assign(perm.begin() + static_cast<std::ptrdiff_t>(at),
                            perm.begin() + static_cast<std::ptrdiff_t>(at + len));
    std::sort(parts[u].indices.begin(), parts[u].indices.end());
    at += len;
  }
  return parts;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_frac,
                                  std::uint64_t rng_seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw ParameterError("split: train fraction must lie in (0, 1)");
  }
  Rng rng(rng_seed);
  std::vector<std::size_t> perm = rng.permutation(ds.size());
  const auto n_train = static_cast<std::size_t>(
      std::llround(train_frac * static_cast<double>(ds.size())));
  std::vector<std::size_t> train_idx(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test_idx(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {ds.subset(train_idx), ds.subset(test_idx)};
}

std::string encode_dataset(const Dataset& ds) {
  ByteWriter w;
  w.raw(kCacheMagic);
  w.u32(kCacheVersion);
  w.u32(static_cast<std::uint32_t>(ds.size()));
  w.u32(static_cast<std::uint32_t>(ds.side));
  w.u32(static_cast<std::uint32_t>(ds.class_count));
  for (int y : ds.labels) w.u16(static_cast<std::uint16_t>(y));
  w.f64s(ds.images.values());
  return w.take();
}

Dataset decode_dataset(std::string_view bytes) {
  ByteReader r(bytes, "dataset cache");
  if (r.raw(4) != kCacheMagic) {
    throw FormatError("dataset cache: bad magic (expected SMSD) at byte offset 0", 0);
  }
  const std::uint32_t version = r.u32();
  if (version != kCacheVersion) r.fail("unsupported version " + std::to_string(version));
  const std::uint32_t n = r.u32();
  const std::uint32_t side = r.u32();
  const std::uint32_t classes = r.u32();
  Dataset ds;
  ds.side = static_cast<int>(side);
  ds.class_count = static_cast<int>(classes);
  ds.labels.resize(n);
  for (int& y : ds.labels) y = r.u16();
  const std::size_t d = ds.dim();
  if (static_cast<std::uint64_t>(n) * d * 8 != r.remaining()) {
    r.fail("pixel block size does not match header");
  }
  ds.images = Tensor::matrix(n, d);
  for (double& v : ds.images.values()) v = r.f64();
  ds.validate();
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  write_file(path, encode_dataset(ds));
}

Dataset load_dataset(const std::filesystem::path& path) {
  return decode_dataset(read_file(path));
}

}  // namespace sms
