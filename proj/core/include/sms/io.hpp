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

#ifndef SMS_IO_HPP_
#define SMS_IO_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "sms/nn.hpp"

namespace sms {

// Little-endian byte sink.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u32_be(std::uint32_t v);
  void f64(double v);
  void f64s(std::span<const double> vs);
  void raw(std::string_view bytes) { buf_.append(bytes); }

  const std::string& bytes() const { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

// Bounds-checked little-endian byte source. Reads past the end throw
// FormatError carrying the offending offset.
class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes, std::string context = "buffer")
      : bytes_(bytes), context_(std::move(context)) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint32_t u32_be();
  double f64();
  std::string_view raw(std::size_t n);

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  [[noreturn]] void fail(const std::string& what) const;

 private:
  void need(std::size_t n);

  std::string_view bytes_;
  std::size_t pos_ = 0;
  std::string context_;
};

std::string read_file(const std::filesystem::path& path);
// Writes via a temporary sibling and rename, so readers never observe a
// half-written file.
void write_file(const std::filesystem::path& path, std::string_view bytes);

// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Model checkpoint: "SMSM", u32 version, u32 layer count, then per layer
// u32 in, u32 out, u8 activation, row-major f64 weights, f64 bias; all
// little-endian.
std::string encode_mlp(const Mlp& mlp);
Mlp decode_mlp(std::string_view bytes);
void save_mlp(const Mlp& mlp, const std::filesystem::path& path);
Mlp load_mlp(const std::filesystem::path& path);

}  // namespace sms

#endif  // SMS_IO_HPP_
