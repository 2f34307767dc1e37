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

#include "sms/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <bit>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "sms/error.hpp"

namespace sms {
namespace {

constexpr std::string_view kCheckpointMagic = "SMSM";

}  // namespace

void ByteWriter::u16(std::uint16_t v) {
  u8(static_cast<std::uint8_t>(v));
  u8(static_cast<std::uint8_t>(v >> 8));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) u8(static_cast<std::uint8_t>(v >> s));
}

void ByteWriter::u32_be(std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) u8(static_cast<std::uint8_t>(v >> s));
}

void ByteWriter::f64(double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int s = 0; s < 64; s += 8) u8(static_cast<std::uint8_t>(bits >> s));
}

void ByteWriter::f64s(std::span<const double> vs) {
  buf_.reserve(buf_.size() + vs.size() * 8);
  for (double v : vs) f64(v);
}

void ByteReader::fail(const std::string& what) const {
  throw FormatError(context_ + ": " + what + " at byte offset " +
                        std::to_string(pos_),
                    pos_);
}

void ByteReader::need(std::size_t n) {
  if (remaining() < n) {
    fail("truncated: need " + std::to_string(n) + " bytes, " +
         std::to_string(remaining()) + " left");
  }
}

std::uint8_t ByteReader::u8() {
  need(1);
  return static_cast<std::uint8_t>(bytes_[pos_++]);
}

std::uint16_t ByteReader::u16() {
  need(2);
  std::uint16_t v = 0;
  for (int s = 0; s < 16; s += 8) {
    v |= static_cast<std::uint16_t>(static_cast<std::uint8_t>(bytes_[pos_++]) << s);
  }
  return v;
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int s = 0; s < 32; s += 8) {
    v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_++])) << s;
  }
  return v;
}

std::uint32_t ByteReader::u32_be() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v = (v << 8) | static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  return v;
}

double ByteReader::f64() {
  need(8);
  std::uint64_t bits = 0;
  for (int s = 0; s < 64; s += 8) {
    bits |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(bytes_[pos_++])) << s;
  }
  return std::bit_cast<double>(bits);
}

std::string_view ByteReader::raw(std::size_t n) {
  need(n);
  std::string_view out = bytes_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(),
                 nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(digest[i]);
  return os.str();
}

std::string sha256_file(const std::filesystem::path& path) {
  return sha256_hex(read_file(path));
}

std::string encode_mlp(const Mlp& mlp) {
  ByteWriter w;
  w.raw(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(mlp.layers().size()));
  for (const DenseLayer& layer : mlp.layers()) {
    w.u32(static_cast<std::uint32_t>(layer.in_dim()));
    w.u32(static_cast<std::uint32_t>(layer.out_dim()));
    w.u8(static_cast<std::uint8_t>(layer.activation));
    w.f64s(layer.weights.values());
    w.f64s(layer.bias.values());
  }
  return w.take();
}

Mlp decode_mlp(std::string_view bytes) {
  ByteReader r(bytes, "checkpoint");
  if (r.raw(4) != kCheckpointMagic) {
    throw FormatError("checkpoint: bad magic (expected SMSM) at byte offset 0", 0);
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    r.fail("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  std::vector<DenseLayer> layers;
  for (std::uint32_t l = 0; l < count; ++l) {
    const std::uint32_t in = r.u32();
    const std::uint32_t out = r.u32();
    const std::uint8_t act = r.u8();
    if (act > static_cast<std::uint8_t>(Activation::identity)) {
      r.fail("unknown activation code " + std::to_string(act));
    }
    if (static_cast<std::uint64_t>(in) * out * 8 > r.remaining()) {
      r.fail("layer " + std::to_string(l) + " larger than the file");
    }
    DenseLayer layer;
    layer.activation = static_cast<Activation>(act);
    layer.weights = Tensor::matrix(out, in);
    for (double& v : layer.weights.values()) v = r.f64();
    layer.bias = Tensor({out}, 0.0);
    for (double& v : layer.bias.values()) v = r.f64();
    layers.push_back(std::move(layer));
  }
  if (r.remaining() != 0) r.fail("trailing bytes after last layer");
  return Mlp(std::move(layers));
}

void save_mlp(const Mlp& mlp, const std::filesystem::path& path) {
  write_file(path, encode_mlp(mlp));
}

Mlp load_mlp(const std::filesystem::path& path) {
  return decode_mlp(read_file(path));
}

}  // namespace sms
