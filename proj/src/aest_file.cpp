// Copyright 2026 The aesthetic-vae Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "aest/aest_file.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "aest/errors.hpp"

namespace aest::inline AEST_PREC {

namespace {

constexpr std::uint8_t kMagic[4] = {0x41, 0x45, 0x53, 0x54};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, const std::string& origin) : bytes_(bytes), origin_(origin) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(origin_ + ": " + what + " at byte offset " + std::to_string(pos_));
  }
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail("truncated file (need " + std::to_string(n) + " more bytes)");
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::size_t pos() const { return pos_; }
  void seek(std::size_t p) { pos_ = p; }
  const std::uint8_t* here() const { return bytes_.data() + pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t, FileDType dtype) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.push_back(kAestVersion);
  out.push_back(static_cast<std::uint8_t>(dtype));
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.dims()) put_u32(out, static_cast<std::uint32_t>(d));
  if (dtype == FileDType::f32) {
    for (real v : t.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  } else {
    for (real v : t.values()) {
      require(v >= 0 && v <= 255 && std::floor(v) == v, "u8 tensor payload must hold integers in [0,255]");
      out.push_back(static_cast<std::uint8_t>(v));
    }
  }
  return out;
}

Tensor decode_tensor(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  Reader r(bytes, origin);
  r.need(4);
  if (std::memcmp(r.here(), kMagic, 4) != 0) r.fail("bad magic (expected \"AEST\")");
  r.seek(4);
  const std::size_t version_at = r.pos();
  const std::uint8_t version = r.u8();
  if (version != kAestVersion) {
    r.seek(version_at);
    r.fail("unsupported version " + std::to_string(version));
  }
  const std::size_t dtype_at = r.pos();
  const std::uint8_t dtype = r.u8();
  if (dtype > 1) {
    r.seek(dtype_at);
    r.fail("unknown dtype " + std::to_string(dtype));
  }
  const std::uint32_t ndim = r.u32();
  if (ndim == 0 || ndim > 8) r.fail("invalid ndim " + std::to_string(ndim));
  Shape dims;
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    const std::uint32_t d = r.u32();
    if (d == 0) r.fail("zero dimension");
    dims.push_back(d);
    count *= d;
  }
  const std::size_t width = dtype == 0 ? 4 : 1;
  r.need(count * width);
  std::vector<real> data(count);
  if (dtype == 0) {
    for (auto& v : data) v = static_cast<real>(std::bit_cast<float>(r.u32()));
  } else {
    for (auto& v : data) v = static_cast<real>(r.u8());
  }
  if (r.remaining() != 0) r.fail("trailing bytes after payload");
  return Tensor(std::move(dims), std::move(data));
}

void write_tensor(const std::filesystem::path& path, const Tensor& t, FileDType dtype) {
  const auto bytes = encode_tensor(t, dtype);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("failed writing " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("missing tensor file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_tensor(bytes, path.string());
}

}  // namespace aest::inline AEST_PREC
