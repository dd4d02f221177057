// Copyright 2026 The svkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//       http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "svkit/binary_io.h"

#include <array>
#include <bit>
#include <fstream>

namespace svkit {
namespace {

template <typename T>
void put_le(std::ostream &os, T v) {
  std::array<char, sizeof(T)> buf;
  auto bits = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = bits[sizeof(T) - 1 - i];
  } else {
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = bits[i];
  }
  os.write(buf.data(), buf.size());
}

}  // namespace

void BinaryWriter::magic(std::string_view tag) { os_.write(tag.data(), tag.size()); }
void BinaryWriter::u8(std::uint8_t v) { put_le(os_, v); }
void BinaryWriter::u16(std::uint16_t v) { put_le(os_, v); }
void BinaryWriter::u32(std::uint32_t v) { put_le(os_, v); }
void BinaryWriter::i32(std::int32_t v) { put_le(os_, v); }
void BinaryWriter::f64(double v) { put_le(os_, v); }

void BinaryWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  os_.write(s.data(), s.size());
}

void BinaryWriter::matrix(const Eigen::Ref<const Matrix> &m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
}

void BinaryWriter::vector(const Eigen::Ref<const Vector> &v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) f64(v(i));
}

void BinaryReader::read_raw(char *dst, std::size_t n) {
  is_.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is_.gcount()) != n)
    fail(ErrorCode::kFormat, source_ + ": unexpected end of file");
}

namespace {
template <typename T>
T get_le(const std::array<char, sizeof(T)> &buf) {
  std::array<unsigned char, sizeof(T)> bits;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    std::size_t src = std::endian::native == std::endian::big ? sizeof(T) - 1 - i : i;
    bits[i] = static_cast<unsigned char>(buf[src]);
  }
  return std::bit_cast<T>(bits);
}
}  // namespace

void BinaryReader::expect_magic(std::string_view tag) {
  std::string got(tag.size(), '\0');
  read_raw(got.data(), got.size());
  if (got != tag)
    fail(ErrorCode::kFormat, source_ + ": bad magic, expected '" + std::string(tag) + "'");
}

#define SVKIT_READ_PRIMITIVE(name, type)      \
  type BinaryReader::name() {                 \
    std::array<char, sizeof(type)> buf;       \
    read_raw(buf.data(), buf.size());         \
    return get_le<type>(buf);                 \
  }
SVKIT_READ_PRIMITIVE(u8, std::uint8_t)
SVKIT_READ_PRIMITIVE(u16, std::uint16_t)
SVKIT_READ_PRIMITIVE(u32, std::uint32_t)
SVKIT_READ_PRIMITIVE(i32, std::int32_t)
SVKIT_READ_PRIMITIVE(f64, double)
#undef SVKIT_READ_PRIMITIVE

std::string BinaryReader::str() {
  const std::uint32_t n = u32();
  if (n > (1u << 20)) fail(ErrorCode::kFormat, source_ + ": string length out of range");
  std::string s(n, '\0');
  read_raw(s.data(), n);
  return s;
}

Matrix BinaryReader::matrix(Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = f64();
  return m;
}

Vector BinaryReader::vector(Eigen::Index n) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = f64();
  return v;
}

void BinaryReader::expect_eof() {
  if (is_.peek() != std::char_traits<char>::eof())
    fail(ErrorCode::kFormat, source_ + ": trailing bytes after payload");
}

void write_file_atomic(const std::filesystem::path &path,
                       const std::function<void(std::ostream &)> &body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  try {
    {
      std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
      if (!os) fail(ErrorCode::kIo, "cannot open " + tmp.string() + " for writing");
      body(os);
      os.flush();
      if (!os) fail(ErrorCode::kIo, "write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  } catch (...) {
    std::error_code ignored;
    std::filesystem::remove(tmp, ignored);
    throw;
  }
}

std::ifstream open_for_read(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::kIo, "cannot open " + path.string());
  return is;
}

}  // namespace svkit
