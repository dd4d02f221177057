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

#ifndef SVKIT_BINARY_IO_H_
#define SVKIT_BINARY_IO_H_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "svkit/common.h"

namespace svkit {

// Little-endian primitive writer used by every binary artifact format.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream &os) : os_(os) {}

  void magic(std::string_view tag);
  void u8(std::uint8_t v);
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void i32(std::int32_t v);
  void f64(double v);
  void str(std::string_view s);  // u32 length + bytes
  // Row-major dump of a matrix.
  void matrix(const Eigen::Ref<const Matrix> &m);
  void vector(const Eigen::Ref<const Vector> &v);

 private:
  std::ostream &os_;
};

class BinaryReader {
 public:
  BinaryReader(std::istream &is, std::string source)
      : is_(is), source_(std::move(source)) {}

  // Reads the tag and throws a format error if it does not match.
  void expect_magic(std::string_view tag);
  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::int32_t i32();
  double f64();
  std::string str();
  Matrix matrix(Eigen::Index rows, Eigen::Index cols);
  Vector vector(Eigen::Index n);
  // Throws unless the stream is exhausted.
  void expect_eof();
  const std::string &source() const { return source_; }

 private:
  void read_raw(char *dst, std::size_t n);

  std::istream &is_;
  std::string source_;
};

// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const std::filesystem::path &path,
                       const std::function<void(std::ostream &)> &body);

// Opens a file for binary reading or throws an io error.
std::ifstream open_for_read(const std::filesystem::path &path);

}  // namespace svkit

#endif  // SVKIT_BINARY_IO_H_
