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

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "svkit/binary_io.h"
#include "svkit/frontend.h"

namespace svkit {

AudioSignal read_wav(const std::filesystem::path &path) {
  auto is = open_for_read(path);
  BinaryReader r(is, path.string());
  r.expect_magic("RIFF");
  r.u32();
  r.expect_magic("WAVE");
  int channels = 0, bits = 0, format = 0;
  AudioSignal out;
  bool have_fmt = false;
  while (true) {
    std::string id(4, '\0');
    is.read(id.data(), 4);
    if (is.gcount() != 4) fail(ErrorCode::kFormat, path.string() + ": no data chunk");
    const std::uint32_t size = r.u32();
    if (id == "fmt ") {
      format = r.u16();
      channels = r.u16();
      out.sample_rate = static_cast<int>(r.u32());
      r.u32();
      r.u16();
      bits = r.u16();
      for (std::uint32_t i = 16; i < size; ++i) r.u8();
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) fail(ErrorCode::kFormat, path.string() + ": data before fmt chunk");
      if (format != 1 || channels != 1 || bits != 16)
        fail(ErrorCode::kFormat, path.string() + ": only 16-bit PCM mono is supported");
      if (out.sample_rate <= 0) fail(ErrorCode::kFormat, path.string() + ": bad sample rate");
      out.samples.resize(size / 2);
      for (auto &s : out.samples) s = static_cast<std::int16_t>(r.u16()) / 32768.0;
      return out;
    } else {
      for (std::uint32_t i = 0; i < size + (size & 1u); ++i) r.u8();
    }
  }
}

void write_wav(const std::filesystem::path &path, const AudioSignal &signal) {
  write_file_atomic(path, [&](std::ostream &os) {
    BinaryWriter w(os);
    const auto data_bytes = static_cast<std::uint32_t>(signal.samples.size() * 2);
    w.magic("RIFF");
    w.u32(36 + data_bytes);
    w.magic("WAVE");
    w.magic("fmt ");
    w.u32(16);
    w.u16(1);
    w.u16(1);
    w.u32(static_cast<std::uint32_t>(signal.sample_rate));
    w.u32(static_cast<std::uint32_t>(signal.sample_rate * 2));
    w.u16(2);
    w.u16(16);
    w.magic("data");
    w.u32(data_bytes);
    for (double s : signal.samples) {
      const double scaled = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
      w.u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
    }
  });
}

}  // namespace svkit
