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
#include <numeric>

#include "svkit/binary_io.h"
#include "svkit/senone_net.h"

namespace svkit {
namespace {

constexpr std::uint8_t kPosteriorVersion = 1;
constexpr double kRowTolerance = 1e-6;

void write_header(BinaryWriter &w, const PosteriorMatrix &post, std::uint8_t sparse) {
  w.magic("SVKP");
  w.u8(kPosteriorVersion);
  w.u32(static_cast<std::uint32_t>(post.num_frames()));
  w.u32(static_cast<std::uint32_t>(post.num_classes()));
  w.u8(sparse);
}

}  // namespace

void write_posteriors(const std::filesystem::path &path, const PosteriorMatrix &post) {
  write_file_atomic(path, [&](std::ostream &os) {
    BinaryWriter w(os);
    write_header(w, post, 0);
    w.matrix(post.gamma);
  });
}

void write_posteriors_sparse(const std::filesystem::path &path, const PosteriorMatrix &post,
                             int top_k) {
  if (top_k < 1) fail(ErrorCode::kConfiguration, "top_k must be >= 1");
  const auto classes = post.num_classes();
  const auto k = std::min<Eigen::Index>(top_k, classes);
  write_file_atomic(path, [&](std::ostream &os) {
    BinaryWriter w(os);
    write_header(w, post, 1);
    std::vector<Eigen::Index> idx(classes);
    for (Eigen::Index t = 0; t < post.num_frames(); ++t) {
      std::iota(idx.begin(), idx.end(), 0);
      std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](auto a, auto b) {
        const double pa = post.gamma(t, a), pb = post.gamma(t, b);
        return pa != pb ? pa > pb : a < b;
      });
      std::sort(idx.begin(), idx.begin() + k);
      double mass = 0.0;
      for (Eigen::Index i = 0; i < k; ++i) mass += post.gamma(t, idx[i]);
      if (!(mass > 0)) fail(ErrorCode::kFormat, "frame has no posterior mass to keep");
      w.u32(static_cast<std::uint32_t>(k));
      for (Eigen::Index i = 0; i < k; ++i) {
        w.u32(static_cast<std::uint32_t>(idx[i]));
        w.f64(post.gamma(t, idx[i]) / mass);
      }
    }
  });
}

PosteriorMatrix load_posteriors(const std::filesystem::path &path) {
  auto is = open_for_read(path);
  BinaryReader r(is, path.string());
  r.expect_magic("SVKP");
  if (r.u8() != kPosteriorVersion) fail(ErrorCode::kFormat, path.string() + ": unsupported version");
  const std::uint32_t t_max = r.u32(), classes = r.u32();
  const std::uint8_t sparse = r.u8();
  PosteriorMatrix post;
  if (sparse == 0) {
    post.gamma = r.matrix(t_max, classes);
  } else if (sparse == 1) {
    post.gamma = Matrix::Zero(t_max, classes);
    for (std::uint32_t t = 0; t < t_max; ++t) {
      const std::uint32_t count = r.u32();
      if (count > classes) fail(ErrorCode::kFormat, path.string() + ": sparse row too long");
      for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t c = r.u32();
        if (c >= classes) fail(ErrorCode::kFormat, path.string() + ": class index out of range");
        post.gamma(t, c) = r.f64();
      }
    }
  } else {
    fail(ErrorCode::kFormat, path.string() + ": unknown dense/sparse flag");
  }
  r.expect_eof();
  for (Eigen::Index t = 0; t < post.num_frames(); ++t) {
    if (!post.gamma.row(t).allFinite() || (post.gamma.row(t).array() < 0).any())
      fail(ErrorCode::kFormat, path.string() + ": invalid posterior value in frame " + std::to_string(t));
    const double sum = post.gamma.row(t).sum();
    if (std::abs(sum - 1.0) > kRowTolerance)
      fail(ErrorCode::kFormat, path.string() + ": frame " + std::to_string(t) +
                                   " posteriors sum to " + std::to_string(sum));
    // Rows already stochastic up to rounding are left bit-exact.
    if (std::abs(sum - 1.0) > 1e-12) post.gamma.row(t) /= sum;
  }
  return post;
}

}  // namespace svkit
