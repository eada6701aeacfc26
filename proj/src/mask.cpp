// Copyright 2026 The TargetDrop Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "targetdrop/mask.hpp"

namespace targetdrop {

DropMask DropMask::ones(std::size_t h, std::size_t w, std::size_t c) {
  DropMask m;
  m.height = h;
  m.width = w;
  m.channels = c;
  m.keep.assign(h * w * c, 1);
  m.tags.assign(c, 0);
  m.kept_counts.assign(c, h * w);
  m.scale.assign(c, 1.0);
  return m;
}

void DropMask::recount() {
  kept_counts.assign(channels, 0);
  for (std::size_t p = 0; p < plane_size(); ++p) {
    for (std::size_t c = 0; c < channels; ++c) kept_counts[c] += keep[p * channels + c];
  }
}

Tensor apply_mask(const Tensor& u, const DropMask& mask) {
  if (u.rank() != 3 || u.dim(0) != mask.height || u.dim(1) != mask.width ||
      (mask.channels != 1 && mask.channels != u.dim(2))) {
    throw ShapeError("apply_mask: input " + shape_to_string(u.shape()) + " vs mask " +
                     shape_to_string(mask.shape()));
  }
  const std::size_t c = u.dim(2);
  const bool broadcast = mask.channels == 1 && c != 1;
  Tensor out(u.shape());
  auto in = u.data();
  auto o = out.data();
  for (std::size_t p = 0; p < mask.plane_size(); ++p) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t mc = broadcast ? 0 : ch;
      const double s = mask.keep[p * mask.channels + mc];
      const double f = mask.scale[mc];
      o[p * c + ch] = f == 0.0 ? 0.0 : in[p * c + ch] * s * f;
    }
  }
  return out;
}

}  // namespace targetdrop
