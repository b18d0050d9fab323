/*
 * Copyright 2026 The Anchorline Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

// Independent oracles shared by the test suites. Nothing here may call into
// the code path it is used to check.

#include <array>
#include <cmath>

namespace anchorline::testing {

using Mat4 = std::array<std::array<double, 4>, 4>;

// Homogeneous matrix from translation and unit quaternion (w,x,y,z), written
// out from the textbook rotation-matrix formula.
inline Mat4 homogeneous(const std::array<double, 3>& t,
                        const std::array<double, 4>& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat4 m{};
  m[0] = {1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y), t[0]};
  m[1] = {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x), t[1]};
  m[2] = {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y), t[2]};
  m[3] = {0, 0, 0, 1};
  return m;
}

inline Mat4 multiply(const Mat4& a, const Mat4& b) {
  Mat4 r{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) r[i][j] += a[i][k] * b[k][j];
  return r;
}

// Inverse of a rigid homogeneous matrix: [R^T, -R^T t].
inline Mat4 rigid_inverse(const Mat4& m) {
  Mat4 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r[i][j] = m[j][i];
  for (int i = 0; i < 3; ++i) {
    r[i][3] = 0;
    for (int k = 0; k < 3; ++k) r[i][3] -= m[k][i] * m[k][3];
  }
  r[3] = {0, 0, 0, 1};
  return r;
}

inline double max_abs_diff(const Mat4& a, const Mat4& b) {
  double d = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) d = std::max(d, std::abs(a[i][j] - b[i][j]));
  return d;
}

}  // namespace anchorline::testing
