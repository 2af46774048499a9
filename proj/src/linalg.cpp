/*
 * linalg.cpp
 * qorca
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "qorca/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <numbers>
#include <optional>
#include <string>

namespace qorca {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Unpivoted LDL^T; succeeds only when every zero pivot has a zero column
// below it, which covers diagonal and well-conditioned inputs exactly.
std::optional<Mat3> ldl_factor(const Mat3& a) {
  double l[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  double d[3] = {0, 0, 0};
  for (int j = 0; j < 3; ++j) {
    double dj = a(j, j);
    for (int k = 0; k < j; ++k) dj -= l[j][k] * l[j][k] * d[k];
    d[j] = dj;
    for (int i = j + 1; i < 3; ++i) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= l[i][k] * l[j][k] * d[k];
      if (dj > kPsdTolerance) {
        l[i][j] = s / dj;
      } else if (std::abs(s) > kPsdTolerance) {
        return std::nullopt;
      } else {
        l[i][j] = 0.0;
      }
    }
    if (dj < 0.0) d[j] = 0.0;
  }
  Mat3 out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out(i, j) = l[i][j] * std::sqrt(d[j]);
  return out;
}

}  // namespace

double frobenius(const Mat3& a) {
  double s = 0.0;
  for (double e : a.m) s += e * e;
  return std::sqrt(s);
}

Rng Rng::derive(std::uint64_t master, std::uint64_t index) {
  return Rng(mix64(master ^ mix64(index + kGolden)));
}

std::uint64_t Rng::next_u64() {
  // SplitMix64 evaluated at a counter: stateless apart from the counter.
  return mix64(seed_ + kGolden * ++counter_);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::standard_normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Mat3 psd_factor(const Mat3& cov) {
  Mat3 sym;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) sym(i, j) = 0.5 * (cov(i, j) + cov(j, i));
  for (double e : sym.m)
    if (!std::isfinite(e)) throw NotPsdError("covariance has non-finite entries");

  Eigen::Matrix3d a;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a(i, j) = sym(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(a);
  const Eigen::Vector3d lambda = eig.eigenvalues();
  if (lambda.minCoeff() < -kPsdTolerance)
    throw NotPsdError("covariance has eigenvalue " + std::to_string(lambda.minCoeff()));

  if (auto l = ldl_factor(sym)) return *l;

  const Eigen::Matrix3d v = eig.eigenvectors();
  Mat3 out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out(i, j) = v(i, j) * std::sqrt(std::max(lambda(j), 0.0));
  return out;
}

Vec3 sample_gaussian(Rng& rng, const Vec3& mean, const Mat3& cov) {
  const Mat3 l = psd_factor(cov);
  const Vec3 z{rng.standard_normal(), rng.standard_normal(), rng.standard_normal()};
  return mean + l * z;
}

}  // namespace qorca
