/*
 * Copyright 2026 The crowdnav Authors
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

#ifndef CROWDNAV_GEOMETRY_HPP_
#define CROWDNAV_GEOMETRY_HPP_

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace crowdnav {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Wraps an angle to (-pi, pi].
inline double WrapAngle(double a) {
  a = std::remainder(a, kTwoPi);
  if (a <= -kPi) a += kTwoPi;
  return a;
}

/// Wraps an angle to [0, 2pi).
inline double WrapPositive(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  if (a >= kTwoPi) a -= kTwoPi;
  return a;
}

inline double Bearing(const Vec2& v) { return std::atan2(v.y(), v.x()); }

inline Vec2 UnitFromAngle(double a) { return {std::cos(a), std::sin(a)}; }

inline Vec2 Perp(const Vec2& v) { return {-v.y(), v.x()}; }

inline double Cross(const Vec2& a, const Vec2& b) {
  return a.x() * b.y() - a.y() * b.x();
}

// Base class for all errors raised by the library. The C API maps each
// category onto a status code.
class Error : public std::runtime_error {
 public:
  enum class Kind { kInvalidArgument, kConfig, kIo, kNumeric, kInternal };

  Error(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline Error InvalidArgument(const std::string& what) {
  return Error(Error::Kind::kInvalidArgument, what);
}
inline Error NumericError(const std::string& what) {
  return Error(Error::Kind::kNumeric, what);
}

}  // namespace crowdnav

#endif  // CROWDNAV_GEOMETRY_HPP_
