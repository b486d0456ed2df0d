#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace psbfem {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Base exception for all library errors. Messages name the offending
/// entity (element/face/node index) where applicable.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ParseError : public Error {
public:
  explicit ParseError(const std::string& what) : Error(what) {}
};

class ValidationError : public Error {
public:
  explicit ValidationError(const std::string& what) : Error(what) {}
};

class NumericalError : public Error {
public:
  explicit NumericalError(const std::string& what) : Error(what) {}
};

/// Axis-aligned box, used by the structured mesh generators.
struct Box {
  Vec3 lo{0, 0, 0};
  Vec3 hi{1, 1, 1};

  bool contains(const Box& other, double tol = 1e-12) const {
    return (other.lo.array() >= lo.array() - tol).all() &&
           (other.hi.array() <= hi.array() + tol).all();
  }
  bool contains(const Vec3& p, double tol = 1e-12) const {
    return (p.array() >= lo.array() - tol).all() &&
           (p.array() <= hi.array() + tol).all();
  }
  Vec3 extent() const { return hi - lo; }
};

} // namespace psbfem
