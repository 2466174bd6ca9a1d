#pragma once

// Finite contact geometries, their discretization into rigid arrays of
// Coulomb point contacts, and polyhedral friction cones.

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "prehensile/rigid.hpp"

namespace prehensile {

enum class PatchKind { kPoint, kLine, kDisc };

inline const char* to_string(PatchKind k) {
  switch (k) {
    case PatchKind::kPoint: return "point";
    case PatchKind::kLine: return "line";
    case PatchKind::kDisc: return "disc";
  }
  return "?";
}

inline PatchKind patch_kind_from_string(const std::string& s) {
  if (s == "point") return PatchKind::kPoint;
  if (s == "line") return PatchKind::kLine;
  if (s == "disc") return PatchKind::kDisc;
  throw std::invalid_argument("unknown patch kind '" + s + "'");
}

// A contact geometry in its owner's frame. `dimension` is the line length or
// disc diameter (0 for a point). `axis` orients the patch in its plane: the
// line direction, or the direction of the first ring point of a disc.
struct ContactPatch {
  PatchKind kind = PatchKind::kPoint;
  double dimension = 0.0;
  Vec3 center = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  Vec3 axis = Vec3::UnitX();
  double mu = 0.0;

  void validate() const {
    if (!(mu >= 0.0) || !std::isfinite(mu)) {
      throw std::invalid_argument("ContactPatch: mu must be >= 0");
    }
    if (!(dimension >= 0.0) || !std::isfinite(dimension)) {
      throw std::invalid_argument("ContactPatch: dimension must be >= 0");
    }
    if (std::abs(normal.norm() - 1.0) > 1e-9) {
      throw std::invalid_argument("ContactPatch: normal must be unit length");
    }
    if (kind != PatchKind::kPoint &&
        (axis - axis.dot(normal) * normal).norm() < 1e-9) {
      throw std::invalid_argument("ContactPatch: axis parallel to normal");
    }
  }
};

struct ContactPoint {
  Vec3 position = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  Vec3 tangent1 = Vec3::UnitX();
  Vec3 tangent2 = Vec3::UnitY();
  double mu = 0.0;
  int patch = 0;

  // Rows: normal, tangent1, tangent2.
  Mat3 basis() const {
    Mat3 b;
    b.row(0) = normal.transpose();
    b.row(1) = tangent1.transpose();
    b.row(2) = tangent2.transpose();
    return b;
  }
};

// Right-handed triad {t1, t2, n} with t1 the projection of `hint` onto the
// plane normal to n.
inline void tangent_basis(const Vec3& n, const Vec3& hint, Vec3& t1, Vec3& t2) {
  Vec3 h = hint - hint.dot(n) * n;
  if (h.norm() < 1e-9) {
    h = (std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY());
    h -= h.dot(n) * n;
  }
  t1 = h.normalized();
  t2 = n.cross(t1);
}

// Ring radius that reproduces the uniform-pressure torsional friction moment
// (2/3) mu N R of a disc of radius R.
inline double disc_ring_radius(double diameter) { return diameter / 3.0; }

inline std::vector<ContactPoint> discretize_patch(const ContactPatch& patch,
                                                  int points_per_patch,
                                                  int patch_id = 0) {
  patch.validate();
  const Vec3 n = patch.normal.normalized();
  Vec3 t1, t2;
  tangent_basis(n, patch.axis, t1, t2);
  std::vector<ContactPoint> out;
  auto push = [&](const Vec3& p) {
    out.push_back(ContactPoint{p, n, t1, t2, patch.mu, patch_id});
  };
  switch (patch.kind) {
    case PatchKind::kPoint:
      if (points_per_patch != 1) {
        throw std::invalid_argument("discretize_patch: point patch needs exactly 1 point");
      }
      push(patch.center);
      break;
    case PatchKind::kLine: {
      if (points_per_patch < 2) {
        throw std::invalid_argument("discretize_patch: line patch needs >= 2 points");
      }
      const double half = 0.5 * patch.dimension;
      for (int i = 0; i < points_per_patch; ++i) {
        const double s = -half + patch.dimension * i / (points_per_patch - 1);
        push(patch.center + s * t1);
      }
      break;
    }
    case PatchKind::kDisc: {
      if (points_per_patch < 2) {
        throw std::invalid_argument("discretize_patch: disc patch needs >= 2 points");
      }
      const double rho = disc_ring_radius(patch.dimension);
      for (int i = 0; i < points_per_patch; ++i) {
        const double a = 2.0 * std::numbers::pi * i / points_per_patch;
        push(patch.center + rho * (std::cos(a) * t1 + std::sin(a) * t2));
      }
      break;
    }
  }
  return out;
}

// Symmetric polyhedral inner approximation of the Coulomb cone. Directions
// are unit vectors in tangent-plane coordinates (t1, t2).
struct FrictionPyramid {
  std::vector<Eigen::Vector2d> directions;
  double mu = 0.0;

  int facets() const { return static_cast<int>(directions.size()); }

  Vec3 direction(int j, const Vec3& t1, const Vec3& t2) const {
    return directions[j].x() * t1 + directions[j].y() * t2;
  }

  // Largest tangential force magnitude admissible along the tangent-plane
  // direction at angle `angle`, for normal force `normal_force`.
  double capacity(double normal_force, double angle) const {
    if (mu == 0.0 || normal_force <= 0.0) return 0.0;
    const Eigen::Vector2d u(std::cos(angle), std::sin(angle));
    // The polygon is {sum a_j d_j : a_j >= 0, sum a_j <= mu N}; along u its
    // boundary lies on the edge between the two vertices bracketing u.
    double best = 0.0;
    const int k = facets();
    for (int j = 0; j < k; ++j) {
      const Eigen::Vector2d& a = directions[j];
      const Eigen::Vector2d& b = directions[(j + 1) % k];
      // Solve s*u = alpha*a + (1-alpha)*b scaled by mu N.
      Eigen::Matrix2d m;
      m << u.x(), a.x() - b.x(), u.y(), a.y() - b.y();
      if (std::abs(m.determinant()) < 1e-15) continue;
      const Eigen::Vector2d sol = m.fullPivLu().solve(b);
      const double s = sol.x();
      const double alpha = -sol.y();
      if (s > 0.0 && alpha >= -1e-12 && alpha <= 1.0 + 1e-12) best = std::max(best, s);
    }
    return best * mu * normal_force;
  }
};

// `phase` rotates all facet directions by a fixed angle (radians).
inline FrictionPyramid linearize_cone(double mu, int k, double phase = 0.0) {
  if (k < 4 || k % 2 != 0) {
    throw std::invalid_argument("linearize_cone: facet count must be even and >= 4, got " +
                                std::to_string(k));
  }
  if (!(mu >= 0.0) || !std::isfinite(mu)) {
    throw std::invalid_argument("linearize_cone: mu must be >= 0");
  }
  FrictionPyramid p;
  p.mu = mu;
  p.directions.reserve(k);
  for (int j = 0; j < k; ++j) {
    const double a = phase + 2.0 * std::numbers::pi * j / k;
    p.directions.emplace_back(std::cos(a), std::sin(a));
  }
  return p;
}

// Net wrench of per-point forces, torque about `reference`.
inline Wrench patch_wrench(std::span<const ContactPoint> points,
                           std::span<const Vec3> per_point_forces,
                           const Vec3& reference = Vec3::Zero(),
                           FrameId frame = FrameId::world()) {
  if (points.size() != per_point_forces.size()) {
    throw std::invalid_argument("patch_wrench: " + std::to_string(points.size()) +
                                " points but " + std::to_string(per_point_forces.size()) +
                                " forces");
  }
  Wrench w{Vec3::Zero(), Vec3::Zero(), std::move(frame)};
  for (std::size_t i = 0; i < points.size(); ++i) {
    w.force += per_point_forces[i];
    w.torque += (points[i].position - reference).cross(per_point_forces[i]);
  }
  return w;
}

}  // namespace prehensile
