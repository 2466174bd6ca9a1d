#pragma once

// Spatial algebra for a single free rigid object: poses, twists, wrenches,
// mass properties and the contact Jacobian. Everything is SI.

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace prehensile {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat36 = Eigen::Matrix<double, 3, 6>;

class FrameMismatch : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Identifier of the frame a twist or wrench is expressed in.
class FrameId {
 public:
  FrameId() : name_("world") {}
  explicit FrameId(std::string name) : name_(std::move(name)) {
    if (name_.empty()) throw std::invalid_argument("FrameId: empty frame name");
  }
  const std::string& name() const { return name_; }
  friend bool operator==(const FrameId&, const FrameId&) = default;

  static FrameId world() { return FrameId("world"); }

 private:
  std::string name_;
};

// Rigid transform: maps points of the child frame into the parent frame.
class Pose {
 public:
  Pose() : translation_(Vec3::Zero()), rotation_(Quat::Identity()) {}
  Pose(const Vec3& translation, const Quat& rotation)
      : translation_(translation), rotation_(rotation.normalized()) {}

  static Pose identity() { return Pose(); }
  static Pose from_translation(const Vec3& t) { return Pose(t, Quat::Identity()); }
  static Pose from_axis_angle(const Vec3& axis, double angle,
                              const Vec3& t = Vec3::Zero()) {
    return Pose(t, Quat(Eigen::AngleAxisd(angle, axis.normalized())));
  }

  const Vec3& translation() const { return translation_; }
  const Quat& rotation() const { return rotation_; }
  Mat3 rotation_matrix() const { return rotation_.toRotationMatrix(); }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  Vec3 rotate(const Vec3& v) const { return rotation_ * v; }

 private:
  Vec3 translation_;
  Quat rotation_;
};

inline Pose compose(const Pose& a, const Pose& b) {
  return Pose(a.translation() + a.rotation() * b.translation(),
              a.rotation() * b.rotation());
}

inline Pose inverse(const Pose& p) {
  const Quat qi = p.rotation().conjugate();
  return Pose(-(qi * p.translation()), qi);
}

// Rotation angle (radians, in [0, pi]) between two orientations.
inline double rotation_distance(const Quat& a, const Quat& b) {
  const Quat rel = a.normalized().conjugate() * b.normalized();
  return 2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w()));
}

// Largest of translation error (m) and rotation error (rad).
inline double pose_distance(const Pose& a, const Pose& b) {
  return std::max((a.translation() - b.translation()).norm(),
                  rotation_distance(a.rotation(), b.rotation()));
}

// A frame is a named pose relative to world.
struct Frame {
  FrameId id;
  Pose pose;
};

struct Twist {
  Vec3 linear = Vec3::Zero();
  Vec3 angular = Vec3::Zero();
  FrameId frame = FrameId::world();

  Vec6 vector() const {
    Vec6 v;
    v << linear, angular;
    return v;
  }
  static Twist from_vector(const Vec6& v, FrameId frame = FrameId::world()) {
    return Twist{v.head<3>(), v.tail<3>(), std::move(frame)};
  }
  // Velocity of a point rigidly attached to the body, where `offset` is the
  // point position relative to the twist reference point.
  Vec3 point_velocity(const Vec3& offset) const {
    return linear + angular.cross(offset);
  }
};

inline Twist operator+(const Twist& a, const Twist& b) {
  if (!(a.frame == b.frame)) {
    throw FrameMismatch("twist addition across frames '" + a.frame.name() +
                        "' and '" + b.frame.name() + "'");
  }
  return Twist{a.linear + b.linear, a.angular + b.angular, a.frame};
}

inline Twist operator-(const Twist& t) {
  return Twist{-t.linear, -t.angular, t.frame};
}

inline Twist operator*(double s, const Twist& t) {
  return Twist{s * t.linear, s * t.angular, t.frame};
}

struct Wrench {
  Vec3 force = Vec3::Zero();
  Vec3 torque = Vec3::Zero();
  FrameId frame = FrameId::world();

  Vec6 vector() const {
    Vec6 v;
    v << force, torque;
    return v;
  }
};

inline Wrench operator+(const Wrench& a, const Wrench& b) {
  if (!(a.frame == b.frame)) {
    throw FrameMismatch("wrench addition across frames '" + a.frame.name() +
                        "' and '" + b.frame.name() + "'");
  }
  return Wrench{a.force + b.force, a.torque + b.torque, a.frame};
}

inline Wrench operator-(const Wrench& a, const Wrench& b) {
  return a + Wrench{-b.force, -b.torque, b.frame};
}

// Re-express a wrench given in frame `from` in frame `to`. The torque is
// taken about the origin of the target frame.
inline Wrench transform_wrench(const Wrench& w, const Frame& from,
                               const Frame& to) {
  if (!(w.frame == from.id)) {
    throw FrameMismatch("wrench is expressed in '" + w.frame.name() +
                        "' but transform source is '" + from.id.name() + "'");
  }
  const Pose rel = compose(inverse(to.pose), from.pose);
  const Vec3 f = rel.rotate(w.force);
  const Vec3 tau = rel.rotate(w.torque) + rel.translation().cross(f);
  return Wrench{f, tau, to.id};
}

struct MassProps {
  double mass = 1.0;
  Vec3 com = Vec3::Zero();
  Mat3 inertia = Mat3::Identity();

  void validate() const {
    if (!(mass > 0.0) || !std::isfinite(mass)) {
      throw std::invalid_argument("MassProps: mass must be positive");
    }
    if ((inertia - inertia.transpose()).cwiseAbs().maxCoeff() >
        1e-12 * (1.0 + inertia.cwiseAbs().maxCoeff())) {
      throw std::invalid_argument("MassProps: inertia not symmetric");
    }
    Eigen::LLT<Mat3> llt(inertia);
    if (llt.info() != Eigen::Success) {
      throw std::invalid_argument("MassProps: inertia not positive definite");
    }
  }

  static MassProps box(double mass, const Vec3& extents) {
    const double x2 = extents.x() * extents.x();
    const double y2 = extents.y() * extents.y();
    const double z2 = extents.z() * extents.z();
    MassProps mp;
    mp.mass = mass;
    mp.inertia = (mass / 12.0) * Vec3(y2 + z2, x2 + z2, x2 + y2).asDiagonal();
    return mp;
  }

  // Solid cylinder with its axis along the given body axis (0=x, 1=y, 2=z).
  static MassProps cylinder(double mass, double radius, double length,
                            int axis) {
    const double axial = 0.5 * mass * radius * radius;
    const double transverse =
        mass * (3.0 * radius * radius + length * length) / 12.0;
    Vec3 d = Vec3::Constant(transverse);
    d[axis] = axial;
    MassProps mp;
    mp.mass = mass;
    mp.inertia = d.asDiagonal();
    return mp;
  }
};

// First-order exponential update of a pose by a world-frame twist whose
// linear part is the velocity of the pose origin.
inline Pose integrate_pose(const Pose& p, const Twist& t, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("integrate_pose: dt must be > 0");
  if (!(t.frame == FrameId::world())) {
    throw FrameMismatch("integrate_pose: twist must be expressed in world, got '" +
                        t.frame.name() + "'");
  }
  if (t.linear.isZero(0.0) && t.angular.isZero(0.0)) return p;
  const double angle = t.angular.norm() * dt;
  Quat dq = Quat::Identity();
  if (angle > 0.0) dq = Quat(Eigen::AngleAxisd(angle, t.angular.normalized()));
  return Pose(p.translation() + t.linear * dt, (dq * p.rotation()).normalized());
}

// Rows of `basis` are unit directions (normal first, then two tangents).
// Row i of the result maps the object twist (COM linear velocity, angular
// velocity, world frame) to the velocity component of `point` along basis
// row i. Transposed, it maps a contact force to the wrench about the COM.
inline Mat36 contact_jacobian(const Pose& object_pose, const Vec3& point,
                              const Mat3& basis) {
  const Mat3 gram = basis * basis.transpose();
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
    throw std::invalid_argument("contact_jacobian: basis is not orthonormal");
  }
  const Vec3 r = point - object_pose.translation();
  Mat36 j;
  for (int i = 0; i < 3; ++i) {
    const Vec3 b = basis.row(i).transpose();
    j.block<1, 3>(i, 0) = b.transpose();
    j.block<1, 3>(i, 3) = r.cross(b).transpose();
  }
  return j;
}

inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

}  // namespace prehensile
