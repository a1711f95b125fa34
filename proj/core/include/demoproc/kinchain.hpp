#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "demoproc/demolog.hpp"
#include "demoproc/error.hpp"
#include "demoproc/geom.hpp"

namespace demoproc::kinchain {

enum class JointType { Revolute, Prismatic, Fixed };

struct Joint {
  std::string name;
  JointType type = JointType::Fixed;
  geom::Pose origin;                         // parent link -> joint frame at q = 0
  geom::Vec3 axis = geom::Vec3::UnitX();     // unit, in the joint frame
  std::string parent;
  std::string child;

  bool actuated() const { return type != JointType::Fixed; }
};

// Serial chain from base link to tip link, joints in base-to-tip order.
class KinematicChain {
 public:
  KinematicChain() = default;
  // Validates unique names and unit axes; throws FormatError otherwise.
  KinematicChain(std::string base, std::string tip, std::vector<Joint> joints);

  const std::string& base_link() const { return base_; }
  const std::string& tip_link() const { return tip_; }
  const std::vector<Joint>& joints() const { return joints_; }
  std::size_t actuated_count() const { return actuated_; }
  std::vector<std::string> actuated_names() const;

 private:
  std::string base_;
  std::string tip_;
  std::vector<Joint> joints_;
  std::size_t actuated_ = 0;
};

struct ParsedChain {
  KinematicChain chain;
  Warnings warnings;
};

// URDF subset: <link name>, and <joint name type> with <origin xyz rpy>,
// <axis xyz>, <parent link>, <child link>. Other elements are ignored with a
// warning. "continuous" joints are treated as revolute.
ParsedChain parse_chain(std::string_view xml, std::string_view base_link,
                        std::string_view tip_link);

// Product over joints of origin * motion(q). Throws ConfigurationError when
// q does not have one value per actuated joint.
geom::Pose forward_kinematics(const KinematicChain& chain, std::span<const double> q);

// T_base_camera = FK(q) * X per joint sample; X is the camera pose in the
// end-effector (tip) frame.
std::vector<demolog::PoseSample> camera_reference_trajectory(
    const KinematicChain& chain, std::span<const demolog::Stamped<demolog::JointState>> joints,
    const geom::Pose& hand_eye);

// Joint CSV: "t_seconds,q1,...,qn" per line (commas or whitespace), '#' comments.
std::vector<demolog::Stamped<demolog::JointState>> parse_joint_csv(std::string_view text);

}  // namespace demoproc::kinchain
