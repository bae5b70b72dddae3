#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pw/vec3.hpp"

namespace pw {

enum class JointKind { Revolute, Prismatic };

struct JointSpec {
    std::string name;
    JointKind kind = JointKind::Revolute;
    int parent_link = 0;          // link this joint hangs off; child link index is joint index + 1
    Vec3 axis{0, 0, 1};           // unit vector, link-local
    Vec3 origin{0, 0, 0};         // offset in the parent link frame
    double limit_lo = -1.5707963267948966;
    double limit_hi = 1.5707963267948966;
};

struct LinkSpec {
    std::string name;
    PointSet samples;  // surface sample points, link-local (may be empty for pseudo links)
};

// Joint configuration / joint increment. Length must equal the chain dof.
using JointState = std::vector<double>;
using JointAction = std::vector<double>;

// Articulated embodiment: a joint tree rooted at link 0 with fixed per-link
// surface samples, so particle correspondence across time is exact.
//
// Generated chains prepend a 6-dof wrist (x/y/z translation plus x/y/z
// rotation pseudo-joints) ahead of the finger joints; dof() counts the full
// configuration including the wrist, finger_dof() counts finger joints only.
struct KinematicChain {
    std::string name;
    std::vector<JointSpec> joints;
    std::vector<LinkSpec> links;  // links.size() == joints.size() + 1; links[0] is the root
    Transform base_pose;

    // Planner-facing structure, rebuilt from joint names on load.
    std::array<int, 6> wrist_joints{-1, -1, -1, -1, -1, -1};  // tx ty tz rx ry rz
    std::vector<std::vector<int>> finger_joints;              // per finger, base to tip

    int dof() const { return static_cast<int>(joints.size()); }
    int finger_dof() const;
    int particle_count() const;
    bool has_wrist() const { return wrist_joints[0] >= 0; }

    // Checks the tree/limit/axis invariants; throws ParameterError on violation.
    void validate() const;
};

// Family parameters for the synthetic hand generator.
struct EmbodimentSpec {
    std::string name = "hand";
    int fingers = 3;            // 2..6
    int links_per_finger = 3;   // 2..4
    double link_length_min = 0.028;
    double link_length_max = 0.042;
    double palm_size = 0.07;    // palm width (meters)
    int samples_per_link = 8;
    int palm_samples = 12;
    std::uint64_t seed = 0;
};

// Checks q against the chain's joint limits; throws LimitViolation naming the
// offending joint.
void check_joint_limits(const KinematicChain& chain, const JointState& q);

// World-frame link surface samples at configuration q, link-major order.
PointSet forward_kinematics(const KinematicChain& chain, const JointState& q);

// Per-particle displacement of the finite joint step u applied at q.
DisplacementField joint_action_to_displacement(const KinematicChain& chain, const JointState& q,
                                               const JointAction& u);

// Deterministic synthetic multi-finger hand. Finger dof = fingers * links_per_finger;
// a 6-dof wrist is prepended on top of that.
KinematicChain generate_embodiment(const EmbodimentSpec& spec);

// Canonical presets "hand-a" .. "hand-f" with finger dof {6,16,12,16,24,24}.
EmbodimentSpec hand_preset(const std::string& name);

// JSON chain document with base64 float32 sample arrays.
std::string chain_to_json(const KinematicChain& chain);
KinematicChain chain_from_json(const std::string& text);

}  // namespace pw
