#pragma once

#include <array>
#include <string>
#include <vector>

#include "pw/kinematics.hpp"

namespace pw {

enum class PrimitiveKind { FingersPinch, PalmPress, ThumbPinch, PlanarPush };

std::string primitive_kind_name(PrimitiveKind kind);
PrimitiveKind primitive_kind_from_name(const std::string& name);

// Low-dimensional action parameterization. A parameter vector decodes to a
// fragment of `steps` per-step joint increments:
//   FingersPinch: wrist yaw rate + symmetric thumb/index closing rate
//   PalmPress:    wrist yaw rate + wrist z translation rate
//   ThumbPinch:   wrist yaw rate + thumb joint rate
//   PlanarPush:   wrist x/y translation rates + per-finger contact mask
//                 (mask >= 0.5 curls that finger into contact)
struct Primitive {
    PrimitiveKind kind = PrimitiveKind::FingersPinch;
    int parameter_dim = 0;
    std::vector<std::array<double, 2>> bounds;  // per-parameter [lo, hi]
    int steps = 4;                              // fragment length
};

// Bounds are sized for the chain (mask parameters depend on finger count).
Primitive make_primitive(PrimitiveKind kind, const KinematicChain& chain, int steps);

// Deterministic parameter-to-joint-action mapping. Throws ParameterError on
// out-of-bounds parameters. Output does not consider joint limits; executors
// clamp against the current configuration.
std::vector<JointAction> decode_primitive(const KinematicChain& chain, const Primitive& primitive,
                                          const std::vector<double>& parameters);

// Scales u so q+u stays within `fraction` of the joint limit range.
JointAction clamp_action_to_limits(const KinematicChain& chain, const JointState& q,
                                   const JointAction& u, double fraction = 1.0);

// Scales u so no particle moves farther than max_step in one action.
JointAction cap_action_displacement(const KinematicChain& chain, const JointState& q,
                                    const JointAction& u, double max_step);

}  // namespace pw
