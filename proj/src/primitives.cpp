#include "pw/primitives.hpp"

#include <algorithm>
#include <cmath>

#include "pw/error.hpp"

namespace pw {

std::string primitive_kind_name(PrimitiveKind kind) {
    switch (kind) {
        case PrimitiveKind::FingersPinch: return "FingersPinch";
        case PrimitiveKind::PalmPress: return "PalmPress";
        case PrimitiveKind::ThumbPinch: return "ThumbPinch";
        case PrimitiveKind::PlanarPush: return "PlanarPush";
    }
    return "?";
}

PrimitiveKind primitive_kind_from_name(const std::string& name) {
    if (name == "FingersPinch") return PrimitiveKind::FingersPinch;
    if (name == "PalmPress") return PrimitiveKind::PalmPress;
    if (name == "ThumbPinch") return PrimitiveKind::ThumbPinch;
    if (name == "PlanarPush") return PrimitiveKind::PlanarPush;
    throw ParameterError("unknown primitive '" + name + "'");
}

namespace {

void require_hand_structure(const KinematicChain& chain) {
    if (!chain.has_wrist() || chain.finger_joints.size() < 2)
        throw ParameterError("primitive decode requires a wrist and at least two fingers (chain '" +
                             chain.name + "')");
}

}  // namespace

Primitive make_primitive(PrimitiveKind kind, const KinematicChain& chain, int steps) {
    require_hand_structure(chain);
    if (steps < 1) throw ParameterError("make_primitive: steps must be >= 1");
    Primitive p;
    p.kind = kind;
    p.steps = steps;
    const std::array<double, 2> yaw{-0.05, 0.05};
    switch (kind) {
        case PrimitiveKind::FingersPinch:
            p.bounds = {yaw, {-0.10, 0.10}};
            break;
        case PrimitiveKind::PalmPress:
            p.bounds = {yaw, {-0.006, 0.006}};
            break;
        case PrimitiveKind::ThumbPinch:
            p.bounds = {yaw, {-0.12, 0.12}};
            break;
        case PrimitiveKind::PlanarPush: {
            p.bounds = {{-0.008, 0.008}, {-0.008, 0.008}};
            for (std::size_t f = 0; f < chain.finger_joints.size(); ++f)
                p.bounds.push_back({0.0, 1.0});
            break;
        }
    }
    p.parameter_dim = static_cast<int>(p.bounds.size());
    return p;
}

std::vector<JointAction> decode_primitive(const KinematicChain& chain, const Primitive& primitive,
                                          const std::vector<double>& parameters) {
    require_hand_structure(chain);
    if (static_cast<int>(parameters.size()) != primitive.parameter_dim)
        throw ParameterError("decode_primitive: expected " +
                             std::to_string(primitive.parameter_dim) + " parameters, got " +
                             std::to_string(parameters.size()));
    for (std::size_t i = 0; i < parameters.size(); ++i) {
        if (parameters[i] < primitive.bounds[i][0] - 1e-12 ||
            parameters[i] > primitive.bounds[i][1] + 1e-12)
            throw ParameterError("decode_primitive: parameter " + std::to_string(i) +
                                 " out of bounds");
    }

    JointAction step(chain.dof(), 0.0);
    const auto& wrist = chain.wrist_joints;
    switch (primitive.kind) {
        case PrimitiveKind::FingersPinch:
            step[wrist[5]] = parameters[0];
            for (int j : chain.finger_joints[0]) step[j] = parameters[1];
            for (int j : chain.finger_joints[1]) step[j] = parameters[1];
            break;
        case PrimitiveKind::PalmPress:
            step[wrist[5]] = parameters[0];
            step[wrist[2]] = parameters[1];
            break;
        case PrimitiveKind::ThumbPinch:
            step[wrist[5]] = parameters[0];
            for (int j : chain.finger_joints[0]) step[j] = parameters[1];
            break;
        case PrimitiveKind::PlanarPush: {
            step[wrist[0]] = parameters[0];
            step[wrist[1]] = parameters[1];
            constexpr double kCurlRate = 0.09;
            for (std::size_t f = 0; f < chain.finger_joints.size(); ++f)
                if (parameters[2 + f] >= 0.5)
                    for (int j : chain.finger_joints[f]) step[j] = kCurlRate;
            break;
        }
    }
    return std::vector<JointAction>(primitive.steps, step);
}

JointAction clamp_action_to_limits(const KinematicChain& chain, const JointState& q,
                                   const JointAction& u, double fraction) {
    if (q.size() != u.size() || static_cast<int>(q.size()) != chain.dof())
        throw ParameterError("clamp_action_to_limits: dimension mismatch");
    JointAction out(u);
    for (std::size_t j = 0; j < u.size(); ++j) {
        const JointSpec& spec = chain.joints[j];
        const double mid = 0.5 * (spec.limit_lo + spec.limit_hi);
        const double half = 0.5 * (spec.limit_hi - spec.limit_lo) * fraction;
        const double target = std::clamp(q[j] + u[j], mid - half, mid + half);
        out[j] = target - q[j];
    }
    return out;
}

JointAction cap_action_displacement(const KinematicChain& chain, const JointState& q,
                                    const JointAction& u, double max_step) {
    if (!(max_step > 0.0)) throw ParameterError("cap_action_displacement: max_step must be > 0");
    JointAction out(u);
    // Rotational coupling makes displacement slightly nonlinear in u; a couple
    // of shrink passes settle below the cap.
    for (int pass = 0; pass < 3; ++pass) {
        const DisplacementField field = joint_action_to_displacement(chain, q, out);
        double worst = 0.0;
        for (const Vec3& d : field) worst = std::max(worst, d.norm());
        if (worst <= max_step) break;
        const double scale = max_step / worst;
        for (double& v : out) v *= scale;
    }
    return out;
}

}  // namespace pw
