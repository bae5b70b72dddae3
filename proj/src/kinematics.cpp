#include "pw/kinematics.hpp"

#include <cmath>
#include <cstring>

#include <json.hpp>

#include "pw/error.hpp"
#include "pw/geometry.hpp"
#include "pw/rng.hpp"
#include "pw/serialize.hpp"

namespace pw {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kHalfPi = kPi / 2.0;
}  // namespace

int KinematicChain::finger_dof() const {
    int n = 0;
    for (const auto& f : finger_joints) n += static_cast<int>(f.size());
    return n;
}

int KinematicChain::particle_count() const {
    int n = 0;
    for (const auto& link : links) n += static_cast<int>(link.samples.size());
    return n;
}

void KinematicChain::validate() const {
    if (links.size() != joints.size() + 1)
        throw ParameterError("chain '" + name + "': links must number joints+1");
    for (std::size_t j = 0; j < joints.size(); ++j) {
        const JointSpec& spec = joints[j];
        if (spec.parent_link < 0 || spec.parent_link > static_cast<int>(j))
            throw ParameterError("chain '" + name + "': joint '" + spec.name +
                                 "' parent does not precede it in the tree");
        if (std::abs(spec.axis.norm() - 1.0) >= 1e-9)
            throw ParameterError("chain '" + name + "': joint '" + spec.name +
                                 "' axis is not unit norm");
        if (!(spec.limit_lo <= spec.limit_hi))
            throw ParameterError("chain '" + name + "': joint '" + spec.name +
                                 "' limits out of order");
    }
    if (particle_count() < 1)
        throw ParameterError("chain '" + name + "': no surface samples");
}

void check_joint_limits(const KinematicChain& chain, const JointState& q) {
    if (static_cast<int>(q.size()) != chain.dof())
        throw ParameterError("chain '" + chain.name + "': configuration has " +
                             std::to_string(q.size()) + " values, expected " +
                             std::to_string(chain.dof()));
    for (std::size_t j = 0; j < q.size(); ++j) {
        if (!std::isfinite(q[j]))
            throw LimitViolation("joint '" + chain.joints[j].name + "': non-finite value");
        if (q[j] < chain.joints[j].limit_lo - 1e-12 || q[j] > chain.joints[j].limit_hi + 1e-12)
            throw LimitViolation("joint '" + chain.joints[j].name + "': value " +
                                 std::to_string(q[j]) + " outside limits [" +
                                 std::to_string(chain.joints[j].limit_lo) + ", " +
                                 std::to_string(chain.joints[j].limit_hi) + "]");
    }
}

PointSet forward_kinematics(const KinematicChain& chain, const JointState& q) {
    check_joint_limits(chain, q);
    std::vector<Transform> link_pose(chain.links.size());
    link_pose[0] = chain.base_pose;
    for (std::size_t j = 0; j < chain.joints.size(); ++j) {
        const JointSpec& spec = chain.joints[j];
        Transform motion;
        if (spec.kind == JointKind::Revolute) {
            motion.rot = Mat3::axis_angle(spec.axis, q[j]);
            motion.trans = spec.origin;
        } else {
            motion.trans = spec.origin + spec.axis * q[j];
        }
        link_pose[j + 1] = link_pose[spec.parent_link].compose(motion);
    }
    PointSet out;
    out.reserve(chain.particle_count());
    for (std::size_t l = 0; l < chain.links.size(); ++l)
        for (const Vec3& s : chain.links[l].samples) out.push_back(link_pose[l].apply(s));
    return out;
}

DisplacementField joint_action_to_displacement(const KinematicChain& chain, const JointState& q,
                                               const JointAction& u) {
    if (u.size() != q.size())
        throw ParameterError("chain '" + chain.name + "': action length mismatch");
    JointState q_next(q);
    for (std::size_t i = 0; i < q.size(); ++i) q_next[i] += u[i];
    const PointSet before = forward_kinematics(chain, q);
    const PointSet after = forward_kinematics(chain, q_next);
    DisplacementField field(before.size());
    for (std::size_t i = 0; i < before.size(); ++i) field[i] = after[i] - before[i];
    return field;
}

namespace {

// Surface lattice for a finger segment extending along +x: axial rings around
// a thin cylinder, plus the tip point.
PointSet segment_lattice(double length, double radius) {
    PointSet lattice;
    const int axial = 7, around = 8;
    for (int a = 0; a < axial; ++a) {
        const double s = length * static_cast<double>(a + 1) / axial;
        for (int c = 0; c < around; ++c) {
            const double phi = 2.0 * kPi * c / around;
            lattice.push_back({s, radius * std::cos(phi), radius * std::sin(phi)});
        }
    }
    lattice.push_back({length + radius, 0, 0});
    return lattice;
}

PointSet palm_lattice(double half_x, double half_y, double half_z) {
    PointSet lattice;
    const int nx = 7, ny = 7;
    for (int face = 0; face < 2; ++face) {
        const double z = face == 0 ? half_z : -half_z;
        for (int ix = 0; ix < nx; ++ix)
            for (int iy = 0; iy < ny; ++iy)
                lattice.push_back({-half_x + 2.0 * half_x * ix / (nx - 1),
                                   -half_y + 2.0 * half_y * iy / (ny - 1), z});
    }
    return lattice;
}

PointSet fps_subset(const PointSet& lattice, int k) {
    const std::vector<int> idx = farthest_point_sample(lattice, k, 0);
    PointSet out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(snap_f32(lattice[i]));
    return out;
}

const char* kWristNames[6] = {"wrist_tx", "wrist_ty", "wrist_tz",
                              "wrist_rx", "wrist_ry", "wrist_rz"};

void rebuild_joint_maps(KinematicChain& chain) {
    chain.wrist_joints = {-1, -1, -1, -1, -1, -1};
    chain.finger_joints.clear();
    for (std::size_t j = 0; j < chain.joints.size(); ++j) {
        const std::string& n = chain.joints[j].name;
        for (int w = 0; w < 6; ++w)
            if (n == kWristNames[w]) chain.wrist_joints[w] = static_cast<int>(j);
        if (n.size() >= 4 && n[0] == 'f') {
            const std::size_t sep = n.find("_l");
            if (sep != std::string::npos) {
                const int finger = std::stoi(n.substr(1, sep - 1));
                if (finger >= static_cast<int>(chain.finger_joints.size()))
                    chain.finger_joints.resize(finger + 1);
                chain.finger_joints[finger].push_back(static_cast<int>(j));
            }
        }
    }
}

}  // namespace

KinematicChain generate_embodiment(const EmbodimentSpec& spec) {
    if (spec.fingers < 2 || spec.fingers > 6)
        throw ParameterError("generate_embodiment: fingers must be in [2, 6]");
    if (spec.links_per_finger < 2 || spec.links_per_finger > 4)
        throw ParameterError("generate_embodiment: links_per_finger must be in [2, 4]");
    if (!(spec.link_length_min > 0.0) || !(spec.link_length_max >= spec.link_length_min) ||
        spec.link_length_max > 0.2)
        throw ParameterError("generate_embodiment: link length range invalid");
    if (!(spec.palm_size > 0.0) || spec.palm_size > 0.3)
        throw ParameterError("generate_embodiment: palm_size out of range");
    if (spec.samples_per_link < 1 || spec.samples_per_link > 57)
        throw ParameterError("generate_embodiment: samples_per_link out of range");
    if (spec.palm_samples < 1 || spec.palm_samples > 98)
        throw ParameterError("generate_embodiment: palm_samples out of range");

    Rng rng(derive_seed(spec.seed, "embodiment"));
    KinematicChain chain;
    chain.name = spec.name;
    chain.base_pose = Transform::identity();
    chain.links.push_back({"base", {}});

    // 6-dof wrist: translation then rotation pseudo-joints, sampleless links.
    const Vec3 wrist_axes[6] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (int w = 0; w < 6; ++w) {
        JointSpec j;
        j.name = kWristNames[w];
        j.kind = w < 3 ? JointKind::Prismatic : JointKind::Revolute;
        j.parent_link = static_cast<int>(chain.links.size()) - 1;
        j.axis = wrist_axes[w];
        if (w < 3) {
            j.limit_lo = -0.5;
            j.limit_hi = 0.5;
        } else if (w == 5) {
            j.limit_lo = -kPi;
            j.limit_hi = kPi;
        } else {
            j.limit_lo = -kHalfPi;
            j.limit_hi = kHalfPi;
        }
        chain.joints.push_back(j);
        chain.links.push_back({std::string("wrist_link_") + std::to_string(w), {}});
    }
    const int palm_link = static_cast<int>(chain.links.size()) - 1;

    const double palm_half = spec.palm_size / 2.0;
    const double palm_depth = palm_half * (0.8 + 0.2 * rng.uniform01());
    const double palm_thick = 0.008 + 0.004 * rng.uniform01();
    chain.links[palm_link].name = "palm";
    chain.links[palm_link].samples =
        fps_subset(palm_lattice(palm_depth, palm_half, palm_thick), spec.palm_samples);

    const double finger_radius = 0.006 + 0.003 * rng.uniform01();
    for (int f = 0; f < spec.fingers; ++f) {
        // Finger 0 is the thumb, attached on the -y palm edge and opposing the
        // others, which fan out from the +x edge.
        Vec3 attach;
        double heading;
        if (f == 0) {
            attach = {palm_depth * 0.25, -palm_half, 0.0};
            heading = -kHalfPi * (0.55 + 0.15 * rng.uniform01());
        } else {
            const double spread =
                spec.fingers == 2 ? 0.0
                                  : -0.8 + 1.6 * static_cast<double>(f - 1) / (spec.fingers - 2);
            attach = {palm_depth, palm_half * spread * 0.85, 0.0};
            heading = 0.35 * spread + rng.uniform(-0.06, 0.06);
        }
        const Vec3 dir{std::cos(heading), std::sin(heading), 0.0};
        // Flexion axis in the palm plane, perpendicular to the finger: positive
        // joint values curl the finger toward -z (rot about -dir.y,dir.x maps
        // dir onto -z sin + dir cos).
        const Vec3 axis{-dir.y, dir.x, 0.0};

        int parent = palm_link;
        for (int l = 0; l < spec.links_per_finger; ++l) {
            const double len = rng.uniform(spec.link_length_min, spec.link_length_max) *
                               (1.0 - 0.12 * l);  // taper toward the tip
            JointSpec j;
            j.name = "f" + std::to_string(f) + "_l" + std::to_string(l);
            j.kind = JointKind::Revolute;
            j.parent_link = parent;
            j.origin = l == 0 ? attach : Vec3{0, 0, 0};
            j.axis = axis;
            chain.joints.push_back(j);

            LinkSpec link;
            link.name = j.name;
            // Segment frames stay palm-oriented; the heading is baked into the
            // samples so every knuckle hinges about the same local axis.
            PointSet lattice = segment_lattice(len, finger_radius);
            for (Vec3& p : lattice) p = Mat3::rot_z(heading).apply(p);
            link.samples = fps_subset(lattice, spec.samples_per_link);
            chain.links.push_back(link);
            parent = static_cast<int>(chain.links.size()) - 1;
        }
        // Non-root segments hang off the previous segment's tip.
        const int joint_base = static_cast<int>(chain.joints.size()) - spec.links_per_finger;
        for (int l = 1; l < spec.links_per_finger; ++l) {
            const LinkSpec& prev_link = chain.links[chain.joints[joint_base + l].parent_link];
            double reach = 0.0;
            for (const Vec3& s : prev_link.samples) reach = std::max(reach, s.norm());
            chain.joints[joint_base + l].origin = dir * (reach * 0.96);
        }
    }

    rebuild_joint_maps(chain);
    chain.validate();
    return chain;
}

EmbodimentSpec hand_preset(const std::string& name) {
    EmbodimentSpec s;
    s.name = name;
    if (name == "hand-a") {
        s.fingers = 2;
        s.links_per_finger = 3;
        s.palm_size = 0.058;
        s.seed = 101;
    } else if (name == "hand-b") {
        s.fingers = 4;
        s.links_per_finger = 4;
        s.palm_size = 0.082;
        s.seed = 202;
    } else if (name == "hand-c") {
        s.fingers = 4;
        s.links_per_finger = 3;
        s.palm_size = 0.072;
        s.seed = 303;
    } else if (name == "hand-d") {
        s.fingers = 4;
        s.links_per_finger = 4;
        s.palm_size = 0.076;
        s.link_length_min = 0.032;
        s.link_length_max = 0.048;
        s.seed = 404;
    } else if (name == "hand-e") {
        s.fingers = 6;
        s.links_per_finger = 4;
        s.palm_size = 0.092;
        s.seed = 505;
    } else if (name == "hand-f") {
        s.fingers = 6;
        s.links_per_finger = 4;
        s.palm_size = 0.088;
        s.link_length_min = 0.024;
        s.link_length_max = 0.038;
        s.seed = 606;
    } else {
        throw ParameterError("unknown embodiment preset '" + name + "'");
    }
    return s;
}

namespace {

std::string pack_points_f32(const PointSet& points) {
    std::string bytes;
    bytes.reserve(points.size() * 12);
    put_points_f32(bytes, points);
    return bytes;
}

PointSet unpack_points_f32(const std::string& bytes) {
    if (bytes.size() % 12 != 0)
        throw FormatError("sample array byte length not a multiple of 12", bytes.size());
    ByteReader reader(bytes);
    return reader.get_points_f32(bytes.size() / 12, "link samples");
}

}  // namespace

std::string chain_to_json(const KinematicChain& chain) {
    nlohmann::json doc;
    doc["schema"] = "pw-chain";
    doc["version"] = 1;
    doc["name"] = chain.name;
    std::vector<double> pose(16, 0.0);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) pose[r * 4 + c] = chain.base_pose.rot.m[r][c];
        pose[r * 4 + 3] = r == 0   ? chain.base_pose.trans.x
                          : r == 1 ? chain.base_pose.trans.y
                                   : chain.base_pose.trans.z;
    }
    pose[15] = 1.0;
    doc["base_pose"] = pose;

    nlohmann::json joints = nlohmann::json::array();
    for (const JointSpec& j : chain.joints) {
        joints.push_back({{"name", j.name},
                          {"kind", j.kind == JointKind::Revolute ? "revolute" : "prismatic"},
                          {"parent", j.parent_link},
                          {"axis", {j.axis.x, j.axis.y, j.axis.z}},
                          {"origin", {j.origin.x, j.origin.y, j.origin.z}},
                          {"limits", {j.limit_lo, j.limit_hi}}});
    }
    doc["joints"] = std::move(joints);

    nlohmann::json links = nlohmann::json::array();
    for (const LinkSpec& link : chain.links) {
        links.push_back({{"name", link.name},
                         {"sample_count", link.samples.size()},
                         {"samples_b64", base64_encode(pack_points_f32(link.samples))}});
    }
    doc["links"] = std::move(links);
    return doc.dump();
}

KinematicChain chain_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("chain JSON parse: ") + e.what(), e.byte);
    }
    try {
        if (doc.at("schema").get<std::string>() != "pw-chain")
            throw FormatError("not a pw-chain document", 0);
        const int version = doc.at("version").get<int>();
        if (version != 1)
            throw VersionError("chain version " + std::to_string(version) +
                               " unsupported (supported: 1)");
        KinematicChain chain;
        chain.name = doc.at("name").get<std::string>();
        const auto pose = doc.at("base_pose").get<std::vector<double>>();
        if (pose.size() != 16) throw FormatError("base_pose must have 16 entries", 0);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) chain.base_pose.rot.m[r][c] = pose[r * 4 + c];
        chain.base_pose.trans = {pose[3], pose[7], pose[11]};

        for (const auto& j : doc.at("joints")) {
            JointSpec spec;
            spec.name = j.at("name").get<std::string>();
            const std::string kind = j.at("kind").get<std::string>();
            if (kind == "revolute")
                spec.kind = JointKind::Revolute;
            else if (kind == "prismatic")
                spec.kind = JointKind::Prismatic;
            else
                throw FormatError("unknown joint kind '" + kind + "'", 0);
            spec.parent_link = j.at("parent").get<int>();
            const auto axis = j.at("axis").get<std::vector<double>>();
            const auto origin = j.at("origin").get<std::vector<double>>();
            const auto limits = j.at("limits").get<std::vector<double>>();
            if (axis.size() != 3 || origin.size() != 3 || limits.size() != 2)
                throw FormatError("joint field arity wrong for '" + spec.name + "'", 0);
            spec.axis = {axis[0], axis[1], axis[2]};
            spec.origin = {origin[0], origin[1], origin[2]};
            spec.limit_lo = limits[0];
            spec.limit_hi = limits[1];
            chain.joints.push_back(spec);
        }
        for (const auto& l : doc.at("links")) {
            LinkSpec link;
            link.name = l.at("name").get<std::string>();
            link.samples = unpack_points_f32(base64_decode(l.at("samples_b64").get<std::string>()));
            if (link.samples.size() != l.at("sample_count").get<std::size_t>())
                throw FormatError("sample_count mismatch for link '" + link.name + "'", 0);
            chain.links.push_back(std::move(link));
        }
        rebuild_joint_maps(chain);
        chain.validate();
        return chain;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("chain JSON structure: ") + e.what(), 0);
    }
}

}  // namespace pw
