#include "pw/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "pw/error.hpp"
#include "pw/geometry.hpp"
#include "pw/rng.hpp"

namespace pw {

void OracleDomainParams::validate() const {
    if (!(friction > 0.0) || !(stiffness > 0.0) || stiffness > 1.0)
        throw ParameterError("oracle params: friction must be > 0 and stiffness in (0, 1]");
    if (!(plasticity_threshold > 0.0) || !(contact_radius > 0.0))
        throw ParameterError("oracle params: plasticity_threshold and contact_radius must be > 0");
    if (observation_noise_sigma < 0.0)
        throw ParameterError("oracle params: observation noise must be >= 0");
    if (label != "sim" && label != "real-proxy")
        throw ParameterError("oracle params: label must be 'sim' or 'real-proxy'");
}

OracleDomainParams sim_domain() { return {}; }

OracleDomainParams real_proxy_domain() {
    OracleDomainParams p = sim_domain();
    p.friction *= 0.8;
    p.stiffness *= 0.7;
    p.plasticity_threshold *= 0.9;
    p.observation_noise_sigma = 0.002;
    p.label = "real-proxy";
    return p;
}

PointSet box_perimeter(const RigidBoxState& state) {
    const double hx = state.half_extents.x, hy = state.half_extents.y;
    const double total = 4.0 * (hx + hy);
    const double c = std::cos(state.yaw), s = std::sin(state.yaw);
    PointSet points;
    points.reserve(state.perimeter_count);
    for (int i = 0; i < state.perimeter_count; ++i) {
        double t = total * static_cast<double>(i) / state.perimeter_count;
        Vec2 local;
        if (t < 2.0 * hx) {
            local = {-hx + t, -hy};
        } else if (t < 2.0 * hx + 2.0 * hy) {
            local = {hx, -hy + (t - 2.0 * hx)};
        } else if (t < 4.0 * hx + 2.0 * hy) {
            local = {hx - (t - 2.0 * hx - 2.0 * hy), hy};
        } else {
            local = {-hx, hy - (t - 4.0 * hx - 2.0 * hy)};
        }
        points.push_back({state.center.x + c * local.x - s * local.y,
                          state.center.y + s * local.x + c * local.y, state.plane_z});
    }
    return points;
}

RigidBoxState make_rigid_box(Vec2 center, double yaw, Vec2 half_extents, double plane_z,
                             int perimeter_count) {
    if (!(half_extents.x > 0.0) || !(half_extents.y > 0.0))
        throw ParameterError("make_rigid_box: half extents must be positive");
    if (perimeter_count < 4) throw ParameterError("make_rigid_box: need at least 4 particles");
    RigidBoxState state;
    state.center = center;
    state.yaw = yaw;
    state.half_extents = half_extents;
    state.plane_z = plane_z;
    state.perimeter_count = perimeter_count;
    state.particles = box_perimeter(state);
    return state;
}

RigidBoxState step_rigid_box(const RigidBoxState& state, const PointSet& hand_particles_before,
                             const DisplacementField& field, const OracleDomainParams& params) {
    if (hand_particles_before.size() != field.size())
        throw ParameterError("step_rigid_box: field length " + std::to_string(field.size()) +
                             " does not match hand particle count " +
                             std::to_string(hand_particles_before.size()));
    const double hx = state.half_extents.x, hy = state.half_extents.y;
    const double cr = params.contact_radius;
    const double c = std::cos(state.yaw), s = std::sin(state.yaw);

    Vec2 impulse_sum;   // box frame
    double torque_sum = 0.0;
    int contacts = 0;
    for (std::size_t i = 0; i < hand_particles_before.size(); ++i) {
        const Vec3 end = hand_particles_before[i] + field[i];
        if (std::abs(end.z - state.plane_z) > state.slab_half + cr) continue;
        const Vec2 rel{end.x - state.center.x, end.y - state.center.y};
        // box frame
        const Vec2 p{c * rel.x + s * rel.y, -s * rel.x + c * rel.y};
        if (std::abs(p.x) > hx + cr || std::abs(p.y) > hy + cr) continue;

        // Depth to each inflated face; the particle exits through the nearest.
        const double to_px = (hx + cr) - p.x;
        const double to_mx = p.x + hx + cr;
        const double to_py = (hy + cr) - p.y;
        const double to_my = p.y + hy + cr;
        const double depth = std::min(std::min(to_px, to_mx), std::min(to_py, to_my));
        Vec2 outward;
        if (depth == to_px)
            outward = {1, 0};
        else if (depth == to_mx)
            outward = {-1, 0};
        else if (depth == to_py)
            outward = {0, 1};
        else
            outward = {0, -1};
        // The box recoils opposite to the particle's exit direction.
        const Vec2 impulse{-outward.x * depth, -outward.y * depth};
        const Vec2 arm{std::clamp(p.x, -hx, hx), std::clamp(p.y, -hy, hy)};
        impulse_sum += impulse;
        torque_sum += arm.cross(impulse);
        ++contacts;
    }
    if (contacts == 0) return state;

    const double inv_n = 1.0 / contacts;
    const Vec2 mean_impulse{impulse_sum.x * inv_n, impulse_sum.y * inv_n};
    const double mean_torque = torque_sum * inv_n;
    const double rot_inertia = (hx * hx + hy * hy) / 3.0;

    RigidBoxState next = state;
    next.center.x += params.friction * (c * mean_impulse.x - s * mean_impulse.y);
    next.center.y += params.friction * (s * mean_impulse.x + c * mean_impulse.y);
    next.yaw += params.friction * mean_torque / rot_inertia;
    next.particles = box_perimeter(next);
    return next;
}

BlobState make_blob(Vec3 center, Vec3 half_extents, int count, const OracleDomainParams& params,
                    std::uint64_t seed) {
    if (count < 2) throw ParameterError("make_blob: need at least 2 particles");
    params.validate();
    Rng rng(derive_seed(seed, "blob"));

    // Jittered lattice dense enough to subsample `count` points by FPS.
    PointSet lattice;
    const int per_axis = std::max(3, static_cast<int>(std::ceil(std::cbrt(count * 3.0))));
    for (int ix = 0; ix < per_axis; ++ix)
        for (int iy = 0; iy < per_axis; ++iy)
            for (int iz = 0; iz < per_axis; ++iz) {
                Vec3 u{(ix + 0.5) / per_axis * 2.0 - 1.0, (iy + 0.5) / per_axis * 2.0 - 1.0,
                       (iz + 0.5) / per_axis * 2.0 - 1.0};
                const double jitter = 0.35 / per_axis;
                u.x += rng.uniform(-jitter, jitter);
                u.y += rng.uniform(-jitter, jitter);
                u.z += rng.uniform(-jitter, jitter);
                lattice.push_back({center.x + u.x * half_extents.x,
                                   center.y + u.y * half_extents.y,
                                   center.z + u.z * half_extents.z});
            }
    const std::vector<int> idx = farthest_point_sample(lattice, count, 0);
    BlobState blob;
    blob.particles.reserve(count);
    for (int i : idx) blob.particles.push_back(lattice[i]);
    blob.stiffness = params.stiffness;
    blob.plasticity_threshold = params.plasticity_threshold;

    // Symmetrized 8-nearest-neighbor constraint graph.
    const int k = std::min(8, count - 1);
    std::set<std::pair<int, int>> pairs;
    for (int i = 0; i < count; ++i) {
        std::vector<std::pair<double, int>> dist;
        dist.reserve(count - 1);
        for (int j = 0; j < count; ++j)
            if (j != i) dist.push_back({(blob.particles[i] - blob.particles[j]).norm2(), j});
        std::sort(dist.begin(), dist.end());
        for (int m = 0; m < k; ++m)
            pairs.insert({std::min(i, dist[m].second), std::max(i, dist[m].second)});
    }
    for (const auto& [i, j] : pairs)
        blob.constraints.push_back({i, j, (blob.particles[i] - blob.particles[j]).norm()});
    return blob;
}

namespace {

Vec3 closest_point_on_segment(const Vec3& a, const Vec3& b, const Vec3& p) {
    const Vec3 ab = b - a;
    const double len2 = ab.norm2();
    if (len2 < 1e-24) return a;
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return a + ab * t;
}

}  // namespace

BlobState step_blob(const BlobState& state, const PointSet& hand_particles_before,
                    const DisplacementField& field, const OracleDomainParams& params) {
    if (hand_particles_before.size() != field.size())
        throw ParameterError("step_blob: field length " + std::to_string(field.size()) +
                             " does not match hand particle count " +
                             std::to_string(hand_particles_before.size()));
    BlobState next = state;
    PointSet& p = next.particles;
    const double cr = params.contact_radius;

    auto project_contacts = [&]() {
        for (std::size_t h = 0; h < hand_particles_before.size(); ++h) {
            const Vec3 a = hand_particles_before[h];
            const Vec3 b = a + field[h];
            for (Vec3& q : p) {
                const Vec3 closest = closest_point_on_segment(a, b, q);
                const Vec3 radial = q - closest;
                const double d = radial.norm();
                if (d >= cr) continue;
                if (d < 1e-12) {
                    q = closest + Vec3{0, 0, cr};
                } else {
                    q = closest + radial * (cr / d);
                }
            }
        }
    };

    // (i) Initial projection out of each hand particle's swept sphere.
    project_contacts();

    // Strain past the yield threshold flows instead of springing back: the
    // rest length follows the deformed length. Checked after every sweep so
    // material held by a contact takes its set while deformed.
    auto plastic_flow = [&]() {
        for (DistanceConstraint& cst : next.constraints) {
            const double d = (p[cst.i] - p[cst.j]).norm();
            if (std::abs(d - cst.rest) / cst.rest > params.plasticity_threshold) cst.rest = d;
        }
    };
    plastic_flow();

    // (ii) Distance-constraint relaxation with contacts re-enforced each
    // sweep, (iii) plastic rest-length flow interleaved.
    for (int it = 0; it < kBlobSolverIterations; ++it) {
        for (const DistanceConstraint& cst : next.constraints) {
            const Vec3 delta = p[cst.i] - p[cst.j];
            const double d = delta.norm();
            if (d < 1e-12) continue;
            const Vec3 corr = delta * (params.stiffness * 0.5 * (d - cst.rest) / d);
            p[cst.i] -= corr;
            p[cst.j] += corr;
        }
        project_contacts();
        plastic_flow();
    }
    return next;
}

PointSet observe(const PointSet& particles, const OracleDomainParams& params, std::uint64_t seed) {
    if (params.observation_noise_sigma == 0.0) return particles;
    Rng rng(derive_seed(seed, "observe"));
    PointSet out;
    out.reserve(particles.size());
    for (const Vec3& p : particles) {
        out.push_back({p.x + rng.gauss(0.0, params.observation_noise_sigma),
                       p.y + rng.gauss(0.0, params.observation_noise_sigma),
                       p.z + rng.gauss(0.0, params.observation_noise_sigma)});
    }
    return out;
}

PointSet observe(const RigidBoxState& state, const OracleDomainParams& params,
                 std::uint64_t seed) {
    return observe(state.particles, params, seed);
}

PointSet observe(const BlobState& state, const OracleDomainParams& params, std::uint64_t seed) {
    return observe(state.particles, params, seed);
}

PointSet object_particles(const ObjectState& state) {
    return state.task == TaskKind::Push ? state.box.particles : state.blob.particles;
}

ObjectState step_object(const ObjectState& state, const PointSet& hand_particles_before,
                        const DisplacementField& field, const OracleDomainParams& params) {
    ObjectState next = state;
    if (state.task == TaskKind::Push)
        next.box = step_rigid_box(state.box, hand_particles_before, field, params);
    else
        next.blob = step_blob(state.blob, hand_particles_before, field, params);
    return next;
}

ObjectState make_initial_object(TaskKind task, int object_count, const OracleDomainParams& params,
                                std::uint64_t seed) {
    Rng rng(derive_seed(seed, "object-init"));
    ObjectState state;
    state.task = task;
    if (task == TaskKind::Push) {
        const Vec2 center{rng.uniform(-0.01, 0.01), rng.uniform(-0.01, 0.01)};
        const double yaw = rng.uniform(-0.2, 0.2);
        state.box = make_rigid_box(center, yaw, {0.045, 0.03}, 0.015,
                                   std::max(8, object_count));
    } else {
        const Vec3 center{rng.uniform(-0.008, 0.008), rng.uniform(-0.008, 0.008), 0.016};
        state.blob = make_blob(center, {0.032, 0.032, 0.014}, object_count, params, rng.next_u64());
    }
    return state;
}

}  // namespace pw
