#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pw/vec3.hpp"

namespace pw {

// Material / sensing parameters defining an interaction domain. The
// "real-proxy" domain perturbs the sim physics and adds observation noise to
// stand in for the sim-to-real gap.
struct OracleDomainParams {
    double friction = 0.9;
    double stiffness = 0.55;
    double plasticity_threshold = 0.06;   // strain above which deformation is permanent
    double contact_radius = 0.012;        // meters
    double observation_noise_sigma = 0.0; // meters, 0 in "sim"
    std::string label = "sim";

    void validate() const;
};

OracleDomainParams sim_domain();
// sim params scaled by {0.8, 0.7, 0.9} for friction/stiffness/plasticity,
// plus 2 mm observation noise.
OracleDomainParams real_proxy_domain();

// Quasi-static planar rigid box. Particles are perimeter samples of the
// footprint lifted to the push-plane height; they are always a rigid
// transform of the canonical perimeter.
struct RigidBoxState {
    Vec2 center;
    double yaw = 0.0;
    Vec2 half_extents{0.045, 0.03};
    double plane_z = 0.015;
    double slab_half = 0.02;  // vertical half-window within which hand particles touch
    int perimeter_count = 24;
    PointSet particles;
};

RigidBoxState make_rigid_box(Vec2 center, double yaw, Vec2 half_extents, double plane_z,
                             int perimeter_count);

// Canonical perimeter points for the given pose.
PointSet box_perimeter(const RigidBoxState& state);

RigidBoxState step_rigid_box(const RigidBoxState& state, const PointSet& hand_particles_before,
                             const DisplacementField& field, const OracleDomainParams& params);

// Position-based deformable blob with per-constraint plastic rest-length flow.
struct DistanceConstraint {
    int i = 0, j = 0;
    double rest = 0.0;
};

struct BlobState {
    PointSet particles;
    std::vector<DistanceConstraint> constraints;
    double stiffness = 0.35;             // construction-time defaults; step uses params
    double plasticity_threshold = 0.06;
};

// Jittered-lattice slab subsampled by FPS; constraint graph is symmetrized
// 8-nearest-neighbors over the initial particles.
BlobState make_blob(Vec3 center, Vec3 half_extents, int count, const OracleDomainParams& params,
                    std::uint64_t seed);

// One PBD solve: swept-sphere contact projection, K=10 constraint sweeps with
// contacts re-enforced after each, then plastic rest-length update. Yield is
// judged on the peak strain reached within the step; yielded constraints take
// the held imprint as their new rest length.
BlobState step_blob(const BlobState& state, const PointSet& hand_particles_before,
                    const DisplacementField& field, const OracleDomainParams& params);

// Number of constraint iterations per step.
inline constexpr int kBlobSolverIterations = 10;

// Object particles plus isotropic Gaussian observation noise (sigma from
// params; zero in the sim domain). Deterministic for a fixed seed.
PointSet observe(const PointSet& particles, const OracleDomainParams& params, std::uint64_t seed);
PointSet observe(const RigidBoxState& state, const OracleDomainParams& params, std::uint64_t seed);
PointSet observe(const BlobState& state, const OracleDomainParams& params, std::uint64_t seed);

// Task-level object wrapper used by data collection and MPC execution.
enum class TaskKind { Push, Reshape };

struct ObjectState {
    TaskKind task = TaskKind::Reshape;
    RigidBoxState box;
    BlobState blob;
};

PointSet object_particles(const ObjectState& state);
ObjectState step_object(const ObjectState& state, const PointSet& hand_particles_before,
                        const DisplacementField& field, const OracleDomainParams& params);

// Scene-canonical initial object: box or blob near the origin with seeded
// pose jitter. object_count applies to the blob; boxes use perimeter_count.
ObjectState make_initial_object(TaskKind task, int object_count, const OracleDomainParams& params,
                                std::uint64_t seed);

}  // namespace pw
