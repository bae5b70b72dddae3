#include <doctest.h>

#include <cmath>
#include <limits>

#include "pw/error.hpp"
#include "pw/geometry.hpp"
#include "pw/oracle.hpp"
#include "pw/rng.hpp"

using namespace pw;

namespace {

bool same_points(const PointSet& a, const PointSet& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!(a[i] == b[i])) return false;
    return true;
}

}  // namespace

TEST_CASE("domain params validate and derive the real proxy") {
    const OracleDomainParams sim = sim_domain();
    CHECK(sim.label == "sim");
    CHECK(sim.observation_noise_sigma == 0.0);
    const OracleDomainParams real = real_proxy_domain();
    CHECK(real.label == "real-proxy");
    CHECK(real.friction == doctest::Approx(sim.friction * 0.8));
    CHECK(real.stiffness == doctest::Approx(sim.stiffness * 0.7));
    CHECK(real.plasticity_threshold == doctest::Approx(sim.plasticity_threshold * 0.9));
    CHECK(real.observation_noise_sigma == doctest::Approx(0.002));

    OracleDomainParams bad = sim;
    bad.stiffness = 1.5;
    CHECK_THROWS_AS(bad.validate(), ParameterError);
    bad = sim;
    bad.observation_noise_sigma = -1.0;
    CHECK_THROWS_AS(bad.validate(), ParameterError);
    bad = sim;
    bad.label = "weird";
    CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("rigid box stepping") {
    const OracleDomainParams params = sim_domain();
    const RigidBoxState box = make_rigid_box({0, 0}, 0.0, {0.04, 0.03}, 0.015, 24);
    REQUIRE(box.particles.size() == 24);

    SUBCASE("zero field with no contact leaves the state unchanged") {
        PointSet hand{{0.2, 0.2, 0.015}, {0.3, 0.0, 0.015}};
        DisplacementField zero(hand.size(), Vec3{});
        const RigidBoxState next = step_rigid_box(box, hand, zero, params);
        CHECK(next.center.x == box.center.x);
        CHECK(next.center.y == box.center.y);
        CHECK(next.yaw == box.yaw);
        CHECK(same_points(next.particles, box.particles));
    }

    SUBCASE("single contact through the center translates without rotation") {
        // Ends at box-frame (-0.045, 0): resolves through the -x face.
        PointSet hand{{-0.055, 0.0, 0.015}};
        DisplacementField push{{0.010, 0.0, 0.0}};
        const RigidBoxState next = step_rigid_box(box, hand, push, params);
        const double depth = (-0.045) + 0.04 + params.contact_radius;
        CHECK(next.yaw == doctest::Approx(0.0));
        CHECK(next.center.x == doctest::Approx(params.friction * depth));
        CHECK(next.center.y == doctest::Approx(0.0));
    }

    SUBCASE("two symmetric opposite tangential contacts rotate in place") {
        PointSet hand{{0.02, 0.043, 0.015}, {-0.02, -0.043, 0.015}};
        DisplacementField push{{0.0, -0.005, 0.0}, {0.0, 0.005, 0.0}};
        const RigidBoxState next = step_rigid_box(box, hand, push, params);
        // Scripted reference: sum impulses and moments by hand.
        const double hy = 0.03, cr = params.contact_radius;
        const double e1 = 0.043 - 0.005;  // end y of the first particle
        const double depth = (hy + cr) - e1;
        const double torque1 = 0.02 * (-depth);   // arm (0.02, hy) x impulse (0, -depth)
        const double torque2 = (-0.02) * depth;   // arm (-0.02, -hy) x impulse (0, depth)
        const double inertia = (0.04 * 0.04 + 0.03 * 0.03) / 3.0;
        const double expect_dyaw = params.friction * 0.5 * (torque1 + torque2) / inertia;
        CHECK(next.center.x == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(next.center.y == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(next.yaw == doctest::Approx(expect_dyaw).epsilon(1e-12));
    }

    SUBCASE("half extents never change and particles stay rigid") {
        Rng rng(101);
        RigidBoxState state = box;
        PointSet hand{{-0.06, 0.01, 0.015}};
        for (int step = 0; step < 30; ++step) {
            DisplacementField push{{rng.uniform(0.0, 0.01), rng.uniform(-0.004, 0.004), 0.0}};
            const RigidBoxState next = step_rigid_box(state, hand, push, params);
            CHECK(next.half_extents.x == box.half_extents.x);
            CHECK(next.half_extents.y == box.half_extents.y);
            for (std::size_t i = 0; i < next.particles.size(); ++i)
                for (std::size_t j = i + 1; j < next.particles.size(); ++j) {
                    const double before = (box.particles[i] - box.particles[j]).norm();
                    const double after = (next.particles[i] - next.particles[j]).norm();
                    CHECK(std::abs(before - after) < 1e-9);
                }
            hand[0] += push[0];
            state = next;
        }
        // Regenerated perimeter stays consistent with stored particles.
        CHECK(same_points(state.particles, box_perimeter(state)));
    }

    SUBCASE("stepping is deterministic") {
        PointSet hand{{-0.05, 0.005, 0.015}};
        DisplacementField push{{0.008, 0.001, 0.0}};
        const RigidBoxState a = step_rigid_box(box, hand, push, params);
        const RigidBoxState b = step_rigid_box(box, hand, push, params);
        CHECK(a.center.x == b.center.x);
        CHECK(a.yaw == b.yaw);
        CHECK(same_points(a.particles, b.particles));
    }

    SUBCASE("field length must match the hand count") {
        PointSet hand{{0, 0, 0}};
        CHECK_THROWS_AS(step_rigid_box(box, hand, DisplacementField{}, params), ParameterError);
    }
}

TEST_CASE("blob stepping") {
    OracleDomainParams params = sim_domain();
    const BlobState blob = make_blob({0, 0, 0.016}, {0.03, 0.03, 0.012}, 24, params, 7);
    REQUIRE(blob.particles.size() == 24);
    REQUIRE(!blob.constraints.empty());

    SUBCASE("no contact and zero field is a fixed point at rest") {
        PointSet hand{{0.5, 0.5, 0.5}};
        DisplacementField zero(1, Vec3{});
        const BlobState next = step_blob(blob, hand, zero, params);
        CHECK(same_points(next.particles, blob.particles));
    }

    SUBCASE("uniform translation far from the blob changes nothing") {
        PointSet hand{{0.4, 0.4, 0.4}, {0.45, 0.4, 0.4}};
        DisplacementField move(2, Vec3{0.01, 0.0, 0.0});
        const BlobState next = step_blob(blob, hand, move, params);
        CHECK(same_points(next.particles, blob.particles));
    }

    SUBCASE("a poke displaces the nearest particle") {
        // Aim straight down at the highest particle.
        std::size_t top = 0;
        for (std::size_t i = 0; i < blob.particles.size(); ++i)
            if (blob.particles[i].z > blob.particles[top].z) top = i;
        const Vec3 target = blob.particles[top];
        PointSet hand{{target.x, target.y, target.z + 0.05}};
        DisplacementField push{{0.0, 0.0, -(0.05 + params.contact_radius * 0.5)}};
        const BlobState next = step_blob(blob, hand, push, params);
        CHECK((next.particles[top] - target).norm() > 1e-4);
        CHECK(next.particles.size() == blob.particles.size());
    }

    SUBCASE("gentle elastic poke returns to the rest shape") {
        OracleDomainParams p = params;
        p.plasticity_threshold = std::numeric_limits<double>::infinity();
        std::size_t top = 0;
        for (std::size_t i = 0; i < blob.particles.size(); ++i)
            if (blob.particles[i].z > blob.particles[top].z) top = i;
        const Vec3 target = blob.particles[top];
        BlobState state = blob;
        PointSet hand{{target.x, target.y, target.z + p.contact_radius + 0.001}};
        for (int step = 0; step < 2; ++step) {
            DisplacementField push{{0.0, 0.0, -0.001}};
            state = step_blob(state, hand, push, p);
            hand[0].z -= 0.001;
        }
        CHECK((state.particles[top] - target).norm() > 1e-4);  // contact happened
        // Release and relax: 10 zero-action solves = K*10 iterations.
        PointSet far{{1.0, 1.0, 1.0}};
        DisplacementField none(1, Vec3{});
        for (int step = 0; step < 10; ++step) state = step_blob(state, far, none, p);
        CHECK(chamfer_distance(state.particles, blob.particles) < 1e-6);
    }

    SUBCASE("single-constraint trace: residual set iff strain passed yield") {
        // Two particles, one constraint; the hand sweeps in along +x and
        // compresses the pair, then releases.
        auto run = [&](double plasticity) {
            OracleDomainParams p = params;
            p.plasticity_threshold = plasticity;
            BlobState tiny;
            tiny.particles = {{0, 0, 0}, {0.02, 0, 0}};
            tiny.constraints = {{0, 1, 0.02}};
            PointSet hand{{-0.05, 0, 0}};
            DisplacementField push{{0.0444, 0.0, 0.0}};  // ends within radius of p0
            BlobState state = step_blob(tiny, hand, push, p);
            PointSet far{{1.0, 1.0, 1.0}};
            DisplacementField none(1, Vec3{});
            for (int step = 0; step < 10; ++step) state = step_blob(state, far, none, p);
            return state;
        };
        const BlobState elastic = run(std::numeric_limits<double>::infinity());
        const BlobState plastic = run(0.05);
        const double elastic_len = (elastic.particles[0] - elastic.particles[1]).norm();
        const double plastic_len = (plastic.particles[0] - plastic.particles[1]).norm();
        CHECK(std::abs(elastic_len - 0.02) < 1e-6);   // sprang back to rest
        CHECK(std::abs(plastic_len - 0.02) > 1e-3);   // kept a permanent set
        CHECK(plastic.constraints[0].rest != doctest::Approx(0.02));
        CHECK(elastic.constraints[0].rest == 0.02);
    }

    SUBCASE("scripted single-constraint trace of one solve") {
        // Reference trace reproducing one step_blob call: projection, then K
        // sweeps each followed by contact re-projection and plastic flow.
        BlobState tiny;
        tiny.particles = {{0, 0, 0}, {0.02, 0, 0}};
        tiny.constraints = {{0, 1, 0.02}};
        PointSet hand{{-0.05, 0, 0}};
        DisplacementField push{{0.0444, 0.0, 0.0}};
        const BlobState next = step_blob(tiny, hand, push, params);

        Vec3 p0{0, 0, 0}, p1{0.02, 0, 0};
        double rest = 0.02;
        const Vec3 hand_end = hand[0] + push[0];
        auto project = [&]() { p0.x = std::max(p0.x, hand_end.x + params.contact_radius); };
        auto flow = [&]() {
            const double d = (p0 - p1).norm();
            if (std::abs(d - rest) / rest > params.plasticity_threshold) rest = d;
        };
        project();
        flow();
        for (int it = 0; it < kBlobSolverIterations; ++it) {
            const Vec3 delta = p0 - p1;
            const double d = delta.norm();
            const Vec3 corr = delta * (params.stiffness * 0.5 * (d - rest) / d);
            p0 -= corr;
            p1 += corr;
            project();
            flow();
        }
        CHECK((next.particles[0] - p0).norm() < 1e-12);
        CHECK((next.particles[1] - p1).norm() < 1e-12);
        CHECK(next.constraints[0].rest == doctest::Approx(rest).epsilon(1e-12));
    }

    SUBCASE("deterministic and size-checked") {
        PointSet hand{{0.0, 0.0, 0.04}};
        DisplacementField push{{0.0, 0.0, -0.02}};
        const BlobState a = step_blob(blob, hand, push, params);
        const BlobState b = step_blob(blob, hand, push, params);
        CHECK(same_points(a.particles, b.particles));
        CHECK_THROWS_AS(step_blob(blob, hand, DisplacementField{}, params), ParameterError);
    }
}

TEST_CASE("observation noise model") {
    const BlobState blob = make_blob({0, 0, 0.02}, {0.03, 0.03, 0.012}, 32, sim_domain(), 3);

    SUBCASE("sigma zero returns exact particles") {
        const PointSet obs = observe(blob, sim_domain(), 42);
        CHECK(same_points(obs, blob.particles));
    }

    SUBCASE("fixed seed reproduces the observation") {
        const OracleDomainParams real = real_proxy_domain();
        const PointSet a = observe(blob, real, 42);
        const PointSet b = observe(blob, real, 42);
        CHECK(same_points(a, b));
        const PointSet c = observe(blob, real, 43);
        CHECK(!same_points(a, c));
    }

    SUBCASE("empirical noise std within 5%") {
        OracleDomainParams real = real_proxy_domain();
        real.observation_noise_sigma = 0.002;
        double sum[3] = {0, 0, 0}, sum2[3] = {0, 0, 0};
        int count = 0;
        for (int rep = 0; rep < 320; ++rep) {
            const PointSet obs = observe(blob, real, 1000 + rep);
            for (std::size_t i = 0; i < obs.size(); ++i) {
                const Vec3 noise = obs[i] - blob.particles[i];
                const double v[3] = {noise.x, noise.y, noise.z};
                for (int a = 0; a < 3; ++a) {
                    sum[a] += v[a];
                    sum2[a] += v[a] * v[a];
                }
                ++count;
            }
        }
        for (int a = 0; a < 3; ++a) {
            const double mean = sum[a] / count;
            const double std = std::sqrt(sum2[a] / count - mean * mean);
            CHECK(std == doctest::Approx(0.002).epsilon(0.05));
        }
    }
}

TEST_CASE("initial objects are seeded deterministically") {
    const OracleDomainParams params = sim_domain();
    const ObjectState a = make_initial_object(TaskKind::Reshape, 24, params, 5);
    const ObjectState b = make_initial_object(TaskKind::Reshape, 24, params, 5);
    CHECK(same_points(a.blob.particles, b.blob.particles));
    const ObjectState c = make_initial_object(TaskKind::Reshape, 24, params, 6);
    CHECK(!same_points(a.blob.particles, c.blob.particles));

    const ObjectState box = make_initial_object(TaskKind::Push, 24, params, 5);
    CHECK(box.box.particles.size() == 24);
    CHECK(object_particles(box).size() == 24);
}
