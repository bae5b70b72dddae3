#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "pw/dataset.hpp"
#include "pw/error.hpp"
#include "pw/geometry.hpp"
#include "pw/model.hpp"
#include "pw/rng.hpp"
#include "pw/serialize.hpp"

using namespace pw;

namespace {

ModelConfig tiny_config() {
    ModelConfig c;
    c.hidden_dim = 6;
    c.propagation_steps = 2;
    c.connection_radius = 0.05;
    c.mlp_depth = 2;
    return c;
}

// 4 hand + 8 object particles clustered inside the connection radius.
ParticleState twelve_particle_state(Rng& rng) {
    ParticleState state;
    for (int i = 0; i < 4; ++i)
        state.hand.push_back({rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02),
                              rng.uniform(0.0, 0.03)});
    for (int i = 0; i < 8; ++i)
        state.object.push_back({rng.uniform(-0.025, 0.025), rng.uniform(-0.025, 0.025),
                                rng.uniform(-0.01, 0.02)});
    return state;
}

DisplacementField random_action(std::size_t n, Rng& rng, double scale = 0.01) {
    DisplacementField a(n);
    for (Vec3& v : a)
        v = {rng.uniform(-scale, scale), rng.uniform(-scale, scale), rng.uniform(-scale, scale)};
    return a;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max(1e-8, std::max(std::abs(a), std::abs(b)));
}

Transition make_transition(Rng& rng) {
    Transition t;
    ParticleState s = twelve_particle_state(rng);
    t.hand = s.hand;
    t.object = s.object;
    t.action = random_action(s.hand.size(), rng);
    t.next_object = s.object;
    for (Vec3& p : t.next_object)
        p += {rng.uniform(-0.004, 0.004), rng.uniform(-0.004, 0.004), rng.uniform(-0.004, 0.004)};
    return t;
}

}  // namespace

TEST_CASE("graph input carries group one-hots and the action channel") {
    const ModelConfig config = tiny_config();
    Rng rng(3);
    const ParticleState state = twelve_particle_state(rng);
    const DisplacementField action = random_action(4, rng);
    const GraphInput g = build_graph_input(config, state, action);
    CHECK(g.hand_count == 4);
    CHECK(g.object_count == 8);
    REQUIRE(g.node_feat.rows == 12);
    for (int i = 0; i < 4; ++i) {
        CHECK(g.node_feat.at(i, 0) == 1.0);
        CHECK(g.node_feat.at(i, 1) == 0.0);
        CHECK(g.node_feat.at(i, 2) ==
              doctest::Approx(action[i].x / config.connection_radius));
    }
    for (int i = 4; i < 12; ++i) {
        CHECK(g.node_feat.at(i, 0) == 0.0);
        CHECK(g.node_feat.at(i, 1) == 1.0);
        CHECK(g.node_feat.at(i, 2) == 0.0);
    }
    CHECK(!g.receiver.empty());
    CHECK_THROWS_AS(build_graph_input(config, state, random_action(3, rng)), ParameterError);
}

TEST_CASE("freshly initialized model is the identity map") {
    const ModelConfig config = tiny_config();
    const ModelParams params = init_model(config, 42);
    Rng rng(7);
    const ParticleState state = twelve_particle_state(rng);
    const DisplacementField action = random_action(4, rng);
    const PointSet pred = predict(params, config, state, action);
    REQUIRE(pred.size() == state.object.size());
    for (std::size_t i = 0; i < pred.size(); ++i) CHECK((pred[i] - state.object[i]).norm() == 0.0);
}

TEST_CASE("prediction is exactly translation equivariant") {
    const ModelConfig config = tiny_config();
    ModelParams params = init_model(config, 42);
    // Give the decoder real weights so predictions are non-trivial.
    Rng wrng(55);
    for (double& v : params.decoder.layers.back().w.v) v = wrng.gauss(0.0, 0.05);
    Rng rng(11);
    const ParticleState state = twelve_particle_state(rng);
    const DisplacementField action = random_action(4, rng);
    const PointSet base = predict(params, config, state, action);
    for (int trial = 0; trial < 20; ++trial) {
        const Vec3 shift{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
        ParticleState moved = state;
        for (Vec3& p : moved.hand) p += shift;
        for (Vec3& p : moved.object) p += shift;
        const PointSet out = predict(params, config, moved, action);
        for (std::size_t i = 0; i < out.size(); ++i)
            CHECK((out[i] - (base[i] + shift)).norm() < 1e-6);
    }
}

TEST_CASE("prediction is exactly permutation equivariant") {
    const ModelConfig config = tiny_config();
    ModelParams params = init_model(config, 42);
    Rng wrng(56);
    for (double& v : params.decoder.layers.back().w.v) v = wrng.gauss(0.0, 0.05);
    Rng rng(13);
    const ParticleState state = twelve_particle_state(rng);
    const DisplacementField action = random_action(4, rng);
    const PointSet base = predict(params, config, state, action);

    // Permute object particles.
    std::vector<std::size_t> perm{5, 2, 7, 0, 3, 6, 1, 4};
    ParticleState shuffled = state;
    for (std::size_t i = 0; i < perm.size(); ++i) shuffled.object[i] = state.object[perm[i]];
    const PointSet out = predict(params, config, shuffled, action);
    for (std::size_t i = 0; i < perm.size(); ++i) {
        CHECK(out[i].x == base[perm[i]].x);
        CHECK(out[i].y == base[perm[i]].y);
        CHECK(out[i].z == base[perm[i]].z);
    }

    // Permute hand particles (with their action entries).
    std::vector<std::size_t> hperm{2, 0, 3, 1};
    ParticleState hshuffled = state;
    DisplacementField haction(4);
    for (std::size_t i = 0; i < hperm.size(); ++i) {
        hshuffled.hand[i] = state.hand[hperm[i]];
        haction[i] = action[hperm[i]];
    }
    const PointSet hout = predict(params, config, hshuffled, haction);
    for (std::size_t i = 0; i < hout.size(); ++i) {
        CHECK(hout[i].x == base[i].x);
        CHECK(hout[i].y == base[i].y);
        CHECK(hout[i].z == base[i].z);
    }
}

TEST_CASE("analytic gradients match central finite differences") {
    const ModelConfig config = tiny_config();
    ModelParams params = init_model(config, 99);
    Rng wrng(57);
    for (double& v : params.decoder.layers.back().w.v) v = wrng.gauss(0.0, 0.05);

    Rng rng(17);
    TransitionBatch batch{make_transition(rng), make_transition(rng)};

    for (LossKind kind : {LossKind::Mse, LossKind::Chamfer, LossKind::Emd}) {
        ModelParams grads = make_model_grads(params);
        const double base_loss = gradients(params, config, batch, kind, grads);
        CHECK(std::isfinite(base_loss));

        auto named = params.named_tensors();
        auto grad_named = grads.named_tensors();
        const double h = 1e-4;
        double worst = 0.0;
        for (std::size_t t = 0; t < named.size(); ++t) {
            Tensor* tensor = named[t].second;
            const Tensor* grad = grad_named[t].second;
            for (std::size_t i = 0; i < tensor->v.size(); i += 3) {
                const double keep = tensor->v[i];
                tensor->v[i] = keep + h;
                ModelParams scratch = make_model_grads(params);
                const double up = gradients(params, config, batch, kind, scratch);
                tensor->v[i] = keep - h;
                scratch = make_model_grads(params);
                const double down = gradients(params, config, batch, kind, scratch);
                tensor->v[i] = keep;
                const double fd = (up - down) / (2 * h);
                if (std::abs(fd) > 1e-10 || std::abs(grad->v[i]) > 1e-10)
                    worst = std::max(worst, rel_err(grad->v[i], fd));
            }
        }
        INFO("loss kind ", loss_kind_name(kind));
        CHECK(worst < 1e-3);
    }
}

TEST_CASE("duplicating the batch leaves the mean gradient unchanged") {
    const ModelConfig config = tiny_config();
    ModelParams params = init_model(config, 31);
    Rng wrng(58);
    for (double& v : params.decoder.layers.back().w.v) v = wrng.gauss(0.0, 0.05);
    Rng rng(19);
    TransitionBatch batch{make_transition(rng), make_transition(rng)};
    TransitionBatch doubled = batch;
    doubled.insert(doubled.end(), batch.begin(), batch.end());

    ModelParams g1 = make_model_grads(params);
    ModelParams g2 = make_model_grads(params);
    const double l1 = gradients(params, config, batch, LossKind::Mse, g1);
    const double l2 = gradients(params, config, doubled, LossKind::Mse, g2);
    CHECK(l1 == doctest::Approx(l2).epsilon(1e-12));
    auto n1 = g1.named_tensors();
    auto n2 = g2.named_tensors();
    for (std::size_t t = 0; t < n1.size(); ++t)
        for (std::size_t i = 0; i < n1[t].second->v.size(); ++i)
            CHECK(std::abs(n1[t].second->v[i] - n2[t].second->v[i]) < 1e-9);
}

TEST_CASE("gradient of an exactly-zero loss is zero on the decoder bias") {
    const ModelConfig config = tiny_config();
    const ModelParams params = init_model(config, 5);  // decoder zeroed at init
    Rng rng(23);
    Transition t = make_transition(rng);
    t.next_object = t.object;  // prediction == target == current object
    ModelParams grads = make_model_grads(params);
    const double loss = gradients(params, config, {t}, LossKind::Mse, grads);
    CHECK(loss == 0.0);
    for (double v : grads.decoder.layers.back().b.v) CHECK(v == 0.0);
}

TEST_CASE("loss kinds delegate to the core distances") {
    Rng rng(29);
    const Transition t = make_transition(rng);
    CHECK(loss_value(t.object, t.object, LossKind::Mse) == 0.0);
    CHECK(loss_value(t.object, t.object, LossKind::Chamfer) == 0.0);
    CHECK(loss_value(t.object, t.object, LossKind::Emd) == 0.0);
    PointSet offset = t.object;
    for (Vec3& p : offset) p += {1, 0, 0};
    CHECK(loss_value(offset, t.object, LossKind::Mse) == doctest::Approx(1.0));
    CHECK(loss_value(offset, t.object, LossKind::Chamfer) ==
          doctest::Approx(chamfer_distance(offset, t.object)));
}

TEST_CASE("rollout composes one-step predictions") {
    const ModelConfig config = tiny_config();
    ModelParams params = init_model(config, 77);
    Rng wrng(59);
    for (double& v : params.decoder.layers.back().w.v) v = wrng.gauss(0.0, 0.03);
    Rng rng(31);
    const ParticleState state = twelve_particle_state(rng);

    SUBCASE("horizon zero returns the initial object") {
        const auto states = rollout(params, config, state, {});
        REQUIRE(states.size() == 1);
        CHECK(mse_paired(states[0], state.object) == 0.0);
    }
    SUBCASE("zero decoder keeps the object fixed") {
        const ModelParams frozen = init_model(config, 1);
        std::vector<DisplacementField> actions(5, random_action(4, rng));
        const auto states = rollout(frozen, config, state, actions);
        REQUIRE(states.size() == 6);
        for (const PointSet& s : states) CHECK(mse_paired(s, state.object) == 0.0);
    }
    SUBCASE("three steps equal three manual predicts") {
        std::vector<DisplacementField> actions;
        for (int i = 0; i < 3; ++i) actions.push_back(random_action(4, rng));
        const auto states = rollout(params, config, state, actions);

        PointSet hand = state.hand, object = state.object;
        for (int i = 0; i < 3; ++i) {
            object = predict(params, config, {hand, object}, actions[i]);
            for (std::size_t k = 0; k < hand.size(); ++k) hand[k] += actions[i][k];
            CHECK(mse_paired(states[i + 1], object) == 0.0);
        }
    }
}

namespace {

// Five scripted rigid-push trajectories: a small particle wall sweeps straight
// through a light box from a random direction.
std::vector<Trajectory> wall_push_dataset(int count, int horizon, std::uint64_t seed) {
    std::vector<Trajectory> out;
    const OracleDomainParams params = sim_domain();
    for (int t = 0; t < count; ++t) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
        Trajectory traj;
        traj.embodiment_name = "wall";
        traj.domain_label = "sim";
        traj.oracle_params = params;
        traj.seed = seed;
        RigidBoxState box =
            make_rigid_box({rng.uniform(-0.01, 0.01), rng.uniform(-0.01, 0.01)},
                           rng.uniform(-0.4, 0.4), {0.03, 0.02}, 0.015, 20);
        const double angle = rng.uniform(0, 6.283);
        const Vec3 dir{std::cos(angle), std::sin(angle), 0.0};
        const Vec3 side{-dir.y, dir.x, 0.0};
        PointSet hand;
        const Vec3 start = Vec3{box.center.x, box.center.y, 0.0} - dir * 0.052;
        for (int i = -2; i <= 2; ++i)
            hand.push_back(start + side * (0.012 * i) + Vec3{0, 0, 0.015});
        const Vec3 step = dir * 0.008;
        for (int f = 0; f < horizon; ++f) {
            Frame frame;
            frame.hand = hand;
            snap_f32(frame.hand);
            frame.object = box.particles;
            snap_f32(frame.object);
            PointSet hand_next = hand;
            for (Vec3& h : hand_next) h += step;
            snap_f32(hand_next);
            frame.action.resize(hand.size());
            for (std::size_t i = 0; i < hand.size(); ++i)
                frame.action[i] = snap_f32(hand_next[i] - frame.hand[i]);
            box = step_rigid_box(box, frame.hand, frame.action, params);
            traj.frames.push_back(std::move(frame));
            hand = hand_next;
        }
        Frame last;
        last.hand = hand;
        snap_f32(last.hand);
        last.object = box.particles;
        snap_f32(last.object);
        last.action.assign(hand.size(), Vec3{});
        traj.frames.push_back(std::move(last));
        traj.validate();
        out.push_back(std::move(traj));
    }
    return out;
}

}  // namespace

TEST_CASE("200 training steps halve the error on a rigid-push dataset") {
    ModelConfig config;
    config.hidden_dim = 8;
    config.propagation_steps = 2;
    config.connection_radius = 0.05;
    config.mlp_depth = 2;
    const auto trajs = wall_push_dataset(5, 14, 99);

    MixtureStream stream({{&trajs, 1.0}}, 8, 5);
    TrainSettings train;
    train.steps = 200;
    train.epoch_steps = 50;
    train.seed = 12;
    train.augment_rotation = false;
    train.adam.lr = 0.005;

    const auto eval = flatten_transitions(trajs);
    const ModelParams initial = init_model(config, train.seed);
    const double initial_mse = eval_one_step_mse(initial, config, eval);
    const TrainResult result = train_model(config, stream, train, &eval);
    const double final_mse = eval_one_step_mse(result.params, config, eval);
    CHECK(final_mse < 0.5 * initial_mse);
    CHECK(result.log.size() == 4);
    CHECK(std::isfinite(result.log.back().val_loss));

    SUBCASE("lr zero keeps the initialization") {
        MixtureStream s2({{&trajs, 1.0}}, 8, 5);
        TrainSettings frozen = train;
        frozen.adam.lr = 0.0;
        frozen.steps = 20;
        const TrainResult r2 = train_model(config, s2, frozen, nullptr);
        auto a = r2.params.named_tensors();
        auto b = initial.named_tensors();
        for (std::size_t t = 0; t < a.size(); ++t)
            for (std::size_t i = 0; i < a[t].second->v.size(); ++i)
                CHECK(a[t].second->v[i] == b[t].second->v[i]);
    }
    SUBCASE("same seed twice gives identical parameters") {
        MixtureStream s3({{&trajs, 1.0}}, 8, 5);
        const TrainResult r3 = train_model(config, s3, train, nullptr);
        auto a = result.params.named_tensors();
        auto b = r3.params.named_tensors();
        for (std::size_t t = 0; t < a.size(); ++t)
            for (std::size_t i = 0; i < a[t].second->v.size(); ++i)
                CHECK(a[t].second->v[i] == b[t].second->v[i]);
    }
}

TEST_CASE("checkpoints round trip bit-exact") {
    const ModelConfig config = tiny_config();
    ModelParams params = init_model(config, 123);
    Rng wrng(60);
    for (double& v : params.decoder.layers.back().w.v) v = wrng.gauss(0.0, 0.05);
    // Quantize to the storage width first so save/load is identity.
    for (auto& [name, t] : params.named_tensors())
        for (double& v : t->v) v = static_cast<double>(static_cast<float>(v));

    CheckpointMeta meta;
    meta.config = config;
    meta.training_seed = 9;
    meta.dataset_fingerprints = {"aa", "bb"};
    meta.config_hash = "cc";
    const std::string path = "/tmp/pw_test_ckpt.pwck";
    save_checkpoint(path, params, meta);
    const Checkpoint loaded = load_checkpoint(path);
    CHECK(loaded.meta.config == config);
    CHECK(loaded.meta.training_seed == 9);
    CHECK(loaded.meta.dataset_fingerprints.size() == 2);

    auto a = params.named_tensors();
    auto b = loaded.params.named_tensors();
    REQUIRE(a.size() == b.size());
    for (std::size_t t = 0; t < a.size(); ++t)
        for (std::size_t i = 0; i < a[t].second->v.size(); ++i)
            CHECK(a[t].second->v[i] == b[t].second->v[i]);

    // Saving the loaded params reproduces the file byte-for-byte.
    const std::string path2 = "/tmp/pw_test_ckpt2.pwck";
    save_checkpoint(path2, loaded.params, loaded.meta);
    CHECK(read_file(path) == read_file(path2));
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("model config validation") {
    ModelConfig c = tiny_config();
    c.hidden_dim = 0;
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c = tiny_config();
    c.history_frames = 2;
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c = tiny_config();
    c.connection_radius = -0.1;
    CHECK_THROWS_AS(c.validate(), ParameterError);
}
