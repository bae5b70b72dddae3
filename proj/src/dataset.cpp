#include "pw/dataset.hpp"

#include <cmath>
#include <utility>

#include <json.hpp>

#include "pw/error.hpp"
#include "pw/primitives.hpp"
#include "pw/rng.hpp"
#include "pw/serialize.hpp"

namespace pw {

void Trajectory::validate() const {
    if (frames.size() < 2)
        throw ParameterError("trajectory '" + embodiment_name + "': needs at least 2 frames");
    const std::size_t hand_count = frames[0].hand.size();
    const std::size_t object_count = frames[0].object.size();
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const Frame& f = frames[t];
        if (f.hand.size() != hand_count || f.object.size() != object_count ||
            f.action.size() != hand_count)
            throw ParameterError("trajectory '" + embodiment_name + "': frame " +
                                 std::to_string(t) + " count mismatch");
        if (t + 1 < frames.size()) {
            for (std::size_t i = 0; i < hand_count; ++i) {
                const Vec3 diff = frames[t + 1].hand[i] - f.hand[i] - f.action[i];
                if (std::abs(diff.x) > 1e-9 || std::abs(diff.y) > 1e-9 || std::abs(diff.z) > 1e-9)
                    throw ParameterError("trajectory '" + embodiment_name + "': frame " +
                                         std::to_string(t) +
                                         " action inconsistent with hand motion");
            }
        }
    }
}

std::vector<Transition> flatten_transitions(const std::vector<Trajectory>& trajectories) {
    std::vector<Transition> out;
    for (const Trajectory& traj : trajectories) {
        for (std::size_t t = 0; t + 1 < traj.frames.size(); ++t) {
            out.push_back({traj.frames[t].hand, traj.frames[t].object, traj.frames[t].action,
                           traj.frames[t + 1].object, traj.embodiment_name, traj.domain_label});
        }
    }
    return out;
}

namespace {

// Hovers the hand so fingertips start near the object; without that, uniform
// random primitives rarely make contact and the data carries no dynamics.
JointState initial_pose(const KinematicChain& chain, TaskKind task, Rng& rng) {
    JointState q(chain.dof(), 0.0);
    const auto& w = chain.wrist_joints;
    if (task == TaskKind::Push) {
        q[w[0]] = rng.uniform(-0.13, -0.08);
        q[w[1]] = rng.uniform(-0.03, 0.03);
        q[w[2]] = rng.uniform(0.03, 0.05);
        q[w[5]] = rng.uniform(-0.25, 0.25);
        for (const auto& finger : chain.finger_joints)
            for (int j : finger) q[j] = rng.uniform(0.35, 0.6);
    } else {
        q[w[0]] = rng.uniform(-0.12, -0.07);
        q[w[1]] = rng.uniform(-0.02, 0.02);
        q[w[2]] = rng.uniform(0.03, 0.05);
        q[w[5]] = rng.uniform(-0.2, 0.2);
        for (const auto& finger : chain.finger_joints)
            for (int j : finger) q[j] = rng.uniform(0.3, 0.55);
    }
    return q;
}

PrimitiveKind sample_primitive_kind(TaskKind task, Rng& rng) {
    if (task == TaskKind::Push) return PrimitiveKind::PlanarPush;
    switch (rng.uniform_index(3)) {
        case 0: return PrimitiveKind::FingersPinch;
        case 1: return PrimitiveKind::PalmPress;
        default: return PrimitiveKind::ThumbPinch;
    }
}

}  // namespace

std::vector<Trajectory> collect_random_trajectories(const KinematicChain& chain, TaskKind task,
                                                    const OracleDomainParams& params, int count,
                                                    int horizon, std::uint64_t seed,
                                                    const CollectSettings& settings) {
    if (count < 1) throw ParameterError("collect_random_trajectories: count must be >= 1");
    if (horizon < 2) throw ParameterError("collect_random_trajectories: horizon must be >= 2");
    params.validate();

    std::vector<Trajectory> out;
    out.reserve(count);
    for (int traj_index = 0; traj_index < count; ++traj_index) {
        try {
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(traj_index)));
            Trajectory traj;
            traj.embodiment_name = chain.name;
            traj.domain_label = params.label;
            traj.dt = settings.dt;
            traj.oracle_params = params;
            traj.seed = seed;

            ObjectState object =
                make_initial_object(task, settings.object_count, params, rng.next_u64());
            JointState q = initial_pose(chain, task, rng);
            PointSet hand = forward_kinematics(chain, q);
            snap_f32(hand);

            std::vector<JointAction> pending;  // remainder of the current fragment
            for (int t = 0; t < horizon; ++t) {
                if (pending.empty()) {
                    const Primitive prim = make_primitive(sample_primitive_kind(task, rng), chain,
                                                          settings.primitive_steps);
                    std::vector<double> p(prim.parameter_dim);
                    for (int i = 0; i < prim.parameter_dim; ++i)
                        p[i] = rng.uniform(prim.bounds[i][0], prim.bounds[i][1]);
                    pending = decode_primitive(chain, prim, p);
                }
                JointAction u = pending.front();
                pending.erase(pending.begin());
                u = clamp_action_to_limits(chain, q, u, settings.limit_fraction);
                u = cap_action_displacement(chain, q, u, settings.max_particle_step);

                JointState q_next(q);
                for (std::size_t j = 0; j < q.size(); ++j) q_next[j] += u[j];
                PointSet hand_next = forward_kinematics(chain, q_next);
                snap_f32(hand_next);

                DisplacementField field(hand.size());
                for (std::size_t i = 0; i < hand.size(); ++i)
                    field[i] = snap_f32(hand_next[i] - hand[i]);

                Frame frame;
                frame.hand = hand;
                frame.object = observe(object_particles(object), params, rng.next_u64());
                snap_f32(frame.object);
                frame.action = field;
                traj.frames.push_back(std::move(frame));

                object = step_object(object, hand, field, params);
                q = std::move(q_next);
                hand = std::move(hand_next);
            }
            Frame last;
            last.hand = hand;
            last.object = observe(object_particles(object), params, rng.next_u64());
            snap_f32(last.object);
            last.action.assign(hand.size(), Vec3{});
            traj.frames.push_back(std::move(last));

            traj.validate();
            out.push_back(std::move(traj));
        } catch (const std::exception& e) {
            throw ParameterError("trajectory " + std::to_string(traj_index) + ": " + e.what());
        }
    }
    return out;
}

namespace {
constexpr int kDatasetVersion = 1;

nlohmann::json params_to_json(const OracleDomainParams& p) {
    return {{"friction", p.friction},
            {"stiffness", p.stiffness},
            {"plasticity_threshold", p.plasticity_threshold},
            {"contact_radius", p.contact_radius},
            {"observation_noise_sigma", p.observation_noise_sigma},
            {"label", p.label}};
}

OracleDomainParams params_from_json(const nlohmann::json& j) {
    OracleDomainParams p;
    p.friction = j.at("friction").get<double>();
    p.stiffness = j.at("stiffness").get<double>();
    p.plasticity_threshold = j.at("plasticity_threshold").get<double>();
    p.contact_radius = j.at("contact_radius").get<double>();
    p.observation_noise_sigma = j.at("observation_noise_sigma").get<double>();
    p.label = j.at("label").get<std::string>();
    return p;
}

}  // namespace

std::string dataset_to_bytes(const std::vector<Trajectory>& trajectories,
                             const std::string& config_hash) {
    nlohmann::json file_header = {{"schema", "pw-dataset"},
                                  {"version", kDatasetVersion},
                                  {"trajectories", trajectories.size()}};
    if (!config_hash.empty()) file_header["config_hash"] = config_hash;
    std::string bytes = file_header.dump();
    bytes.push_back('\n');

    for (const Trajectory& traj : trajectories) {
        traj.validate();
        const std::size_t hand_count = traj.frames[0].hand.size();
        const std::size_t object_count = traj.frames[0].object.size();
        const nlohmann::json header = {{"embodiment", traj.embodiment_name},
                                       {"domain", traj.domain_label},
                                       {"frames", traj.frames.size()},
                                       {"hand_count", hand_count},
                                       {"object_count", object_count},
                                       {"dt", traj.dt},
                                       {"seed", traj.seed},
                                       {"oracle_params", params_to_json(traj.oracle_params)}};
        bytes += header.dump();
        bytes.push_back('\n');
        const std::uint32_t blob_len =
            static_cast<std::uint32_t>((hand_count * 3 + object_count * 3 + hand_count * 3) * 4);
        for (const Frame& frame : traj.frames) {
            put_u32(bytes, blob_len);
            put_points_f32(bytes, frame.hand);
            put_points_f32(bytes, frame.object);
            put_points_f32(bytes, frame.action);
        }
    }
    return bytes;
}

std::vector<Trajectory> dataset_from_bytes(const std::string& bytes) {
    ByteReader reader(bytes);
    nlohmann::json file_header;
    try {
        file_header = nlohmann::json::parse(reader.get_line("file header"));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("dataset header parse: ") + e.what(), e.byte);
    }
    if (!file_header.contains("schema") || file_header["schema"] != "pw-dataset")
        throw FormatError("not a pw-dataset file", 0);
    const int version = file_header.at("version").get<int>();
    if (version != kDatasetVersion)
        throw VersionError("dataset version " + std::to_string(version) +
                           " unsupported (supported: " + std::to_string(kDatasetVersion) + ")");
    const std::size_t traj_count = file_header.at("trajectories").get<std::size_t>();

    std::vector<Trajectory> out;
    out.reserve(traj_count);
    for (std::size_t ti = 0; ti < traj_count; ++ti) {
        const std::uint64_t header_at = reader.offset();
        nlohmann::json header;
        try {
            header = nlohmann::json::parse(reader.get_line("trajectory header"));
        } catch (const nlohmann::json::parse_error& e) {
            throw FormatError(std::string("trajectory header parse: ") + e.what(),
                              header_at + e.byte);
        }
        Trajectory traj;
        try {
            traj.embodiment_name = header.at("embodiment").get<std::string>();
            traj.domain_label = header.at("domain").get<std::string>();
            traj.dt = header.at("dt").get<double>();
            traj.seed = header.at("seed").get<std::uint64_t>();
            traj.oracle_params = params_from_json(header.at("oracle_params"));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("trajectory header fields: ") + e.what(), header_at);
        }
        const std::size_t frame_count = header.at("frames").get<std::size_t>();
        const std::size_t hand_count = header.at("hand_count").get<std::size_t>();
        const std::size_t object_count = header.at("object_count").get<std::size_t>();
        if (frame_count < 2 || hand_count == 0 || object_count == 0)
            throw FormatError("invalid counts in trajectory header", header_at);

        const std::uint32_t expected_len =
            static_cast<std::uint32_t>((hand_count * 6 + object_count * 3) * 4);
        for (std::size_t f = 0; f < frame_count; ++f) {
            const std::uint64_t at = reader.offset();
            const std::uint32_t len = reader.get_u32();
            if (len != expected_len)
                throw FormatError("frame blob length " + std::to_string(len) + " != expected " +
                                  std::to_string(expected_len), at);
            Frame frame;
            frame.hand = reader.get_points_f32(hand_count, "hand particles");
            frame.object = reader.get_points_f32(object_count, "object particles");
            frame.action = reader.get_points_f32(hand_count, "action field");
            traj.frames.push_back(std::move(frame));
        }
        traj.validate();
        out.push_back(std::move(traj));
    }
    if (!reader.at_end())
        throw FormatError("trailing bytes after last trajectory", reader.offset());
    return out;
}

void write_dataset(const std::vector<Trajectory>& trajectories, const std::string& path,
                   const std::string& config_hash) {
    write_file(path, dataset_to_bytes(trajectories, config_hash));
}

std::vector<Trajectory> read_dataset(const std::string& path) {
    return dataset_from_bytes(read_file(path));
}

MixtureStream::MixtureStream(
    std::vector<std::pair<const std::vector<Trajectory>*, double>> sources, int batch_size,
    std::uint64_t seed)
    : batch_size_(batch_size), rng_(derive_seed(seed, "mixture")) {
    if (batch_size < 1) throw ParameterError("make_mixture: batch_size must be >= 1");
    if (sources.empty()) throw ParameterError("make_mixture: no sources");
    double total = 0.0;
    for (std::size_t i = 0; i < sources.size(); ++i) {
        const double w = sources[i].second;
        if (w < 0.0 || !std::isfinite(w))
            throw ParameterError("make_mixture: weight " + std::to_string(i) +
                                 " must be finite and >= 0");
        total += w;
    }
    if (!(total > 0.0)) throw ParameterError("make_mixture: at least one weight must be positive");

    double cumulative = 0.0;
    for (std::size_t i = 0; i < sources.size(); ++i) {
        if (sources[i].second == 0.0) continue;
        std::vector<Transition> pool = flatten_transitions(*sources[i].first);
        if (pool.empty())
            throw ParameterError("make_mixture: source " + std::to_string(i) +
                                 " has positive weight but no transitions");
        pools_.push_back(std::move(pool));
        cumulative += sources[i].second / total;
        cumulative_.push_back(cumulative);
    }
    cumulative_.back() = 1.0;
}

TransitionBatch MixtureStream::next() {
    TransitionBatch batch;
    batch.reserve(batch_size_);
    for (int b = 0; b < batch_size_; ++b) {
        const double r = rng_.uniform01();
        std::size_t source = 0;
        while (source + 1 < cumulative_.size() && r >= cumulative_[source]) ++source;
        const auto& pool = pools_[source];
        batch.push_back(pool[rng_.uniform_index(pool.size())]);
    }
    return batch;
}

}  // namespace pw
