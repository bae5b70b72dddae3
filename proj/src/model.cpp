#include "pw/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "pw/error.hpp"
#include "pw/serialize.hpp"

namespace pw {

void ModelConfig::validate() const {
    if (hidden_dim < 1 || propagation_steps < 1 || mlp_depth < 1 || history_frames < 1)
        throw ParameterError("model config: dimensions and step counts must be positive");
    if (!(connection_radius > 0.0))
        throw ParameterError("model config: connection_radius must be positive");
    if (history_frames != 1)
        throw ParameterError(
            "model config: history_frames > 1 is reserved; transitions carry no history");
}

GraphInput build_graph_input(const ModelConfig& config, const ParticleState& state,
                             const DisplacementField& action) {
    config.validate();
    validate_point_set(state.hand, "graph hand particles");
    validate_point_set(state.object, "graph object particles");
    if (action.size() != state.hand.size())
        throw ParameterError("graph input: action length " + std::to_string(action.size()) +
                             " != hand particle count " + std::to_string(state.hand.size()));
    for (const Vec3& a : action)
        if (!a.finite()) throw ParameterError("graph input: non-finite action");

    GraphInput g;
    g.hand_count = static_cast<int>(state.hand.size());
    g.object_count = static_cast<int>(state.object.size());
    const int n = g.hand_count + g.object_count;

    PointSet all;
    all.reserve(n);
    all.insert(all.end(), state.hand.begin(), state.hand.end());
    all.insert(all.end(), state.object.begin(), state.object.end());

    const double inv_r = 1.0 / config.connection_radius;
    g.node_feat = Tensor(n, kNodeFeatureDim);
    for (int i = 0; i < n; ++i) {
        double* f = g.node_feat.row(i);
        if (i < g.hand_count) {
            f[0] = 1.0;
            f[1] = 0.0;
            f[2] = action[i].x * inv_r;
            f[3] = action[i].y * inv_r;
            f[4] = action[i].z * inv_r;
        } else {
            f[0] = 0.0;
            f[1] = 1.0;
        }
    }

    const RadiusGraph rg = build_radius_graph(all, config.connection_radius);
    const int e = static_cast<int>(rg.edges.size());

    // Canonical edge order: receiver groups in index order, senders within a
    // group ordered by their value key (position then attributes) so the
    // neighbor sum is invariant to particle numbering.
    std::vector<int> order(e);
    std::iota(order.begin(), order.end(), 0);
    auto sender_key_less = [&](int a, int b) {
        const RadiusGraphEdge& ea = rg.edges[a];
        const RadiusGraphEdge& eb = rg.edges[b];
        if (ea.receiver != eb.receiver) return ea.receiver < eb.receiver;
        const Vec3& pa = all[ea.sender];
        const Vec3& pb = all[eb.sender];
        if (pa.x != pb.x) return pa.x < pb.x;
        if (pa.y != pb.y) return pa.y < pb.y;
        if (pa.z != pb.z) return pa.z < pb.z;
        const double* fa = g.node_feat.row(ea.sender);
        const double* fb = g.node_feat.row(eb.sender);
        for (int c = 0; c < kNodeFeatureDim; ++c)
            if (fa[c] != fb[c]) return fa[c] < fb[c];
        return false;
    };
    std::sort(order.begin(), order.end(), sender_key_less);

    g.receiver.resize(e);
    g.sender.resize(e);
    g.edge_feat = Tensor(e, kEdgeFeatureDim);
    for (int k = 0; k < e; ++k) {
        const RadiusGraphEdge& edge = rg.edges[order[k]];
        g.receiver[k] = edge.receiver;
        g.sender[k] = edge.sender;
        double* f = g.edge_feat.row(k);
        const double* fr = g.node_feat.row(edge.receiver);
        const double* fs = g.node_feat.row(edge.sender);
        for (int c = 0; c < kNodeFeatureDim; ++c) {
            f[c] = fr[c];
            f[kNodeFeatureDim + c] = fs[c];
        }
        f[10] = edge.rel.x * inv_r;
        f[11] = edge.rel.y * inv_r;
        f[12] = edge.rel.z * inv_r;
        f[13] = edge.length * inv_r;
    }
    return g;
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::named_tensors() {
    std::vector<std::pair<std::string, Tensor*>> out;
    auto add = [&out](const std::string& name, Mlp& mlp) {
        for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
            out.push_back({name + ".w" + std::to_string(l), &mlp.layers[l].w});
            out.push_back({name + ".b" + std::to_string(l), &mlp.layers[l].b});
        }
    };
    add("node_encoder", node_encoder);
    add("edge_encoder", edge_encoder);
    add("edge_propagator", edge_propagator);
    add("node_propagator", node_propagator);
    add("decoder", decoder);
    return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named_tensors() const {
    auto mutable_view = const_cast<ModelParams*>(this)->named_tensors();
    std::vector<std::pair<std::string, const Tensor*>> out;
    out.reserve(mutable_view.size());
    for (auto& [name, t] : mutable_view) out.push_back({name, t});
    return out;
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : named_tensors()) n += t->size();
    return n;
}

ModelParams init_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(derive_seed(seed, "model-init"));
    const int h = config.hidden_dim;
    ModelParams p;
    p.node_encoder = make_mlp(kNodeFeatureDim, h, h, config.mlp_depth, rng);
    p.edge_encoder = make_mlp(kEdgeFeatureDim, h, h, config.mlp_depth, rng);
    p.edge_propagator = make_mlp(3 * h, h, h, config.mlp_depth, rng);
    p.node_propagator = make_mlp(3 * h, h, h, config.mlp_depth, rng);
    p.decoder = make_mlp(h, h, 3, config.mlp_depth, rng, /*zero_last_layer=*/true);
    return p;
}

ModelParams make_model_grads(const ModelParams& params) {
    ModelParams g;
    g.node_encoder = make_mlp_grads(params.node_encoder);
    g.edge_encoder = make_mlp_grads(params.edge_encoder);
    g.edge_propagator = make_mlp_grads(params.edge_propagator);
    g.node_propagator = make_mlp_grads(params.node_propagator);
    g.decoder = make_mlp_grads(params.decoder);
    return g;
}

namespace {

Tensor hconcat3(const Tensor& a, const Tensor& b, const Tensor& c) {
    Tensor out(a.rows, a.cols + b.cols + c.cols);
    for (int r = 0; r < a.rows; ++r) {
        double* o = out.row(r);
        std::copy(a.row(r), a.row(r) + a.cols, o);
        std::copy(b.row(r), b.row(r) + b.cols, o + a.cols);
        std::copy(c.row(r), c.row(r) + c.cols, o + a.cols + b.cols);
    }
    return out;
}

Tensor slice_cols(const Tensor& t, int from, int width) {
    Tensor out(t.rows, width);
    for (int r = 0; r < t.rows; ++r)
        std::copy(t.row(r) + from, t.row(r) + from + width, out.row(r));
    return out;
}

void add_cols_into(Tensor& dst, const Tensor& src, int from, int width) {
    for (int r = 0; r < src.rows; ++r) {
        double* d = dst.row(r);
        const double* s = src.row(r) + from;
        for (int c = 0; c < width; ++c) d[c] += s[c];
    }
}

Tensor forward_pass(const ModelParams& params, const ModelConfig& config, GraphInput graph,
                    GradientTape* tape) {
    const int h = config.hidden_dim;
    const int n = graph.hand_count + graph.object_count;

    GradientTape local;
    GradientTape& t = tape ? *tape : local;
    t.graph = std::move(graph);
    t.h_before.clear();
    t.edge_prop_caches.assign(config.propagation_steps, {});
    t.node_prop_caches.assign(config.propagation_steps, {});
    t.aggregates.clear();

    t.node_encoding = mlp_forward(params.node_encoder, t.graph.node_feat,
                                  tape ? &t.node_enc_cache : nullptr);
    t.edge_encoding = mlp_forward(params.edge_encoder, t.graph.edge_feat,
                                  tape ? &t.edge_enc_cache : nullptr);

    Tensor hidden(n, h);
    for (int l = 0; l < config.propagation_steps; ++l) {
        if (tape) t.h_before.push_back(hidden);
        const Tensor h_recv = gather_rows(hidden, t.graph.receiver);
        const Tensor h_send = gather_rows(hidden, t.graph.sender);
        const Tensor edge_in = hconcat3(t.edge_encoding, h_recv, h_send);
        const Tensor msg =
            mlp_forward(params.edge_propagator, edge_in, tape ? &t.edge_prop_caches[l] : nullptr);
        Tensor agg(n, h);
        scatter_add_rows(agg, t.graph.receiver, msg);
        const Tensor node_in = hconcat3(t.node_encoding, agg, hidden);
        if (tape) t.aggregates.push_back(agg);
        hidden = mlp_forward(params.node_propagator, node_in, tape ? &t.node_prop_caches[l] : nullptr);
    }

    Tensor object_hidden(t.graph.object_count, h);
    for (int r = 0; r < t.graph.object_count; ++r) {
        const double* s = hidden.row(t.graph.hand_count + r);
        std::copy(s, s + h, object_hidden.row(r));
    }
    Tensor delta_scaled =
        mlp_forward(params.decoder, object_hidden, tape ? &t.decoder_cache : nullptr);
    Tensor delta(t.graph.object_count, 3);
    for (std::size_t i = 0; i < delta.v.size(); ++i)
        delta.v[i] = delta_scaled.v[i] * config.connection_radius;
    if (tape) t.predicted_delta = delta;
    return delta;
}

PointSet apply_delta(const PointSet& object, const Tensor& delta) {
    PointSet out;
    out.reserve(object.size());
    for (std::size_t i = 0; i < object.size(); ++i) {
        const Vec3 p = object[i] + Vec3{delta.at(static_cast<int>(i), 0),
                                        delta.at(static_cast<int>(i), 1),
                                        delta.at(static_cast<int>(i), 2)};
        if (!p.finite()) throw NumericError("predict: non-finite output at object particle " +
                                            std::to_string(i));
        out.push_back(p);
    }
    return out;
}

}  // namespace

PointSet predict(const ModelParams& params, const ModelConfig& config, const ParticleState& state,
                 const DisplacementField& action) {
    GraphInput graph = build_graph_input(config, state, action);
    const Tensor delta = forward_pass(params, config, std::move(graph), nullptr);
    return apply_delta(state.object, delta);
}

PointSet predict_with_tape(const ModelParams& params, const ModelConfig& config,
                           const ParticleState& state, const DisplacementField& action,
                           GradientTape& tape) {
    GraphInput graph = build_graph_input(config, state, action);
    forward_pass(params, config, std::move(graph), &tape);
    return apply_delta(state.object, tape.predicted_delta);
}

void backward(const ModelParams& params, const ModelConfig& config, const GradientTape& tape,
              const std::vector<Vec3>& d_prediction, ModelParams& grads) {
    const int h = config.hidden_dim;
    const int n = tape.graph.hand_count + tape.graph.object_count;
    if (static_cast<int>(d_prediction.size()) != tape.graph.object_count)
        throw ParameterError("backward: gradient length mismatch");

    // prediction = object + radius * decoder(h_L)
    Tensor d_delta_scaled(tape.graph.object_count, 3);
    for (int i = 0; i < tape.graph.object_count; ++i) {
        d_delta_scaled.at(i, 0) = d_prediction[i].x * config.connection_radius;
        d_delta_scaled.at(i, 1) = d_prediction[i].y * config.connection_radius;
        d_delta_scaled.at(i, 2) = d_prediction[i].z * config.connection_radius;
    }
    const Tensor d_object_hidden =
        mlp_backward(params.decoder, tape.decoder_cache, d_delta_scaled, grads.decoder);

    Tensor d_hidden(n, h);
    for (int r = 0; r < tape.graph.object_count; ++r) {
        const double* s = d_object_hidden.row(r);
        std::copy(s, s + h, d_hidden.row(tape.graph.hand_count + r));
    }

    Tensor d_node_encoding(tape.node_encoding.rows, h);
    Tensor d_edge_encoding(tape.edge_encoding.rows, h);
    for (int l = config.propagation_steps - 1; l >= 0; --l) {
        const Tensor d_node_in =
            mlp_backward(params.node_propagator, tape.node_prop_caches[l], d_hidden,
                         grads.node_propagator);
        add_cols_into(d_node_encoding, d_node_in, 0, h);
        const Tensor d_agg = slice_cols(d_node_in, h, h);
        Tensor d_h_prev = slice_cols(d_node_in, 2 * h, h);

        const Tensor d_msg = gather_rows(d_agg, tape.graph.receiver);
        const Tensor d_edge_in =
            mlp_backward(params.edge_propagator, tape.edge_prop_caches[l], d_msg,
                         grads.edge_propagator);
        add_cols_into(d_edge_encoding, d_edge_in, 0, h);
        const Tensor d_h_recv = slice_cols(d_edge_in, h, h);
        const Tensor d_h_send = slice_cols(d_edge_in, 2 * h, h);
        scatter_add_rows(d_h_prev, tape.graph.receiver, d_h_recv);
        scatter_add_rows(d_h_prev, tape.graph.sender, d_h_send);
        d_hidden = std::move(d_h_prev);
    }
    // h^0 is identically zero; its gradient ends here.
    mlp_backward(params.node_encoder, tape.node_enc_cache, d_node_encoding, grads.node_encoder);
    mlp_backward(params.edge_encoder, tape.edge_enc_cache, d_edge_encoding, grads.edge_encoder);
}

std::string loss_kind_name(LossKind kind) {
    switch (kind) {
        case LossKind::Mse: return "mse";
        case LossKind::Chamfer: return "chamfer";
        case LossKind::Emd: return "emd";
    }
    return "?";
}

LossKind loss_kind_from_name(const std::string& name) {
    if (name == "mse") return LossKind::Mse;
    if (name == "chamfer") return LossKind::Chamfer;
    if (name == "emd") return LossKind::Emd;
    throw ParameterError("unknown loss kind '" + name + "'");
}

double loss_value(const PointSet& prediction, const PointSet& target, LossKind kind) {
    switch (kind) {
        case LossKind::Mse: return mse_paired(prediction, target);
        case LossKind::Chamfer: return chamfer_distance(prediction, target);
        case LossKind::Emd: return earth_movers_distance(prediction, target);
    }
    throw ParameterError("bad loss kind");
}

double loss_with_gradient(const PointSet& prediction, const PointSet& target, LossKind kind,
                          std::vector<Vec3>& d_prediction) {
    const std::size_t np = prediction.size();
    d_prediction.assign(np, Vec3{});
    switch (kind) {
        case LossKind::Mse: {
            const double value = mse_paired(prediction, target);
            for (std::size_t i = 0; i < np; ++i)
                d_prediction[i] = (prediction[i] - target[i]) * (2.0 / np);
            return value;
        }
        case LossKind::Chamfer: {
            validate_point_set(prediction, "chamfer(pred)");
            validate_point_set(target, "chamfer(target)");
            // Fixed nearest-neighbor matches give the subgradient.
            double value = 0.0;
            for (std::size_t i = 0; i < np; ++i) {
                std::size_t best = 0;
                double best_d = std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < target.size(); ++j) {
                    const double d = (prediction[i] - target[j]).norm2();
                    if (d < best_d) {
                        best_d = d;
                        best = j;
                    }
                }
                value += best_d / np;
                d_prediction[i] += (prediction[i] - target[best]) * (2.0 / np);
            }
            for (std::size_t j = 0; j < target.size(); ++j) {
                std::size_t best = 0;
                double best_d = std::numeric_limits<double>::infinity();
                for (std::size_t i = 0; i < np; ++i) {
                    const double d = (target[j] - prediction[i]).norm2();
                    if (d < best_d) {
                        best_d = d;
                        best = i;
                    }
                }
                value += best_d / target.size();
                d_prediction[best] += (prediction[best] - target[j]) * (2.0 / target.size());
            }
            return value;
        }
        case LossKind::Emd: {
            validate_point_set(prediction, "emd(pred)");
            validate_point_set(target, "emd(target)");
            if (prediction.size() != target.size())
                throw ParameterError("emd loss: sets must have equal cardinality");
            const int m = static_cast<int>(np);
            std::vector<double> cost(static_cast<std::size_t>(m) * m);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j) cost[i * m + j] = (prediction[i] - target[j]).norm();
            const std::vector<int> assign = solve_assignment(cost, m);
            double value = 0.0;
            for (int i = 0; i < m; ++i) {
                const double d = cost[i * m + assign[i]];
                value += d / m;
                if (d > 1e-12)
                    d_prediction[i] = (prediction[i] - target[assign[i]]) * (1.0 / (m * d));
            }
            return value;
        }
    }
    throw ParameterError("bad loss kind");
}

double gradients(const ModelParams& params, const ModelConfig& config, const TransitionBatch& batch,
                 LossKind kind, ModelParams& grads) {
    if (batch.empty()) throw ParameterError("gradients: batch must be non-empty");
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    double mean_loss = 0.0;
    GradientTape tape;
    std::vector<Vec3> d_pred;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        const Transition& tr = batch[s];
        const PointSet prediction =
            predict_with_tape(params, config, {tr.hand, tr.object}, tr.action, tape);
        const double value = loss_with_gradient(prediction, tr.next_object, kind, d_pred);
        if (!std::isfinite(value))
            throw NumericError("gradients: non-finite loss at batch sample " + std::to_string(s));
        mean_loss += value * inv_batch;
        for (Vec3& g : d_pred) g *= inv_batch;
        backward(params, config, tape, d_pred, grads);
    }
    return mean_loss;
}

Transition rotate_transition(const Transition& t, const Mat3& rot) {
    Transition out = t;
    for (Vec3& p : out.hand) p = rot.apply(p);
    for (Vec3& p : out.object) p = rot.apply(p);
    for (Vec3& p : out.action) p = rot.apply(p);
    for (Vec3& p : out.next_object) p = rot.apply(p);
    return out;
}

namespace {

Mat3 random_rotation(Rng& rng, bool full_so3) {
    if (!full_so3) return Mat3::rot_z(rng.uniform(0.0, 6.283185307179586));
    // Uniform rotation from a normalized Gaussian quaternion.
    double q[4];
    double norm2 = 0.0;
    for (double& c : q) {
        c = rng.gauss();
        norm2 += c * c;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    const double w = q[0] * inv, x = q[1] * inv, y = q[2] * inv, z = q[3] * inv;
    Mat3 r;
    r.m[0][0] = 1 - 2 * (y * y + z * z);
    r.m[0][1] = 2 * (x * y - w * z);
    r.m[0][2] = 2 * (x * z + w * y);
    r.m[1][0] = 2 * (x * y + w * z);
    r.m[1][1] = 1 - 2 * (x * x + z * z);
    r.m[1][2] = 2 * (y * z - w * x);
    r.m[2][0] = 2 * (x * z - w * y);
    r.m[2][1] = 2 * (y * z + w * x);
    r.m[2][2] = 1 - 2 * (x * x + y * y);
    return r;
}

double eval_loss(const ModelParams& params, const ModelConfig& config,
                 const std::vector<Transition>& transitions, LossKind kind) {
    if (transitions.empty()) throw ParameterError("eval: no transitions");
    double total = 0.0;
    for (const Transition& tr : transitions) {
        const PointSet prediction = predict(params, config, {tr.hand, tr.object}, tr.action);
        total += loss_value(prediction, tr.next_object, kind);
    }
    return total / static_cast<double>(transitions.size());
}

}  // namespace

TrainResult train_model(const ModelConfig& config, MixtureStream& stream,
                        const TrainSettings& settings,
                        const std::vector<Transition>* validation) {
    config.validate();
    if (settings.steps < 1) throw ParameterError("train: steps must be >= 1");
    TrainResult result;
    result.params = init_model(config, settings.seed);
    auto named = result.params.named_tensors();
    std::vector<Tensor*> tensors;
    for (auto& [name, t] : named) tensors.push_back(t);
    Adam adam(settings.adam, tensors);
    Rng aug_rng(derive_seed(settings.seed, "augment"));

    ModelParams grads = make_model_grads(result.params);
    auto grad_named = grads.named_tensors();
    std::vector<const Tensor*> grad_tensors;
    for (auto& [name, t] : grad_named) grad_tensors.push_back(t);

    double epoch_loss = 0.0;
    int epoch_count = 0;
    for (int step = 0; step < settings.steps; ++step) {
        TransitionBatch batch = stream.next();
        if (settings.augment_rotation)
            for (Transition& tr : batch)
                tr = rotate_transition(tr, random_rotation(aug_rng, settings.augment_full_so3));

        for (auto& [name, t] : grad_named) t->zero();
        const int epoch = step / settings.epoch_steps;
        double loss;
        try {
            loss = gradients(result.params, config, batch, settings.loss, grads);
        } catch (const NumericError& e) {
            throw TrainingError(std::string("training diverged: ") + e.what(), epoch);
        }
        if (!std::isfinite(loss) || loss > settings.divergence_limit)
            throw TrainingError("training diverged: loss " + std::to_string(loss), epoch);
        adam.step(tensors, grad_tensors);

        epoch_loss += loss;
        ++epoch_count;
        if ((step + 1) % settings.epoch_steps == 0 || step + 1 == settings.steps) {
            EpochLog log;
            log.epoch = epoch;
            log.train_loss = epoch_loss / epoch_count;
            log.val_loss = validation
                               ? eval_loss(result.params, config, *validation, settings.loss)
                               : std::numeric_limits<double>::quiet_NaN();
            result.log.push_back(log);
            epoch_loss = 0.0;
            epoch_count = 0;
        }
    }
    return result;
}

std::vector<PointSet> rollout(const ModelParams& params, const ModelConfig& config,
                              const ParticleState& initial,
                              const std::vector<DisplacementField>& actions) {
    std::vector<PointSet> states;
    states.reserve(actions.size() + 1);
    states.push_back(initial.object);
    PointSet hand = initial.hand;
    PointSet object = initial.object;
    for (const DisplacementField& action : actions) {
        object = predict(params, config, {hand, object}, action);
        states.push_back(object);
        if (action.size() != hand.size())
            throw ParameterError("rollout: action length mismatch");
        for (std::size_t i = 0; i < hand.size(); ++i) hand[i] += action[i];
    }
    return states;
}

double eval_one_step_mse(const ModelParams& params, const ModelConfig& config,
                         const std::vector<Transition>& transitions) {
    return eval_loss(params, config, transitions, LossKind::Mse);
}

double copy_last_mse(const std::vector<Transition>& transitions) {
    if (transitions.empty()) throw ParameterError("copy_last_mse: no transitions");
    double total = 0.0;
    for (const Transition& tr : transitions) total += mse_paired(tr.object, tr.next_object);
    return total / static_cast<double>(transitions.size());
}

namespace {
constexpr int kCheckpointVersion = 1;

nlohmann::json config_to_json(const ModelConfig& c) {
    return {{"hidden_dim", c.hidden_dim},
            {"propagation_steps", c.propagation_steps},
            {"connection_radius", c.connection_radius},
            {"mlp_depth", c.mlp_depth},
            {"history_frames", c.history_frames}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.hidden_dim = j.at("hidden_dim").get<int>();
    c.propagation_steps = j.at("propagation_steps").get<int>();
    c.connection_radius = j.at("connection_radius").get<double>();
    c.mlp_depth = j.at("mlp_depth").get<int>();
    c.history_frames = j.at("history_frames").get<int>();
    return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const CheckpointMeta& meta) {
    const auto named = params.named_tensors();
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& [name, t] : named)
        tensors.push_back({{"name", name}, {"rows", t->rows}, {"cols", t->cols}});
    nlohmann::json header = {{"schema", "pw-checkpoint"},
                             {"version", kCheckpointVersion},
                             {"config", config_to_json(meta.config)},
                             {"training_seed", meta.training_seed},
                             {"dataset_fingerprints", meta.dataset_fingerprints},
                             {"config_hash", meta.config_hash},
                             {"tensors", tensors}};
    std::string bytes = header.dump();
    bytes.push_back('\n');
    for (const auto& [name, t] : named) {
        put_u32(bytes, static_cast<std::uint32_t>(t->size() * 4));
        for (double v : t->v) put_f32(bytes, static_cast<float>(v));
    }
    write_file(path, bytes);
}

Checkpoint load_checkpoint(const std::string& path) {
    const std::string bytes = read_file(path);
    ByteReader reader(bytes);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(reader.get_line("checkpoint header"));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("checkpoint header parse: ") + e.what(), e.byte);
    }
    if (!header.contains("schema") || header["schema"] != "pw-checkpoint")
        throw FormatError("not a pw-checkpoint file", 0);
    const int version = header.at("version").get<int>();
    if (version != kCheckpointVersion)
        throw VersionError("checkpoint version " + std::to_string(version) +
                           " unsupported (supported: " + std::to_string(kCheckpointVersion) + ")");

    Checkpoint ckpt;
    try {
        ckpt.meta.config = config_from_json(header.at("config"));
        ckpt.meta.training_seed = header.at("training_seed").get<std::uint64_t>();
        ckpt.meta.dataset_fingerprints =
            header.at("dataset_fingerprints").get<std::vector<std::string>>();
        ckpt.meta.config_hash = header.at("config_hash").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint header fields: ") + e.what(), 0);
    }
    ckpt.params = init_model(ckpt.meta.config, 0);
    auto named = ckpt.params.named_tensors();
    const auto& tensor_list = header.at("tensors");
    if (tensor_list.size() != named.size())
        throw FormatError("checkpoint tensor list size mismatch", 0);
    for (std::size_t i = 0; i < named.size(); ++i) {
        auto& [name, t] = named[i];
        const auto& entry = tensor_list[i];
        if (entry.at("name").get<std::string>() != name ||
            entry.at("rows").get<int>() != t->rows || entry.at("cols").get<int>() != t->cols)
            throw FormatError("checkpoint tensor '" + name + "' header mismatch", 0);
        const std::uint64_t at = reader.offset();
        const std::uint32_t len = reader.get_u32();
        if (len != t->size() * 4)
            throw FormatError("checkpoint tensor '" + name + "' blob length mismatch", at);
        for (double& v : t->v) {
            const float f = reader.get_f32();
            if (!std::isfinite(f))
                throw FormatError("checkpoint tensor '" + name + "' has non-finite value", at);
            v = static_cast<double>(f);
        }
    }
    if (!reader.at_end()) throw FormatError("trailing bytes after checkpoint", reader.offset());
    return ckpt;
}

}  // namespace pw
