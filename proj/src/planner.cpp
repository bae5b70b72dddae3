#include "pw/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "pw/error.hpp"
#include "pw/geometry.hpp"

namespace pw {

std::string cost_kind_name(CostKind kind) {
    switch (kind) {
        case CostKind::Chamfer: return "chamfer";
        case CostKind::Emd: return "emd";
        case CostKind::YawError: return "yaw-error";
    }
    return "?";
}

CostKind cost_kind_from_name(const std::string& name) {
    if (name == "chamfer") return CostKind::Chamfer;
    if (name == "emd") return CostKind::Emd;
    if (name == "yaw-error") return CostKind::YawError;
    throw ParameterError("unknown cost kind '" + name + "'");
}

double wrap_angle(double angle) {
    const double two_pi = 6.283185307179586476925286766559;
    double a = std::fmod(angle, two_pi);
    if (a <= -3.14159265358979323846) a += two_pi;
    if (a > 3.14159265358979323846) a -= two_pi;
    return a;
}

double estimate_yaw(const PointSet& reference, const PointSet& current) {
    if (reference.size() != current.size() || reference.empty())
        throw ParameterError("estimate_yaw: corresponding particle sets required");
    Vec3 cr{}, cc{};
    for (const Vec3& p : reference) cr += p;
    for (const Vec3& p : current) cc += p;
    cr *= 1.0 / reference.size();
    cc *= 1.0 / current.size();
    double s_cross = 0.0, s_dot = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const Vec2 a{reference[i].x - cr.x, reference[i].y - cr.y};
        const Vec2 b{current[i].x - cc.x, current[i].y - cc.y};
        s_cross += a.cross(b);
        s_dot += a.dot(b);
    }
    return std::atan2(s_cross, s_dot);
}

double evaluate_cost(const PointSet& predicted_final, const Goal& goal, CostKind kind,
                     const CostContext* context) {
    switch (kind) {
        case CostKind::Chamfer:
            if (!goal.target_points)
                throw ParameterError("chamfer cost requires a target point cloud");
            return chamfer_distance(predicted_final, *goal.target_points);
        case CostKind::Emd:
            if (!goal.target_points)
                throw ParameterError("emd cost requires a target point cloud");
            return earth_movers_distance(predicted_final, *goal.target_points);
        case CostKind::YawError: {
            if (!goal.target_yaw) throw ParameterError("yaw cost requires a target yaw");
            if (!context) throw ParameterError("yaw cost requires a reference context");
            const double yaw = context->reference_yaw +
                               estimate_yaw(context->reference_object, predicted_final);
            return std::abs(wrap_angle(yaw - *goal.target_yaw));
        }
    }
    throw ParameterError("bad cost kind");
}

void PlannerConfig::validate() const {
    if (horizon < 1) throw ParameterError("planner config: horizon must be >= 1");
    if (samples < 2) throw ParameterError("planner config: samples must be >= 2");
    if (!(elite_fraction > 0.0) || elite_fraction > 1.0)
        throw ParameterError("planner config: elite_fraction must be in (0, 1]");
    if (elite_count() < 2) throw ParameterError("planner config: needs at least 2 elites");
    if (iterations < 1) throw ParameterError("planner config: iterations must be >= 1");
    if (!(std_floor > 0.0)) throw ParameterError("planner config: std floor must be > 0");
    if (!(max_particle_step > 0.0))
        throw ParameterError("planner config: max_particle_step must be > 0");
    if (threads < 1) throw ParameterError("planner config: threads must be >= 1");
}

int PlannerConfig::elite_count() const {
    return std::max(2, static_cast<int>(std::floor(samples * elite_fraction)));
}

CemResult cem_optimize(const std::vector<std::array<double, 2>>& bounds,
                       const PlannerConfig& config,
                       const std::function<double(const std::vector<double>&)>& cost_fn) {
    config.validate();
    const int dim = static_cast<int>(bounds.size());
    if (dim == 0) throw ParameterError("cem_optimize: empty parameter space");
    for (const auto& b : bounds)
        if (!(b[0] < b[1]) || !std::isfinite(b[0]) || !std::isfinite(b[1]))
            throw ParameterError("cem_optimize: bounds must be finite with lo < hi");

    Rng rng(derive_seed(config.seed, "cem"));
    std::vector<double> mean(dim), stddev(dim);
    for (int d = 0; d < dim; ++d) {
        mean[d] = 0.5 * (bounds[d][0] + bounds[d][1]);
        stddev[d] = config.initial_std_scale * 0.5 * (bounds[d][1] - bounds[d][0]);
        stddev[d] = std::max(stddev[d], config.std_floor);
    }

    CemResult result;
    result.best_cost = std::numeric_limits<double>::infinity();
    const int elites = config.elite_count();

    std::vector<std::vector<double>> samples(config.samples, std::vector<double>(dim));
    std::vector<double> costs(config.samples);
    for (int iter = 0; iter < config.iterations; ++iter) {
        // All sampling happens before any evaluation so the random stream is
        // independent of evaluation order (and thread count).
        for (int s = 0; s < config.samples; ++s)
            for (int d = 0; d < dim; ++d)
                samples[s][d] =
                    std::clamp(rng.gauss(mean[d], stddev[d]), bounds[d][0], bounds[d][1]);

        auto eval_range = [&](int from, int to) {
            for (int s = from; s < to; ++s) costs[s] = cost_fn(samples[s]);
        };
        if (config.threads <= 1 || config.samples < 4) {
            eval_range(0, config.samples);
        } else {
            const int workers = std::min(config.threads, config.samples);
            std::vector<std::thread> pool;
            const int chunk = (config.samples + workers - 1) / workers;
            for (int w = 0; w < workers; ++w) {
                const int from = w * chunk;
                const int to = std::min(config.samples, from + chunk);
                if (from < to) pool.emplace_back(eval_range, from, to);
            }
            for (auto& th : pool) th.join();
        }

        std::vector<int> order(config.samples);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (costs[a] != costs[b]) return costs[a] < costs[b];
            return a < b;
        });

        if (costs[order[0]] < result.best_cost) {
            result.best_cost = costs[order[0]];
            result.best_parameters = samples[order[0]];
        }

        double cost_sum = 0.0;
        for (double c : costs) cost_sum += c;
        // Refit to the elite set.
        for (int d = 0; d < dim; ++d) {
            double m = 0.0;
            for (int e = 0; e < elites; ++e) m += samples[order[e]][d];
            m /= elites;
            double var = 0.0;
            for (int e = 0; e < elites; ++e) {
                const double dd = samples[order[e]][d] - m;
                var += dd * dd;
            }
            mean[d] = m;
            stddev[d] = std::max(std::sqrt(var / elites), config.std_floor);
        }
        double std_norm = 0.0;
        for (double s : stddev) std_norm += s * s;
        result.log.push_back(
            {iter, result.best_cost, cost_sum / config.samples, std::sqrt(std_norm)});
    }
    return result;
}

PointSet LearnedRollout::final_object(const PointSet& hand0, const ObjectState& object0,
                                      const std::vector<DisplacementField>& fields) const {
    return rollout(*params_, *config_, {hand0, object_particles(object0)}, fields).back();
}

PointSet OracleRollout::final_object(const PointSet& hand0, const ObjectState& object0,
                                     const std::vector<DisplacementField>& fields) const {
    ObjectState state = object0;
    PointSet hand = hand0;
    for (const DisplacementField& field : fields) {
        state = step_object(state, hand, field, *params_);
        for (std::size_t i = 0; i < hand.size(); ++i) hand[i] += field[i];
    }
    return object_particles(state);
}

namespace {

struct DecodedPlan {
    std::vector<JointAction> actions;
    std::vector<DisplacementField> fields;
};

// Decode, clamp against limits, cap per-step displacement, and map through FK.
DecodedPlan realize_parameters(const KinematicChain& chain, const JointState& q0,
                               const Primitive& primitive, const std::vector<double>& parameters,
                               double max_step) {
    DecodedPlan plan;
    JointState q = q0;
    for (JointAction u : decode_primitive(chain, primitive, parameters)) {
        u = clamp_action_to_limits(chain, q, u);
        u = cap_action_displacement(chain, q, u, max_step);
        plan.fields.push_back(joint_action_to_displacement(chain, q, u));
        plan.actions.push_back(u);
        for (std::size_t j = 0; j < q.size(); ++j) q[j] += u[j];
    }
    return plan;
}

CostContext make_context(const ObjectState& object0) {
    CostContext ctx;
    ctx.reference_object = object_particles(object0);
    ctx.reference_yaw = object0.task == TaskKind::Push ? object0.box.yaw : 0.0;
    return ctx;
}

}  // namespace

PlanResult cem_plan(const RolloutModel& model, const KinematicChain& chain, const JointState& q0,
                    const ObjectState& object0, const Goal& goal, const Primitive& primitive,
                    const PlannerConfig& config) {
    config.validate();
    if (primitive.steps != config.horizon)
        throw ParameterError("cem_plan: primitive fragment length " +
                             std::to_string(primitive.steps) + " != planner horizon " +
                             std::to_string(config.horizon));
    check_joint_limits(chain, q0);
    const PointSet hand0 = forward_kinematics(chain, q0);
    const CostContext ctx = make_context(object0);

    auto cost_fn = [&](const std::vector<double>& parameters) {
        const DecodedPlan plan =
            realize_parameters(chain, q0, primitive, parameters, config.max_particle_step);
        const PointSet final_state = model.final_object(hand0, object0, plan.fields);
        return evaluate_cost(final_state, goal, config.cost, &ctx);
    };

    const CemResult cem = cem_optimize(primitive.bounds, config, cost_fn);
    PlanResult result;
    result.best_parameters = cem.best_parameters;
    result.predicted_cost = cem.best_cost;
    result.cem_log = cem.log;
    result.actions =
        realize_parameters(chain, q0, primitive, cem.best_parameters, config.max_particle_step)
            .actions;
    return result;
}

MpcResult mpc_execute(const RolloutModel& model, const OracleDomainParams& true_params,
                      const KinematicChain& chain, const JointState& q0,
                      const ObjectState& object0, const Goal& goal,
                      const std::vector<PrimitiveKind>& primitive_schedule,
                      const PlannerConfig& config, int replan_every, int step_budget) {
    config.validate();
    if (replan_every < 1) throw ParameterError("mpc_execute: replan_every must be >= 1");
    if (step_budget < 0) throw ParameterError("mpc_execute: step budget must be >= 0");
    if (primitive_schedule.empty()) throw ParameterError("mpc_execute: empty primitive schedule");

    MpcResult result;
    result.final_object = object0;
    result.final_q = q0;
    const CostContext ctx = make_context(object0);
    result.object_history.push_back(object_particles(object0));
    if (step_budget == 0) {
        result.final_cost =
            evaluate_cost(object_particles(object0), goal, config.cost, &ctx);
        return result;
    }

    JointState q = q0;
    ObjectState object = object0;
    PointSet hand = forward_kinematics(chain, q);
    Rng observe_rng(derive_seed(config.seed, "mpc-observe"));

    std::vector<JointAction> queue;
    double last_predicted = std::numeric_limits<double>::quiet_NaN();
    int plan_count = 0;
    for (int step = 0; step < step_budget; ++step) {
        if (step % replan_every == 0) {
            queue.clear();
            const PrimitiveKind kind =
                primitive_schedule[plan_count % primitive_schedule.size()];
            ++plan_count;
            const Primitive primitive = make_primitive(kind, chain, config.horizon);
            // Plan from the observed state: noisy in the real-proxy domain.
            ObjectState planning_state = object;
            PointSet observed =
                observe(object_particles(object), true_params, observe_rng.next_u64());
            if (planning_state.task == TaskKind::Push)
                planning_state.box.particles = observed;
            else
                planning_state.blob.particles = observed;
            PlannerConfig plan_config = config;
            plan_config.seed = derive_seed(config.seed, static_cast<std::uint64_t>(step));
            const PlanResult plan =
                cem_plan(model, chain, q, planning_state, goal, primitive, plan_config);
            queue = plan.actions;
            last_predicted = plan.predicted_cost;
            result.cem_log.insert(result.cem_log.end(), plan.cem_log.begin(), plan.cem_log.end());
        }
        JointAction u = queue.front();
        queue.erase(queue.begin());

        const DisplacementField field = joint_action_to_displacement(chain, q, u);
        object = step_object(object, hand, field, true_params);
        for (std::size_t j = 0; j < q.size(); ++j) q[j] += u[j];
        for (std::size_t i = 0; i < hand.size(); ++i) hand[i] += field[i];

        result.executed.push_back(u);
        result.object_history.push_back(object_particles(object));
        const double realized =
            evaluate_cost(object_particles(object), goal, config.cost, &ctx);
        result.log.push_back({step, last_predicted, realized});
    }
    result.final_object = object;
    result.final_q = q;
    result.final_cost = evaluate_cost(object_particles(object), goal, config.cost, &ctx);
    return result;
}

}  // namespace pw
