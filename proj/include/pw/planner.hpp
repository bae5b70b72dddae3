#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pw/kinematics.hpp"
#include "pw/model.hpp"
#include "pw/oracle.hpp"
#include "pw/primitives.hpp"

namespace pw {

enum class CostKind { Chamfer, Emd, YawError };
std::string cost_kind_name(CostKind kind);
CostKind cost_kind_from_name(const std::string& name);

struct Goal {
    std::optional<PointSet> target_points;  // reshaping
    std::optional<double> target_yaw;       // pushing (radians)
};

// Reference layout used to read a yaw estimate out of predicted particles.
struct CostContext {
    PointSet reference_object;
    double reference_yaw = 0.0;
};

// Wraps into (-pi, pi].
double wrap_angle(double angle);

// Planar Procrustes angle between corresponding particle sets: the yaw that
// best rotates `reference` onto `current` about their common centroid.
double estimate_yaw(const PointSet& reference, const PointSet& current);

double evaluate_cost(const PointSet& predicted_final, const Goal& goal, CostKind kind,
                     const CostContext* context = nullptr);

struct PlannerConfig {
    int horizon = 4;              // actions per plan
    int samples = 32;             // per CEM iteration
    double elite_fraction = 0.125;
    int iterations = 4;
    double initial_std_scale = 0.5;  // of each parameter's half-range
    double std_floor = 0.02;
    CostKind cost = CostKind::Chamfer;
    std::uint64_t seed = 0;
    double max_particle_step = 0.02;  // displacement cap per action
    int threads = 1;

    void validate() const;
    int elite_count() const;
};

struct CemIterationLog {
    int iteration = 0;
    double best_cost = 0.0;
    double mean_cost = 0.0;
    double std_norm = 0.0;
};

struct CemResult {
    std::vector<double> best_parameters;
    double best_cost = 0.0;
    std::vector<CemIterationLog> log;
};

// Diagonal-Gaussian cross-entropy optimization with bound clamping, elite
// refits, a std floor, and best-ever retention. Deterministic for a fixed
// seed; the sample stream does not depend on evaluation order.
CemResult cem_optimize(const std::vector<std::array<double, 2>>& bounds,
                       const PlannerConfig& config,
                       const std::function<double(const std::vector<double>&)>& cost_fn);

// Dynamics used for planning rollouts: the learned model or the oracle itself.
class RolloutModel {
  public:
    virtual ~RolloutModel() = default;
    virtual PointSet final_object(const PointSet& hand0, const ObjectState& object0,
                                  const std::vector<DisplacementField>& fields) const = 0;
};

class LearnedRollout : public RolloutModel {
  public:
    LearnedRollout(const ModelParams& params, const ModelConfig& config)
        : params_(&params), config_(&config) {}
    PointSet final_object(const PointSet& hand0, const ObjectState& object0,
                          const std::vector<DisplacementField>& fields) const override;

  private:
    const ModelParams* params_;
    const ModelConfig* config_;
};

class OracleRollout : public RolloutModel {
  public:
    explicit OracleRollout(const OracleDomainParams& params) : params_(&params) {}
    PointSet final_object(const PointSet& hand0, const ObjectState& object0,
                          const std::vector<DisplacementField>& fields) const override;

  private:
    const OracleDomainParams* params_;
};

struct PlanResult {
    std::vector<double> best_parameters;
    double predicted_cost = 0.0;
    std::vector<JointAction> actions;  // limit-clamped, displacement-capped
    std::vector<CemIterationLog> cem_log;
};

// One CEM solve over the primitive's parameter space: decode, clamp, map to
// displacement fields through FK, roll out, score the final state.
// primitive.steps must equal config.horizon.
PlanResult cem_plan(const RolloutModel& model, const KinematicChain& chain, const JointState& q0,
                    const ObjectState& object0, const Goal& goal, const Primitive& primitive,
                    const PlannerConfig& config);

struct MpcStepLog {
    int step = 0;
    double predicted_cost = 0.0;
    double realized_cost = 0.0;
};

struct MpcResult {
    std::vector<JointAction> executed;
    std::vector<PointSet> object_history;  // true object particles per step
    ObjectState final_object;
    JointState final_q;
    double final_cost = 0.0;
    std::vector<MpcStepLog> log;
    std::vector<CemIterationLog> cem_log;  // concatenated across replans
};

// Receding-horizon execution: plan with `model`, execute the first
// replan_every actions on the true oracle, re-observe, repeat. Planning sees
// observations through the domain's noise; realized costs use true particles.
MpcResult mpc_execute(const RolloutModel& model, const OracleDomainParams& true_params,
                      const KinematicChain& chain, const JointState& q0,
                      const ObjectState& object0, const Goal& goal,
                      const std::vector<PrimitiveKind>& primitive_schedule,
                      const PlannerConfig& config, int replan_every, int step_budget);

}  // namespace pw
