#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pw/kinematics.hpp"
#include "pw/oracle.hpp"
#include "pw/rng.hpp"
#include "pw/vec3.hpp"

namespace pw {

// One recorded time step: hand and object particle sets plus the hand
// displacement leading to the next frame (zeros on the final frame).
struct Frame {
    PointSet hand;
    PointSet object;
    DisplacementField action;
};

struct Trajectory {
    std::string embodiment_name;
    std::string domain_label;
    std::vector<Frame> frames;
    double dt = 0.1;
    OracleDomainParams oracle_params;
    std::uint64_t seed = 0;

    // Checks shared counts and the action-consistency invariant
    // (action_t == hand_{t+1} - hand_t within 1e-9).
    void validate() const;
};

// A single supervised training example with its provenance tags.
struct Transition {
    PointSet hand;
    PointSet object;
    DisplacementField action;
    PointSet next_object;
    std::string embodiment;
    std::string domain;
};

using TransitionBatch = std::vector<Transition>;

std::vector<Transition> flatten_transitions(const std::vector<Trajectory>& trajectories);

struct CollectSettings {
    int object_count = 128;        // blob particle count (boxes use their perimeter count)
    double dt = 0.1;
    double limit_fraction = 0.8;   // random actions stay within this fraction of joint limits
    double max_particle_step = 0.02;
    int primitive_steps = 4;       // fragment length of each sampled primitive
};

// Random-interaction trajectories: per segment, sample one motion primitive
// and a parameter vector, decode, clamp, step the matching oracle, record.
// Deterministic for a fixed seed; per-trajectory seeds are split from it.
std::vector<Trajectory> collect_random_trajectories(const KinematicChain& chain, TaskKind task,
                                                    const OracleDomainParams& params, int count,
                                                    int horizon, std::uint64_t seed,
                                                    const CollectSettings& settings = {});

// On-disk dataset: a JSON header line, then per trajectory a JSON header line
// followed by one length-prefixed binary blob per frame
// ([hand Ne*3 | object No*3 | action Ne*3], little-endian float32).
void write_dataset(const std::vector<Trajectory>& trajectories, const std::string& path,
                   const std::string& config_hash = "");
std::vector<Trajectory> read_dataset(const std::string& path);

std::string dataset_to_bytes(const std::vector<Trajectory>& trajectories,
                             const std::string& config_hash);
std::vector<Trajectory> dataset_from_bytes(const std::string& bytes);

// Weighted transition sampler for co-training. Each draw picks source i with
// probability weight_i / sum(weights), then a uniform transition within it.
class MixtureStream {
  public:
    MixtureStream(std::vector<std::pair<const std::vector<Trajectory>*, double>> sources,
                  int batch_size, std::uint64_t seed);

    TransitionBatch next();
    int batch_size() const { return batch_size_; }

  private:
    std::vector<std::vector<Transition>> pools_;
    std::vector<double> cumulative_;
    int batch_size_;
    Rng rng_;
};

}  // namespace pw
