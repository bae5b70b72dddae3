#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pw/config.hpp"
#include "pw/dataset.hpp"
#include "pw/error.hpp"
#include "pw/experiments.hpp"
#include "pw/geometry.hpp"
#include "pw/kinematics.hpp"
#include "pw/model.hpp"
#include "pw/oracle.hpp"
#include "pw/planner.hpp"
#include "pw/rng.hpp"
#include "pw/serialize.hpp"

namespace fs = std::filesystem;
using namespace pw;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitTraining = 4;
constexpr int kExitCheckpointMismatch = 5;

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string out;
};

RunConfig load_config(const CommonArgs& args) {
    return load_run_config(args.config_path, args.seed, args.threads);
}

std::string dataset_filename(const std::string& embodiment, const std::string& domain,
                             const std::string& task, const std::string& split) {
    return embodiment + "-" + domain + "-" + task + (split.empty() ? "" : "-" + split) + ".pwds";
}

std::vector<Trajectory> collect_for(const RunConfig& cfg, const std::string& embodiment,
                                    const std::string& domain, TaskKind task, int count,
                                    int horizon, std::uint64_t seed) {
    const KinematicChain chain = generate_embodiment(cfg.embodiment(embodiment));
    return collect_random_trajectories(chain, task, cfg.oracle(domain), count, horizon, seed,
                                       cfg.collect_settings());
}

// Collects into data_dir unless the file already exists.
std::vector<Trajectory> ensure_dataset(const RunConfig& cfg, const fs::path& data_dir,
                                       const std::string& embodiment, const std::string& domain,
                                       TaskKind task, const std::string& split, int count,
                                       int horizon, std::uint64_t seed, bool collect_missing) {
    const fs::path path = data_dir / dataset_filename(embodiment, domain, task_name(task), split);
    if (fs::exists(path)) return read_dataset(path.string());
    if (!collect_missing)
        throw ConfigError("missing dataset: " + path.string());
    auto trajs = collect_for(cfg, embodiment, domain, task, count, horizon, seed);
    write_dataset(trajs, path.string(), cfg.hash);
    return trajs;
}

int cmd_collect(const CommonArgs& args) {
    const RunConfig cfg = load_config(args);
    const std::string embodiment = cfg.get<std::string>("collect", "embodiment", "hand-a");
    const std::string domain = cfg.get<std::string>("collect", "domain", "sim");
    const TaskKind task = task_from_name(cfg.get<std::string>("collect", "task", "reshape"));
    const int count = cfg.get<int>("collect", "count", 100);
    const int horizon = cfg.get<int>("collect", "horizon", 20);

    const auto trajs = collect_for(cfg, embodiment, domain, task,
                                   count, horizon, derive_seed(cfg.seed, "collect"));
    fs::create_directories(args.out);
    const fs::path path =
        fs::path(args.out) / dataset_filename(embodiment, domain, task_name(task), "");
    const std::string bytes = dataset_to_bytes(trajs, cfg.hash);
    write_file(path.string(), bytes);
    std::printf("wrote %zu trajectories (%zu bytes) to %s\n", trajs.size(), bytes.size(),
                path.c_str());
    return 0;
}

int cmd_train(const CommonArgs& args, const std::vector<std::string>& data_paths,
              const std::string& log_path) {
    const RunConfig cfg = load_config(args);
    if (data_paths.empty()) throw ConfigError("train: at least one --data path required");

    std::vector<std::vector<Trajectory>> datasets;
    std::vector<std::string> fingerprints;
    for (const std::string& path : data_paths) {
        datasets.push_back(read_dataset(path));
        fingerprints.push_back(file_fingerprint(path));
    }

    // Hold out the trailing fraction of each dataset for validation.
    const double val_fraction = cfg.get<double>("train", "val_fraction", 0.1);
    std::vector<std::vector<Trajectory>> train_sets;
    std::vector<Transition> validation;
    for (auto& trajs : datasets) {
        const std::size_t holdout =
            std::min(trajs.size() - 1,
                     static_cast<std::size_t>(std::floor(trajs.size() * val_fraction)));
        std::vector<Trajectory> train_part(trajs.begin(), trajs.end() - holdout);
        const std::vector<Trajectory> val_part(trajs.end() - holdout, trajs.end());
        const auto val_transitions = flatten_transitions(val_part);
        validation.insert(validation.end(), val_transitions.begin(), val_transitions.end());
        train_sets.push_back(std::move(train_part));
    }

    std::vector<std::pair<const std::vector<Trajectory>*, double>> sources;
    for (const auto& set : train_sets) {
        double transitions = 0.0;
        for (const Trajectory& t : set) transitions += static_cast<double>(t.frames.size() - 1);
        sources.push_back({&set, transitions});
    }
    const ModelConfig model_config = cfg.model();
    MixtureStream stream(sources, cfg.train_batch_size(), derive_seed(cfg.seed, "train-stream"));
    TrainSettings settings = cfg.train_settings();
    settings.seed = derive_seed(cfg.seed, "train");

    const TrainResult result =
        train_model(model_config, stream, settings, validation.empty() ? nullptr : &validation);

    CheckpointMeta meta;
    meta.config = model_config;
    meta.training_seed = settings.seed;
    meta.dataset_fingerprints = fingerprints;
    meta.config_hash = cfg.hash;
    fs::create_directories(fs::path(args.out).parent_path().empty()
                               ? fs::path(".")
                               : fs::path(args.out).parent_path());
    save_checkpoint(args.out, result.params, meta);

    std::string log_text = nlohmann::json{{"config_hash", cfg.hash}}.dump() + "\n";
    for (const EpochLog& epoch : result.log) {
        nlohmann::json record{{"epoch", epoch.epoch}, {"train_loss", epoch.train_loss}};
        if (std::isfinite(epoch.val_loss)) record["val_loss"] = epoch.val_loss;
        log_text += record.dump() + "\n";
    }
    if (!log_path.empty()) write_file(log_path, log_text);
    std::printf("trained %d steps; final train loss %.6e; checkpoint %s\n", settings.steps,
                result.log.empty() ? 0.0 : result.log.back().train_loss, args.out.c_str());
    return 0;
}

Goal load_goal(const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("goal file parse: ") + e.what(), e.byte);
    }
    Goal goal;
    if (doc.contains("target_yaw")) goal.target_yaw = doc.at("target_yaw").get<double>();
    if (doc.contains("target_points_b64")) {
        const std::string bytes = base64_decode(doc.at("target_points_b64").get<std::string>());
        if (bytes.size() % 12 != 0)
            throw FormatError("goal points payload not a multiple of 12 bytes", bytes.size());
        ByteReader reader(bytes);
        goal.target_points = reader.get_points_f32(bytes.size() / 12, "goal points");
    }
    if (!goal.target_yaw && !goal.target_points)
        throw ConfigError("goal file must define target_yaw or target_points_b64");
    return goal;
}

int cmd_plan(const CommonArgs& args, const std::string& checkpoint_path,
             const std::string& goal_path, const std::string& model_kind) {
    const RunConfig cfg = load_config(args);
    const std::string embodiment = cfg.get<std::string>("planner", "embodiment", "hand-a");
    const std::string domain = cfg.get<std::string>("planner", "domain", "sim");
    const TaskKind task = task_from_name(cfg.get<std::string>("planner", "task", "reshape"));
    const OracleDomainParams oracle_params = cfg.oracle(domain);
    const ModelConfig model_config = cfg.model();

    std::optional<Checkpoint> checkpoint;
    if (model_kind == "learned") {
        if (checkpoint_path.empty()) throw ConfigError("plan: --checkpoint required for --model learned");
        checkpoint = load_checkpoint(checkpoint_path);
        if (!(checkpoint->meta.config == model_config))
            throw CheckpointMismatch("checkpoint model config does not match run config");
    } else if (model_kind != "oracle") {
        throw ConfigError("plan: --model must be learned or oracle");
    }

    const KinematicChain chain = generate_embodiment(cfg.embodiment(embodiment));
    const Goal goal = load_goal(goal_path);

    const int object_count = cfg.get<int>("collect", "object_count", 24);
    const ObjectState object = make_initial_object(task, object_count, oracle_params,
                                                   derive_seed(cfg.seed, "plan-object"));
    JointState q(chain.dof(), 0.0);
    {
        Rng rng(derive_seed(cfg.seed, "plan-pose"));
        const auto& w = chain.wrist_joints;
        if (task == TaskKind::Push) {
            q[w[0]] = -0.11;
            q[w[2]] = 0.04;
            for (const auto& finger : chain.finger_joints)
                for (int j : finger) q[j] = 0.5 + 0.02 * rng.uniform01();
        } else {
            q[w[0]] = -0.095;
            q[w[2]] = 0.04;
            for (const auto& finger : chain.finger_joints)
                for (int j : finger) q[j] = 0.4 + 0.02 * rng.uniform01();
        }
    }

    PlannerConfig planner_config = cfg.planner(derive_seed(cfg.seed, "plan"));
    std::vector<PrimitiveKind> schedule;
    if (cfg.has("planner", "primitive_schedule")) {
        for (const auto& name :
             cfg.doc.at("planner").at("primitive_schedule").get<std::vector<std::string>>())
            schedule.push_back(primitive_kind_from_name(name));
    } else if (task == TaskKind::Push) {
        schedule = {PrimitiveKind::PlanarPush};
    } else {
        schedule = {PrimitiveKind::FingersPinch, PrimitiveKind::PalmPress,
                    PrimitiveKind::ThumbPinch};
    }
    const int replan_every = cfg.get<int>("planner", "replan_every", 2);
    const int step_budget = cfg.get<int>("planner", "step_budget", 16);

    MpcResult result;
    if (model_kind == "learned") {
        LearnedRollout model(checkpoint->params, checkpoint->meta.config);
        result = mpc_execute(model, oracle_params, chain, q, object, goal, schedule,
                             planner_config, replan_every, step_budget);
    } else {
        OracleRollout model(oracle_params);
        result = mpc_execute(model, oracle_params, chain, q, object, goal, schedule,
                             planner_config, replan_every, step_budget);
    }

    fs::create_directories(args.out);
    std::string log_text = nlohmann::json{{"config_hash", cfg.hash}}.dump() + "\n";
    for (const CemIterationLog& it : result.cem_log)
        log_text += nlohmann::json{{"type", "cem"},
                                   {"iteration", it.iteration},
                                   {"best_cost", it.best_cost},
                                   {"mean_cost", it.mean_cost},
                                   {"std_norm", it.std_norm}}
                        .dump() +
                    "\n";
    for (const MpcStepLog& step : result.log)
        log_text += nlohmann::json{{"type", "mpc_step"},
                                   {"step", step.step},
                                   {"predicted_cost", step.predicted_cost},
                                   {"realized_cost", step.realized_cost}}
                        .dump() +
                    "\n";
    write_file((fs::path(args.out) / "plan_log.jsonl").string(), log_text);
    std::printf("final %s cost: %.6e (initial %.6e)\n",
                cost_kind_name(planner_config.cost).c_str(), result.final_cost,
                result.log.empty() ? result.final_cost : result.log.front().realized_cost);
    return 0;
}

int cmd_scale_study(const CommonArgs& args) {
    const RunConfig cfg = load_config(args);
    ScalingStudySpec spec;
    spec.embodiments =
        cfg.has("scaling", "embodiments")
            ? cfg.doc.at("scaling").at("embodiments").get<std::vector<std::string>>()
            : cfg.embodiment_names();
    const TaskKind task = task_from_name(cfg.get<std::string>("scaling", "task", "reshape"));
    const int count = cfg.get<int>("scaling", "count", 40);
    const int eval_count = cfg.get<int>("scaling", "eval_count", 8);
    const int horizon = cfg.get<int>("scaling", "horizon", 20);
    spec.subset_sizes = cfg.has("scaling", "subset_sizes")
                            ? cfg.doc.at("scaling").at("subset_sizes").get<std::vector<int>>()
                            : std::vector<int>{1, 2, 3};
    spec.seeds = cfg.has("scaling", "seeds")
                     ? cfg.doc.at("scaling").at("seeds").get<std::vector<std::uint64_t>>()
                     : std::vector<std::uint64_t>{1, 2};
    spec.model = cfg.model();
    spec.train = cfg.train_settings();
    spec.batch_size = cfg.train_batch_size();
    spec.threads = cfg.threads;

    fs::create_directories(args.out);
    const fs::path data_dir = cfg.has("scaling", "data_dir")
                                  ? fs::path(cfg.get<std::string>("scaling", "data_dir", ""))
                                  : fs::path(args.out) / "data";
    fs::create_directories(data_dir);
    const bool collect_missing = cfg.get<bool>("scaling", "collect_missing", true);

    for (const std::string& name : spec.embodiments) {
        spec.train_data[name] = ensure_dataset(cfg, data_dir, name, "sim", task, "train", count,
                                               horizon, derive_seed(cfg.seed, name + "|train"),
                                               collect_missing);
        spec.eval_data[name] = flatten_transitions(
            ensure_dataset(cfg, data_dir, name, "sim", task, "eval", eval_count, horizon,
                           derive_seed(cfg.seed, name + "|eval"), collect_missing));
    }

    const auto rows = run_scaling_study(spec);
    write_file((fs::path(args.out) / "scaling.csv").string(),
               scaling_rows_to_csv(rows, cfg.hash));

    std::vector<std::pair<std::string, double>> keyed;
    for (const ScalingRow& r : rows)
        keyed.push_back({r.target + "," + std::to_string(r.x), r.mse});
    const auto summaries = summarize(keyed);
    write_file((fs::path(args.out) / "scaling_summary.csv").string(),
               summaries_to_csv(summaries, "target,x", cfg.hash));

    std::map<std::string, SvgSeries> series;
    for (const Summary& s : summaries) {
        const auto comma = s.key.find(',');
        const std::string target = s.key.substr(0, comma);
        const int x = std::stoi(s.key.substr(comma + 1));
        if (x > static_cast<int>(spec.embodiments.size()) - 1) continue;  // reference line
        series[target].label = target;
        series[target].x.push_back(x);
        series[target].y.push_back(s.mean);
    }
    std::vector<SvgSeries> chart;
    for (auto& [name, s] : series) chart.push_back(s);
    write_file((fs::path(args.out) / "scaling.svg").string(),
               render_line_chart_svg("held-out one-step MSE vs training embodiments",
                                     "training subset size x", "MSE", chart, cfg.hash));
    std::printf("scaling study: %zu rows -> %s\n", rows.size(), args.out.c_str());
    return 0;
}

int cmd_cotrain_study(const CommonArgs& args) {
    const RunConfig cfg = load_config(args);
    CoTrainSpec spec;
    if (cfg.has("cotrain", "ratios")) {
        for (const auto& pair : cfg.doc.at("cotrain").at("ratios"))
            spec.ratios.push_back({pair.at(0).get<double>(), pair.at(1).get<double>()});
    } else {
        spec.ratios = {{1, 0}, {0, 1}, {1, 1}, {4, 1}, {1, 4}};
    }
    const TaskKind task = task_from_name(cfg.get<std::string>("cotrain", "task", "reshape"));
    const std::string sim_embodiment = cfg.get<std::string>("cotrain", "sim_embodiment", "hand-a");
    const std::string real_embodiment =
        cfg.get<std::string>("cotrain", "real_embodiment", sim_embodiment);
    const int sim_count = cfg.get<int>("cotrain", "sim_count", 40);
    const int real_count = cfg.get<int>("cotrain", "real_count", 10);
    const int eval_count = cfg.get<int>("cotrain", "eval_count", 8);
    const int horizon = cfg.get<int>("cotrain", "horizon", 20);
    spec.seeds = cfg.has("cotrain", "seeds")
                     ? cfg.doc.at("cotrain").at("seeds").get<std::vector<std::uint64_t>>()
                     : std::vector<std::uint64_t>{1, 2};
    spec.model = cfg.model();
    spec.train = cfg.train_settings();
    spec.batch_size = cfg.train_batch_size();
    spec.threads = cfg.threads;

    const auto sim_data = collect_for(cfg, sim_embodiment, "sim", task, sim_count, horizon,
                                      derive_seed(cfg.seed, "cotrain-sim"));
    const auto real_data = collect_for(cfg, real_embodiment, "real-proxy", task, real_count,
                                       horizon, derive_seed(cfg.seed, "cotrain-real"));
    const auto eval_data = collect_for(cfg, real_embodiment, "real-proxy", task, eval_count,
                                       horizon, derive_seed(cfg.seed, "cotrain-eval"));
    spec.sim_data = &sim_data;
    spec.real_data = &real_data;
    spec.eval_real = flatten_transitions(eval_data);

    const auto rows = run_cotrain_study(spec);
    fs::create_directories(args.out);
    write_file((fs::path(args.out) / "cotrain.csv").string(),
               cotrain_rows_to_csv(rows, cfg.hash));

    std::vector<std::pair<std::string, double>> keyed;
    for (const CoTrainRow& r : rows) {
        std::ostringstream key;
        key << r.sim_weight << ":" << r.real_weight;
        keyed.push_back({key.str(), r.mse});
    }
    const auto summaries = summarize(keyed);
    write_file((fs::path(args.out) / "cotrain_summary.csv").string(),
               summaries_to_csv(summaries, "ratio", cfg.hash));

    SvgSeries line;
    line.label = "eval-on-real";
    for (std::size_t i = 0; i < summaries.size(); ++i) {
        line.x.push_back(static_cast<double>(i));
        line.y.push_back(summaries[i].mean);
    }
    write_file((fs::path(args.out) / "cotrain.svg").string(),
               render_line_chart_svg("held-out real-proxy MSE per mixture", "ratio index", "MSE",
                                     {line}, cfg.hash));
    std::printf("cotrain study: %zu rows -> %s\n", rows.size(), args.out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"particle-space world models: collect, train, plan, study"};
    app.require_subcommand(1);

    CommonArgs args;
    std::vector<std::string> data_paths;
    std::string checkpoint_path, goal_path, log_path;
    std::string model_kind = "learned";

    auto add_common = [&](CLI::App* cmd, bool needs_out) {
        cmd->add_option("--config", args.config_path, "run configuration JSON")->required();
        cmd->add_option("--seed", args.seed, "master seed override");
        cmd->add_option("--threads", args.threads, "worker threads (1 = bit-reproducible)");
        auto* out = cmd->add_option("--out", args.out, "output directory or file");
        if (needs_out) out->required();
    };

    CLI::App* collect = app.add_subcommand("collect", "collect random-interaction trajectories");
    add_common(collect, true);
    CLI::App* train = app.add_subcommand("train", "train a dynamics model");
    add_common(train, true);
    train->add_option("--data", data_paths, "dataset file(s)")->required();
    train->add_option("--log", log_path, "training log path (JSON lines)");
    CLI::App* plan = app.add_subcommand("plan", "CEM-MPC toward a goal");
    add_common(plan, true);
    plan->add_option("--checkpoint", checkpoint_path, "model checkpoint");
    plan->add_option("--goal", goal_path, "goal file (JSON)")->required();
    plan->add_option("--model", model_kind, "learned|oracle");
    CLI::App* scale = app.add_subcommand("scale-study", "embodiment-scaling study");
    add_common(scale, true);
    CLI::App* cotrain = app.add_subcommand("cotrain-study", "sim/real co-training study");
    add_common(cotrain, true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (collect->parsed()) return cmd_collect(args);
        if (train->parsed()) return cmd_train(args, data_paths, log_path);
        if (plan->parsed()) return cmd_plan(args, checkpoint_path, goal_path, model_kind);
        if (scale->parsed()) return cmd_scale_study(args);
        if (cotrain->parsed()) return cmd_cotrain_study(args);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const ParameterError& e) {
        std::fprintf(stderr, "parameter error: %s\n", e.what());
        return kExitConfig;
    } catch (const VersionError& e) {
        std::fprintf(stderr, "version error: %s\n", e.what());
        return kExitIo;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "format error: %s\n", e.what());
        return kExitIo;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return kExitIo;
    } catch (const TrainingError& e) {
        std::fprintf(stderr, "training error: %s\n", e.what());
        return kExitTraining;
    } catch (const CheckpointMismatch& e) {
        std::fprintf(stderr, "checkpoint mismatch: %s\n", e.what());
        return kExitCheckpointMismatch;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
