#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "pw/config.hpp"
#include "pw/error.hpp"
#include "pw/rng.hpp"
#include "pw/serialize.hpp"

using namespace pw;
namespace fs = std::filesystem;

namespace {

struct RunOutput {
    int exit_code = -1;
    std::string stdout_text;
};

RunOutput run_cli(const std::string& cli_args) {
    const std::string out_file = "/tmp/pw_cli_stdout.txt";
    const std::string cmd =
        std::string(PW_BIN_PATH) + " " + cli_args + " > " + out_file + " 2>&1";
    const int status = std::system(cmd.c_str());
    RunOutput out;
    out.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    out.stdout_text = read_file(out_file);
    return out;
}

// Small but real config: one tiny embodiment, tiny model, tiny budgets.
const char* kTestConfig = R"({
  "seed": 7,
  "embodiments": [
    {"name": "tiny", "fingers": 2, "links_per_finger": 2, "samples_per_link": 3,
     "palm_samples": 4, "seed": 21}
  ],
  "collect": {"task": "reshape", "embodiment": "tiny", "count": 3, "horizon": 6,
              "object_count": 12},
  "model": {"hidden_dim": 6, "propagation_steps": 2, "connection_radius": 0.05,
            "mlp_depth": 2, "history_frames": 1},
  "train": {"steps": 12, "batch_size": 4, "epoch_steps": 6, "val_fraction": 0.34},
  "planner": {"task": "reshape", "embodiment": "tiny", "horizon": 2, "samples": 6,
              "elite_fraction": 0.34, "iterations": 1, "cost": "chamfer",
              "replan_every": 2, "step_budget": 2}
})";

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::path("/tmp") / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("config parsing validates the schema") {
    CHECK_THROWS_AS(parse_run_config("{\"nonsense\": {}}"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("{\"train\": {\"nonsense\": 1}}"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("not json"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("{\"embodiments\": [{\"unknown_key\": 1}]}"), ConfigError);

    const RunConfig cfg = parse_run_config(kTestConfig);
    CHECK(cfg.seed == 7);
    CHECK(cfg.model().hidden_dim == 6);
    CHECK(cfg.embodiment("tiny").fingers == 2);
    CHECK_THROWS_AS(cfg.embodiment("missing"), ConfigError);
    CHECK(cfg.hash.size() == 16);

    // Seed override changes the hash (it is part of the document).
    const RunConfig other = parse_run_config(kTestConfig, 8);
    CHECK(other.seed == 8);
    CHECK(other.hash != cfg.hash);
}

TEST_CASE("environment overrides reach the config") {
    setenv("PW_TRAIN_STEPS", "44", 1);
    const RunConfig cfg = parse_run_config(kTestConfig);
    unsetenv("PW_TRAIN_STEPS");
    CHECK(cfg.train_settings().steps == 44);

    setenv("PW_TRAIN_TYPO", "44", 1);
    CHECK_THROWS_AS(parse_run_config(kTestConfig), ConfigError);
    unsetenv("PW_TRAIN_TYPO");
}

TEST_CASE("collect and train round trip through the CLI") {
    TempDir dir("pw_cli_test");
    const std::string config_path = (dir.path / "config.json").string();
    write_file(config_path, kTestConfig);

    SUBCASE("collect writes datasets deterministically") {
        const RunOutput first =
            run_cli("collect --config " + config_path + " --out " + (dir.path / "d1").string());
        INFO(first.stdout_text);
        CHECK(first.exit_code == 0);
        const fs::path dataset = dir.path / "d1" / "tiny-sim-reshape.pwds";
        REQUIRE(fs::exists(dataset));
        CHECK(first.stdout_text.find("3 trajectories") != std::string::npos);

        const RunOutput second =
            run_cli("collect --config " + config_path + " --out " + (dir.path / "d2").string());
        CHECK(second.exit_code == 0);
        CHECK(read_file((dir.path / "d1" / "tiny-sim-reshape.pwds").string()) ==
              read_file((dir.path / "d2" / "tiny-sim-reshape.pwds").string()));
    }

    SUBCASE("missing embodiment name exits 2 naming it") {
        std::string broken(kTestConfig);
        const auto at = broken.find("\"embodiment\": \"tiny\"");
        broken.replace(at, 20, "\"embodiment\": \"ghost\"");
        const std::string broken_path = (dir.path / "broken.json").string();
        write_file(broken_path, broken);
        const RunOutput out =
            run_cli("collect --config " + broken_path + " --out " + (dir.path / "x").string());
        CHECK(out.exit_code == 2);
        CHECK(out.stdout_text.find("ghost") != std::string::npos);
    }

    SUBCASE("train produces a readable checkpoint and log; corrupt data exits 3") {
        run_cli("collect --config " + config_path + " --out " + dir.path.string());
        const std::string dataset = (dir.path / "tiny-sim-reshape.pwds").string();
        const std::string ckpt = (dir.path / "model.pwck").string();
        const RunOutput trained = run_cli("train --config " + config_path + " --data " + dataset +
                                          " --out " + ckpt + " --log " +
                                          (dir.path / "log.jsonl").string());
        INFO(trained.stdout_text);
        CHECK(trained.exit_code == 0);
        const Checkpoint loaded = load_checkpoint(ckpt);
        CHECK(loaded.meta.config.hidden_dim == 6);
        CHECK(loaded.meta.dataset_fingerprints.size() == 1);
        CHECK(fs::exists(dir.path / "log.jsonl"));

        // Rerun: checkpoint bytes identical.
        const std::string ckpt2 = (dir.path / "model2.pwck").string();
        run_cli("train --config " + config_path + " --data " + dataset + " --out " + ckpt2);
        CHECK(read_file(ckpt) == read_file(ckpt2));

        // Truncated dataset -> exit 3.
        const std::string broken_data = (dir.path / "broken.pwds").string();
        const std::string bytes = read_file(dataset);
        write_file(broken_data, bytes.substr(0, bytes.size() / 2));
        const RunOutput bad = run_cli("train --config " + config_path + " --data " + broken_data +
                                      " --out " + (dir.path / "bad.pwck").string());
        CHECK(bad.exit_code == 3);
        CHECK(bad.stdout_text.find("byte offset") != std::string::npos);
    }

    SUBCASE("plan validates checkpoint-config compatibility") {
        run_cli("collect --config " + config_path + " --out " + dir.path.string());
        const std::string dataset = (dir.path / "tiny-sim-reshape.pwds").string();
        const std::string ckpt = (dir.path / "model.pwck").string();
        run_cli("train --config " + config_path + " --data " + dataset + " --out " + ckpt);

        // Goal: reuse the final object of a collected trajectory as target.
        const auto trajs = read_dataset(dataset);
        std::string payload;
        put_points_f32(payload, trajs[0].frames.back().object);
        nlohmann::json goal{{"target_points_b64", base64_encode(payload)}};
        const std::string goal_path = (dir.path / "goal.json").string();
        write_file(goal_path, goal.dump());

        const RunOutput planned =
            run_cli("plan --config " + config_path + " --checkpoint " + ckpt + " --goal " +
                    goal_path + " --out " + (dir.path / "plan").string());
        INFO(planned.stdout_text);
        CHECK(planned.exit_code == 0);
        CHECK(fs::exists(dir.path / "plan" / "plan_log.jsonl"));
        CHECK(planned.stdout_text.find("final chamfer cost") != std::string::npos);

        // Mismatched model config -> exit 5.
        std::string other(kTestConfig);
        const auto at = other.find("\"hidden_dim\": 6");
        other.replace(at, 15, "\"hidden_dim\": 8");
        const std::string other_path = (dir.path / "other.json").string();
        write_file(other_path, other);
        const RunOutput mismatch =
            run_cli("plan --config " + other_path + " --checkpoint " + ckpt + " --goal " +
                    goal_path + " --out " + (dir.path / "plan2").string());
        CHECK(mismatch.exit_code == 5);

        // Oracle-model planning works without a checkpoint.
        const RunOutput oracle_run =
            run_cli("plan --config " + config_path + " --model oracle --goal " + goal_path +
                    " --out " + (dir.path / "plan3").string());
        INFO(oracle_run.stdout_text);
        CHECK(oracle_run.exit_code == 0);
    }
}

TEST_CASE("study commands emit deterministic CSVs") {
    TempDir dir("pw_cli_study");
    nlohmann::json cfg = nlohmann::json::parse(kTestConfig);
    cfg["embodiments"] = nlohmann::json::array();
    for (int i = 0; i < 3; ++i)
        cfg["embodiments"].push_back({{"name", "e" + std::to_string(i)},
                                      {"fingers", 2},
                                      {"links_per_finger", 2},
                                      {"samples_per_link", 3},
                                      {"palm_samples", 4},
                                      {"seed", 100 + i}});
    cfg["scaling"] = {{"embodiments", {"e0", "e1", "e2"}}, {"subset_sizes", {1, 2}},
                      {"seeds", {1}},  {"task", "reshape"},
                      {"count", 2},    {"eval_count", 1},
                      {"horizon", 5},  {"object_count", 10}};
    cfg["cotrain"] = {{"ratios", {{1, 0}, {0, 1}, {1, 1}}}, {"sim_embodiment", "e0"},
                      {"real_embodiment", "e0"},            {"task", "reshape"},
                      {"sim_count", 2},                     {"real_count", 2},
                      {"eval_count", 1},                    {"horizon", 5},
                      {"seeds", {1}},                       {"object_count", 10}};
    const std::string config_path = (dir.path / "config.json").string();
    write_file(config_path, cfg.dump());

    SUBCASE("scale-study") {
        const RunOutput out = run_cli("scale-study --config " + config_path + " --out " +
                                      (dir.path / "s1").string());
        INFO(out.stdout_text);
        CHECK(out.exit_code == 0);
        const std::string csv = read_file((dir.path / "s1" / "scaling.csv").string());
        CHECK(csv.find("target,x,subset,seed,mse") != std::string::npos);
        // 3 targets x (C(2,1)+C(2,2)) runs + 3 references.
        int lines = 0;
        for (char c : csv)
            if (c == '\n') ++lines;
        CHECK(lines == 2 + 3 * 3 + 3);
        CHECK(fs::exists(dir.path / "s1" / "scaling_summary.csv"));
        CHECK(fs::exists(dir.path / "s1" / "scaling.svg"));

        const RunOutput again = run_cli("scale-study --config " + config_path + " --out " +
                                        (dir.path / "s2").string());
        CHECK(again.exit_code == 0);
        CHECK(read_file((dir.path / "s2" / "scaling.csv").string()) == csv);

        // Summary means match a recomputation from the raw rows.
        const std::string summary =
            read_file((dir.path / "s1" / "scaling_summary.csv").string());
        CHECK(summary.find("target,x,n,mean,ci_lo,ci_hi,ci_valid") != std::string::npos);
    }
    SUBCASE("cotrain-study") {
        const RunOutput out = run_cli("cotrain-study --config " + config_path + " --out " +
                                      (dir.path / "c1").string());
        INFO(out.stdout_text);
        CHECK(out.exit_code == 0);
        const std::string csv = read_file((dir.path / "c1" / "cotrain.csv").string());
        CHECK(csv.find("sim_weight,real_weight,seed,mse") != std::string::npos);
        int lines = 0;
        for (char c : csv)
            if (c == '\n') ++lines;
        CHECK(lines == 2 + 3);
        const RunOutput again = run_cli("cotrain-study --config " + config_path + " --out " +
                                        (dir.path / "c2").string());
        CHECK(read_file((dir.path / "c2" / "cotrain.csv").string()) == csv);
    }
    SUBCASE("missing datasets with collect_missing=false exits 2") {
        nlohmann::json strict = cfg;
        strict["scaling"]["collect_missing"] = false;
        const std::string strict_path = (dir.path / "strict.json").string();
        write_file(strict_path, strict.dump());
        const RunOutput out = run_cli("scale-study --config " + strict_path + " --out " +
                                      (dir.path / "s3").string());
        CHECK(out.exit_code == 2);
        CHECK(out.stdout_text.find("missing dataset") != std::string::npos);
    }
}
