#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pw/dataset.hpp"
#include "pw/error.hpp"
#include "pw/kinematics.hpp"
#include "pw/model.hpp"
#include "pw/oracle.hpp"
#include "pw/planner.hpp"

namespace pw {

// Declarative run configuration: a JSON document validated against the known
// key tree (unknown keys rejected), with PW_<SECTION>_<KEY> environment
// overrides applied before hashing.
struct RunConfig {
    nlohmann::json doc;
    std::string hash;  // fnv-1a of the canonical dump, hex
    std::uint64_t seed = 0;
    int threads = 1;

    // Typed section accessors; all fall back to documented defaults.
    EmbodimentSpec embodiment(const std::string& name) const;
    std::vector<std::string> embodiment_names() const;
    OracleDomainParams oracle(const std::string& domain) const;
    ModelConfig model() const;
    TrainSettings train_settings() const;
    int train_batch_size() const;
    PlannerConfig planner(std::uint64_t seed_value) const;
    CollectSettings collect_settings() const;

    // Section/key lookup with default.
    template <typename T>
    T get(const std::string& section, const std::string& key, T fallback) const {
        if (!doc.contains(section)) return fallback;
        const auto& s = doc.at(section);
        if (!s.contains(key)) return fallback;
        try {
            return s.at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config " + section + "." + key + ": " + e.what());
        }
    }
    bool has(const std::string& section, const std::string& key) const {
        return doc.contains(section) && doc.at(section).contains(key);
    }
};

RunConfig parse_run_config(const std::string& json_text,
                           std::optional<std::uint64_t> seed_override = std::nullopt,
                           std::optional<int> threads_override = std::nullopt);
RunConfig load_run_config(const std::string& path,
                          std::optional<std::uint64_t> seed_override = std::nullopt,
                          std::optional<int> threads_override = std::nullopt);

TaskKind task_from_name(const std::string& name);
std::string task_name(TaskKind task);

}  // namespace pw
