#include "pw/config.hpp"

#include <cstdlib>
#include <map>
#include <set>

#include "pw/error.hpp"
#include "pw/rng.hpp"
#include "pw/serialize.hpp"

extern char** environ;

namespace pw {

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s = {
        {"embodiments", {}},  // array, validated separately
        {"oracle",
         {"friction", "stiffness", "plasticity_threshold", "contact_radius",
          "observation_noise_sigma"}},
        {"collect",
         {"task", "embodiment", "domain", "count", "horizon", "object_count", "dt",
          "limit_fraction", "max_particle_step", "primitive_steps"}},
        {"model",
         {"hidden_dim", "propagation_steps", "connection_radius", "mlp_depth", "history_frames"}},
        {"train",
         {"steps", "batch_size", "lr", "beta1", "beta2", "eps", "loss", "augment_rotation",
          "augment_full_so3", "epoch_steps", "divergence_limit", "val_fraction"}},
        {"planner",
         {"horizon", "samples", "elite_fraction", "iterations", "initial_std_scale", "std_floor",
          "cost", "max_particle_step", "replan_every", "step_budget", "task", "embodiment",
          "domain", "primitive_schedule"}},
        {"scaling",
         {"embodiments", "subset_sizes", "seeds", "task", "count", "eval_count", "horizon",
          "object_count", "data_dir", "collect_missing"}},
        {"cotrain",
         {"ratios", "sim_embodiment", "real_embodiment", "task", "sim_count", "real_count",
          "eval_count", "horizon", "object_count", "seeds"}},
    };
    return s;
}

const std::set<std::string> kEmbodimentKeys = {
    "name",           "preset",           "fingers",      "links_per_finger",
    "link_length_min", "link_length_max", "palm_size",    "samples_per_link",
    "palm_samples",   "seed"};

const std::set<std::string> kTopScalars = {"seed", "threads"};

void validate_schema(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigError("config root must be a JSON object");
    for (const auto& [section, value] : doc.items()) {
        if (kTopScalars.count(section)) continue;
        auto it = schema().find(section);
        if (it == schema().end())
            throw ConfigError("unknown config section '" + section + "'");
        if (section == "embodiments") {
            if (!value.is_array())
                throw ConfigError("config embodiments must be an array");
            for (const auto& item : value) {
                if (!item.is_object())
                    throw ConfigError("config embodiments entries must be objects");
                for (const auto& [k, v] : item.items())
                    if (!kEmbodimentKeys.count(k))
                        throw ConfigError("unknown key 'embodiments[]." + k + "'");
            }
            continue;
        }
        if (!value.is_object())
            throw ConfigError("config section '" + section + "' must be an object");
        for (const auto& [k, v] : value.items())
            if (!it->second.count(k))
                throw ConfigError("unknown key '" + section + "." + k + "'");
    }
}

std::string to_lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

// PW_<SECTION>_<KEY>=value overrides, applied to known scalar keys.
void apply_env_overrides(nlohmann::json& doc) {
    for (char** env = environ; *env; ++env) {
        const std::string entry(*env);
        if (entry.rfind("PW_", 0) != 0) continue;
        const std::size_t eq = entry.find('=');
        if (eq == std::string::npos) continue;
        const std::string name = entry.substr(3, eq - 3);
        const std::string value = entry.substr(eq + 1);
        const std::size_t us = name.find('_');
        if (us == std::string::npos) continue;
        const std::string section = to_lower(name.substr(0, us));
        const std::string key = to_lower(name.substr(us + 1));
        auto it = schema().find(section);
        if (it == schema().end() || !it->second.count(key))
            throw ConfigError("environment override PW_" + name + " names unknown key '" +
                              section + "." + key + "'");
        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(value);
        } catch (const nlohmann::json::parse_error&) {
            parsed = value;  // plain string
        }
        doc[section][key] = parsed;
    }
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text,
                           std::optional<std::uint64_t> seed_override,
                           std::optional<int> threads_override) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config parse: ") + e.what());
    }
    validate_schema(doc);
    apply_env_overrides(doc);
    if (seed_override) doc["seed"] = *seed_override;
    if (threads_override) doc["threads"] = *threads_override;
    validate_schema(doc);

    RunConfig cfg;
    cfg.doc = doc;
    cfg.hash = hash_hex(fnv1a64(doc.dump()));
    cfg.seed = doc.value("seed", std::uint64_t{0});
    cfg.threads = doc.value("threads", 1);
    if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
    return cfg;
}

RunConfig load_run_config(const std::string& path, std::optional<std::uint64_t> seed_override,
                          std::optional<int> threads_override) {
    return parse_run_config(read_file(path), seed_override, threads_override);
}

EmbodimentSpec RunConfig::embodiment(const std::string& name) const {
    if (!doc.contains("embodiments"))
        throw ConfigError("config has no embodiments section (wanted '" + name + "')");
    for (const auto& item : doc.at("embodiments")) {
        EmbodimentSpec spec =
            item.contains("preset") ? hand_preset(item.at("preset").get<std::string>())
                                    : EmbodimentSpec{};
        if (item.contains("name")) spec.name = item.at("name").get<std::string>();
        if (spec.name != name) continue;
        if (item.contains("fingers")) spec.fingers = item.at("fingers").get<int>();
        if (item.contains("links_per_finger"))
            spec.links_per_finger = item.at("links_per_finger").get<int>();
        if (item.contains("link_length_min"))
            spec.link_length_min = item.at("link_length_min").get<double>();
        if (item.contains("link_length_max"))
            spec.link_length_max = item.at("link_length_max").get<double>();
        if (item.contains("palm_size")) spec.palm_size = item.at("palm_size").get<double>();
        if (item.contains("samples_per_link"))
            spec.samples_per_link = item.at("samples_per_link").get<int>();
        if (item.contains("palm_samples")) spec.palm_samples = item.at("palm_samples").get<int>();
        if (item.contains("seed")) spec.seed = item.at("seed").get<std::uint64_t>();
        return spec;
    }
    throw ConfigError("embodiment '" + name + "' not found in config");
}

std::vector<std::string> RunConfig::embodiment_names() const {
    std::vector<std::string> names;
    if (!doc.contains("embodiments")) return names;
    for (const auto& item : doc.at("embodiments")) {
        if (item.contains("name"))
            names.push_back(item.at("name").get<std::string>());
        else if (item.contains("preset"))
            names.push_back(item.at("preset").get<std::string>());
        else
            throw ConfigError("embodiments entry needs a name or preset");
    }
    return names;
}

OracleDomainParams RunConfig::oracle(const std::string& domain) const {
    OracleDomainParams p = sim_domain();
    p.friction = get<double>("oracle", "friction", p.friction);
    p.stiffness = get<double>("oracle", "stiffness", p.stiffness);
    p.plasticity_threshold = get<double>("oracle", "plasticity_threshold", p.plasticity_threshold);
    p.contact_radius = get<double>("oracle", "contact_radius", p.contact_radius);
    p.observation_noise_sigma =
        get<double>("oracle", "observation_noise_sigma", p.observation_noise_sigma);
    if (domain == "sim") {
        p.label = "sim";
    } else if (domain == "real-proxy") {
        p.friction *= 0.8;
        p.stiffness *= 0.7;
        p.plasticity_threshold *= 0.9;
        p.observation_noise_sigma = 0.002;
        p.label = "real-proxy";
    } else {
        throw ConfigError("unknown oracle domain '" + domain + "'");
    }
    p.validate();
    return p;
}

ModelConfig RunConfig::model() const {
    ModelConfig m;
    m.hidden_dim = get<int>("model", "hidden_dim", m.hidden_dim);
    m.propagation_steps = get<int>("model", "propagation_steps", m.propagation_steps);
    m.connection_radius = get<double>("model", "connection_radius", m.connection_radius);
    m.mlp_depth = get<int>("model", "mlp_depth", m.mlp_depth);
    m.history_frames = get<int>("model", "history_frames", m.history_frames);
    try {
        m.validate();
    } catch (const ParameterError& e) {
        throw ConfigError(e.what());
    }
    return m;
}

TrainSettings RunConfig::train_settings() const {
    TrainSettings t;
    t.steps = get<int>("train", "steps", t.steps);
    t.adam.lr = get<double>("train", "lr", t.adam.lr);
    t.adam.beta1 = get<double>("train", "beta1", t.adam.beta1);
    t.adam.beta2 = get<double>("train", "beta2", t.adam.beta2);
    t.adam.eps = get<double>("train", "eps", t.adam.eps);
    t.loss = loss_kind_from_name(get<std::string>("train", "loss", "mse"));
    t.augment_rotation = get<bool>("train", "augment_rotation", t.augment_rotation);
    t.augment_full_so3 = get<bool>("train", "augment_full_so3", t.augment_full_so3);
    t.epoch_steps = get<int>("train", "epoch_steps", t.epoch_steps);
    t.divergence_limit = get<double>("train", "divergence_limit", t.divergence_limit);
    return t;
}

int RunConfig::train_batch_size() const { return get<int>("train", "batch_size", 32); }

PlannerConfig RunConfig::planner(std::uint64_t seed_value) const {
    PlannerConfig p;
    p.horizon = get<int>("planner", "horizon", p.horizon);
    p.samples = get<int>("planner", "samples", p.samples);
    p.elite_fraction = get<double>("planner", "elite_fraction", p.elite_fraction);
    p.iterations = get<int>("planner", "iterations", p.iterations);
    p.initial_std_scale = get<double>("planner", "initial_std_scale", p.initial_std_scale);
    p.std_floor = get<double>("planner", "std_floor", p.std_floor);
    p.cost = cost_kind_from_name(get<std::string>("planner", "cost", "chamfer"));
    p.max_particle_step =
        get<double>("planner", "max_particle_step", model().connection_radius / 2.0);
    p.seed = seed_value;
    p.threads = threads;
    try {
        p.validate();
    } catch (const ParameterError& e) {
        throw ConfigError(e.what());
    }
    return p;
}

CollectSettings RunConfig::collect_settings() const {
    CollectSettings c;
    c.object_count = get<int>("collect", "object_count", c.object_count);
    c.dt = get<double>("collect", "dt", c.dt);
    c.limit_fraction = get<double>("collect", "limit_fraction", c.limit_fraction);
    c.max_particle_step = get<double>("collect", "max_particle_step", c.max_particle_step);
    c.primitive_steps = get<int>("collect", "primitive_steps", c.primitive_steps);
    return c;
}

TaskKind task_from_name(const std::string& name) {
    if (name == "push") return TaskKind::Push;
    if (name == "reshape") return TaskKind::Reshape;
    throw ConfigError("unknown task '" + name + "' (expected push or reshape)");
}

std::string task_name(TaskKind task) { return task == TaskKind::Push ? "push" : "reshape"; }

}  // namespace pw
