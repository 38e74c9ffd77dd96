#include "pufkit/oscillator_model.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "pufkit/errors.hpp"
#include "pufkit/rng.hpp"

namespace pufkit {

void PopulationConfig::validate() const {
    if (n_oscillators < 2) {
        throw ConfigError("n_oscillators: must be >= 2");
    }
    if (!(f_nom > 0.0)) {
        throw ConfigError("f_nom: must be > 0");
    }
    if (!(sigma_process > 0.0)) {
        throw ConfigError("sigma_process: must be > 0");
    }
    if (!(sigma_noise >= 0.0)) {
        throw ConfigError("sigma_noise: must be >= 0");
    }
    if (counter_window && !(*counter_window > 0.0)) {
        throw ConfigError("counter_window: must be > 0 when present");
    }
    if (!std::isfinite(alpha_T) || !std::isfinite(alpha_V)) {
        throw ConfigError("alpha_T/alpha_V: must be finite");
    }
    if (!std::isfinite(t_nominal) || !std::isfinite(v_nominal)) {
        throw ConfigError("t_nominal/v_nominal: must be finite");
    }
}

OscillatorPopulation::OscillatorPopulation(PopulationConfig config,
                                           std::vector<PufInstance> instances)
    : config_(std::move(config)), instances_(std::move(instances)) {
    config_.validate();
    for (std::size_t i = 0; i < instances_.size(); ++i) {
        if (instances_[i].instance_id != i) {
            throw ConfigError("instances: ids must be 0..len-1 in order");
        }
        if (instances_[i].deviations.size() != config_.n_oscillators) {
            throw DimensionError("instances: deviation vector length != n_oscillators");
        }
    }
}

const PufInstance& OscillatorPopulation::instance(std::size_t i) const {
    if (i >= instances_.size()) {
        throw BoundsError("instance index out of range");
    }
    return instances_[i];
}

OscillatorPopulation create_population(const PopulationConfig& config,
                                       std::uint32_t n_instances) {
    config.validate();
    if (n_instances < 1) {
        throw ConfigError("n_instances: must be >= 1");
    }
    std::vector<PufInstance> instances;
    instances.reserve(n_instances);
    for (std::uint32_t id = 0; id < n_instances; ++id) {
        PufInstance inst;
        inst.instance_id = id;
        inst.deviations.reserve(config.n_oscillators);
        for (std::uint32_t j = 0; j < config.n_oscillators; ++j) {
            const std::uint64_t key =
                rng::stream_key(config.seed, rng::Domain::process_deviation, {id, j});
            inst.deviations.push_back(config.sigma_process * rng::keyed_normal(key));
        }
        instances.push_back(std::move(inst));
    }
    return {config, std::move(instances)};
}

namespace {

double environment_factor(const PopulationConfig& config, const Environment& env) {
    return 1.0 + config.alpha_T * (env.temperature - config.t_nominal) +
           config.alpha_V * (env.voltage - config.v_nominal);
}

}  // namespace

double measure_frequency(const PopulationConfig& config, const PufInstance& instance,
                         std::uint32_t osc_index, const Environment& env,
                         std::uint64_t measurement_index) {
    if (instance.deviations.size() != config.n_oscillators) {
        throw DimensionError("instance deviation vector length != n_oscillators");
    }
    if (osc_index >= config.n_oscillators) {
        throw BoundsError("oscillator index out of range");
    }
    double eps = 0.0;
    if (config.sigma_noise > 0.0) {
        const std::uint64_t key =
            rng::stream_key(config.seed, rng::Domain::measurement_noise,
                            {instance.instance_id, osc_index, measurement_index});
        eps = config.sigma_noise * rng::keyed_normal(key);
    }
    return config.f_nom * (1.0 + instance.deviations[osc_index]) *
           environment_factor(config, env) * (1.0 + eps);
}

double reference_frequency(const PopulationConfig& config, const PufInstance& instance,
                           std::uint32_t osc_index) {
    if (instance.deviations.size() != config.n_oscillators) {
        throw DimensionError("instance deviation vector length != n_oscillators");
    }
    if (osc_index >= config.n_oscillators) {
        throw BoundsError("oscillator index out of range");
    }
    return config.f_nom * (1.0 + instance.deviations[osc_index]);
}

std::uint64_t count_cycles(double frequency, double window) {
    if (!(frequency >= 0.0)) {
        throw ConfigError("frequency: must be >= 0");
    }
    if (!(window > 0.0)) {
        throw ConfigError("window: must be > 0");
    }
    return static_cast<std::uint64_t>(std::floor(frequency * window));
}

void to_json(nlohmann::json& j, const PopulationConfig& config) {
    j = nlohmann::json{
        {"n_oscillators", config.n_oscillators},
        {"f_nom", config.f_nom},
        {"sigma_process", config.sigma_process},
        {"sigma_noise", config.sigma_noise},
        {"alpha_T", config.alpha_T},
        {"alpha_V", config.alpha_V},
        {"t_nominal", config.t_nominal},
        {"v_nominal", config.v_nominal},
        {"seed", config.seed},
    };
    if (config.counter_window) {
        j["counter_window"] = *config.counter_window;
    }
}

void from_json(const nlohmann::json& j, PopulationConfig& config) {
    config.n_oscillators = j.at("n_oscillators").get<std::uint32_t>();
    config.f_nom = j.at("f_nom").get<double>();
    config.sigma_process = j.at("sigma_process").get<double>();
    config.sigma_noise = j.at("sigma_noise").get<double>();
    config.alpha_T = j.at("alpha_T").get<double>();
    config.alpha_V = j.at("alpha_V").get<double>();
    config.t_nominal = j.at("t_nominal").get<double>();
    config.v_nominal = j.at("v_nominal").get<double>();
    config.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("counter_window") && !j.at("counter_window").is_null()) {
        config.counter_window = j.at("counter_window").get<double>();
    } else {
        config.counter_window.reset();
    }
}

void to_json(nlohmann::json& j, const OscillatorPopulation& pop) {
    nlohmann::json instances = nlohmann::json::array();
    for (const PufInstance& inst : pop.instances()) {
        instances.push_back(nlohmann::json{
            {"id", inst.instance_id},
            {"deviations", inst.deviations},
        });
    }
    j = nlohmann::json{{"config", pop.config()}, {"instances", std::move(instances)}};
}

OscillatorPopulation population_from_json(const nlohmann::json& j) {
    PopulationConfig config = j.at("config").get<PopulationConfig>();
    std::vector<PufInstance> instances;
    for (const nlohmann::json& ij : j.at("instances")) {
        PufInstance inst;
        inst.instance_id = ij.at("id").get<std::uint32_t>();
        inst.deviations = ij.at("deviations").get<std::vector<double>>();
        instances.push_back(std::move(inst));
    }
    return {std::move(config), std::move(instances)};
}

OscillatorPopulation load_population(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open population file: " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("population file " + path.string() + ": " + e.what());
    }
    return population_from_json(j);
}

void save_population(const std::filesystem::path& path, const OscillatorPopulation& pop) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write population file: " + path.string());
    }
    nlohmann::json j = pop;
    out << j.dump(2) << '\n';
    if (!out) {
        throw IoError("write failed: " + path.string());
    }
}

}  // namespace pufkit
