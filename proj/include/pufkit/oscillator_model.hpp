#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "json.hpp"

namespace pufkit {

struct Environment {
    double temperature = 0.0;  // degC
    double voltage = 0.0;      // V
};

struct PopulationConfig {
    std::uint32_t n_oscillators = 0;
    double f_nom = 0.0;          // Hz
    double sigma_process = 0.0;  // relative std-dev of the fixed per-oscillator deviation
    double sigma_noise = 0.0;    // relative std-dev of per-measurement noise
    double alpha_T = 0.0;        // 1/degC
    double alpha_V = 0.0;        // 1/V
    double t_nominal = 0.0;      // degC
    double v_nominal = 0.0;      // V
    std::optional<double> counter_window;  // seconds; absent = compare frequencies directly
    std::uint64_t seed = 0;

    // Throws ConfigError naming the offending field.
    void validate() const;

    Environment nominal_environment() const { return {t_nominal, v_nominal}; }

    friend bool operator==(const PopulationConfig&, const PopulationConfig&) = default;
};

// One simulated chip. The deviations are sampled exactly once at population
// creation and never resampled.
struct PufInstance {
    std::uint32_t instance_id = 0;
    std::vector<double> deviations;  // dimensionless p_j, one per oscillator
};

class OscillatorPopulation {
public:
    OscillatorPopulation(PopulationConfig config, std::vector<PufInstance> instances);

    const PopulationConfig& config() const { return config_; }
    const std::vector<PufInstance>& instances() const { return instances_; }
    const PufInstance& instance(std::size_t i) const;  // BoundsError
    std::size_t size() const { return instances_.size(); }

private:
    PopulationConfig config_;
    std::vector<PufInstance> instances_;
};

// Draws every per-oscillator deviation from a zero-mean normal with std-dev
// sigma_process, keyed by (seed, instance_id, oscillator index). Re-creation
// with the same config yields bit-identical deviations.
OscillatorPopulation create_population(const PopulationConfig& config,
                                       std::uint32_t n_instances);

// f = f_nom * (1 + p_j)
//          * (1 + alpha_T*(T - t_nominal) + alpha_V*(V - v_nominal))
//          * (1 + eps),
// eps ~ N(0, sigma_noise^2) keyed by (seed, instance_id, osc_index,
// measurement_index). Pure function of its arguments.
double measure_frequency(const PopulationConfig& config, const PufInstance& instance,
                         std::uint32_t osc_index, const Environment& env,
                         std::uint64_t measurement_index);

// Noise-free frequency at the nominal environment; the enrollment and
// provisioning reference.
double reference_frequency(const PopulationConfig& config, const PufInstance& instance,
                           std::uint32_t osc_index);

// floor(frequency * window)
std::uint64_t count_cycles(double frequency, double window);

void to_json(nlohmann::json& j, const PopulationConfig& config);
void from_json(const nlohmann::json& j, PopulationConfig& config);
void to_json(nlohmann::json& j, const OscillatorPopulation& pop);
OscillatorPopulation population_from_json(const nlohmann::json& j);

OscillatorPopulation load_population(const std::filesystem::path& path);
void save_population(const std::filesystem::path& path, const OscillatorPopulation& pop);

}  // namespace pufkit
