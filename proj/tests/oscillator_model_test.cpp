#include "doctest.h"

#include <cmath>

#include "pufkit/errors.hpp"
#include "pufkit/oscillator_model.hpp"

using namespace pufkit;

namespace {

PopulationConfig base_config() {
    PopulationConfig config;
    config.n_oscillators = 16;
    config.f_nom = 100e6;
    config.sigma_process = 0.01;
    config.sigma_noise = 0.0;
    config.alpha_T = -2e-4;
    config.alpha_V = 0.05;
    config.t_nominal = 25.0;
    config.v_nominal = 1.2;
    config.seed = 7;
    return config;
}

}  // namespace

TEST_CASE("same config and seed give bit-identical deviations") {
    PopulationConfig config = base_config();
    config.n_oscillators = 64;
    const OscillatorPopulation a = create_population(config, 2);
    const OscillatorPopulation b = create_population(config, 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(a.instance(i).deviations == b.instance(i).deviations);
    }
    PopulationConfig other = config;
    other.seed = 8;
    const OscillatorPopulation c = create_population(other, 1);
    CHECK(a.instance(0).deviations != c.instance(0).deviations);
}

TEST_CASE("invalid configs name the offending field") {
    PopulationConfig config = base_config();
    config.n_oscillators = 1;
    CHECK_THROWS_WITH_AS((void)create_population(config, 1),
                         "n_oscillators: must be >= 2", ConfigError);
    config = base_config();
    config.f_nom = 0.0;
    CHECK_THROWS_AS((void)create_population(config, 1), ConfigError);
    config = base_config();
    config.sigma_process = 0.0;
    CHECK_THROWS_AS((void)create_population(config, 1), ConfigError);
    config = base_config();
    config.sigma_noise = -0.1;
    CHECK_THROWS_AS((void)create_population(config, 1), ConfigError);
    config = base_config();
    config.counter_window = 0.0;
    CHECK_THROWS_AS((void)create_population(config, 1), ConfigError);
}

TEST_CASE("deviation sample std-dev matches sigma_process") {
    PopulationConfig config = base_config();
    config.n_oscillators = 64;
    const OscillatorPopulation pop = create_population(config, 1000);
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t n = 0;
    for (const PufInstance& inst : pop.instances()) {
        for (double p : inst.deviations) {
            sum += p;
            sum_sq += p * p;
            ++n;
        }
    }
    const double mean = sum / static_cast<double>(n);
    const double sd = std::sqrt(sum_sq / static_cast<double>(n) - mean * mean);
    CHECK(sd > 0.009);
    CHECK(sd < 0.011);
}

TEST_CASE("deviation vectors of distinct instances are uncorrelated") {
    PopulationConfig config = base_config();
    config.n_oscillators = 64;
    const OscillatorPopulation pop = create_population(config, 200);

    const auto pearson = [](const std::vector<double>& x, const std::vector<double>& y) {
        const auto n = static_cast<double>(x.size());
        double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            sx += x[i];
            sy += y[i];
            sxx += x[i] * x[i];
            syy += y[i] * y[i];
            sxy += x[i] * y[i];
        }
        const double cov = sxy / n - (sx / n) * (sy / n);
        const double vx = sxx / n - (sx / n) * (sx / n);
        const double vy = syy / n - (sy / n) * (sy / n);
        return cov / std::sqrt(vx * vy);
    };

    double corr_sum = 0.0;
    int pairs = 0;
    for (std::size_t i = 0; i < pop.size() && pairs < 1000; ++i) {
        for (std::size_t j = i + 1; j < pop.size() && pairs < 1000; ++j) {
            corr_sum += pearson(pop.instance(i).deviations, pop.instance(j).deviations);
            ++pairs;
        }
    }
    CHECK(pairs == 1000);
    CHECK(std::abs(corr_sum / pairs) < 0.1);
}

TEST_CASE("frequency model") {
    PopulationConfig config = base_config();
    config.n_oscillators = 3;
    const Environment nominal = config.nominal_environment();

    PufInstance inst;
    inst.instance_id = 0;
    inst.deviations = {0.0, 0.01, 0.02};

    SUBCASE("zero deviation at nominal gives exactly f_nom") {
        CHECK(measure_frequency(config, inst, 0, nominal, 0) == 100e6);
    }
    SUBCASE("single process factor") {
        CHECK(measure_frequency(config, inst, 1, nominal, 0) ==
              doctest::Approx(101e6).epsilon(1e-12));
    }
    SUBCASE("temperature factor combines multiplicatively") {
        const Environment hot{config.t_nominal + 25.0, config.v_nominal};
        const double expected = 100e6 * (1.0 + 0.01) * (1.0 + (-2e-4) * 25.0);
        const double f = measure_frequency(config, inst, 1, hot, 0);
        CHECK(f == doctest::Approx(expected).epsilon(1e-15));
        CHECK(f == doctest::Approx(100.495e6).epsilon(1e-12));
    }
    SUBCASE("noiseless measurement ignores the measurement index") {
        for (std::uint64_t k : {0ull, 1ull, 99ull}) {
            CHECK(measure_frequency(config, inst, 2, nominal, k) ==
                  measure_frequency(config, inst, 2, nominal, 0));
        }
    }
    SUBCASE("noisy measurement is deterministic per index") {
        PopulationConfig noisy = config;
        noisy.sigma_noise = 0.001;
        const double f1 = measure_frequency(noisy, inst, 0, nominal, 3);
        const double f2 = measure_frequency(noisy, inst, 0, nominal, 3);
        const double f3 = measure_frequency(noisy, inst, 0, nominal, 4);
        CHECK(f1 == f2);
        CHECK(f1 != f3);
    }
    SUBCASE("frequency strictly decreases as temperature rises (alpha_T < 0)") {
        double prev = measure_frequency(config, inst, 0, {0.0, config.v_nominal}, 0);
        for (double t : {10.0, 25.0, 50.0, 85.0}) {
            const double f = measure_frequency(config, inst, 0, {t, config.v_nominal}, 0);
            CHECK(f < prev);
            prev = f;
        }
    }
    SUBCASE("out-of-range oscillator index") {
        CHECK_THROWS_AS((void)measure_frequency(config, inst, 3, nominal, 0), BoundsError);
        CHECK_THROWS_AS((void)reference_frequency(config, inst, 3), BoundsError);
    }
}

TEST_CASE("count_cycles") {
    CHECK(count_cycles(100e6, 1e-6) == 100);
    CHECK(count_cycles(100.4e6, 1e-6) == 100);
    CHECK(count_cycles(0.0, 1e-3) == 0);
    CHECK_THROWS_AS((void)count_cycles(-1.0, 1e-6), ConfigError);
    CHECK_THROWS_AS((void)count_cycles(100e6, 0.0), ConfigError);
}

TEST_CASE("population JSON round trip is exact") {
    PopulationConfig config = base_config();
    config.sigma_noise = 0.0005;
    const OscillatorPopulation pop = create_population(config, 3);
    nlohmann::json j = pop;
    CHECK_FALSE(j.at("config").contains("counter_window"));
    CHECK(j.at("instances").at(0).at("id") == 0);

    const OscillatorPopulation back = population_from_json(j);
    CHECK(back.config() == pop.config());
    for (std::size_t i = 0; i < pop.size(); ++i) {
        CHECK(back.instance(i).deviations == pop.instance(i).deviations);
    }

    config.counter_window = 1e-6;
    nlohmann::json j2 = create_population(config, 1);
    CHECK(j2.at("config").at("counter_window") == 1e-6);
    CHECK(population_from_json(j2).config().counter_window == 1e-6);
}

TEST_CASE("population invariants are enforced") {
    PopulationConfig config = base_config();
    std::vector<PufInstance> wrong_ids;
    wrong_ids.push_back({1, std::vector<double>(config.n_oscillators, 0.0)});
    CHECK_THROWS_AS((void)OscillatorPopulation(config, std::move(wrong_ids)), ConfigError);

    std::vector<PufInstance> wrong_len;
    wrong_len.push_back({0, std::vector<double>(3, 0.0)});
    CHECK_THROWS_AS((void)OscillatorPopulation(config, std::move(wrong_len)),
                    DimensionError);

    const OscillatorPopulation pop = create_population(config, 2);
    CHECK_THROWS_AS((void)pop.instance(2), BoundsError);
}
