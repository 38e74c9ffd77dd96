#include "pufkit/puf_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pufkit/errors.hpp"
#include "pufkit/rng.hpp"

namespace pufkit {

namespace {

// Provisioning measurements live in a reserved measurement-index block so they
// never collide with runtime measurement indices 0, 1, 2, ...
constexpr std::uint64_t kProvisioningIndexBase = std::uint64_t{1} << 32;

}  // namespace

std::string_view to_string(Strategy strategy) {
    switch (strategy) {
        case Strategy::explicit_pairs: return "explicit_pairs";
        case Strategy::disjoint: return "disjoint";
        case Strategy::neighbor: return "neighbor";
        case Strategy::kgroup: return "kgroup";
    }
    return "unknown";
}

Strategy strategy_from_string(std::string_view name) {
    if (name == "explicit_pairs") return Strategy::explicit_pairs;
    if (name == "disjoint") return Strategy::disjoint;
    if (name == "neighbor") return Strategy::neighbor;
    if (name == "kgroup") return Strategy::kgroup;
    throw ConfigError("strategy: unknown name '" + std::string(name) + "'");
}

Challenge Challenge::explicit_pairs(std::vector<OscPair> pairs) {
    return from_parts(Strategy::explicit_pairs, std::move(pairs), std::nullopt);
}

Challenge Challenge::from_parts(Strategy strategy, std::vector<OscPair> pairs,
                                std::optional<std::uint32_t> k) {
    for (const OscPair& p : pairs) {
        if (p.first == p.second) {
            throw ConfigError("challenge: pair indices must differ");
        }
    }
    switch (strategy) {
        case Strategy::explicit_pairs:
            break;
        case Strategy::disjoint: {
            std::vector<std::uint32_t> seen;
            for (const OscPair& p : pairs) {
                seen.push_back(p.first);
                seen.push_back(p.second);
            }
            std::sort(seen.begin(), seen.end());
            if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
                throw ConfigError("challenge: disjoint strategy reuses an oscillator");
            }
            break;
        }
        case Strategy::neighbor:
            for (std::size_t i = 0; i < pairs.size(); ++i) {
                if (pairs[i].first != i || pairs[i].second != i + 1) {
                    throw ConfigError("challenge: neighbor pairs must be (i, i+1)");
                }
            }
            break;
        case Strategy::kgroup: {
            if (!k || *k < 2) {
                throw ConfigError("challenge: kgroup requires k >= 2");
            }
            for (std::size_t g = 0; g < pairs.size(); ++g) {
                const std::uint32_t lo = static_cast<std::uint32_t>(g) * *k;
                const std::uint32_t hi = lo + *k;
                if (pairs[g].first < lo || pairs[g].first >= hi || pairs[g].second < lo ||
                    pairs[g].second >= hi) {
                    throw ConfigError("challenge: kgroup pair outside its group");
                }
            }
            break;
        }
    }
    if (strategy != Strategy::kgroup && k) {
        throw ConfigError("challenge: k is only valid for the kgroup strategy");
    }
    return Challenge(strategy, std::move(pairs), k);
}

void Challenge::validate_for(std::uint32_t n_oscillators) const {
    for (const OscPair& p : pairs_) {
        if (p.first >= n_oscillators || p.second >= n_oscillators) {
            throw BoundsError("challenge: oscillator index out of range");
        }
    }
}

Comparison compare_pair(double freq_a, double freq_b) {
    if (!std::isfinite(freq_a) || !std::isfinite(freq_b) || freq_a < 0.0 || freq_b < 0.0) {
        throw ConfigError("compare_pair: frequencies must be finite and >= 0");
    }
    if (freq_a == freq_b) {
        return {0, true};
    }
    return {freq_a > freq_b ? 1 : 0, false};
}

namespace {

Comparison compare_counts(std::uint64_t a, std::uint64_t b) {
    if (a == b) {
        return {0, true};
    }
    return {a > b ? 1 : 0, false};
}

template <typename MeasureFn>
Response evaluate_with(const PopulationConfig& config, const Challenge& challenge,
                       MeasureFn&& measure) {
    challenge.validate_for(config.n_oscillators);
    Response response;
    for (const OscPair& p : challenge.pairs()) {
        const double fa = measure(p.first);
        const double fb = measure(p.second);
        Comparison c{};
        if (config.counter_window) {
            c = compare_counts(count_cycles(fa, *config.counter_window),
                               count_cycles(fb, *config.counter_window));
        } else {
            c = compare_pair(fa, fb);
        }
        response.bits.push_back(c.bit);
        response.ties.push_back(c.tie ? 1 : 0);
    }
    return response;
}

}  // namespace

Response evaluate(const PopulationConfig& config, const PufInstance& instance,
                  const Challenge& challenge, const Environment& env,
                  std::uint64_t measurement_index) {
    return evaluate_with(config, challenge, [&](std::uint32_t osc) {
        return measure_frequency(config, instance, osc, env, measurement_index);
    });
}

Response evaluate_reference(const PopulationConfig& config, const PufInstance& instance,
                            const Challenge& challenge) {
    return evaluate_with(config, challenge, [&](std::uint32_t osc) {
        return reference_frequency(config, instance, osc);
    });
}

Challenge gen_challenge_all_pairs(std::uint32_t n) {
    if (n < 2) {
        throw ConfigError("n: all-pairs challenge requires n >= 2");
    }
    std::vector<OscPair> pairs;
    pairs.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (std::uint32_t a = 0; a < n; ++a) {
        for (std::uint32_t b = a + 1; b < n; ++b) {
            pairs.emplace_back(a, b);
        }
    }
    return Challenge::from_parts(Strategy::explicit_pairs, std::move(pairs), std::nullopt);
}

Challenge gen_challenge_disjoint(std::uint32_t n, std::uint64_t seed) {
    if (n < 2) {
        throw ConfigError("n: disjoint challenge requires n >= 2");
    }
    if (n % 2 != 0) {
        throw ConfigError("n: disjoint pairing needs an even oscillator count; drop one oscillator");
    }
    std::vector<std::uint32_t> order(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        order[i] = i;
    }
    rng::Stream stream(rng::stream_key(seed, rng::Domain::pair_matching, {n}));
    for (std::uint32_t i = n - 1; i > 0; --i) {
        const auto j = static_cast<std::uint32_t>(stream.next_below(i + 1));
        std::swap(order[i], order[j]);
    }
    std::vector<OscPair> pairs;
    pairs.reserve(n / 2);
    for (std::uint32_t i = 0; i < n; i += 2) {
        pairs.emplace_back(order[i], order[i + 1]);
    }
    return Challenge::from_parts(Strategy::disjoint, std::move(pairs), std::nullopt);
}

Challenge gen_challenge_neighbor(std::uint32_t n) {
    if (n < 2) {
        throw ConfigError("n: neighbor challenge requires n >= 2");
    }
    std::vector<OscPair> pairs;
    pairs.reserve(n - 1);
    for (std::uint32_t i = 0; i + 1 < n; ++i) {
        pairs.emplace_back(i, i + 1);
    }
    return Challenge::from_parts(Strategy::neighbor, std::move(pairs), std::nullopt);
}

Challenge provision_kgroup(const PopulationConfig& config, const PufInstance& instance,
                           std::uint32_t k, const Environment& env,
                           std::uint32_t provisioning_repeats) {
    if (k < 2) {
        throw ConfigError("k: group size must be >= 2");
    }
    if (config.n_oscillators % k != 0) {
        throw ConfigError("k: must divide n_oscillators");
    }
    if (provisioning_repeats < 1) {
        throw ConfigError("provisioning_repeats: must be >= 1");
    }

    std::vector<double> averaged(config.n_oscillators, 0.0);
    for (std::uint32_t osc = 0; osc < config.n_oscillators; ++osc) {
        double sum = 0.0;
        for (std::uint32_t r = 0; r < provisioning_repeats; ++r) {
            sum += measure_frequency(config, instance, osc, env, kProvisioningIndexBase + r);
        }
        averaged[osc] = sum / provisioning_repeats;
    }

    std::vector<OscPair> pairs;
    pairs.reserve(config.n_oscillators / k);
    for (std::uint32_t lo = 0; lo < config.n_oscillators; lo += k) {
        OscPair best{lo, lo + 1};
        double best_diff = -1.0;
        for (std::uint32_t a = lo; a < lo + k; ++a) {
            for (std::uint32_t b = a + 1; b < lo + k; ++b) {
                const double diff = std::abs(averaged[a] - averaged[b]);
                if (diff > best_diff) {
                    best_diff = diff;
                    best = {a, b};
                }
            }
        }
        pairs.push_back(best);
    }
    return Challenge::from_parts(Strategy::kgroup, std::move(pairs), k);
}

void to_json(nlohmann::json& j, const Challenge& challenge) {
    j = nlohmann::json{
        {"strategy", to_string(challenge.strategy())},
        {"pairs", challenge.pairs()},
        {"k", nullptr},
    };
    if (challenge.group_size()) {
        j["k"] = *challenge.group_size();
    }
}

Challenge challenge_from_json(const nlohmann::json& j) {
    const Strategy strategy = strategy_from_string(j.at("strategy").get<std::string>());
    auto pairs = j.at("pairs").get<std::vector<OscPair>>();
    std::optional<std::uint32_t> k;
    if (j.contains("k") && !j.at("k").is_null()) {
        k = j.at("k").get<std::uint32_t>();
    }
    return Challenge::from_parts(strategy, std::move(pairs), k);
}

void to_json(nlohmann::json& j, const Response& response) {
    j = nlohmann::json{
        {"bits", response.bits.to_string()},
        {"ties", response.ties.to_string()},
    };
}

Response response_from_json(const nlohmann::json& j) {
    Response r;
    r.bits = BitVec::from_string(j.at("bits").get<std::string>());
    r.ties = BitVec::from_string(j.at("ties").get<std::string>());
    if (r.bits.size() != r.ties.size()) {
        throw DimensionError("response: bits and ties lengths differ");
    }
    return r;
}

}  // namespace pufkit
