#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "pufkit/bitvec.hpp"
#include "pufkit/oscillator_model.hpp"

namespace pufkit {

enum class Strategy { explicit_pairs, disjoint, neighbor, kgroup };

std::string_view to_string(Strategy strategy);
Strategy strategy_from_string(std::string_view name);

using OscPair = std::pair<std::uint32_t, std::uint32_t>;

// A challenge is the selection of the oscillators to compare. Instances are
// validated on construction (including when parsed off the wire); index range
// checks against a concrete oscillator count happen in validate_for().
class Challenge {
public:
    static Challenge explicit_pairs(std::vector<OscPair> pairs);

    // Re-validates strategy-specific invariants; used by generators and by
    // from_json for wire input.
    static Challenge from_parts(Strategy strategy, std::vector<OscPair> pairs,
                                std::optional<std::uint32_t> k);

    Strategy strategy() const { return strategy_; }
    const std::vector<OscPair>& pairs() const { return pairs_; }
    std::optional<std::uint32_t> group_size() const { return k_; }

    // Response length m.
    std::size_t length() const { return pairs_.size(); }

    // BoundsError if any index is outside [0, n_oscillators).
    void validate_for(std::uint32_t n_oscillators) const;

    friend bool operator==(const Challenge&, const Challenge&) = default;

private:
    Challenge(Strategy strategy, std::vector<OscPair> pairs, std::optional<std::uint32_t> k)
        : strategy_(strategy), pairs_(std::move(pairs)), k_(k) {}

    Strategy strategy_ = Strategy::explicit_pairs;
    std::vector<OscPair> pairs_;
    std::optional<std::uint32_t> k_;
};

struct Response {
    BitVec bits;
    BitVec ties;  // marks exact-tie comparisons (possible with coarse counters)
};

struct Comparison {
    int bit;
    bool tie;
};

// bit = 1 iff freq_a > freq_b; an exact tie yields bit 0 with the tie flag set.
Comparison compare_pair(double freq_a, double freq_b);

// One response bit per challenge pair. When counter_window is configured the
// comparison runs on cycle counts instead of exact frequencies.
Response evaluate(const PopulationConfig& config, const PufInstance& instance,
                  const Challenge& challenge, const Environment& env,
                  std::uint64_t measurement_index);

// Noise-free response at the nominal environment (enrollment/initialization
// reference).
Response evaluate_reference(const PopulationConfig& config, const PufInstance& instance,
                            const Challenge& challenge);

// All C(n,2) pairs (a,b), a < b, in lexicographic order.
Challenge gen_challenge_all_pairs(std::uint32_t n);

// Seeded random perfect matching; every oscillator used once, m = n/2.
Challenge gen_challenge_disjoint(std::uint32_t n, std::uint64_t seed);

// Pairs (i, i+1); m = n-1.
Challenge gen_challenge_neighbor(std::uint32_t n);

// Partitions oscillators into consecutive groups of k and selects, per group,
// the pair with the largest absolute difference of averaged frequencies
// (provisioning_repeats measurements at env); m = n/k. The selection is public
// challenge material.
Challenge provision_kgroup(const PopulationConfig& config, const PufInstance& instance,
                           std::uint32_t k, const Environment& env,
                           std::uint32_t provisioning_repeats);

void to_json(nlohmann::json& j, const Challenge& challenge);
Challenge challenge_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const Response& response);
Response response_from_json(const nlohmann::json& j);

}  // namespace pufkit
