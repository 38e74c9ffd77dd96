#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <utility>
#include <vector>

#include "json.hpp"

#include "pufkit/bitvec.hpp"
#include "pufkit/oscillator_model.hpp"
#include "pufkit/puf_core.hpp"

namespace pufkit {

enum class DistanceKind { intra, inter };

struct DistanceSamples {
    DistanceKind kind = DistanceKind::intra;
    std::vector<std::uint32_t> values;  // Hamming distances, each <= m
    std::uint32_t m = 0;                // response length, bits
};

struct FarFrrRow {
    std::uint32_t threshold = 0;
    double far = 0.0;
    double frr = 0.0;
};

// One row per integer threshold 0..m. FAR is non-decreasing and FRR
// non-increasing in the threshold.
struct FarFrrCurve {
    std::vector<FarFrrRow> rows;
};

struct EvaluationReport {
    DistanceSamples intra;
    DistanceSamples inter;
    FarFrrCurve curve;
    std::uint32_t eer_threshold = 0;
    double eer = 0.0;
    double overlap = 0.0;
};

// HD = number of differing positions; DimensionError on length mismatch.
std::size_t hamming_distance(const BitVec& x, const BitVec& y);

// HD / m; DimensionError when m == 0.
double fractional_hd(const BitVec& x, const BitVec& y);

// Evaluates the challenge `repeats` times: measurement 0 is the
// nominal-environment reference, measurements 1..repeats-1 cycle through
// `envs`. Returns the HD of every non-reference response to the reference
// (repeats-1 values).
DistanceSamples intra_distance_samples(const PopulationConfig& config,
                                       const PufInstance& instance,
                                       const Challenge& challenge, std::uint32_t repeats,
                                       const std::vector<Environment>& envs);

// HD between the noise-free nominal responses of every unordered instance
// pair.
DistanceSamples inter_distance_samples(const OscillatorPopulation& population,
                                       const Challenge& challenge);

// Accept iff HD <= threshold (inclusive). FAR(t) = fraction of inter samples
// <= t; FRR(t) = fraction of intra samples > t.
FarFrrCurve far_frr_curve(const DistanceSamples& intra, const DistanceSamples& inter);

// Smallest threshold minimizing |FAR - FRR|; eer = max(FAR, FRR) there.
std::pair<std::uint32_t, double> equal_error_threshold(const FarFrrCurve& curve);

// Probability over all cross pairs (a from intra, b from inter) that a >= b.
// 0 means the distributions are perfectly separated.
double overlap_measure(const DistanceSamples& intra, const DistanceSamples& inter);

// Pools per-instance intra samples (per_instance_challenge picks each
// instance's challenge, e.g. a per-chip kgroup provisioning) and computes
// inter samples on the shared challenge, then derives curve, EER and overlap.
EvaluationReport build_report(
    const OscillatorPopulation& population,
    const std::function<Challenge(const PufInstance&)>& per_instance_challenge,
    const Challenge& shared_challenge, std::uint32_t repeats,
    const std::vector<Environment>& envs);

// Header "distance,count_intra,count_inter", one row per distance 0..m.
void write_histogram_csv(std::ostream& out, const DistanceSamples& intra,
                         const DistanceSamples& inter);

// Header "threshold,far,frr", rates with 6 fractional digits.
void write_curve_csv(std::ostream& out, const FarFrrCurve& curve);

void to_json(nlohmann::json& j, const DistanceSamples& samples);
void to_json(nlohmann::json& j, const FarFrrCurve& curve);
void to_json(nlohmann::json& j, const EvaluationReport& report);
EvaluationReport report_from_json(const nlohmann::json& j);

}  // namespace pufkit
