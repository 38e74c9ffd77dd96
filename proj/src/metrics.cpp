#include "pufkit/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "pufkit/errors.hpp"

namespace pufkit {

std::size_t hamming_distance(const BitVec& x, const BitVec& y) {
    // XOR, pack, popcount; the tests check this against a position-wise oracle.
    const std::vector<std::uint8_t> packed = x.xored(y).pack_bytes();
    std::size_t sum = 0;
    for (std::uint8_t byte : packed) {
        sum += static_cast<std::size_t>(std::popcount(byte));
    }
    return sum;
}

double fractional_hd(const BitVec& x, const BitVec& y) {
    if (x.empty()) {
        throw DimensionError("fractional_hd: zero-length responses");
    }
    return static_cast<double>(hamming_distance(x, y)) / static_cast<double>(x.size());
}

DistanceSamples intra_distance_samples(const PopulationConfig& config,
                                       const PufInstance& instance,
                                       const Challenge& challenge, std::uint32_t repeats,
                                       const std::vector<Environment>& envs) {
    if (envs.empty()) {
        throw ConfigError("envs: at least one environment required");
    }
    if (repeats < 2) {
        throw ConfigError("repeats: must be >= 2");
    }
    const Response reference =
        evaluate(config, instance, challenge, config.nominal_environment(), 0);
    DistanceSamples samples;
    samples.kind = DistanceKind::intra;
    samples.m = static_cast<std::uint32_t>(challenge.length());
    samples.values.reserve(repeats - 1);
    for (std::uint32_t r = 1; r < repeats; ++r) {
        const Environment& env = envs[(r - 1) % envs.size()];
        const Response measured = evaluate(config, instance, challenge, env, r);
        samples.values.push_back(
            static_cast<std::uint32_t>(hamming_distance(reference.bits, measured.bits)));
    }
    return samples;
}

DistanceSamples inter_distance_samples(const OscillatorPopulation& population,
                                       const Challenge& challenge) {
    if (population.size() < 2) {
        throw ConfigError("population: at least 2 instances required");
    }
    std::vector<BitVec> responses;
    responses.reserve(population.size());
    for (const PufInstance& inst : population.instances()) {
        responses.push_back(
            evaluate_reference(population.config(), inst, challenge).bits);
    }
    DistanceSamples samples;
    samples.kind = DistanceKind::inter;
    samples.m = static_cast<std::uint32_t>(challenge.length());
    samples.values.reserve(population.size() * (population.size() - 1) / 2);
    for (std::size_t i = 0; i < responses.size(); ++i) {
        for (std::size_t j = i + 1; j < responses.size(); ++j) {
            samples.values.push_back(
                static_cast<std::uint32_t>(hamming_distance(responses[i], responses[j])));
        }
    }
    return samples;
}

namespace {

// counts[d] = number of samples with distance d, for d in 0..m.
std::vector<std::size_t> histogram(const DistanceSamples& samples) {
    std::vector<std::size_t> counts(samples.m + 1, 0);
    for (std::uint32_t v : samples.values) {
        if (v > samples.m) {
            throw DimensionError("distance sample exceeds response length");
        }
        ++counts[v];
    }
    return counts;
}

}  // namespace

FarFrrCurve far_frr_curve(const DistanceSamples& intra, const DistanceSamples& inter) {
    if (intra.values.empty() || inter.values.empty()) {
        throw ConfigError("far_frr_curve: both sample sets must be nonempty");
    }
    if (intra.m != inter.m) {
        throw DimensionError("far_frr_curve: intra/inter response lengths differ");
    }
    const std::vector<std::size_t> intra_counts = histogram(intra);
    const std::vector<std::size_t> inter_counts = histogram(inter);
    const double n_intra = static_cast<double>(intra.values.size());
    const double n_inter = static_cast<double>(inter.values.size());

    FarFrrCurve curve;
    curve.rows.reserve(intra.m + 1);
    std::size_t intra_cum = 0;  // intra samples <= t
    std::size_t inter_cum = 0;  // inter samples <= t
    for (std::uint32_t t = 0; t <= intra.m; ++t) {
        intra_cum += intra_counts[t];
        inter_cum += inter_counts[t];
        FarFrrRow row;
        row.threshold = t;
        row.far = static_cast<double>(inter_cum) / n_inter;
        row.frr = static_cast<double>(intra.values.size() - intra_cum) / n_intra;
        curve.rows.push_back(row);
    }
    return curve;
}

std::pair<std::uint32_t, double> equal_error_threshold(const FarFrrCurve& curve) {
    if (curve.rows.empty()) {
        throw ConfigError("equal_error_threshold: empty curve");
    }
    const FarFrrRow* best = &curve.rows.front();
    double best_gap = std::abs(best->far - best->frr);
    for (const FarFrrRow& row : curve.rows) {
        const double gap = std::abs(row.far - row.frr);
        if (gap < best_gap) {
            best_gap = gap;
            best = &row;
        }
    }
    return {best->threshold, std::max(best->far, best->frr)};
}

double overlap_measure(const DistanceSamples& intra, const DistanceSamples& inter) {
    if (intra.values.empty() || inter.values.empty()) {
        throw ConfigError("overlap_measure: both sample sets must be nonempty");
    }
    // P(a >= b) via cumulative histogram instead of the quadratic cross-pair
    // scan; the tests compare against the brute-force route.
    const std::uint32_t m = std::max(intra.m, inter.m);
    std::vector<std::size_t> inter_counts(m + 1, 0);
    for (std::uint32_t v : inter.values) {
        ++inter_counts[v];
    }
    std::vector<std::size_t> inter_cum(m + 1, 0);  // inter samples <= d
    std::size_t running = 0;
    for (std::uint32_t d = 0; d <= m; ++d) {
        running += inter_counts[d];
        inter_cum[d] = running;
    }
    std::size_t ordered = 0;
    for (std::uint32_t a : intra.values) {
        ordered += inter_cum[a];
    }
    return static_cast<double>(ordered) /
           (static_cast<double>(intra.values.size()) *
            static_cast<double>(inter.values.size()));
}

EvaluationReport build_report(
    const OscillatorPopulation& population,
    const std::function<Challenge(const PufInstance&)>& per_instance_challenge,
    const Challenge& shared_challenge, std::uint32_t repeats,
    const std::vector<Environment>& envs) {
    EvaluationReport report;
    report.intra.kind = DistanceKind::intra;
    report.intra.m = static_cast<std::uint32_t>(shared_challenge.length());
    for (const PufInstance& inst : population.instances()) {
        const Challenge challenge = per_instance_challenge(inst);
        if (challenge.length() != shared_challenge.length()) {
            throw DimensionError("build_report: challenge lengths differ across instances");
        }
        DistanceSamples s =
            intra_distance_samples(population.config(), inst, challenge, repeats, envs);
        report.intra.values.insert(report.intra.values.end(), s.values.begin(),
                                   s.values.end());
    }
    report.inter = inter_distance_samples(population, shared_challenge);
    report.curve = far_frr_curve(report.intra, report.inter);
    const auto [threshold, eer] = equal_error_threshold(report.curve);
    report.eer_threshold = threshold;
    report.eer = eer;
    report.overlap = overlap_measure(report.intra, report.inter);
    return report;
}

void write_histogram_csv(std::ostream& out, const DistanceSamples& intra,
                         const DistanceSamples& inter) {
    if (intra.m != inter.m) {
        throw DimensionError("histogram: intra/inter response lengths differ");
    }
    const std::vector<std::size_t> intra_counts = histogram(intra);
    const std::vector<std::size_t> inter_counts = histogram(inter);
    out << "distance,count_intra,count_inter\n";
    for (std::uint32_t d = 0; d <= intra.m; ++d) {
        out << d << ',' << intra_counts[d] << ',' << inter_counts[d] << '\n';
    }
}

void write_curve_csv(std::ostream& out, const FarFrrCurve& curve) {
    out << "threshold,far,frr\n";
    char buf[64];
    for (const FarFrrRow& row : curve.rows) {
        std::snprintf(buf, sizeof(buf), "%u,%.6f,%.6f", row.threshold, row.far, row.frr);
        out << buf << '\n';
    }
}

namespace {

std::string_view kind_name(DistanceKind kind) {
    return kind == DistanceKind::intra ? "intra" : "inter";
}

DistanceKind kind_from_string(std::string_view name) {
    if (name == "intra") return DistanceKind::intra;
    if (name == "inter") return DistanceKind::inter;
    throw ConfigError("distance kind: unknown name");
}

}  // namespace

void to_json(nlohmann::json& j, const DistanceSamples& samples) {
    j = nlohmann::json{
        {"kind", kind_name(samples.kind)},
        {"values", samples.values},
        {"m", samples.m},
    };
}

void to_json(nlohmann::json& j, const FarFrrCurve& curve) {
    nlohmann::json rows = nlohmann::json::array();
    for (const FarFrrRow& row : curve.rows) {
        rows.push_back(nlohmann::json{
            {"threshold", row.threshold},
            {"far", row.far},
            {"frr", row.frr},
        });
    }
    j = nlohmann::json{{"rows", std::move(rows)}};
}

void to_json(nlohmann::json& j, const EvaluationReport& report) {
    j = nlohmann::json{
        {"intra", report.intra},
        {"inter", report.inter},
        {"curve", report.curve},
        {"eer_threshold", report.eer_threshold},
        {"eer", report.eer},
        {"overlap", report.overlap},
    };
}

namespace {

DistanceSamples samples_from_json(const nlohmann::json& j) {
    DistanceSamples s;
    s.kind = kind_from_string(j.at("kind").get<std::string>());
    s.values = j.at("values").get<std::vector<std::uint32_t>>();
    s.m = j.at("m").get<std::uint32_t>();
    return s;
}

}  // namespace

EvaluationReport report_from_json(const nlohmann::json& j) {
    EvaluationReport report;
    report.intra = samples_from_json(j.at("intra"));
    report.inter = samples_from_json(j.at("inter"));
    for (const nlohmann::json& rj : j.at("curve").at("rows")) {
        FarFrrRow row;
        row.threshold = rj.at("threshold").get<std::uint32_t>();
        row.far = rj.at("far").get<double>();
        row.frr = rj.at("frr").get<double>();
        report.curve.rows.push_back(row);
    }
    report.eer_threshold = j.at("eer_threshold").get<std::uint32_t>();
    report.eer = j.at("eer").get<double>();
    report.overlap = j.at("overlap").get<double>();
    return report;
}

}  // namespace pufkit
