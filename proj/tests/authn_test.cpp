#include "doctest.h"

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "pufkit/authn.hpp"
#include "pufkit/errors.hpp"
#include "pufkit/metrics.hpp"

using namespace pufkit;

namespace {

PopulationConfig config_for(std::uint32_t n, double sigma_noise = 0.0,
                            std::uint64_t seed = 21) {
    PopulationConfig config;
    config.n_oscillators = n;
    config.f_nom = 100e6;
    config.sigma_process = 0.01;
    config.sigma_noise = sigma_noise;
    config.alpha_T = -2e-4;
    config.alpha_V = 0.05;
    config.t_nominal = 25.0;
    config.v_nominal = 1.2;
    config.seed = seed;
    return config;
}

EnrollOptions disjoint_options(std::uint32_t num_crps, std::uint64_t seed) {
    EnrollOptions options;
    options.strategy = Strategy::disjoint;
    options.num_crps = num_crps;
    options.seed = seed;
    return options;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("pufkit_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    static inline int counter = 0;
};

}  // namespace

TEST_CASE("enrollment basics") {
    const PopulationConfig config = config_for(16);
    const OscillatorPopulation pop = create_population(config, 2);
    CrpDatabase db(2, 8);

    db.enroll("device-01", config, pop.instance(0), disjoint_options(10, 5));
    const std::vector<CrpRecord>& recs = db.records("device-01");
    CHECK(recs.size() == 10);
    for (const CrpRecord& record : recs) {
        CHECK_FALSE(record.used);
        CHECK(record.response.size() == 8);
    }

    SUBCASE("enrollment is deterministic") {
        CrpDatabase other(2, 8);
        other.enroll("device-01", config, pop.instance(0), disjoint_options(10, 5));
        nlohmann::json a = db;
        nlohmann::json b = other;
        CHECK(a == b);
    }
    SUBCASE("re-enrollment needs the explicit flag") {
        CHECK_THROWS_AS(
            db.enroll("device-01", config, pop.instance(0), disjoint_options(10, 5)),
            ConflictError);
        EnrollOptions again = disjoint_options(4, 6);
        again.re_enroll = true;
        db.enroll("device-01", config, pop.instance(0), again);
        CHECK(db.records("device-01").size() == 4);
    }
    SUBCASE("entity ids are validated") {
        CHECK_THROWS_AS(db.enroll("", config, pop.instance(0), disjoint_options(1, 5)),
                        ConfigError);
        CHECK_THROWS_AS(
            db.enroll("bad id!", config, pop.instance(0), disjoint_options(1, 5)),
            ConfigError);
        CHECK_THROWS_AS(db.enroll(std::string(65, 'a'), config, pop.instance(0),
                                  disjoint_options(1, 5)),
                        ConfigError);
        db.enroll("A-Z_09", config, pop.instance(1), disjoint_options(1, 5));
    }
    SUBCASE("challenge length must match the database m") {
        CrpDatabase short_db(2, 4);
        CHECK_THROWS_AS(
            short_db.enroll("device-01", config, pop.instance(0), disjoint_options(1, 5)),
            DimensionError);
    }
    SUBCASE("num_crps must be positive") {
        CHECK_THROWS_AS(
            db.enroll("device-02", config, pop.instance(1), disjoint_options(0, 5)),
            ConfigError);
    }
}

TEST_CASE("issue order, burn-on-issue, exhaustion") {
    const PopulationConfig config = config_for(16);
    const OscillatorPopulation pop = create_population(config, 1);
    CrpDatabase db(2, 8);
    db.enroll("device-01", config, pop.instance(0), disjoint_options(10, 5));

    auto [challenge0, index0] = db.issue_challenge("device-01");
    CHECK(index0 == 0);
    CHECK(db.records("device-01")[0].used);
    CHECK(challenge0 == db.records("device-01")[0].challenge);

    // single-use: every index is returned exactly once, in order
    std::vector<std::uint32_t> indices{index0};
    for (int i = 1; i < 10; ++i) {
        indices.push_back(db.issue_challenge("device-01").second);
    }
    for (std::uint32_t i = 0; i < 10; ++i) {
        CHECK(indices[i] == i);
    }
    CHECK_THROWS_AS((void)db.issue_challenge("device-01"), ExhaustedError);
    CHECK_THROWS_AS((void)db.issue_challenge("nobody"), NotFoundError);
}

TEST_CASE("verification rules") {
    const PopulationConfig config = config_for(16);
    const OscillatorPopulation pop = create_population(config, 1);
    CrpDatabase db(3, 8);
    db.enroll("device-01", config, pop.instance(0), disjoint_options(5, 5));

    auto [challenge, index] = db.issue_challenge("device-01");
    const BitVec stored = db.records("device-01")[index].response;

    SUBCASE("identical response accepts with distance zero") {
        const AuthOutcome outcome = db.verify_response("device-01", index, stored);
        CHECK(outcome.accept);
        CHECK(outcome.distance == 0);
        CHECK(outcome.threshold == 3);
        CHECK(outcome.record_index == index);
    }
    SUBCASE("complemented response rejects with distance m") {
        BitVec complement = stored;
        for (std::size_t i = 0; i < complement.size(); ++i) {
            complement.flip(i);
        }
        const AuthOutcome outcome = db.verify_response("device-01", index, complement);
        CHECK_FALSE(outcome.accept);
        CHECK(outcome.distance == 8);
    }
    SUBCASE("exactly threshold flips still accepts (inclusive rule)") {
        BitVec at_threshold = stored;
        for (std::size_t i = 0; i < 3; ++i) {
            at_threshold.flip(i);
        }
        CHECK(db.verify_response("device-01", index, at_threshold).accept);

        BitVec beyond = stored;
        for (std::size_t i = 0; i < 4; ++i) {
            beyond.flip(i);
        }
        CHECK_FALSE(db.verify_response("device-01", index, beyond).accept);
    }
    SUBCASE("acceptance is monotone in the threshold") {
        BitVec presented = stored;
        presented.flip(0);
        presented.flip(5);
        for (std::uint32_t tau = 0; tau < 8; ++tau) {
            db.set_threshold(tau);
            const bool accepted = db.verify_response("device-01", index, presented).accept;
            db.set_threshold(tau + 1);
            const bool accepted_higher =
                db.verify_response("device-01", index, presented).accept;
            if (accepted) {
                CHECK(accepted_higher);
            }
        }
    }
    SUBCASE("unissued records cannot be verified") {
        CHECK_THROWS_AS((void)db.verify_response("device-01", 4, stored), ProtocolError);
    }
    SUBCASE("bad record index") {
        CHECK_THROWS_AS((void)db.verify_response("device-01", 99, stored), BoundsError);
    }
    SUBCASE("length mismatch") {
        CHECK_THROWS_AS(
            (void)db.verify_response("device-01", index, BitVec::from_string("10")),
            DimensionError);
    }
}

TEST_CASE("hash-mode authentication") {
    // neighbor on 25 oscillators: m = 24 = 8 blocks of t = 3
    const PopulationConfig config = config_for(25);
    const OscillatorPopulation pop = create_population(config, 2);
    CodeParams code;
    code.t = 3;
    code.data_bits = 8;

    EnrollOptions options;
    options.strategy = Strategy::neighbor;
    options.num_crps = 3;
    options.seed = 9;

    CrpDatabase db(0, 24);
    db.enroll_hashed("device-01", config, pop.instance(0), options, code, "sha-256", 256);

    auto [challenge, index] = db.issue_challenge("device-01");
    const HelperData& helper = db.helper_for("device-01", index);
    const BitVec reference = evaluate_reference(config, pop.instance(0), challenge).bits;

    SUBCASE("noiseless prover is accepted") {
        const Key key = keygen_reproduce(config, pop.instance(0), helper,
                                         config.nominal_environment(), 1);
        const AuthOutcome outcome = db.authenticate_hashed("device-01", index, key.bytes);
        CHECK(outcome.accept);
        CHECK(outcome.distance == 0);
        CHECK(outcome.threshold == 0);
    }
    SUBCASE("every single-bit error within the code capability is accepted") {
        for (std::size_t i = 0; i < reference.size(); ++i) {
            BitVec noisy = reference;
            noisy.flip(i);
            const Key key = reproduce_from_bits(noisy, helper);
            CHECK(db.authenticate_hashed("device-01", index, key.bytes).accept);
        }
    }
    SUBCASE("a prover holding a different instance is rejected") {
        const Key key = keygen_reproduce(config, pop.instance(1), helper,
                                         config.nominal_environment(), 1);
        const AuthOutcome outcome = db.authenticate_hashed("device-01", index, key.bytes);
        CHECK_FALSE(outcome.accept);
        CHECK(outcome.distance > 0);
    }
    SUBCASE("mode mixing is rejected") {
        CHECK_THROWS_AS((void)db.verify_response("device-01", index, reference),
                        ConfigError);
        CrpDatabase plain(0, 24);
        plain.enroll("plain-01", config, pop.instance(0), options);
        auto [c2, i2] = plain.issue_challenge("plain-01");
        const Key key = keygen_reproduce(config, pop.instance(0), helper,
                                         config.nominal_environment(), 1);
        CHECK_THROWS_AS((void)plain.authenticate_hashed("plain-01", i2, key.bytes),
                        ConfigError);
        CHECK_THROWS_AS((void)plain.helper_for("plain-01", i2), ConfigError);
    }
}

TEST_CASE("impostor trials against hash-mode records never accept") {
    // data_bits = 16 keeps the per-trial collision probability at 2^-16
    const PopulationConfig config = config_for(49, 0.0, 77);
    const OscillatorPopulation pop = create_population(config, 2);
    CodeParams code;
    code.t = 3;
    code.data_bits = 16;  // m = 48

    EnrollOptions options;
    options.strategy = Strategy::neighbor;
    options.num_crps = 100;
    options.seed = 13;

    CrpDatabase db(0, 48);
    db.enroll_hashed("device-01", config, pop.instance(0), options, code, "sha-256", 256);

    int accepts = 0;
    for (int trial = 0; trial < 100; ++trial) {
        auto [challenge, index] = db.issue_challenge("device-01");
        const HelperData& helper = db.helper_for("device-01", index);
        const Key impostor_key = keygen_reproduce(config, pop.instance(1), helper,
                                                  config.nominal_environment(), 1);
        if (db.authenticate_hashed("device-01", index, impostor_key.bytes).accept) {
            ++accepts;
        }
    }
    CHECK(accepts == 0);
}

TEST_CASE("genuine-accept / impostor-reject separation at simulation defaults") {
    // sigma_noise = 0.05 * sigma_process, m = 64, threshold = EER of a
    // 100-instance report
    const PopulationConfig config = config_for(128, 0.0005, 31337);
    const OscillatorPopulation pop = create_population(config, 100);
    const Challenge report_challenge = gen_challenge_disjoint(128, 1);
    const EvaluationReport report = build_report(
        pop, [&](const PufInstance&) { return report_challenge; }, report_challenge, 5,
        {config.nominal_environment()});

    CrpDatabase db(report.eer_threshold, 64);
    db.enroll("device-01", config, pop.instance(0), disjoint_options(200, 3));

    int genuine_accepts = 0;
    for (int i = 0; i < 200; ++i) {
        auto [challenge, index] = db.issue_challenge("device-01");
        const Response response = evaluate(config, pop.instance(0), challenge,
                                           config.nominal_environment(), index + 1);
        if (db.verify_response("device-01", index, response.bits).accept) {
            ++genuine_accepts;
        }
    }
    CHECK(genuine_accepts >= 198);  // >= 99%

    CrpDatabase impostor_db(report.eer_threshold, 64);
    impostor_db.enroll("device-01", config, pop.instance(0), disjoint_options(200, 4));
    int impostor_accepts = 0;
    for (int i = 0; i < 200; ++i) {
        auto [challenge, index] = impostor_db.issue_challenge("device-01");
        const Response response = evaluate(config, pop.instance(1), challenge,
                                           config.nominal_environment(), index + 1);
        if (impostor_db.verify_response("device-01", index, response.bits).accept) {
            ++impostor_accepts;
        }
    }
    CHECK(impostor_accepts <= 2);  // <= 1%
}

TEST_CASE("database persistence") {
    const PopulationConfig config = config_for(16);
    const OscillatorPopulation pop = create_population(config, 1);
    TempDir dir;
    const std::filesystem::path db_path = dir.path / "crp.json";

    CrpDatabase db(3, 8);
    db.enroll("device-01", config, pop.instance(0), disjoint_options(4, 5));
    (void)db.issue_challenge("device-01");
    db.save(db_path);

    SUBCASE("atomic write leaves no temp file") {
        CHECK(std::filesystem::exists(db_path));
        int entries = 0;
        for (const auto& e : std::filesystem::directory_iterator(dir.path)) {
            (void)e;
            ++entries;
        }
        CHECK(entries == 1);
    }
    SUBCASE("round trip preserves everything") {
        const CrpDatabase back = CrpDatabase::load(db_path);
        nlohmann::json a = db;
        nlohmann::json b = back;
        CHECK(a == b);
        CHECK(back.records("device-01")[0].used);
        CHECK_FALSE(back.records("device-01")[1].used);
        CHECK(back.threshold() == 3);
        CHECK(back.response_length() == 8);
    }
    SUBCASE("documented JSON shape") {
        nlohmann::json j = db;
        CHECK(j.contains("threshold"));
        CHECK(j.contains("m"));
        CHECK(j.at("entities").at("device-01").at("crps").size() == 4);
        const nlohmann::json& record = j.at("entities").at("device-01").at("crps").at(0);
        CHECK(record.contains("challenge"));
        CHECK(record.contains("response"));
        CHECK(record.contains("used"));
        CHECK(record.at("response").is_string());
    }
    SUBCASE("hash-mode records persist helper data") {
        const PopulationConfig hconfig = config_for(25);
        const OscillatorPopulation hpop = create_population(hconfig, 1);
        CodeParams code;
        code.t = 3;
        code.data_bits = 8;
        EnrollOptions options;
        options.strategy = Strategy::neighbor;
        options.num_crps = 2;
        options.seed = 9;
        CrpDatabase hdb(0, 24);
        hdb.enroll_hashed("hash-01", hconfig, hpop.instance(0), options, code, "sha-256",
                          256);
        const std::filesystem::path hpath = dir.path / "hash.json";
        hdb.save(hpath);
        CrpDatabase back = CrpDatabase::load(hpath);
        CHECK(back.records("hash-01")[0].hashed());
        CHECK(*back.records("hash-01")[0].response_hash ==
              *hdb.records("hash-01")[0].response_hash);
        auto [challenge, index] = back.issue_challenge("hash-01");
        const Key key = keygen_reproduce(hconfig, hpop.instance(0),
                                         back.helper_for("hash-01", index),
                                         hconfig.nominal_environment(), 1);
        CHECK(back.authenticate_hashed("hash-01", index, key.bytes).accept);
    }
    SUBCASE("loading a missing file fails cleanly") {
        CHECK_THROWS_AS((void)CrpDatabase::load(dir.path / "nope.json"), IoError);
    }
}
