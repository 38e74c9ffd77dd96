#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "pufkit/bitvec.hpp"
#include "pufkit/keygen.hpp"
#include "pufkit/oscillator_model.hpp"
#include "pufkit/puf_core.hpp"

namespace pufkit {

// One stored challenge-response pair. Plain records carry the response bits;
// hash-mode records carry H(r) plus the fuzzy-extractor helper data instead.
// Once used is set it is never reset (burn-on-issue).
struct CrpRecord {
    Challenge challenge = gen_challenge_neighbor(2);
    BitVec response;
    std::optional<std::vector<std::uint8_t>> response_hash;
    std::optional<HelperData> helper;
    bool used = false;

    bool hashed() const { return response_hash.has_value(); }
};

struct AuthOutcome {
    bool accept = false;
    std::uint32_t distance = 0;
    std::uint32_t threshold = 0;
    std::uint32_t record_index = 0;
};

struct EnrollOptions {
    Strategy strategy = Strategy::disjoint;
    std::uint32_t num_crps = 1;
    std::uint64_t seed = 0;
    std::uint32_t k = 0;                     // kgroup only
    std::uint32_t provisioning_repeats = 5;  // kgroup only
    bool re_enroll = false;
};

// Verifier-side CRP store. Not internally synchronized: all mutations funnel
// through one writer at a time (the protocol server serializes access).
class CrpDatabase {
public:
    CrpDatabase(std::uint32_t threshold, std::uint32_t m);

    std::uint32_t threshold() const { return threshold_; }
    void set_threshold(std::uint32_t t) { threshold_ = t; }
    std::uint32_t response_length() const { return m_; }

    bool has_entity(const std::string& id) const;
    const std::vector<CrpRecord>& records(const std::string& id) const;  // NotFoundError
    std::size_t entity_count() const { return entities_.size(); }

    // Generates num_crps seeded challenges of the given strategy and records
    // noise-free nominal responses. ConflictError when the id already exists
    // and re_enroll is not set.
    void enroll(const std::string& id, const PopulationConfig& config,
                const PufInstance& instance, const EnrollOptions& options);

    // Hash-mode enrollment: stores H(r) and the helper data per record
    // instead of the raw response.
    void enroll_hashed(const std::string& id, const PopulationConfig& config,
                       const PufInstance& instance, const EnrollOptions& options,
                       const CodeParams& code, const std::string& hash_id,
                       std::uint32_t key_bits);

    // Returns the lowest-index unused record and marks it used immediately
    // (burn-on-issue). NotFoundError / ExhaustedError.
    std::pair<Challenge, std::uint32_t> issue_challenge(const std::string& id);

    // accept iff HD(stored, presented) <= threshold. ProtocolError when the
    // record was never issued; DimensionError on length mismatch.
    AuthOutcome verify_response(const std::string& id, std::uint32_t record_index,
                                const BitVec& presented);

    // accept iff the hashes are byte-identical; the reported distance is the
    // bit-level HD between the digests (0 on match), threshold 0.
    AuthOutcome authenticate_hashed(const std::string& id, std::uint32_t record_index,
                                    std::span<const std::uint8_t> presented_hash);

    // Helper data the prover needs to error-correct before hashing
    // (hash-mode records only; ConfigError otherwise).
    const HelperData& helper_for(const std::string& id, std::uint32_t record_index) const;

    static CrpDatabase load(const std::filesystem::path& path);
    // Atomic: writes to a temp file in the same directory, then renames.
    void save(const std::filesystem::path& path) const;

    friend void to_json(nlohmann::json& j, const CrpDatabase& db);
    static CrpDatabase from_json(const nlohmann::json& j);

private:
    std::uint32_t threshold_ = 0;
    std::uint32_t m_ = 0;
    std::map<std::string, std::vector<CrpRecord>> entities_;

    std::vector<CrpRecord>& records_mutable(const std::string& id);
    CrpRecord& issued_record(const std::string& id, std::uint32_t record_index);
    std::vector<CrpRecord> generate_records(const PopulationConfig& config,
                                            const PufInstance& instance,
                                            const EnrollOptions& options) const;
};

void validate_entity_id(const std::string& id);  // ConfigError

// The challenge enrolled as record `record_index` under the given options
// (seeded per record for the disjoint strategy, per-instance provisioning for
// kgroup).
Challenge enrollment_challenge(const PopulationConfig& config, const PufInstance& instance,
                               const EnrollOptions& options, std::uint32_t record_index);

}  // namespace pufkit
