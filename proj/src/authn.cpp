#include "pufkit/authn.hpp"

#include <bit>
#include <fstream>

#include "pufkit/errors.hpp"
#include "pufkit/metrics.hpp"
#include "pufkit/rng.hpp"

namespace pufkit {

namespace {

std::string hex_encode(std::span<const std::uint8_t> bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (std::uint8_t b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0f]);
    }
    return out;
}

int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw ConfigError("hex string: invalid character");
}

std::vector<std::uint8_t> hex_decode(std::string_view s) {
    if (s.size() % 2 != 0) {
        throw ConfigError("hex string: odd length");
    }
    std::vector<std::uint8_t> out;
    out.reserve(s.size() / 2);
    for (std::size_t i = 0; i < s.size(); i += 2) {
        out.push_back(static_cast<std::uint8_t>(hex_nibble(s[i]) << 4 | hex_nibble(s[i + 1])));
    }
    return out;
}

std::size_t byte_hamming_distance(std::span<const std::uint8_t> a,
                                  std::span<const std::uint8_t> b) {
    if (a.size() != b.size()) {
        throw DimensionError("hash compare: digest lengths differ");
    }
    std::size_t sum = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sum += static_cast<std::size_t>(std::popcount(static_cast<unsigned>(a[i] ^ b[i])));
    }
    return sum;
}

}  // namespace

Challenge enrollment_challenge(const PopulationConfig& config, const PufInstance& instance,
                               const EnrollOptions& options, std::uint32_t record_index) {
    const std::uint64_t record_seed =
        rng::stream_key(options.seed, rng::Domain::challenge, {record_index});
    switch (options.strategy) {
        case Strategy::explicit_pairs:
            return gen_challenge_all_pairs(config.n_oscillators);
        case Strategy::disjoint:
            return gen_challenge_disjoint(config.n_oscillators, record_seed);
        case Strategy::neighbor:
            return gen_challenge_neighbor(config.n_oscillators);
        case Strategy::kgroup:
            return provision_kgroup(config, instance, options.k,
                                    config.nominal_environment(),
                                    options.provisioning_repeats);
    }
    throw ConfigError("strategy: unknown value");
}

void validate_entity_id(const std::string& id) {
    if (id.empty() || id.size() > 64) {
        throw ConfigError("id: must be 1..64 characters");
    }
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '_' || c == '-';
        if (!ok) {
            throw ConfigError("id: only [a-zA-Z0-9_-] allowed");
        }
    }
}

CrpDatabase::CrpDatabase(std::uint32_t threshold, std::uint32_t m)
    : threshold_(threshold), m_(m) {
    if (m_ == 0) {
        throw ConfigError("m: response length must be >= 1");
    }
}

bool CrpDatabase::has_entity(const std::string& id) const {
    return entities_.contains(id);
}

const std::vector<CrpRecord>& CrpDatabase::records(const std::string& id) const {
    auto it = entities_.find(id);
    if (it == entities_.end()) {
        throw NotFoundError("unknown entity id: " + id);
    }
    return it->second;
}

std::vector<CrpRecord>& CrpDatabase::records_mutable(const std::string& id) {
    auto it = entities_.find(id);
    if (it == entities_.end()) {
        throw NotFoundError("unknown entity id: " + id);
    }
    return it->second;
}

std::vector<CrpRecord> CrpDatabase::generate_records(const PopulationConfig& config,
                                                     const PufInstance& instance,
                                                     const EnrollOptions& options) const {
    if (options.num_crps < 1) {
        throw ConfigError("num_crps: must be >= 1");
    }
    std::vector<CrpRecord> out;
    out.reserve(options.num_crps);
    for (std::uint32_t i = 0; i < options.num_crps; ++i) {
        CrpRecord record;
        record.challenge = enrollment_challenge(config, instance, options, i);
        if (record.challenge.length() != m_) {
            throw DimensionError("challenge length != database response length m");
        }
        record.response = evaluate_reference(config, instance, record.challenge).bits;
        out.push_back(std::move(record));
    }
    return out;
}

void CrpDatabase::enroll(const std::string& id, const PopulationConfig& config,
                         const PufInstance& instance, const EnrollOptions& options) {
    validate_entity_id(id);
    if (entities_.contains(id) && !options.re_enroll) {
        throw ConflictError("entity already enrolled: " + id + " (re-enroll flag required)");
    }
    entities_[id] = generate_records(config, instance, options);
}

void CrpDatabase::enroll_hashed(const std::string& id, const PopulationConfig& config,
                                const PufInstance& instance, const EnrollOptions& options,
                                const CodeParams& code, const std::string& hash_id,
                                std::uint32_t key_bits) {
    validate_entity_id(id);
    if (entities_.contains(id) && !options.re_enroll) {
        throw ConflictError("entity already enrolled: " + id + " (re-enroll flag required)");
    }
    std::vector<CrpRecord> recs = generate_records(config, instance, options);
    for (std::uint32_t i = 0; i < recs.size(); ++i) {
        const std::uint64_t init_seed =
            rng::stream_key(options.seed, rng::Domain::info_bits, {i});
        KeygenResult kg = keygen_init(config, instance, recs[i].challenge, code, hash_id,
                                      key_bits, init_seed);
        recs[i].response = BitVec{};
        recs[i].response_hash = kg.key.bytes;
        recs[i].helper = std::move(kg.helper);
    }
    entities_[id] = std::move(recs);
}

std::pair<Challenge, std::uint32_t> CrpDatabase::issue_challenge(const std::string& id) {
    std::vector<CrpRecord>& recs = records_mutable(id);
    for (std::uint32_t i = 0; i < recs.size(); ++i) {
        if (!recs[i].used) {
            recs[i].used = true;  // burn-on-issue
            return {recs[i].challenge, i};
        }
    }
    throw ExhaustedError("all CRPs used for entity: " + id);
}

CrpRecord& CrpDatabase::issued_record(const std::string& id, std::uint32_t record_index) {
    std::vector<CrpRecord>& recs = records_mutable(id);
    if (record_index >= recs.size()) {
        throw BoundsError("record index out of range");
    }
    CrpRecord& record = recs[record_index];
    if (!record.used) {
        throw ProtocolError("record was never issued");
    }
    return record;
}

AuthOutcome CrpDatabase::verify_response(const std::string& id, std::uint32_t record_index,
                                         const BitVec& presented) {
    CrpRecord& record = issued_record(id, record_index);
    if (record.hashed()) {
        throw ConfigError("record is hash-mode; use authenticate_hashed");
    }
    if (presented.size() != record.response.size()) {
        throw DimensionError("presented response length != stored response length");
    }
    const auto distance =
        static_cast<std::uint32_t>(hamming_distance(record.response, presented));
    return {distance <= threshold_, distance, threshold_, record_index};
}

AuthOutcome CrpDatabase::authenticate_hashed(const std::string& id,
                                             std::uint32_t record_index,
                                             std::span<const std::uint8_t> presented_hash) {
    CrpRecord& record = issued_record(id, record_index);
    if (!record.hashed()) {
        throw ConfigError("record has no helper data; enrolled in plain mode");
    }
    const auto distance = static_cast<std::uint32_t>(
        byte_hamming_distance(*record.response_hash, presented_hash));
    return {distance == 0, distance, 0, record_index};
}

const HelperData& CrpDatabase::helper_for(const std::string& id,
                                          std::uint32_t record_index) const {
    const std::vector<CrpRecord>& recs = records(id);
    if (record_index >= recs.size()) {
        throw BoundsError("record index out of range");
    }
    if (!recs[record_index].helper) {
        throw ConfigError("record has no helper data; enrolled in plain mode");
    }
    return *recs[record_index].helper;
}

void to_json(nlohmann::json& j, const CrpDatabase& db) {
    nlohmann::json entities = nlohmann::json::object();
    for (const auto& [id, recs] : db.entities_) {
        nlohmann::json crps = nlohmann::json::array();
        for (const CrpRecord& record : recs) {
            nlohmann::json rj{{"challenge", record.challenge}, {"used", record.used}};
            if (record.hashed()) {
                rj["response_hash"] = hex_encode(*record.response_hash);
                rj["helper"] = *record.helper;
            } else {
                rj["response"] = record.response.to_string();
            }
            crps.push_back(std::move(rj));
        }
        entities[id] = nlohmann::json{{"crps", std::move(crps)}};
    }
    j = nlohmann::json{
        {"threshold", db.threshold_},
        {"m", db.m_},
        {"entities", std::move(entities)},
    };
}

CrpDatabase CrpDatabase::from_json(const nlohmann::json& j) {
    CrpDatabase db(j.at("threshold").get<std::uint32_t>(), j.at("m").get<std::uint32_t>());
    for (const auto& [id, ej] : j.at("entities").items()) {
        validate_entity_id(id);
        std::vector<CrpRecord> recs;
        for (const nlohmann::json& rj : ej.at("crps")) {
            CrpRecord record;
            record.challenge = challenge_from_json(rj.at("challenge"));
            record.used = rj.at("used").get<bool>();
            if (rj.contains("response_hash")) {
                record.response_hash = hex_decode(rj.at("response_hash").get<std::string>());
                record.helper = helper_from_json(rj.at("helper"));
            } else {
                record.response = BitVec::from_string(rj.at("response").get<std::string>());
                if (record.response.size() != db.m_) {
                    throw DimensionError("stored response length != database m");
                }
            }
            recs.push_back(std::move(record));
        }
        db.entities_[id] = std::move(recs);
    }
    return db;
}

CrpDatabase CrpDatabase::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open CRP database: " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("CRP database " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

void CrpDatabase::save(const std::filesystem::path& path) const {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) {
            throw IoError("cannot write CRP database: " + tmp.string());
        }
        nlohmann::json j = *this;
        out << j.dump(2) << '\n';
        if (!out) {
            throw IoError("write failed: " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        throw IoError("atomic rename failed: " + ec.message());
    }
}

}  // namespace pufkit
