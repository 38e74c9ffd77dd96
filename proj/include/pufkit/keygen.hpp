#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "pufkit/bitvec.hpp"
#include "pufkit/oscillator_model.hpp"
#include "pufkit/puf_core.hpp"

namespace pufkit {

struct CodeParams {
    std::string scheme = "repetition";
    std::uint32_t t = 3;          // odd repetition factor >= 3
    std::uint32_t data_bits = 0;  // encoded information bits

    std::uint32_t block_length() const { return t * data_bits; }
    void validate() const;  // ConfigError
};

// Public fuzzy-extractor data. The offset w = r XOR c reveals nothing about
// the key when the info bits are uniform.
struct HelperData {
    CodeParams code;
    BitVec offset;  // length m = data_bits * t
    Challenge challenge = gen_challenge_neighbor(2);
    std::string hash_id = "sha-256";
    std::uint32_t key_bits = 256;
};

struct Key {
    std::vector<std::uint8_t> bytes;

    std::string hex() const;
    friend bool operator==(const Key&, const Key&) = default;
};

// Each info bit repeated t times, blocks concatenated in order.
BitVec encode_repetition(const BitVec& info, std::uint32_t t);

// Per-block majority vote; DimensionError when the length is not a multiple
// of t.
BitVec decode_repetition(const BitVec& bits, std::uint32_t t);

// Deterministic hash of the bit string (packed big-endian, left-padded to a
// whole byte), truncated to key_bits. Supported hash_id: "sha-256";
// key_bits in {128, 256}.
Key extract_key(const BitVec& corrected_response, const std::string& hash_id,
                std::uint32_t key_bits);

struct KeygenResult {
    Key key;
    HelperData helper;
};

// Core of the initialization phase, split out so tests can drive it with an
// explicit reference response and info bits.
KeygenResult keygen_init_from_reference(const BitVec& reference, const BitVec& info_bits,
                                        const Challenge& challenge, const CodeParams& code,
                                        const std::string& hash_id, std::uint32_t key_bits);

// Initialization phase: measures the noise-free nominal reference response r,
// draws random info bits from `seed`, and produces (key = H(r), helper).
KeygenResult keygen_init(const PopulationConfig& config, const PufInstance& instance,
                         const Challenge& challenge, const CodeParams& code,
                         const std::string& hash_id, std::uint32_t key_bits,
                         std::uint64_t seed);

// Error-correction + extraction on an already-measured noisy response:
// c' = r' XOR w, decode, re-encode, r~ = c~ XOR w, return H(r~).
Key reproduce_from_bits(const BitVec& noisy_response, const HelperData& helper);

// Key generation phase: measures one noisy response and reproduces the key.
// Returns the init key whenever every t-block carries at most (t-1)/2 errors;
// otherwise a wrong key (detection is the caller's concern).
Key keygen_reproduce(const PopulationConfig& config, const PufInstance& instance,
                     const HelperData& helper, const Environment& env,
                     std::uint64_t measurement_index);

std::vector<std::uint8_t> sha256(std::span<const std::uint8_t> data);

void to_json(nlohmann::json& j, const CodeParams& code);
void to_json(nlohmann::json& j, const HelperData& helper);
HelperData helper_from_json(const nlohmann::json& j);

HelperData load_helper(const std::filesystem::path& path);
void save_helper(const std::filesystem::path& path, const HelperData& helper);

}  // namespace pufkit
