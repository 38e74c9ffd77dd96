#include "pufkit/keygen.hpp"

#include <openssl/evp.h>

#include <fstream>

#include "pufkit/errors.hpp"
#include "pufkit/rng.hpp"

namespace pufkit {

void CodeParams::validate() const {
    if (scheme != "repetition") {
        throw ConfigError("code.scheme: unsupported scheme '" + scheme + "'");
    }
    if (t < 3 || t % 2 == 0) {
        throw ConfigError("code.t: repetition factor must be odd and >= 3");
    }
    if (data_bits == 0) {
        throw ConfigError("code.data_bits: must be >= 1");
    }
}

std::string Key::hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (std::uint8_t b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0f]);
    }
    return out;
}

BitVec encode_repetition(const BitVec& info, std::uint32_t t) {
    if (t % 2 == 0 || t == 0) {
        throw ConfigError("t: repetition factor must be odd");
    }
    BitVec out;
    for (std::size_t i = 0; i < info.size(); ++i) {
        for (std::uint32_t r = 0; r < t; ++r) {
            out.push_back(info.get(i));
        }
    }
    return out;
}

BitVec decode_repetition(const BitVec& bits, std::uint32_t t) {
    if (t % 2 == 0 || t == 0) {
        throw ConfigError("t: repetition factor must be odd");
    }
    if (bits.size() % t != 0) {
        throw DimensionError("decode: length not divisible by t");
    }
    BitVec info;
    for (std::size_t block = 0; block < bits.size() / t; ++block) {
        std::uint32_t ones = 0;
        for (std::uint32_t r = 0; r < t; ++r) {
            ones += static_cast<std::uint32_t>(bits.get(block * t + r));
        }
        info.push_back(ones > t / 2 ? 1 : 0);
    }
    return info;
}

std::vector<std::uint8_t> sha256(std::span<const std::uint8_t> data) {
    std::vector<std::uint8_t> digest(EVP_MAX_MD_SIZE);
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha-256 digest failed");
    }
    digest.resize(len);
    return digest;
}

Key extract_key(const BitVec& corrected_response, const std::string& hash_id,
                std::uint32_t key_bits) {
    if (hash_id != "sha-256") {
        throw ConfigError("hash_id: unsupported algorithm '" + hash_id + "'");
    }
    if (key_bits != 128 && key_bits != 256) {
        throw ConfigError("key_bits: must be 128 or 256");
    }
    const std::vector<std::uint8_t> packed = corrected_response.pack_bytes();
    std::vector<std::uint8_t> digest = sha256(packed);
    digest.resize(key_bits / 8);
    return Key{std::move(digest)};
}

KeygenResult keygen_init_from_reference(const BitVec& reference, const BitVec& info_bits,
                                        const Challenge& challenge, const CodeParams& code,
                                        const std::string& hash_id, std::uint32_t key_bits) {
    code.validate();
    if (info_bits.size() != code.data_bits) {
        throw DimensionError("info bits: length != data_bits");
    }
    if (reference.size() != code.block_length()) {
        throw DimensionError("response length m != data_bits * t");
    }
    const BitVec codeword = encode_repetition(info_bits, code.t);
    HelperData helper;
    helper.code = code;
    helper.offset = reference.xored(codeword);
    helper.challenge = challenge;
    helper.hash_id = hash_id;
    helper.key_bits = key_bits;
    return {extract_key(reference, hash_id, key_bits), std::move(helper)};
}

KeygenResult keygen_init(const PopulationConfig& config, const PufInstance& instance,
                         const Challenge& challenge, const CodeParams& code,
                         const std::string& hash_id, std::uint32_t key_bits,
                         std::uint64_t seed) {
    code.validate();
    if (challenge.length() != code.block_length()) {
        throw DimensionError("response length m != data_bits * t");
    }
    const BitVec reference = evaluate_reference(config, instance, challenge).bits;
    rng::Stream stream(rng::stream_key(seed, rng::Domain::info_bits,
                                       {instance.instance_id, challenge.length()}));
    BitVec info;
    for (std::uint32_t i = 0; i < code.data_bits; ++i) {
        info.push_back(stream.next_bit() ? 1 : 0);
    }
    return keygen_init_from_reference(reference, info, challenge, code, hash_id, key_bits);
}

Key reproduce_from_bits(const BitVec& noisy_response, const HelperData& helper) {
    helper.code.validate();
    if (helper.offset.size() != helper.code.block_length()) {
        throw DimensionError("helper offset length != data_bits * t");
    }
    if (noisy_response.size() != helper.offset.size()) {
        throw DimensionError("response length != helper offset length");
    }
    const BitVec received = noisy_response.xored(helper.offset);
    const BitVec info = decode_repetition(received, helper.code.t);
    const BitVec corrected_codeword = encode_repetition(info, helper.code.t);
    const BitVec corrected_response = corrected_codeword.xored(helper.offset);
    return extract_key(corrected_response, helper.hash_id, helper.key_bits);
}

Key keygen_reproduce(const PopulationConfig& config, const PufInstance& instance,
                     const HelperData& helper, const Environment& env,
                     std::uint64_t measurement_index) {
    const Response measured =
        evaluate(config, instance, helper.challenge, env, measurement_index);
    return reproduce_from_bits(measured.bits, helper);
}

void to_json(nlohmann::json& j, const CodeParams& code) {
    j = nlohmann::json{
        {"scheme", code.scheme},
        {"t", code.t},
        {"data_bits", code.data_bits},
    };
}

void to_json(nlohmann::json& j, const HelperData& helper) {
    j = nlohmann::json{
        {"code", helper.code},
        {"offset", helper.offset.to_string()},
        {"challenge", helper.challenge},
        {"hash_id", helper.hash_id},
        {"key_bits", helper.key_bits},
    };
}

HelperData helper_from_json(const nlohmann::json& j) {
    HelperData helper;
    const nlohmann::json& cj = j.at("code");
    helper.code.scheme = cj.at("scheme").get<std::string>();
    helper.code.t = cj.at("t").get<std::uint32_t>();
    helper.code.data_bits = cj.at("data_bits").get<std::uint32_t>();
    helper.code.validate();
    helper.offset = BitVec::from_string(j.at("offset").get<std::string>());
    helper.challenge = challenge_from_json(j.at("challenge"));
    helper.hash_id = j.at("hash_id").get<std::string>();
    helper.key_bits = j.at("key_bits").get<std::uint32_t>();
    if (helper.offset.size() != helper.code.block_length()) {
        throw DimensionError("helper offset length != data_bits * t");
    }
    return helper;
}

HelperData load_helper(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open helper file: " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("helper file " + path.string() + ": " + e.what());
    }
    return helper_from_json(j);
}

void save_helper(const std::filesystem::path& path, const HelperData& helper) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write helper file: " + path.string());
    }
    nlohmann::json j = helper;
    out << j.dump(2) << '\n';
    if (!out) {
        throw IoError("write failed: " + path.string());
    }
}

}  // namespace pufkit
