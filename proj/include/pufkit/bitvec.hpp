#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace pufkit {

// Bit vector; index 0 corresponds to the leftmost character of the string
// form used in JSON payloads ("0110...").
class BitVec {
public:
    BitVec() = default;
    explicit BitVec(std::size_t n) : bits_(n, 0) {}

    // Parses a '0'/'1' character string; anything else is a ConfigError.
    static BitVec from_string(std::string_view s);

    std::string to_string() const;

    std::size_t size() const { return bits_.size(); }
    bool empty() const { return bits_.empty(); }

    int get(std::size_t i) const;  // BoundsError when out of range
    void set(std::size_t i, int v);
    void flip(std::size_t i);
    void push_back(int v) { bits_.push_back(v ? 1 : 0); }

    // Position-wise XOR; DimensionError on size mismatch.
    BitVec xored(const BitVec& other) const;

    // Packs big-endian, left-padded with zero bits to a whole byte.
    std::vector<std::uint8_t> pack_bytes() const;

    friend bool operator==(const BitVec&, const BitVec&) = default;

private:
    std::vector<std::uint8_t> bits_;  // one byte per bit, values 0/1
};

}  // namespace pufkit
