#include "pufkit/bitvec.hpp"

#include "pufkit/errors.hpp"

namespace pufkit {

BitVec BitVec::from_string(std::string_view s) {
    BitVec v;
    v.bits_.reserve(s.size());
    for (char c : s) {
        if (c != '0' && c != '1') {
            throw ConfigError("bit string: expected only '0'/'1' characters");
        }
        v.bits_.push_back(c == '1' ? 1 : 0);
    }
    return v;
}

std::string BitVec::to_string() const {
    std::string s;
    s.reserve(bits_.size());
    for (std::uint8_t b : bits_) {
        s.push_back(b ? '1' : '0');
    }
    return s;
}

int BitVec::get(std::size_t i) const {
    if (i >= bits_.size()) {
        throw BoundsError("bit index out of range");
    }
    return bits_[i];
}

void BitVec::set(std::size_t i, int v) {
    if (i >= bits_.size()) {
        throw BoundsError("bit index out of range");
    }
    bits_[i] = v ? 1 : 0;
}

void BitVec::flip(std::size_t i) {
    if (i >= bits_.size()) {
        throw BoundsError("bit index out of range");
    }
    bits_[i] ^= 1;
}

BitVec BitVec::xored(const BitVec& other) const {
    if (bits_.size() != other.bits_.size()) {
        throw DimensionError("bit vector XOR: lengths differ");
    }
    BitVec out(bits_.size());
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        out.bits_[i] = bits_[i] ^ other.bits_[i];
    }
    return out;
}

std::vector<std::uint8_t> BitVec::pack_bytes() const {
    const std::size_t n_bytes = (bits_.size() + 7) / 8;
    const std::size_t pad = n_bytes * 8 - bits_.size();
    std::vector<std::uint8_t> out(n_bytes, 0);
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        if (bits_[i]) {
            const std::size_t pos = pad + i;
            out[pos / 8] |= static_cast<std::uint8_t>(1u << (7 - pos % 8));
        }
    }
    return out;
}

}  // namespace pufkit
