#include "kgcal/hashing.hpp"

#include <openssl/evp.h>

#include <array>
#include <stdexcept>

namespace kgcal {

namespace {

void put_le32(unsigned char* out, std::uint32_t v) {
    out[0] = static_cast<unsigned char>(v);
    out[1] = static_cast<unsigned char>(v >> 8);
    out[2] = static_cast<unsigned char>(v >> 16);
    out[3] = static_cast<unsigned char>(v >> 24);
}

}  // namespace

double tiebreak_hash(const Triple& t) {
    std::array<unsigned char, 12> bytes{};
    put_le32(bytes.data(), t.head.index);
    put_le32(bytes.data() + 4, t.relation.index);
    put_le32(bytes.data() + 8, t.tail.index);

    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_md5(), nullptr) != 1 ||
        len < 8) {
        throw std::runtime_error("MD5 digest failed");
    }
    std::uint64_t word = 0;
    for (int i = 0; i < 8; ++i) word = (word << 8) | digest[static_cast<std::size_t>(i)];
    return unit_interval(word);
}

}  // namespace kgcal
