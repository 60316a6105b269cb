#include "mixagg/rng.hpp"

#include <sodium.h>

#include "mixagg/errors.hpp"

namespace mixagg {

static Bytes sha256(const Bytes& in) {
    Bytes out(crypto_hash_sha256_BYTES);
    crypto_hash_sha256(out.data(), in.data(), in.size());
    return out;
}

Drbg::Drbg(const Bytes& seed) { seed_ = sha256(seed); }

Drbg::Drbg(const std::string& seed_utf8)
    : Drbg(Bytes(seed_utf8.begin(), seed_utf8.end())) {}

Drbg Drbg::derive(const std::string& label) const {
    if (seed_.empty()) throw InternalError("derive from unseeded generator");
    Bytes in = seed_;
    in.push_back(0x00);  // separates seed from label
    append(in, Bytes(label.begin(), label.end()));
    Drbg child;
    child.seed_ = sha256(in);
    return child;
}

void Drbg::fill(uint8_t* out, size_t n) {
    if (seed_.empty()) throw InternalError("unseeded generator");
    size_t done = 0;
    while (done < n) {
        if (block_off_ >= block_.size()) {
            Bytes in = seed_;
            put_u64(in, ctr_++);
            block_ = sha256(in);
            block_off_ = 0;
        }
        size_t take = std::min(n - done, block_.size() - block_off_);
        std::memcpy(out + done, block_.data() + block_off_, take);
        block_off_ += take;
        done += take;
    }
}

Bytes Drbg::bytes(size_t n) {
    Bytes out(n);
    fill(out.data(), n);
    return out;
}

uint64_t Drbg::next_u64() {
    uint8_t b[8];
    fill(b, 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; i++) v = v << 8 | b[i];
    return v;
}

uint64_t Drbg::below(uint64_t bound) {
    if (bound == 0) throw InternalError("below(0)");
    if (bound == 1) return 0;
    // Largest multiple of bound that fits in 64 bits; reject above it.
    uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    for (;;) {
        uint64_t v = next_u64();
        if (v < limit) return v % bound;
    }
}

std::vector<uint32_t> random_permutation(Drbg& g, uint32_t n) {
    std::vector<uint32_t> p(n);
    for (uint32_t i = 0; i < n; i++) p[i] = i;
    for (uint32_t i = n; i > 1; i--) {
        uint32_t j = uint32_t(g.below(i));
        std::swap(p[i - 1], p[j]);
    }
    return p;
}

}  // namespace mixagg
