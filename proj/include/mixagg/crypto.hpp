// Cryptographic primitives.
//
// Public-key encryption is textbook RSA over randomness-expanded plaintexts,
// made length-preserving at the block level by cycle walking: the modulus is
// chosen slightly above 2^bits and a block is re-encrypted until the result
// fits back into bits/8 bytes.  Each encryption call prepends a 16-byte
// randomizer seed and a 16-byte integrity check, masks both all-or-nothing
// style, and grows the message by exactly PAD_OVERHEAD bytes, so ciphertext
// lengths stay affine in the number of layers no matter how many layers are
// stacked.  Everything is deterministic given the key and the randomizer
// tag, which is what makes transcript replay possible.
//
// Signatures are Ed25519 and hashing is SHA-256, both via libsodium.
#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mixagg/bytes.hpp"
#include "mixagg/rng.hpp"

namespace mixagg {

inline constexpr size_t SIG_LEN = 64;       // Ed25519 detached signature
inline constexpr size_t SIG_PK_LEN = 32;
inline constexpr size_t HASH_LEN = 32;      // SHA-256
inline constexpr size_t PAD_SEED_LEN = 16;  // randomizer tag carried per layer
inline constexpr size_t PAD_CHECK_LEN = 16; // integrity check per layer
inline constexpr size_t PAD_OVERHEAD = PAD_SEED_LEN + PAD_CHECK_LEN;

Bytes sha256(const Bytes& in);
Bytes sha256(const uint8_t* p, size_t n);

// SHA-256 based mask generation (MGF1).
Bytes mgf1(const Bytes& seed, size_t out_len);

// PRF output stream: SHA-256 over seed || counter, truncated to nbits with
// unused trailing bits of the last byte forced to zero.
Bytes prf_bits(const Bytes& seed, uint64_t counter, uint32_t nbits);

// True when the first nbits of a equal the first nbits of b.
bool is_bit_prefix(const Bytes& a, const Bytes& b, uint32_t nbits);

// ---- signing ----

struct SigKeys {
    Bytes pk;  // 32 bytes
    Bytes sk;  // 64 bytes
};

SigKeys sig_keygen(Drbg& g);
Bytes sign(const Bytes& sk, const Bytes& msg);
bool verify(const Bytes& pk, const Bytes& msg, const Bytes& sig);

// ---- public-key encryption ----

struct EncPub {
    uint32_t bits = 0;   // block size in bits; block_bytes() per block
    mpz_class n;
    mpz_class e;

    size_t block_bytes() const { return bits / 8; }
};

struct EncKeys {
    EncPub pub;
    mpz_class d;
    mpz_class p, q, dp, dq, qinv;  // CRT form
};

// Deterministic keypair from the generator.  Primes are drawn from
// (2^(bits/2) * 1.005, 2^(bits/2) * 1.025) so the modulus always exceeds
// 2^bits by a few percent at most, keeping the expected cycle-walk short.
EncKeys enc_keygen(uint32_t bits, Drbg& g);

// Rebuilds the CRT private key from the public half and one prime factor,
// for schemes that reveal a decryption key after the fact.
EncKeys enc_keys_from_prime(const EncPub& pub, const mpz_class& p);

// Ciphertext length for a plaintext of plain_len bytes.
size_t cipher_len(size_t plain_len, const EncPub& k);

// Randomized, length-disciplined encryption: |ct| = cipher_len(|plain|).
// tag must be PAD_SEED_LEN bytes; domain binds the call site.
Bytes pad_encrypt(const EncPub& k, const Bytes& tag, const Bytes& plain,
                  const std::string& domain);

// Inverse of pad_encrypt; plain_len must match the original plaintext
// length.  Throws PaddingError when the integrity check fails.
Bytes pad_decrypt(const EncKeys& k, const Bytes& ct, size_t plain_len,
                  const std::string& domain);

// Unpadded deterministic encryption, |ct| == |plain|, requires
// |plain| >= block_bytes().  Used by the baseline's inner layers.
Bytes regular_encrypt(const EncPub& k, const Bytes& plain, const std::string& domain);
Bytes regular_decrypt(const EncKeys& k, const Bytes& ct, const std::string& domain);

// ---- layered helpers ----

// Encrypts cell under keys[0], then keys[1], ... (caller passes them in
// encryption order).  tags[i] is the randomizer for layer i.  The result
// length is |cell| + layers * PAD_OVERHEAD.
Bytes layer_encrypt(const std::vector<EncPub>& keys,
                    const std::vector<Bytes>& tags, const Bytes& cell,
                    const std::string& domain);

// ---- anonymous index numbers ----

// Smallest output bit width L such that the probability of any collision
// among n independent uniform L-bit values stays within threshold.
// Exact rational arithmetic; throws ConfigError for threshold <= 0 or >= 1.
uint32_t choose_index_bits(uint32_t n, double threshold);

}  // namespace mixagg
