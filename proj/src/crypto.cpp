#include "mixagg/crypto.hpp"

#include <sodium.h>

#include <cstring>

#include "mixagg/errors.hpp"

namespace mixagg {

namespace {

void ensure_sodium() {
    static const int rc = sodium_init();
    if (rc < 0) throw CryptoError("sodium_init failed");
}

Bytes mpz_to_bytes(const mpz_class& z, size_t len) {
    Bytes out(len, 0);
    size_t count = 0;
    mpz_export(out.data(), &count, 1, 1, 1, 0, z.get_mpz_t());
    if (count > len) throw InternalError("integer too large for block");
    if (count && count < len) {
        // right-align
        std::memmove(out.data() + (len - count), out.data(), count);
        std::memset(out.data(), 0, len - count);
    }
    return out;
}

mpz_class bytes_to_mpz(const uint8_t* p, size_t n) {
    mpz_class z;
    mpz_import(z.get_mpz_t(), n, 1, 1, 1, 0, p);
    return z;
}

Bytes str_bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }

// Label || 0x1f || domain || 0x1f || payload, to keep hash inputs from
// different call sites disjoint.
Bytes bound_input(const std::string& label, const std::string& domain, const Bytes& payload) {
    Bytes in = str_bytes(label);
    in.push_back(0x1f);
    append(in, str_bytes(domain));
    in.push_back(0x1f);
    append(in, payload);
    return in;
}

}  // namespace

Bytes sha256(const uint8_t* p, size_t n) {
    ensure_sodium();
    Bytes out(HASH_LEN);
    crypto_hash_sha256(out.data(), p, n);
    return out;
}

Bytes sha256(const Bytes& in) { return sha256(in.data(), in.size()); }

Bytes mgf1(const Bytes& seed, size_t out_len) {
    Bytes out;
    out.reserve(out_len + HASH_LEN);
    for (uint32_t ctr = 0; out.size() < out_len; ctr++) {
        Bytes in = seed;
        put_u32(in, ctr);
        append(out, sha256(in));
    }
    out.resize(out_len);
    return out;
}

Bytes prf_bits(const Bytes& seed, uint64_t counter, uint32_t nbits) {
    size_t nbytes = (nbits + 7) / 8;
    Bytes out;
    out.reserve(nbytes + HASH_LEN);
    for (uint32_t i = 0; out.size() < nbytes; i++) {
        Bytes in = seed;
        put_u64(in, counter);
        put_u32(in, i);
        append(out, sha256(in));
    }
    out.resize(nbytes);
    if (nbits % 8) out.back() &= uint8_t(0xff << (8 - nbits % 8));
    return out;
}

bool is_bit_prefix(const Bytes& a, const Bytes& b, uint32_t nbits) {
    size_t full = nbits / 8;
    if (a.size() < (nbits + 7) / 8 || b.size() < (nbits + 7) / 8) return false;
    if (std::memcmp(a.data(), b.data(), full) != 0) return false;
    if (nbits % 8 == 0) return true;
    uint8_t mask = uint8_t(0xff << (8 - nbits % 8));
    return (a[full] & mask) == (b[full] & mask);
}

// ---- signing ----

SigKeys sig_keygen(Drbg& g) {
    ensure_sodium();
    Bytes seed = g.bytes(crypto_sign_SEEDBYTES);
    SigKeys k;
    k.pk.resize(crypto_sign_PUBLICKEYBYTES);
    k.sk.resize(crypto_sign_SECRETKEYBYTES);
    crypto_sign_seed_keypair(k.pk.data(), k.sk.data(), seed.data());
    return k;
}

Bytes sign(const Bytes& sk, const Bytes& msg) {
    ensure_sodium();
    if (sk.size() != crypto_sign_SECRETKEYBYTES) throw CryptoError("bad signing key");
    Bytes sig(SIG_LEN);
    crypto_sign_detached(sig.data(), nullptr, msg.data(), msg.size(), sk.data());
    return sig;
}

bool verify(const Bytes& pk, const Bytes& msg, const Bytes& sig) {
    ensure_sodium();
    if (pk.size() != crypto_sign_PUBLICKEYBYTES || sig.size() != SIG_LEN) return false;
    return crypto_sign_verify_detached(sig.data(), msg.data(), msg.size(), pk.data()) == 0;
}

// ---- public-key encryption ----

namespace {

constexpr unsigned long PUB_EXP = 65537;

mpz_class draw_in_range(Drbg& g, const mpz_class& lo, const mpz_class& width) {
    // A healthy margin of extra bytes keeps the mod bias negligible; the
    // draw stays fully determined by the generator.
    size_t nbytes = (mpz_sizeinbase(width.get_mpz_t(), 2) + 7) / 8 + 16;
    Bytes raw = g.bytes(nbytes);
    mpz_class v = bytes_to_mpz(raw.data(), raw.size());
    return lo + v % width;
}

}  // namespace

EncKeys enc_keygen(uint32_t bits, Drbg& g) {
    if (bits < 128 || bits % 8 != 0 || (bits / 8) % 2 != 0)
        throw ConfigError("key bits must be >= 128 and a multiple of 16");
    uint32_t hb = bits / 2;

    mpz_class half = mpz_class(1) << hb;
    // Primes sit a little above 2^(bits/2) so p*q always clears 2^bits.
    mpz_class lo = half + half / 200;   // * 1.005
    mpz_class hi = half + half / 40;    // * 1.025
    mpz_class width = hi - lo;
    mpz_class limit = (mpz_class(1) << bits) + (mpz_class(1) << (bits - 4));

    EncKeys k;
    k.pub.bits = bits;
    k.pub.e = PUB_EXP;

    for (;;) {
        mpz_class p, q;
        mpz_nextprime(p.get_mpz_t(), draw_in_range(g, lo, width).get_mpz_t());
        do {
            mpz_nextprime(q.get_mpz_t(), draw_in_range(g, lo, width).get_mpz_t());
        } while (q == p);

        mpz_class pm1 = p - 1, qm1 = q - 1;
        if (mpz_gcd_ui(nullptr, pm1.get_mpz_t(), PUB_EXP) != 1) continue;
        if (mpz_gcd_ui(nullptr, qm1.get_mpz_t(), PUB_EXP) != 1) continue;

        mpz_class n = p * q;
        if (n >= limit) continue;  // nextprime overshoot; effectively never

        mpz_class phi = pm1 * qm1;
        mpz_class d;
        if (mpz_invert(d.get_mpz_t(), k.pub.e.get_mpz_t(), phi.get_mpz_t()) == 0) continue;

        k.pub.n = n;
        k.d = d;
        k.p = p;
        k.q = q;
        k.dp = d % pm1;
        k.dq = d % qm1;
        if (mpz_invert(k.qinv.get_mpz_t(), q.get_mpz_t(), p.get_mpz_t()) == 0) continue;
        return k;
    }
}

EncKeys enc_keys_from_prime(const EncPub& pub, const mpz_class& p) {
    if (p <= 1 || pub.n % p != 0) throw CryptoError("prime does not divide the modulus");
    EncKeys k;
    k.pub = pub;
    k.p = p;
    k.q = pub.n / p;
    mpz_class pm1 = k.p - 1, qm1 = k.q - 1, phi = pm1 * qm1;
    if (mpz_invert(k.d.get_mpz_t(), pub.e.get_mpz_t(), phi.get_mpz_t()) == 0)
        throw CryptoError("public exponent not invertible for this modulus");
    k.dp = k.d % pm1;
    k.dq = k.d % qm1;
    if (mpz_invert(k.qinv.get_mpz_t(), k.q.get_mpz_t(), k.p.get_mpz_t()) == 0)
        throw CryptoError("factors are not coprime");
    return k;
}

namespace {

mpz_class pow_e(const EncPub& k, const mpz_class& m) {
    mpz_class c;
    mpz_powm(c.get_mpz_t(), m.get_mpz_t(), k.e.get_mpz_t(), k.n.get_mpz_t());
    return c;
}

mpz_class pow_d(const EncKeys& k, const mpz_class& c) {
    mpz_class m1, m2;
    mpz_powm(m1.get_mpz_t(), c.get_mpz_t(), k.dp.get_mpz_t(), k.p.get_mpz_t());
    mpz_powm(m2.get_mpz_t(), c.get_mpz_t(), k.dq.get_mpz_t(), k.q.get_mpz_t());
    mpz_class h = (k.qinv * (m1 - m2)) % k.p;
    if (h < 0) h += k.p;
    return m2 + h * k.q;
}

// Cycle walking keeps block values below 2^bits: re-encrypt until the
// result fits, and undo by re-decrypting while the result does not fit.
mpz_class enc_block(const EncPub& k, const mpz_class& m) {
    mpz_class bound = mpz_class(1) << k.bits;
    if (m >= bound) throw InternalError("block out of range");
    mpz_class c = pow_e(k, m);
    while (c >= bound) c = pow_e(k, c);
    return c;
}

mpz_class dec_block(const EncKeys& k, const mpz_class& c) {
    mpz_class bound = mpz_class(1) << k.pub.bits;
    if (c >= bound) throw InternalError("block out of range");
    mpz_class m = pow_d(k, c);
    while (m >= bound) m = pow_d(k, m);
    return m;
}

// Encrypt full blocks in place and mask the tail with a stream derived
// from the block ciphertexts, so |out| == |in| for |in| >= one block.
Bytes blockwise_encrypt(const EncPub& k, const Bytes& in, const std::string& tail_label,
                        const std::string& domain) {
    size_t B = k.block_bytes();
    if (in.size() < B) throw InternalError("input shorter than one block");
    size_t nblocks = in.size() / B;
    size_t tail = in.size() - nblocks * B;
    Bytes out;
    out.reserve(in.size());
    for (size_t i = 0; i < nblocks; i++) {
        mpz_class m = bytes_to_mpz(in.data() + i * B, B);
        append(out, mpz_to_bytes(enc_block(k, m), B));
    }
    if (tail) {
        Bytes mask = mgf1(bound_input(tail_label, domain, out), tail);
        for (size_t i = 0; i < tail; i++) out.push_back(in[nblocks * B + i] ^ mask[i]);
    }
    return out;
}

Bytes blockwise_decrypt(const EncKeys& k, const Bytes& in, const std::string& tail_label,
                        const std::string& domain) {
    size_t B = k.pub.block_bytes();
    if (in.size() < B) throw InternalError("input shorter than one block");
    size_t nblocks = in.size() / B;
    size_t tail = in.size() - nblocks * B;
    Bytes out;
    out.reserve(in.size());
    for (size_t i = 0; i < nblocks; i++) {
        mpz_class c = bytes_to_mpz(in.data() + i * B, B);
        append(out, mpz_to_bytes(dec_block(k, c), B));
    }
    if (tail) {
        Bytes blocks(in.begin(), in.begin() + nblocks * B);
        Bytes mask = mgf1(bound_input(tail_label, domain, blocks), tail);
        for (size_t i = 0; i < tail; i++) out.push_back(in[nblocks * B + i] ^ mask[i]);
    }
    return out;
}

}  // namespace

size_t cipher_len(size_t plain_len, const EncPub& k) {
    return std::max(plain_len + PAD_OVERHEAD, k.block_bytes());
}

Bytes pad_encrypt(const EncPub& k, const Bytes& tag, const Bytes& plain,
                  const std::string& domain) {
    if (tag.size() != PAD_SEED_LEN) throw CryptoError("randomizer tag must be 16 bytes");
    size_t B = k.block_bytes();
    size_t dblen = std::max(plain.size() + PAD_CHECK_LEN, B - PAD_SEED_LEN);

    Bytes check = sha256(bound_input("mixagg.pad.check", domain, plain));
    Bytes db;
    db.reserve(dblen);
    db.insert(db.end(), check.begin(), check.begin() + PAD_CHECK_LEN);
    append(db, plain);
    db.resize(dblen, 0);

    Bytes db_mask = mgf1(tag, dblen);
    for (size_t i = 0; i < dblen; i++) db[i] ^= db_mask[i];

    Bytes seed_mask = sha256(bound_input("mixagg.pad.seedmask", domain, db));
    Bytes x;
    x.reserve(PAD_SEED_LEN + dblen);
    for (size_t i = 0; i < PAD_SEED_LEN; i++) x.push_back(tag[i] ^ seed_mask[i]);
    append(x, db);

    return blockwise_encrypt(k, x, "mixagg.pad.tail", domain);
}

Bytes pad_decrypt(const EncKeys& k, const Bytes& ct, size_t plain_len,
                  const std::string& domain) {
    if (ct.size() != cipher_len(plain_len, k.pub)) throw PaddingError("ciphertext length");
    Bytes x = blockwise_decrypt(k, ct, "mixagg.pad.tail", domain);

    Bytes masked_db(x.begin() + PAD_SEED_LEN, x.end());
    Bytes seed_mask = sha256(bound_input("mixagg.pad.seedmask", domain, masked_db));
    Bytes tag(PAD_SEED_LEN);
    for (size_t i = 0; i < PAD_SEED_LEN; i++) tag[i] = x[i] ^ seed_mask[i];

    Bytes db_mask = mgf1(tag, masked_db.size());
    for (size_t i = 0; i < masked_db.size(); i++) masked_db[i] ^= db_mask[i];

    if (masked_db.size() < PAD_CHECK_LEN + plain_len) throw PaddingError("short block");
    Bytes plain(masked_db.begin() + PAD_CHECK_LEN, masked_db.begin() + PAD_CHECK_LEN + plain_len);
    Bytes check = sha256(bound_input("mixagg.pad.check", domain, plain));
    if (!std::equal(check.begin(), check.begin() + PAD_CHECK_LEN, masked_db.begin()))
        throw PaddingError("integrity check");
    for (size_t i = PAD_CHECK_LEN + plain_len; i < masked_db.size(); i++)
        if (masked_db[i] != 0) throw PaddingError("nonzero fill");
    return plain;
}

Bytes regular_encrypt(const EncPub& k, const Bytes& plain, const std::string& domain) {
    if (plain.size() < k.block_bytes()) throw CryptoError("plaintext shorter than one block");
    return blockwise_encrypt(k, plain, "mixagg.reg.tail", domain);
}

Bytes regular_decrypt(const EncKeys& k, const Bytes& ct, const std::string& domain) {
    if (ct.size() < k.pub.block_bytes()) throw CryptoError("ciphertext shorter than one block");
    return blockwise_decrypt(k, ct, "mixagg.reg.tail", domain);
}

Bytes layer_encrypt(const std::vector<EncPub>& keys, const std::vector<Bytes>& tags,
                    const Bytes& cell, const std::string& domain) {
    if (keys.size() != tags.size()) throw InternalError("keys/tags length mismatch");
    Bytes cur = cell;
    for (size_t i = 0; i < keys.size(); i++) cur = pad_encrypt(keys[i], tags[i], cur, domain);
    return cur;
}

uint32_t choose_index_bits(uint32_t n, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("collision threshold must be in (0,1)");
    if (n == 0) throw ConfigError("need at least one index");
    mpq_class thr(threshold);  // exact value of the double
    for (uint32_t L = 1; L <= 256; L++) {
        if (L < 64 && (uint64_t(1) << L) < n) continue;  // certain collision
        mpz_class space = mpz_class(1) << L;
        mpq_class no_collision(1);
        for (uint32_t a = 0; a < n; a++) {
            no_collision *= mpq_class(space - a, space);
        }
        no_collision.canonicalize();
        mpq_class p = mpq_class(1) - no_collision;
        if (p <= thr) return L;
    }
    throw InternalError("no index width satisfies threshold");
}

}  // namespace mixagg
