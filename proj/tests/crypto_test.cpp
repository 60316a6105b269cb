#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <gmpxx.h>

#include <set>

#include "doctest.h"
#include "mixagg/crypto.hpp"
#include "mixagg/errors.hpp"
#include "mixagg/rng.hpp"

using namespace mixagg;

// Reference values below were produced with an independent Python
// implementation (hashlib) of the same constructions, so they pin the exact
// byte layout: big-endian counters, the 0x00 derive separator, and the
// trailing-bit mask of prf_bits.

TEST_CASE("sha256 matches published vectors") {
    CHECK(to_hex(sha256(Bytes{})) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    Bytes abc{'a', 'b', 'c'};
    CHECK(to_hex(sha256(abc)) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("mgf1 reference vector and length") {
    Bytes seed{'m', 'i', 'x', 'a', 'g', 'g'};
    CHECK(to_hex(mgf1(seed, 40)) ==
          "fc89219c12a0b29d71f000ef89722920489450e008560c14137177d020aa291082f2962d28eec556");
    CHECK(mgf1(seed, 0).size() == 0);
    CHECK(mgf1(seed, 33).size() == 33);
    // prefix property: longer outputs extend shorter ones
    Bytes a = mgf1(seed, 10), b = mgf1(seed, 64);
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
}

TEST_CASE("prf_bits reference vector, masking and prefix consistency") {
    Bytes seed{'s', 'e', 'e', 'd'};
    CHECK(to_hex(prf_bits(seed, 7, 20)) == "770980");

    // unused trailing bits are forced to zero
    Bytes v = prf_bits(seed, 3, 13);
    CHECK(v.size() == 2);
    CHECK((v[1] & 0x07) == 0);

    // the first k bits don't depend on how many bits were requested
    for (uint32_t k : {1u, 7u, 8u, 9u, 15u, 16u, 23u}) {
        Bytes shorter = prf_bits(seed, 11, k);
        Bytes longer = prf_bits(seed, 11, 24);
        CHECK(is_bit_prefix(shorter, longer, k));
    }

    // different counters decorrelate
    CHECK(prf_bits(seed, 0, 64) != prf_bits(seed, 1, 64));
}

TEST_CASE("is_bit_prefix edge behaviour") {
    Bytes a{0b10110000}, b{0b10111111};
    CHECK(is_bit_prefix(a, b, 4));
    CHECK(!is_bit_prefix(a, b, 5));
    CHECK(is_bit_prefix(a, a, 8));
    CHECK(!is_bit_prefix(a, Bytes{}, 1));
}

TEST_CASE("drbg reference stream and derivation") {
    Drbg g("golden");
    CHECK(to_hex(g.bytes(20)) == "fd84f9edc79f28484ee298f40baec1f78a2cb958");
    // the stream continues across the 32-byte block boundary
    CHECK(to_hex(g.bytes(12)) == "6e88983c15a5e9382b9a47ac");

    Drbg child = Drbg("golden").derive("child");
    CHECK(child.next_u64() == 0xaac00a98936123b5ull);

    // derivation does not disturb the parent's position
    Drbg p1("golden");
    Bytes before = p1.bytes(8);
    Drbg p2("golden");
    (void)p2.derive("whatever");
    CHECK(p2.bytes(8) == before);

    // distinct labels give distinct streams
    CHECK(Drbg("golden").derive("a").next_u64() != Drbg("golden").derive("b").next_u64());
}

TEST_CASE("below is uniform-range and in bounds") {
    Drbg g("bounds");
    for (uint64_t bound : {1ull, 2ull, 3ull, 10ull, 1000ull, 1ull << 40}) {
        for (int i = 0; i < 50; i++) CHECK(g.below(bound) < bound);
    }
    // all residues reachable for a small bound
    std::set<uint64_t> seen;
    Drbg h("residues");
    for (int i = 0; i < 200; i++) seen.insert(h.below(5));
    CHECK(seen.size() == 5);
}

TEST_CASE("random_permutation is a permutation and seed-stable") {
    Drbg g("perm");
    auto p = random_permutation(g, 257);
    std::set<uint32_t> s(p.begin(), p.end());
    CHECK(s.size() == 257);
    CHECK(*s.begin() == 0);
    CHECK(*s.rbegin() == 256);

    Drbg g2("perm");
    CHECK(random_permutation(g2, 257) == p);
}

TEST_CASE("ed25519 sign and verify") {
    Drbg g("sig");
    SigKeys k = sig_keygen(g);
    Bytes msg{'h', 'i'};
    Bytes sig = sign(k.sk, msg);
    CHECK(sig.size() == SIG_LEN);
    CHECK(verify(k.pk, msg, sig));

    Bytes bad = sig;
    bad[0] ^= 1;
    CHECK(!verify(k.pk, msg, bad));
    Bytes other{'h', 'o'};
    CHECK(!verify(k.pk, other, sig));

    // a second keypair from the same stream differs
    SigKeys k2 = sig_keygen(g);
    CHECK(k2.pk != k.pk);
    CHECK(!verify(k2.pk, msg, sig));
}

static EncKeys test_key(const char* label, uint32_t bits = 512) {
    Drbg g(label);
    return enc_keygen(bits, g);
}

TEST_CASE("keygen shape: modulus slightly above the block size") {
    EncKeys k = test_key("shape");
    CHECK(k.pub.bits == 512);
    CHECK(k.pub.block_bytes() == 64);
    mpz_class low = mpz_class(1) << 512;
    // block + a few percent, so cycle walking terminates quickly
    mpz_class high = low + (low >> 4);
    CHECK(k.pub.n > low);
    CHECK(k.pub.n < high);
    CHECK(k.pub.e == 65537);
    CHECK(k.p * k.q == k.pub.n);
}

TEST_CASE("cipher_len is affine with a one-block floor") {
    EncKeys k = test_key("len");
    const size_t B = k.pub.block_bytes();
    CHECK(cipher_len(1, k.pub) == B);
    CHECK(cipher_len(B - PAD_OVERHEAD, k.pub) == B);
    CHECK(cipher_len(B - PAD_OVERHEAD + 1, k.pub) == B + 1);
    CHECK(cipher_len(B, k.pub) == B + PAD_OVERHEAD);
    CHECK(cipher_len(300, k.pub) == 300 + PAD_OVERHEAD);
}

TEST_CASE("pad encryption round-trips across lengths") {
    EncKeys k = test_key("pad");
    Drbg g("pad plains");
    for (size_t len : {1, 15, 31, 32, 63, 64, 65, 100, 192, 300}) {
        Bytes plain = g.bytes(len);
        Bytes tag = g.bytes(PAD_SEED_LEN);
        Bytes ct = pad_encrypt(k.pub, tag, plain, "unit");
        CHECK(ct.size() == cipher_len(len, k.pub));
        CHECK(pad_decrypt(k, ct, len, "unit") == plain);
    }
}

TEST_CASE("pad encryption is deterministic in the tag and key") {
    EncKeys k = test_key("det");
    Drbg g("det plains");
    Bytes plain = g.bytes(48);
    Bytes tag = g.bytes(PAD_SEED_LEN);
    CHECK(pad_encrypt(k.pub, tag, plain, "unit") == pad_encrypt(k.pub, tag, plain, "unit"));
    Bytes tag2 = tag;
    tag2[0] ^= 1;
    CHECK(pad_encrypt(k.pub, tag, plain, "unit") != pad_encrypt(k.pub, tag2, plain, "unit"));
}

TEST_CASE("tampering, wrong domain or wrong length all fail the check") {
    EncKeys k = test_key("tamper");
    Drbg g("tamper plains");
    Bytes plain = g.bytes(40);
    Bytes tag = g.bytes(PAD_SEED_LEN);
    Bytes ct = pad_encrypt(k.pub, tag, plain, "unit");

    // every single-bit flip must be caught
    for (size_t pos : {size_t(0), ct.size() / 2, ct.size() - 1}) {
        Bytes bad = ct;
        bad[pos] ^= 0x40;
        CHECK_THROWS_AS((void)pad_decrypt(k, bad, 40, "unit"), PaddingError);
    }
    CHECK_THROWS_AS((void)pad_decrypt(k, ct, 40, "other"), PaddingError);
    CHECK_THROWS_AS((void)pad_decrypt(k, ct, 39, "unit"), PaddingError);

    EncKeys k2 = test_key("tamper-2");
    CHECK_THROWS_AS((void)pad_decrypt(k2, ct, 40, "unit"), PaddingError);
}

TEST_CASE("layered encryption grows by exactly the per-layer overhead") {
    EncKeys a = test_key("layer-a"), b = test_key("layer-b"), c = test_key("layer-c");
    std::vector<EncPub> pubs{a.pub, b.pub, c.pub};
    Drbg g("layer tags");
    std::vector<Bytes> tags{g.bytes(PAD_SEED_LEN), g.bytes(PAD_SEED_LEN), g.bytes(PAD_SEED_LEN)};
    Bytes cell = g.bytes(48);  // >= block - overhead, so every layer is affine

    Bytes onion = layer_encrypt(pubs, tags, cell, "unit");
    CHECK(onion.size() == cell.size() + 3 * PAD_OVERHEAD);

    // strip in reverse order of application: keys[2] was applied last
    Bytes s2 = pad_decrypt(c, onion, cell.size() + 2 * PAD_OVERHEAD, "unit");
    Bytes s1 = pad_decrypt(b, s2, cell.size() + PAD_OVERHEAD, "unit");
    Bytes s0 = pad_decrypt(a, s1, cell.size(), "unit");
    CHECK(s0 == cell);

    // stripping out of order fails
    CHECK_THROWS_AS((void)pad_decrypt(a, onion, cell.size() + 2 * PAD_OVERHEAD, "unit"),
                    PaddingError);
}

TEST_CASE("regular encryption preserves length and composes") {
    EncKeys k = test_key("reg");
    Drbg g("reg plains");
    const size_t B = k.pub.block_bytes();
    for (size_t len : {B, B + 1, 2 * B + 5}) {
        Bytes plain = g.bytes(len);
        Bytes ct = regular_encrypt(k.pub, plain, "unit");
        CHECK(ct.size() == len);
        CHECK(regular_decrypt(k, ct, "unit") == plain);
    }
    // two stacked keys strip in reverse order
    EncKeys k2 = test_key("reg-2");
    Bytes plain = g.bytes(B);
    Bytes ct = regular_encrypt(k2.pub, regular_encrypt(k.pub, plain, "unit"), "unit");
    CHECK(ct.size() == B);
    CHECK(regular_decrypt(k, regular_decrypt(k2, ct, "unit"), "unit") == plain);
}

TEST_CASE("a revealed prime rebuilds the working private key") {
    EncKeys k = test_key("reveal");
    EncKeys rebuilt = enc_keys_from_prime(k.pub, k.p);
    Drbg g("reveal plains");
    Bytes plain = g.bytes(k.pub.block_bytes());
    Bytes ct = regular_encrypt(k.pub, plain, "unit");
    CHECK(regular_decrypt(rebuilt, ct, "unit") == plain);

    // the other prime works just as well
    EncKeys rebuilt2 = enc_keys_from_prime(k.pub, k.q);
    CHECK(regular_decrypt(rebuilt2, ct, "unit") == plain);
}

// Exact no-collision probability for n uniform L-bit draws, in rational
// arithmetic: prod_{i=1}^{n-1} (1 - i/2^L).
static bool collision_within(uint32_t n, uint32_t L, const mpq_class& threshold) {
    mpq_class ok(1);
    mpq_class space(mpz_class(1) << L);
    for (uint32_t i = 1; i < n; i++) {
        mpq_class term(space - i);
        term /= space;
        ok *= term;
    }
    mpq_class collide = 1 - ok;
    return collide <= threshold;
}

TEST_CASE("choose_index_bits agrees with the exact rational oracle") {
    struct Case {
        uint32_t n;
        double thr;
        mpq_class exact;
    };
    std::vector<Case> cases = {
        {2, 1e-3, mpq_class(1, 1000)},    {10, 1e-3, mpq_class(1, 1000)},
        {10, 1e-2, mpq_class(1, 100)},    {100, 1e-3, mpq_class(1, 1000)},
        {1000, 1e-6, mpq_class(1, 1000000)}, {3, 1e-2, mpq_class(1, 100)},
    };
    for (const auto& c : cases) {
        uint32_t got = choose_index_bits(c.n, c.thr);
        CAPTURE(c.n);
        CAPTURE(c.thr);
        CHECK(collision_within(c.n, got, c.exact));
        if (got > 1) CHECK(!collision_within(c.n, got - 1, c.exact));
    }
    // the two-user case solves in closed form: P(collision) = 2^-L
    CHECK(choose_index_bits(2, 1e-3) == 10);
}

TEST_CASE("choose_index_bits rejects nonsense thresholds") {
    CHECK_THROWS_AS((void)choose_index_bits(10, 0.0), ConfigError);
    CHECK_THROWS_AS((void)choose_index_bits(10, 1.0), ConfigError);
    CHECK_THROWS_AS((void)choose_index_bits(10, -0.5), ConfigError);
}
