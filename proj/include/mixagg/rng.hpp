// Deterministic randomness for the whole harness.
//
// Every random byte in a session is drawn from a SHA-256 counter generator
// seeded from a master seed, so any run can be replayed bit for bit from
// its seed.  Actors derive private streams by label; each draw site uses
// its own labelled stream and the drawn values are logged into transcripts
// where the protocol requires it.
#pragma once

#include <cstdint>
#include <string>

#include "mixagg/bytes.hpp"

namespace mixagg {

class Drbg {
  public:
    Drbg() = default;
    explicit Drbg(const Bytes& seed);
    explicit Drbg(const std::string& seed_utf8);

    // Child generator seeded from H(state-seed || label); independent of
    // the parent's counter position.
    Drbg derive(const std::string& label) const;

    void fill(uint8_t* out, size_t n);
    Bytes bytes(size_t n);
    uint64_t next_u64();

    // Uniform in [0, bound) by rejection sampling, so results do not
    // depend on any platform's distribution implementation.
    uint64_t below(uint64_t bound);

    const Bytes& seed() const { return seed_; }

  private:
    Bytes seed_;       // 32 bytes
    uint64_t ctr_ = 0; // block counter
    Bytes block_;      // unconsumed tail of the current block
    size_t block_off_ = 0;
};

// Fisher-Yates permutation of 0..n-1 driven by the given generator.
std::vector<uint32_t> random_permutation(Drbg& g, uint32_t n);

}  // namespace mixagg
