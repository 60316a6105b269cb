// Closed-form cost predictions, for sizing a deployment without running it
// and for checking the simulator against the algebra.
#pragma once

#include <cstdint>
#include <vector>

#include "mixagg/metrics.hpp"

namespace mixagg {

// The byte-level coordinates the formulas run on.
struct CommShape {
    uint64_t n = 0;     // users
    uint64_t t = 0;     // providers
    uint64_t cell = 0;  // unified plaintext cell length (X0)
    uint64_t hash = 32;
    uint64_t sig = 64;
    uint64_t hdr = 10;  // session id + kind
    // item[k-1]: length of a shuffle item that still carries k layers
    std::vector<uint64_t> item;

    uint64_t item_at(uint64_t k) const { return item.at(size_t(k - 1)); }
};

// Affine estimate of total bytes moved in one session, every protocol
// message counted once.  The closed form treats a handful of small
// messages as full-size frames, so it differs from the wire-exact total
// by a residual that depends only on the padding and receipt geometry.
uint64_t predict_comm_overhead(const CommShape& s);

// The same count corrected to byte-exact for this wire format.
uint64_t predict_comm_overhead_exact(const CommShape& s, uint64_t pad_overhead,
                                     uint64_t ack_ct_len);

// Per-user cipher/signature call counts for one clean session.
OpCounts predict_comp_overhead(uint64_t n, uint64_t t);

// Baseline built from t independent accountable-shuffle instances carrying
// value pairs.  The item vector must describe the baseline's frames.
uint64_t predict_dissent_comm(const CommShape& s);
OpCounts predict_dissent_user_ops(uint64_t n, uint64_t t);

uint32_t predict_rounds_total(uint32_t n);
uint32_t predict_rounds_user(uint32_t n);
uint32_t predict_dissent_rounds(uint32_t n);

}  // namespace mixagg
