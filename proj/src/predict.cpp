#include "mixagg/predict.hpp"

#include "mixagg/errors.hpp"

namespace mixagg {

uint64_t predict_comm_overhead(const CommShape& s) {
    if (s.item.size() < s.n) throw ConfigError("item length table shorter than n");
    uint64_t sum_items = 0;
    for (uint64_t k = 1; k <= s.n; k++) sum_items += s.item_at(k);
    uint64_t env = s.hdr + s.sig;  // Z + Y
    uint64_t per_user = sum_items + (2 * s.t + 1) * s.item_at(1) + s.t * s.item_at(2) +
                        s.item_at(s.n) + (2 * s.t + 3) * env;
    return s.n * s.n * (2 * s.cell + s.hash + env) + s.n * per_user;
}

uint64_t predict_comm_overhead_exact(const CommShape& s, uint64_t pad_overhead,
                                     uint64_t ack_ct_len) {
    uint64_t env = s.hdr + s.sig;
    uint64_t f = predict_comm_overhead(s);
    // small messages the affine form rounds up to full frames
    f -= s.n * s.item_at(s.n);                      // self-delivered first batch entry
    f -= (s.n + 3 * s.n * s.t) * pad_overhead;      // request and submit frames are thinner
    f += (s.n - 1 + s.t + s.n * s.t) * env;         // envelopes the form leaves out
    f += s.n * s.t * ack_ct_len;                    // relayed receipts
    return f;
}

OpCounts predict_comp_overhead(uint64_t n, uint64_t t) {
    OpCounts c;
    c.enc_r = 2 * n + 3 * t;
    c.dec_r = 2 * n + t + 1;
    c.sign = t + 3;
    c.verify = n + 2 * t + 3;
    c.hash = 2;
    c.shuffle = 1;
    return c;
}

uint64_t predict_dissent_comm(const CommShape& s) {
    if (s.item.size() < s.n) throw ConfigError("item length table shorter than n");
    uint64_t sum_items = 0;
    for (uint64_t k = 1; k <= s.n; k++) sum_items += s.item_at(k);
    uint64_t env2 = 2 * s.sig + 2 * s.hdr;
    return s.t * s.n * s.n * (2 * s.cell + s.hash + env2) +
           s.t * s.n * (sum_items + env2 - s.hash) - 2 * s.sig - 2 * s.hdr;
}

OpCounts predict_dissent_user_ops(uint64_t n, uint64_t t) {
    OpCounts c;
    c.enc_r = n * t;
    c.enc = n * t;
    c.dec_r = n * t;
    c.sign = 5 * t;
    c.verify = t * (n + 3);
    c.hash = 2 * t;
    c.shuffle = t;
    return c;
}

uint32_t predict_rounds_total(uint32_t n) { return n + 7; }
uint32_t predict_rounds_user(uint32_t n) { return n + 5; }
uint32_t predict_dissent_rounds(uint32_t n) { return n + 4; }

}  // namespace mixagg
