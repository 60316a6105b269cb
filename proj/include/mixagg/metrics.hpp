#pragma once

#include <cstdint>
#include <map>

#include "mixagg/wire.hpp"

namespace mixagg {

// Operation counters, incremented by actor code at protocol level (library
// internals like mask generation are not counted).  enc_r/dec_r are the
// randomness-expanded operations; enc/dec the length-preserving ones used
// by the baseline's inner layers.
struct OpCounts {
    uint64_t enc_r = 0;
    uint64_t enc = 0;
    uint64_t dec_r = 0;
    uint64_t dec = 0;
    uint64_t sign = 0;
    uint64_t verify = 0;
    uint64_t hash = 0;
    uint64_t shuffle = 0;

    OpCounts& operator+=(const OpCounts& o) {
        enc_r += o.enc_r;
        enc += o.enc;
        dec_r += o.dec_r;
        dec += o.dec;
        sign += o.sign;
        verify += o.verify;
        hash += o.hash;
        shuffle += o.shuffle;
        return *this;
    }
    bool operator==(const OpCounts&) const = default;
};

struct ActorStats {
    uint64_t sent_msgs = 0;
    uint64_t sent_bytes = 0;
    uint64_t recv_msgs = 0;
    uint64_t recv_bytes = 0;
    OpCounts ops;
};

struct KindStats {
    uint64_t msgs = 0;
    uint64_t bytes = 0;  // wire bytes including envelope overhead
};

struct Metrics {
    std::map<uint32_t, ActorStats> actors;      // keyed by ActorId::pack()
    std::map<uint16_t, KindStats> per_kind;     // keyed by MsgKind value
    uint64_t system_bytes = 0;                  // every message counted once
    uint64_t system_msgs = 0;
    uint32_t total_rounds = 0;                  // deepest causal level
    uint32_t user_rounds = 0;                   // levels touching a user
    uint64_t elapsed_ns = 0;                    // latest delivery time
    uint32_t restarts = 0;

    uint64_t kind_bytes(MsgKind k) const {
        auto it = per_kind.find(uint16_t(k));
        return it == per_kind.end() ? 0 : it->second.bytes;
    }
    uint64_t kind_msgs(MsgKind k) const {
        auto it = per_kind.find(uint16_t(k));
        return it == per_kind.end() ? 0 : it->second.msgs;
    }
    // Mix phase traffic: submissions, forwarding chain, final broadcast.
    uint64_t shuffle_bytes() const {
        return kind_bytes(MsgKind::ShuffleSubmit) + kind_bytes(MsgKind::ShuffleForward) +
               kind_bytes(MsgKind::ShuffleFinal);
    }
};

}  // namespace mixagg
