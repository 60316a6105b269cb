// Message formats.
//
// Every protocol message travels as an envelope: body || sid || kind || sig,
// with the Ed25519 signature computed over body || sid || kind.  The sender
// is transport metadata (the bus knows who handed it the message), so it is
// not repeated inside the bytes.  Bodies are fixed-width given the session
// parameters; decoders take the expected shape from context and return
// nullopt on any length mismatch rather than trusting embedded counts.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mixagg/bytes.hpp"
#include "mixagg/crypto.hpp"

namespace mixagg {

inline constexpr size_t SID_LEN = 8;
inline constexpr size_t KIND_LEN = 2;
inline constexpr size_t HDR_LEN = SID_LEN + KIND_LEN;           // Z
inline constexpr size_t ENVELOPE_OVERHEAD = HDR_LEN + SIG_LEN;  // Z + Y

// ---- actors ----

enum class ActorKind : uint8_t { Collector = 0, User = 1, Provider = 2 };

struct ActorId {
    ActorKind kind = ActorKind::Collector;
    uint16_t index = 0;

    uint32_t pack() const { return uint32_t(kind) << 16 | index; }
    static ActorId unpack(uint32_t v) {
        return ActorId{ActorKind(v >> 16), uint16_t(v & 0xffff)};
    }
    bool operator==(const ActorId&) const = default;
    auto operator<=>(const ActorId&) const = default;
};

std::string to_string(const ActorId& a);

inline ActorId collector_id() { return {ActorKind::Collector, 0}; }
inline ActorId user_id(uint16_t i) { return {ActorKind::User, i}; }
inline ActorId provider_id(uint16_t i) { return {ActorKind::Provider, i}; }

// ---- session parameters ----

struct SessionParams {
    uint64_t sid = 0;
    uint32_t n_users = 0;      // n
    uint32_t m_providers = 0;  // m
    uint32_t data_bytes = 8;   // payload width inside a value cell
    uint32_t key_bits = 512;
    uint32_t pn_bits = 16;     // anonymous index width
    uint32_t cell_len = 0;     // unified plaintext length, X0

    size_t block_bytes() const { return key_bits / 8; }

    // Ciphertext length of a cell after `layers` onion layers.
    size_t layer_ct_len(uint32_t layers) const {
        return cell_len + size_t(layers) * PAD_OVERHEAD;
    }
    // Two-component shuffle item after `layers` layers (X'_k for k >= 1;
    // k = 0 gives the plaintext pair).
    size_t item_len(uint32_t layers) const { return 2 * layer_ct_len(layers); }

    size_t dsm_len() const { return cell_len + layer_ct_len(1); }
    size_t ack_ct_len() const {
        return std::max(SIG_LEN + PAD_OVERHEAD, block_bytes());
    }
    size_t pn_bytes() const { return (pn_bits + 7) / 8; }

    // Unified cell length: wide enough for the data payload, the index
    // cell, the parameter cell, and for single-layer ciphertexts to stay
    // length-affine (cell_len + PAD_OVERHEAD >= one cipher block).
    static uint32_t derive_cell_len(uint32_t data_bytes, uint32_t pn_bits,
                                    uint32_t key_bits);
};

// ---- message kinds ----

enum class MsgKind : uint16_t {
    DataRequest = 1,     // collector -> user
    ShuffleSubmit = 2,   // user -> first processor
    ShuffleForward = 3,  // processor -> next processor
    ShuffleFinal = 4,    // last processor -> everyone
    DigestShare = 5,     // broadcast consistence digests
    DataSubmit = 6,      // user -> provider
    ProviderBundle = 7,  // provider -> collector
    SubmitAck = 8,       // collector -> provider
    AckRelay = 9,        // provider -> user
    AbortReport = 10,
    Warn = 11,

    // baseline scheme
    BKeyShare = 20,
    BSubmit = 21,
    BForward = 22,
    BFinal = 23,
    BGoNoGo = 24,
    BKeyReveal = 25,
};

const char* kind_name(MsgKind k);

// ---- envelope ----

struct Envelope {
    Bytes body;
    uint64_t sid = 0;
    MsgKind kind = MsgKind::AbortReport;
    Bytes sig;
};

enum class Validity { Ok, BadSignature, WrongSession };

// body || sid || kind: the bytes an envelope signature covers.
Bytes sign_span(const Bytes& body, uint64_t sid, MsgKind kind);

Envelope wrap(const Bytes& sk, const Bytes& body, uint64_t sid, MsgKind kind);
Validity validate(const Envelope& env, const Bytes& pk, uint64_t expected_sid);

Bytes encode_envelope(const Envelope& env);
std::optional<Envelope> decode_envelope(const Bytes& wire);

// ---- cells ----

// Value cells carry an integer reading left-aligned big-endian in
// data_bytes, zero padded to cell_len.
Bytes encode_value_cell(uint64_t v, const SessionParams& p);
std::optional<uint64_t> decode_value_cell(const Bytes& cell, const SessionParams& p);

// Index cells carry the anonymous index bits, zero padded.
Bytes encode_index_cell(const Bytes& pn_bits_bytes, const SessionParams& p);
Bytes index_from_cell(const Bytes& cell, const SessionParams& p);

// The parameter cell rides in the data request so every user can confirm
// it is running with the coordinates the collector committed to.
Bytes encode_params_cell(const SessionParams& p);
bool check_params_cell(const Bytes& cell, const SessionParams& p);

// ---- bodies ----

struct MixItem {
    Bytes d0;  // data component
    Bytes pn;  // index component
    bool operator==(const MixItem&) const = default;
};

struct DataRequestBody {
    Bytes ct;          // encrypted value cell, layer_ct_len(1)
    Bytes params_cell; // plaintext, cell_len
};

struct Dsm {
    Bytes data_cell;  // plaintext value cell
    Bytes index_ct;   // index cell under the collector key, layer_ct_len(1)
    bool operator==(const Dsm&) const = default;
};

struct DataSubmitBody {
    Bytes data_ct;   // layer_ct_len(1)
    Bytes index_ct;  // layer_ct_len(2)
};

struct AbortBody {
    uint16_t reason = 0;
    uint32_t detail = 0;
    Bytes evidence;
};

struct WarnBody {
    uint16_t provider = 0;
    Dsm dsm;
    Bytes ack_sig;  // SIG_LEN
};

Bytes encode_data_request(const SessionParams& p, const Bytes& ct);
std::optional<DataRequestBody> decode_data_request(const SessionParams& p, const Bytes& b);

Bytes encode_mix_item(const MixItem& it);
Bytes encode_mix_batch(const std::vector<MixItem>& items);
// layers: how many onion layers remain on each component.
std::optional<MixItem> decode_mix_item(const SessionParams& p, uint32_t layers, const Bytes& b);
std::optional<std::vector<MixItem>> decode_mix_batch(const SessionParams& p, uint32_t layers,
                                                     const Bytes& b);

Bytes encode_digest_share(const Bytes& digest);
std::optional<Bytes> decode_digest_share(const Bytes& b);

Bytes encode_data_submit(const DataSubmitBody& d);
std::optional<DataSubmitBody> decode_data_submit(const SessionParams& p, const Bytes& b);

Bytes encode_dsm(const Dsm& d);
Bytes encode_provider_bundle(const std::vector<Dsm>& dsms);
std::optional<Dsm> decode_dsm(const SessionParams& p, const Bytes& b);
std::optional<std::vector<Dsm>> decode_provider_bundle(const SessionParams& p, const Bytes& b);

Bytes encode_ack_relay(const Bytes& ack_ct);
std::optional<Bytes> decode_ack_relay(const SessionParams& p, const Bytes& b);

Bytes encode_abort(const AbortBody& a);
std::optional<AbortBody> decode_abort(const Bytes& b);

Bytes encode_warn(const WarnBody& w);
std::optional<WarnBody> decode_warn(const SessionParams& p, const Bytes& b);

// ---- baseline bodies ----

Bytes encode_enc_pub(const EncPub& k);
std::optional<EncPub> decode_enc_pub(const Bytes& b);

Bytes encode_blob(const Bytes& blob);                 // u32 length prefix
std::optional<Bytes> decode_blob(const Bytes& b);

Bytes encode_cell_batch(const std::vector<Bytes>& items);  // uniform item length
std::optional<std::vector<Bytes>> decode_cell_batch(size_t item_len, const Bytes& b);

}  // namespace mixagg
