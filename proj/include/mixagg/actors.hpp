// Protocol state machines for the collector, users, and providers.
//
// Actors are event driven: the harness delivers one envelope at a time and
// collects the messages the actor wants sent.  All randomness comes from
// the actor's own seeded generator, and every value the protocol later
// needs for replay (randomizer tags, index seeds, permutation seeds) is
// logged into the actor's note list as it is drawn.
#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>

#include "mixagg/metrics.hpp"
#include "mixagg/rng.hpp"
#include "mixagg/wire.hpp"

namespace mixagg {

struct KeyRegistry {
    EncPub collector_enc;
    Bytes collector_sig;
    std::vector<EncPub> user_enc;
    std::vector<Bytes> user_sig;
    std::vector<EncPub> provider_enc;
    std::vector<Bytes> provider_sig;

    const Bytes& sig_pk(const ActorId& a) const;
};

enum class AbortReason : uint16_t {
    None = 0,
    BadSignature = 1,
    UndecryptableItem = 2,
    SubmitCountLow = 3,
    SubmitCountHigh = 4,
    ChainCountMismatch = 5,
    DuplicateIndex = 6,      // replication checking
    MissingOwnEntry = 7,     // replacement checking
    DigestMismatch = 8,      // broadcast consistence checking
    UniqueRequestValue = 9,  // uniqueness checking
    DsmCountLow = 10,
    DsmCountHigh = 11,
    OrphanIndex = 12,
    AckInvalid = 13,         // data submission checking
    FalsifiedData = 14,
    MalformedMessage = 15,
    WrongParameters = 16,
    Stalled = 17,
    ChainMissing = 18,
    BundleMissing = 19,
    AckMissing = 20,
};

const char* abort_reason_name(AbortReason r);

// Harness-side hook for checking submitted readings; "none" accepts all.
using ValidationHook = std::function<bool(const Bytes& pn, uint16_t provider, uint64_t value)>;

struct OutMsg {
    ActorId to;
    Envelope env;
};

class Actor {
  public:
    virtual ~Actor() = default;

    ActorId id;
    OpCounts ops;
    std::vector<std::pair<std::string, Bytes>> notes;
    bool aborted = false;

    virtual std::vector<OutMsg> start() { return {}; }
    virtual std::vector<OutMsg> on_message(const Envelope& env, const ActorId& from) = 0;
    // Called when the bus drains while the session is incomplete, so a
    // waiting actor can raise the alarm about what never arrived.
    virtual std::vector<OutMsg> on_quiescence() { return {}; }
    virtual bool finished() const = 0;

  protected:
    void note(const std::string& label, const Bytes& value) { notes.emplace_back(label, value); }
};

struct AbortSignal {
    AbortReason reason = AbortReason::None;
    ActorId reporter;
    uint32_t detail = 0;
    Bytes evidence;
};

// ---- collector ----

class CollectorActor : public Actor {
  public:
    CollectorActor(const SessionParams& p, const KeyRegistry& reg, EncKeys enc, SigKeys sig,
                   std::vector<uint64_t> readings, uint64_t quantizer_width,
                   ValidationHook hook, Drbg stream);

    std::vector<OutMsg> start() override;
    std::vector<OutMsg> on_message(const Envelope& env, const ActorId& from) override;
    std::vector<OutMsg> on_quiescence() override;
    bool finished() const override { return done_; }

    struct Tuple {
        Bytes pn;
        uint64_t d0 = 0;
        std::vector<uint64_t> values;  // one per provider
    };
    const std::vector<Tuple>& tuples() const { return tuples_; }

  protected:
    // Attack hook: the honest collector hands every user its quantized
    // reading unchanged.
    virtual uint64_t request_value_for(uint16_t user, uint64_t honest) { return honest; }

    std::vector<OutMsg> abort_all(AbortReason r, uint32_t detail, const Bytes& evidence);

    SessionParams p_;
    const KeyRegistry& reg_;
    EncKeys enc_;
    SigKeys sig_;
    std::vector<uint64_t> readings_;
    uint64_t quantizer_width_;
    ValidationHook hook_;
    Drbg rng_;

    Bytes abm_body_;
    std::map<Bytes, uint64_t> abm_;  // pn -> requested value from the mix
    uint32_t bundles_done_ = 0;
    std::map<Bytes, Tuple> by_pn_;
    std::vector<Tuple> tuples_;
    bool done_ = false;
};

// ---- user ----

class UserActor : public Actor {
  public:
    UserActor(uint16_t index, const SessionParams& p, const KeyRegistry& reg, EncKeys enc,
              SigKeys sig, std::vector<uint64_t> readings, Drbg stream,
              std::optional<Drbg> pn_stream_override = std::nullopt);

    std::vector<OutMsg> on_message(const Envelope& env, const ActorId& from) override;
    std::vector<OutMsg> on_quiescence() override;
    bool finished() const override;

    const Bytes& pn() const { return pn_; }

  protected:
    // Attack hooks; each default is the honest behaviour.
    virtual void tweak_layer_keys(std::vector<EncPub>& keys) {}
    virtual const Bytes& submit_signing_key() { return sig_.sk; }
    virtual uint32_t submit_copies() { return 1; }
    virtual void tweak_output_items(std::vector<MixItem>& items, uint32_t out_layers) {}
    virtual Bytes final_body_for(const ActorId& dest, const Bytes& body) { return body; }
    virtual uint32_t dsm_copies(uint16_t provider) { return 1; }
    virtual uint64_t reading_for(uint16_t provider, uint64_t honest) { return honest; }
    // Ablation hooks: misbehaving configurations rather than adversaries.
    virtual void dsm_randomizers(Bytes& r, Bytes& outer_d, Bytes& outer_x) {}
    virtual Bytes tweak_submit_body(Bytes body) { return body; }

    std::vector<OutMsg> abort_all(AbortReason r, uint32_t detail, const Bytes& evidence);
    std::vector<OutMsg> build_submission();
    std::vector<OutMsg> process_batch(const std::vector<MixItem>& items);
    std::vector<OutMsg> handle_final(const Envelope& env, const ActorId& from);
    std::vector<OutMsg> maybe_submit_data();
    Envelope wrap_out(const Bytes& body, MsgKind kind);

    uint16_t index_;
    SessionParams p_;
    const KeyRegistry& reg_;
    EncKeys enc_;
    SigKeys sig_;
    std::vector<uint64_t> readings_;  // one per provider
    Drbg rng_;
    Drbg pn_rng_;

    bool is_first() const { return index_ + 1 == p_.n_users; }
    bool is_last() const { return index_ == 0; }

    Bytes d0_cell_;
    Bytes pn_;       // pn_bytes() wide
    Bytes pn_cell_;
    std::vector<Bytes> serial_d0_tags_, serial_pn_tags_;
    bool submitted_ = false;

    std::map<uint16_t, Envelope> pending_submissions_;  // first processor only
    bool processed_batch_ = false;

    Bytes abm_body_;
    std::vector<MixItem> abm_;
    bool final_seen_ = false;
    std::map<uint32_t, Bytes> digests_;  // sender -> digest
    bool data_submitted_ = false;

    std::vector<Dsm> sent_dsms_;  // one per provider, for the ack check
    std::set<uint16_t> acked_;
};

// ---- provider ----

class ProviderActor : public Actor {
  public:
    ProviderActor(uint16_t index, const SessionParams& p, const KeyRegistry& reg, EncKeys enc,
                  SigKeys sig, Drbg stream);

    std::vector<OutMsg> on_message(const Envelope& env, const ActorId& from) override;
    std::vector<OutMsg> on_quiescence() override;
    bool finished() const override;

  protected:
    virtual void tweak_bundle(std::vector<Dsm>& dsms) {}
    virtual Bytes ack_sig_for(uint16_t user, const Bytes& sig) { return sig; }
    virtual Bytes tweak_ack_ct(uint16_t user, Bytes ct) { return ct; }

    std::vector<OutMsg> abort_all(AbortReason r, uint32_t detail, const Bytes& evidence);

    uint16_t index_;
    SessionParams p_;
    const KeyRegistry& reg_;
    EncKeys enc_;
    SigKeys sig_;
    Drbg rng_;

    std::map<uint16_t, DataSubmitBody> submissions_;
    std::set<uint16_t> dup_senders_;
    std::map<uint16_t, Dsm> dsm_by_user_;
    bool bundled_ = false;
    uint32_t acks_relayed_ = 0;
};

// Broadcast helper shared by actors: every other actor in the session.
std::vector<ActorId> everyone_else(const SessionParams& p, const ActorId& self);

}  // namespace mixagg
