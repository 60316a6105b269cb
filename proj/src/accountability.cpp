#include "mixagg/accountability.hpp"

#include <algorithm>
#include <set>

#include "mixagg/errors.hpp"

namespace mixagg {

// ---- transcript serialization ----

namespace {
constexpr char TR_MAGIC[4] = {'M', 'X', 'T', 'R'};
constexpr uint16_t TR_VERSION = 1;
}  // namespace

const Bytes* Transcript::find_note(const std::string& label) const {
    for (const auto& [l, v] : notes)
        if (l == label) return &v;
    return nullptr;
}

Bytes serialize_transcript(const Transcript& t) {
    Bytes out;
    out.insert(out.end(), TR_MAGIC, TR_MAGIC + 4);
    put_u16(out, TR_VERSION);
    out.push_back(uint8_t(t.owner.kind));
    put_u16(out, t.owner.index);
    put_u64(out, t.sid);
    put_u32(out, uint32_t(t.records.size()));
    for (const auto& r : t.records) {
        out.push_back(r.sent ? 1 : 0);
        put_u64(out, r.time_ns);
        put_u32(out, r.level);
        out.push_back(uint8_t(r.peer.kind));
        put_u16(out, r.peer.index);
        put_u16(out, uint16_t(r.kind));
        put_u32(out, uint32_t(r.wire.size()));
        append(out, r.wire);
    }
    put_u32(out, uint32_t(t.notes.size()));
    for (const auto& [label, value] : t.notes) {
        put_u16(out, uint16_t(label.size()));
        out.insert(out.end(), label.begin(), label.end());
        put_u32(out, uint32_t(value.size()));
        append(out, value);
    }
    return out;
}

std::optional<Transcript> parse_transcript(const Bytes& b) {
    ByteReader r(b);
    Bytes magic;
    if (!r.read_bytes(magic, 4) || !std::equal(magic.begin(), magic.end(), TR_MAGIC))
        return std::nullopt;
    uint16_t ver;
    if (!r.read_u16(ver) || ver != TR_VERSION) return std::nullopt;
    Transcript t;
    uint8_t kind8;
    if (!r.read_u8(kind8) || kind8 > 2) return std::nullopt;
    t.owner.kind = ActorKind(kind8);
    if (!r.read_u16(t.owner.index)) return std::nullopt;
    if (!r.read_u64(t.sid)) return std::nullopt;
    uint32_t nrec;
    if (!r.read_u32(nrec)) return std::nullopt;
    for (uint32_t i = 0; i < nrec; i++) {
        TranscriptRecord rec;
        uint8_t dir;
        if (!r.read_u8(dir) || dir > 1) return std::nullopt;
        rec.sent = dir == 1;
        if (!r.read_u64(rec.time_ns)) return std::nullopt;
        if (!r.read_u32(rec.level)) return std::nullopt;
        if (!r.read_u8(kind8) || kind8 > 2) return std::nullopt;
        rec.peer.kind = ActorKind(kind8);
        if (!r.read_u16(rec.peer.index)) return std::nullopt;
        uint16_t mk;
        if (!r.read_u16(mk)) return std::nullopt;
        rec.kind = MsgKind(mk);
        uint32_t len;
        if (!r.read_u32(len) || !r.read_bytes(rec.wire, len)) return std::nullopt;
        t.records.push_back(std::move(rec));
    }
    uint32_t nnotes;
    if (!r.read_u32(nnotes)) return std::nullopt;
    for (uint32_t i = 0; i < nnotes; i++) {
        uint16_t llen;
        Bytes lab, val;
        if (!r.read_u16(llen) || !r.read_bytes(lab, llen)) return std::nullopt;
        uint32_t vlen;
        if (!r.read_u32(vlen) || !r.read_bytes(val, vlen)) return std::nullopt;
        t.notes.emplace_back(std::string(lab.begin(), lab.end()), std::move(val));
    }
    if (r.off != b.size()) return std::nullopt;
    return t;
}

// ---- lookup helpers ----

namespace {

const Transcript* find_tr(const SessionEvidence& ev, const ActorId& a) {
    auto it = ev.transcripts.find(a.pack());
    return it == ev.transcripts.end() ? nullptr : &it->second;
}

std::vector<const TranscriptRecord*> records_of(const Transcript& t, MsgKind kind, bool sent) {
    std::vector<const TranscriptRecord*> out;
    for (const auto& r : t.records)
        if (r.kind == kind && r.sent == sent) out.push_back(&r);
    return out;
}

std::vector<uint16_t> parse_u16_list(const Bytes& b) {
    std::vector<uint16_t> out;
    for (size_t i = 0; i + 2 <= b.size(); i += 2)
        out.push_back(uint16_t(b[i]) << 8 | b[i + 1]);
    return out;
}

bool env_ok(const SessionEvidence& ev, const Envelope& env, const ActorId& claimed_sender) {
    return validate(env, ev.keys.sig_pk(claimed_sender), ev.params.sid) == Validity::Ok;
}

std::string label_idx(const char* base, uint32_t i) {
    return std::string(base) + std::to_string(i);
}

// Expected wire bytes of user j's data submission to one provider,
// recomputed purely from the user's logged tags and cells.
struct ProvenDsm {
    Dsm dsm;           // plaintext value cell + index cell under the collector key
    Bytes submit_body; // the exact DataSubmit body those tags produce
};

std::optional<ProvenDsm> recompute_user_dsm(const SessionEvidence& ev, uint16_t j,
                                            uint16_t provider, std::string* why) {
    const Transcript* t = find_tr(ev, user_id(j));
    if (!t) { if (why) *why = "no transcript"; return std::nullopt; }
    const Bytes* pn = t->find_note("pn");
    const Bytes* r = t->find_note("dsm.r");
    const Bytes* od = t->find_note("dsm.outer.d");
    const Bytes* ox = t->find_note("dsm.outer.x");
    const Bytes* dcell = t->find_note(label_idx("dsm.data.", provider));
    if (!pn || !r || !od || !ox || !dcell) { if (why) *why = "missing notes"; return std::nullopt; }
    ProvenDsm out;
    Bytes pn_cell = encode_index_cell(*pn, ev.params);
    out.dsm.data_cell = *dcell;
    out.dsm.index_ct = pad_encrypt(ev.keys.collector_enc, *r, pn_cell, "dsm.index");
    DataSubmitBody body;
    body.data_ct = pad_encrypt(ev.keys.provider_enc[provider], *od, *dcell, "dsm.data");
    body.index_ct = pad_encrypt(ev.keys.provider_enc[provider], *ox, out.dsm.index_ct, "dsm.wrap");
    out.submit_body = encode_data_submit(body);
    return out;
}

// Checks that user j's recorded submission to `provider` is exactly what its
// logged tags produce.  Returns false when the user's own record disagrees
// with its notes (a lying user) or the data is missing.
bool user_dsm_consistent(const SessionEvidence& ev, uint16_t j, uint16_t provider,
                         ProvenDsm& proven, std::string* why) {
    auto p = recompute_user_dsm(ev, j, provider, why);
    if (!p) return false;
    const Transcript* t = find_tr(ev, user_id(j));
    for (const auto* rec : records_of(*t, MsgKind::DataSubmit, true)) {
        if (rec->peer != provider_id(provider)) continue;
        auto env = decode_envelope(rec->wire);
        if (env && env->body == p->submit_body && env_ok(ev, *env, user_id(j))) {
            proven = *p;
            return true;
        }
    }
    if (why) *why = "submission does not match logged tags";
    return false;
}

// The bundle a provider actually sent, preferring its own signed record and
// falling back to the collector's received copy.
std::optional<std::vector<Dsm>> provider_bundle(const SessionEvidence& ev, uint16_t i) {
    const Transcript* t = find_tr(ev, provider_id(i));
    std::optional<Envelope> env;
    if (t) {
        auto recs = records_of(*t, MsgKind::ProviderBundle, true);
        if (!recs.empty()) env = decode_envelope(recs.front()->wire);
    }
    if (!env) {
        const Transcript* c = find_tr(ev, collector_id());
        if (c)
            for (const auto* rec : records_of(*c, MsgKind::ProviderBundle, false))
                if (rec->peer == provider_id(i)) env = decode_envelope(rec->wire);
    }
    if (!env || !env_ok(ev, *env, provider_id(i))) return std::nullopt;
    return decode_provider_bundle(ev.params, env->body);
}

void add_culprit(std::vector<ActorId>& v, const ActorId& a) {
    if (std::find(v.begin(), v.end(), a) == v.end()) v.push_back(a);
}

}  // namespace

// ---- shuffle replay ----

namespace {

// One side of the component matching: re-encrypt each output component
// under the stripped layer's key with every user's logged tag for that
// layer and consume matching inputs.  Capacity-aware so that two honest
// ciphertexts of the same plaintext (an index collision) pair off cleanly.
struct MatchCounts {
    uint32_t inserted = 0, deleted = 0, replicated = 0;
};

MatchCounts match_components(const SessionEvidence& ev, uint32_t proc_index,
                             const std::vector<Bytes>& inputs, const std::vector<Bytes>& outputs,
                             const char* serial_base, const std::string& domain) {
    std::map<Bytes, int> capacity;
    for (const auto& in : inputs) capacity[in]++;
    std::map<Bytes, int> consumed;

    std::string tag_label = label_idx(serial_base, proc_index + 1);  // layer is 1-based
    std::vector<const Bytes*> tags(ev.params.n_users, nullptr);
    for (uint16_t x = 0; x < ev.params.n_users; x++)
        if (const Transcript* t = find_tr(ev, user_id(x))) tags[x] = t->find_note(tag_label);

    MatchCounts mc;
    for (const auto& out : outputs) {
        std::vector<Bytes> candidates;
        for (uint16_t x = 0; x < ev.params.n_users; x++) {
            if (!tags[x]) continue;
            Bytes cand = pad_encrypt(ev.keys.user_enc[proc_index], *tags[x], out, domain);
            if (capacity.count(cand)) candidates.push_back(std::move(cand));
        }
        if (candidates.empty()) {
            mc.inserted++;
            continue;
        }
        // prefer an input with remaining capacity so honest duplicates of the
        // same plaintext do not read as replication
        const Bytes* pick = &candidates.front();
        for (const auto& c : candidates)
            if (consumed[c] < capacity[c]) { pick = &c; break; }
        consumed[*pick]++;
    }
    for (const auto& [ct, cap] : capacity) {
        int used = consumed.count(ct) ? consumed[ct] : 0;
        if (used < cap) mc.deleted += uint32_t(cap - used);
        if (used > cap) mc.replicated += uint32_t(used - cap);
    }
    return mc;
}

std::vector<Bytes> comp_of(const std::vector<MixItem>& items, bool pn) {
    std::vector<Bytes> out;
    out.reserve(items.size());
    for (const auto& it : items) out.push_back(pn ? it.pn : it.d0);
    return out;
}

}  // namespace

ShuffleReplay replay_shuffle(const SessionEvidence& ev) {
    ShuffleReplay rep;
    const uint32_t n = ev.params.n_users;

    // ingress: the first processor's received submissions, signature checked
    const Transcript* first = find_tr(ev, user_id(uint16_t(n - 1)));
    if (!first) {
        rep.log.push_back("first processor transcript missing");
        add_culprit(rep.culprits, user_id(uint16_t(n - 1)));
        return rep;
    }
    std::vector<MixItem> ingress;
    for (const auto* rec : records_of(*first, MsgKind::ShuffleSubmit, false)) {
        auto env = decode_envelope(rec->wire);
        if (!env) continue;
        if (!env_ok(ev, *env, rec->peer)) {
            rep.log.push_back("ingress record from " + to_string(rec->peer) +
                              " carries a bad signature");
            add_culprit(rep.culprits, first->owner);
            return rep;
        }
        // the submitter's own signed copy must agree
        if (const Transcript* st = find_tr(ev, rec->peer)) {
            bool agreed = false;
            for (const auto* s : records_of(*st, MsgKind::ShuffleSubmit, true)) {
                auto senv = decode_envelope(s->wire);
                if (senv && senv->body == env->body) agreed = true;
            }
            if (!agreed) {
                rep.log.push_back(to_string(rec->peer) + " signed a submission its own record denies");
                add_culprit(rep.culprits, rec->peer);
            }
        }
        auto item = decode_mix_item(ev.params, n, env->body);
        if (item) ingress.push_back(std::move(*item));
    }

    std::vector<MixItem> chain_input = std::move(ingress);
    // components forged upstream stay unexplainable at every later stage, so
    // they must not implicate the processors that merely passed them along
    uint32_t carried_d0 = 0, carried_pn = 0;
    for (int p = int(n) - 1; p >= 0; p--) {
        ActorId proc = user_id(uint16_t(p));
        const Transcript* t = find_tr(ev, proc);
        if (!t) {
            rep.log.push_back("transcript missing for " + to_string(proc));
            add_culprit(rep.culprits, proc);
            return rep;
        }

        // the processor's input, cross-checked against the predecessor's output
        if (uint32_t(p) != n - 1) {
            auto recs = records_of(*t, MsgKind::ShuffleForward, false);
            if (recs.empty()) {
                rep.log.push_back(to_string(proc) + " never received a batch");
                return rep;
            }
            auto env = decode_envelope(recs.front()->wire);
            ActorId pred = user_id(uint16_t(p + 1));
            if (!env || !env_ok(ev, *env, pred)) {
                rep.log.push_back(to_string(proc) + " holds an unsigned batch record");
                add_culprit(rep.culprits, proc);
                return rep;
            }
            Bytes expect = encode_mix_batch(chain_input);
            if (env->body != expect) {
                // both copies carry the predecessor's valid signature, so the
                // predecessor produced two different batches
                rep.log.push_back(to_string(pred) + " equivocated between successors");
                add_culprit(rep.culprits, pred);
                return rep;
            }
            auto items = decode_mix_batch(ev.params, uint32_t(p) + 1, env->body);
            if (!items) {
                rep.log.push_back("batch into " + to_string(proc) + " is malformed");
                add_culprit(rep.culprits, pred);
                return rep;
            }
            chain_input = std::move(*items);
        }

        // the processor's output
        MsgKind out_kind = p == 0 ? MsgKind::ShuffleFinal : MsgKind::ShuffleForward;
        auto outs = records_of(*t, out_kind, true);
        if (outs.empty()) {
            rep.log.push_back(to_string(proc) + " produced no output (chain stopped here)");
            return rep;
        }
        auto oenv = decode_envelope(outs.front()->wire);
        if (!oenv || !env_ok(ev, *oenv, proc)) {
            rep.log.push_back(to_string(proc) + " recorded an output it never signed");
            add_culprit(rep.culprits, proc);
            return rep;
        }
        auto outputs = decode_mix_batch(ev.params, uint32_t(p), oenv->body);
        if (!outputs) {
            rep.log.push_back("output of " + to_string(proc) + " is malformed");
            add_culprit(rep.culprits, proc);
            return rep;
        }

        ProcessorFinding f;
        f.processor = proc;
        MatchCounts d0 = match_components(ev, uint32_t(p), comp_of(chain_input, false),
                                          comp_of(*outputs, false), "serial.d0.", "im.d0");
        MatchCounts pn = match_components(ev, uint32_t(p), comp_of(chain_input, true),
                                          comp_of(*outputs, true), "serial.pn.", "im.pn");
        uint32_t ins_d0 = d0.inserted > carried_d0 ? d0.inserted - carried_d0 : 0;
        uint32_t del_d0 = d0.deleted > carried_d0 ? d0.deleted - carried_d0 : 0;
        uint32_t ins_pn = pn.inserted > carried_pn ? pn.inserted - carried_pn : 0;
        uint32_t del_pn = pn.deleted > carried_pn ? pn.deleted - carried_pn : 0;
        carried_d0 += ins_d0;
        carried_pn += ins_pn;
        f.inserted = ins_d0 + ins_pn;
        f.deleted = del_d0 + del_pn;
        f.replicated = d0.replicated + pn.replicated;
        if (!f.clean()) {
            rep.log.push_back(to_string(proc) + ": " + std::to_string(f.inserted) + " inserted, " +
                              std::to_string(f.deleted) + " deleted, " +
                              std::to_string(f.replicated) + " replicated");
            add_culprit(rep.culprits, proc);
        }
        rep.findings.push_back(f);
        if (p == 0)
            rep.final_items = std::move(*outputs);
        else
            chain_input = std::move(*outputs);
    }

    rep.complete = true;
    rep.consistent = rep.culprits.empty();
    return rep;
}

// ---- investigation ----

namespace {

// Recomputes user x's shuffle submission from its notes and compares it to
// the submission it actually signed.  Detects wrong layer keys or any other
// deviation from the committed construction.
enum class EimCheck { Consistent, Mismatch, Missing };

EimCheck check_user_eim(const SessionEvidence& ev, uint16_t x, std::string* why) {
    const Transcript* t = find_tr(ev, user_id(x));
    if (!t) { if (why) *why = "no transcript"; return EimCheck::Missing; }
    const Bytes* d0 = t->find_note("im.d0");
    const Bytes* pn = t->find_note("pn");
    if (!d0 || !pn) { if (why) *why = "missing notes"; return EimCheck::Missing; }
    std::vector<Bytes> td, tp;
    for (uint32_t k = 1; k <= ev.params.n_users; k++) {
        const Bytes* a = t->find_note(label_idx("serial.d0.", k));
        const Bytes* b = t->find_note(label_idx("serial.pn.", k));
        if (!a || !b) { if (why) *why = "missing serial tags"; return EimCheck::Missing; }
        td.push_back(*a);
        tp.push_back(*b);
    }
    MixItem expect;
    expect.d0 = layer_encrypt(ev.keys.user_enc, td, *d0, "im.d0");
    expect.pn = layer_encrypt(ev.keys.user_enc, tp, encode_index_cell(*pn, ev.params), "im.pn");
    Bytes body = encode_mix_item(expect);
    for (const auto* rec : records_of(*t, MsgKind::ShuffleSubmit, true)) {
        auto env = decode_envelope(rec->wire);
        if (env && env->body == body) return EimCheck::Consistent;
    }
    if (why) *why = "submission differs from the committed construction";
    return EimCheck::Mismatch;
}

int verdict_attack_id(const ShuffleReplay& rep) {
    uint32_t ins = 0, del = 0, repl = 0;
    for (const auto& f : rep.findings) {
        ins += f.inserted;
        del += f.deleted;
        repl += f.replicated;
    }
    if (repl > 0) return 7;
    if (ins > 0 && del > 0) return 8;
    if (ins > 0 || del > 0) return 3;
    return 0;
}

void merge_replay(InvestigationReport& out, const ShuffleReplay& rep) {
    for (const auto& c : rep.culprits) add_culprit(out.culprits, c);
    out.notes.insert(out.notes.end(), rep.log.begin(), rep.log.end());
}

}  // namespace

InvestigationReport investigate(const SessionEvidence& ev, const AbortSignal& signal) {
    InvestigationReport out;
    const uint32_t n = ev.params.n_users;
    const uint32_t m = ev.params.m_providers;

    // a withheld transcript is itself the offence
    {
        std::vector<ActorId> expected;
        expected.push_back(collector_id());
        for (uint16_t j = 0; j < n; j++) expected.push_back(user_id(j));
        for (uint16_t i = 0; i < m; i++) expected.push_back(provider_id(i));
        bool missing = false;
        for (const auto& a : expected) {
            const Transcript* t = find_tr(ev, a);
            if (!t || t->sid != ev.params.sid) {
                add_culprit(out.culprits, a);
                out.notes.push_back(to_string(a) + " withheld its transcript");
                missing = true;
            }
        }
        if (missing) return out;
    }

    ActorId reporter = signal.reporter;
    ActorId detail = ActorId::unpack(signal.detail);

    switch (signal.reason) {
        case AbortReason::BadSignature: {
            // does the accused actor's own record show a message it never
            // properly signed?
            const Transcript* t = find_tr(ev, detail);
            for (const auto& rec : t->records) {
                if (!rec.sent) continue;
                auto env = decode_envelope(rec.wire);
                if (env && env->sid == ev.params.sid && !env_ok(ev, *env, detail)) {
                    out.attack_id = 1;
                    add_culprit(out.culprits, detail);
                    out.notes.push_back(to_string(detail) + " sent a message with a signature " +
                                        "its registered key rejects");
                    return out;
                }
            }
            // cross-check the reporter's copy
            const Transcript* rt = find_tr(ev, reporter);
            for (const auto& rec : rt->records) {
                if (rec.sent || rec.peer != detail) continue;
                auto env = decode_envelope(rec.wire);
                if (env && env->sid == ev.params.sid && !env_ok(ev, *env, detail)) {
                    // unverifiable origin: the reporter cannot pin this on the
                    // accused, so the unprovable accusation falls back on it
                    add_culprit(out.culprits, reporter);
                    out.notes.push_back("reported message cannot be tied to " + to_string(detail));
                    return out;
                }
            }
            add_culprit(out.culprits, reporter);
            out.notes.push_back("no bad signature found; accusation unsupported");
            return out;
        }

        case AbortReason::UndecryptableItem: {
            if (reporter.kind == ActorKind::User && detail == collector_id()) {
                // the data request did not decrypt: recompute the collector's
                // request for this user from its own notes
                const Transcript* ct = find_tr(ev, collector_id());
                const Bytes* tag = ct->find_note(label_idx("req.tag.", reporter.index));
                const Bytes* val = ct->find_note(label_idx("req.val.", reporter.index));
                bool collector_clean = false;
                if (tag && val) {
                    Bytes ctct = pad_encrypt(ev.keys.user_enc[reporter.index], *tag, *val, "request");
                    Bytes body = encode_data_request(ev.params, ctct);
                    for (const auto* rec : records_of(*ct, MsgKind::DataRequest, true))
                        if (rec->peer == reporter) {
                            auto env = decode_envelope(rec->wire);
                            if (env && env->body == body) collector_clean = true;
                        }
                }
                if (!collector_clean) {
                    add_culprit(out.culprits, collector_id());
                    out.notes.push_back("collector's request does not match its logged tag/value");
                } else {
                    add_culprit(out.culprits, reporter);
                    out.notes.push_back("request decrypts under the logged tag; claim unsupported");
                }
                return out;
            }
            if (reporter.kind == ActorKind::User) {
                // a shuffle layer failed to strip: first suspect a submitter
                // that deviated from the committed construction
                for (uint16_t x = 0; x < n; x++) {
                    std::string why;
                    EimCheck c = check_user_eim(ev, x, &why);
                    if (c != EimCheck::Consistent) {
                        out.attack_id = 1;
                        add_culprit(out.culprits, user_id(x));
                        out.notes.push_back("user " + std::to_string(x) + ": " + why);
                    }
                }
                if (!out.culprits.empty()) return out;
                ShuffleReplay rep = replay_shuffle(ev);
                merge_replay(out, rep);
                if (!rep.culprits.empty()) {
                    out.attack_id = verdict_attack_id(rep);
                    return out;
                }
                add_culprit(out.culprits, reporter);
                out.notes.push_back("all submissions and the chain check out; claim unsupported");
                return out;
            }
            if (reporter == collector_id()) {
                // a bundle entry would not decrypt: prove each user's DSM and
                // see whether the provider's bundle contains exactly those
                uint16_t prov = detail.index;
                auto bundle = provider_bundle(ev, prov);
                if (!bundle) {
                    out.attack_id = 5;
                    add_culprit(out.culprits, provider_id(prov));
                    out.notes.push_back("provider bundle missing or unsigned");
                    return out;
                }
                std::set<size_t> matched;
                for (uint16_t j = 0; j < n; j++) {
                    ProvenDsm proven;
                    std::string why;
                    if (!user_dsm_consistent(ev, j, prov, proven, &why)) {
                        add_culprit(out.culprits, user_id(j));
                        out.notes.push_back("user " + std::to_string(j) + ": " + why);
                        continue;
                    }
                    bool found = false;
                    for (size_t k = 0; k < bundle->size(); k++)
                        if ((*bundle)[k] == proven.dsm) { matched.insert(k); found = true; }
                    if (!found) {
                        out.attack_id = 5;
                        add_culprit(out.culprits, provider_id(prov));
                        out.notes.push_back("proven submission of user " + std::to_string(j) +
                                            " is not in the bundle");
                    }
                }
                if (out.culprits.empty()) {
                    add_culprit(out.culprits, collector_id());
                    out.notes.push_back("bundle matches all proven submissions; claim unsupported");
                }
                return out;
            }
            // a provider could not strip a submission: check the user's record
            {
                uint16_t j = detail.index;
                ProvenDsm proven;
                std::string why;
                if (!user_dsm_consistent(ev, j, reporter.index, proven, &why)) {
                    out.attack_id = 1;
                    add_culprit(out.culprits, user_id(j));
                    out.notes.push_back("user " + std::to_string(j) + ": " + why);
                } else {
                    add_culprit(out.culprits, reporter);
                    out.notes.push_back("submission decrypts under the logged tags; claim unsupported");
                }
                return out;
            }
        }

        case AbortReason::SubmitCountLow: {
            out.attack_id = 2;
            for (uint16_t j : parse_u16_list(signal.evidence)) {
                if (j >= n) continue;
                const Transcript* t = find_tr(ev, user_id(j));
                if (records_of(*t, MsgKind::ShuffleSubmit, true).empty()) {
                    add_culprit(out.culprits, user_id(j));
                    out.notes.push_back("user " + std::to_string(j) + " never submitted to the mix");
                } else {
                    add_culprit(out.culprits, reporter);
                    out.notes.push_back("user " + std::to_string(j) +
                                        " holds a signed submission; accusation unsupported");
                }
            }
            if (out.culprits.empty()) out.attack_id = 0;
            return out;
        }

        case AbortReason::SubmitCountHigh: {
            // two distinct signed submissions from one user
            const Transcript* rt = find_tr(ev, reporter);
            std::set<Bytes> distinct;
            for (const auto* rec : records_of(*rt, MsgKind::ShuffleSubmit, false)) {
                if (rec->peer != detail) continue;
                auto env = decode_envelope(rec->wire);
                if (env && env_ok(ev, *env, detail)) distinct.insert(env->body);
            }
            const Transcript* st = find_tr(ev, detail);
            std::set<Bytes> own;
            for (const auto* rec : records_of(*st, MsgKind::ShuffleSubmit, true)) {
                auto env = decode_envelope(rec->wire);
                if (env) own.insert(env->body);
            }
            if (distinct.size() >= 2 || own.size() >= 2) {
                out.attack_id = 2;
                add_culprit(out.culprits, detail);
                out.notes.push_back(to_string(detail) + " signed " +
                                    std::to_string(std::max(distinct.size(), own.size())) +
                                    " distinct submissions");
            } else {
                add_culprit(out.culprits, reporter);
                out.notes.push_back("only one signed submission exists; accusation unsupported");
            }
            return out;
        }

        case AbortReason::ChainCountMismatch:
        case AbortReason::MissingOwnEntry: {
            ShuffleReplay rep = replay_shuffle(ev);
            merge_replay(out, rep);
            out.attack_id = verdict_attack_id(rep);
            if (out.culprits.empty()) {
                add_culprit(out.culprits, reporter);
                out.notes.push_back("replay found a clean chain; claim unsupported");
                out.attack_id = 0;
            }
            return out;
        }

        case AbortReason::DuplicateIndex: {
            // ciphertext-level replication convicts a processor; with a clean
            // chain, a real collision shows up as two users drawing the same
            // index, which nobody can be blamed for
            ShuffleReplay rep = replay_shuffle(ev);
            merge_replay(out, rep);
            if (!rep.culprits.empty()) {
                out.attack_id = verdict_attack_id(rep);
                return out;
            }
            std::map<Bytes, std::vector<uint16_t>> owners;
            for (uint16_t j = 0; j < n; j++) {
                const Transcript* t = find_tr(ev, user_id(j));
                if (const Bytes* note = t->find_note("pn")) owners[*note].push_back(j);
            }
            for (const auto& [pn, who] : owners) {
                if (who.size() < 2) continue;
                out.genuine_collision = true;
                out.notes.push_back("honest index collision between users " +
                                    std::to_string(who[0]) + " and " + std::to_string(who[1]) +
                                    "; restart with fresh indexes");
                return out;
            }
            add_culprit(out.culprits, reporter);
            out.notes.push_back("no replication and no shared index; claim unsupported");
            return out;
        }

        case AbortReason::DigestMismatch: {
            // gather every validly signed copy of the final broadcast
            std::set<Bytes> bodies;
            ActorId last = user_id(0);
            std::vector<ActorId> receivers;
            receivers.push_back(collector_id());
            for (uint16_t j = 0; j < n; j++) receivers.push_back(user_id(j));
            for (const auto& who : receivers) {
                const Transcript* t = find_tr(ev, who);
                auto recs = records_of(*t, MsgKind::ShuffleFinal, who == last);
                for (const auto* rec : recs) {
                    auto env = decode_envelope(rec->wire);
                    if (env && env_ok(ev, *env, last)) bodies.insert(env->body);
                }
            }
            if (bodies.size() >= 2) {
                out.attack_id = 9;
                add_culprit(out.culprits, last);
                out.notes.push_back("the last processor signed " + std::to_string(bodies.size()) +
                                    " different final broadcasts");
            } else {
                add_culprit(out.culprits, detail);
                out.notes.push_back("one consistent broadcast exists; the odd digest came from " +
                                    to_string(detail));
            }
            return out;
        }

        case AbortReason::UniqueRequestValue: {
            const Transcript* ct = find_tr(ev, collector_id());
            std::vector<Bytes> vals(n);
            bool collector_clean = true;
            for (uint16_t j = 0; j < n && collector_clean; j++) {
                const Bytes* tag = ct->find_note(label_idx("req.tag.", j));
                const Bytes* val = ct->find_note(label_idx("req.val.", j));
                if (!tag || !val) { collector_clean = false; break; }
                Bytes ctct = pad_encrypt(ev.keys.user_enc[j], *tag, *val, "request");
                Bytes body = encode_data_request(ev.params, ctct);
                bool found = false;
                for (const auto* rec : records_of(*ct, MsgKind::DataRequest, true))
                    if (rec->peer == user_id(j)) {
                        auto env = decode_envelope(rec->wire);
                        if (env && env->body == body) found = true;
                    }
                if (!found) collector_clean = false;
                vals[j] = *val;
            }
            if (!collector_clean) {
                out.attack_id = 10;
                add_culprit(out.culprits, collector_id());
                out.notes.push_back("collector's requests do not match its logged assignments");
                return out;
            }
            size_t same = 0;
            for (uint16_t j = 0; j < n; j++)
                if (vals[j] == vals[reporter.index]) same++;
            if (same == 1) {
                out.attack_id = 10;
                add_culprit(out.culprits, collector_id());
                out.notes.push_back("the collector assigned user " + std::to_string(reporter.index) +
                                    " a value nobody else received");
                return out;
            }

            // the collector assigned the value to several users, so the claim
            // can still be honest: count the copies in the published list the
            // last processor signed (the reporter may be that processor, so
            // take the first copy any transcript holds)
            size_t published = 0;
            bool have_final = false;
            for (const auto& [key, t] : ev.transcripts) {
                for (const auto& rec : t.records) {
                    if (rec.kind != MsgKind::ShuffleFinal) continue;
                    auto env = decode_envelope(rec.wire);
                    auto items = env ? decode_mix_batch(ev.params, 0, env->body) : std::nullopt;
                    if (!items) continue;
                    have_final = true;
                    for (const auto& it : *items)
                        if (it.d0 == vals[reporter.index]) published++;
                    break;
                }
                if (have_final) break;
            }
            if (have_final && published < same) {
                // copies vanished inside the shuffle; walk the chain
                ShuffleReplay rep = replay_shuffle(ev);
                if (!rep.culprits.empty()) {
                    out.attack_id = verdict_attack_id(rep);
                    merge_replay(out, rep);
                    return out;
                }
            }
            add_culprit(out.culprits, reporter);
            out.notes.push_back("the assigned value is shared by " + std::to_string(same) +
                                " users; claim unsupported");
            return out;
        }

        case AbortReason::DsmCountLow: {
            if (reporter == collector_id()) {
                // short bundle: did the provider receive all n submissions?
                uint16_t prov = detail.index;
                const Transcript* pt = find_tr(ev, provider_id(prov));
                std::set<uint16_t> got;
                for (const auto* rec : records_of(*pt, MsgKind::DataSubmit, false))
                    got.insert(rec->peer.index);
                if (got.size() == n) {
                    out.attack_id = 6;
                    add_culprit(out.culprits, provider_id(prov));
                    out.notes.push_back("provider received all submissions but bundled fewer");
                } else {
                    out.attack_id = 4;
                    for (uint16_t j = 0; j < n; j++)
                        if (!got.count(j)) add_culprit(out.culprits, user_id(j));
                    out.notes.push_back("bundle is short because some users never submitted");
                }
                return out;
            }
            out.attack_id = 4;
            for (uint16_t j : parse_u16_list(signal.evidence)) {
                if (j >= n) continue;
                const Transcript* t = find_tr(ev, user_id(j));
                bool sent_here = false;
                for (const auto* rec : records_of(*t, MsgKind::DataSubmit, true))
                    if (rec->peer == reporter) sent_here = true;
                if (!sent_here) {
                    add_culprit(out.culprits, user_id(j));
                    out.notes.push_back("user " + std::to_string(j) +
                                        " never submitted data to " + to_string(reporter));
                } else {
                    add_culprit(out.culprits, reporter);
                    out.notes.push_back("user " + std::to_string(j) +
                                        " holds a signed submission; accusation unsupported");
                }
            }
            if (out.culprits.empty()) out.attack_id = 0;
            return out;
        }

        case AbortReason::DsmCountHigh: {
            if (reporter == collector_id()) {
                out.attack_id = 6;
                add_culprit(out.culprits, detail);
                out.notes.push_back("provider bundled more entries than users exist");
                return out;
            }
            const Transcript* rt = find_tr(ev, reporter);
            std::set<Bytes> distinct;
            for (const auto* rec : records_of(*rt, MsgKind::DataSubmit, false)) {
                if (rec->peer != detail) continue;
                auto env = decode_envelope(rec->wire);
                if (env && env_ok(ev, *env, detail)) distinct.insert(env->body);
            }
            if (distinct.size() >= 2) {
                out.attack_id = 4;
                add_culprit(out.culprits, detail);
                out.notes.push_back(to_string(detail) + " signed " +
                                    std::to_string(distinct.size()) + " distinct data submissions");
            } else {
                add_culprit(out.culprits, reporter);
                out.notes.push_back("only one signed data submission exists; accusation unsupported");
            }
            return out;
        }

        case AbortReason::OrphanIndex: {
            uint16_t prov = detail.index;
            auto bundle = provider_bundle(ev, prov);
            if (!bundle) {
                out.attack_id = 5;
                add_culprit(out.culprits, provider_id(prov));
                out.notes.push_back("provider bundle missing or unsigned");
                return out;
            }
            std::vector<ProvenDsm> proven(n);
            std::vector<bool> ok(n, false);
            for (uint16_t j = 0; j < n; j++) {
                std::string why;
                ok[j] = user_dsm_consistent(ev, j, prov, proven[j], &why);
                if (!ok[j]) {
                    add_culprit(out.culprits, user_id(j));
                    out.notes.push_back("user " + std::to_string(j) + ": " + why);
                }
            }
            if (!out.culprits.empty()) return out;
            for (size_t k = 0; k < bundle->size(); k++) {
                bool is_proven = false;
                for (uint16_t j = 0; j < n; j++)
                    if (ok[j] && (*bundle)[k] == proven[j].dsm) is_proven = true;
                if (!is_proven) {
                    out.attack_id = 5;
                    add_culprit(out.culprits, provider_id(prov));
                    out.notes.push_back("bundle entry " + std::to_string(k) +
                                        " matches no user's proven submission");
                }
            }
            if (out.culprits.empty()) {
                add_culprit(out.culprits, collector_id());
                out.notes.push_back("every bundle entry is proven; claim unsupported");
            }
            return out;
        }

        case AbortReason::AckInvalid: {
            auto w = decode_warn(ev.params, signal.evidence);
            if (!w) {
                add_culprit(out.culprits, detail);
                out.notes.push_back("malformed warning");
                return out;
            }
            uint16_t j = detail.index;  // the warner
            uint16_t prov = w->provider;
            ProvenDsm proven;
            std::string why;
            if (!user_dsm_consistent(ev, j, prov, proven, &why) || proven.dsm != w->dsm) {
                add_culprit(out.culprits, user_id(j));
                out.notes.push_back("warning does not match user " + std::to_string(j) +
                                    "'s proven submission");
                return out;
            }
            // was the user's entry tampered inside the bundle?
            auto bundle = provider_bundle(ev, prov);
            bool entry_intact = false;
            if (bundle)
                for (const auto& d : *bundle) {
                    if (d.index_ct == proven.dsm.index_ct && d.data_cell != proven.dsm.data_cell) {
                        out.attack_id = 11;
                        add_culprit(out.culprits, provider_id(prov));
                        out.notes.push_back("bundle entry for this index carries altered data");
                        return out;
                    }
                    if (d == proven.dsm) entry_intact = true;
                }
            if (!entry_intact) {
                out.attack_id = 11;
                add_culprit(out.culprits, provider_id(prov));
                out.notes.push_back("the user's proven submission is missing from the bundle");
                return out;
            }
            // the bundle is fine, so check the relayed receipt
            const Transcript* ct = find_tr(ev, collector_id());
            Bytes dsm_body = encode_dsm(proven.dsm);
            Bytes true_sig;
            for (const auto* rec : records_of(*ct, MsgKind::SubmitAck, true)) {
                if (rec->peer != provider_id(prov)) continue;
                auto env = decode_envelope(rec->wire);
                if (env && env->body == dsm_body && env_ok(ev, *env, collector_id()))
                    true_sig = env->sig;
            }
            if (true_sig.empty()) {
                add_culprit(out.culprits, collector_id());
                out.notes.push_back("the collector never acknowledged this submission");
                return out;
            }
            const Transcript* pt = find_tr(ev, provider_id(prov));
            const Bytes* acktag = pt->find_note(label_idx("ack.tag.", j));
            bool relay_clean = false;
            if (acktag) {
                Bytes expect_ct = pad_encrypt(ev.keys.user_enc[j], *acktag, true_sig, "ack");
                Bytes expect_body = encode_ack_relay(expect_ct);
                for (const auto* rec : records_of(*pt, MsgKind::AckRelay, true))
                    if (rec->peer == user_id(j)) {
                        auto env = decode_envelope(rec->wire);
                        if (env && env->body == expect_body) relay_clean = true;
                    }
            }
            if (!relay_clean) {
                out.attack_id = 5;
                add_culprit(out.culprits, provider_id(prov));
                out.notes.push_back("relayed receipt does not match the collector's signature");
            } else {
                add_culprit(out.culprits, user_id(j));
                out.notes.push_back("the relay checks out; the warning was false");
            }
            return out;
        }

        case AbortReason::FalsifiedData: {
            if (signal.evidence.size() < ev.params.pn_bytes() + 2) {
                add_culprit(out.culprits, reporter);
                out.notes.push_back("malformed evidence");
                return out;
            }
            Bytes pn(signal.evidence.begin(), signal.evidence.end() - 2);
            uint16_t prov = uint16_t(signal.evidence[signal.evidence.size() - 2]) << 8 |
                            signal.evidence.back();
            for (uint16_t j = 0; j < n; j++) {
                const Transcript* t = find_tr(ev, user_id(j));
                const Bytes* note = t->find_note("pn");
                if (!note || *note != pn) continue;
                ProvenDsm proven;
                std::string why;
                if (user_dsm_consistent(ev, j, prov, proven, &why)) {
                    // the user's own submission is internally consistent;
                    // check whether the bundle still carries it verbatim
                    auto bundle = provider_bundle(ev, prov);
                    if (bundle) {
                        for (const Dsm& entry : *bundle) {
                            if (entry.index_ct != proven.dsm.index_ct) continue;
                            if (entry == proven.dsm) break;
                            out.attack_id = 11;
                            add_culprit(out.culprits, provider_id(prov));
                            out.notes.push_back("provider " + std::to_string(prov) +
                                                " altered the entry before bundling it");
                            return out;
                        }
                    }
                    out.attack_id = 12;
                    add_culprit(out.culprits, user_id(j));
                    out.notes.push_back("user " + std::to_string(j) +
                                        "'s signed submission carries the flagged value");
                } else {
                    add_culprit(out.culprits, user_id(j));
                    out.notes.push_back("user " + std::to_string(j) + ": " + why);
                }
                return out;
            }
            add_culprit(out.culprits, reporter);
            out.notes.push_back("no user owns the flagged index; claim unsupported");
            return out;
        }

        case AbortReason::MalformedMessage:
        case AbortReason::WrongParameters: {
            add_culprit(out.culprits, detail);
            out.notes.push_back(to_string(detail) + " sent a message that fails validation");
            return out;
        }

        case AbortReason::ChainMissing: {
            // walk up the chain for the first processor that went silent
            for (int p = int(n) - 1; p >= 0; p--) {
                ActorId proc = user_id(uint16_t(p));
                const Transcript* t = find_tr(ev, proc);
                bool got = uint32_t(p) == n - 1
                               ? records_of(*t, MsgKind::ShuffleSubmit, false).size() >= n
                               : !records_of(*t, MsgKind::ShuffleForward, false).empty();
                MsgKind out_kind = p == 0 ? MsgKind::ShuffleFinal : MsgKind::ShuffleForward;
                bool produced = !records_of(*t, out_kind, true).empty();
                if (got && !produced) {
                    add_culprit(out.culprits, proc);
                    out.notes.push_back(to_string(proc) + " received its batch and went silent");
                    return out;
                }
                if (!got) {
                    add_culprit(out.culprits, proc);
                    out.notes.push_back(to_string(proc) + " is the first silent hop");
                    return out;
                }
            }
            add_culprit(out.culprits, detail);
            return out;
        }

        case AbortReason::BundleMissing: {
            for (uint16_t i : parse_u16_list(signal.evidence)) {
                if (i >= m) continue;
                const Transcript* t = find_tr(ev, provider_id(i));
                if (!records_of(*t, MsgKind::ProviderBundle, true).empty()) continue;
                add_culprit(out.culprits, provider_id(i));
                out.notes.push_back(to_string(provider_id(i)) + " never sent its bundle");
            }
            if (out.culprits.empty()) add_culprit(out.culprits, reporter);
            return out;
        }

        case AbortReason::AckMissing: {
            uint16_t j = reporter.index;
            for (uint16_t i : parse_u16_list(signal.evidence)) {
                if (i >= m) continue;
                const Transcript* pt = find_tr(ev, provider_id(i));
                bool relayed = false;
                for (const auto* rec : records_of(*pt, MsgKind::AckRelay, true))
                    if (rec->peer == user_id(j)) relayed = true;
                if (!relayed) {
                    bool acked = !records_of(*pt, MsgKind::SubmitAck, false).empty();
                    if (acked) {
                        out.attack_id = 5;
                        add_culprit(out.culprits, provider_id(i));
                        out.notes.push_back(to_string(provider_id(i)) +
                                            " held back a receipt it received");
                    } else {
                        add_culprit(out.culprits, collector_id());
                        out.notes.push_back("the collector issued no receipt to " +
                                            to_string(provider_id(i)));
                    }
                }
            }
            if (out.culprits.empty()) add_culprit(out.culprits, reporter);
            return out;
        }

        case AbortReason::Stalled:
        case AbortReason::None:
            out.notes.push_back("no progress and no specific complaint");
            return out;
    }
    return out;
}

}  // namespace mixagg
