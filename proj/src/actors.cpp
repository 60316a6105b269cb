#include "mixagg/actors.hpp"

#include <algorithm>

#include "mixagg/errors.hpp"

namespace mixagg {

const Bytes& KeyRegistry::sig_pk(const ActorId& a) const {
    switch (a.kind) {
        case ActorKind::Collector: return collector_sig;
        case ActorKind::User: return user_sig.at(a.index);
        case ActorKind::Provider: return provider_sig.at(a.index);
    }
    throw InternalError("unknown actor kind");
}

const char* abort_reason_name(AbortReason r) {
    switch (r) {
        case AbortReason::None: return "none";
        case AbortReason::BadSignature: return "bad_signature";
        case AbortReason::UndecryptableItem: return "undecryptable_item";
        case AbortReason::SubmitCountLow: return "submit_count_low";
        case AbortReason::SubmitCountHigh: return "submit_count_high";
        case AbortReason::ChainCountMismatch: return "chain_count_mismatch";
        case AbortReason::DuplicateIndex: return "duplicate_index";
        case AbortReason::MissingOwnEntry: return "missing_own_entry";
        case AbortReason::DigestMismatch: return "digest_mismatch";
        case AbortReason::UniqueRequestValue: return "unique_request_value";
        case AbortReason::DsmCountLow: return "dsm_count_low";
        case AbortReason::DsmCountHigh: return "dsm_count_high";
        case AbortReason::OrphanIndex: return "orphan_index";
        case AbortReason::AckInvalid: return "ack_invalid";
        case AbortReason::FalsifiedData: return "falsified_data";
        case AbortReason::MalformedMessage: return "malformed_message";
        case AbortReason::WrongParameters: return "wrong_parameters";
        case AbortReason::Stalled: return "stalled";
        case AbortReason::ChainMissing: return "chain_missing";
        case AbortReason::BundleMissing: return "bundle_missing";
        case AbortReason::AckMissing: return "ack_missing";
    }
    return "unknown";
}

std::vector<ActorId> everyone_else(const SessionParams& p, const ActorId& self) {
    std::vector<ActorId> out;
    if (self != collector_id()) out.push_back(collector_id());
    for (uint16_t j = 0; j < p.n_users; j++)
        if (self != user_id(j)) out.push_back(user_id(j));
    for (uint16_t i = 0; i < p.m_providers; i++)
        if (self != provider_id(i)) out.push_back(provider_id(i));
    return out;
}

namespace {

std::vector<OutMsg> broadcast_abort(const SessionParams& p, const ActorId& self,
                                    const Bytes& sk, OpCounts& ops, AbortReason r,
                                    uint32_t detail, const Bytes& evidence) {
    AbortBody a;
    a.reason = uint16_t(r);
    a.detail = detail;
    a.evidence = evidence;
    Bytes body = encode_abort(a);
    ops.sign++;
    Envelope env = wrap(sk, body, p.sid, MsgKind::AbortReport);
    std::vector<OutMsg> out;
    for (const auto& dest : everyone_else(p, self)) out.push_back({dest, env});
    return out;
}

Bytes u16_list(const std::vector<uint16_t>& xs) {
    Bytes b;
    for (uint16_t x : xs) put_u16(b, x);
    return b;
}

}  // namespace

// ---- collector ----

CollectorActor::CollectorActor(const SessionParams& p, const KeyRegistry& reg, EncKeys enc,
                               SigKeys sig, std::vector<uint64_t> readings,
                               uint64_t quantizer_width, ValidationHook hook, Drbg stream)
    : p_(p),
      reg_(reg),
      enc_(std::move(enc)),
      sig_(std::move(sig)),
      readings_(std::move(readings)),
      quantizer_width_(quantizer_width),
      hook_(std::move(hook)),
      rng_(std::move(stream)) {
    id = collector_id();
    if (readings_.size() != p_.n_users) throw ConfigError("collector readings count");
}

std::vector<OutMsg> CollectorActor::abort_all(AbortReason r, uint32_t detail,
                                              const Bytes& evidence) {
    aborted = true;
    return broadcast_abort(p_, id, sig_.sk, ops, r, detail, evidence);
}

std::vector<OutMsg> CollectorActor::start() {
    std::vector<OutMsg> out;
    Drbg req = rng_.derive("request");
    uint64_t w = quantizer_width_ > 1 ? quantizer_width_ : 1;
    for (uint16_t j = 0; j < p_.n_users; j++) {
        uint64_t q = readings_[j] / w * w;
        uint64_t v = request_value_for(j, q);
        Bytes cell = encode_value_cell(v, p_);
        Bytes tag = req.bytes(PAD_SEED_LEN);
        note("req.tag." + std::to_string(j), tag);
        note("req.val." + std::to_string(j), cell);
        ops.enc_r++;
        Bytes ct = pad_encrypt(reg_.user_enc[j], tag, cell, "request");
        Bytes body = encode_data_request(p_, ct);
        ops.sign++;
        out.push_back({user_id(j), wrap(sig_.sk, body, p_.sid, MsgKind::DataRequest)});
    }
    return out;
}

std::vector<OutMsg> CollectorActor::on_message(const Envelope& env, const ActorId& from) {
    if (aborted) return {};
    if (env.kind == MsgKind::AbortReport) {
        aborted = true;
        return {};
    }
    // complaints still count after the tuples are assembled
    if (done_ && env.kind != MsgKind::Warn) return {};

    ops.verify++;
    Validity v = validate(env, reg_.sig_pk(from), p_.sid);
    if (v == Validity::WrongSession) return {};
    if (v == Validity::BadSignature)
        return abort_all(AbortReason::BadSignature, from.pack(), {});

    switch (env.kind) {
        case MsgKind::ShuffleFinal: {
            if (!abm_body_.empty()) return {};
            auto items = decode_mix_batch(p_, 0, env.body);
            if (!items) return abort_all(AbortReason::MalformedMessage, from.pack(), {});
            if (items->size() != p_.n_users) {
                Bytes ev;
                put_u32(ev, uint32_t(items->size()));
                return abort_all(AbortReason::ChainCountMismatch, from.pack(), ev);
            }
            abm_body_ = env.body;
            for (const auto& it : *items) {
                Bytes pn = index_from_cell(it.pn, p_);
                auto val = decode_value_cell(it.d0, p_);
                if (!val) return abort_all(AbortReason::MalformedMessage, from.pack(), {});
                if (abm_.count(pn)) return abort_all(AbortReason::DuplicateIndex, 0, pn);
                abm_[pn] = *val;
            }
            ops.hash++;
            Bytes digest = sha256(abm_body_);
            ops.sign++;
            Envelope d = wrap(sig_.sk, encode_digest_share(digest), p_.sid, MsgKind::DigestShare);
            std::vector<OutMsg> out;
            for (uint16_t j = 0; j < p_.n_users; j++) out.push_back({user_id(j), d});
            return out;
        }
        case MsgKind::ProviderBundle: {
            if (from.kind != ActorKind::Provider || abm_body_.empty()) return {};
            auto dsms = decode_provider_bundle(p_, env.body);
            if (!dsms) return abort_all(AbortReason::MalformedMessage, from.pack(), {});
            if (dsms->size() != p_.n_users) {
                Bytes ev;
                put_u32(ev, uint32_t(dsms->size()));
                AbortReason r = dsms->size() < p_.n_users ? AbortReason::DsmCountLow
                                                          : AbortReason::DsmCountHigh;
                return abort_all(r, from.pack(), ev);
            }
            std::set<Bytes> seen;
            std::vector<OutMsg> out;
            for (size_t k = 0; k < dsms->size(); k++) {
                const Dsm& d = (*dsms)[k];
                Bytes cell;
                ops.dec_r++;
                try {
                    cell = pad_decrypt(enc_, d.index_ct, p_.cell_len, "dsm.index");
                } catch (const PaddingError&) {
                    Bytes ev;
                    put_u32(ev, uint32_t(k));
                    return abort_all(AbortReason::UndecryptableItem, from.pack(), ev);
                }
                Bytes pn = index_from_cell(cell, p_);
                if (!abm_.count(pn)) {
                    Bytes ev;
                    put_u32(ev, uint32_t(k));
                    return abort_all(AbortReason::OrphanIndex, from.pack(), ev);
                }
                if (!seen.insert(pn).second) {
                    Bytes ev;
                    put_u32(ev, uint32_t(k));
                    return abort_all(AbortReason::DuplicateIndex, from.pack(), ev);
                }
                auto val = decode_value_cell(d.data_cell, p_);
                if (!val) return abort_all(AbortReason::MalformedMessage, from.pack(), {});
                if (hook_ && !hook_(pn, from.index, *val)) {
                    Bytes ev = pn;
                    put_u16(ev, from.index);
                    return abort_all(AbortReason::FalsifiedData, from.pack(), ev);
                }
                auto& t = by_pn_[pn];
                if (t.values.empty()) {
                    t.pn = pn;
                    t.d0 = abm_[pn];
                    t.values.assign(p_.m_providers, 0);
                }
                t.values[from.index] = *val;
                ops.sign++;
                out.push_back(
                    {from, wrap(sig_.sk, encode_dsm(d), p_.sid, MsgKind::SubmitAck)});
            }
            bundles_done_++;
            if (bundles_done_ == p_.m_providers) {
                for (auto& [pn, t] : by_pn_) tuples_.push_back(t);
                done_ = true;
            }
            return out;
        }
        case MsgKind::Warn: {
            auto w = decode_warn(p_, env.body);
            if (!w) return abort_all(AbortReason::MalformedMessage, from.pack(), {});
            return abort_all(AbortReason::AckInvalid, from.pack(), env.body);
        }
        default:
            return {};
    }
}

std::vector<OutMsg> CollectorActor::on_quiescence() {
    if (aborted || done_) return {};
    if (!abm_body_.empty() && bundles_done_ < p_.m_providers) {
        std::vector<uint16_t> missing;
        for (uint16_t i = 0; i < p_.m_providers; i++) missing.push_back(i);
        return abort_all(AbortReason::BundleMissing, 0, u16_list(missing));
    }
    return {};
}

// ---- user ----

UserActor::UserActor(uint16_t index, const SessionParams& p, const KeyRegistry& reg, EncKeys enc,
                     SigKeys sig, std::vector<uint64_t> readings, Drbg stream,
                     std::optional<Drbg> pn_stream_override)
    : index_(index),
      p_(p),
      reg_(reg),
      enc_(std::move(enc)),
      sig_(std::move(sig)),
      readings_(std::move(readings)),
      rng_(std::move(stream)) {
    id = user_id(index);
    pn_rng_ = pn_stream_override ? *pn_stream_override : rng_.derive("pn");
    if (readings_.size() != p_.m_providers) throw ConfigError("user readings count");
}

std::vector<OutMsg> UserActor::abort_all(AbortReason r, uint32_t detail, const Bytes& evidence) {
    aborted = true;
    return broadcast_abort(p_, id, sig_.sk, ops, r, detail, evidence);
}

bool UserActor::finished() const {
    return !aborted && data_submitted_ && acked_.size() == p_.m_providers;
}

Envelope UserActor::wrap_out(const Bytes& body, MsgKind kind) {
    ops.sign++;
    return wrap(sig_.sk, body, p_.sid, kind);
}

std::vector<OutMsg> UserActor::build_submission() {
    std::vector<OutMsg> out;
    Bytes pn_seed = pn_rng_.bytes(32);
    note("pn.seed", pn_seed);
    pn_ = prf_bits(pn_seed, 0, p_.pn_bits);
    note("pn", pn_);
    pn_cell_ = encode_index_cell(pn_, p_);

    Drbg sd = rng_.derive("serial.d0");
    Drbg sp = rng_.derive("serial.pn");
    serial_d0_tags_.clear();
    serial_pn_tags_.clear();
    for (uint32_t k = 1; k <= p_.n_users; k++) {
        serial_d0_tags_.push_back(sd.bytes(PAD_SEED_LEN));
        serial_pn_tags_.push_back(sp.bytes(PAD_SEED_LEN));
        note("serial.d0." + std::to_string(k), serial_d0_tags_.back());
        note("serial.pn." + std::to_string(k), serial_pn_tags_.back());
    }

    std::vector<EncPub> keys = reg_.user_enc;  // ascending user order
    tweak_layer_keys(keys);

    uint32_t copies = submit_copies();
    for (uint32_t c = 0; c < copies; c++) {
        if (c > 0) {
            // a second, distinct submission: fresh index and fresh tags
            Bytes seed2 = pn_rng_.bytes(32);
            note("pn.seed.extra", seed2);
            pn_ = prf_bits(seed2, 0, p_.pn_bits);
            pn_cell_ = encode_index_cell(pn_, p_);
            for (uint32_t k = 0; k < p_.n_users; k++) {
                serial_d0_tags_[k] = sd.bytes(PAD_SEED_LEN);
                serial_pn_tags_[k] = sp.bytes(PAD_SEED_LEN);
            }
        }
        MixItem eim;
        ops.enc_r += keys.size();
        eim.d0 = layer_encrypt(keys, serial_d0_tags_, d0_cell_, "im.d0");
        ops.enc_r += keys.size();
        eim.pn = layer_encrypt(keys, serial_pn_tags_, pn_cell_, "im.pn");
        ops.sign++;
        Envelope env = wrap(submit_signing_key(), tweak_submit_body(encode_mix_item(eim)),
                            p_.sid, MsgKind::ShuffleSubmit);
        out.push_back({user_id(uint16_t(p_.n_users - 1)), env});
    }
    submitted_ = true;
    return out;
}

std::vector<OutMsg> UserActor::process_batch(const std::vector<MixItem>& items) {
    processed_batch_ = true;
    uint32_t in_layers = index_ + 1;
    uint32_t out_layers = index_;

    // shuffle,then strip one layer
    Drbg perm_rng = rng_.derive("perm");
    note("perm.seed", perm_rng.seed());
    std::vector<uint32_t> perm = random_permutation(perm_rng, uint32_t(items.size()));
    ops.shuffle++;

    std::vector<MixItem> outputs;
    outputs.reserve(items.size());
    size_t out_len = p_.layer_ct_len(out_layers);
    for (size_t k = 0; k < perm.size(); k++) {
        const MixItem& it = items[perm[k]];
        MixItem o;
        try {
            ops.dec_r++;
            o.d0 = pad_decrypt(enc_, it.d0, out_len, "im.d0");
            ops.dec_r++;
            o.pn = pad_decrypt(enc_, it.pn, out_len, "im.pn");
        } catch (const PaddingError&) {
            Bytes ev;
            put_u32(ev, uint32_t(perm[k]));
            return abort_all(AbortReason::UndecryptableItem, id.pack(), ev);
        }
        outputs.push_back(std::move(o));
    }

    tweak_output_items(outputs, out_layers);

    if (!is_last()) {
        Envelope env = wrap_out(encode_mix_batch(outputs), MsgKind::ShuffleForward);
        return {{user_id(uint16_t(index_ - 1)), env}};
    }

    // last processor: plaintext reached, broadcast the final bundle
    Bytes body = encode_mix_batch(outputs);
    std::vector<OutMsg> out;
    Envelope base = wrap_out(body, MsgKind::ShuffleFinal);
    for (const auto& dest : everyone_else(p_, id)) {
        if (dest.kind == ActorKind::Provider) continue;
        Bytes vb = final_body_for(dest, body);
        if (vb == body) {
            out.push_back({dest, base});
        } else {
            out.push_back({dest, wrap_out(vb, MsgKind::ShuffleFinal)});
        }
    }
    // run the same receipt checks on the copy this actor keeps
    auto self_msgs = handle_final(base, id);
    out.insert(out.end(), self_msgs.begin(), self_msgs.end());
    return out;
}

std::vector<OutMsg> UserActor::handle_final(const Envelope& env, const ActorId& from) {
    if (final_seen_) return {};
    ops.verify++;
    Validity v = validate(env, reg_.user_sig[0], p_.sid);
    if (v == Validity::WrongSession) return {};
    if (v == Validity::BadSignature) return abort_all(AbortReason::BadSignature, from.pack(), {});

    auto items = decode_mix_batch(p_, 0, env.body);
    if (!items) return abort_all(AbortReason::MalformedMessage, from.pack(), {});
    if (items->size() != p_.n_users) {
        Bytes ev;
        put_u32(ev, uint32_t(items->size()));
        return abort_all(AbortReason::ChainCountMismatch, from.pack(), ev);
    }
    final_seen_ = true;
    abm_body_ = env.body;
    abm_ = *items;

    // replacement checking: my own entry must have survived the mix
    bool mine = false;
    for (const auto& it : abm_)
        if (it.d0 == d0_cell_ && it.pn == pn_cell_) mine = true;
    if (!mine) return abort_all(AbortReason::MissingOwnEntry, id.pack(), {});

    // index collision surfaces in plaintext here; the harness replays to
    // tell an honest collision (restart) from a replication attack
    size_t pn_same = 0;
    for (const auto& it : abm_)
        if (it.pn == pn_cell_) pn_same++;
    if (pn_same > 1) return abort_all(AbortReason::DuplicateIndex, id.pack(), pn_);

    // uniqueness checking: a requested value only I carry would mark me
    size_t d0_same = 0;
    for (const auto& it : abm_)
        if (it.d0 == d0_cell_) d0_same++;
    if (d0_same == 1) return abort_all(AbortReason::UniqueRequestValue, id.pack(), {});

    ops.hash++;
    Bytes digest = sha256(abm_body_);
    Envelope d = wrap_out(encode_digest_share(digest), MsgKind::DigestShare);
    std::vector<OutMsg> out;
    for (uint16_t j = 0; j < p_.n_users; j++)
        if (j != index_) out.push_back({user_id(j), d});
    auto more = maybe_submit_data();
    out.insert(out.end(), more.begin(), more.end());
    return out;
}

std::vector<OutMsg> UserActor::maybe_submit_data() {
    if (digests_.size() != p_.n_users || !final_seen_ || aborted || data_submitted_) return {};

    // broadcast consistence checking against a fresh digest of my copy
    ops.hash++;
    Bytes own = sha256(abm_body_);
    for (const auto& [sender, digest] : digests_) {
        if (digest != own) {
            Bytes ev = digest;
            append(ev, own);
            return abort_all(AbortReason::DigestMismatch, sender, ev);
        }
    }

    data_submitted_ = true;
    std::vector<OutMsg> out;
    Drbg dsm_rng = rng_.derive("dsm");
    Bytes r = dsm_rng.bytes(PAD_SEED_LEN);
    Bytes outer_d = dsm_rng.bytes(PAD_SEED_LEN);
    Bytes outer_x = dsm_rng.bytes(PAD_SEED_LEN);
    dsm_randomizers(r, outer_d, outer_x);
    note("dsm.r", r);
    note("dsm.outer.d", outer_d);
    note("dsm.outer.x", outer_x);

    sent_dsms_.assign(p_.m_providers, Dsm{});
    for (uint16_t i = 0; i < p_.m_providers; i++) {
        uint32_t copies = dsm_copies(i);
        for (uint32_t c = 0; c < copies; c++) {
            uint64_t value = reading_for(i, readings_[i]);
            Bytes rr = r, od = outer_d, ox = outer_x;
            if (c > 0) {
                // distinct duplicate submission under fresh randomness
                value++;
                rr = dsm_rng.bytes(PAD_SEED_LEN);
                od = dsm_rng.bytes(PAD_SEED_LEN);
                ox = dsm_rng.bytes(PAD_SEED_LEN);
                note("dsm.extra." + std::to_string(i), rr);
            }
            Bytes d_cell = encode_value_cell(value, p_);
            ops.enc_r++;
            Bytes inner = pad_encrypt(reg_.collector_enc, rr, pn_cell_, "dsm.index");
            ops.enc_r++;
            Bytes data_ct = pad_encrypt(reg_.provider_enc[i], od, d_cell, "dsm.data");
            ops.enc_r++;
            Bytes index_ct = pad_encrypt(reg_.provider_enc[i], ox, inner, "dsm.wrap");
            if (c == 0) {
                sent_dsms_[i] = Dsm{d_cell, inner};
                note("dsm.data." + std::to_string(i), d_cell);
            }
            Envelope env = wrap_out(encode_data_submit({data_ct, index_ct}), MsgKind::DataSubmit);
            out.push_back({provider_id(i), env});
        }
    }
    return out;
}

std::vector<OutMsg> UserActor::on_message(const Envelope& env, const ActorId& from) {
    if (aborted) return {};
    if (env.kind == MsgKind::AbortReport) {
        aborted = true;
        return {};
    }

    if (env.kind == MsgKind::ShuffleFinal) return handle_final(env, from);

    bool own_submission = env.kind == MsgKind::ShuffleSubmit && from == id;
    if (!own_submission) {
        ops.verify++;
        Validity v = validate(env, reg_.sig_pk(from), p_.sid);
        if (v == Validity::WrongSession) return {};
        if (v == Validity::BadSignature)
            return abort_all(AbortReason::BadSignature, from.pack(), {});
    }

    switch (env.kind) {
        case MsgKind::DataRequest: {
            if (submitted_ || from != collector_id()) return {};
            auto req = decode_data_request(p_, env.body);
            if (!req) return abort_all(AbortReason::MalformedMessage, from.pack(), {});
            if (!check_params_cell(req->params_cell, p_))
                return abort_all(AbortReason::WrongParameters, from.pack(), {});
            ops.dec_r++;
            try {
                d0_cell_ = pad_decrypt(enc_, req->ct, p_.cell_len, "request");
            } catch (const PaddingError&) {
                return abort_all(AbortReason::UndecryptableItem, from.pack(), {});
            }
            note("im.d0", d0_cell_);
            return build_submission();
        }
        case MsgKind::ShuffleSubmit: {
            if (!is_first() || from.kind != ActorKind::User || processed_batch_) return {};
            if (pending_submissions_.count(from.index)) {
                Bytes ev;
                put_u16(ev, from.index);
                return abort_all(AbortReason::SubmitCountHigh, from.pack(), ev);
            }
            pending_submissions_[from.index] = env;
            if (pending_submissions_.size() < p_.n_users) return {};

            std::vector<MixItem> items;
            for (const auto& [sender, e] : pending_submissions_) {
                auto it = decode_mix_item(p_, p_.n_users, e.body);
                if (!it)
                    return abort_all(AbortReason::MalformedMessage,
                                     user_id(sender).pack(), {});
                items.push_back(std::move(*it));
            }
            // replication checking on the encrypted index components
            for (size_t a = 0; a < items.size(); a++)
                for (size_t b = a + 1; b < items.size(); b++)
                    if (items[a].pn == items[b].pn) {
                        Bytes ev;
                        put_u32(ev, uint32_t(a));
                        put_u32(ev, uint32_t(b));
                        return abort_all(AbortReason::DuplicateIndex, id.pack(), ev);
                    }
            return process_batch(items);
        }
        case MsgKind::ShuffleForward: {
            if (is_first() || processed_batch_ || from != user_id(uint16_t(index_ + 1)))
                return {};
            auto items = decode_mix_batch(p_, index_ + 1, env.body);
            if (!items) return abort_all(AbortReason::MalformedMessage, from.pack(), {});
            if (items->size() != p_.n_users) {
                Bytes ev;
                put_u32(ev, uint32_t(items->size()));
                return abort_all(AbortReason::ChainCountMismatch, from.pack(), ev);
            }
            for (size_t a = 0; a < items->size(); a++)
                for (size_t b = a + 1; b < items->size(); b++)
                    if ((*items)[a].pn == (*items)[b].pn) {
                        Bytes ev;
                        put_u32(ev, uint32_t(a));
                        put_u32(ev, uint32_t(b));
                        return abort_all(AbortReason::DuplicateIndex, from.pack(), ev);
                    }
            return process_batch(*items);
        }
        case MsgKind::DigestShare: {
            if (from == id) return {};
            auto digest = decode_digest_share(env.body);
            if (!digest) return abort_all(AbortReason::MalformedMessage, from.pack(), {});
            digests_[from.pack()] = *digest;
            return maybe_submit_data();
        }
        case MsgKind::AckRelay: {
            if (from.kind != ActorKind::Provider || !data_submitted_) return {};
            if (acked_.count(from.index)) return {};
            auto ct = decode_ack_relay(p_, env.body);
            if (!ct) return abort_all(AbortReason::MalformedMessage, from.pack(), {});

            // data submission checking: the acknowledged record must be
            // exactly what I sent, under the collector's signature
            const Dsm& mine = sent_dsms_[from.index];
            Bytes acksig(SIG_LEN, 0);
            bool ok = false;
            ops.dec_r++;
            try {
                acksig = pad_decrypt(enc_, *ct, SIG_LEN, "ack");
            } catch (const PaddingError&) {
                acksig.assign(SIG_LEN, 0);
            }
            ops.verify++;
            ok = verify(reg_.collector_sig,
                        sign_span(encode_dsm(mine), p_.sid, MsgKind::SubmitAck), acksig);
            if (!ok) {
                WarnBody w;
                w.provider = from.index;
                w.dsm = mine;
                w.ack_sig = acksig;
                Envelope env2 = wrap_out(encode_warn(w), MsgKind::Warn);
                return {{collector_id(), env2}};
            }
            acked_.insert(from.index);
            return {};
        }
        default:
            return {};
    }
}

std::vector<OutMsg> UserActor::on_quiescence() {
    if (aborted || finished()) return {};
    if (is_first() && submitted_ && !processed_batch_) {
        std::vector<uint16_t> missing;
        for (uint16_t j = 0; j < p_.n_users; j++)
            if (!pending_submissions_.count(j)) missing.push_back(j);
        if (!missing.empty())
            return abort_all(AbortReason::SubmitCountLow, id.pack(), u16_list(missing));
    }
    if (!is_first() && submitted_ && !processed_batch_)
        return abort_all(AbortReason::ChainMissing, user_id(uint16_t(index_ + 1)).pack(), {});
    if (data_submitted_ && acked_.size() < p_.m_providers) {
        std::vector<uint16_t> missing;
        for (uint16_t i = 0; i < p_.m_providers; i++)
            if (!acked_.count(i)) missing.push_back(i);
        return abort_all(AbortReason::AckMissing, id.pack(), u16_list(missing));
    }
    return abort_all(AbortReason::Stalled, id.pack(), {});
}

// ---- provider ----

ProviderActor::ProviderActor(uint16_t index, const SessionParams& p, const KeyRegistry& reg,
                             EncKeys enc, SigKeys sig, Drbg stream)
    : index_(index), p_(p), reg_(reg), enc_(std::move(enc)), sig_(std::move(sig)),
      rng_(std::move(stream)) {
    id = provider_id(index);
}

std::vector<OutMsg> ProviderActor::abort_all(AbortReason r, uint32_t detail,
                                             const Bytes& evidence) {
    aborted = true;
    return broadcast_abort(p_, id, sig_.sk, ops, r, detail, evidence);
}

bool ProviderActor::finished() const {
    return !aborted && bundled_ && acks_relayed_ == p_.n_users;
}

std::vector<OutMsg> ProviderActor::on_message(const Envelope& env, const ActorId& from) {
    if (aborted) return {};
    if (env.kind == MsgKind::AbortReport) {
        aborted = true;
        return {};
    }

    ops.verify++;
    Validity v = validate(env, reg_.sig_pk(from), p_.sid);
    if (v == Validity::WrongSession) return {};
    if (v == Validity::BadSignature)
        return abort_all(AbortReason::BadSignature, from.pack(), {});

    switch (env.kind) {
        case MsgKind::DataSubmit: {
            if (from.kind != ActorKind::User || bundled_) return {};
            auto sub = decode_data_submit(p_, env.body);
            if (!sub) return abort_all(AbortReason::MalformedMessage, from.pack(), {});
            if (submissions_.count(from.index)) {
                Bytes ev;
                put_u16(ev, from.index);
                return abort_all(AbortReason::DsmCountHigh, from.pack(), ev);
            }
            submissions_[from.index] = *sub;
            if (submissions_.size() < p_.n_users) return {};

            std::vector<Dsm> dsms;
            for (const auto& [j, s] : submissions_) {
                Dsm d;
                try {
                    ops.dec_r++;
                    d.data_cell = pad_decrypt(enc_, s.data_ct, p_.cell_len, "dsm.data");
                    ops.dec_r++;
                    d.index_ct = pad_decrypt(enc_, s.index_ct, p_.layer_ct_len(1), "dsm.wrap");
                } catch (const PaddingError&) {
                    return abort_all(AbortReason::UndecryptableItem, user_id(j).pack(), {});
                }
                dsm_by_user_[j] = d;
                dsms.push_back(std::move(d));
            }
            for (size_t a = 0; a < dsms.size(); a++)
                for (size_t b = a + 1; b < dsms.size(); b++)
                    if (dsms[a].index_ct == dsms[b].index_ct)
                        return abort_all(AbortReason::DuplicateIndex, id.pack(), {});

            // identity-free order: the collector must not learn who is who
            // from bundle positions
            std::sort(dsms.begin(), dsms.end(), [](const Dsm& x, const Dsm& y) {
                return x.index_ct < y.index_ct;
            });
            tweak_bundle(dsms);
            bundled_ = true;
            ops.sign++;
            Envelope env2 =
                wrap(sig_.sk, encode_provider_bundle(dsms), p_.sid, MsgKind::ProviderBundle);
            return {{collector_id(), env2}};
        }
        case MsgKind::SubmitAck: {
            if (from != collector_id()) return {};
            auto d = decode_dsm(p_, env.body);
            if (!d) return abort_all(AbortReason::MalformedMessage, from.pack(), {});
            // route by the index component, which survives any data tweak
            std::optional<uint16_t> owner;
            for (const auto& [j, mine] : dsm_by_user_)
                if (mine.index_ct == d->index_ct) owner = j;
            if (!owner) return {};
            Bytes tag = rng_.bytes(PAD_SEED_LEN);
            note("ack.tag." + std::to_string(*owner), tag);
            Bytes sig2 = ack_sig_for(*owner, env.sig);
            ops.enc_r++;
            Bytes ct = pad_encrypt(reg_.user_enc[*owner], tag, sig2, "ack");
            ct = tweak_ack_ct(*owner, std::move(ct));
            ops.sign++;
            Envelope env2 = wrap(sig_.sk, encode_ack_relay(ct), p_.sid, MsgKind::AckRelay);
            acks_relayed_++;
            return {{user_id(*owner), env2}};
        }
        default:
            return {};
    }
}

std::vector<OutMsg> ProviderActor::on_quiescence() {
    if (aborted || finished()) return {};
    if (!bundled_) {
        std::vector<uint16_t> missing;
        for (uint16_t j = 0; j < p_.n_users; j++)
            if (!submissions_.count(j)) missing.push_back(j);
        return abort_all(AbortReason::DsmCountLow, id.pack(), u16_list(missing));
    }
    return abort_all(AbortReason::Stalled, id.pack(), {});
}

}  // namespace mixagg
