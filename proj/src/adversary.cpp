#include "mixagg/adversary.hpp"

#include <algorithm>

#include "mixagg/errors.hpp"

namespace mixagg {

namespace {

// The seat a given attack has to be executed from.
uint16_t active_user(const ScenarioConfig& cfg) {
    const AttackSpec& a = cfg.attack;
    if (a.id == 7 || a.id == 8) return uint16_t(cfg.n_users - 1);
    if (a.id == 9) return 0;
    if (a.id == 1 && a.variant == 1) {
        for (uint16_t u : a.users)
            if (u + 1u != cfg.n_users) return u;
    }
    return a.users.empty() ? uint16_t(0) : *a.users.begin();
}

// Every user-side move behind one switch; the remaining compromised seats
// run the honest code so blame still has to single out the right actor.
class AttackUser final : public UserActor {
  public:
    AttackUser(int attack, uint32_t variant, uint16_t victim_layer, uint16_t index,
               const SessionParams& p, const KeyRegistry& reg, EncKeys enc, SigKeys sig,
               std::vector<uint64_t> readings, Drbg stream, std::optional<Drbg> pn_override)
        : UserActor(index, p, reg, std::move(enc), std::move(sig), std::move(readings),
                    std::move(stream), std::move(pn_override)),
          attack_(attack), variant_(variant), victim_(victim_layer) {
        if (attack_ == 1 && variant_ == 1) {
            Drbg g = rng_.derive("bogus");
            bogus_ = sig_keygen(g);
        }
    }

  protected:
    void tweak_layer_keys(std::vector<EncPub>& keys) override {
        if (attack_ == 1 && variant_ == 0) keys.at(victim_) = reg_.collector_enc;
    }

    const Bytes& submit_signing_key() override {
        if (attack_ == 1 && variant_ == 1) return bogus_.sk;
        return sig_.sk;
    }

    uint32_t submit_copies() override {
        if (attack_ == 2) return variant_ == 0 ? 0 : 2;
        return 1;
    }

    void tweak_output_items(std::vector<MixItem>& items, uint32_t out_layers) override {
        if (attack_ == 3) {
            if (variant_ == 0) {
                Drbg g = rng_.derive("junk");
                MixItem junk;
                junk.d0 = g.bytes(p_.layer_ct_len(out_layers));
                junk.pn = g.bytes(p_.layer_ct_len(out_layers));
                items.push_back(std::move(junk));
            } else if (!items.empty()) {
                items.erase(items.begin());
            }
            return;
        }
        if (attack_ != 7 && attack_ != 8) return;

        // locate this actor's own item at the current depth from its own tags
        std::vector<EncPub> keys(reg_.user_enc.begin(), reg_.user_enc.begin() + out_layers);
        std::vector<Bytes> ptags(serial_pn_tags_.begin(), serial_pn_tags_.begin() + out_layers);
        Bytes own_pn_ct = layer_encrypt(keys, ptags, pn_cell_, "im.pn");
        size_t self = items.size(), other = items.size();
        for (size_t k = 0; k < items.size(); k++) {
            if (items[k].pn == own_pn_ct)
                self = k;
            else if (other == items.size())
                other = k;
        }
        if (self == items.size() || other == items.size()) return;

        if (attack_ == 7) {
            // ride someone else's index instead of our own
            items[self].pn = items[other].pn;
            return;
        }

        // attack 8: push a well-formed stowaway into someone else's slot
        Drbg g = rng_.derive("forged");
        std::vector<Bytes> fd, fp;
        for (uint32_t k = 0; k < out_layers; k++) {
            fd.push_back(g.bytes(PAD_SEED_LEN));
            fp.push_back(g.bytes(PAD_SEED_LEN));
        }
        Bytes fake_index = prf_bits(g.bytes(32), 0, p_.pn_bits);
        MixItem forged;
        forged.d0 = layer_encrypt(keys, fd, encode_value_cell(g.below(1u << 20), p_), "im.d0");
        forged.pn = layer_encrypt(keys, fp, encode_index_cell(fake_index, p_), "im.pn");
        items[other] = std::move(forged);
    }

    Bytes final_body_for(const ActorId& dest, const Bytes& body) override {
        if (attack_ != 9) return body;
        bool lie = variant_ == 1 ? dest.kind == ActorKind::Collector
                                 : dest.kind == ActorKind::User && dest.index % 2 == 1;
        if (!lie) return body;
        auto items = decode_mix_batch(p_, 0, body);
        if (!items || items->size() < 2) return body;
        std::swap((*items)[0], (*items)[1]);
        return encode_mix_batch(*items);
    }

    uint32_t dsm_copies(uint16_t) override {
        if (attack_ == 4) return variant_ == 0 ? 0 : 2;
        return 1;
    }

    uint64_t reading_for(uint16_t, uint64_t honest) override {
        return attack_ == 12 ? honest + 1 : honest;
    }

  private:
    int attack_;
    uint32_t variant_;
    uint16_t victim_;
    SigKeys bogus_;
};

// Misconfigured but not malicious: fixed submission randomizers or a
// padded-out submission frame.
class MisconfiguredUser final : public UserActor {
  public:
    MisconfiguredUser(bool constant_tags, uint32_t extra, uint16_t index, const SessionParams& p,
                      const KeyRegistry& reg, EncKeys enc, SigKeys sig,
                      std::vector<uint64_t> readings, Drbg stream,
                      std::optional<Drbg> pn_override)
        : UserActor(index, p, reg, std::move(enc), std::move(sig), std::move(readings),
                    std::move(stream), std::move(pn_override)),
          constant_tags_(constant_tags), extra_(extra) {}

  protected:
    void dsm_randomizers(Bytes& r, Bytes& outer_d, Bytes& outer_x) override {
        if (!constant_tags_) return;
        r.assign(PAD_SEED_LEN, 0x5a);
        outer_d.assign(PAD_SEED_LEN, 0x5a);
        outer_x.assign(PAD_SEED_LEN, 0x5a);
    }

    Bytes tweak_submit_body(Bytes body) override {
        body.insert(body.end(), extra_, 0);
        return body;
    }

  private:
    bool constant_tags_;
    uint32_t extra_;
};

class AttackProvider final : public ProviderActor {
  public:
    AttackProvider(int attack, uint32_t variant, uint16_t index, const SessionParams& p,
                   const KeyRegistry& reg, EncKeys enc, SigKeys sig, Drbg stream)
        : ProviderActor(index, p, reg, std::move(enc), std::move(sig), std::move(stream)),
          attack_(attack), variant_(variant) {}

  protected:
    void tweak_bundle(std::vector<Dsm>& dsms) override {
        if (dsms.empty()) return;
        if (attack_ == 5 && variant_ == 0) {
            dsms[0].index_ct[0] ^= 0x01;
        } else if (attack_ == 6) {
            if (variant_ == 0)
                dsms.erase(dsms.begin());
            else
                dsms.push_back(dsms[0]);
        } else if (attack_ == 11) {
            auto v = decode_value_cell(dsms[0].data_cell, p_);
            if (v) dsms[0].data_cell = encode_value_cell(*v + 1, p_);
        }
    }

    Bytes ack_sig_for(uint16_t, const Bytes& sig) override {
        if (attack_ != 5 || variant_ != 1) return sig;
        Bytes s = sig;
        s[0] ^= 0x01;
        return s;
    }

    Bytes tweak_ack_ct(uint16_t, Bytes ct) override {
        if (attack_ == 5 && variant_ == 2) ct[0] ^= 0x01;
        return ct;
    }

  private:
    int attack_;
    uint32_t variant_;
};

class AttackCollector final : public CollectorActor {
  public:
    using CollectorActor::CollectorActor;

  protected:
    uint64_t request_value_for(uint16_t user, uint64_t honest) override {
        if (user != 0) return honest;
        uint64_t w = quantizer_width_ > 1 ? quantizer_width_ : 1;
        uint64_t v = honest + w * 1009;
        if (p_.data_bytes < 8) v &= (uint64_t(1) << (8 * p_.data_bytes)) - 1;
        return v;
    }
};

void require_variant(const AttackSpec& a, uint32_t max) {
    if (a.variant > max)
        throw ConfigError("attack " + std::to_string(a.id) + " has variants 0.." +
                          std::to_string(max));
}

}  // namespace

void check_attack_prerequisites(const ScenarioConfig& cfg) {
    const AttackSpec& a = cfg.attack;
    if (a.id == 0) {
        if (!a.users.empty() || !a.providers.empty() || a.collector)
            throw ConfigError("a compromised cast needs an attack id");
        return;
    }
    if (cfg.baseline) throw ConfigError("the baseline scheme has no attack lab");
    if (a.id < 1 || a.id > 12) throw ConfigError("unknown attack id " + std::to_string(a.id));
    for (uint16_t u : a.users)
        if (u >= cfg.n_users) throw ConfigError("compromised user out of range");
    for (uint16_t i : a.providers)
        if (i >= cfg.m_providers) throw ConfigError("compromised provider out of range");

    auto need_users = [&] {
        if (a.users.empty())
            throw ConfigError("attack " + std::to_string(a.id) + " needs a compromised user");
    };
    auto need_providers = [&] {
        if (a.providers.empty())
            throw ConfigError("attack " + std::to_string(a.id) + " needs a compromised provider");
    };

    switch (a.id) {
        case 1:
            need_users();
            require_variant(a, 1);
            if (a.variant == 1) {
                bool ok = false;
                for (uint16_t u : a.users)
                    if (u + 1u != cfg.n_users) ok = true;
                if (!ok)
                    throw ConfigError(
                        "the first processor's own submission is never signature-checked; "
                        "compromise a lower-numbered user for this variant");
            }
            break;
        case 2:
        case 3:
        case 4:
            need_users();
            require_variant(a, 1);
            break;
        case 7:
        case 8:
            if (!a.users.count(uint16_t(cfg.n_users - 1)))
                throw ConfigError(
                    "this move belongs to the first processor; compromise the highest-numbered "
                    "user");
            break;
        case 9:
            require_variant(a, 1);
            if (!a.users.count(0))
                throw ConfigError("this move belongs to the last processor; compromise user 0");
            break;
        case 10:
            if (!a.collector) throw ConfigError("attack 10 is the collector's move");
            break;
        case 5:
            need_providers();
            require_variant(a, 2);
            break;
        case 6:
            need_providers();
            require_variant(a, 1);
            break;
        case 11:
            need_providers();
            break;
        case 12:
            need_users();
            if (cfg.validation_hook != "truth")
                throw ConfigError(
                    "a falsified reading is only observable under the truth validation hook");
            break;
        default:
            break;
    }
}

std::unique_ptr<CollectorActor> make_collector(const ScenarioConfig& cfg, const SessionParams& p,
                                               const KeyRegistry& reg, EncKeys enc, SigKeys sig,
                                               std::vector<uint64_t> readings, ValidationHook hook,
                                               Drbg stream) {
    if (cfg.attack.id == 10 && cfg.attack.collector)
        return std::make_unique<AttackCollector>(p, reg, std::move(enc), std::move(sig),
                                                 std::move(readings), cfg.quantizer_width,
                                                 std::move(hook), std::move(stream));
    return std::make_unique<CollectorActor>(p, reg, std::move(enc), std::move(sig),
                                            std::move(readings), cfg.quantizer_width,
                                            std::move(hook), std::move(stream));
}

std::unique_ptr<UserActor> make_user(const ScenarioConfig& cfg, uint16_t index,
                                     const SessionParams& p, const KeyRegistry& reg, EncKeys enc,
                                     SigKeys sig, std::vector<uint64_t> readings, Drbg stream,
                                     std::optional<Drbg> pn_override) {
    const AttackSpec& a = cfg.attack;
    bool user_move = a.id >= 1 && a.id <= 4;
    user_move = user_move || a.id == 7 || a.id == 8 || a.id == 9 || a.id == 12;
    if (user_move && a.users.count(index) && index == active_user(cfg)) {
        uint16_t victim_layer = 0;
        if (a.id == 1 && a.variant == 0) {
            for (uint16_t u = 0; u < cfg.n_users; u++)
                if (!a.users.count(u)) {
                    victim_layer = u;
                    break;
                }
        }
        return std::make_unique<AttackUser>(a.id, a.variant, victim_layer, index, p, reg,
                                            std::move(enc), std::move(sig), std::move(readings),
                                            std::move(stream), std::move(pn_override));
    }
    auto oit = cfg.oversize_submission.find(index);
    uint32_t extra = oit == cfg.oversize_submission.end() ? 0 : oit->second;
    if (cfg.reuse_dsm_tags || extra)
        return std::make_unique<MisconfiguredUser>(cfg.reuse_dsm_tags, extra, index, p, reg,
                                                   std::move(enc), std::move(sig),
                                                   std::move(readings), std::move(stream),
                                                   std::move(pn_override));
    return std::make_unique<UserActor>(index, p, reg, std::move(enc), std::move(sig),
                                       std::move(readings), std::move(stream),
                                       std::move(pn_override));
}

std::unique_ptr<ProviderActor> make_provider(const ScenarioConfig& cfg, uint16_t index,
                                             const SessionParams& p, const KeyRegistry& reg,
                                             EncKeys enc, SigKeys sig, Drbg stream) {
    const AttackSpec& a = cfg.attack;
    bool provider_move = a.id == 5 || a.id == 6 || a.id == 11;
    if (provider_move && a.providers.count(index) && index == *a.providers.begin())
        return std::make_unique<AttackProvider>(a.id, a.variant, index, p, reg, std::move(enc),
                                                std::move(sig), std::move(stream));
    return std::make_unique<ProviderActor>(index, p, reg, std::move(enc), std::move(sig),
                                           std::move(stream));
}

// ---- observer analyses ----

LinkResult infer_link(const SessionOutcome& out, const ObserverSetup& obs, Drbg& guess_rng) {
    const SessionEvidence& ev = out.evidence;
    const SessionParams& p = ev.params;

    LinkResult res;
    uint16_t target = 0;
    while (obs.colluding_users.count(target)) target++;
    res.target = target;

    // ground truth, used only to score the guess
    Bytes actual;
    if (auto it = ev.transcripts.find(user_id(target).pack()); it != ev.transcripts.end())
        if (const Bytes* pn = it->second.find_note("pn")) actual = *pn;

    // every observer channel sees the plaintext index list of the final
    // broadcast, so the candidate set starts as all published indexes
    std::set<Bytes> candidates;
    for (const auto& [key, t] : ev.transcripts) {
        for (const auto& rec : t.records) {
            if (rec.kind != MsgKind::ShuffleFinal) continue;
            auto env = decode_envelope(rec.wire);
            if (!env) continue;
            auto items = decode_mix_batch(p, 0, env->body);
            if (!items) continue;
            for (const auto& it : *items) candidates.insert(index_from_cell(it.pn, p));
        }
        if (!candidates.empty()) break;
    }

    // colluders know their own indexes and strike them out
    for (uint16_t c : obs.colluding_users) {
        if (auto it = ev.transcripts.find(user_id(c).pack()); it != ev.transcripts.end())
            if (const Bytes* pn = it->second.find_note("pn")) candidates.erase(*pn);
    }

    // A wire observer can try deterministic re-encryption against the
    // target's data submission.  With per-session randomizers nothing
    // matches; with the fixed-tag misconfiguration the link is exact.
    if (obs.eavesdropper) {
        Bytes tag(PAD_SEED_LEN, 0x5a);
        if (auto it = ev.transcripts.find(user_id(target).pack()); it != ev.transcripts.end()) {
            for (const auto& rec : it->second.records) {
                if (!rec.sent || rec.kind != MsgKind::DataSubmit) continue;
                auto env = decode_envelope(rec.wire);
                auto body = env ? decode_data_submit(p, env->body) : std::nullopt;
                if (!body || rec.peer.index >= ev.keys.provider_enc.size()) continue;
                for (const Bytes& pn : candidates) {
                    Bytes cell = encode_index_cell(pn, p);
                    Bytes inner = pad_encrypt(ev.keys.collector_enc, tag, cell, "dsm.index");
                    Bytes wrapped =
                        pad_encrypt(ev.keys.provider_enc[rec.peer.index], tag, inner, "dsm.wrap");
                    if (wrapped == body->index_ct) {
                        res.honest_pool = uint32_t(candidates.size());
                        res.cryptographic = true;
                        res.guessed_pn = pn;
                        res.correct = !actual.empty() && pn == actual;
                        return res;
                    }
                }
                break;  // one submission is as good as any
            }
        }
    }

    res.honest_pool = uint32_t(candidates.size());
    if (candidates.empty()) return res;
    std::vector<Bytes> pool(candidates.begin(), candidates.end());
    res.guessed_pn = pool[size_t(guess_rng.below(pool.size()))];
    res.correct = !actual.empty() && res.guessed_pn == actual;
    return res;
}

std::set<uint16_t> traffic_analysis(const SessionOutcome& out) {
    std::set<uint16_t> flagged;
    for (MsgKind kind : {MsgKind::ShuffleSubmit, MsgKind::DataSubmit}) {
        std::map<uint16_t, uint32_t> seen;
        for (const auto& rec : out.bus_log) {
            if (rec.kind != kind || rec.from.kind != ActorKind::User) continue;
            uint32_t& cur = seen[rec.from.index];
            cur = std::max(cur, rec.wire_len);
        }
        std::map<uint32_t, uint32_t> freq;
        for (const auto& [u, len] : seen) freq[len]++;
        if (freq.size() < 2) continue;
        uint32_t modal = 0, best = 0;
        for (const auto& [len, count] : freq)
            if (count > best) {
                best = count;
                modal = len;
            }
        for (const auto& [u, len] : seen)
            if (len != modal) flagged.insert(u);
    }
    return flagged;
}

}  // namespace mixagg
