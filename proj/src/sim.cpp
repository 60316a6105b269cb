#include "mixagg/sim.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <queue>
#include <set>

#include <nlohmann/json.hpp>

#include "mixagg/adversary.hpp"
#include "mixagg/errors.hpp"

namespace mixagg {

const char* status_name(SessionStatus s) {
    switch (s) {
        case SessionStatus::Completed: return "completed";
        case SessionStatus::Restarted: return "restarted";
        case SessionStatus::Aborted: return "aborted";
    }
    return "unknown";
}

SessionParams derive_params(const ScenarioConfig& cfg, uint64_t sid) {
    if (cfg.n_users < 2) throw ConfigError("need at least two users");
    if (cfg.n_users > 4096) throw ConfigError("too many users");
    if (cfg.m_providers < 1) throw ConfigError("need at least one provider");
    if (cfg.data_bytes < 1 || cfg.data_bytes > 4096) throw ConfigError("bad data width");
    if (cfg.quantizer_width < 1) throw ConfigError("quantizer width must be positive");
    SessionParams p;
    p.sid = sid;
    p.n_users = cfg.n_users;
    p.m_providers = cfg.m_providers;
    p.data_bytes = cfg.data_bytes;
    p.key_bits = cfg.key_bits;
    p.pn_bits = choose_index_bits(cfg.n_users, cfg.collision_threshold);
    p.cell_len = SessionParams::derive_cell_len(cfg.data_bytes, p.pn_bits, cfg.key_bits);
    return p;
}

CommShape comm_shape(const SessionParams& p, uint32_t providers) {
    CommShape s;
    s.n = p.n_users;
    s.t = providers;
    s.cell = p.cell_len;
    s.hash = HASH_LEN;
    s.sig = SIG_LEN;
    s.hdr = HDR_LEN;
    for (uint32_t k = 1; k <= p.n_users; k++) s.item.push_back(p.item_len(k));
    return s;
}

CommShape baseline_comm_shape(const SessionParams& p, uint32_t providers) {
    CommShape s = comm_shape(p, providers);
    for (uint32_t k = 1; k <= p.n_users; k++)
        s.item[k - 1] = 2 * uint64_t(p.cell_len) + uint64_t(k) * PAD_OVERHEAD;
    return s;
}

// ---- scenario JSON ----

ScenarioConfig scenario_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scenario JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("scenario JSON must be an object");

    static const std::set<std::string> known = {
        "users", "providers", "data_bytes", "key_bits", "collision_threshold",
        "quantizer_width", "seed", "reps", "baseline", "validation_hook",
        "force_pn_collision", "reuse_dsm_tags", "oversize_submission", "net",
        "attack", "collector_readings", "user_readings"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) throw ConfigError("unknown scenario key: " + it.key());

    ScenarioConfig cfg;
    try {
        cfg.n_users = j.value("users", cfg.n_users);
        cfg.m_providers = j.value("providers", cfg.m_providers);
        cfg.data_bytes = j.value("data_bytes", cfg.data_bytes);
        cfg.key_bits = j.value("key_bits", cfg.key_bits);
        cfg.collision_threshold = j.value("collision_threshold", cfg.collision_threshold);
        cfg.quantizer_width = j.value("quantizer_width", cfg.quantizer_width);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.reps = j.value("reps", cfg.reps);
        cfg.baseline = j.value("baseline", cfg.baseline);
        cfg.validation_hook = j.value("validation_hook", cfg.validation_hook);
        cfg.force_pn_collision = j.value("force_pn_collision", cfg.force_pn_collision);
        cfg.reuse_dsm_tags = j.value("reuse_dsm_tags", cfg.reuse_dsm_tags);
        if (j.contains("oversize_submission")) {
            for (auto it = j["oversize_submission"].begin(); it != j["oversize_submission"].end();
                 ++it)
                cfg.oversize_submission[uint16_t(std::stoul(it.key()))] =
                    it.value().get<uint32_t>();
        }
        if (j.contains("net")) {
            const auto& nj = j["net"];
            cfg.net.bandwidth_bps = nj.value("bandwidth_bps", cfg.net.bandwidth_bps);
            cfg.net.latency_ns = nj.value("latency_ns", cfg.net.latency_ns);
        }
        if (j.contains("attack")) {
            const auto& aj = j["attack"];
            cfg.attack.id = aj.value("id", 0);
            cfg.attack.variant = aj.value("variant", 0u);
            if (aj.contains("users"))
                for (auto v : aj["users"]) cfg.attack.users.insert(v.get<uint16_t>());
            if (aj.contains("providers"))
                for (auto v : aj["providers"]) cfg.attack.providers.insert(v.get<uint16_t>());
            cfg.attack.collector = aj.value("collector", false);
        }
        if (j.contains("collector_readings"))
            cfg.collector_readings = j["collector_readings"].get<std::vector<uint64_t>>();
        if (j.contains("user_readings"))
            cfg.user_readings = j["user_readings"].get<std::vector<std::vector<uint64_t>>>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scenario JSON: ") + e.what());
    }
    return cfg;
}

std::string scenario_to_json(const ScenarioConfig& cfg) {
    nlohmann::json j;
    j["users"] = cfg.n_users;
    j["providers"] = cfg.m_providers;
    j["data_bytes"] = cfg.data_bytes;
    j["key_bits"] = cfg.key_bits;
    j["collision_threshold"] = cfg.collision_threshold;
    j["quantizer_width"] = cfg.quantizer_width;
    j["seed"] = cfg.seed;
    j["reps"] = cfg.reps;
    j["baseline"] = cfg.baseline;
    j["validation_hook"] = cfg.validation_hook;
    j["force_pn_collision"] = cfg.force_pn_collision;
    j["reuse_dsm_tags"] = cfg.reuse_dsm_tags;
    if (!cfg.oversize_submission.empty()) {
        nlohmann::json o = nlohmann::json::object();
        for (const auto& [u, extra] : cfg.oversize_submission) o[std::to_string(u)] = extra;
        j["oversize_submission"] = o;
    }
    j["net"] = {{"bandwidth_bps", cfg.net.bandwidth_bps}, {"latency_ns", cfg.net.latency_ns}};
    nlohmann::json aj;
    aj["id"] = cfg.attack.id;
    aj["variant"] = cfg.attack.variant;
    aj["users"] = cfg.attack.users;
    aj["providers"] = cfg.attack.providers;
    aj["collector"] = cfg.attack.collector;
    j["attack"] = aj;
    if (!cfg.collector_readings.empty()) j["collector_readings"] = cfg.collector_readings;
    if (!cfg.user_readings.empty()) j["user_readings"] = cfg.user_readings;
    return j.dump(2);
}

// ---- key material ----

namespace {

struct KeyMaterial {
    KeyRegistry reg;
    EncKeys collector_enc;
    SigKeys collector_sig;
    std::vector<EncKeys> user_enc;
    std::vector<SigKeys> user_sig;
    std::vector<EncKeys> provider_enc;
    std::vector<SigKeys> provider_sig;
};

Drbg scenario_root(uint64_t seed) {
    return Drbg("mixagg.scenario." + std::to_string(seed));
}

// Key generation dominates run time, so material is derived from the
// scenario seed alone and shared by every rep and attempt.
KeyMaterial& cached_keys(const ScenarioConfig& cfg) {
    static std::map<std::string, KeyMaterial> cache;
    std::string key = std::to_string(cfg.seed) + "/" + std::to_string(cfg.key_bits) + "/" +
                      std::to_string(cfg.n_users) + "/" + std::to_string(cfg.m_providers);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    KeyMaterial km;
    Drbg kg = scenario_root(cfg.seed).derive("keys");
    {
        Drbg c = kg.derive("collector");
        km.collector_enc = enc_keygen(cfg.key_bits, c);
        km.collector_sig = sig_keygen(c);
    }
    for (uint32_t jx = 0; jx < cfg.n_users; jx++) {
        Drbg u = kg.derive("user." + std::to_string(jx));
        km.user_enc.push_back(enc_keygen(cfg.key_bits, u));
        km.user_sig.push_back(sig_keygen(u));
    }
    for (uint32_t ix = 0; ix < cfg.m_providers; ix++) {
        Drbg pr = kg.derive("provider." + std::to_string(ix));
        km.provider_enc.push_back(enc_keygen(cfg.key_bits, pr));
        km.provider_sig.push_back(sig_keygen(pr));
    }
    km.reg.collector_enc = km.collector_enc.pub;
    km.reg.collector_sig = km.collector_sig.pk;
    for (const auto& k : km.user_enc) km.reg.user_enc.push_back(k.pub);
    for (const auto& k : km.user_sig) km.reg.user_sig.push_back(k.pk);
    for (const auto& k : km.provider_enc) km.reg.provider_enc.push_back(k.pub);
    for (const auto& k : km.provider_sig) km.reg.provider_sig.push_back(k.pk);
    return cache.emplace(key, std::move(km)).first->second;
}

// Secondary keys for the baseline's instances, cached the same way.
std::vector<std::vector<EncKeys>>& cached_baseline_keys(const ScenarioConfig& cfg) {
    static std::map<std::string, std::vector<std::vector<EncKeys>>> cache;
    std::string key = std::to_string(cfg.seed) + "/" + std::to_string(cfg.key_bits) + "/" +
                      std::to_string(cfg.n_users) + "/" + std::to_string(cfg.m_providers) + "/b";
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::vector<std::vector<EncKeys>> keys(cfg.m_providers);
    Drbg kg = scenario_root(cfg.seed).derive("baseline.secondary");
    for (uint32_t t = 0; t < cfg.m_providers; t++)
        for (uint32_t jx = 0; jx < cfg.n_users; jx++) {
            Drbg g = kg.derive(std::to_string(t) + "." + std::to_string(jx));
            keys[t].push_back(enc_keygen(cfg.key_bits, g));
        }
    return cache.emplace(key, std::move(keys)).first->second;
}

// ---- readings ----

void make_readings(const ScenarioConfig& cfg, std::vector<uint64_t>& d0,
                   std::vector<std::vector<uint64_t>>& ur) {
    const uint32_t n = cfg.n_users, m = cfg.m_providers;
    const uint64_t w = cfg.quantizer_width;
    const uint64_t bound =
        cfg.data_bytes >= 8 ? UINT64_MAX : ((uint64_t(1) << (8 * cfg.data_bytes)) - 1);
    if (!cfg.collector_readings.empty() || !cfg.user_readings.empty()) {
        if (cfg.collector_readings.size() != n) throw ConfigError("collector_readings size");
        if (cfg.user_readings.size() != n) throw ConfigError("user_readings size");
        for (const auto& row : cfg.user_readings)
            if (row.size() != m) throw ConfigError("user_readings row size");
        for (uint64_t v : cfg.collector_readings)
            if (v > bound) throw ConfigError("collector reading exceeds data width");
        d0 = cfg.collector_readings;
        ur = cfg.user_readings;
        return;
    }

    Drbg g = scenario_root(cfg.seed).derive("readings");
    uint64_t qmax = bound / w;
    if (qmax < n + 1) throw ConfigError("data width too small for distinct quantized values");

    // collector-side values arrive in pairs so no honest value is unique
    // after quantization
    uint32_t bases_needed = n / 2;
    std::set<uint64_t> used;
    std::vector<uint64_t> bases;
    uint64_t draw_span = std::min<uint64_t>(qmax - 1, 1'000'000'000);
    while (bases.size() < bases_needed) {
        uint64_t q = 1 + g.below(draw_span);
        if (used.insert(q).second) bases.push_back(q);
    }
    d0.assign(n, 0);
    for (uint32_t jx = 0; jx < n; jx++) {
        uint64_t q = bases[(jx / 2) % bases.size()];
        uint64_t jitter = w > 1 ? g.below(w) : 0;
        d0[jx] = q * w + jitter;
    }
    if (n % 2 == 1) d0[n - 1] = bases[0] * w + (w > 1 ? g.below(w) : 0);

    ur.assign(n, std::vector<uint64_t>(m, 0));
    uint64_t vspan = std::min<uint64_t>(bound, 1'000'000);
    for (uint32_t jx = 0; jx < n; jx++)
        for (uint32_t ix = 0; ix < m; ix++) ur[jx][ix] = g.below(vspan);
}

// ---- the bus ----

struct Flight {
    uint64_t deliver_ns = 0;
    uint32_t from_key = 0;
    uint64_t seq = 0;
    uint32_t level = 0;
    ActorId from, to;
    Envelope env;
    Bytes wire;
};

struct FlightLater {
    bool operator()(const Flight& a, const Flight& b) const {
        if (a.deliver_ns != b.deliver_ns) return a.deliver_ns > b.deliver_ns;
        if (a.from_key != b.from_key) return a.from_key > b.from_key;
        return a.seq > b.seq;
    }
};

struct BusResult {
    std::vector<BusRecord> log;
    std::map<uint32_t, Transcript> transcripts;
    std::vector<AbortSignal> signals;
    uint64_t elapsed_ns = 0;
    bool all_finished = false;
};

class Bus {
  public:
    Bus(const NetConfig& net, uint64_t sid) : net_(net), sid_(sid) {}

    void add(Actor* a) {
        actors_.push_back(a);
        by_id_[a->id.pack()] = a;
        Transcript& t = result_.transcripts[a->id.pack()];
        t.owner = a->id;
        t.sid = sid_;
        horizon_[a->id.pack()] = 0;
    }

    BusResult run() {
        for (Actor* a : actors_) dispatch(a, 0, a->start());

        uint32_t quiescence_passes = 0;
        while (true) {
            if (pq_.empty()) {
                if (!result_.signals.empty()) break;
                if (everyone_done()) {
                    result_.all_finished = true;
                    break;
                }
                if (++quiescence_passes > 8) {
                    result_.signals.push_back({AbortReason::Stalled, collector_id(), 0, {}});
                    break;
                }
                bool moved = false;
                for (Actor* a : actors_) {
                    auto outs = a->on_quiescence();
                    if (!outs.empty()) moved = true;
                    dispatch(a, result_.elapsed_ns, std::move(outs));
                }
                if (!moved) {
                    result_.signals.push_back({AbortReason::Stalled, collector_id(), 0, {}});
                    break;
                }
                continue;
            }

            Flight f = pq_.top();
            pq_.pop();
            result_.elapsed_ns = std::max(result_.elapsed_ns, f.deliver_ns);
            result_.log.push_back(
                {f.deliver_ns, f.level, f.from, f.to, f.env.kind, uint32_t(f.wire.size())});

            Actor* to = by_id_.at(f.to.pack());
            result_.transcripts[f.to.pack()].records.push_back(
                {false, f.deliver_ns, f.level, f.from, f.env.kind, f.wire});
            uint32_t& h = horizon_[f.to.pack()];
            h = std::max(h, f.level);
            dispatch(to, f.deliver_ns, to->on_message(f.env, f.from));
        }

        for (Actor* a : actors_) result_.transcripts[a->id.pack()].notes = a->notes;
        return std::move(result_);
    }

  private:
    bool everyone_done() const {
        for (const Actor* a : actors_)
            if (!a->finished()) return false;
        return true;
    }

    void dispatch(Actor* from, uint64_t now, std::vector<OutMsg> outs) {
        uint32_t level = horizon_[from->id.pack()] + 1;
        for (auto& m : outs) {
            Bytes wire = encode_envelope(m.env);
            Flight f;
            f.deliver_ns = now + net_.latency_ns +
                           uint64_t(wire.size()) * 8ull * 1'000'000'000ull / net_.bandwidth_bps;
            f.from_key = from->id.pack();
            f.seq = seq_++;
            f.level = level;
            f.from = from->id;
            f.to = m.to;
            result_.transcripts[from->id.pack()].records.push_back(
                {true, now, level, m.to, m.env.kind, wire});
            if (m.env.kind == MsgKind::AbortReport) note_abort(from->id, m.env);
            f.env = std::move(m.env);
            f.wire = std::move(wire);
            pq_.push(std::move(f));
        }
    }

    void note_abort(const ActorId& reporter, const Envelope& env) {
        for (const auto& s : result_.signals)
            if (s.reporter == reporter) return;  // one report per actor
        auto body = decode_abort(env.body);
        if (!body) return;
        result_.signals.push_back(
            {AbortReason(body->reason), reporter, body->detail, body->evidence});
    }

    NetConfig net_;
    uint64_t sid_;
    std::vector<Actor*> actors_;
    std::map<uint32_t, Actor*> by_id_;
    std::map<uint32_t, uint32_t> horizon_;
    std::priority_queue<Flight, std::vector<Flight>, FlightLater> pq_;
    uint64_t seq_ = 0;
    BusResult result_;
};

Metrics metrics_from(const BusResult& bus, const std::vector<Actor*>& actors) {
    Metrics m;
    std::set<uint32_t> user_levels;
    for (const auto& rec : bus.log) {
        m.system_msgs++;
        m.system_bytes += rec.wire_len;
        auto& ks = m.per_kind[uint16_t(rec.kind)];
        ks.msgs++;
        ks.bytes += rec.wire_len;
        auto& fs = m.actors[rec.from.pack()];
        fs.sent_msgs++;
        fs.sent_bytes += rec.wire_len;
        auto& ts = m.actors[rec.to.pack()];
        ts.recv_msgs++;
        ts.recv_bytes += rec.wire_len;
        m.total_rounds = std::max(m.total_rounds, rec.level);
        if (rec.to.kind == ActorKind::User || rec.from.kind == ActorKind::User)
            user_levels.insert(rec.level);
    }
    m.user_rounds = uint32_t(user_levels.size());
    m.elapsed_ns = bus.elapsed_ns;
    for (const Actor* a : actors) m.actors[a->id.pack()].ops = a->ops;
    return m;
}

// Most specific complaint wins; earlier report breaks ties.
int reason_rank(AbortReason r) {
    switch (r) {
        case AbortReason::BadSignature: return 1;
        case AbortReason::UndecryptableItem: return 2;
        case AbortReason::WrongParameters: return 3;
        case AbortReason::MalformedMessage: return 4;
        case AbortReason::SubmitCountHigh: return 5;
        case AbortReason::SubmitCountLow: return 6;
        case AbortReason::ChainCountMismatch: return 7;
        case AbortReason::DuplicateIndex: return 8;
        case AbortReason::MissingOwnEntry: return 9;
        case AbortReason::DigestMismatch: return 10;
        case AbortReason::UniqueRequestValue: return 11;
        case AbortReason::FalsifiedData: return 12;
        case AbortReason::OrphanIndex: return 13;
        case AbortReason::DsmCountHigh: return 14;
        case AbortReason::DsmCountLow: return 15;
        case AbortReason::AckInvalid: return 16;
        case AbortReason::ChainMissing: return 17;
        case AbortReason::BundleMissing: return 18;
        case AbortReason::AckMissing: return 19;
        case AbortReason::Stalled: return 20;
        case AbortReason::None: return 21;
    }
    return 21;
}

const AbortSignal& pick_signal(const std::vector<AbortSignal>& signals) {
    size_t best = 0;
    for (size_t i = 1; i < signals.size(); i++)
        if (reason_rank(signals[i].reason) < reason_rank(signals[best].reason)) best = i;
    return signals[best];
}

// ---- protocol attempt ----

struct Attempt {
    SessionParams params;
    BusResult bus;
    Metrics metrics;
    std::vector<CollectorActor::Tuple> tuples;
    std::optional<AbortSignal> signal;
};

Attempt run_attempt(const ScenarioConfig& cfg, const KeyMaterial& km,
                    const std::vector<uint64_t>& d0,
                    const std::vector<std::vector<uint64_t>>& ur, uint32_t rep,
                    uint32_t attempt) {
    Drbg root = scenario_root(cfg.seed)
                    .derive("rep." + std::to_string(rep))
                    .derive("attempt." + std::to_string(attempt));
    uint64_t sid = root.derive("sid").next_u64();
    Attempt a;
    a.params = derive_params(cfg, sid);

    std::vector<std::unique_ptr<UserActor>> users;
    std::optional<Drbg> shared =
        cfg.force_pn_collision && attempt == 0
            ? std::optional<Drbg>(root.derive("pn.shared"))
            : std::nullopt;
    for (uint16_t jx = 0; jx < cfg.n_users; jx++) {
        std::optional<Drbg> pn_override = jx < 2 ? shared : std::nullopt;
        users.push_back(make_user(cfg, jx, a.params, km.reg, km.user_enc[jx], km.user_sig[jx],
                                  ur[jx], root.derive("user." + std::to_string(jx)),
                                  pn_override));
    }

    ValidationHook hook;
    if (cfg.validation_hook == "truth") {
        std::vector<UserActor*> raw;
        for (auto& u : users) raw.push_back(u.get());
        auto readings = ur;
        hook = [raw, readings](const Bytes& pn, uint16_t provider, uint64_t value) {
            for (size_t jx = 0; jx < raw.size(); jx++)
                if (raw[jx]->pn() == pn) return value == readings[jx][provider];
            return true;
        };
    } else if (cfg.validation_hook != "none") {
        throw ConfigError("unknown validation hook: " + cfg.validation_hook);
    }

    auto collector = make_collector(cfg, a.params, km.reg, km.collector_enc, km.collector_sig,
                                    d0, hook, root.derive("collector"));
    std::vector<std::unique_ptr<ProviderActor>> providers;
    for (uint16_t ix = 0; ix < cfg.m_providers; ix++)
        providers.push_back(make_provider(cfg, ix, a.params, km.reg, km.provider_enc[ix],
                                          km.provider_sig[ix],
                                          root.derive("provider." + std::to_string(ix))));

    Bus bus(cfg.net, sid);
    std::vector<Actor*> all;
    bus.add(collector.get());
    all.push_back(collector.get());
    for (auto& u : users) {
        bus.add(u.get());
        all.push_back(u.get());
    }
    for (auto& pr : providers) {
        bus.add(pr.get());
        all.push_back(pr.get());
    }

    a.bus = bus.run();
    a.metrics = metrics_from(a.bus, all);
    a.tuples = collector->tuples();
    if (!a.bus.signals.empty()) a.signal = pick_signal(a.bus.signals);
    return a;
}

SessionOutcome finish_outcome(const ScenarioConfig& cfg, const KeyMaterial& km, Attempt&& a,
                              uint32_t restarts) {
    SessionOutcome out;
    out.restarts = restarts;
    out.sid = a.params.sid;
    out.params = a.params;
    out.metrics = std::move(a.metrics);
    out.metrics.restarts = restarts;
    out.tuples = std::move(a.tuples);
    out.bus_log = std::move(a.bus.log);
    out.evidence.params = a.params;
    out.evidence.keys = km.reg;
    out.evidence.transcripts = std::move(a.bus.transcripts);
    if (a.signal) {
        out.status = SessionStatus::Aborted;
        out.abort_reason = a.signal->reason;
        out.abort_reporter = a.signal->reporter;
        out.abort_detail = a.signal->detail;
        out.abort_evidence = a.signal->evidence;
        out.investigated = true;
        out.investigation = investigate(out.evidence, *a.signal);
    } else {
        out.status = restarts ? SessionStatus::Restarted : SessionStatus::Completed;
    }
    return out;
}

SessionOutcome run_baseline_session(const ScenarioConfig& cfg, uint32_t rep);

}  // namespace

SessionOutcome run_session(const ScenarioConfig& cfg, uint32_t rep) {
    (void)derive_params(cfg, 0);  // reject bad field values before any work
    check_attack_prerequisites(cfg);
    if (cfg.baseline) return run_baseline_session(cfg, rep);

    const KeyMaterial& km = cached_keys(cfg);
    std::vector<uint64_t> d0;
    std::vector<std::vector<uint64_t>> ur;
    make_readings(cfg, d0, ur);

    uint32_t restarts = 0;
    for (uint32_t attempt = 0;; attempt++) {
        Attempt a = run_attempt(cfg, km, d0, ur, rep, attempt);
        if (a.signal && a.signal->reason == AbortReason::DuplicateIndex && attempt < 3) {
            SessionEvidence ev;
            ev.params = a.params;
            ev.keys = km.reg;
            ev.transcripts = a.bus.transcripts;
            InvestigationReport rpt = investigate(ev, *a.signal);
            if (rpt.genuine_collision) {
                // fresh session id and fresh index draws, same readings
                restarts++;
                continue;
            }
        }
        return finish_outcome(cfg, km, std::move(a), restarts);
    }
}

std::vector<SessionOutcome> run_scenario(const ScenarioConfig& cfg) {
    std::vector<SessionOutcome> out;
    out.reserve(cfg.reps);
    for (uint32_t r = 0; r < cfg.reps; r++) out.push_back(run_session(cfg, r));
    return out;
}

// ---- baseline scheme ----

namespace {

Bytes mpz_blob(const mpz_class& z) {
    size_t len = (mpz_sizeinbase(z.get_mpz_t(), 2) + 7) / 8;
    Bytes out(len ? len : 1, 0);
    size_t count = 0;
    mpz_export(out.data(), &count, 1, 1, 1, 0, z.get_mpz_t());
    return out;
}

mpz_class blob_mpz(const Bytes& b) {
    mpz_class z;
    if (!b.empty()) mpz_import(z.get_mpz_t(), b.size(), 1, 1, 1, 0, b.data());
    return z;
}

Bytes instance_body(uint16_t t, const Bytes& payload) {
    Bytes b;
    put_u16(b, t);
    append(b, payload);
    return b;
}

std::optional<std::pair<uint16_t, Bytes>> split_instance(const Bytes& b) {
    if (b.size() < 2) return std::nullopt;
    uint16_t t = uint16_t(b[0]) << 8 | b[1];
    return std::make_pair(t, Bytes(b.begin() + 2, b.end()));
}

// One member of the comparison scheme: n members run m independent
// accountable shuffles, one per provider stream, each carrying the pair
// (collector value, provider value) for that stream.
class BMember : public Actor {
  public:
    BMember(uint16_t index, const SessionParams& p, const KeyRegistry& reg, EncKeys enc,
            SigKeys sig, std::vector<EncKeys> secondary,
            std::vector<std::pair<uint64_t, uint64_t>> pairs, Drbg stream)
        : index_(index), p_(p), reg_(reg), enc_(std::move(enc)), sig_(std::move(sig)),
          secondary_(std::move(secondary)), pairs_(std::move(pairs)), rng_(std::move(stream)) {
        id = user_id(index);
        const uint32_t T = p_.m_providers;
        pubs_.assign(T, std::vector<std::optional<EncPub>>(p_.n_users));
        submitted_.assign(T, false);
        inner_.assign(T, Bytes{});
        own_digest_.assign(T, Bytes{});
        gonogos_.assign(T, {});
        revealed_.assign(T, false);
        subs_.resize(T);
        batches_done_.assign(T, false);
    }

    bool finished() const override {
        if (aborted) return false;
        for (bool r : revealed_)
            if (!r) return false;
        return true;
    }

    std::vector<OutMsg> start() override {
        std::vector<OutMsg> out;
        for (uint16_t t = 0; t < p_.m_providers; t++) {
            pubs_[t][index_] = secondary_[t].pub;
            ops.sign++;
            Envelope env = wrap(sig_.sk, instance_body(t, encode_blob(encode_enc_pub(secondary_[t].pub))),
                                p_.sid, MsgKind::BKeyShare);
            for (uint16_t jx = 0; jx < p_.n_users; jx++)
                if (jx != index_) out.push_back({user_id(jx), env});
        }
        return out;
    }

    std::vector<OutMsg> on_message(const Envelope& env, const ActorId& from) override {
        if (aborted) return {};
        if (env.kind == MsgKind::AbortReport) {
            aborted = true;
            return {};
        }
        bool own = from == id;
        if (!own) {
            ops.verify++;
            if (validate(env, reg_.sig_pk(from), p_.sid) != Validity::Ok) {
                aborted = true;
                return {};
            }
        }
        auto split = split_instance(env.body);
        if (!split) {
            aborted = true;
            return {};
        }
        uint16_t t = split->first;
        if (t >= p_.m_providers) {
            aborted = true;
            return {};
        }
        const Bytes& payload = split->second;

        switch (env.kind) {
            case MsgKind::BKeyShare: {
                auto blob = decode_blob(payload);
                auto pub = blob ? decode_enc_pub(*blob) : std::nullopt;
                if (!pub) {
                    aborted = true;
                    return {};
                }
                pubs_[t][from.index] = *pub;
                return maybe_submit(t);
            }
            case MsgKind::BSubmit: {
                if (index_ + 1 != p_.n_users) return {};
                subs_[t][from.index] = payload;
                if (subs_[t].size() < p_.n_users) return {};
                std::vector<Bytes> batch;
                for (auto& [jx, ct] : subs_[t]) batch.push_back(ct);
                return process(t, batch);
            }
            case MsgKind::BForward: {
                if (from != user_id(uint16_t(index_ + 1))) return {};
                auto items = decode_cell_batch(frame_len(index_ + 1), payload);
                if (!items || items->size() != p_.n_users) {
                    aborted = true;
                    return {};
                }
                return process(t, *items);
            }
            case MsgKind::BFinal: {
                auto items = decode_cell_batch(2 * p_.cell_len, payload);
                if (!items || items->size() != p_.n_users) {
                    aborted = true;
                    return {};
                }
                bool mine = false;
                for (const auto& it : *items)
                    if (it == inner_[t]) mine = true;
                if (!mine) {
                    aborted = true;
                    return {};
                }
                ops.hash++;
                own_digest_[t] = sha256(payload);
                ops.sign++;
                Envelope g = wrap(sig_.sk, instance_body(t, encode_digest_share(own_digest_[t])),
                                  p_.sid, MsgKind::BGoNoGo);
                std::vector<OutMsg> out;
                for (uint16_t jx = 0; jx < p_.n_users; jx++)
                    if (jx != index_) out.push_back({user_id(jx), g});
                out.push_back({collector_id(), g});
                auto more = maybe_reveal(t);
                out.insert(out.end(), more.begin(), more.end());
                return out;
            }
            case MsgKind::BGoNoGo: {
                auto digest = decode_digest_share(payload);
                if (!digest) {
                    aborted = true;
                    return {};
                }
                // small frames overtake the big final broadcast, so a peer's
                // digest may land first; hold it until ours is ready
                gonogos_[t][from.index] = *digest;
                return maybe_reveal(t);
            }
            default:
                return {};
        }
    }

  private:
    std::vector<OutMsg> maybe_reveal(uint16_t t) {
        if (own_digest_[t].empty() || revealed_[t]) return {};
        if (gonogos_[t].size() + 1 < p_.n_users) return {};
        for (const auto& [jx, d] : gonogos_[t])
            if (d != own_digest_[t]) {
                aborted = true;
                return {};
            }
        ops.hash++;  // re-derive the digest before going
        revealed_[t] = true;
        ops.sign++;
        Envelope r = wrap(sig_.sk, instance_body(t, encode_blob(mpz_blob(secondary_[t].p))),
                          p_.sid, MsgKind::BKeyReveal);
        std::vector<OutMsg> out;
        for (uint16_t jx = 0; jx < p_.n_users; jx++)
            if (jx != index_) out.push_back({user_id(jx), r});
        out.push_back({collector_id(), r});
        return out;
    }

    size_t frame_len(uint32_t layers) const {
        return 2 * p_.cell_len + size_t(layers) * PAD_OVERHEAD;
    }

    std::vector<OutMsg> maybe_submit(uint16_t t) {
        for (const auto& pk : pubs_[t])
            if (!pk) return {};
        if (submitted_[t]) return {};
        submitted_[t] = true;

        Bytes frame = encode_value_cell(pairs_[t].first, p_);
        append(frame, encode_value_cell(pairs_[t].second, p_));
        for (uint16_t jx = 0; jx < p_.n_users; jx++) {
            ops.enc++;
            frame = regular_encrypt(*pubs_[t][jx], frame, "b.inner");
        }
        inner_[t] = frame;
        for (uint16_t jx = 0; jx < p_.n_users; jx++) {
            ops.enc_r++;
            frame = pad_encrypt(reg_.user_enc[jx], rng_.bytes(PAD_SEED_LEN), frame, "b.outer");
        }
        ops.sign++;
        Envelope env = wrap(sig_.sk, instance_body(t, frame), p_.sid, MsgKind::BSubmit);
        return {{user_id(uint16_t(p_.n_users - 1)), env}};
    }

    std::vector<OutMsg> process(uint16_t t, const std::vector<Bytes>& items) {
        if (batches_done_[t]) return {};
        batches_done_[t] = true;
        Drbg perm_rng = rng_.derive("perm." + std::to_string(t));
        std::vector<uint32_t> perm = random_permutation(perm_rng, uint32_t(items.size()));
        ops.shuffle++;
        std::vector<Bytes> out_items;
        size_t out_len = frame_len(index_);
        for (uint32_t k : perm) {
            ops.dec_r++;
            try {
                out_items.push_back(pad_decrypt(enc_, items[k], out_len, "b.outer"));
            } catch (const PaddingError&) {
                aborted = true;
                return {};
            }
        }
        Bytes body = instance_body(t, encode_cell_batch(out_items));
        ops.sign++;
        if (index_ > 0) {
            Envelope env = wrap(sig_.sk, body, p_.sid, MsgKind::BForward);
            return {{user_id(uint16_t(index_ - 1)), env}};
        }
        Envelope env = wrap(sig_.sk, body, p_.sid, MsgKind::BFinal);
        std::vector<OutMsg> out;
        for (uint16_t jx = 1; jx < p_.n_users; jx++) out.push_back({user_id(jx), env});
        out.push_back({collector_id(), env});
        // keep the broadcaster's own copy in play
        auto self = on_message(env, id);
        out.insert(out.end(), self.begin(), self.end());
        return out;
    }

    uint16_t index_;
    SessionParams p_;
    const KeyRegistry& reg_;
    EncKeys enc_;
    SigKeys sig_;
    std::vector<EncKeys> secondary_;
    std::vector<std::pair<uint64_t, uint64_t>> pairs_;
    Drbg rng_;

    std::vector<std::vector<std::optional<EncPub>>> pubs_;
    std::vector<bool> submitted_;
    std::vector<Bytes> inner_;
    std::vector<Bytes> own_digest_;
    std::vector<std::map<uint16_t, Bytes>> gonogos_;
    std::vector<bool> revealed_;
    std::vector<std::map<uint16_t, Bytes>> subs_;
    std::vector<bool> batches_done_;
};

class BCollector : public Actor {
  public:
    BCollector(const SessionParams& p, const KeyRegistry& reg, SigKeys sig)
        : p_(p), reg_(reg), sig_(std::move(sig)) {
        id = collector_id();
        finals_.resize(p_.m_providers);
        primes_.resize(p_.m_providers);
        decrypted_.assign(p_.m_providers, false);
    }

    bool finished() const override {
        if (aborted) return false;
        for (bool d : decrypted_)
            if (!d) return false;
        return true;
    }

    // the decrypted pair lists, one per instance; pairs cannot be linked
    // across instances, which is the baseline's structural limit
    const std::vector<std::vector<std::pair<uint64_t, uint64_t>>>& pair_lists() const {
        return pairs_;
    }

    std::vector<OutMsg> on_message(const Envelope& env, const ActorId& from) override {
        if (aborted) return {};
        if (env.kind == MsgKind::AbortReport) {
            aborted = true;
            return {};
        }
        ops.verify++;
        if (validate(env, reg_.sig_pk(from), p_.sid) != Validity::Ok) {
            aborted = true;
            return {};
        }
        auto split = split_instance(env.body);
        if (!split || split->first >= p_.m_providers) {
            aborted = true;
            return {};
        }
        uint16_t t = split->first;
        const Bytes& payload = split->second;

        if (env.kind == MsgKind::BFinal) {
            auto items = decode_cell_batch(2 * p_.cell_len, payload);
            if (!items || items->size() != p_.n_users) {
                aborted = true;
                return {};
            }
            finals_[t] = *items;
            if (primes_[t].size() == p_.n_users) strip(t);
            return {};
        }
        if (env.kind == MsgKind::BKeyReveal) {
            auto blob = decode_blob(payload);
            if (!blob) {
                aborted = true;
                return {};
            }
            primes_[t][from.index] = blob_mpz(*blob);
            if (primes_[t].size() == p_.n_users && !finals_[t].empty()) strip(t);
            return {};
        }
        return {};
    }

  private:
    void strip(uint16_t t) {
        std::vector<EncKeys> keys;
        for (uint16_t jx = 0; jx < p_.n_users; jx++) {
            // the key shares everyone saw during the session
            const EncPub* pub = shared_pubs_ ? &(*shared_pubs_)[t][jx] : nullptr;
            if (!pub) {
                aborted = true;
                return;
            }
            keys.push_back(enc_keys_from_prime(*pub, primes_[t][jx]));
        }
        pairs_.resize(p_.m_providers);
        for (const auto& item : finals_[t]) {
            Bytes cur = item;
            for (int jx = int(p_.n_users) - 1; jx >= 0; jx--) {
                ops.dec++;
                cur = regular_decrypt(keys[jx], cur, "b.inner");
            }
            Bytes d0(cur.begin(), cur.begin() + p_.cell_len);
            Bytes dt(cur.begin() + p_.cell_len, cur.end());
            auto v0 = decode_value_cell(d0, p_);
            auto vt = decode_value_cell(dt, p_);
            if (!v0 || !vt) {
                aborted = true;
                return;
            }
            pairs_[t].emplace_back(*v0, *vt);
        }
        decrypted_[t] = true;
    }

  public:
    // secondary public keys as broadcast during the run, supplied by the
    // harness wiring (the collector hears the key shares too in spirit;
    // routing them here would only add noise to the byte counts)
    void attach_pubs(const std::vector<std::vector<EncPub>>* pubs) { shared_pubs_ = pubs; }

  private:
    SessionParams p_;
    const KeyRegistry& reg_;
    SigKeys sig_;
    std::vector<std::vector<Bytes>> finals_;
    std::vector<std::map<uint16_t, mpz_class>> primes_;
    std::vector<bool> decrypted_;
    std::vector<std::vector<std::pair<uint64_t, uint64_t>>> pairs_;
    const std::vector<std::vector<EncPub>>* shared_pubs_ = nullptr;
};

SessionOutcome run_baseline_session(const ScenarioConfig& cfg, uint32_t rep) {
    if (cfg.attack.id != 0) throw ConfigError("the baseline scheme has no attack lab");
    const KeyMaterial& km = cached_keys(cfg);
    const auto& sec = cached_baseline_keys(cfg);
    std::vector<uint64_t> d0;
    std::vector<std::vector<uint64_t>> ur;
    make_readings(cfg, d0, ur);

    Drbg root = scenario_root(cfg.seed).derive("rep." + std::to_string(rep)).derive("baseline");
    uint64_t sid = root.derive("sid").next_u64();
    SessionParams params = derive_params(cfg, sid);

    std::vector<std::vector<EncPub>> sec_pubs(cfg.m_providers);
    for (uint32_t t = 0; t < cfg.m_providers; t++)
        for (uint32_t jx = 0; jx < cfg.n_users; jx++) sec_pubs[t].push_back(sec[t][jx].pub);

    std::vector<std::unique_ptr<BMember>> members;
    for (uint16_t jx = 0; jx < cfg.n_users; jx++) {
        std::vector<EncKeys> mine;
        for (uint32_t t = 0; t < cfg.m_providers; t++) mine.push_back(sec[t][jx]);
        std::vector<std::pair<uint64_t, uint64_t>> pairs;
        uint64_t w = cfg.quantizer_width;
        for (uint32_t t = 0; t < cfg.m_providers; t++)
            pairs.emplace_back(d0[jx] / w * w, ur[jx][t]);
        members.push_back(std::make_unique<BMember>(jx, params, km.reg, km.user_enc[jx],
                                                    km.user_sig[jx], std::move(mine),
                                                    std::move(pairs),
                                                    root.derive("member." + std::to_string(jx))));
    }
    auto coll = std::make_unique<BCollector>(params, km.reg, km.collector_sig);
    coll->attach_pubs(&sec_pubs);

    Bus bus(cfg.net, sid);
    std::vector<Actor*> all;
    bus.add(coll.get());
    all.push_back(coll.get());
    for (auto& mb : members) {
        bus.add(mb.get());
        all.push_back(mb.get());
    }

    BusResult br = bus.run();

    SessionOutcome out;
    out.sid = sid;
    out.params = params;
    out.metrics = metrics_from(br, all);
    out.bus_log = std::move(br.log);
    out.evidence.params = params;
    out.evidence.keys = km.reg;
    out.evidence.transcripts = std::move(br.transcripts);
    if (br.all_finished) {
        out.status = SessionStatus::Completed;
        out.baseline_pairs = coll->pair_lists();
    } else {
        out.status = SessionStatus::Aborted;
        out.abort_reason = br.signals.empty() ? AbortReason::Stalled : br.signals.front().reason;
    }
    return out;
}

}  // namespace

}  // namespace mixagg
