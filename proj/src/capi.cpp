#include "mixagg.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include <nlohmann/json.hpp>

#include "mixagg/accountability.hpp"
#include "mixagg/adversary.hpp"
#include "mixagg/errors.hpp"
#include "mixagg/sim.hpp"

using nlohmann::json;
using namespace mixagg;

struct mixagg_scenario {
    ScenarioConfig cfg;
};

struct mixagg_result {
    ScenarioConfig cfg;
    std::vector<SessionOutcome> sessions;
};

namespace {

thread_local std::string g_error;

void set_error(const std::string& msg) { g_error = msg; }

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

template <typename F>
int guarded(F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        set_error(e.what());
        return MIXAGG_ERR_CONFIG;
    } catch (const std::exception& e) {
        set_error(e.what());
        return MIXAGG_ERR_INTERNAL;
    }
}

json params_json(const SessionParams& p) {
    return {{"sid", p.sid},         {"users", p.n_users},       {"providers", p.m_providers},
            {"data_bytes", p.data_bytes}, {"key_bits", p.key_bits}, {"index_bits", p.pn_bits},
            {"cell_len", p.cell_len}};
}

SessionParams params_from_json(const json& j) {
    SessionParams p;
    p.sid = j.at("sid").get<uint64_t>();
    p.n_users = j.at("users").get<uint32_t>();
    p.m_providers = j.at("providers").get<uint32_t>();
    p.data_bytes = j.at("data_bytes").get<uint32_t>();
    p.key_bits = j.at("key_bits").get<uint32_t>();
    p.pn_bits = j.at("index_bits").get<uint32_t>();
    p.cell_len = j.at("cell_len").get<uint32_t>();
    return p;
}

json keys_json(const KeyRegistry& reg) {
    json j;
    j["collector_enc"] = to_hex(encode_enc_pub(reg.collector_enc));
    j["collector_sig"] = to_hex(reg.collector_sig);
    json ue = json::array(), us = json::array(), pe = json::array(), ps = json::array();
    for (const auto& k : reg.user_enc) ue.push_back(to_hex(encode_enc_pub(k)));
    for (const auto& k : reg.user_sig) us.push_back(to_hex(k));
    for (const auto& k : reg.provider_enc) pe.push_back(to_hex(encode_enc_pub(k)));
    for (const auto& k : reg.provider_sig) ps.push_back(to_hex(k));
    j["user_enc"] = ue;
    j["user_sig"] = us;
    j["provider_enc"] = pe;
    j["provider_sig"] = ps;
    return j;
}

EncPub pub_from_hex(const std::string& h) {
    auto pub = decode_enc_pub(from_hex(h));
    if (!pub) throw ConfigError("bad public encryption key encoding");
    return *pub;
}

Bytes bytes_from_hex(const std::string& h) {
    Bytes b = from_hex(h);
    if (b.size() * 2 != h.size()) throw ConfigError("bad hex string in evidence");
    return b;
}

KeyRegistry keys_from_json(const json& j) {
    KeyRegistry reg;
    reg.collector_enc = pub_from_hex(j.at("collector_enc").get<std::string>());
    reg.collector_sig = bytes_from_hex(j.at("collector_sig").get<std::string>());
    for (const auto& s : j.at("user_enc")) reg.user_enc.push_back(pub_from_hex(s));
    for (const auto& s : j.at("user_sig")) reg.user_sig.push_back(bytes_from_hex(s));
    for (const auto& s : j.at("provider_enc")) reg.provider_enc.push_back(pub_from_hex(s));
    for (const auto& s : j.at("provider_sig")) reg.provider_sig.push_back(bytes_from_hex(s));
    return reg;
}

json ops_json(const OpCounts& o) {
    return {{"enc_r", o.enc_r}, {"enc", o.enc},       {"dec_r", o.dec_r}, {"dec", o.dec},
            {"sign", o.sign},   {"verify", o.verify}, {"hash", o.hash},   {"shuffle", o.shuffle}};
}

json metrics_json(const Metrics& m) {
    json j;
    j["system_bytes"] = m.system_bytes;
    j["system_msgs"] = m.system_msgs;
    j["total_rounds"] = m.total_rounds;
    j["user_rounds"] = m.user_rounds;
    j["elapsed_ns"] = m.elapsed_ns;
    j["restarts"] = m.restarts;
    json kinds = json::object();
    for (const auto& [k, ks] : m.per_kind)
        kinds[kind_name(MsgKind(k))] = {{"msgs", ks.msgs}, {"bytes", ks.bytes}};
    j["per_kind"] = kinds;
    json actors = json::array();
    for (const auto& [pack, st] : m.actors) {
        actors.push_back({{"actor", to_string(ActorId::unpack(pack))},
                          {"sent_msgs", st.sent_msgs},
                          {"sent_bytes", st.sent_bytes},
                          {"recv_msgs", st.recv_msgs},
                          {"recv_bytes", st.recv_bytes},
                          {"ops", ops_json(st.ops)}});
    }
    j["actors"] = actors;
    return j;
}

json prediction_json(const SessionParams& p, uint32_t providers) {
    CommShape proto = comm_shape(p, providers);
    CommShape base = baseline_comm_shape(p, providers);
    json j;
    j["protocol"] = {
        {"comm_total", predict_comm_overhead(proto)},
        {"comm_on_wire", predict_comm_overhead_exact(proto, PAD_OVERHEAD, p.ack_ct_len())},
        {"rounds_total", predict_rounds_total(p.n_users)},
        {"rounds_user", predict_rounds_user(p.n_users)},
        {"user_ops", ops_json(predict_comp_overhead(p.n_users, providers))}};
    j["baseline"] = {{"comm_total", predict_dissent_comm(base)},
                     {"rounds", predict_dissent_rounds(p.n_users)},
                     {"member_ops", ops_json(predict_dissent_user_ops(p.n_users, providers))}};
    return j;
}

json investigation_json(const InvestigationReport& rpt) {
    json j;
    j["attack_id"] = rpt.attack_id;
    j["genuine_collision"] = rpt.genuine_collision;
    json culprits = json::array(), packs = json::array();
    for (const auto& c : rpt.culprits) {
        culprits.push_back(to_string(c));
        packs.push_back(c.pack());
    }
    j["culprits"] = culprits;
    j["culprit_packs"] = packs;
    j["notes"] = rpt.notes;
    return j;
}

json outcome_json(const SessionOutcome& out, uint32_t rep) {
    json j;
    j["rep"] = rep;
    j["sid"] = out.sid;
    j["status"] = status_name(out.status);
    j["restarts"] = out.restarts;
    j["params"] = params_json(out.params);
    j["metrics"] = metrics_json(out.metrics);
    j["predicted"] = prediction_json(out.params, out.params.m_providers);
    json tuples = json::array();
    for (const auto& t : out.tuples) {
        tuples.push_back(
            {{"index", to_hex(t.pn)}, {"requested", t.d0}, {"values", t.values}});
    }
    j["tuples"] = tuples;
    if (!out.baseline_pairs.empty()) {
        json inst = json::array();
        for (const auto& list : out.baseline_pairs) {
            json rows = json::array();
            for (const auto& [a, b] : list) rows.push_back({a, b});
            inst.push_back(rows);
        }
        j["pairs"] = inst;
    }
    if (out.status == SessionStatus::Aborted) {
        json a;
        a["reason"] = abort_reason_name(out.abort_reason);
        a["reporter"] = to_string(out.abort_reporter);
        if (out.investigated) a["investigation"] = investigation_json(out.investigation);
        j["abort"] = a;
    }
    return j;
}

json evidence_json_of(const SessionOutcome& out) {
    json j;
    j["params"] = params_json(out.evidence.params);
    j["keys"] = keys_json(out.evidence.keys);
    json tr = json::object();
    for (const auto& [pack, t] : out.evidence.transcripts)
        tr[std::to_string(pack)] = to_hex(serialize_transcript(t));
    j["transcripts"] = tr;
    if (out.status == SessionStatus::Aborted) {
        j["signal"] = {{"reason", uint16_t(out.abort_reason)},
                       {"reporter", out.abort_reporter.pack()},
                       {"detail", out.abort_detail},
                       {"evidence", to_hex(out.abort_evidence)}};
    }
    return j;
}

}  // namespace

extern "C" {

const char* mixagg_version(void) { return "1.0.0"; }

const char* mixagg_last_error(void) { return g_error.c_str(); }

void mixagg_string_free(char* s) { std::free(s); }

int mixagg_scenario_parse(const char* text, mixagg_scenario** out) {
    if (!out) {
        set_error("null output pointer");
        return MIXAGG_ERR_ARG;
    }
    *out = nullptr;
    return guarded([&] {
        std::string body = text ? text : "";
        if (body.empty()) body = "{}";
        auto* s = new mixagg_scenario{scenario_from_json(body)};
        *out = s;
        return MIXAGG_OK;
    });
}

void mixagg_scenario_free(mixagg_scenario* s) { delete s; }

int mixagg_scenario_dump(const mixagg_scenario* s, char** json_out) {
    if (!s || !json_out) {
        set_error("null argument");
        return MIXAGG_ERR_ARG;
    }
    return guarded([&] {
        *json_out = dup_string(scenario_to_json(s->cfg));
        return MIXAGG_OK;
    });
}

int mixagg_predict(const mixagg_scenario* s, char** json_out) {
    if (!s || !json_out) {
        set_error("null argument");
        return MIXAGG_ERR_ARG;
    }
    return guarded([&] {
        SessionParams p = derive_params(s->cfg, 0);
        *json_out = dup_string(prediction_json(p, s->cfg.m_providers).dump(2));
        return MIXAGG_OK;
    });
}

int mixagg_run(const mixagg_scenario* s, mixagg_result** out) {
    if (!s || !out) {
        set_error("null argument");
        return MIXAGG_ERR_ARG;
    }
    *out = nullptr;
    return guarded([&] {
        auto* r = new mixagg_result{s->cfg, {}};
        try {
            r->sessions = run_scenario(s->cfg);
        } catch (...) {
            delete r;
            throw;
        }
        *out = r;
        return MIXAGG_OK;
    });
}

void mixagg_result_free(mixagg_result* r) { delete r; }

int mixagg_result_json(const mixagg_result* r, char** json_out) {
    if (!r || !json_out) {
        set_error("null argument");
        return MIXAGG_ERR_ARG;
    }
    return guarded([&] {
        json sessions = json::array();
        for (size_t i = 0; i < r->sessions.size(); i++)
            sessions.push_back(outcome_json(r->sessions[i], uint32_t(i)));
        json j;
        j["scenario"] = json::parse(scenario_to_json(r->cfg));
        j["sessions"] = sessions;
        *json_out = dup_string(j.dump(2));
        return MIXAGG_OK;
    });
}

size_t mixagg_result_sessions(const mixagg_result* r) { return r ? r->sessions.size() : 0; }

const char* mixagg_result_status(const mixagg_result* r, size_t i) {
    if (!r || i >= r->sessions.size()) return nullptr;
    return status_name(r->sessions[i].status);
}

int mixagg_result_evidence_json(const mixagg_result* r, size_t i, char** json_out) {
    if (!r || !json_out) {
        set_error("null argument");
        return MIXAGG_ERR_ARG;
    }
    if (i >= r->sessions.size()) {
        set_error("session index out of range");
        return MIXAGG_ERR_ARG;
    }
    return guarded([&] {
        *json_out = dup_string(evidence_json_of(r->sessions[i]).dump(2));
        return MIXAGG_OK;
    });
}

int mixagg_investigate(const char* evidence_text, char** report_out) {
    if (!evidence_text || !report_out) {
        set_error("null argument");
        return MIXAGG_ERR_ARG;
    }
    return guarded([&] {
        json j;
        try {
            j = json::parse(evidence_text);
        } catch (const json::exception& e) {
            throw ConfigError(std::string("evidence JSON: ") + e.what());
        }
        SessionEvidence ev;
        AbortSignal signal;
        try {
            ev.params = params_from_json(j.at("params"));
            ev.keys = keys_from_json(j.at("keys"));
            for (const auto& [key, val] : j.at("transcripts").items()) {
                auto t = parse_transcript(bytes_from_hex(val.get<std::string>()));
                if (!t) throw ConfigError("unparseable transcript for actor " + key);
                ev.transcripts[uint32_t(std::stoul(key))] = std::move(*t);
            }
            if (!j.contains("signal"))
                throw ConfigError("evidence carries no abort signal; nothing to investigate");
            const json& sj = j.at("signal");
            signal.reason = AbortReason(sj.at("reason").get<uint16_t>());
            signal.reporter = ActorId::unpack(sj.at("reporter").get<uint32_t>());
            signal.detail = sj.at("detail").get<uint32_t>();
            signal.evidence = bytes_from_hex(sj.at("evidence").get<std::string>());
        } catch (const json::exception& e) {
            throw ConfigError(std::string("evidence JSON: ") + e.what());
        }
        InvestigationReport rpt = investigate(ev, signal);
        *report_out = dup_string(investigation_json(rpt).dump(2));
        return MIXAGG_OK;
    });
}

}  // extern "C"
