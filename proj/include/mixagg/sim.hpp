// Scenario configuration and the deterministic message-bus simulator.
//
// One session is an event loop over a priority queue of in-flight
// envelopes.  Delivery time is send time plus a fixed latency plus a
// serialization delay proportional to wire length; ties break on sender
// then sequence number so runs replay exactly.  Causal levels double as
// round counters: a message carries level one past the deepest level its
// sender had consumed, and the round metrics fall out of the bus log.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mixagg/accountability.hpp"
#include "mixagg/actors.hpp"
#include "mixagg/metrics.hpp"
#include "mixagg/predict.hpp"

namespace mixagg {

struct NetConfig {
    uint64_t bandwidth_bps = 5'000'000;  // serialization rate
    uint64_t latency_ns = 100'000'000;   // per-hop propagation delay
};

// Which corruption to wire in, and who carries it out.  Numbering matches
// the adversary lab's catalogue; 0 is an honest run.
struct AttackSpec {
    int id = 0;
    uint32_t variant = 0;
    std::set<uint16_t> users;
    std::set<uint16_t> providers;
    bool collector = false;
};

struct ScenarioConfig {
    uint32_t n_users = 4;
    uint32_t m_providers = 2;
    uint32_t data_bytes = 8;
    uint32_t key_bits = 512;
    double collision_threshold = 1e-3;
    uint64_t quantizer_width = 1;
    uint64_t seed = 1;
    uint32_t reps = 1;
    bool baseline = false;                 // run the comparison scheme instead
    std::string validation_hook = "none";  // none | truth
    bool force_pn_collision = false;       // two users draw from the same index stream
    bool reuse_dsm_tags = false;           // ablation: publicly known submission tags
    std::map<uint16_t, uint32_t> oversize_submission;  // user -> extra bytes (misconfig)
    NetConfig net;
    AttackSpec attack;
    std::vector<uint64_t> collector_readings;          // optional preset, size n
    std::vector<std::vector<uint64_t>> user_readings;  // optional preset, n x m
};

ScenarioConfig scenario_from_json(const std::string& text);
std::string scenario_to_json(const ScenarioConfig& cfg);

struct BusRecord {
    uint64_t time_ns = 0;  // delivery time
    uint32_t level = 0;
    ActorId from, to;
    MsgKind kind = MsgKind::AbortReport;
    uint32_t wire_len = 0;
};

enum class SessionStatus { Completed, Restarted, Aborted };
const char* status_name(SessionStatus s);

struct SessionOutcome {
    SessionStatus status = SessionStatus::Aborted;
    uint32_t restarts = 0;
    AbortReason abort_reason = AbortReason::None;
    ActorId abort_reporter;
    uint32_t abort_detail = 0;
    Bytes abort_evidence;
    bool investigated = false;
    InvestigationReport investigation;
    uint64_t sid = 0;
    SessionParams params;
    Metrics metrics;
    std::vector<CollectorActor::Tuple> tuples;
    // baseline runs: decrypted (requested, provider) pairs per instance
    std::vector<std::vector<std::pair<uint64_t, uint64_t>>> baseline_pairs;
    SessionEvidence evidence;  // transcripts of the final attempt
    std::vector<BusRecord> bus_log;
};

// Wire-level coordinates of a session, sid included.
SessionParams derive_params(const ScenarioConfig& cfg, uint64_t sid);

// Formula inputs matching what the simulator will put on the wire.
CommShape comm_shape(const SessionParams& p, uint32_t providers);
CommShape baseline_comm_shape(const SessionParams& p, uint32_t providers);

// Runs one session (rep selects the randomness stream), restarting on a
// genuine index collision up to three times.
SessionOutcome run_session(const ScenarioConfig& cfg, uint32_t rep = 0);

// Runs cfg.reps sessions.
std::vector<SessionOutcome> run_scenario(const ScenarioConfig& cfg);

}  // namespace mixagg
