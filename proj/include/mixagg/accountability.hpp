// Transcripts and the blame procedure.
//
// Every actor's view of a session is captured as a transcript: the raw
// envelopes it sent and received plus the values it logged while running
// (randomizer tags, index seeds, permutation seeds).  When a session
// aborts, the investigator collects transcripts and works out who cheated
// using nothing but those bytes and the public keys.  Signatures make the
// records non-repudiable: a forged record fails its signature check and
// convicts the transcript's owner instead.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mixagg/actors.hpp"
#include "mixagg/wire.hpp"

namespace mixagg {

struct TranscriptRecord {
    bool sent = false;  // direction relative to the owner
    uint64_t time_ns = 0;
    uint32_t level = 0;
    ActorId peer;  // destination when sent, origin when received
    MsgKind kind = MsgKind::AbortReport;
    Bytes wire;  // complete envelope encoding
};

struct Transcript {
    ActorId owner;
    uint64_t sid = 0;
    std::vector<TranscriptRecord> records;
    std::vector<std::pair<std::string, Bytes>> notes;

    const Bytes* find_note(const std::string& label) const;
};

Bytes serialize_transcript(const Transcript& t);
std::optional<Transcript> parse_transcript(const Bytes& b);

// Everything the investigator gets to see.  Only the public halves of the
// registry are consulted; no private key is needed to assign blame.
struct SessionEvidence {
    SessionParams params;
    KeyRegistry keys;
    std::map<uint32_t, Transcript> transcripts;  // ActorId::pack() -> transcript
};

// ---- shuffle replay ----

struct ProcessorFinding {
    ActorId processor;
    uint32_t inserted = 0;    // output components with no matching input
    uint32_t deleted = 0;     // input components never consumed
    uint32_t replicated = 0;  // input components consumed more than once
    bool clean() const { return inserted == 0 && deleted == 0 && replicated == 0; }
};

struct ShuffleReplay {
    bool complete = false;    // reached the final broadcast
    bool consistent = false;  // every evaluated processor came up clean
    std::vector<ProcessorFinding> findings;
    std::vector<ActorId> culprits;
    std::vector<MixItem> final_items;  // plaintext pairs from the final broadcast
    std::vector<std::string> log;
};

// Re-walks the shuffle chain backwards: each processor's output components
// are re-encrypted under the stripped layer's key with the tags the users
// logged, and matched against that processor's inputs.  Anything that does
// not line up names the processor that broke it.
ShuffleReplay replay_shuffle(const SessionEvidence& ev);

// ---- investigation ----

struct InvestigationReport {
    int attack_id = 0;  // adversary lab numbering; 0 when no known pattern fits
    bool genuine_collision = false;  // duplicate index was honest bad luck
    std::vector<ActorId> culprits;
    std::vector<std::string> notes;
};

InvestigationReport investigate(const SessionEvidence& ev, const AbortSignal& signal);

}  // namespace mixagg
