// The adversary lab: one wired-in misbehaviour for every accountability
// check in the protocol, plus the observer analyses used to probe the
// anonymity claims.
#pragma once

#include <memory>

#include "mixagg/sim.hpp"

namespace mixagg {

// Throws ConfigError when the attack's cast does not satisfy its
// structural prerequisites (who must be compromised for the move to be
// executable at all).
void check_attack_prerequisites(const ScenarioConfig& cfg);

// Actor factories: honest actors unless the spec says this seat is
// compromised and the attack acts from it.
std::unique_ptr<CollectorActor> make_collector(const ScenarioConfig& cfg, const SessionParams& p,
                                               const KeyRegistry& reg, EncKeys enc, SigKeys sig,
                                               std::vector<uint64_t> readings, ValidationHook hook,
                                               Drbg stream);
std::unique_ptr<UserActor> make_user(const ScenarioConfig& cfg, uint16_t index,
                                     const SessionParams& p, const KeyRegistry& reg, EncKeys enc,
                                     SigKeys sig, std::vector<uint64_t> readings, Drbg stream,
                                     std::optional<Drbg> pn_override);
std::unique_ptr<ProviderActor> make_provider(const ScenarioConfig& cfg, uint16_t index,
                                             const SessionParams& p, const KeyRegistry& reg,
                                             EncKeys enc, SigKeys sig, Drbg stream);

// ---- observer analyses ----

// Who the observers are and what they pooled.
struct ObserverSetup {
    std::set<uint16_t> colluding_users;
    bool collector = false;
    bool eavesdropper = false;  // sees every wire frame and its endpoints
};

struct LinkResult {
    uint16_t target = 0;        // the honest user the observers try to link
    uint32_t honest_pool = 0;   // candidate indexes left after exclusions
    bool cryptographic = false; // linked by ciphertext equality, not chance
    Bytes guessed_pn;
    bool correct = false;
};

// Try to tie the target honest user to their anonymous index using only
// what the observers legitimately hold: their own logged tags, public
// keys, bundle contents seen by the collector, and (for the eavesdropper)
// the bus log.  Falls back to a uniform guess over the remaining pool.
LinkResult infer_link(const SessionOutcome& out, const ObserverSetup& obs, Drbg& guess_rng);

// Per-sender wire-length uniformity check over one session's bus log.
// Returns the users whose mix submissions stand out.
std::set<uint16_t> traffic_analysis(const SessionOutcome& out);

}  // namespace mixagg
