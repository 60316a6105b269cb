#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>

#include "doctest.h"
#include "mixagg/adversary.hpp"
#include "mixagg/errors.hpp"
#include "mixagg/sim.hpp"

using namespace mixagg;

namespace {

ScenarioConfig lab(int id, uint32_t variant = 0) {
    ScenarioConfig cfg;
    cfg.n_users = 4;
    cfg.m_providers = 2;
    cfg.seed = 11;
    cfg.attack.id = id;
    cfg.attack.variant = variant;
    return cfg;
}

}  // namespace

TEST_CASE("every catalogued misbehaviour is detected and pinned on its author") {
    struct Case {
        int id;
        uint32_t variant;
        std::set<uint16_t> users;
        std::set<uint16_t> providers;
        bool collector;
        AbortReason reason;
        ActorId culprit;
    };
    const std::vector<Case> battery = {
        {1, 0, {2}, {}, false, AbortReason::UndecryptableItem, user_id(2)},
        {1, 1, {1}, {}, false, AbortReason::BadSignature, user_id(1)},
        {2, 0, {2}, {}, false, AbortReason::SubmitCountLow, user_id(2)},
        {2, 1, {2}, {}, false, AbortReason::SubmitCountHigh, user_id(2)},
        {3, 0, {2}, {}, false, AbortReason::ChainCountMismatch, user_id(2)},
        {3, 1, {2}, {}, false, AbortReason::ChainCountMismatch, user_id(2)},
        {4, 0, {2}, {}, false, AbortReason::DsmCountLow, user_id(2)},
        {4, 1, {2}, {}, false, AbortReason::DsmCountHigh, user_id(2)},
        {5, 0, {}, {1}, false, AbortReason::UndecryptableItem, provider_id(1)},
        {5, 1, {}, {1}, false, AbortReason::AckInvalid, provider_id(1)},
        {5, 2, {}, {1}, false, AbortReason::AckInvalid, provider_id(1)},
        {6, 0, {}, {1}, false, AbortReason::DsmCountLow, provider_id(1)},
        {6, 1, {}, {1}, false, AbortReason::DsmCountHigh, provider_id(1)},
        {7, 0, {3}, {}, false, AbortReason::DuplicateIndex, user_id(3)},
        {8, 0, {3}, {}, false, AbortReason::MissingOwnEntry, user_id(3)},
        {9, 0, {0}, {}, false, AbortReason::DigestMismatch, user_id(0)},
        {9, 1, {0}, {}, false, AbortReason::DigestMismatch, user_id(0)},
        {10, 0, {}, {}, true, AbortReason::UniqueRequestValue, collector_id()},
        {11, 0, {}, {1}, false, AbortReason::AckInvalid, provider_id(1)},
        {12, 0, {1}, {}, false, AbortReason::FalsifiedData, user_id(1)},
    };

    for (const auto& c : battery) {
        CAPTURE(c.id);
        CAPTURE(c.variant);
        ScenarioConfig cfg = lab(c.id, c.variant);
        cfg.attack.users = c.users;
        cfg.attack.providers = c.providers;
        cfg.attack.collector = c.collector;
        if (c.id == 12) cfg.validation_hook = "truth";

        SessionOutcome out = run_session(cfg);
        CHECK(out.status == SessionStatus::Aborted);
        CHECK(out.restarts == 0);
        CHECK(out.abort_reason == c.reason);
        REQUIRE(out.investigated);
        CHECK(out.investigation.attack_id == c.id);
        REQUIRE(out.investigation.culprits.size() == 1);
        CHECK(out.investigation.culprits[0] == c.culprit);

        // shuffle-stage frauds must die before anyone hands over data
        if (c.id >= 7 && c.id <= 10) {
            CHECK(out.metrics.kind_msgs(MsgKind::DataSubmit) == 0);
        }
    }
}

TEST_CASE("a forged duplicate index is not mistaken for bad luck") {
    ScenarioConfig cfg = lab(7);
    cfg.attack.users = {3};
    SessionOutcome out = run_session(cfg);
    CHECK(out.status == SessionStatus::Aborted);
    CHECK(!out.investigation.genuine_collision);
    CHECK(out.restarts == 0);
}

TEST_CASE("structural prerequisites are enforced before any run") {
    // a cast without an attack, and an attack without a cast
    ScenarioConfig cfg = lab(0);
    cfg.attack.users = {1};
    CHECK_THROWS_AS((void)run_session(cfg), ConfigError);
    CHECK_THROWS_AS((void)run_session(lab(1)), ConfigError);

    cfg = lab(13);
    cfg.attack.users = {1};
    CHECK_THROWS_AS((void)run_session(cfg), ConfigError);

    cfg = lab(1);
    cfg.attack.users = {9};  // out of range
    CHECK_THROWS_AS((void)run_session(cfg), ConfigError);

    // the baseline has no attack hooks
    cfg = lab(1);
    cfg.attack.users = {1};
    cfg.baseline = true;
    CHECK_THROWS_AS((void)run_session(cfg), ConfigError);

    // seat-specific moves reject the wrong seat
    cfg = lab(1, 1);
    cfg.attack.users = {3};  // the first processor is never signature-checked
    CHECK_THROWS_AS((void)run_session(cfg), ConfigError);
    cfg = lab(7);
    cfg.attack.users = {1};  // belongs to the first processor (highest index)
    CHECK_THROWS_AS((void)run_session(cfg), ConfigError);
    cfg = lab(9);
    cfg.attack.users = {1};  // belongs to the last processor (user 0)
    CHECK_THROWS_AS((void)run_session(cfg), ConfigError);
    cfg = lab(10);
    CHECK_THROWS_AS((void)run_session(cfg), ConfigError);  // collector not flagged
    cfg = lab(5, 3);
    cfg.attack.providers = {1};
    CHECK_THROWS_AS((void)run_session(cfg), ConfigError);  // no such variant

    // a lie is only observable against ground truth
    cfg = lab(12);
    cfg.attack.users = {1};
    CHECK_THROWS_AS((void)run_session(cfg), ConfigError);
}

TEST_CASE("observers without a crypto edge guess at chance level") {
    ScenarioConfig cfg;
    cfg.n_users = 4;
    cfg.m_providers = 2;
    cfg.seed = 101;
    cfg.reps = 200;
    std::vector<SessionOutcome> runs = run_scenario(cfg);
    REQUIRE(runs.size() == 200);

    Drbg guesses("link guesses");
    uint32_t eaves_hits = 0, collude_hits = 0;
    for (const auto& out : runs) {
        // a rare genuine index collision restarts and still finishes
        REQUIRE(out.status != SessionStatus::Aborted);

        // a wire observer sees everything but holds no keys
        ObserverSetup eaves;
        eaves.eavesdropper = true;
        LinkResult r = infer_link(out, eaves, guesses);
        CHECK(!r.cryptographic);
        CHECK(r.honest_pool == 4);
        CHECK(r.target == 0);
        if (r.correct) eaves_hits++;

        // the collector plus all but one other user: two candidates left
        ObserverSetup cabal;
        cabal.collector = true;
        cabal.colluding_users = {2, 3};
        LinkResult rc = infer_link(out, cabal, guesses);
        CHECK(!rc.cryptographic);
        CHECK(rc.honest_pool == 2);
        if (rc.correct) collude_hits++;
    }

    // 200 Bernoulli trials at 1/4 and 1/2; four sigma each way
    CHECK(eaves_hits >= 25);
    CHECK(eaves_hits <= 75);
    CHECK(collude_hits >= 72);
    CHECK(collude_hits <= 128);
}

TEST_CASE("reused submission randomizers let a wire observer link exactly") {
    ScenarioConfig cfg;
    cfg.n_users = 4;
    cfg.m_providers = 2;
    cfg.seed = 202;
    cfg.reps = 20;
    cfg.reuse_dsm_tags = true;
    std::vector<SessionOutcome> runs = run_scenario(cfg);

    Drbg guesses("ablation guesses");
    for (const auto& out : runs) {
        REQUIRE(out.status != SessionStatus::Aborted);
        ObserverSetup eaves;
        eaves.eavesdropper = true;
        LinkResult r = infer_link(out, eaves, guesses);
        CHECK(r.cryptographic);
        CHECK(r.correct);
    }
}

TEST_CASE("wire lengths are uniform unless a submission is oversized") {
    ScenarioConfig cfg;
    cfg.n_users = 4;
    cfg.m_providers = 2;
    cfg.seed = 33;
    SessionOutcome honest = run_session(cfg);
    CHECK(traffic_analysis(honest).empty());

    cfg.oversize_submission[1] = 64;
    SessionOutcome out = run_session(cfg);
    CHECK(out.status == SessionStatus::Aborted);
    CHECK(out.abort_reason == AbortReason::MalformedMessage);
    std::set<uint16_t> flagged = traffic_analysis(out);
    CHECK(flagged == std::set<uint16_t>{1});
    REQUIRE(out.investigated);
    REQUIRE(out.investigation.culprits.size() == 1);
    CHECK(out.investigation.culprits[0] == user_id(1));
}
