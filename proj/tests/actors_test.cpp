#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <set>

#include "doctest.h"
#include "mixagg/errors.hpp"
#include "mixagg/sim.hpp"

using namespace mixagg;

namespace {

ScenarioConfig honest(uint32_t n, uint32_t m, uint64_t seed = 1) {
    ScenarioConfig cfg;
    cfg.n_users = n;
    cfg.m_providers = m;
    cfg.seed = seed;
    return cfg;
}

// (request value, provider values) rows in a canonical order, so runs can be
// compared against the configured readings without knowing the shuffle.
std::vector<std::pair<uint64_t, std::vector<uint64_t>>> rows(const SessionOutcome& out) {
    std::vector<std::pair<uint64_t, std::vector<uint64_t>>> r;
    for (const auto& t : out.tuples) r.emplace_back(t.d0, t.values);
    std::sort(r.begin(), r.end());
    return r;
}

}  // namespace

TEST_CASE("an honest session reproduces every configured reading") {
    ScenarioConfig cfg = honest(4, 2);
    cfg.collector_readings = {100, 100, 200, 200};
    cfg.user_readings = {{1, 2}, {3, 4}, {5, 6}, {7, 8}};
    SessionOutcome out = run_session(cfg);

    REQUIRE(out.status == SessionStatus::Completed);
    CHECK(out.restarts == 0);
    CHECK(out.abort_reason == AbortReason::None);
    REQUIRE(out.tuples.size() == 4);

    // each user's provider values stay attached to that user's request value
    auto got = rows(out);
    decltype(got) want = {{100, {1, 2}}, {100, {3, 4}}, {200, {5, 6}}, {200, {7, 8}}};
    std::sort(want.begin(), want.end());
    CHECK(got == want);
}

TEST_CASE("request values are floored to the quantizer grid") {
    ScenarioConfig cfg = honest(4, 1);
    cfg.quantizer_width = 10;
    cfg.collector_readings = {105, 103, 227, 229};
    cfg.user_readings = {{11}, {12}, {13}, {14}};
    SessionOutcome out = run_session(cfg);

    REQUIRE(out.status == SessionStatus::Completed);
    auto got = rows(out);
    decltype(got) want = {{100, {11}}, {100, {12}}, {220, {13}}, {220, {14}}};
    std::sort(want.begin(), want.end());
    CHECK(got == want);
}

TEST_CASE("anonymous indexes are distinct and full width") {
    ScenarioConfig cfg = honest(5, 2, 7);
    cfg.collector_readings = {9, 9, 8, 8, 9};
    cfg.user_readings = {{1, 1}, {2, 2}, {3, 3}, {4, 4}, {5, 5}};
    SessionOutcome out = run_session(cfg);

    REQUIRE(out.status == SessionStatus::Completed);
    std::set<Bytes> seen;
    for (const auto& t : out.tuples) {
        CHECK(t.pn.size() == out.params.pn_bytes());
        seen.insert(t.pn);
    }
    CHECK(seen.size() == out.tuples.size());
}

TEST_CASE("per-user operation counts match the closed form") {
    for (uint32_t n : {2u, 3u, 4u, 6u}) {
        for (uint32_t m : {1u, 3u}) {
            CAPTURE(n);
            CAPTURE(m);
            SessionOutcome out = run_session(honest(n, m, 3));
            REQUIRE(out.status == SessionStatus::Completed);

            OpCounts modal = predict_comp_overhead(n, m);
            uint32_t exact = 0, first_proc = 0;
            for (uint16_t j = 0; j < n; j++) {
                OpCounts got = out.metrics.actors.at(user_id(j).pack()).ops;
                if (got == modal) {
                    exact++;
                    continue;
                }
                // the first processor verifies the other submissions too
                OpCounts adj = got;
                REQUIRE(adj.verify == modal.verify + (n - 2));
                adj.verify = modal.verify;
                CHECK(adj == modal);
                first_proc++;
            }
            if (n == 2) {
                CHECK(exact == n);  // no extra submissions to verify
            } else {
                CHECK(exact == n - 1);
                CHECK(first_proc == 1);
            }
        }
    }
}

TEST_CASE("round counts follow the pipeline depth") {
    for (uint32_t n : {3u, 5u}) {
        SessionOutcome out = run_session(honest(n, 2, 5));
        REQUIRE(out.status == SessionStatus::Completed);
        CHECK(out.metrics.total_rounds == predict_rounds_total(n));
        CHECK(out.metrics.user_rounds == predict_rounds_user(n));
        CHECK(out.metrics.total_rounds == n + 7);
        CHECK(out.metrics.user_rounds == n + 5);
    }
}

TEST_CASE("a unique request value stops the session before data flows") {
    ScenarioConfig cfg = honest(4, 2);
    cfg.collector_readings = {100, 100, 200, 300};  // 200 and 300 are singletons
    cfg.user_readings = {{1, 2}, {3, 4}, {5, 6}, {7, 8}};
    SessionOutcome out = run_session(cfg);

    CHECK(out.status == SessionStatus::Aborted);
    CHECK(out.abort_reason == AbortReason::UniqueRequestValue);
    CHECK(out.abort_reporter.kind == ActorKind::User);
    CHECK(out.tuples.empty());
    // no user handed its measurement to any provider
    CHECK(out.metrics.kind_msgs(MsgKind::DataSubmit) == 0);
}

TEST_CASE("the truth hook accepts honest submissions") {
    ScenarioConfig cfg = honest(3, 2, 11);
    cfg.validation_hook = "truth";
    SessionOutcome out = run_session(cfg);
    CHECK(out.status == SessionStatus::Completed);
    CHECK(out.tuples.size() == 3);
}

TEST_CASE("configuration errors are rejected up front") {
    ScenarioConfig cfg = honest(4, 2);
    cfg.quantizer_width = 0;
    CHECK_THROWS_AS((void)run_session(cfg), ConfigError);

    cfg = honest(4, 2);
    cfg.collector_readings = {1, 1};  // wrong size
    cfg.user_readings = {{1, 1}, {1, 1}, {1, 1}, {1, 1}};
    CHECK_THROWS_AS((void)run_session(cfg), ConfigError);

    cfg = honest(4, 2);
    cfg.data_bytes = 1;
    cfg.collector_readings = {300, 300, 1, 1};  // exceeds one byte
    cfg.user_readings = {{1, 1}, {1, 1}, {1, 1}, {1, 1}};
    CHECK_THROWS_AS((void)run_session(cfg), ConfigError);

    cfg = honest(4, 2);
    cfg.data_bytes = 1;
    cfg.quantizer_width = 64;  // only three distinct quantized values exist
    CHECK_THROWS_AS((void)run_session(cfg), ConfigError);
}
