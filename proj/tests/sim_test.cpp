#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>

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

uint64_t user_bus_bytes(const SessionOutcome& out) {
    uint64_t total = 0;
    for (uint16_t j = 0; j < out.params.n_users; j++) {
        const auto& st = out.metrics.actors.at(user_id(j).pack());
        total += st.sent_bytes + st.recv_bytes;
    }
    return total;
}

}  // namespace

TEST_CASE("measured traffic equals the corrected closed form, byte for byte") {
    for (uint32_t n : {2u, 3u, 4u, 5u}) {
        for (uint32_t m : {1u, 2u, 3u}) {
            CAPTURE(n);
            CAPTURE(m);
            SessionOutcome out = run_session(honest(n, m, n * 10 + m));
            REQUIRE(out.status == SessionStatus::Completed);
            CommShape s = comm_shape(out.params, m);
            uint64_t predicted =
                predict_comm_overhead_exact(s, PAD_OVERHEAD, out.params.ack_ct_len());
            CHECK(out.metrics.system_bytes == predicted);
            // the affine form lands within a few percent of the wire
            double affine = double(predict_comm_overhead(s));
            CHECK(std::abs(affine - double(predicted)) / double(predicted) < 0.1);
        }
    }

    // wider payloads change the cell length, not the identity
    ScenarioConfig wide = honest(6, 2, 42);
    wide.data_bytes = 64;
    SessionOutcome out = run_session(wide);
    REQUIRE(out.status == SessionStatus::Completed);
    CommShape s = comm_shape(out.params, 2);
    CHECK(out.metrics.system_bytes ==
          predict_comm_overhead_exact(s, PAD_OVERHEAD, out.params.ack_ct_len()));
}

TEST_CASE("the affine estimate reproduces its worked example") {
    // two users, one provider, all primitive sizes set to one unit,
    // k-layer items of k units: the estimate collapses to 60 units
    CommShape s;
    s.n = 2;
    s.t = 1;
    s.cell = 1;
    s.hash = 1;
    s.sig = 1;
    s.hdr = 1;
    s.item = {1, 2};
    CHECK(predict_comm_overhead(s) == 60);
}

TEST_CASE("elapsed time scales with pipeline depth times latency") {
    ScenarioConfig cfg = honest(4, 2, 9);
    SessionOutcome base = run_session(cfg);
    REQUIRE(base.status == SessionStatus::Completed);

    ScenarioConfig slow = cfg;
    slow.net.latency_ns = cfg.net.latency_ns + 50'000'000;
    SessionOutcome slower = run_session(slow);
    REQUIRE(slower.status == SessionStatus::Completed);

    // identical traffic, one extra 50ms hop delay per causal level
    CHECK(slower.metrics.system_bytes == base.metrics.system_bytes);
    uint64_t depth = base.metrics.total_rounds;
    CHECK(slower.metrics.elapsed_ns - base.metrics.elapsed_ns == depth * 50'000'000ull);

    // halving bandwidth leaves rounds untouched
    ScenarioConfig thin = cfg;
    thin.net.bandwidth_bps = cfg.net.bandwidth_bps / 2;
    SessionOutcome thinner = run_session(thin);
    CHECK(thinner.metrics.total_rounds == base.metrics.total_rounds);
    CHECK(thinner.metrics.elapsed_ns > base.metrics.elapsed_ns);
}

TEST_CASE("runs replay exactly and reps vary only the randomness") {
    ScenarioConfig cfg = honest(4, 2, 123);
    SessionOutcome a = run_session(cfg);
    SessionOutcome b = run_session(cfg);
    CHECK(a.metrics.system_bytes == b.metrics.system_bytes);
    CHECK(a.metrics.elapsed_ns == b.metrics.elapsed_ns);
    CHECK(a.sid == b.sid);
    REQUIRE(a.tuples.size() == b.tuples.size());
    for (size_t i = 0; i < a.tuples.size(); i++) {
        CHECK(a.tuples[i].pn == b.tuples[i].pn);
        CHECK(a.tuples[i].d0 == b.tuples[i].d0);
        CHECK(a.tuples[i].values == b.tuples[i].values);
    }

    // a different rep draws fresh indexes over the same readings
    SessionOutcome c = run_session(cfg, 1);
    REQUIRE(c.status == SessionStatus::Completed);
    auto key = [](const SessionOutcome& o) {
        std::vector<std::pair<uint64_t, std::vector<uint64_t>>> v;
        for (const auto& t : o.tuples) v.emplace_back(t.d0, t.values);
        std::sort(v.begin(), v.end());
        return v;
    };
    CHECK(key(a) == key(c));
    std::vector<Bytes> pn_a, pn_c;
    for (const auto& t : a.tuples) pn_a.push_back(t.pn);
    for (const auto& t : c.tuples) pn_c.push_back(t.pn);
    std::sort(pn_a.begin(), pn_a.end());
    std::sort(pn_c.begin(), pn_c.end());
    CHECK(pn_a != pn_c);
}

TEST_CASE("an index collision restarts the session instead of killing it") {
    ScenarioConfig cfg = honest(4, 2, 31);
    cfg.force_pn_collision = true;
    SessionOutcome out = run_session(cfg);
    CHECK(out.status == SessionStatus::Restarted);
    CHECK(out.restarts == 1);
    CHECK(out.metrics.restarts == 1);
    CHECK(out.tuples.size() == 4);
    CHECK(out.abort_reason == AbortReason::None);

    // the replacement session uses a different id
    ScenarioConfig clean = honest(4, 2, 31);
    SessionOutcome ref = run_session(clean);
    CHECK(out.sid != ref.sid);
}

TEST_CASE("scenario json round-trips and rejects unknown keys") {
    ScenarioConfig cfg = honest(5, 3, 77);
    cfg.data_bytes = 16;
    cfg.quantizer_width = 10;
    cfg.validation_hook = "truth";
    cfg.attack.id = 4;
    cfg.attack.variant = 1;
    cfg.attack.providers = {1};
    cfg.oversize_submission[2] = 64;
    cfg.collector_readings = {1, 1, 2, 2, 1};
    cfg.user_readings = {{1, 2, 3}, {4, 5, 6}, {7, 8, 9}, {1, 1, 1}, {2, 2, 2}};

    std::string text = scenario_to_json(cfg);
    ScenarioConfig back = scenario_from_json(text);
    CHECK(back.n_users == cfg.n_users);
    CHECK(back.m_providers == cfg.m_providers);
    CHECK(back.data_bytes == cfg.data_bytes);
    CHECK(back.quantizer_width == cfg.quantizer_width);
    CHECK(back.seed == cfg.seed);
    CHECK(back.validation_hook == cfg.validation_hook);
    CHECK(back.attack.id == cfg.attack.id);
    CHECK(back.attack.variant == cfg.attack.variant);
    CHECK(back.attack.providers == cfg.attack.providers);
    CHECK(back.oversize_submission == cfg.oversize_submission);
    CHECK(back.collector_readings == cfg.collector_readings);
    CHECK(back.user_readings == cfg.user_readings);
    // serialization is canonical
    CHECK(scenario_to_json(back) == text);

    CHECK_THROWS_AS((void)scenario_from_json("{\"bogus\": 1}"), ConfigError);
    CHECK_THROWS_AS((void)scenario_from_json("not json"), ConfigError);
}

TEST_CASE("baseline runs finish in the expected depth and recover the pairs") {
    ScenarioConfig cfg = honest(3, 2, 13);
    cfg.baseline = true;
    cfg.collector_readings = {50, 50, 50};
    cfg.user_readings = {{11, 21}, {12, 22}, {13, 23}};
    SessionOutcome out = run_session(cfg);

    REQUIRE(out.status == SessionStatus::Completed);
    CHECK(out.metrics.user_rounds == predict_dissent_rounds(3));
    CHECK(out.metrics.user_rounds == 3 + 4);

    // one shuffle instance per provider, each recovering all (request, value)
    // pairs but nothing linking them across instances
    REQUIRE(out.baseline_pairs.size() == 2);
    for (uint32_t inst = 0; inst < 2; inst++) {
        auto pairs = out.baseline_pairs[inst];
        std::sort(pairs.begin(), pairs.end());
        std::vector<std::pair<uint64_t, uint64_t>> want;
        for (uint32_t j = 0; j < 3; j++)
            want.emplace_back(cfg.collector_readings[j], cfg.user_readings[j][inst]);
        std::sort(want.begin(), want.end());
        CHECK(pairs == want);
    }
    CHECK(out.tuples.empty());
}

TEST_CASE("the baseline costs more and the gap widens with providers") {
    ScenarioConfig ours1 = honest(4, 1, 17);
    ScenarioConfig base1 = ours1;
    base1.baseline = true;
    uint64_t u1 = user_bus_bytes(run_session(ours1));
    uint64_t b1 = user_bus_bytes(run_session(base1));
    double r1 = double(b1) / double(u1);
    CHECK(r1 >= 0.8);
    CHECK(r1 <= 1.5);

    ScenarioConfig ours5 = honest(4, 5, 17);
    ScenarioConfig base5 = ours5;
    base5.baseline = true;
    uint64_t u5 = user_bus_bytes(run_session(ours5));
    uint64_t b5 = user_bus_bytes(run_session(base5));
    double r5 = double(b5) / double(u5);
    CHECK(r5 >= 3.5);
    CHECK(r5 <= 6.5);
    CHECK(r5 > r1);
}

TEST_CASE("shuffle traffic does not depend on the provider count") {
    auto phase_bytes = [](const SessionOutcome& out) {
        return out.metrics.kind_bytes(MsgKind::DataRequest) +
               out.metrics.kind_bytes(MsgKind::ShuffleSubmit) +
               out.metrics.kind_bytes(MsgKind::ShuffleForward) +
               out.metrics.kind_bytes(MsgKind::ShuffleFinal) +
               out.metrics.kind_bytes(MsgKind::DigestShare);
    };
    SessionOutcome one = run_session(honest(5, 1, 21));
    SessionOutcome three = run_session(honest(5, 3, 21));
    REQUIRE(one.status == SessionStatus::Completed);
    REQUIRE(three.status == SessionStatus::Completed);
    CHECK(phase_bytes(one) == phase_bytes(three));
    CHECK(one.metrics.shuffle_bytes() == three.metrics.shuffle_bytes());
}
