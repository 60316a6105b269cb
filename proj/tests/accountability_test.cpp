#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>

#include "doctest.h"
#include "mixagg/accountability.hpp"
#include "mixagg/sim.hpp"

using namespace mixagg;

namespace {

SessionOutcome honest_run() {
    ScenarioConfig cfg;
    cfg.n_users = 4;
    cfg.m_providers = 2;
    cfg.seed = 19;
    cfg.collector_readings = {100, 100, 200, 200};
    cfg.user_readings = {{1, 2}, {3, 4}, {5, 6}, {7, 8}};
    SessionOutcome out = run_session(cfg);
    REQUIRE(out.status == SessionStatus::Completed);
    return out;
}

}  // namespace

TEST_CASE("an empty transcript serializes to the documented header") {
    Transcript t;
    t.owner = user_id(3);
    t.sid = 0x0102030405060708ull;
    // magic, version, owner, session id, zero records, zero notes
    CHECK(to_hex(serialize_transcript(t)) ==
          "4d5854520001010003010203040506070800000000" "00000000");
}

TEST_CASE("transcripts round-trip through their byte form") {
    Transcript t;
    t.owner = provider_id(1);
    t.sid = 77;
    Drbg g("tr");
    t.records.push_back({true, 123456, 4, collector_id(), MsgKind::ProviderBundle, g.bytes(90)});
    t.records.push_back({false, 99, 2, user_id(2), MsgKind::DataSubmit, g.bytes(120)});
    t.records.push_back({false, 100, 3, user_id(0), MsgKind::DataSubmit, Bytes{}});
    t.notes.emplace_back("pn", g.bytes(2));
    t.notes.emplace_back("", Bytes{});  // empty label and value survive

    Bytes wire = serialize_transcript(t);
    auto back = parse_transcript(wire);
    REQUIRE(back);
    CHECK(back->owner == t.owner);
    CHECK(back->sid == t.sid);
    REQUIRE(back->records.size() == 3);
    CHECK(back->records[0].sent);
    CHECK(back->records[0].time_ns == 123456);
    CHECK(back->records[0].level == 4);
    CHECK(back->records[0].peer == collector_id());
    CHECK(back->records[0].kind == MsgKind::ProviderBundle);
    CHECK(back->records[0].wire == t.records[0].wire);
    CHECK(!back->records[1].sent);
    CHECK(back->records[2].wire.empty());
    REQUIRE(back->notes.size() == 2);
    CHECK(back->notes[0].first == "pn");
    CHECK(back->notes[0].second == t.notes[0].second);
    CHECK(serialize_transcript(*back) == wire);
}

TEST_CASE("parsing rejects wrong magic, truncation and trailing bytes") {
    Transcript t;
    t.owner = user_id(0);
    t.sid = 5;
    Drbg g("junk");
    t.records.push_back({true, 1, 1, user_id(1), MsgKind::Warn, g.bytes(30)});
    Bytes wire = serialize_transcript(t);

    Bytes bad = wire;
    bad[0] = 'X';
    CHECK(!parse_transcript(bad));
    bad = wire;
    bad[5] = 9;  // unknown version
    CHECK(!parse_transcript(bad));

    for (size_t cut : {size_t(0), size_t(3), size_t(10), wire.size() - 1}) {
        CHECK(!parse_transcript(Bytes(wire.begin(), wire.begin() + cut)));
    }
    Bytes padded = wire;
    padded.push_back(0);
    CHECK(!parse_transcript(padded));
    CHECK(!parse_transcript(g.bytes(200)));
}

TEST_CASE("find_note returns the first match or nothing") {
    Transcript t;
    t.notes.emplace_back("a", Bytes{1});
    t.notes.emplace_back("a", Bytes{2});
    REQUIRE(t.find_note("a"));
    CHECK(*t.find_note("a") == Bytes{1});
    CHECK(t.find_note("b") == nullptr);
}

TEST_CASE("real transcripts survive the byte round trip") {
    SessionOutcome out = honest_run();
    CHECK(out.evidence.transcripts.size() == 1 + 4 + 2);
    for (const auto& [key, t] : out.evidence.transcripts) {
        Bytes wire = serialize_transcript(t);
        auto back = parse_transcript(wire);
        REQUIRE(back);
        CHECK(back->owner == ActorId::unpack(key));
        CHECK(serialize_transcript(*back) == wire);
    }
}

TEST_CASE("replaying an honest shuffle explains every component") {
    SessionOutcome out = honest_run();
    ShuffleReplay rep = replay_shuffle(out.evidence);
    CHECK(rep.complete);
    CHECK(rep.consistent);
    CHECK(rep.culprits.empty());
    for (const auto& f : rep.findings) CHECK(f.clean());

    // the replayed final list carries exactly the published tuples
    REQUIRE(rep.final_items.size() == out.tuples.size());
    std::vector<std::pair<uint64_t, Bytes>> got, want;
    for (const auto& it : rep.final_items) {
        auto v = decode_value_cell(it.d0, out.params);
        REQUIRE(v);
        got.emplace_back(*v, index_from_cell(it.pn, out.params));
    }
    for (const auto& t : out.tuples) want.emplace_back(t.d0, t.pn);
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    CHECK(got == want);
}

TEST_CASE("withholding a transcript is itself convicting") {
    SessionOutcome out = honest_run();
    AbortSignal signal;
    signal.reason = AbortReason::DuplicateIndex;
    signal.reporter = user_id(0);

    SessionEvidence ev = out.evidence;
    ev.transcripts.erase(user_id(2).pack());
    InvestigationReport rpt = investigate(ev, signal);
    REQUIRE(rpt.culprits.size() == 1);
    CHECK(rpt.culprits[0] == user_id(2));
    bool noted = false;
    for (const auto& n : rpt.notes)
        if (n.find("withheld") != std::string::npos) noted = true;
    CHECK(noted);

    // a transcript for some other session counts as withheld too
    ev = out.evidence;
    ev.transcripts.at(provider_id(1).pack()).sid ^= 1;
    rpt = investigate(ev, signal);
    REQUIRE(rpt.culprits.size() == 1);
    CHECK(rpt.culprits[0] == provider_id(1));
}

TEST_CASE("an unsupported accusation falls back on the accuser") {
    SessionOutcome out = honest_run();
    AbortSignal signal;
    signal.reason = AbortReason::BadSignature;
    signal.reporter = user_id(1);
    signal.detail = user_id(2).pack();

    InvestigationReport rpt = investigate(out.evidence, signal);
    REQUIRE(rpt.culprits.size() == 1);
    CHECK(rpt.culprits[0] == user_id(1));
    CHECK(rpt.attack_id == 0);
}
