// End-to-end acceptance gate.  Each test case checks one promised property
// of the implementation and prints a single verdict line; tolerances and
// critical values are pinned right where they are used.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <gmpxx.h>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <set>

#include "doctest.h"
#include "mixagg/adversary.hpp"
#include "mixagg/sim.hpp"

using namespace mixagg;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void verdict(int num, bool ok, const std::string& detail) {
    std::printf("criterion %d: %s  %s\n", num, ok ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
}

ScenarioConfig honest(uint32_t n, uint32_t t, uint64_t seed) {
    ScenarioConfig cfg;
    cfg.n_users = n;
    cfg.m_providers = t;
    cfg.seed = seed;
    return cfg;
}

struct GridRun {
    uint32_t n = 0, t = 0;
    SessionOutcome ours, base;
};

// the shared size grid for the round and overhead checks
const std::vector<GridRun>& grid_runs() {
    static std::vector<GridRun> runs = [] {
        std::vector<GridRun> out;
        for (uint32_t n : {2u, 5u, 10u, 20u}) {
            for (uint32_t t : {1u, 3u}) {
                GridRun r;
                r.n = n;
                r.t = t;
                ScenarioConfig cfg = honest(n, t, 100 + n);
                r.ours = run_session(cfg);
                cfg.baseline = true;
                r.base = run_session(cfg);
                out.push_back(std::move(r));
            }
        }
        return out;
    }();
    return runs;
}

double per_user_bytes(const SessionOutcome& out) {
    uint64_t total = 0;
    for (uint16_t j = 0; j < out.params.n_users; j++) {
        const auto& st = out.metrics.actors.at(user_id(j).pack());
        total += st.sent_bytes + st.recv_bytes;
    }
    return double(total) / out.params.n_users;
}

// Item lengths as they actually crossed the wire: each submission carries one
// full onion, each chain hop carries the batch one layer thinner, so the
// distinct frame sizes recover X'_1 .. X'_n.
std::vector<uint64_t> measured_item_lengths(const SessionOutcome& out, bool& ok) {
    const uint32_t n = out.params.n_users;
    std::set<uint64_t> submit_bodies, fwd_bodies;
    for (const auto& r : out.bus_log) {
        uint64_t body = r.wire_len - ENVELOPE_OVERHEAD;
        if (r.kind == MsgKind::ShuffleSubmit) submit_bodies.insert(body);
        if (r.kind == MsgKind::ShuffleForward) fwd_bodies.insert(body);
    }
    ok = ok && submit_bodies.size() == 1;
    ok = ok && fwd_bodies.size() == n - 1;
    std::vector<uint64_t> items;
    for (uint64_t b : fwd_bodies) {
        ok = ok && b % n == 0;
        items.push_back(b / n);
    }
    items.push_back(*submit_bodies.begin());
    return items;
}

bool user_ops_match_prediction(const SessionOutcome& out, uint32_t n, uint32_t t) {
    OpCounts modal = predict_comp_overhead(n, t);
    uint32_t exact = 0, adjusted = 0;
    for (uint16_t j = 0; j < n; j++) {
        OpCounts got = out.metrics.actors.at(user_id(j).pack()).ops;
        if (got == modal) {
            exact++;
            continue;
        }
        // the first processor checks the other n-2 submissions as well
        if (got.verify != modal.verify + (n - 2)) return false;
        got.verify = modal.verify;
        if (!(got == modal)) return false;
        adjusted++;
    }
    return n == 2 ? exact == n : (exact == n - 1 && adjusted == 1);
}

// every anonymizing-phase frame a user saw, in delivery order
Bytes shuffle_phase_view(const SessionOutcome& out, uint16_t j, bool& ok) {
    Bytes all;
    auto it = out.evidence.transcripts.find(user_id(j).pack());
    if (it == out.evidence.transcripts.end()) {
        ok = false;
        return all;
    }
    for (const auto& r : it->second.records) {
        switch (r.kind) {
            case MsgKind::ShuffleSubmit:
            case MsgKind::ShuffleForward:
            case MsgKind::ShuffleFinal:
            case MsgKind::DigestShare: {
                all.push_back(r.sent ? 1 : 0);
                append(all, r.wire);
                break;
            }
            default:
                break;
        }
    }
    return all;
}

// exact two-sided p-value for k successes in n fair-coin trials
double binom_two_sided_p(uint64_t n, uint64_t k) {
    uint64_t lo = std::min(k, n - k);
    double ln_half_n = double(n) * std::log(0.5);
    double tail = 0;
    for (uint64_t i = 0; i <= lo; i++) {
        double lg = std::lgamma(double(n) + 1) - std::lgamma(double(i) + 1) -
                    std::lgamma(double(n - i) + 1) + ln_half_n;
        tail += std::exp(lg);
    }
    return std::min(1.0, 2 * tail);
}

// exact probability that n draws from a 2^bits space collide, as a rational
bool collision_within(uint32_t n, uint32_t bits, const mpq_class& threshold) {
    mpq_class ok(1);
    mpq_class space(mpz_class(1) << bits);
    for (uint32_t i = 1; i < n; i++) {
        mpq_class term(space - i);
        term /= space;
        ok *= term;
    }
    return mpq_class(1) - ok <= threshold;
}

std::string fmt(const char* pattern, ...) {
    char buf[512];
    va_list args;
    va_start(args, pattern);
    std::vsnprintf(buf, sizeof buf, pattern, args);
    va_end(args);
    return buf;
}

}  // namespace

TEST_CASE("round counts across the size grid") {
    auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    for (const auto& r : grid_runs()) {
        CAPTURE(r.n);
        CAPTURE(r.t);
        bool here = r.ours.status == SessionStatus::Completed &&
                    r.ours.metrics.total_rounds == r.n + 7 &&
                    r.ours.metrics.user_rounds == r.n + 5 &&
                    r.base.status == SessionStatus::Completed &&
                    r.base.metrics.user_rounds == r.n + 4;
        CHECK(here);
        ok = ok && here;
    }
    double secs = seconds_since(t0);
    bool in_budget = secs < 10.0;  // wall-clock budget for the whole grid
    CHECK(in_budget);
    ok = ok && in_budget;
    verdict(1, ok,
            fmt("rounds are N+7 total / N+5 user, baseline N+4, for N in {2,5,10,20} x T in "
                "{1,3} (%.1fs < 10s)",
                secs));
}

TEST_CASE("traffic and operation counts equal the closed forms") {
    bool ok = true;
    for (const auto& r : grid_runs()) {
        CAPTURE(r.n);
        CAPTURE(r.t);
        bool shapes = true;
        std::vector<uint64_t> items = measured_item_lengths(r.ours, shapes);
        CHECK(shapes);
        ok = ok && shapes;

        // the frames on the wire have exactly the declared geometry
        bool geometry = items.size() == size_t(r.n);
        for (uint32_t k = 1; k <= r.n && geometry; k++)
            geometry = items[k - 1] == r.ours.params.item_len(k);
        CHECK(geometry);
        ok = ok && geometry;

        // feed the measured item lengths back into the formula
        CommShape s = comm_shape(r.ours.params, r.t);
        s.item = items;
        uint64_t predicted =
            predict_comm_overhead_exact(s, PAD_OVERHEAD, r.ours.params.ack_ct_len());
        bool bytes_eq = r.ours.metrics.system_bytes == predicted;
        CHECK(bytes_eq);
        ok = ok && bytes_eq;

        bool ops_eq = user_ops_match_prediction(r.ours, r.n, r.t);
        CHECK(ops_eq);
        ok = ok && ops_eq;
    }
    verdict(2, ok,
            "measured bytes equal the corrected formula on measured frame sizes, and per-user "
            "operation counts equal the closed form, on the full grid");
}

TEST_CASE("provider count leaves the anonymizing phase untouched") {
    auto t0 = std::chrono::steady_clock::now();
    bool ok = true;

    std::vector<SessionOutcome> ours, base;
    for (uint32_t t = 1; t <= 5; t++) {
        ScenarioConfig cfg = honest(10, t, 7);
        cfg.data_bytes = 64;
        ours.push_back(run_session(cfg));
        cfg.baseline = true;
        base.push_back(run_session(cfg));
        bool done = ours.back().status == SessionStatus::Completed &&
                    base.back().status == SessionStatus::Completed;
        CHECK(done);
        ok = ok && done;
    }

    // the shuffle-phase frames each user sees are bit-identical across T
    bool identical = true;
    for (uint32_t t = 1; t < 5; t++)
        for (uint16_t j = 0; j < 10; j++)
            identical = identical &&
                        shuffle_phase_view(ours[0], j, ok) == shuffle_phase_view(ours[t], j, ok);
    CHECK(identical);
    ok = ok && identical;

    // baseline per-user traffic grows like the instance count
    double b1 = per_user_bytes(base[0]);
    bool growth = true;
    for (uint32_t t = 2; t <= 5; t++) {
        double g = per_user_bytes(base[t - 1]) / b1;
        growth = growth && g >= 0.8 * t && g <= 1.2 * t;
    }
    CHECK(growth);
    ok = ok && growth;

    double secs = seconds_since(t0);
    bool in_budget = secs < 120.0;
    CHECK(in_budget);
    ok = ok && in_budget;
    verdict(3, ok,
            fmt("shuffle-phase frames bit-identical for T in 1..5 at N=10/64-byte data; "
                "baseline per-user bytes grow within [0.8T, 1.2T] (%.1fs < 120s)",
                secs));
}

TEST_CASE("every attack is detected and attributed, never past the data handover") {
    bool ok = true;
    struct Case {
        int id;
        uint32_t variant;
        std::set<uint16_t> users;
        std::set<uint16_t> providers;
        bool collector;
    };
    const std::vector<Case> battery = {
        {1, 0, {2}, {}, false},  {1, 1, {1}, {}, false},  {2, 0, {2}, {}, false},
        {2, 1, {2}, {}, false},  {3, 0, {2}, {}, false},  {3, 1, {2}, {}, false},
        {4, 0, {2}, {}, false},  {4, 1, {2}, {}, false},  {5, 0, {}, {1}, false},
        {5, 1, {}, {1}, false},  {5, 2, {}, {1}, false},  {6, 0, {}, {1}, false},
        {6, 1, {}, {1}, false},  {7, 0, {3}, {}, false},  {8, 0, {3}, {}, false},
        {9, 0, {0}, {}, false},  {9, 1, {0}, {}, false},  {10, 0, {}, {}, true},
        {11, 0, {}, {1}, false}, {12, 0, {1}, {}, false},
    };

    uint32_t runs = 0, detected = 0, attributed = 0, clean = 0;
    for (const auto& c : battery) {
        for (uint64_t seed = 1; seed <= 20; seed++) {
            CAPTURE(c.id);
            CAPTURE(c.variant);
            CAPTURE(seed);
            ScenarioConfig cfg = honest(4, 2, seed);
            cfg.attack.id = c.id;
            cfg.attack.variant = c.variant;
            cfg.attack.users = c.users;
            cfg.attack.providers = c.providers;
            cfg.attack.collector = c.collector;
            if (c.id == 12) cfg.validation_hook = "truth";
            SessionOutcome out = run_session(cfg);
            runs++;

            bool det = out.status == SessionStatus::Aborted && out.investigated;
            CHECK(det);
            if (det) detected++;

            std::set<ActorId> injected;
            for (uint16_t u : c.users) injected.insert(user_id(u));
            for (uint16_t p : c.providers) injected.insert(provider_id(p));
            if (c.collector) injected.insert(collector_id());

            bool hit = false, innocent_accused = false;
            for (const auto& culprit : out.investigation.culprits) {
                if (injected.count(culprit))
                    hit = true;
                else
                    innocent_accused = true;
            }
            CHECK(hit);
            CHECK(!innocent_accused);
            if (hit) attributed++;
            if (!innocent_accused) clean++;

            // shuffle-stage frauds must abort before an honest user hands
            // its measurement to any provider
            if (c.id >= 7 && c.id <= 10) {
                bool none_sent = true;
                for (uint16_t j = 0; j < 4; j++) {
                    if (c.users.count(j)) continue;
                    auto it = out.evidence.transcripts.find(user_id(j).pack());
                    if (it == out.evidence.transcripts.end()) continue;
                    for (const auto& rec : it->second.records)
                        if (rec.sent && rec.kind == MsgKind::DataSubmit) none_sent = false;
                }
                CHECK(none_sent);
                ok = ok && none_sent;
            }
        }
    }
    ok = ok && detected == runs && attributed == runs && clean == runs;
    verdict(4, ok,
            fmt("%u/%u attack runs detected, attributed to the injected party, zero false "
                "accusations (attacks 1-12, 20 seeds each)",
                detected, runs));
}

TEST_CASE("anonymity holds statistically and breaks only under tag reuse") {
    auto t0 = std::chrono::steady_clock::now();
    bool ok = true;

    const uint32_t batches = 20, reps = 500, n = 4;
    const uint64_t total = uint64_t(batches) * reps;
    uint64_t counts[4][4] = {};
    uint64_t collusion_hits = 0, honest_crypto_links = 0, honest_sampled = 0;
    Drbg guesses("acceptance link guesses");

    for (uint32_t b = 0; b < batches; b++) {
        ScenarioConfig cfg = honest(n, 1, 6000 + b);
        cfg.reps = reps;
        std::vector<SessionOutcome> runs = run_scenario(cfg);
        for (const auto& out : runs) {
            bool finished = out.status != SessionStatus::Aborted && out.tuples.size() == n;
            CHECK(finished);
            ok = ok && finished;
            if (!finished) continue;

            // where did each user's index land in the published order?
            for (uint16_t j = 0; j < n; j++) {
                auto it = out.evidence.transcripts.find(user_id(j).pack());
                const Bytes* pn = it == out.evidence.transcripts.end()
                                      ? nullptr
                                      : it->second.find_note("pn");
                bool found = false;
                for (size_t pos = 0; pn && pos < out.tuples.size(); pos++) {
                    if (out.tuples[pos].pn == *pn) {
                        counts[j][pos]++;
                        found = true;
                        break;
                    }
                }
                ok = ok && found;
            }

            // the collector and all but one other user pool their knowledge
            ObserverSetup cabal;
            cabal.collector = true;
            cabal.colluding_users = {2, 3};
            LinkResult lr = infer_link(out, cabal, guesses);
            ok = ok && !lr.cryptographic && lr.honest_pool == 2;
            if (lr.correct) collusion_hits++;

            // a wire observer gets no cryptographic link on honest runs
            if (honest_sampled < 100) {
                honest_sampled++;
                ObserverSetup eaves;
                eaves.eavesdropper = true;
                LinkResult er = infer_link(out, eaves, guesses);
                if (er.cryptographic) honest_crypto_links++;
            }
        }
    }

    // chi-square over 4 positions, df 3: critical value 11.345 at the 0.01 level
    double worst_chi2 = 0;
    const double expected = double(total) / 4;
    for (uint16_t j = 0; j < n; j++) {
        double chi2 = 0;
        for (uint32_t pos = 0; pos < 4; pos++) {
            double d = double(counts[j][pos]) - expected;
            chi2 += d * d / expected;
        }
        worst_chi2 = std::max(worst_chi2, chi2);
    }
    bool uniform = worst_chi2 < 11.345;
    CHECK(uniform);
    ok = ok && uniform;

    // two candidates left: linking should succeed at coin-flip rate
    double pval = binom_two_sided_p(total, collusion_hits);
    bool chance = pval > 0.01;
    CHECK(chance);
    ok = ok && chance;

    bool no_free_link = honest_crypto_links == 0;
    CHECK(no_free_link);
    ok = ok && no_free_link;

    // reusing the submission randomizer flips linking from fail to succeed
    ScenarioConfig ablation = honest(n, 1, 9999);
    ablation.reps = 20;
    ablation.reuse_dsm_tags = true;
    uint32_t ablation_links = 0;
    for (const auto& out : run_scenario(ablation)) {
        ObserverSetup eaves;
        eaves.eavesdropper = true;
        LinkResult lr = infer_link(out, eaves, guesses);
        if (lr.cryptographic && lr.correct) ablation_links++;
    }
    bool flipped = ablation_links == 20;
    CHECK(flipped);
    ok = ok && flipped;

    double secs = seconds_since(t0);
    bool in_budget = secs < 300.0;
    CHECK(in_budget);
    ok = ok && in_budget;
    verdict(5, ok,
            fmt("positions uniform over %llu runs (worst chi2 %.2f < 11.345), collusion guesses "
                "at chance (%llu/%llu, p=%.3f), tag reuse links %u/20 vs %u/100 honest "
                "(%.0fs < 300s)",
                (unsigned long long)total, worst_chi2, (unsigned long long)collusion_hits,
                (unsigned long long)total, pval, ablation_links, honest_crypto_links, secs));
}

TEST_CASE("the index width is minimal for the collision budget") {
    bool ok = true;
    const uint32_t n = 10;
    const mpq_class budget(1, 1000);

    uint32_t bits = choose_index_bits(n, 1e-3);
    bool minimal = collision_within(n, bits, budget) && !collision_within(n, bits - 1, budget);
    CHECK(minimal);
    ok = ok && minimal;

    // simulate a million sessions' index draws at the chosen width
    Drbg g("collision trials");
    const uint64_t trials = 1'000'000;
    const uint64_t mask = (uint64_t(1) << bits) - 1;
    uint64_t collisions = 0;
    for (uint64_t i = 0; i < trials; i++) {
        uint64_t seen[n];
        bool hit = false;
        for (uint32_t j = 0; j < n; j++) {
            seen[j] = g.next_u64() & mask;
            for (uint32_t k = 0; k < j; k++)
                if (seen[k] == seen[j]) hit = true;
        }
        if (hit) collisions++;
    }
    double freq = double(collisions) / double(trials);
    bool under = freq <= 1.2e-3;  // threshold 1e-3 with 20% sampling headroom
    CHECK(under);
    ok = ok && under;

    verdict(6, ok,
            fmt("chosen width %u bits is the exact minimum for 10 users at 1e-3, observed "
                "collision rate %.2e <= 1.2e-3 over 1e6 trials",
                bits, freq));
}

TEST_CASE("timing claims are structural, not absolute") {
    bool ok = true;
    std::printf(
        "note: absolute wall-clock timings from the original evaluation are not reproduced "
        "here; the simulator clock is a latency-and-bandwidth model, so timing claims are "
        "checked structurally (growth and ordering) instead.\n");

    // cost metrics grow with the user count
    uint64_t prev_bytes = 0, prev_elapsed = 0;
    uint32_t prev_rounds = 0;
    for (uint32_t n : {2u, 5u, 10u, 20u}) {
        SessionOutcome out = run_session(honest(n, 1, 100 + n));
        bool grew = out.metrics.system_bytes > prev_bytes &&
                    out.metrics.total_rounds > prev_rounds &&
                    out.metrics.elapsed_ns > prev_elapsed;
        CHECK(grew);
        ok = ok && grew;
        prev_bytes = out.metrics.system_bytes;
        prev_rounds = out.metrics.total_rounds;
        prev_elapsed = out.metrics.elapsed_ns;
    }

    // the baseline's disadvantage widens with the provider count
    double prev_ratio = 0;
    for (uint32_t t : {1u, 3u, 5u}) {
        ScenarioConfig cfg = honest(4, t, 55);
        SessionOutcome ours = run_session(cfg);
        cfg.baseline = true;
        SessionOutcome base = run_session(cfg);
        double ratio = per_user_bytes(base) / per_user_bytes(ours);
        bool grew = ratio > prev_ratio;
        CHECK(grew);
        ok = ok && grew;
        prev_ratio = ratio;
    }

    verdict(7, ok,
            "bytes, rounds and simulated time all grow with N; the baseline-to-protocol cost "
            "ratio grows with T");
}
