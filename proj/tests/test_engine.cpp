#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <thread>

#include "lccdb/trainer.hpp"
#include "lccdb/workloads.hpp"
#include "support.hpp"

using namespace lccdb;
using namespace std::chrono_literals;

namespace {

TpccParams small_tpcc() {
    TpccParams p;
    p.customers_per_district = 50;
    p.items = 500;
    return p;
}

MicrobenchParams small_micro() {
    MicrobenchParams p;
    p.theta = 1.0;
    p.hot_keys = 512;
    p.low_keys = 20000;
    p.unique_keys = 2000;
    return p;
}

}  // namespace

TEST_CASE("single thread without contention never aborts") {
    EngineConfig cfg;
    cfg.threads = 1;
    cfg.collect_log = true;
    Engine eng(make_tpcc_lite(small_tpcc()), cfg);
    eng.set_policy(seed_policy(*tpcc_lite_schema(), SeedKind::Occ));
    eng.start(300);
    while (eng.counters().committed < 300) std::this_thread::yield();
    eng.stop();
    auto c = eng.counters();
    CHECK(c.committed == 300);
    CHECK(c.aborted_attempts == 0);
    CHECK(c.gave_up == 0);
    auto log = eng.drain_log();
    CHECK(log.size() == 300);
    auto v = check_serializable(log);
    CHECK(v.ok);
    CHECK(commit_order_respected(log, build_serialization_graph(log)));
}

TEST_CASE("count-based run commits exactly the generated mix per worker") {
    EngineConfig cfg;
    cfg.threads = 2;
    cfg.rng_seed = 5;
    Engine eng(make_tpcc_lite(small_tpcc()), cfg);
    eng.set_policy(seed_policy(*tpcc_lite_schema(), SeedKind::Occ));
    eng.start(500);
    while (eng.counters().committed < 1000) std::this_thread::yield();
    eng.stop();
    for (uint32_t w = 0; w < 2; w++) {
        auto c = eng.counters_for_worker(w);
        CHECK(c.committed == 500);
        for (uint32_t t = 0; t < 3; t++)
            CHECK(c.committed_by_type[t] == c.generated_by_type[t]);
    }
}

TEST_CASE("contended tpcc run stays serializable under every seed policy") {
    for (SeedKind kind : {SeedKind::Occ, SeedKind::TwoPlStar, SeedKind::Pipeline}) {
        CAPTURE(seed_kind_name(kind));
        EngineConfig cfg;
        cfg.threads = 4;
        cfg.rng_seed = 11;
        cfg.collect_log = true;
        cfg.vid_registry = true;
        TpccParams p = small_tpcc();
        Engine eng(make_tpcc_lite(p), cfg);
        eng.set_policy(seed_policy(*tpcc_lite_schema(), kind));
        eng.run_for(400ms);
        auto c = eng.counters();
        CHECK(c.committed > 0);
        auto log = eng.drain_log();
        CHECK(log.size() == c.committed);
        auto v = check_serializable(log);
        CHECK(v.ok);
        CHECK(commit_order_respected(log, build_serialization_graph(log)));
        CHECK(eng.store().vid_duplicates() == 0);
    }
}

TEST_CASE("microbench contended run under a random policy is serializable") {
    EngineConfig cfg;
    cfg.threads = 4;
    cfg.rng_seed = 23;
    cfg.collect_log = true;
    cfg.vid_registry = true;
    Engine eng(make_microbench(small_micro()), cfg);
    Rng rng(99);
    eng.set_policy(test::random_policy(*microbench_schema(), rng));
    eng.run_for(400ms);
    auto c = eng.counters();
    CHECK(c.committed > 0);
    auto log = eng.drain_log();
    CHECK(log.size() == c.committed);
    CHECK(check_serializable(log).ok);
    CHECK(eng.store().vid_duplicates() == 0);
}

TEST_CASE("policy swap mid-run keeps the log serializable") {
    EngineConfig cfg;
    cfg.threads = 4;
    cfg.rng_seed = 7;
    cfg.collect_log = true;
    Engine eng(make_tpcc_lite(small_tpcc()), cfg);
    eng.set_policy(seed_policy(*tpcc_lite_schema(), SeedKind::Occ));
    eng.start();
    std::this_thread::sleep_for(150ms);
    eng.set_policy(seed_policy(*tpcc_lite_schema(), SeedKind::Pipeline));
    std::this_thread::sleep_for(150ms);
    eng.set_policy(seed_policy(*tpcc_lite_schema(), SeedKind::TwoPlStar));
    std::this_thread::sleep_for(150ms);
    eng.stop();
    auto log = eng.drain_log();
    CHECK(!log.empty());
    CHECK(check_serializable(log).ok);
}

TEST_CASE("swap with a mismatched schema is rejected and the old policy kept") {
    EngineConfig cfg;
    cfg.threads = 1;
    Engine eng(make_tpcc_lite(small_tpcc()), cfg);
    eng.set_policy(seed_policy(*tpcc_lite_schema(), SeedKind::Occ));
    PolicyPair wrong = seed_policy(*microbench_schema(), SeedKind::Occ);
    CHECK_THROWS_AS(eng.set_policy(wrong), std::invalid_argument);
    // engine still runs with the previous policy
    eng.start(50);
    while (eng.counters().committed < 50) std::this_thread::yield();
    eng.stop();
    CHECK(eng.counters().committed == 50);
}

TEST_CASE("swap to an identical policy has no observable effect") {
    EngineConfig cfg;
    cfg.threads = 2;
    Engine eng(make_tpcc_lite(small_tpcc()), cfg);
    eng.set_policy(seed_policy(*tpcc_lite_schema(), SeedKind::Occ));
    eng.start();
    std::this_thread::sleep_for(100ms);
    CHECK_NOTHROW(eng.set_policy(seed_policy(*tpcc_lite_schema(), SeedKind::Occ)));
    std::this_thread::sleep_for(100ms);
    eng.stop();
    CHECK(eng.counters().committed > 0);
    CHECK(eng.counters().gave_up <= cfg.threads);  // only shutdown interruptions
}

TEST_CASE("per-second buckets account for every commit") {
    EngineConfig cfg;
    cfg.threads = 2;
    Engine eng(make_microbench(small_micro()), cfg);
    eng.set_policy(seed_policy(*microbench_schema(), SeedKind::Occ));
    eng.run_for(1200ms);
    auto buckets = eng.per_second_commits();
    uint64_t sum = 0;
    for (uint64_t b : buckets) sum += b;
    CHECK(sum == eng.counters().committed);
    CHECK(buckets.size() >= 1);
}

TEST_CASE("engine evaluator measures positive fitness and swaps policies") {
    EngineConfig cfg;
    cfg.threads = 2;
    Engine eng(make_microbench(small_micro()), cfg);
    eng.set_policy(seed_policy(*microbench_schema(), SeedKind::Occ));
    eng.start();
    double fit = evaluate_policy(eng, seed_policy(*microbench_schema(), SeedKind::Occ), 30ms,
                                 120ms);
    CHECK(fit > 0);
    eng.stop();
    // evaluation requires a running engine
    CHECK_THROWS_AS(
        evaluate_policy(eng, seed_policy(*microbench_schema(), SeedKind::Occ), 1ms, 1ms),
        std::logic_error);
}
