#include "lccdb/engine.hpp"

#include <cassert>

namespace lccdb {

Engine::Engine(Workload workload, EngineConfig cfg)
    : workload_(std::move(workload)), cfg_(cfg), second_buckets_(kSecondBuckets) {
    StoreConfig sc;
    sc.retention = cfg_.retention;
    sc.vid_registry = cfg_.vid_registry;
    store_ = std::make_unique<Store>(workload_.tables, sc);
    workload_.loader(*store_);
    for (auto& b : second_buckets_) b.store(0);

    const uint32_t n = workload_.schema->type_count();
    for (uint32_t w = 0; w < cfg_.threads; w++) {
        auto st = std::make_unique<WorkerStats>();
        st->committed_by_type = std::vector<std::atomic<uint64_t>>(n);
        st->generated_by_type = std::vector<std::atomic<uint64_t>>(n);
        stats_.push_back(std::move(st));
    }
    logs_.resize(cfg_.threads);
    latencies_.assign(cfg_.threads, std::vector<std::vector<uint32_t>>(n));
}

Engine::~Engine() {
    if (running_) stop();
}

void Engine::set_policy(const PolicyPair& policy) {
    auto violations = validate_table(*workload_.schema, policy.cc, policy.backoff);
    if (!violations.empty())
        throw std::invalid_argument("policy rejected: " + violations.front());
    auto box = std::make_shared<PolicyBox>();
    box->snapshot.schema = workload_.schema;
    box->snapshot.cc = std::make_shared<CcPolicyTable>(policy.cc);
    box->snapshot.backoff = std::make_shared<BackoffPolicyTable>(policy.backoff);
    std::lock_guard lk(policy_mu_);
    policy_ = std::move(box);
}

std::shared_ptr<const Engine::PolicyBox> Engine::current_policy() const {
    std::lock_guard lk(policy_mu_);
    return policy_;
}

void Engine::start(uint64_t txns_per_worker) {
    if (running_) throw std::logic_error("engine already running");
    if (!policy_) throw std::logic_error("no policy loaded");
    stop_.store(false);
    start_time_ = std::chrono::steady_clock::now();
    for (uint32_t w = 0; w < cfg_.threads; w++)
        threads_.emplace_back([this, w, txns_per_worker] { worker_main(w, txns_per_worker); });
    running_ = true;
}

void Engine::stop() {
    if (!running_) return;
    stop_.store(true);
    for (auto& t : threads_) t.join();
    threads_.clear();
    running_ = false;
}

void Engine::run_for(std::chrono::milliseconds duration) {
    start();
    std::this_thread::sleep_for(duration);
    stop();
}

void Engine::worker_main(uint32_t wid, uint64_t txn_budget) {
    auto gen = workload_.make_generator(cfg_.rng_seed, wid);
    const uint32_t n = workload_.schema->type_count();
    BackoffState backoff(n);
    std::shared_ptr<const PolicyBox> mine;
    WorkerStats& st = *stats_[wid];

    uint64_t done = 0;
    while (!stop_.load(std::memory_order_relaxed)) {
        if (txn_budget != 0 && done >= txn_budget) break;
        auto snap = current_policy();
        if (snap != mine) {
            mine = snap;
            backoff.reset();
        }
        TxnInput input = gen();
        st.generated_by_type[input.type].fetch_add(1, std::memory_order_relaxed);
        auto t0 = std::chrono::steady_clock::now();
        RunOutcome out =
            run_transaction(*store_, mine->snapshot, workload_.programs[input.type], input,
                            backoff, cfg_.exec, cfg_.retry_cap, &stop_);
        if (out.status == RunStatus::Committed) {
            auto t1 = std::chrono::steady_clock::now();
            st.committed.fetch_add(1, std::memory_order_relaxed);
            st.committed_by_type[input.type].fetch_add(1, std::memory_order_relaxed);
            st.aborted_attempts.fetch_add(out.attempts - 1, std::memory_order_relaxed);
            size_t bucket = std::min<size_t>(
                kSecondBuckets - 1,
                size_t(std::chrono::duration_cast<std::chrono::seconds>(t1 - start_time_).count()));
            second_buckets_[bucket].fetch_add(1, std::memory_order_relaxed);
            if (cfg_.collect_latency) {
                auto& v = latencies_[wid][input.type];
                if (v.size() < (1u << 22))
                    v.push_back(uint32_t(
                        std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count()));
            }
            if (cfg_.collect_log) logs_[wid].push_back(std::move(out.record));
            done++;
        } else {
            st.gave_up.fetch_add(1, std::memory_order_relaxed);
            st.aborted_attempts.fetch_add(out.attempts, std::memory_order_relaxed);
        }
    }
}

EngineCounters Engine::counters() const {
    const uint32_t n = workload_.schema->type_count();
    EngineCounters c;
    c.committed_by_type.assign(n, 0);
    c.generated_by_type.assign(n, 0);
    for (const auto& st : stats_) {
        c.committed += st->committed.load();
        c.aborted_attempts += st->aborted_attempts.load();
        c.gave_up += st->gave_up.load();
        for (uint32_t t = 0; t < n; t++) {
            c.committed_by_type[t] += st->committed_by_type[t].load();
            c.generated_by_type[t] += st->generated_by_type[t].load();
        }
    }
    return c;
}

EngineCounters Engine::counters_for_worker(uint32_t worker) const {
    const uint32_t n = workload_.schema->type_count();
    const WorkerStats& st = *stats_.at(worker);
    EngineCounters c;
    c.committed = st.committed.load();
    c.aborted_attempts = st.aborted_attempts.load();
    c.gave_up = st.gave_up.load();
    for (uint32_t t = 0; t < n; t++) {
        c.committed_by_type.push_back(st.committed_by_type[t].load());
        c.generated_by_type.push_back(st.generated_by_type[t].load());
    }
    return c;
}

std::vector<std::vector<uint32_t>> Engine::latencies_by_type() const {
    const uint32_t n = workload_.schema->type_count();
    std::vector<std::vector<uint32_t>> out(n);
    for (const auto& per_worker : latencies_)
        for (uint32_t t = 0; t < n; t++)
            out[t].insert(out[t].end(), per_worker[t].begin(), per_worker[t].end());
    return out;
}

std::vector<uint64_t> Engine::per_second_commits() const {
    std::vector<uint64_t> out;
    for (const auto& b : second_buckets_) out.push_back(b.load());
    while (!out.empty() && out.back() == 0) out.pop_back();
    return out;
}

std::vector<CommitRecord> Engine::drain_log() {
    std::vector<CommitRecord> all;
    for (auto& l : logs_) {
        all.insert(all.end(), std::make_move_iterator(l.begin()),
                   std::make_move_iterator(l.end()));
        l.clear();
    }
    return all;
}

}  // namespace lccdb
