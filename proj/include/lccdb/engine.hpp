#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "lccdb/executor.hpp"

namespace lccdb {

// A runnable workload: schema, storage layout, initial data, one program per
// transaction type, and a deterministic per-worker input generator. An
// instance binds to a single engine/store lifetime (program bodies may carry
// per-run side state such as scan cursors).
struct Workload {
    std::shared_ptr<const WorkloadSchema> schema;
    std::vector<TableSpec> tables;
    std::function<void(Store&)> loader;
    std::vector<TxnProgramDef> programs;  // indexed by type
    std::function<std::function<TxnInput()>(uint64_t seed, uint32_t worker)> make_generator;
};

struct EngineConfig {
    uint32_t threads = 1;
    uint64_t rng_seed = 1;
    bool collect_log = false;
    bool collect_latency = false;
    bool vid_registry = false;
    uint32_t retention = 9;
    uint64_t retry_cap = 0;  // 0 = retry indefinitely
    ExecConfig exec;
};

struct EngineCounters {
    uint64_t committed = 0;
    uint64_t aborted_attempts = 0;
    uint64_t gave_up = 0;
    std::vector<uint64_t> committed_by_type;
    std::vector<uint64_t> generated_by_type;
};

// Multi-worker execution driver. Workers pick up a swapped policy at their
// next transaction start; there is no global synchronization barrier.
class Engine {
  public:
    Engine(Workload workload, EngineConfig cfg);
    ~Engine();

    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    // Validates the tables against the workload schema; throws
    // std::invalid_argument and keeps the old policy on mismatch.
    void set_policy(const PolicyPair& policy);

    // Starts the worker pool. txns_per_worker = 0 runs until stop().
    void start(uint64_t txns_per_worker = 0);
    void stop();
    bool running() const { return running_; }

    // Convenience: start, sleep, stop.
    void run_for(std::chrono::milliseconds duration);

    EngineCounters counters() const;
    EngineCounters counters_for_worker(uint32_t worker) const;
    // Committed-transaction latencies in microseconds, by type (after stop).
    std::vector<std::vector<uint32_t>> latencies_by_type() const;
    // Commits bucketed by whole seconds since start() (after stop or live).
    std::vector<uint64_t> per_second_commits() const;

    std::vector<CommitRecord> drain_log();
    Store& store() { return *store_; }
    const Workload& workload() const { return workload_; }
    const EngineConfig& config() const { return cfg_; }

  private:
    struct PolicyBox {
        PolicySnapshot snapshot;
    };
    struct alignas(64) WorkerStats {
        std::atomic<uint64_t> committed{0};
        std::atomic<uint64_t> aborted_attempts{0};
        std::atomic<uint64_t> gave_up{0};
        std::vector<std::atomic<uint64_t>> committed_by_type;
        std::vector<std::atomic<uint64_t>> generated_by_type;
    };

    void worker_main(uint32_t wid, uint64_t txn_budget);
    std::shared_ptr<const PolicyBox> current_policy() const;

    Workload workload_;
    EngineConfig cfg_;
    std::unique_ptr<Store> store_;

    mutable std::mutex policy_mu_;
    std::shared_ptr<const PolicyBox> policy_;

    std::vector<std::thread> threads_;
    std::atomic<bool> stop_{false};
    bool running_ = false;
    std::chrono::steady_clock::time_point start_time_;

    std::vector<std::unique_ptr<WorkerStats>> stats_;
    std::vector<std::vector<CommitRecord>> logs_;
    std::vector<std::vector<std::vector<uint32_t>>> latencies_;  // [worker][type]
    static constexpr size_t kSecondBuckets = 256;
    std::vector<std::atomic<uint64_t>> second_buckets_;
};

}  // namespace lccdb
