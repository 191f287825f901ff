#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lccdb/engine.hpp"

namespace lccdb {

// ---- Workload schemas and factories -------------------------------------

struct TpccParams {
    uint32_t warehouses = 1;
    uint32_t districts_per_wh = 10;
    uint32_t customers_per_district = 200;
    uint32_t items = 10000;
    uint32_t initial_orders_per_district = 30;
    uint32_t initial_pending_per_district = 10;
    uint32_t items_per_order = 3;
    uint32_t remote_pct = 1;  // % of order lines supplied by a remote warehouse
};

struct MicrobenchParams {
    double theta = 0.0;
    uint64_t hot_keys = 4096;
    uint64_t low_keys = 1000000;
    uint64_t unique_keys = 65536;
    // Give each worker its own disjoint slice of the hot range.
    bool hot_partitioned = false;
    uint32_t partitions = 1;
};

std::shared_ptr<const WorkloadSchema> tpcc_lite_schema();
std::shared_ptr<const WorkloadSchema> microbench_schema();
std::shared_ptr<const WorkloadSchema> schema_by_name(const std::string& name);

Workload make_tpcc_lite(const TpccParams& params);
Workload make_microbench(const MicrobenchParams& params);

// ---- Serializability oracle ----------------------------------------------

class MalformedLog : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class EdgeKind : uint8_t { WriteWrite, WriteRead, ReadWrite };

struct SerializationGraph {
    size_t txn_count = 0;
    // (from, to, kind), self edges excluded, deduplicated
    std::vector<std::tuple<uint32_t, uint32_t, EdgeKind>> edges;
};

// Nodes are the committed attempts of the log; edges follow the per-key
// install chains (ww), read-from vids (wr) and chain successors of read vids
// (rw). Throws MalformedLog when a key's version chain is broken.
SerializationGraph build_serialization_graph(const std::vector<CommitRecord>& log);

struct SerializabilityVerdict {
    bool ok = true;
    // attempt ids forming one cycle when !ok
    std::vector<uint64_t> cycle;
    // present for logs small enough to brute-force (<= brute_force_limit):
    // does some serial permutation reproduce every logged read version?
    std::optional<bool> brute_force_ok;
};

// Graph verdict plus, for logs with at most `brute_force_limit` committed
// transactions, an independent serial-order replay cross-check.
SerializabilityVerdict check_serializable(const std::vector<CommitRecord>& log,
                                          size_t brute_force_limit = 5);

// Serial-order replay oracle on its own (exposed for tests).
bool brute_force_serializable(const std::vector<CommitRecord>& log);

// Lemma-style commit-order property: every edge goes from an earlier to a
// later end-of-lock-stage timestamp.
bool commit_order_respected(const std::vector<CommitRecord>& log,
                            const SerializationGraph& graph);

std::string log_to_text(const std::vector<CommitRecord>& log);
std::vector<CommitRecord> log_from_text(const std::string& text);  // throws MalformedLog

}  // namespace lccdb
