#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lccdb/backoff.hpp"
#include "lccdb/policy.hpp"
#include "lccdb/store.hpp"

namespace lccdb {

struct ExecConfig {
    // Waits are performance hints; they time out and execution proceeds,
    // correctness comes from validation.
    std::chrono::microseconds wait_slice{100};
    std::chrono::microseconds wait_cap{10000};
    // Commit step 1 / early-validation step 1 wait on dirty-read sources; on
    // timeout the validation fails (an uncommitted source can never pass).
    std::chrono::microseconds commit_wait_cap{10000};
    // Consecutive failed validations at the same checkpoint before the whole
    // attempt aborts; breaks livelock between mutually dirty-reading
    // transactions.
    uint32_t max_segment_retries = 8;
};

struct PolicySnapshot {
    std::shared_ptr<const WorkloadSchema> schema;
    std::shared_ptr<const CcPolicyTable> cc;
    std::shared_ptr<const BackoffPolicyTable> backoff;
};

// Commit log record, the unit the serializability oracle consumes.
struct CommitRecord {
    uint64_t attempt_id = 0;
    TypeIndex type = 0;
    uint64_t lock_ts = 0;  // logical timestamp taken at end of lock stage
    struct ReadAcc {
        TableId table;
        Key key;
        VersionId vid;
    };
    struct WriteAcc {
        TableId table;
        Key key;
        VersionId vid;
        VersionId prev_vid;  // committed version overwritten by the install
        bool had_prev = false;
    };
    std::vector<ReadAcc> reads;
    std::vector<WriteAcc> writes;
};

std::string commit_record_to_line(const CommitRecord& r);
CommitRecord commit_record_from_line(const std::string& line);  // throws std::invalid_argument

// Control-flow signals inside a transaction attempt.
struct RollbackSignal {};      // roll back to the last checkpoint and re-execute
struct AttemptAbortSignal {};  // abort the whole attempt

enum class WaitResult : uint8_t { Ok, DepAborted };
enum class CommitResult : uint8_t { Committed, Aborted };

struct DepEntry {
    AttemptRef handle;
    bool dirty_source = false;
};

// Waits until, for every dependency D of type X, targets[X] is satisfied:
// NO_WAIT is vacuous, ACCESS(a) needs D.progress >= a or D finished, COMMIT
// needs D committed or aborted. Returns DepAborted as soon as a dirty-read
// source is seen aborted. On timeout returns Ok: the wait is a performance
// hint, validation enforces correctness.
WaitResult wait_on_targets(const std::vector<DepEntry>& deps,
                           const std::vector<WaitTarget>& targets,
                           std::chrono::microseconds cap);

// One in-flight transaction attempt. Accesses consult the policy table row
// for (type, access-id); rollback replays the already-executed prefix from a
// deterministic op log. Usable directly for scripted interleavings and by the
// engine's worker loop.
class StepTxn {
  public:
    StepTxn(Store& store, PolicySnapshot policy, TypeIndex type, const ExecConfig& cfg,
            uint64_t prior_aborts = 0);

    // Policy-governed point accesses. Throw RollbackSignal / AttemptAbortSignal.
    std::optional<Value> get(TableId table, const Key& key, AccessId access);
    void put(TableId table, const Key& key, const Value& value, AccessId access);

    // Committed-only scan plumbing (not policy-governed): first record in
    // [lo, hi] satisfying pred. Cached for deterministic replay.
    std::optional<std::pair<Key, Value>> scan_first_committed(
        TableId table, const Key& lo, const Key& hi,
        const std::function<bool(const Key&, const Value&)>& pred);

    // Marks program completion (progress = d) before commit.
    void mark_program_complete();

    // The 4-step final commit; never throws.
    CommitResult commit();
    // External abort (shutdown, retry-cap, escalation).
    void force_abort();

    // Called after catching RollbackSignal, before re-running the program
    // body: switches the op log into replay mode.
    void begin_replay();

    const AttemptRef& handle() const { return self_; }
    const CommitRecord& record() const { return record_; }  // valid after Committed

    // Introspection for tests.
    size_t rset_size() const { return rset_.size(); }
    size_t wset_size() const { return wset_.size(); }
    size_t buffer_size() const { return buffer_.size(); }
    size_t deps_size() const { return deps_.size(); }
    size_t checkpoint_ops() const { return cp_ops_; }
    const std::vector<DepEntry>& deps() const { return deps_; }
    uint64_t rollbacks() const { return rollbacks_; }

  private:
    struct RsetEntry {
        Record* record;
        TableId table;
        Key key;
        VersionId vid_read;
        AttemptRef dirty_src;  // null for clean reads
    };
    struct WsetEntry {
        Record* record;
        TableId table;
        Key key;
        Value value;
        std::optional<VersionId> published_vid;  // vid of the latest exposed version
        bool dirty_since_publish = true;         // value newer than the exposed one
    };
    struct WsetUndo {
        size_t index;
        Value value;
        std::optional<VersionId> published_vid;
        bool dirty_since_publish;
    };
    struct BufferedOp {
        bool is_write;
        Record* record;
        TableId table;
        Key key;
        Value value;          // writes
        VersionId vid;        // reads: version read; writes: assigned at publish
        AttemptRef dirty_src;  // reads from a live entry
    };
    struct OpLogEntry {
        enum class What : uint8_t { Get, Put, Scan } what;
        TableId table;
        Key key;
        std::optional<Value> read_value;                     // Get
        std::optional<std::pair<Key, Value>> scan_result;    // Scan
    };

    const ActionRow& row(AccessId a) const;
    uint32_t type_d() const;
    void add_dep(const AttemptRef& h, bool dirty);
    void touch(Record* r);
    WaitResult wait_until(const std::vector<WaitTarget>& targets,
                          std::chrono::microseconds cap);
    // Step-1 wait on dirty-read sources; scope = buffered only or all deps.
    enum class SourceWait : uint8_t { AllSettled, SourceAborted, Timeout };
    SourceWait wait_dirty_sources(bool buffered_only, std::chrono::microseconds cap);
    enum class ValidateTrigger : uint8_t { ReadRule, Publish };
    bool early_validate_segment(AccessId current_access, ValidateTrigger trigger);
    void rollback_to_checkpoint();
    void fail_segment();  // rollback + escalation accounting, throws

    Store& store_;
    PolicySnapshot policy_;
    ExecConfig cfg_;
    AttemptRef self_;
    uint64_t prior_aborts_;

    std::vector<RsetEntry> rset_;
    std::vector<WsetEntry> wset_;
    std::vector<WsetUndo> wset_undo_;   // mutations since the checkpoint
    std::vector<BufferedOp> buffer_;    // accesses since the last passed validation
    std::vector<BufferedOp> pending_private_;  // validated writes not yet exposed
    std::vector<DepEntry> deps_;
    std::vector<Record*> touched_;

    std::vector<OpLogEntry> ops_;
    size_t replay_cursor_ = 0;
    bool replaying_ = false;

    // checkpoint marks
    size_t cp_ops_ = 0, cp_rset_ = 0, cp_deps_ = 0, cp_wset_ = 0;
    uint32_t publish_seq_ = 0;
    uint32_t consecutive_fails_ = 0;
    uint64_t rollbacks_ = 0;
    bool finished_ = false;

    CommitRecord record_;
};

// A transaction program: per-type static access declaration plus a body that
// is pure in (input, values read so far) — required for replay after
// rollback.
struct TxnInput {
    TypeIndex type = 0;
    std::vector<uint64_t> args;
};

struct TxnProgramDef {
    std::string name;
    std::vector<AccessKind> kinds;
    std::function<void(StepTxn&, const TxnInput&)> body;
};

enum class RunStatus : uint8_t { Committed, GaveUp };

struct RunOutcome {
    RunStatus status = RunStatus::Committed;
    uint64_t attempts = 0;  // total attempts including the committing one
    CommitRecord record;
};

// Executes the program under the policy, retrying aborted attempts with
// learned backoff until commit. retry_cap = 0 means retry indefinitely;
// otherwise GaveUp is returned after that many aborted attempts (tests and
// shutdown only).
RunOutcome run_transaction(Store& store, const PolicySnapshot& policy, const TxnProgramDef& prog,
                           const TxnInput& input, BackoffState& backoff, const ExecConfig& cfg,
                           uint64_t retry_cap = 0, const std::atomic<bool>* stop = nullptr);

}  // namespace lccdb
