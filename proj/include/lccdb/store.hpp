#pragma once

#include <array>
#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "lccdb/common.hpp"

namespace lccdb {

// Globally unique identifier for every committed and every published
// uncommitted version. seqno 0 is used for versions installed without a
// prior publish; published versions get seqno >= 1 and keep their id if the
// same version is later committed.
struct VersionId {
    uint64_t attempt_id = 0;
    uint32_t seqno = 0;

    bool operator==(const VersionId& o) const {
        return attempt_id == o.attempt_id && seqno == o.seqno;
    }
    bool operator!=(const VersionId& o) const { return !(*this == o); }
    std::string str() const { return std::to_string(attempt_id) + "." + std::to_string(seqno); }
};

struct VersionIdHash {
    size_t operator()(const VersionId& v) const {
        return size_t(v.attempt_id * 0x9e3779b97f4a7c15ull ^ v.seqno);
    }
};

enum class AttemptStatus : uint8_t { Running, Validating, Committed, Aborted };

// Waiter-visible execution state of one transaction attempt. Progress is the
// highest access-id known to be fully executed (monotone within an attempt).
struct AttemptHandle {
    uint64_t attempt_id = 0;
    TypeIndex type = 0;
    std::atomic<uint32_t> progress{0};
    std::atomic<AttemptStatus> status{AttemptStatus::Running};

    bool finished() const {
        AttemptStatus s = status.load(std::memory_order_acquire);
        return s == AttemptStatus::Committed || s == AttemptStatus::Aborted;
    }
    void raise_progress(uint32_t p) {
        uint32_t cur = progress.load(std::memory_order_relaxed);
        while (cur < p &&
               !progress.compare_exchange_weak(cur, p, std::memory_order_release)) {
        }
    }
};

using AttemptRef = std::shared_ptr<AttemptHandle>;

enum class EntryKind : uint8_t { Read, Write };
enum class EntryState : uint8_t { Live, Committed, Aborted };

// One element of a record's per-object access list: a visible uncommitted
// write or a validated read.
struct AccessEntry {
    AttemptRef owner;
    EntryKind kind = EntryKind::Read;
    EntryState state = EntryState::Live;
    Value value;    // writes only
    VersionId vid;  // writes only; seqno >= 1
};

struct StoreConfig {
    // Finished (committed/aborted) access-list entries retained per record
    // before eager reclamation.
    uint32_t retention = 9;
    // Test mode: track every (record, version-id) ever installed or
    // published and count duplicates.
    bool vid_registry = false;
};

class Store;

// A single key's storage cell: the latest committed version plus the access
// list. The committed (value, vid) pair is guarded by a sequence counter so
// readers never observe a torn pair; the latch word carries the committing
// attempt id and doubles as the "locked by another transaction" signal that
// validation tests without acquiring.
class Record {
  public:
    Record();

    // Committed-read protocol. Returns nothing when no version was ever
    // installed (fresh insert cell).
    std::optional<std::pair<Value, VersionId>> read_committed() const;
    std::optional<VersionId> committed_vid() const;

    // Latch word. try_latch returns false when held by someone else;
    // latch_owner is a racy observation used by validation.
    bool try_latch(uint64_t attempt_id);
    void latch_spin(uint64_t attempt_id);
    void unlatch(uint64_t attempt_id);
    uint64_t latch_owner() const { return latch_.load(std::memory_order_acquire); }

    // Replaces the committed version. Caller must hold the latch. Marks the
    // caller's live access-list entries committed and reclaims.
    void install_committed(const Value& v, VersionId vid, uint64_t caller_attempt, Store& store);

    // Initial load path (single-threaded, no latch).
    void install_initial(const Value& v, VersionId vid, Store& store);

    // Appends validated reads / visible writes atomically. When the batch
    // contains a write and publish_deps is non-null, owners of earlier live
    // entries of other attempts are collected (they become dependencies of
    // the publisher).
    void append_entries(std::span<const AccessEntry> batch, Store& store,
                        std::vector<AttemptRef>* publish_deps);

    // Latest write entry that is live or committed; none otherwise.
    std::optional<AccessEntry> find_last_visible_write() const;

    // Marks the attempt's live entries aborted.
    void mark_aborted(uint64_t attempt_id, Store& store);

    // Flips the attempt's live entries to the given finished state.
    void mark_finished(uint64_t attempt_id, EntryState state, Store& store);

    // Drops finished entries beyond the retention window. Live entries are
    // never dropped. Idempotent.
    void reclaim(uint32_t retention);

    size_t access_list_size() const;
    std::vector<AccessEntry> snapshot_access_list() const;

  private:
    void seq_write(const Value& v, const VersionId& vid);

    std::atomic<uint64_t> seq_{0};  // even = stable, odd = install in progress
    std::atomic<uint64_t> latch_{0};
    // Sequence-guarded payload (relaxed atomics, fenced by seq_):
    std::atomic<uint64_t> vid_attempt_{0};
    std::atomic<uint64_t> vid_seqno_{0};
    std::atomic<uint64_t> value_words_[6];
    std::atomic<bool> installed_{false};

    mutable std::atomic_flag list_lock_ = ATOMIC_FLAG_INIT;
    std::vector<AccessEntry> list_;

    void lock_list() const;
    void unlock_list() const;
};

struct TableSpec {
    std::string name;
    bool ordered = false;  // maintain a sorted index for committed-only scans
};

class Table {
  public:
    explicit Table(TableSpec spec);

    // Read path: nullptr when the key was never created. Write path
    // (create=true): inserts an empty record on first access.
    Record* lookup(const Key& k, bool create);

    // Committed-only ordered scan over [lo, hi]; fn returns false to stop.
    // Records with no committed version are skipped. Requires ordered=true.
    void scan_committed(const Key& lo, const Key& hi,
                        const std::function<bool(const Key&, const Value&, const VersionId&)>& fn) const;

    const TableSpec& spec() const { return spec_; }

  private:
    static constexpr size_t kShards = 16;
    struct Shard {
        mutable std::shared_mutex mu;
        std::unordered_map<Key, std::unique_ptr<Record>, KeyHash> map;
    };
    size_t shard_of(const Key& k) const { return KeyHash{}(k) % kShards; }

    TableSpec spec_;
    std::array<Shard, kShards> shards_;
    mutable std::shared_mutex index_mu_;
    std::map<Key, Record*> index_;
};

class Store {
  public:
    explicit Store(std::vector<TableSpec> tables, StoreConfig config = {});

    Table& table(TableId id);
    const Table& table(TableId id) const;
    size_t table_count() const { return tables_.size(); }
    const StoreConfig& config() const { return config_; }

    Record* lookup(TableId t, const Key& k, bool create) { return table(t).lookup(k, create); }

    AttemptRef new_attempt(TypeIndex type);
    uint64_t next_lock_ts() { return lock_ts_.fetch_add(1, std::memory_order_acq_rel) + 1; }

    // Loader convenience: create + install an initial committed version with
    // the reserved loader attempt id 0.
    void load(TableId t, const Key& k, const Value& v);

    // Version-id registry (test mode).
    void note_version(Record* r, VersionId vid);
    uint64_t vid_duplicates() const { return vid_duplicates_.load(); }
    uint64_t versions_recorded() const { return versions_recorded_.load(); }

  private:
    std::vector<std::unique_ptr<Table>> tables_;
    StoreConfig config_;
    std::atomic<uint64_t> next_attempt_{1};
    std::atomic<uint64_t> lock_ts_{0};

    std::mutex registry_mu_;
    std::unordered_map<Record*, std::unordered_set<VersionId, VersionIdHash>> registry_;
    std::atomic<uint64_t> vid_duplicates_{0};
    std::atomic<uint64_t> versions_recorded_{0};
};

}  // namespace lccdb
