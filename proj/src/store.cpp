#include "lccdb/store.hpp"

#include <cassert>
#include <cstring>
#include <functional>
#include <thread>

namespace lccdb {

namespace {
// Absent committed version marker inside the sequence-guarded payload.
constexpr uint8_t kAbsentLen = 0xff;

inline void cpu_relax() {
#if defined(__x86_64__)
    __builtin_ia32_pause();
#endif
}
}  // namespace

Record::Record() {
    for (auto& w : value_words_) w.store(0, std::memory_order_relaxed);
}

void Record::lock_list() const {
    while (list_lock_.test_and_set(std::memory_order_acquire)) {
        cpu_relax();
        std::this_thread::yield();
    }
}

void Record::unlock_list() const { list_lock_.clear(std::memory_order_release); }

void Record::seq_write(const Value& v, const VersionId& vid) {
    uint64_t s = seq_.load(std::memory_order_relaxed);
    seq_.store(s + 1, std::memory_order_relaxed);
    std::atomic_thread_fence(std::memory_order_release);
    vid_attempt_.store(vid.attempt_id, std::memory_order_relaxed);
    vid_seqno_.store(vid.seqno, std::memory_order_relaxed);
    static_assert(sizeof(Value) == 48);
    uint64_t words[6];
    std::memcpy(words, &v, sizeof(Value));
    for (int i = 0; i < 6; i++) value_words_[i].store(words[i], std::memory_order_relaxed);
    installed_.store(true, std::memory_order_relaxed);
    seq_.store(s + 2, std::memory_order_release);
}

std::optional<std::pair<Value, VersionId>> Record::read_committed() const {
    for (;;) {
        uint64_t s1 = seq_.load(std::memory_order_acquire);
        if (s1 & 1) {
            cpu_relax();
            std::this_thread::yield();
            continue;
        }
        if (!installed_.load(std::memory_order_relaxed)) {
            std::atomic_thread_fence(std::memory_order_acquire);
            if (seq_.load(std::memory_order_relaxed) == s1) return std::nullopt;
            continue;
        }
        VersionId vid{vid_attempt_.load(std::memory_order_relaxed),
                      uint32_t(vid_seqno_.load(std::memory_order_relaxed))};
        uint64_t words[6];
        for (int i = 0; i < 6; i++) words[i] = value_words_[i].load(std::memory_order_relaxed);
        std::atomic_thread_fence(std::memory_order_acquire);
        if (seq_.load(std::memory_order_relaxed) != s1) continue;
        Value v;
        std::memcpy(&v, words, sizeof(Value));
        if (v.len == kAbsentLen) return std::nullopt;
        return std::make_pair(v, vid);
    }
}

std::optional<VersionId> Record::committed_vid() const {
    auto r = read_committed();
    if (!r) return std::nullopt;
    return r->second;
}

bool Record::try_latch(uint64_t attempt_id) {
    uint64_t expected = 0;
    return latch_.compare_exchange_strong(expected, attempt_id, std::memory_order_acq_rel);
}

void Record::latch_spin(uint64_t attempt_id) {
    while (!try_latch(attempt_id)) {
        cpu_relax();
        std::this_thread::yield();
    }
}

void Record::unlatch(uint64_t attempt_id) {
    uint64_t owner = latch_.load(std::memory_order_relaxed);
    assert(owner == attempt_id);
    (void)owner;
    latch_.store(0, std::memory_order_release);
}

void Record::install_committed(const Value& v, VersionId vid, uint64_t caller_attempt,
                               Store& store) {
    assert(latch_.load(std::memory_order_relaxed) == caller_attempt);
    seq_write(v, vid);
    // A reused published vid is the same version; it was noted at publish.
    if (store.config().vid_registry && vid.seqno == 0) store.note_version(this, vid);
    lock_list();
    for (auto& e : list_)
        if (e.owner->attempt_id == caller_attempt && e.state == EntryState::Live)
            e.state = EntryState::Committed;
    reclaim(store.config().retention);
    unlock_list();
}

void Record::install_initial(const Value& v, VersionId vid, Store& store) {
    seq_write(v, vid);
    if (store.config().vid_registry) store.note_version(this, vid);
}

void Record::append_entries(std::span<const AccessEntry> batch, Store& store,
                            std::vector<AttemptRef>* publish_deps) {
    if (batch.empty()) return;
    bool has_write = false;
    for (const auto& e : batch) has_write |= (e.kind == EntryKind::Write);
    lock_list();
    if (has_write && publish_deps) {
        uint64_t self = batch.front().owner->attempt_id;
        for (const auto& e : list_)
            if (e.state == EntryState::Live && e.owner->attempt_id != self)
                publish_deps->push_back(e.owner);
    }
    for (const auto& e : batch) {
        list_.push_back(e);
        if (e.kind == EntryKind::Write && store.config().vid_registry)
            store.note_version(this, e.vid);
    }
    unlock_list();
}

std::optional<AccessEntry> Record::find_last_visible_write() const {
    lock_list();
    for (auto it = list_.rbegin(); it != list_.rend(); ++it) {
        if (it->kind == EntryKind::Write && it->state != EntryState::Aborted) {
            AccessEntry copy = *it;
            unlock_list();
            return copy;
        }
    }
    unlock_list();
    return std::nullopt;
}

void Record::mark_aborted(uint64_t attempt_id, Store& store) {
    mark_finished(attempt_id, EntryState::Aborted, store);
}

void Record::mark_finished(uint64_t attempt_id, EntryState state, Store& store) {
    lock_list();
    for (auto& e : list_)
        if (e.owner->attempt_id == attempt_id && e.state == EntryState::Live) e.state = state;
    reclaim(store.config().retention);
    unlock_list();
}

void Record::reclaim(uint32_t retention) {
    // Caller holds the list lock.
    size_t finished = 0;
    for (const auto& e : list_)
        if (e.state != EntryState::Live) finished++;
    if (finished <= retention) return;
    size_t to_drop = finished - retention;
    size_t kept = 0;
    for (size_t i = 0; i < list_.size(); i++) {
        if (to_drop > 0 && list_[i].state != EntryState::Live) {
            to_drop--;
            continue;
        }
        if (kept != i) list_[kept] = std::move(list_[i]);
        kept++;
    }
    list_.resize(kept);
}

size_t Record::access_list_size() const {
    lock_list();
    size_t n = list_.size();
    unlock_list();
    return n;
}

std::vector<AccessEntry> Record::snapshot_access_list() const {
    lock_list();
    std::vector<AccessEntry> copy = list_;
    unlock_list();
    return copy;
}

Table::Table(TableSpec spec) : spec_(std::move(spec)) {}

Record* Table::lookup(const Key& k, bool create) {
    Shard& sh = shards_[shard_of(k)];
    {
        std::shared_lock lk(sh.mu);
        auto it = sh.map.find(k);
        if (it != sh.map.end()) return it->second.get();
    }
    if (!create) return nullptr;
    Record* r;
    {
        std::unique_lock lk(sh.mu);
        auto [it, inserted] = sh.map.try_emplace(k);
        if (inserted) it->second = std::make_unique<Record>();
        r = it->second.get();
        if (!inserted) return r;
    }
    if (spec_.ordered) {
        std::unique_lock lk(index_mu_);
        index_.emplace(k, r);
    }
    return r;
}

void Table::scan_committed(
    const Key& lo, const Key& hi,
    const std::function<bool(const Key&, const Value&, const VersionId&)>& fn) const {
    std::shared_lock lk(index_mu_);
    for (auto it = index_.lower_bound(lo); it != index_.end(); ++it) {
        if (hi < it->first) break;
        auto committed = it->second->read_committed();
        if (!committed) continue;
        if (!fn(it->first, committed->first, committed->second)) break;
    }
}

Store::Store(std::vector<TableSpec> tables, StoreConfig config) : config_(config) {
    for (auto& t : tables) tables_.push_back(std::make_unique<Table>(std::move(t)));
}

Table& Store::table(TableId id) {
    if (id >= tables_.size()) throw std::out_of_range("unknown table");
    return *tables_[id];
}

const Table& Store::table(TableId id) const {
    if (id >= tables_.size()) throw std::out_of_range("unknown table");
    return *tables_[id];
}

AttemptRef Store::new_attempt(TypeIndex type) {
    auto h = std::make_shared<AttemptHandle>();
    h->attempt_id = next_attempt_.fetch_add(1, std::memory_order_relaxed);
    h->type = type;
    return h;
}

void Store::load(TableId t, const Key& k, const Value& v) {
    Record* r = table(t).lookup(k, true);
    r->install_initial(v, VersionId{0, 0}, *this);
}

void Store::note_version(Record* r, VersionId vid) {
    std::lock_guard lk(registry_mu_);
    versions_recorded_.fetch_add(1, std::memory_order_relaxed);
    if (!registry_[r].insert(vid).second) vid_duplicates_.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace lccdb
