#include "lccdb/executor.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>
#include <thread>

namespace lccdb {

using Clock = std::chrono::steady_clock;

std::string commit_record_to_line(const CommitRecord& r) {
    std::ostringstream out;
    out << "C " << r.attempt_id << " " << r.type << " " << r.lock_ts;
    out << " R " << r.reads.size();
    for (const auto& a : r.reads)
        out << " " << a.table << ":" << key_to_hex(a.key) << ":" << a.vid.str();
    out << " W " << r.writes.size();
    for (const auto& a : r.writes) {
        out << " " << a.table << ":" << key_to_hex(a.key) << ":" << a.vid.str() << ":";
        if (a.had_prev)
            out << a.prev_vid.str();
        else
            out << "-";
    }
    return out.str();
}

namespace {

VersionId parse_vid(const std::string& s) {
    auto dot = s.find('.');
    if (dot == std::string::npos) throw std::invalid_argument("bad version id: " + s);
    return VersionId{std::stoull(s.substr(0, dot)), uint32_t(std::stoul(s.substr(dot + 1)))};
}

}  // namespace

CommitRecord commit_record_from_line(const std::string& line) {
    std::istringstream in(line);
    std::string tag;
    CommitRecord r;
    if (!(in >> tag) || tag != "C") throw std::invalid_argument("bad commit record");
    uint64_t type;
    if (!(in >> r.attempt_id >> type >> r.lock_ts)) throw std::invalid_argument("bad commit record");
    r.type = TypeIndex(type);
    size_t n;
    if (!(in >> tag >> n) || tag != "R") throw std::invalid_argument("bad commit record");
    for (size_t i = 0; i < n; i++) {
        std::string item;
        if (!(in >> item)) throw std::invalid_argument("truncated commit record");
        auto c1 = item.find(':'), c2 = item.find(':', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw std::invalid_argument("bad read access: " + item);
        CommitRecord::ReadAcc a;
        a.table = TableId(std::stoul(item.substr(0, c1)));
        a.key = key_from_hex(item.substr(c1 + 1, c2 - c1 - 1));
        a.vid = parse_vid(item.substr(c2 + 1));
        r.reads.push_back(a);
    }
    if (!(in >> tag >> n) || tag != "W") throw std::invalid_argument("bad commit record");
    for (size_t i = 0; i < n; i++) {
        std::string item;
        if (!(in >> item)) throw std::invalid_argument("truncated commit record");
        auto c1 = item.find(':'), c2 = item.find(':', c1 + 1);
        auto c3 = item.find(':', c2 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos || c3 == std::string::npos)
            throw std::invalid_argument("bad write access: " + item);
        CommitRecord::WriteAcc a;
        a.table = TableId(std::stoul(item.substr(0, c1)));
        a.key = key_from_hex(item.substr(c1 + 1, c2 - c1 - 1));
        a.vid = parse_vid(item.substr(c2 + 1, c3 - c2 - 1));
        std::string prev = item.substr(c3 + 1);
        if (prev != "-") {
            a.prev_vid = parse_vid(prev);
            a.had_prev = true;
        }
        r.writes.push_back(a);
    }
    return r;
}

StepTxn::StepTxn(Store& store, PolicySnapshot policy, TypeIndex type, const ExecConfig& cfg,
                 uint64_t prior_aborts)
    : store_(store), policy_(std::move(policy)), cfg_(cfg), prior_aborts_(prior_aborts) {
    self_ = store_.new_attempt(type);
}

const ActionRow& StepTxn::row(AccessId a) const { return policy_.cc->row(self_->type, a); }

uint32_t StepTxn::type_d() const { return policy_.cc->dims()[self_->type]; }

void StepTxn::add_dep(const AttemptRef& h, bool dirty) {
    if (h->attempt_id == self_->attempt_id) return;
    for (auto& d : deps_) {
        if (d.handle == h) {
            d.dirty_source |= dirty;
            return;
        }
    }
    deps_.push_back({h, dirty});
}

void StepTxn::touch(Record* r) {
    for (Record* t : touched_)
        if (t == r) return;
    touched_.push_back(r);
}

WaitResult wait_on_targets(const std::vector<DepEntry>& deps,
                           const std::vector<WaitTarget>& targets,
                           std::chrono::microseconds cap) {
    if (deps.empty()) return WaitResult::Ok;
    bool any_wait = false;
    for (const auto& t : targets) any_wait |= (t.kind != WaitTarget::Kind::NoWait);
    if (!any_wait) return WaitResult::Ok;

    auto deadline = Clock::now() + cap;
    for (;;) {
        bool satisfied = true;
        for (const auto& d : deps) {
            AttemptStatus st = d.handle->status.load(std::memory_order_acquire);
            if (d.dirty_source && st == AttemptStatus::Aborted) return WaitResult::DepAborted;
            const WaitTarget& t = targets[d.handle->type];
            switch (t.kind) {
                case WaitTarget::Kind::NoWait:
                    break;
                case WaitTarget::Kind::Access:
                    if (d.handle->progress.load(std::memory_order_acquire) < t.access &&
                        !d.handle->finished())
                        satisfied = false;
                    break;
                case WaitTarget::Kind::Commit:
                    if (!d.handle->finished()) satisfied = false;
                    break;
            }
            if (!satisfied) break;
        }
        if (satisfied) return WaitResult::Ok;
        if (Clock::now() >= deadline) return WaitResult::Ok;  // hint only
        std::this_thread::yield();
    }
}

WaitResult StepTxn::wait_until(const std::vector<WaitTarget>& targets,
                               std::chrono::microseconds cap) {
    return wait_on_targets(deps_, targets, cap);
}

StepTxn::SourceWait StepTxn::wait_dirty_sources(bool buffered_only,
                                                std::chrono::microseconds cap) {
    // Collect the dirty-read sources in scope.
    std::vector<AttemptHandle*> sources;
    if (buffered_only) {
        for (const auto& op : buffer_)
            if (!op.is_write && op.dirty_src) sources.push_back(op.dirty_src.get());
    } else {
        for (const auto& d : deps_)
            if (d.dirty_source) sources.push_back(d.handle.get());
    }
    if (sources.empty()) return SourceWait::AllSettled;
    auto deadline = Clock::now() + cap;
    for (;;) {
        bool all = true;
        for (AttemptHandle* h : sources) {
            AttemptStatus st = h->status.load(std::memory_order_acquire);
            if (st == AttemptStatus::Aborted) return SourceWait::SourceAborted;
            if (st != AttemptStatus::Committed) {
                all = false;
                break;
            }
        }
        if (all) return SourceWait::AllSettled;
        if (Clock::now() >= deadline) return SourceWait::Timeout;
        std::this_thread::yield();
    }
}

void StepTxn::rollback_to_checkpoint() {
    ops_.resize(cp_ops_);
    rset_.resize(cp_rset_);
    deps_.resize(cp_deps_);
    // Drop wset entries created after the checkpoint, then undo mutations of
    // older entries.
    wset_.resize(cp_wset_);
    for (auto it = wset_undo_.rbegin(); it != wset_undo_.rend(); ++it) {
        if (it->index >= wset_.size()) continue;  // entry itself was dropped
        WsetEntry& e = wset_[it->index];
        e.value = it->value;
        e.published_vid = it->published_vid;
        e.dirty_since_publish = it->dirty_since_publish;
    }
    wset_undo_.clear();
    buffer_.clear();
    rollbacks_++;
}

void StepTxn::fail_segment() {
    rollback_to_checkpoint();
    if (++consecutive_fails_ > cfg_.max_segment_retries) throw AttemptAbortSignal{};
    throw RollbackSignal{};
}

bool StepTxn::early_validate_segment(AccessId current_access, ValidateTrigger trigger) {
    // Consolidated wait: use the wait action of the next access-id; at the
    // last access fall back to commit-wait semantics.
    if (!deps_.empty()) {
        if (current_access < type_d()) {
            if (wait_until(row(current_access + 1).wait_targets, cfg_.wait_cap) ==
                WaitResult::DepAborted)
                return false;
        } else {
            std::vector<WaitTarget> all_commit(policy_.cc->dims().size(), WaitTarget::commit());
            if (wait_until(all_commit, cfg_.wait_cap) == WaitResult::DepAborted) return false;
        }
    }

    // Step 1: every dirty-read source in the buffer must settle; an aborted
    // or still-running source fails the segment.
    SourceWait sw = wait_dirty_sources(/*buffered_only=*/true, cfg_.commit_wait_cap);
    if (sw != SourceWait::AllSettled) return false;

    // Step 2: buffered reads must still match the committed state, and
    // nobody else may be mid-commit on them.
    for (const auto& op : buffer_) {
        if (op.is_write) continue;
        auto cvid = op.record->committed_vid();
        if (!cvid || *cvid != op.vid) return false;
        uint64_t owner = op.record->latch_owner();
        if (owner != 0 && owner != self_->attempt_id) return false;
    }

    // PASS: expose what this validation covers.
    std::vector<BufferedOp> expose;
    if (trigger == ValidateTrigger::Publish) {
        for (auto& op : pending_private_) expose.push_back(std::move(op));
        pending_private_.clear();
        for (auto& op : buffer_)
            if (op.is_write) expose.push_back(op);
    } else {
        for (auto& op : buffer_)
            if (op.is_write) pending_private_.push_back(op);
    }
    // Writes exposed now get their version ids, in publish order.
    for (auto& op : expose) {
        op.vid = VersionId{self_->attempt_id, ++publish_seq_};
        for (auto& w : wset_) {
            if (w.record == op.record) {
                // The exposed version may be an intermediate one; only the
                // latest write for the record clears the private flag.
                if (w.value == op.value) {
                    w.published_vid = op.vid;
                    w.dirty_since_publish = false;
                }
                break;
            }
        }
    }

    // Append validated reads and exposed writes, grouped per record in
    // global key order; publishers inherit dependencies on owners of earlier
    // live entries.
    std::vector<std::pair<Record*, AccessEntry>> batch;
    for (const auto& op : buffer_) {
        if (op.is_write) continue;
        AccessEntry e;
        e.owner = self_;
        e.kind = EntryKind::Read;
        batch.emplace_back(op.record, std::move(e));
    }
    for (const auto& op : expose) {
        AccessEntry e;
        e.owner = self_;
        e.kind = EntryKind::Write;
        e.value = op.value;
        e.vid = op.vid;
        batch.emplace_back(op.record, std::move(e));
    }
    std::stable_sort(batch.begin(), batch.end(), [](const auto& a, const auto& b) {
        return a.first < b.first;
    });
    std::vector<AttemptRef> publish_deps;
    size_t i = 0;
    while (i < batch.size()) {
        size_t j = i;
        while (j < batch.size() && batch[j].first == batch[i].first) j++;
        std::vector<AccessEntry> group;
        bool has_write = false;
        for (size_t k = i; k < j; k++) {
            has_write |= (batch[k].second.kind == EntryKind::Write);
            group.push_back(std::move(batch[k].second));
        }
        batch[i].first->append_entries(group, store_, has_write ? &publish_deps : nullptr);
        touch(batch[i].first);
        i = j;
    }
    for (const auto& h : publish_deps) add_dep(h, /*dirty=*/false);

    buffer_.clear();
    wset_undo_.clear();
    cp_ops_ = ops_.size();
    cp_rset_ = rset_.size();
    cp_deps_ = deps_.size();
    cp_wset_ = wset_.size();
    consecutive_fails_ = 0;
    return true;
}

std::optional<Value> StepTxn::get(TableId table, const Key& key, AccessId access) {
    if (replaying_ && replay_cursor_ < cp_ops_) {
        const OpLogEntry& e = ops_[replay_cursor_++];
        assert(e.what == OpLogEntry::What::Get && e.table == table && e.key == key);
        return e.read_value;
    }
    replaying_ = false;

    self_->raise_progress(access - 1);
    const ActionRow& r = row(access);
    if (wait_until(r.wait_targets, cfg_.wait_cap) == WaitResult::DepAborted) fail_segment();

    std::optional<Value> result;
    // Read own pending write if there is one.
    bool own = false;
    for (const auto& w : wset_) {
        if (w.table == table && w.key == key) {
            result = w.value;
            own = true;
            break;
        }
    }
    if (!own) {
        Record* rec = store_.lookup(table, key, /*create=*/false);
        if (rec != nullptr) {
            AttemptRef dirty_src;
            std::optional<std::pair<Value, VersionId>> got;
            if (r.read_version == ReadVersion::DirtyRead) {
                auto last = rec->find_last_visible_write();
                if (last && last->state == EntryState::Live) {
                    got = std::make_pair(last->value, last->vid);
                    dirty_src = last->owner;
                }
            }
            if (!got) got = rec->read_committed();
            if (got) {
                if (dirty_src) add_dep(dirty_src, /*dirty=*/true);
                rset_.push_back({rec, table, key, got->second, dirty_src});
                BufferedOp op;
                op.is_write = false;
                op.record = rec;
                op.table = table;
                op.key = key;
                op.vid = got->second;
                op.dirty_src = dirty_src;
                buffer_.push_back(std::move(op));
                result = got->first;
            }
        }
    }

    OpLogEntry log;
    log.what = OpLogEntry::What::Get;
    log.table = table;
    log.key = key;
    log.read_value = result;
    ops_.push_back(std::move(log));
    replay_cursor_ = ops_.size();

    if (r.early_validate) {
        if (!early_validate_segment(access, ValidateTrigger::ReadRule)) fail_segment();
    }
    return result;
}

void StepTxn::put(TableId table, const Key& key, const Value& value, AccessId access) {
    if (replaying_ && replay_cursor_ < cp_ops_) {
        const OpLogEntry& e = ops_[replay_cursor_++];
        assert(e.what == OpLogEntry::What::Put && e.table == table && e.key == key);
        (void)e;
        return;
    }
    replaying_ = false;

    self_->raise_progress(access - 1);
    const ActionRow& r = row(access);
    if (wait_until(r.wait_targets, cfg_.wait_cap) == WaitResult::DepAborted) fail_segment();

    Record* rec = store_.lookup(table, key, /*create=*/true);
    size_t widx = wset_.size();
    for (size_t i = 0; i < wset_.size(); i++) {
        if (wset_[i].record == rec) {
            widx = i;
            break;
        }
    }
    if (widx == wset_.size()) {
        wset_.push_back({rec, table, key, value, std::nullopt, true});
    } else {
        if (widx < cp_wset_)
            wset_undo_.push_back({widx, wset_[widx].value, wset_[widx].published_vid,
                                  wset_[widx].dirty_since_publish});
        wset_[widx].value = value;
        wset_[widx].dirty_since_publish = true;
    }

    BufferedOp op;
    op.is_write = true;
    op.record = rec;
    op.table = table;
    op.key = key;
    op.value = value;
    buffer_.push_back(std::move(op));

    OpLogEntry log;
    log.what = OpLogEntry::What::Put;
    log.table = table;
    log.key = key;
    ops_.push_back(std::move(log));
    replay_cursor_ = ops_.size();

    if (r.write_visibility == WriteVisibility::Public) {
        if (!early_validate_segment(access, ValidateTrigger::Publish)) fail_segment();
    }
}

std::optional<std::pair<Key, Value>> StepTxn::scan_first_committed(
    TableId table, const Key& lo, const Key& hi,
    const std::function<bool(const Key&, const Value&)>& pred) {
    if (replaying_ && replay_cursor_ < cp_ops_) {
        const OpLogEntry& e = ops_[replay_cursor_++];
        assert(e.what == OpLogEntry::What::Scan && e.table == table);
        return e.scan_result;
    }
    replaying_ = false;

    std::optional<std::pair<Key, Value>> found;
    store_.table(table).scan_committed(
        lo, hi, [&](const Key& k, const Value& v, const VersionId&) {
            if (pred(k, v)) {
                found = std::make_pair(k, v);
                return false;
            }
            return true;
        });

    OpLogEntry log;
    log.what = OpLogEntry::What::Scan;
    log.table = table;
    log.key = lo;
    log.scan_result = found;
    ops_.push_back(std::move(log));
    replay_cursor_ = ops_.size();
    return found;
}

void StepTxn::begin_replay() {
    replay_cursor_ = 0;
    replaying_ = cp_ops_ > 0;
}

void StepTxn::mark_program_complete() {
    self_->raise_progress(type_d());
    self_->status.store(AttemptStatus::Validating, std::memory_order_release);
}

CommitResult StepTxn::commit() {
    assert(!finished_);
    mark_program_complete();

    // Step 1: wait for all dirty-read sources to commit or abort. An aborted
    // source dooms us (the value we read will never be the committed one);
    // so does a timeout, since validation cannot pass before the source
    // commits.
    SourceWait sw = wait_dirty_sources(/*buffered_only=*/false, cfg_.commit_wait_cap);
    if (sw != SourceWait::AllSettled) {
        force_abort();
        return CommitResult::Aborted;
    }

    // Step 2: lock the write set in global (table, key) order.
    std::vector<WsetEntry*> ordered;
    ordered.reserve(wset_.size());
    for (auto& w : wset_) ordered.push_back(&w);
    std::sort(ordered.begin(), ordered.end(), [](const WsetEntry* a, const WsetEntry* b) {
        if (a->table != b->table) return a->table < b->table;
        return a->key < b->key;
    });
    size_t latched = 0;
    for (; latched < ordered.size(); latched++)
        ordered[latched]->record->latch_spin(self_->attempt_id);
    uint64_t lock_ts = store_.next_lock_ts();

    auto abort_with_latches = [&]() {
        for (size_t i = 0; i < latched; i++) ordered[i]->record->unlatch(self_->attempt_id);
        force_abort();
        return CommitResult::Aborted;
    };

    // Step 3: version check and lock observation on the read set.
    for (const auto& e : rset_) {
        auto cvid = e.record->committed_vid();
        if (!cvid || *cvid != e.vid_read) return abort_with_latches();
        uint64_t owner = e.record->latch_owner();
        if (owner != 0 && owner != self_->attempt_id) return abort_with_latches();
    }

    // Step 4: install, reusing the published version id when the final value
    // was already exposed, so readers of that version validate successfully.
    record_.attempt_id = self_->attempt_id;
    record_.type = self_->type;
    record_.lock_ts = lock_ts;
    for (const auto& e : rset_) record_.reads.push_back({e.table, e.key, e.vid_read});
    for (WsetEntry* w : ordered) {
        VersionId vid = (!w->dirty_since_publish && w->published_vid)
                            ? *w->published_vid
                            : VersionId{self_->attempt_id, 0};
        CommitRecord::WriteAcc acc;
        acc.table = w->table;
        acc.key = w->key;
        acc.vid = vid;
        auto prev = w->record->committed_vid();
        if (prev) {
            acc.prev_vid = *prev;
            acc.had_prev = true;
        }
        record_.writes.push_back(acc);
        w->record->install_committed(w->value, vid, self_->attempt_id, store_);
        touch(w->record);
    }
    // install_committed flipped our entries on written records; records we
    // only appended reads to still carry live entries.
    for (Record* r : touched_) {
        bool installed = false;
        for (WsetEntry* w : ordered) installed |= (w->record == r);
        if (!installed) r->mark_finished(self_->attempt_id, EntryState::Committed, store_);
    }
    for (size_t i = 0; i < latched; i++) ordered[i]->record->unlatch(self_->attempt_id);
    self_->status.store(AttemptStatus::Committed, std::memory_order_release);
    finished_ = true;
    return CommitResult::Committed;
}

void StepTxn::force_abort() {
    if (finished_) return;
    for (Record* r : touched_) r->mark_aborted(self_->attempt_id, store_);
    self_->status.store(AttemptStatus::Aborted, std::memory_order_release);
    finished_ = true;
}

RunOutcome run_transaction(Store& store, const PolicySnapshot& policy, const TxnProgramDef& prog,
                           const TxnInput& input, BackoffState& backoff, const ExecConfig& cfg,
                           uint64_t retry_cap, const std::atomic<bool>* stop) {
    RunOutcome out;
    uint64_t prior_aborts = 0;
    for (;;) {
        out.attempts++;
        StepTxn txn(store, policy, input.type, cfg, prior_aborts);
        CommitResult result;
        try {
            for (;;) {
                try {
                    prog.body(txn, input);
                    break;
                } catch (const RollbackSignal&) {
                    txn.begin_replay();
                }
            }
            result = txn.commit();
        } catch (const AttemptAbortSignal&) {
            txn.force_abort();
            result = CommitResult::Aborted;
        }
        uint32_t bucket = backoff_bucket(prior_aborts);
        if (result == CommitResult::Committed) {
            backoff.on_outcome(input.type, bucket, TxnOutcome::Committed, *policy.backoff);
            out.status = RunStatus::Committed;
            out.record = txn.record();
            return out;
        }
        Rational sleep_us = backoff.on_outcome(input.type, bucket, TxnOutcome::Aborted,
                                               *policy.backoff);
        prior_aborts++;
        if (retry_cap != 0 && prior_aborts >= retry_cap) {
            out.status = RunStatus::GaveUp;
            return out;
        }
        if (stop && stop->load(std::memory_order_relaxed)) {
            out.status = RunStatus::GaveUp;
            return out;
        }
        backoff_sleep(sleep_us);
    }
}

}  // namespace lccdb
