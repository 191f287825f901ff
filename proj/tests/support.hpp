#pragma once

#include <memory>
#include <string>
#include <vector>

#include "lccdb/policy.hpp"
#include "lccdb/rng.hpp"
#include "lccdb/workloads.hpp"

namespace lccdb::test {

// Small schema for focused executor/oracle tests: two types, RMW accesses.
inline std::shared_ptr<const WorkloadSchema> mini_schema(uint32_t types = 2, uint32_t d = 3) {
    auto s = std::make_shared<WorkloadSchema>();
    s->name = "mini";
    for (uint32_t t = 0; t < types; t++)
        s->txn_types.push_back({"T" + std::to_string(t + 1),
                                std::vector<AccessKind>(d, AccessKind::ReadModifyWrite)});
    s->check_valid();
    return s;
}

inline PolicySnapshot snapshot_of(const std::shared_ptr<const WorkloadSchema>& schema,
                                  const PolicyPair& pair) {
    PolicySnapshot snap;
    snap.schema = schema;
    snap.cc = std::make_shared<CcPolicyTable>(pair.cc);
    snap.backoff = std::make_shared<BackoffPolicyTable>(pair.backoff);
    return snap;
}

// One-table store fixture for scripted schedules.
inline std::unique_ptr<Store> mini_store(uint64_t keys = 16, StoreConfig cfg = {}) {
    auto store = std::make_unique<Store>(std::vector<TableSpec>{{"t", true}}, cfg);
    for (uint64_t k = 0; k < keys; k++)
        store->load(0, make_key_u64(k), ValueWriter().u64(0).build());
    return store;
}

inline Value u64_value(uint64_t v) { return ValueWriter().u64(v).build(); }

// Uniformly random (valid) policy tables over a schema.
inline PolicyPair random_policy(const WorkloadSchema& schema, Rng& rng) {
    PolicyPair p = seed_policy(schema, SeedKind::Occ);
    const uint32_t n = schema.type_count();
    for (TypeIndex t = 0; t < n; t++) {
        for (AccessId a = 1; a <= schema.d(t); a++) {
            ActionRow& row = p.cc.row(t, a);
            for (uint32_t x = 0; x < n; x++)
                row.wait_targets[x] = WaitTarget::from_domain_index(
                    uint32_t(rng.next_below(schema.d(x) + 2)), schema.d(x));
            row.read_version = rng.next_bool() ? ReadVersion::DirtyRead : ReadVersion::CleanRead;
            row.write_visibility =
                rng.next_bool() ? WriteVisibility::Public : WriteVisibility::Private;
            row.early_validate = rng.next_bool();
        }
    }
    const auto& dom = p.backoff.alpha_domain();
    for (TypeIndex t = 0; t < n; t++)
        for (uint32_t b = 0; b < BackoffPolicyTable::kBuckets; b++)
            for (TxnOutcome o : {TxnOutcome::Committed, TxnOutcome::Aborted})
                p.backoff.set_alpha(t, b, o, dom[rng.next_below(dom.size())]);
    return p;
}

// Tiny all-RMW workload over one table; every type touches `accesses`
// uniformly drawn keys. Handy for oracle and engine tests.
inline Workload mini_rmw_workload(uint32_t types, uint32_t accesses, uint64_t keys) {
    Workload w;
    auto s = std::make_shared<WorkloadSchema>();
    s->name = "mini";
    for (uint32_t t = 0; t < types; t++)
        s->txn_types.push_back({"T" + std::to_string(t + 1),
                                std::vector<AccessKind>(accesses, AccessKind::ReadModifyWrite)});
    s->check_valid();
    w.schema = s;
    w.tables = {{"t", false}};
    w.loader = [keys](Store& st) {
        for (uint64_t k = 0; k < keys; k++) st.load(0, make_key_u64(k), u64_value(0));
    };
    for (uint32_t t = 0; t < types; t++) {
        w.programs.push_back(
            {"T" + std::to_string(t + 1),
             std::vector<AccessKind>(accesses, AccessKind::ReadModifyWrite),
             [accesses](StepTxn& txn, const TxnInput& in) {
                 for (AccessId a = 1; a <= accesses; a++) {
                     Key k = make_key_u64(in.args[a - 1]);
                     auto v = txn.get(0, k, a);
                     uint64_t c = v ? ValueReader(*v).u64() : 0;
                     txn.put(0, k, u64_value(c + 1), a);
                 }
             }});
    }
    w.make_generator = [types, accesses, keys](uint64_t seed, uint32_t worker) {
        Rng rng = Rng(seed).split(worker + 7);
        return std::function<TxnInput()>([types, accesses, keys, rng]() mutable {
            TxnInput in;
            in.type = TypeIndex(rng.next_below(types));
            for (uint32_t a = 0; a < accesses; a++) in.args.push_back(rng.next_below(keys));
            return in;
        });
    };
    return w;
}

}  // namespace lccdb::test
