#include "lccdb/workloads.hpp"

#include <atomic>

#include "lccdb/rng.hpp"

namespace lccdb {

namespace {

// ---- TPC-C-lite ------------------------------------------------------------
//
// Three read-write transaction types over a conventional warehouse layout.
// Loops over order lines collapse to one access-id per static call site, so
// NewOrder has 12 static accesses, Payment 8 and Delivery 6.

enum TpccTable : TableId {
    kWarehouse = 0,
    kDistrict,
    kCustomer,
    kItem,
    kStock,
    kStockData,
    kOorder,
    kOorderCidx,
    kNewOrder,
    kOrderLine,
    kHistSeq,
    kHistory,
};

Key wh_key(uint32_t w) { return KeyBuilder().u32(w).build(); }
Key dist_key(uint32_t w, uint32_t d) { return KeyBuilder().u32(w).u32(d).build(); }
Key cust_key(uint32_t w, uint32_t d, uint32_t c) {
    return KeyBuilder().u32(w).u32(d).u32(c).build();
}
Key item_key(uint32_t i) { return KeyBuilder().u32(i).build(); }
Key stock_key(uint32_t w, uint32_t i) { return KeyBuilder().u32(w).u32(i).build(); }
Key order_key(uint32_t w, uint32_t d, uint32_t o) {
    return KeyBuilder().u32(w).u32(d).u32(o).build();
}
Key ol_key(uint32_t w, uint32_t d, uint32_t o, uint32_t l) {
    return KeyBuilder().u32(w).u32(d).u32(o).u32(l).build();
}
Key cidx_key(uint32_t w, uint32_t d, uint32_t c, uint32_t o) {
    return KeyBuilder().u32(w).u32(d).u32(c).u32(o).build();
}

struct TpccState {
    TpccParams params;
    // Advisory per-district scan cursor: orders below it are known delivered.
    std::vector<std::atomic<uint32_t>> delivery_hint;

    size_t dslot(uint32_t w, uint32_t d) const {
        return size_t(w - 1) * params.districts_per_wh + (d - 1);
    }
};

constexpr AccessId NO_CUST = 1, NO_WARE = 2, NO_DIST_R = 3, NO_DIST_W = 4, NO_NEWORD = 5,
                   NO_OORDER = 6, NO_CIDX = 7, NO_ITEM = 8, NO_SDATA = 9, NO_STOCK_R = 10,
                   NO_STOCK_W = 11, NO_OLINE = 12;
constexpr AccessId PAY_WARE_R = 1, PAY_WARE_W = 2, PAY_DIST_R = 3, PAY_DIST_W = 4, PAY_CUST_R = 5,
                   PAY_CUST_W = 6, PAY_SEQ = 7, PAY_HIST = 8;
constexpr AccessId DLV_NEWORD = 1, DLV_OORDER = 2, DLV_OLINE_R = 3, DLV_OLINE_W = 4, DLV_CUST_R = 5,
                   DLV_CUST_W = 6;

void new_order_body(StepTxn& txn, const TxnInput& in) {
    const uint32_t w = uint32_t(in.args[0]), d = uint32_t(in.args[1]), c = uint32_t(in.args[2]);
    const uint32_t n_items = 3;

    txn.get(kCustomer, cust_key(w, d, c), NO_CUST);
    txn.get(kWarehouse, wh_key(w), NO_WARE);
    auto dist = txn.get(kDistrict, dist_key(w, d), NO_DIST_R);
    ValueReader dr(*dist);
    uint32_t o = dr.u32();
    int64_t d_ytd = dr.i64();
    uint32_t d_tax = dr.u32();
    txn.put(kDistrict, dist_key(w, d),
            ValueWriter().u32(o + 1).i64(d_ytd).u32(d_tax).build(), NO_DIST_W);

    txn.put(kNewOrder, order_key(w, d, o), ValueWriter().u32(1).build(), NO_NEWORD);
    txn.put(kOorder, order_key(w, d, o),
            ValueWriter().u32(c).u32(n_items).u32(0).build(), NO_OORDER);
    txn.put(kOorderCidx, cidx_key(w, d, c, o), ValueWriter().u32(o).build(), NO_CIDX);

    uint32_t price[n_items];
    for (uint32_t j = 0; j < n_items; j++) {
        uint32_t i = uint32_t(in.args[3 + j * 3]);
        auto iv = txn.get(kItem, item_key(i), NO_ITEM);
        price[j] = ValueReader(*iv).u32();
    }
    for (uint32_t j = 0; j < n_items; j++) {
        uint32_t i = uint32_t(in.args[3 + j * 3]);
        uint32_t sw = uint32_t(in.args[5 + j * 3]);
        txn.get(kStockData, stock_key(sw, i), NO_SDATA);
    }
    int64_t qty[n_items], ytd[n_items];
    uint32_t cnt[n_items];
    for (uint32_t j = 0; j < n_items; j++) {
        uint32_t i = uint32_t(in.args[3 + j * 3]);
        uint32_t sw = uint32_t(in.args[5 + j * 3]);
        auto sv = txn.get(kStock, stock_key(sw, i), NO_STOCK_R);
        ValueReader sr(*sv);
        qty[j] = sr.i64();
        ytd[j] = sr.i64();
        cnt[j] = sr.u32();
    }
    for (uint32_t j = 0; j < n_items; j++) {
        uint32_t i = uint32_t(in.args[3 + j * 3]);
        uint32_t q = uint32_t(in.args[4 + j * 3]);
        uint32_t sw = uint32_t(in.args[5 + j * 3]);
        int64_t new_qty = qty[j] >= int64_t(q) + 10 ? qty[j] - q : qty[j] + 91 - q;
        txn.put(kStock, stock_key(sw, i),
                ValueWriter().i64(new_qty).i64(ytd[j] + q).u32(cnt[j] + 1).build(), NO_STOCK_W);
    }
    for (uint32_t j = 0; j < n_items; j++) {
        uint32_t i = uint32_t(in.args[3 + j * 3]);
        uint32_t q = uint32_t(in.args[4 + j * 3]);
        txn.put(kOrderLine, ol_key(w, d, o, j + 1),
                ValueWriter().u32(i).u32(q).i64(int64_t(price[j]) * q).u32(0).build(), NO_OLINE);
    }
}

void payment_body(StepTxn& txn, const TxnInput& in) {
    const uint32_t w = uint32_t(in.args[0]), d = uint32_t(in.args[1]), c = uint32_t(in.args[2]);
    const int64_t amount = int64_t(in.args[3]);

    auto wv = txn.get(kWarehouse, wh_key(w), PAY_WARE_R);
    ValueReader wr(*wv);
    int64_t w_ytd = wr.i64();
    uint32_t w_tax = wr.u32();
    txn.put(kWarehouse, wh_key(w), ValueWriter().i64(w_ytd + amount).u32(w_tax).build(),
            PAY_WARE_W);

    auto dv = txn.get(kDistrict, dist_key(w, d), PAY_DIST_R);
    ValueReader dr(*dv);
    uint32_t next_o = dr.u32();
    int64_t d_ytd = dr.i64();
    uint32_t d_tax = dr.u32();
    txn.put(kDistrict, dist_key(w, d),
            ValueWriter().u32(next_o).i64(d_ytd + amount).u32(d_tax).build(), PAY_DIST_W);

    auto cv = txn.get(kCustomer, cust_key(w, d, c), PAY_CUST_R);
    ValueReader cr(*cv);
    int64_t bal = cr.i64(), ytd_pay = cr.i64();
    uint32_t pay_cnt = cr.u32(), dlv_cnt = cr.u32();
    txn.put(kCustomer, cust_key(w, d, c),
            ValueWriter().i64(bal - amount).i64(ytd_pay + amount).u32(pay_cnt + 1).u32(dlv_cnt)
                .build(),
            PAY_CUST_W);

    // History key allocation: per-district sequence, one static RMW location.
    auto sv = txn.get(kHistSeq, dist_key(w, d), PAY_SEQ);
    uint32_t seq = ValueReader(*sv).u32();
    txn.put(kHistSeq, dist_key(w, d), ValueWriter().u32(seq + 1).build(), PAY_SEQ);

    txn.put(kHistory, order_key(w, d, seq), ValueWriter().u32(c).i64(amount).build(), PAY_HIST);
}

void delivery_body(StepTxn& txn, const TxnInput& in, TpccState& state) {
    const uint32_t w = uint32_t(in.args[0]), d = uint32_t(in.args[1]);
    const uint32_t carrier = uint32_t(in.args[2]);

    // Oldest undelivered order: committed-only scan from the advisory cursor.
    auto& hint = state.delivery_hint[state.dslot(w, d)];
    uint32_t from = hint.load(std::memory_order_relaxed);
    auto found = txn.scan_first_committed(
        kNewOrder, order_key(w, d, from), order_key(w, d, UINT32_MAX),
        [](const Key&, const Value& v) { return ValueReader(v).u32() == 1; });
    uint32_t o = from;
    if (found) {
        o = (uint32_t(found->first.bytes[8]) << 24) | (uint32_t(found->first.bytes[9]) << 16) |
            (uint32_t(found->first.bytes[10]) << 8) | uint32_t(found->first.bytes[11]);
        // Everything below o is committed-delivered; advance the cursor.
        uint32_t cur = hint.load(std::memory_order_relaxed);
        while (cur < o && !hint.compare_exchange_weak(cur, o, std::memory_order_relaxed)) {
        }
    }

    auto nv = txn.get(kNewOrder, order_key(w, d, o), DLV_NEWORD);
    (void)nv;  // pending flag; re-delivery of a raced order is harmless
    txn.put(kNewOrder, order_key(w, d, o), ValueWriter().u32(0).build(), DLV_NEWORD);

    uint32_t c = 1, ol_cnt = 0;
    auto ov = txn.get(kOorder, order_key(w, d, o), DLV_OORDER);
    if (ov) {
        ValueReader orr(*ov);
        c = orr.u32();
        ol_cnt = orr.u32();
    }

    int64_t total = 0;
    struct Line {
        uint32_t item, qty;
        int64_t amount;
    };
    std::vector<Line> lines(ol_cnt);
    for (uint32_t l = 1; l <= ol_cnt; l++) {
        auto lv = txn.get(kOrderLine, ol_key(w, d, o, l), DLV_OLINE_R);
        if (!lv) continue;
        ValueReader lr(*lv);
        lines[l - 1].item = lr.u32();
        lines[l - 1].qty = lr.u32();
        lines[l - 1].amount = lr.i64();
        total += lines[l - 1].amount;
    }
    for (uint32_t l = 1; l <= ol_cnt; l++) {
        txn.put(kOrderLine, ol_key(w, d, o, l),
                ValueWriter().u32(lines[l - 1].item).u32(lines[l - 1].qty)
                    .i64(lines[l - 1].amount).u32(carrier).build(),
                DLV_OLINE_W);
    }

    auto cv = txn.get(kCustomer, cust_key(w, d, c), DLV_CUST_R);
    ValueReader cr(*cv);
    int64_t bal = cr.i64(), ytd_pay = cr.i64();
    uint32_t pay_cnt = cr.u32(), dlv_cnt = cr.u32();
    txn.put(kCustomer, cust_key(w, d, c),
            ValueWriter().i64(bal + total).i64(ytd_pay).u32(pay_cnt).u32(dlv_cnt + 1).build(),
            DLV_CUST_W);
}

void tpcc_load(Store& store, const TpccParams& p) {
    Rng rng(0x7c0ffee);
    for (uint32_t i = 1; i <= p.items; i++)
        store.load(kItem, item_key(i), ValueWriter().u32(1 + uint32_t(rng.next_below(100))).build());
    for (uint32_t w = 1; w <= p.warehouses; w++) {
        store.load(kWarehouse, wh_key(w),
                   ValueWriter().i64(0).u32(uint32_t(rng.next_below(2000))).build());
        for (uint32_t i = 1; i <= p.items; i++) {
            store.load(kStock, stock_key(w, i),
                       ValueWriter().i64(int64_t(10 + rng.next_below(91))).i64(0).u32(0).build());
            store.load(kStockData, stock_key(w, i), ValueWriter().u64(rng.next_u64()).build());
        }
        for (uint32_t d = 1; d <= p.districts_per_wh; d++) {
            uint32_t next_o = p.initial_orders_per_district + 1;
            store.load(kDistrict, dist_key(w, d),
                       ValueWriter().u32(next_o).i64(0).u32(uint32_t(rng.next_below(2000))).build());
            store.load(kHistSeq, dist_key(w, d), ValueWriter().u32(0).build());
            for (uint32_t c = 1; c <= p.customers_per_district; c++)
                store.load(kCustomer, cust_key(w, d, c),
                           ValueWriter().i64(-1000).i64(1000).u32(1).u32(0).build());
            for (uint32_t o = 1; o <= p.initial_orders_per_district; o++) {
                uint32_t c = 1 + uint32_t(rng.next_below(p.customers_per_district));
                bool pending = o + p.initial_pending_per_district > p.initial_orders_per_district;
                store.load(kOorder, order_key(w, d, o),
                           ValueWriter().u32(c).u32(p.items_per_order)
                               .u32(pending ? 0 : 1 + uint32_t(rng.next_below(10))).build());
                store.load(kOorderCidx, cidx_key(w, d, c, o), ValueWriter().u32(o).build());
                if (pending)
                    store.load(kNewOrder, order_key(w, d, o), ValueWriter().u32(1).build());
                for (uint32_t l = 1; l <= p.items_per_order; l++) {
                    uint32_t i = 1 + uint32_t(rng.next_below(p.items));
                    uint32_t q = 1 + uint32_t(rng.next_below(10));
                    store.load(kOrderLine, ol_key(w, d, o, l),
                               ValueWriter().u32(i).u32(q).i64(int64_t(q) * 50)
                                   .u32(pending ? 0 : 7).build());
                }
            }
        }
    }
}

// ---- Microbenchmark --------------------------------------------------------
//
// Ten transaction types, eight read-modify-write accesses each. The first
// access hits a small hot range with Zipfian skew, accesses 2..7 update a
// large low-contention range, the last access updates a type-unique table.

enum MicroTable : TableId { kHot = 0, kLow = 1, kUniqueBase = 2 };

constexpr uint32_t kMicroTypes = 10;
constexpr uint32_t kMicroAccesses = 8;

void micro_body(StepTxn& txn, const TxnInput& in) {
    for (uint32_t j = 1; j <= kMicroAccesses; j++) {
        TableId table = j == 1 ? kHot
                      : j == kMicroAccesses ? TableId(kUniqueBase + in.type)
                                            : kLow;
        Key k = make_key_u64(in.args[j - 1]);
        auto v = txn.get(table, k, j);
        uint64_t counter = v ? ValueReader(*v).u64() : 0;
        txn.put(table, k, ValueWriter().u64(counter + 1).build(), j);
    }
}

}  // namespace

std::shared_ptr<const WorkloadSchema> tpcc_lite_schema() {
    static const auto schema = [] {
        auto s = std::make_shared<WorkloadSchema>();
        s->name = "tpcc_lite";
        using K = AccessKind;
        s->txn_types.push_back(
            {"NewOrder",
             {K::Read, K::Read, K::Read, K::Write, K::Write, K::Write, K::Write, K::Read, K::Read,
              K::Read, K::Write, K::Write}});
        s->txn_types.push_back(
            {"Payment",
             {K::Read, K::Write, K::Read, K::Write, K::Read, K::Write, K::ReadModifyWrite,
              K::Write}});
        s->txn_types.push_back(
            {"Delivery",
             {K::ReadModifyWrite, K::Read, K::Read, K::Write, K::Read, K::Write}});
        s->check_valid();
        return std::shared_ptr<const WorkloadSchema>(s);
    }();
    return schema;
}

std::shared_ptr<const WorkloadSchema> microbench_schema() {
    static const auto schema = [] {
        auto s = std::make_shared<WorkloadSchema>();
        s->name = "microbench";
        for (uint32_t t = 0; t < kMicroTypes; t++)
            s->txn_types.push_back(
                {"Micro" + std::to_string(t + 1),
                 std::vector<AccessKind>(kMicroAccesses, AccessKind::ReadModifyWrite)});
        s->check_valid();
        return std::shared_ptr<const WorkloadSchema>(s);
    }();
    return schema;
}

std::shared_ptr<const WorkloadSchema> schema_by_name(const std::string& name) {
    if (name == "tpcc_lite") return tpcc_lite_schema();
    if (name == "microbench") return microbench_schema();
    throw std::invalid_argument("unknown schema: " + name);
}

Workload make_tpcc_lite(const TpccParams& params) {
    Workload w;
    w.schema = tpcc_lite_schema();
    w.tables = {
        {"warehouse", false}, {"district", false},   {"customer", false}, {"item", false},
        {"stock", false},     {"stock_data", false}, {"oorder", false},   {"oorder_cidx", false},
        {"new_order", true},  {"order_line", false}, {"hist_seq", false}, {"history", false},
    };
    auto state = std::make_shared<TpccState>();
    state->params = params;
    state->delivery_hint = std::vector<std::atomic<uint32_t>>(
        size_t(params.warehouses) * params.districts_per_wh);
    uint32_t first_pending =
        params.initial_orders_per_district - params.initial_pending_per_district + 1;
    for (auto& h : state->delivery_hint) h.store(first_pending);

    w.loader = [params](Store& s) { tpcc_load(s, params); };
    w.programs.resize(3);
    w.programs[0] = {"NewOrder", tpcc_lite_schema()->txn_types[0].access_kinds, new_order_body};
    w.programs[1] = {"Payment", tpcc_lite_schema()->txn_types[1].access_kinds, payment_body};
    w.programs[2] = {"Delivery", tpcc_lite_schema()->txn_types[2].access_kinds,
                     [state](StepTxn& t, const TxnInput& in) { delivery_body(t, in, *state); }};

    w.make_generator = [params](uint64_t seed, uint32_t worker) {
        Rng rng = Rng(seed).split(worker + 1);
        auto delivery_rr = std::make_shared<uint32_t>(worker);
        return std::function<TxnInput()>([params, rng, delivery_rr]() mutable {
            TxnInput in;
            uint32_t w = 1 + uint32_t(rng.next_below(params.warehouses));
            uint64_t mix = rng.next_below(92);
            if (mix < 45) {
                in.type = 0;
                uint32_t d = 1 + uint32_t(rng.next_below(params.districts_per_wh));
                uint32_t c = 1 + uint32_t(rng.next_below(params.customers_per_district));
                in.args = {w, d, c};
                uint32_t picked[8] = {0};
                for (uint32_t j = 0; j < params.items_per_order; j++) {
                    uint32_t item;
                    bool dup;
                    do {
                        item = 1 + uint32_t(rng.next_below(params.items));
                        dup = false;
                        for (uint32_t k = 0; k < j; k++) dup |= picked[k] == item;
                    } while (dup);
                    picked[j] = item;
                    uint32_t qty = 1 + uint32_t(rng.next_below(10));
                    uint32_t supply = w;
                    if (params.warehouses > 1 && rng.next_below(100) < params.remote_pct) {
                        do {
                            supply = 1 + uint32_t(rng.next_below(params.warehouses));
                        } while (supply == w);
                    }
                    in.args.push_back(item);
                    in.args.push_back(qty);
                    in.args.push_back(supply);
                }
            } else if (mix < 88) {
                in.type = 1;
                uint32_t d = 1 + uint32_t(rng.next_below(params.districts_per_wh));
                uint32_t c = 1 + uint32_t(rng.next_below(params.customers_per_district));
                in.args = {w, d, c, 1 + rng.next_below(5000)};
            } else {
                in.type = 2;
                uint32_t d = 1 + (*delivery_rr)++ % params.districts_per_wh;
                in.args = {w, d, 1 + rng.next_below(10)};
            }
            return in;
        });
    };
    return w;
}

Workload make_microbench(const MicrobenchParams& params) {
    Workload w;
    w.schema = microbench_schema();
    w.tables.push_back({"hot", false});
    w.tables.push_back({"low", false});
    for (uint32_t t = 0; t < kMicroTypes; t++) w.tables.push_back({"u" + std::to_string(t), false});

    MicrobenchParams p = params;
    w.loader = [p](Store& s) {
        for (uint64_t k = 0; k < p.hot_keys; k++)
            s.load(kHot, make_key_u64(k), ValueWriter().u64(0).build());
        for (uint64_t k = 0; k < p.low_keys; k++)
            s.load(kLow, make_key_u64(k), ValueWriter().u64(0).build());
        for (uint32_t t = 0; t < kMicroTypes; t++)
            for (uint64_t k = 0; k < p.unique_keys; k++)
                s.load(TableId(kUniqueBase + t), make_key_u64(k), ValueWriter().u64(0).build());
    };

    auto zipf = std::make_shared<ZipfGen>(
        p.hot_partitioned ? std::max<uint64_t>(1, p.hot_keys / std::max(1u, p.partitions))
                          : p.hot_keys,
        p.theta);
    w.programs.resize(kMicroTypes);
    for (uint32_t t = 0; t < kMicroTypes; t++)
        w.programs[t] = {"Micro" + std::to_string(t + 1),
                         microbench_schema()->txn_types[t].access_kinds, micro_body};

    w.make_generator = [p, zipf](uint64_t seed, uint32_t worker) {
        Rng rng = Rng(seed).split(worker + 1);
        uint64_t slice = p.hot_partitioned
                             ? std::max<uint64_t>(1, p.hot_keys / std::max(1u, p.partitions))
                             : p.hot_keys;
        uint64_t base = p.hot_partitioned ? (worker % std::max(1u, p.partitions)) * slice : 0;
        return std::function<TxnInput()>([p, zipf, rng, slice, base]() mutable {
            TxnInput in;
            in.type = TypeIndex(rng.next_below(kMicroTypes));
            in.args.resize(kMicroAccesses);
            in.args[0] = base + (zipf->sample(rng) - 1) % slice;
            for (uint32_t j = 1; j < kMicroAccesses - 1; j++)
                in.args[j] = rng.next_below(p.low_keys);
            in.args[kMicroAccesses - 1] = rng.next_below(p.unique_keys);
            return in;
        });
    };
    return w;
}

}  // namespace lccdb
