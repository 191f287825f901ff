#include <algorithm>
#include <sstream>
#include <unordered_map>

#include "lccdb/workloads.hpp"

namespace lccdb {

namespace {

struct RecordKey {
    TableId table;
    Key key;
    bool operator==(const RecordKey& o) const { return table == o.table && key == o.key; }
};

struct RecordKeyHash {
    size_t operator()(const RecordKey& k) const {
        return KeyHash{}(k.key) * 31 + k.table;
    }
};

struct Install {
    VersionId vid;
    VersionId prev;
    bool had_prev;
    uint32_t txn;
};

struct KeyChain {
    std::vector<Install> installs;
    // vid -> position in installs
    std::unordered_map<VersionId, uint32_t, VersionIdHash> by_vid;
    // prev vid -> position of its successor install
    std::unordered_map<VersionId, uint32_t, VersionIdHash> by_prev;
    uint32_t root = UINT32_MAX;           // install with no logged predecessor
    bool root_is_insert = false;          // root had no previous version at all
    VersionId initial;                    // committed version at run start (when !root_is_insert)
    bool has_initial = false;
};

std::string where(const RecordKey& rk) {
    return "table " + std::to_string(rk.table) + " key " + key_to_hex(rk.key);
}

// Reconstructs each key's install chain from the prev-vid links and verifies
// it is a single unbranched sequence covering every logged install.
std::unordered_map<RecordKey, KeyChain, RecordKeyHash> build_chains(
    const std::vector<CommitRecord>& log) {
    std::unordered_map<RecordKey, KeyChain, RecordKeyHash> chains;
    for (uint32_t i = 0; i < log.size(); i++) {
        for (const auto& wacc : log[i].writes) {
            RecordKey rk{wacc.table, wacc.key};
            KeyChain& ch = chains[rk];
            if (ch.by_vid.count(wacc.vid))
                throw MalformedLog("duplicate installed version " + wacc.vid.str() + " on " +
                                   where(rk));
            ch.by_vid.emplace(wacc.vid, uint32_t(ch.installs.size()));
            ch.installs.push_back({wacc.vid, wacc.prev_vid, wacc.had_prev, i});
        }
    }
    for (auto& [rk, ch] : chains) {
        for (uint32_t pos = 0; pos < ch.installs.size(); pos++) {
            const Install& ins = ch.installs[pos];
            if (ins.had_prev) {
                if (!ch.by_prev.emplace(ins.prev, pos).second)
                    throw MalformedLog("version chain branches at " + ins.prev.str() + " on " +
                                       where(rk));
            }
            if (!ins.had_prev || !ch.by_vid.count(ins.prev)) {
                if (ch.root != UINT32_MAX)
                    throw MalformedLog("version chain has two roots on " + where(rk));
                ch.root = pos;
                ch.root_is_insert = !ins.had_prev;
                if (ins.had_prev) {
                    ch.initial = ins.prev;
                    ch.has_initial = true;
                }
            }
        }
        // Walk the chain; it must cover every install.
        uint32_t covered = 0;
        uint32_t pos = ch.root;
        while (pos != UINT32_MAX) {
            covered++;
            auto it = ch.by_prev.find(ch.installs[pos].vid);
            pos = it == ch.by_prev.end() ? UINT32_MAX : it->second;
        }
        if (covered != ch.installs.size())
            throw MalformedLog("version chain is disconnected (missing vid) on " + where(rk));
    }
    return chains;
}

}  // namespace

SerializationGraph build_serialization_graph(const std::vector<CommitRecord>& log) {
    auto chains = build_chains(log);

    SerializationGraph g;
    g.txn_count = log.size();
    auto add_edge = [&](uint32_t from, uint32_t to, EdgeKind kind) {
        if (from == to) return;
        g.edges.emplace_back(from, to, kind);
    };

    // ww: adjacent installs in a key's chain.
    for (const auto& [rk, ch] : chains) {
        (void)rk;
        uint32_t pos = ch.root;
        while (pos != UINT32_MAX) {
            auto it = ch.by_prev.find(ch.installs[pos].vid);
            if (it == ch.by_prev.end()) break;
            add_edge(ch.installs[pos].txn, ch.installs[it->second].txn, EdgeKind::WriteWrite);
            pos = it->second;
        }
    }

    // wr and rw per logged read.
    for (uint32_t i = 0; i < log.size(); i++) {
        for (const auto& racc : log[i].reads) {
            RecordKey rk{racc.table, racc.key};
            auto cit = chains.find(rk);
            if (cit == chains.end()) continue;  // key never written in this log
            const KeyChain& ch = cit->second;
            auto vit = ch.by_vid.find(racc.vid);
            if (vit != ch.by_vid.end()) {
                add_edge(ch.installs[vit->second].txn, i, EdgeKind::WriteRead);
            } else if (!(ch.has_initial && racc.vid == ch.initial)) {
                throw MalformedLog("read of version " + racc.vid.str() +
                                   " missing from the chain of " + where(rk));
            }
            // Anti-dependency: whoever installs the successor of the version
            // we read comes after us.
            auto sit = ch.by_prev.find(racc.vid);
            if (sit != ch.by_prev.end())
                add_edge(i, ch.installs[sit->second].txn, EdgeKind::ReadWrite);
        }
    }

    std::sort(g.edges.begin(), g.edges.end());
    g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
    return g;
}

namespace {

// Iterative three-color DFS; fills `cycle` with one cycle if present.
bool find_cycle(size_t n, const std::vector<std::vector<uint32_t>>& adj,
                std::vector<uint32_t>& cycle) {
    std::vector<uint8_t> color(n, 0);  // 0 white, 1 gray, 2 black
    std::vector<uint32_t> parent(n, UINT32_MAX);
    for (uint32_t s = 0; s < n; s++) {
        if (color[s] != 0) continue;
        std::vector<std::pair<uint32_t, size_t>> stack{{s, 0}};
        color[s] = 1;
        while (!stack.empty()) {
            auto& [u, next] = stack.back();
            if (next < adj[u].size()) {
                uint32_t v = adj[u][next++];
                if (color[v] == 0) {
                    color[v] = 1;
                    parent[v] = u;
                    stack.emplace_back(v, 0);
                } else if (color[v] == 1) {
                    // unwind u -> ... -> v
                    cycle.clear();
                    uint32_t cur = u;
                    cycle.push_back(v);
                    while (cur != v && cur != UINT32_MAX) {
                        cycle.push_back(cur);
                        cur = parent[cur];
                    }
                    std::reverse(cycle.begin(), cycle.end());
                    return true;
                }
            } else {
                color[u] = 2;
                stack.pop_back();
            }
        }
    }
    return false;
}

}  // namespace

bool brute_force_serializable(const std::vector<CommitRecord>& log) {
    auto chains = build_chains(log);

    // Initial state per key: the chain root's predecessor, or "absent" for
    // inserts. Keys that are only read keep whatever single version appears.
    struct Cell {
        bool absent;
        VersionId vid;
    };
    std::unordered_map<RecordKey, Cell, RecordKeyHash> initial;
    for (const auto& [rk, ch] : chains)
        initial[rk] = ch.has_initial ? Cell{false, ch.initial} : Cell{true, {}};
    for (const auto& rec : log) {
        for (const auto& racc : rec.reads) {
            RecordKey rk{racc.table, racc.key};
            if (chains.count(rk)) continue;
            auto it = initial.find(rk);
            if (it == initial.end())
                initial[rk] = Cell{false, racc.vid};
            else if (it->second.absent || it->second.vid != racc.vid)
                return false;  // two different never-installed versions read
        }
    }

    std::vector<uint32_t> order(log.size());
    for (uint32_t i = 0; i < order.size(); i++) order[i] = i;

    auto replay = [&](const std::vector<uint32_t>& perm) {
        auto state = initial;
        for (uint32_t idx : perm) {
            const CommitRecord& rec = log[idx];
            for (const auto& racc : rec.reads) {
                auto it = state.find({racc.table, racc.key});
                if (it == state.end() || it->second.absent || it->second.vid != racc.vid)
                    return false;
            }
            for (const auto& wacc : rec.writes)
                state[{wacc.table, wacc.key}] = Cell{false, wacc.vid};
        }
        return true;
    };

    std::sort(order.begin(), order.end());
    do {
        if (replay(order)) return true;
    } while (std::next_permutation(order.begin(), order.end()));
    return false;
}

SerializabilityVerdict check_serializable(const std::vector<CommitRecord>& log,
                                          size_t brute_force_limit) {
    SerializabilityVerdict v;
    SerializationGraph g = build_serialization_graph(log);
    std::vector<std::vector<uint32_t>> adj(g.txn_count);
    for (const auto& [from, to, kind] : g.edges) {
        (void)kind;
        adj[from].push_back(to);
    }
    std::vector<uint32_t> cycle;
    if (find_cycle(g.txn_count, adj, cycle)) {
        v.ok = false;
        for (uint32_t i : cycle) v.cycle.push_back(log[i].attempt_id);
    }
    if (log.size() <= brute_force_limit) v.brute_force_ok = brute_force_serializable(log);
    return v;
}

bool commit_order_respected(const std::vector<CommitRecord>& log,
                            const SerializationGraph& graph) {
    for (const auto& [from, to, kind] : graph.edges) {
        (void)kind;
        if (log[from].lock_ts >= log[to].lock_ts) return false;
    }
    return true;
}

std::string log_to_text(const std::vector<CommitRecord>& log) {
    std::ostringstream out;
    for (const auto& r : log) out << commit_record_to_line(r) << "\n";
    return out.str();
}

std::vector<CommitRecord> log_from_text(const std::string& text) {
    std::vector<CommitRecord> log;
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        lineno++;
        if (line.empty()) continue;
        try {
            log.push_back(commit_record_from_line(line));
        } catch (const std::exception& e) {
            throw MalformedLog("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return log;
}

}  // namespace lccdb
