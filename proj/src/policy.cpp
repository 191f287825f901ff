#include "lccdb/policy.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "json.hpp"

namespace lccdb {

using ordered_json = nlohmann::ordered_json;

std::optional<TypeIndex> WorkloadSchema::type_by_name(const std::string& n) const {
    for (TypeIndex i = 0; i < txn_types.size(); i++)
        if (txn_types[i].name == n) return i;
    return std::nullopt;
}

void WorkloadSchema::check_valid() const {
    if (txn_types.empty()) throw std::invalid_argument("schema has no transaction types");
    std::set<std::string> names;
    for (const auto& t : txn_types) {
        if (t.access_kinds.empty())
            throw std::invalid_argument("type " + t.name + " has zero accesses");
        if (!names.insert(t.name).second)
            throw std::invalid_argument("duplicate type name " + t.name);
    }
}

uint32_t WaitTarget::domain_index(uint32_t d) const {
    switch (kind) {
        case Kind::NoWait: return 0;
        case Kind::Access: return access;
        case Kind::Commit: return d + 1;
    }
    return 0;
}

WaitTarget WaitTarget::from_domain_index(uint32_t idx, uint32_t d) {
    if (idx == 0) return no_wait();
    if (idx >= d + 1) return commit();
    return at_access(idx);
}

int32_t WaitTarget::encode() const {
    switch (kind) {
        case Kind::NoWait: return -1;
        case Kind::Commit: return 0;
        case Kind::Access: return int32_t(access);
    }
    return -1;
}

WaitTarget WaitTarget::decode(int32_t v) {
    if (v == -1) return no_wait();
    if (v == 0) return commit();
    if (v < 0) throw std::invalid_argument("bad wait target encoding");
    return at_access(AccessId(v));
}

CcPolicyTable::CcPolicyTable(std::string schema_name, std::vector<uint32_t> dims,
                             std::vector<ActionRow> rows)
    : schema_name_(std::move(schema_name)), dims_(std::move(dims)), rows_(std::move(rows)) {
    offsets_.resize(dims_.size());
    size_t acc = 0;
    for (size_t i = 0; i < dims_.size(); i++) {
        offsets_[i] = acc;
        acc += dims_[i];
    }
    if (acc != rows_.size()) throw std::invalid_argument("row count does not match dims");
}

std::vector<Rational> BackoffPolicyTable::default_alpha_domain() {
    return {Rational(0, 1), Rational(1, 4), Rational(1, 2), Rational(1, 1), Rational(2, 1),
            Rational(4, 1)};
}

BackoffPolicyTable::BackoffPolicyTable(uint32_t type_count, std::vector<Rational> alpha_domain)
    : entries_(size_t(type_count) * kBuckets * 2, Rational(0, 1)),
      alpha_domain_(std::move(alpha_domain)) {
    if (alpha_domain_.empty()) alpha_domain_ = default_alpha_domain();
}

std::optional<SeedKind> seed_kind_by_name(const std::string& name) {
    if (name == "occ") return SeedKind::Occ;
    if (name == "2pl" || name == "2pl*" || name == "two_pl_star") return SeedKind::TwoPlStar;
    if (name == "pipeline") return SeedKind::Pipeline;
    return std::nullopt;
}

const char* seed_kind_name(SeedKind k) {
    switch (k) {
        case SeedKind::Occ: return "occ";
        case SeedKind::TwoPlStar: return "2pl*";
        case SeedKind::Pipeline: return "pipeline";
    }
    return "?";
}

uint64_t state_count(const WorkloadSchema& schema) {
    schema.check_valid();
    uint64_t n = 0;
    for (const auto& t : schema.txn_types) n += t.access_count();
    return n;
}

static uint64_t checked_mul(uint64_t a, uint64_t b) {
    uint64_t r;
    if (__builtin_mul_overflow(a, b, &r)) throw std::overflow_error("action space exceeds 64 bits");
    return r;
}

ActionSpaceSize action_combinations_per_state(const WorkloadSchema& schema) {
    schema.check_valid();
    ActionSpaceSize s{1, 1};
    for (const auto& t : schema.txn_types) {
        s.formula_value = checked_mul(s.formula_value, t.access_count());
        s.implemented_value = checked_mul(s.implemented_value, t.access_count() + 2);
    }
    s.formula_value = checked_mul(s.formula_value, 8);
    s.implemented_value = checked_mul(s.implemented_value, 8);
    return s;
}

PolicyPair seed_policy(const WorkloadSchema& schema, SeedKind kind) {
    schema.check_valid();
    const uint32_t n = schema.type_count();
    std::vector<uint32_t> dims;
    for (const auto& t : schema.txn_types) dims.push_back(t.access_count());

    std::vector<ActionRow> rows;
    for (TypeIndex t = 0; t < n; t++) {
        for (AccessId a = 1; a <= dims[t]; a++) {
            ActionRow row;
            row.wait_targets.resize(n);
            switch (kind) {
                case SeedKind::Occ:
                    for (auto& w : row.wait_targets) w = WaitTarget::no_wait();
                    row.read_version = ReadVersion::CleanRead;
                    row.write_visibility = WriteVisibility::Private;
                    row.early_validate = false;
                    break;
                case SeedKind::TwoPlStar:
                    for (auto& w : row.wait_targets) w = WaitTarget::commit();
                    row.read_version = ReadVersion::CleanRead;
                    row.write_visibility = WriteVisibility::Public;
                    row.early_validate = true;
                    break;
                case SeedKind::Pipeline:
                    // Pipelined execution: let dependencies of every type get
                    // past the same access position before touching the data.
                    for (TypeIndex x = 0; x < n; x++)
                        row.wait_targets[x] = WaitTarget::at_access(std::min(a, dims[x]));
                    row.read_version = ReadVersion::DirtyRead;
                    row.write_visibility = WriteVisibility::Public;
                    row.early_validate = true;
                    break;
            }
            rows.push_back(std::move(row));
        }
    }

    // All seeds start from the same backoff behaviour: double on abort,
    // halve on commit, for every type and abort bucket.
    BackoffPolicyTable backoff(n, BackoffPolicyTable::default_alpha_domain());
    for (TypeIndex t = 0; t < n; t++)
        for (uint32_t b = 0; b < BackoffPolicyTable::kBuckets; b++) {
            backoff.set_alpha(t, b, TxnOutcome::Committed, Rational(1, 1));
            backoff.set_alpha(t, b, TxnOutcome::Aborted, Rational(1, 1));
        }

    return {CcPolicyTable(schema.name, dims, std::move(rows)), std::move(backoff)};
}

static ordered_json alpha_to_json(const Rational& a) {
    if (a.den() == 1) return ordered_json(a.num());
    return ordered_json(a.to_double());
}

std::string serialize_policy(const CcPolicyTable& cc, const BackoffPolicyTable& backoff) {
    ordered_json doc;
    doc["format"] = 1;
    doc["schema"] = cc.schema_name();
    ordered_json rows = ordered_json::array();
    const auto& dims = cc.dims();
    for (TypeIndex t = 0; t < dims.size(); t++) {
        for (AccessId a = 1; a <= dims[t]; a++) {
            const ActionRow& r = cc.row(t, a);
            ordered_json jr;
            jr["type"] = t;
            jr["access"] = a;
            ordered_json waits = ordered_json::array();
            for (const auto& w : r.wait_targets) waits.push_back(w.encode());
            jr["waits"] = std::move(waits);
            jr["read_version"] = r.read_version == ReadVersion::DirtyRead ? "DIRTY" : "CLEAN";
            jr["write_visibility"] =
                r.write_visibility == WriteVisibility::Public ? "PUBLIC" : "PRIVATE";
            jr["early_validate"] = r.early_validate;
            rows.push_back(std::move(jr));
        }
    }
    doc["cc_rows"] = std::move(rows);
    ordered_json bo = ordered_json::array();
    for (TypeIndex t = 0; t < backoff.type_count(); t++) {
        for (uint32_t b = 0; b < BackoffPolicyTable::kBuckets; b++) {
            for (TxnOutcome o : {TxnOutcome::Committed, TxnOutcome::Aborted}) {
                ordered_json je;
                je["type"] = t;
                je["bucket"] = b;
                je["outcome"] = o == TxnOutcome::Committed ? "COMMITTED" : "ABORTED";
                je["alpha"] = alpha_to_json(backoff.alpha(t, b, o));
                bo.push_back(std::move(je));
            }
        }
    }
    doc["backoff"] = std::move(bo);
    ordered_json dom = ordered_json::array();
    for (const auto& a : backoff.alpha_domain()) dom.push_back(alpha_to_json(a));
    doc["alpha_domain"] = std::move(dom);
    return doc.dump(2) + "\n";
}

static PolicyParseError err(PolicyParseErrorKind k, const std::string& m) {
    return PolicyParseError(k, m);
}

static Rational parse_alpha(const ordered_json& j, const std::string& where) {
    if (!j.is_number())
        throw err(PolicyParseErrorKind::BadField, where + ": alpha must be a number");
    double v = j.get<double>();
    if (v < 0) throw err(PolicyParseErrorKind::AlphaNotInDomain, where + ": alpha must be >= 0");
    Rational r;
    if (!Rational::try_from_double(v, r))
        throw err(PolicyParseErrorKind::BadField, where + ": alpha not representable");
    return r;
}

PolicyPair parse_policy(const std::string& bytes, const WorkloadSchema& schema) {
    schema.check_valid();
    ordered_json doc;
    try {
        doc = ordered_json::parse(bytes);
    } catch (const std::exception& e) {
        throw err(PolicyParseErrorKind::BadDocument, std::string("bad policy document: ") + e.what());
    }
    if (!doc.is_object()) throw err(PolicyParseErrorKind::BadDocument, "policy is not an object");
    if (!doc.contains("format") || !doc["format"].is_number_integer() || doc["format"] != 1)
        throw err(PolicyParseErrorKind::BadFormatVersion, "missing or unsupported format version");
    if (!doc.contains("schema") || !doc["schema"].is_string())
        throw err(PolicyParseErrorKind::BadField, "missing schema field");
    std::string sname = doc["schema"].get<std::string>();
    if (sname != schema.name)
        throw err(PolicyParseErrorKind::SchemaMismatch,
                  "policy schema \"" + sname + "\" does not match workload schema \"" +
                      schema.name + "\"");

    const uint32_t n = schema.type_count();
    std::vector<uint32_t> dims;
    uint64_t expected_rows = 0;
    for (const auto& t : schema.txn_types) {
        dims.push_back(t.access_count());
        expected_rows += t.access_count();
    }

    if (!doc.contains("cc_rows") || !doc["cc_rows"].is_array())
        throw err(PolicyParseErrorKind::BadField, "missing cc_rows array");
    const auto& jrows = doc["cc_rows"];
    if (jrows.size() != expected_rows)
        throw err(PolicyParseErrorKind::RowCountMismatch,
                  "row count " + std::to_string(jrows.size()) + " != " +
                      std::to_string(expected_rows));

    std::vector<ActionRow> rows(expected_rows);
    std::vector<bool> seen(expected_rows, false);
    std::vector<size_t> offsets(n);
    {
        size_t acc = 0;
        for (size_t i = 0; i < n; i++) {
            offsets[i] = acc;
            acc += dims[i];
        }
    }
    for (const auto& jr : jrows) {
        if (!jr.is_object() || !jr.contains("type") || !jr.contains("access"))
            throw err(PolicyParseErrorKind::BadField, "cc row missing type/access");
        uint64_t t = jr["type"].get<uint64_t>();
        if (t >= n)
            throw err(PolicyParseErrorKind::UnknownType,
                      "cc row references unknown type index " + std::to_string(t));
        uint64_t a = jr["access"].get<uint64_t>();
        const std::string where = "row (type " + std::to_string(t) + ", access " +
                                  std::to_string(a) + ")";
        if (a < 1 || a > dims[t])
            throw err(PolicyParseErrorKind::BadField, where + ": access id out of range");
        ActionRow row;
        if (!jr.contains("waits") || !jr["waits"].is_array() || jr["waits"].size() != n)
            throw err(PolicyParseErrorKind::BadField, where + ": waits must list one target per type");
        row.wait_targets.resize(n);
        for (uint32_t x = 0; x < n; x++) {
            int64_t enc = jr["waits"][x].get<int64_t>();
            if (enc < -1 || enc > int64_t(dims[x]))
                throw err(PolicyParseErrorKind::WaitTargetOutOfRange,
                          where + ": wait target " + std::to_string(enc) + " for type " +
                              std::to_string(x) + " outside [-1, " + std::to_string(dims[x]) + "]");
            row.wait_targets[x] = WaitTarget::decode(int32_t(enc));
        }
        std::string rv = jr.value("read_version", std::string());
        if (rv == "CLEAN")
            row.read_version = ReadVersion::CleanRead;
        else if (rv == "DIRTY")
            row.read_version = ReadVersion::DirtyRead;
        else
            throw err(PolicyParseErrorKind::BadField, where + ": bad read_version");
        std::string wv = jr.value("write_visibility", std::string());
        if (wv == "PRIVATE")
            row.write_visibility = WriteVisibility::Private;
        else if (wv == "PUBLIC")
            row.write_visibility = WriteVisibility::Public;
        else
            throw err(PolicyParseErrorKind::BadField, where + ": bad write_visibility");
        if (!jr.contains("early_validate") || !jr["early_validate"].is_boolean())
            throw err(PolicyParseErrorKind::BadField, where + ": bad early_validate");
        row.early_validate = jr["early_validate"].get<bool>();

        size_t idx = offsets[t] + (a - 1);
        if (seen[idx]) throw err(PolicyParseErrorKind::BadField, where + ": duplicate row");
        seen[idx] = true;
        rows[idx] = std::move(row);
    }

    std::vector<Rational> domain;
    if (doc.contains("alpha_domain")) {
        if (!doc["alpha_domain"].is_array())
            throw err(PolicyParseErrorKind::BadField, "alpha_domain must be an array");
        for (const auto& ja : doc["alpha_domain"]) domain.push_back(parse_alpha(ja, "alpha_domain"));
        std::sort(domain.begin(), domain.end());
    } else {
        domain = BackoffPolicyTable::default_alpha_domain();
    }
    bool has_zero = false;
    for (const auto& a : domain) has_zero |= a.is_zero();
    if (domain.empty() || !has_zero)
        throw err(PolicyParseErrorKind::BadField, "alpha_domain must contain 0");

    if (!doc.contains("backoff") || !doc["backoff"].is_array())
        throw err(PolicyParseErrorKind::BadField, "missing backoff array");
    BackoffPolicyTable backoff(n, domain);
    std::vector<bool> bseen(size_t(n) * BackoffPolicyTable::kBuckets * 2, false);
    for (const auto& je : doc["backoff"]) {
        uint64_t t = je.at("type").get<uint64_t>();
        if (t >= n)
            throw err(PolicyParseErrorKind::UnknownType,
                      "backoff entry references unknown type index " + std::to_string(t));
        uint64_t b = je.at("bucket").get<uint64_t>();
        if (b >= BackoffPolicyTable::kBuckets)
            throw err(PolicyParseErrorKind::BadField, "backoff bucket out of range");
        std::string os = je.at("outcome").get<std::string>();
        TxnOutcome o;
        if (os == "COMMITTED")
            o = TxnOutcome::Committed;
        else if (os == "ABORTED")
            o = TxnOutcome::Aborted;
        else
            throw err(PolicyParseErrorKind::BadField, "bad backoff outcome");
        const std::string where =
            "backoff (type " + std::to_string(t) + ", bucket " + std::to_string(b) + ", " + os + ")";
        Rational a = parse_alpha(je.at("alpha"), where);
        bool in_domain = false;
        for (const auto& d : domain) in_domain |= (d == a);
        if (!in_domain)
            throw err(PolicyParseErrorKind::AlphaNotInDomain,
                      where + ": alpha " + a.str() + " not in configured set");
        size_t idx = BackoffPolicyTable::index_of(TypeIndex(t), uint32_t(b), o);
        if (bseen[idx]) throw err(PolicyParseErrorKind::BadField, where + ": duplicate entry");
        bseen[idx] = true;
        backoff.set_alpha(TypeIndex(t), uint32_t(b), o, a);
    }
    for (size_t i = 0; i < bseen.size(); i++)
        if (!bseen[i])
            throw err(PolicyParseErrorKind::BadField,
                      "backoff table incomplete: entry index " + std::to_string(i) + " missing");

    return {CcPolicyTable(schema.name, dims, std::move(rows)), std::move(backoff)};
}

std::vector<std::string> validate_table(const WorkloadSchema& schema, const CcPolicyTable& cc,
                                        const BackoffPolicyTable& backoff) {
    std::vector<std::string> v;
    schema.check_valid();
    const uint32_t n = schema.type_count();
    if (cc.schema_name() != schema.name)
        v.push_back("schema name \"" + cc.schema_name() + "\" != \"" + schema.name + "\"");
    uint64_t expected = state_count(schema);
    if (cc.state_count() != expected)
        v.push_back("row count " + std::to_string(cc.state_count()) + " != " +
                    std::to_string(expected));
    std::vector<uint32_t> dims;
    for (const auto& t : schema.txn_types) dims.push_back(t.access_count());
    if (cc.dims() != dims) {
        v.push_back("per-type access counts do not match schema");
        return v;
    }
    for (TypeIndex t = 0; t < n; t++) {
        for (AccessId a = 1; a <= dims[t]; a++) {
            const ActionRow& r = cc.row(t, a);
            const std::string where =
                "row (" + schema.txn_types[t].name + ", " + std::to_string(a) + ")";
            if (r.wait_targets.size() != n) {
                v.push_back(where + ": expected " + std::to_string(n) + " wait targets");
                continue;
            }
            for (uint32_t x = 0; x < n; x++) {
                const WaitTarget& w = r.wait_targets[x];
                if (w.kind == WaitTarget::Kind::Access && (w.access < 1 || w.access > dims[x]))
                    v.push_back(where + ": wait target ACCESS(" + std::to_string(w.access) +
                                ") out of range for type " + schema.txn_types[x].name);
            }
        }
    }
    if (backoff.type_count() != n) {
        v.push_back("backoff table covers " + std::to_string(backoff.type_count()) +
                    " types, schema has " + std::to_string(n));
        return v;
    }
    bool domain_has_zero = false;
    for (const auto& a : backoff.alpha_domain()) domain_has_zero |= a.is_zero();
    if (!domain_has_zero) v.push_back("alpha domain must include 0");
    for (TypeIndex t = 0; t < n; t++) {
        for (uint32_t b = 0; b < BackoffPolicyTable::kBuckets; b++) {
            for (TxnOutcome o : {TxnOutcome::Committed, TxnOutcome::Aborted}) {
                const Rational& a = backoff.alpha(t, b, o);
                bool in_domain = false;
                for (const auto& d : backoff.alpha_domain()) in_domain |= (d == a);
                if (!in_domain)
                    v.push_back("backoff (" + schema.txn_types[t].name + ", bucket " +
                                std::to_string(b) + ", " +
                                (o == TxnOutcome::Committed ? "COMMITTED" : "ABORTED") +
                                "): alpha " + a.str() + " not in configured set");
            }
        }
    }
    return v;
}

uint64_t policy_hash(const CcPolicyTable& cc, const BackoffPolicyTable& backoff) {
    std::string bytes = serialize_policy(cc, backoff);
    return fnv1a(bytes.data(), bytes.size());
}

std::string render_policy(const WorkloadSchema& schema, const CcPolicyTable& cc,
                          const BackoffPolicyTable& backoff) {
    std::ostringstream out;
    const uint32_t n = schema.type_count();
    for (TypeIndex t = 0; t < n; t++) {
        for (AccessId a = 1; a <= schema.d(t); a++) {
            const ActionRow& r = cc.row(t, a);
            out << schema.txn_types[t].name << " #" << a << ": waits=[";
            for (uint32_t x = 0; x < n; x++) {
                if (x) out << ",";
                const WaitTarget& w = r.wait_targets[x];
                switch (w.kind) {
                    case WaitTarget::Kind::NoWait: out << "NO_WAIT"; break;
                    case WaitTarget::Kind::Commit: out << "COMMIT"; break;
                    case WaitTarget::Kind::Access: out << "ACCESS(" << w.access << ")"; break;
                }
            }
            out << "] " << (r.read_version == ReadVersion::DirtyRead ? "DIRTY" : "CLEAN") << " "
                << (r.write_visibility == WriteVisibility::Public ? "PUBLIC" : "PRIVATE")
                << " ev=" << (r.early_validate ? 1 : 0) << "\n";
        }
    }
    out << "backoff alpha (type, bucket) -> committed/aborted\n";
    for (TypeIndex t = 0; t < n; t++) {
        for (uint32_t b = 0; b < BackoffPolicyTable::kBuckets; b++) {
            out << "  " << schema.txn_types[t].name << " bucket " << b
                << (b == 2 ? "+" : "") << ": "
                << backoff.alpha(t, b, TxnOutcome::Committed).str() << " / "
                << backoff.alpha(t, b, TxnOutcome::Aborted).str() << "\n";
        }
    }
    return out.str();
}

}  // namespace lccdb
