#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lccdb/common.hpp"
#include "lccdb/rational.hpp"

namespace lccdb {

enum class AccessKind : uint8_t { Read, Write, ReadModifyWrite };

struct TxnTypeSpec {
    std::string name;
    std::vector<AccessKind> access_kinds;  // one per access-id, 1-based externally
    uint32_t access_count() const { return uint32_t(access_kinds.size()); }
};

// Static description of a workload: the transaction types and, per type, the
// ordered data accesses identified by their static code location.
struct WorkloadSchema {
    std::string name;
    std::vector<TxnTypeSpec> txn_types;

    uint32_t type_count() const { return uint32_t(txn_types.size()); }
    uint32_t d(TypeIndex t) const { return txn_types[t].access_count(); }
    std::optional<TypeIndex> type_by_name(const std::string& n) const;
    // Throws std::invalid_argument when a structural invariant is broken
    // (empty type list, zero accesses, duplicate names).
    void check_valid() const;
};

// One wait target per transaction type. The target domain for waiting on
// dependencies of type X is ordered: NO_WAIT < ACCESS(1..d_X) < COMMIT.
struct WaitTarget {
    enum class Kind : uint8_t { NoWait, Access, Commit };
    Kind kind = Kind::NoWait;
    AccessId access = 0;  // meaningful only for Kind::Access

    static WaitTarget no_wait() { return {}; }
    static WaitTarget commit() { return {Kind::Commit, 0}; }
    static WaitTarget at_access(AccessId a) { return {Kind::Access, a}; }

    // Position in the ordered domain [NO_WAIT, ACCESS(1..d), COMMIT].
    uint32_t domain_index(uint32_t d) const;
    static WaitTarget from_domain_index(uint32_t idx, uint32_t d);

    // File encoding: -1 = NO_WAIT, 0 = COMMIT, k >= 1 = ACCESS(k).
    int32_t encode() const;
    static WaitTarget decode(int32_t v);

    bool operator==(const WaitTarget& o) const {
        return kind == o.kind && (kind != Kind::Access || access == o.access);
    }
};

enum class ReadVersion : uint8_t { CleanRead, DirtyRead };
enum class WriteVisibility : uint8_t { Private, Public };

// The learned decision vector for one (type, access-id) state.
struct ActionRow {
    std::vector<WaitTarget> wait_targets;  // one per transaction type
    ReadVersion read_version = ReadVersion::CleanRead;
    WriteVisibility write_visibility = WriteVisibility::Private;
    bool early_validate = false;

    bool operator==(const ActionRow& o) const {
        return wait_targets == o.wait_targets && read_version == o.read_version &&
               write_visibility == o.write_visibility && early_validate == o.early_validate;
    }
};

// Row-per-state concurrency-control policy table. States are ordered by
// (type_index, access_id); access ids are 1-based.
class CcPolicyTable {
  public:
    CcPolicyTable() = default;
    CcPolicyTable(std::string schema_name, std::vector<uint32_t> dims,
                  std::vector<ActionRow> rows);

    const std::string& schema_name() const { return schema_name_; }
    const std::vector<uint32_t>& dims() const { return dims_; }
    uint32_t state_count() const { return uint32_t(rows_.size()); }

    const ActionRow& row(TypeIndex t, AccessId a) const { return rows_[offset(t, a)]; }
    ActionRow& row(TypeIndex t, AccessId a) { return rows_[offset(t, a)]; }
    const std::vector<ActionRow>& rows() const { return rows_; }
    std::vector<ActionRow>& rows() { return rows_; }

    bool operator==(const CcPolicyTable& o) const {
        return schema_name_ == o.schema_name_ && dims_ == o.dims_ && rows_ == o.rows_;
    }

  private:
    size_t offset(TypeIndex t, AccessId a) const { return offsets_[t] + (a - 1); }

    std::string schema_name_;
    std::vector<uint32_t> dims_;     // d_i per type
    std::vector<size_t> offsets_;    // prefix sums
    std::vector<ActionRow> rows_;
};

enum class TxnOutcome : uint8_t { Committed, Aborted };

// Multiplicative backoff factors per (type, prior-abort bucket, outcome).
// Buckets are 0, 1, 2+ prior aborted attempts.
class BackoffPolicyTable {
  public:
    static constexpr uint32_t kBuckets = 3;

    BackoffPolicyTable() = default;
    BackoffPolicyTable(uint32_t type_count, std::vector<Rational> alpha_domain);

    const Rational& alpha(TypeIndex t, uint32_t bucket, TxnOutcome o) const {
        return entries_[index(t, bucket, o)];
    }
    void set_alpha(TypeIndex t, uint32_t bucket, TxnOutcome o, Rational a) {
        entries_[index(t, bucket, o)] = a;
    }
    uint32_t type_count() const { return uint32_t(entries_.size() / (kBuckets * 2)); }
    const std::vector<Rational>& alpha_domain() const { return alpha_domain_; }
    const std::vector<Rational>& entries() const { return entries_; }
    std::vector<Rational>& entries() { return entries_; }

    bool operator==(const BackoffPolicyTable& o) const {
        return entries_ == o.entries_ && alpha_domain_ == o.alpha_domain_;
    }

    static size_t index_of(TypeIndex t, uint32_t bucket, TxnOutcome o) {
        return (size_t(t) * kBuckets + bucket) * 2 + (o == TxnOutcome::Aborted ? 1 : 0);
    }
    static std::vector<Rational> default_alpha_domain();

  private:
    size_t index(TypeIndex t, uint32_t bucket, TxnOutcome o) const { return index_of(t, bucket, o); }

    // Ordered by (type, bucket, outcome) with outcome order COMMITTED, ABORTED.
    std::vector<Rational> entries_;
    std::vector<Rational> alpha_domain_;  // sorted ascending, contains zero
};

struct PolicyPair {
    CcPolicyTable cc;
    BackoffPolicyTable backoff;
    bool operator==(const PolicyPair& o) const { return cc == o.cc && backoff == o.backoff; }
};

enum class SeedKind : uint8_t { Occ, TwoPlStar, Pipeline };
std::optional<SeedKind> seed_kind_by_name(const std::string& name);
const char* seed_kind_name(SeedKind k);

// Number of rows any valid policy table for this schema must have.
uint64_t state_count(const WorkloadSchema& schema);

struct ActionSpaceSize {
    // The published formula counts d_i wait choices per type:
    // d_1 * ... * d_n * 2 * 2 * 2.
    uint64_t formula_value = 0;
    // The implemented wait domain also has NO_WAIT and COMMIT, so each type
    // contributes d_i + 2 choices.
    uint64_t implemented_value = 0;
};
// Throws std::overflow_error if a count does not fit in 64 bits.
ActionSpaceSize action_combinations_per_state(const WorkloadSchema& schema);

// Encodings of known algorithms used to warm-start training.
PolicyPair seed_policy(const WorkloadSchema& schema, SeedKind kind);

// Policy file format: a single UTF-8 JSON document, fields ordered and rows
// sorted by (type_index, access_id) so serialization is byte-stable.
std::string serialize_policy(const CcPolicyTable& cc, const BackoffPolicyTable& backoff);

enum class PolicyParseErrorKind : uint8_t {
    BadDocument,
    BadFormatVersion,
    SchemaMismatch,
    UnknownType,
    RowCountMismatch,
    WaitTargetOutOfRange,
    AlphaNotInDomain,
    BadField,
};

class PolicyParseError : public std::runtime_error {
  public:
    PolicyParseError(PolicyParseErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}
    PolicyParseErrorKind kind() const { return kind_; }

  private:
    PolicyParseErrorKind kind_;
};

PolicyPair parse_policy(const std::string& bytes, const WorkloadSchema& schema);

// Structural checks; returns a human-readable violation list (empty = ok).
std::vector<std::string> validate_table(const WorkloadSchema& schema, const CcPolicyTable& cc,
                                        const BackoffPolicyTable& backoff);

uint64_t policy_hash(const CcPolicyTable& cc, const BackoffPolicyTable& backoff);

// One line per state plus the backoff table, for the CLI `show` command.
std::string render_policy(const WorkloadSchema& schema, const CcPolicyTable& cc,
                          const BackoffPolicyTable& backoff);

}  // namespace lccdb
