#include "lccdb/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

namespace lccdb {

void EaConfig::check_valid() const {
    if (population < 1) throw std::invalid_argument("population must be >= 1");
    if (children_per_parent < 1) throw std::invalid_argument("children_per_parent must be >= 1");
    if (!(p0 > 0.0) || p0 > 1.0) throw std::invalid_argument("p0 must be in (0, 1]");
    if (lambda0 < 1) throw std::invalid_argument("lambda0 must be >= 1");
    if (eval_measure.count() <= 0) throw std::invalid_argument("measure window must be positive");
    if (eval_warmup.count() < 0) throw std::invalid_argument("warmup window must be >= 0");
}

namespace {

// Offset in [-lambda, lambda] applied to a domain index, clipped.
uint32_t step_index(uint32_t idx, uint32_t domain_size, uint32_t lambda, Rng& rng) {
    int64_t off = rng.next_range(-int64_t(lambda), int64_t(lambda));
    int64_t next = int64_t(idx) + off;
    if (next < 0) next = 0;
    if (next >= int64_t(domain_size)) next = int64_t(domain_size) - 1;
    return uint32_t(next);
}

}  // namespace

PolicyPair mutate(const WorkloadSchema& schema, const PolicyPair& parent, double p,
                  uint32_t lambda, Rng& rng) {
    PolicyPair child = parent;
    const uint32_t n = schema.type_count();
    for (TypeIndex t = 0; t < n; t++) {
        for (AccessId a = 1; a <= schema.d(t); a++) {
            ActionRow& row = child.cc.row(t, a);
            for (uint32_t x = 0; x < n; x++) {
                if (rng.next_unit() < p) {
                    uint32_t d = schema.d(x);
                    uint32_t idx = row.wait_targets[x].domain_index(d);
                    row.wait_targets[x] =
                        WaitTarget::from_domain_index(step_index(idx, d + 2, lambda, rng), d);
                }
            }
            if (rng.next_unit() < p)
                row.read_version = row.read_version == ReadVersion::CleanRead
                                       ? ReadVersion::DirtyRead
                                       : ReadVersion::CleanRead;
            if (rng.next_unit() < p)
                row.write_visibility = row.write_visibility == WriteVisibility::Private
                                           ? WriteVisibility::Public
                                           : WriteVisibility::Private;
            if (rng.next_unit() < p) row.early_validate = !row.early_validate;
        }
    }
    const auto& domain = child.backoff.alpha_domain();
    for (TypeIndex t = 0; t < n; t++) {
        for (uint32_t b = 0; b < BackoffPolicyTable::kBuckets; b++) {
            for (TxnOutcome o : {TxnOutcome::Committed, TxnOutcome::Aborted}) {
                if (rng.next_unit() >= p) continue;
                const Rational& cur = child.backoff.alpha(t, b, o);
                uint32_t idx = 0;
                for (uint32_t i = 0; i < domain.size(); i++)
                    if (domain[i] == cur) idx = i;
                child.backoff.set_alpha(t, b, o,
                                        domain[step_index(idx, uint32_t(domain.size()), lambda, rng)]);
            }
        }
    }
    return child;
}

std::vector<Individual> select(std::vector<Individual> pool, uint32_t n) {
    std::stable_sort(pool.begin(), pool.end(), [](const Individual& a, const Individual& b) {
        double fa = a.fitness.value_or(-1), fb = b.fitness.value_or(-1);
        if (fa != fb) return fa > fb;
        return a.creation_seq < b.creation_seq;
    });
    if (pool.size() > n) pool.resize(n);
    return pool;
}

TrainResult train(const EaConfig& cfg, const WorkloadSchema& schema, const FitnessFn& evaluate) {
    cfg.check_valid();
    schema.check_valid();
    Rng rng(cfg.rng_seed);
    uint64_t creation_seq = 0;

    std::vector<Individual> population;
    const SeedKind seeds[] = {SeedKind::Occ, SeedKind::TwoPlStar, SeedKind::Pipeline};
    for (SeedKind k : seeds) {
        if (population.size() >= cfg.population) break;
        population.push_back({seed_policy(schema, k), std::nullopt, creation_seq++});
    }
    while (population.size() < cfg.population) {
        const PolicyPair& base = population[creation_seq % 3].policy;
        population.push_back(
            {mutate(schema, base, cfg.p0, cfg.lambda0, rng), std::nullopt, creation_seq++});
    }
    for (auto& ind : population) ind.fitness = evaluate(ind.policy);

    TrainResult result;
    for (uint32_t iter = 0; iter < cfg.iterations; iter++) {
        double p = cfg.p0 * (1.0 - double(iter) / double(cfg.iterations));
        uint32_t lambda = std::max<int64_t>(
            1, std::llround(double(cfg.lambda0) * (1.0 - double(iter) / double(cfg.iterations))));

        std::vector<Individual> pool = population;
        for (const auto& parent : population) {
            for (uint32_t c = 0; c < cfg.children_per_parent; c++) {
                Individual child{mutate(schema, parent.policy, p, lambda, rng), std::nullopt,
                                 creation_seq++};
                pool.push_back(std::move(child));
            }
        }
        for (auto& ind : pool) {
            if (!ind.fitness || cfg.reevaluate_survivors) ind.fitness = evaluate(ind.policy);
        }
        population = select(std::move(pool), cfg.population);

        IterationStats st;
        st.iteration = iter + 1;
        st.best_fitness = population.front().fitness.value_or(0);
        double sum = 0;
        for (const auto& ind : population) sum += ind.fitness.value_or(0);
        st.mean_fitness = sum / double(population.size());
        st.p = p;
        st.lambda = lambda;
        st.best_hash = policy_hash(population.front().policy.cc, population.front().policy.backoff);
        result.history.push_back(st);
    }

    result.best = select(population, 1).front();
    return result;
}

double evaluate_policy(Engine& engine, const PolicyPair& policy,
                       std::chrono::milliseconds warmup, std::chrono::milliseconds measure) {
    if (!engine.running()) throw std::logic_error("engine must be running for evaluation");
    engine.set_policy(policy);
    std::this_thread::sleep_for(warmup);
    uint64_t c0 = engine.counters().committed;
    auto t0 = std::chrono::steady_clock::now();
    std::this_thread::sleep_for(measure);
    uint64_t c1 = engine.counters().committed;
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return double(c1 - c0) / secs;
}

FitnessFn make_engine_evaluator(Engine& engine, const EaConfig& cfg) {
    return [&engine, warmup = cfg.eval_warmup, measure = cfg.eval_measure](const PolicyPair& p) {
        return evaluate_policy(engine, p, warmup, measure);
    };
}

std::string history_to_csv(const std::vector<IterationStats>& history) {
    std::ostringstream out;
    out << "iteration,best_fitness,mean_fitness,p,lambda,best_policy_hash\n";
    char hex[17];
    for (const auto& st : history) {
        snprintf(hex, sizeof(hex), "%016llx", (unsigned long long)st.best_hash);
        out << st.iteration << "," << st.best_fitness << "," << st.mean_fitness << "," << st.p
            << "," << st.lambda << "," << hex << "\n";
    }
    return out.str();
}

}  // namespace lccdb
