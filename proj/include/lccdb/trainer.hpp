#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lccdb/engine.hpp"
#include "lccdb/rng.hpp"

namespace lccdb {

struct EaConfig {
    uint32_t population = 8;
    uint32_t children_per_parent = 4;
    uint32_t iterations = 300;
    double p0 = 0.05;
    uint32_t lambda0 = 3;
    std::chrono::milliseconds eval_warmup{1000};
    std::chrono::milliseconds eval_measure{3000};
    uint64_t rng_seed = 1;
    // Survivors keep their measured fitness by default; re-measuring every
    // iteration costs wall time and forfeits the elitism guarantee.
    bool reevaluate_survivors = false;

    void check_valid() const;  // throws std::invalid_argument
};

struct Individual {
    PolicyPair policy;
    std::optional<double> fitness;
    uint64_t creation_seq = 0;
};

// Per-cell independent mutation with probability p. Binary cells flip;
// ordered cells (wait targets over [NO_WAIT, ACCESS(1..d), COMMIT], alphas
// over the configured domain) move by an offset uniform in [-lambda, lambda],
// clipped to the valid range.
PolicyPair mutate(const WorkloadSchema& schema, const PolicyPair& parent, double p,
                  uint32_t lambda, Rng& rng);

// Top-N by fitness; ties keep the earlier-created individual. Unevaluated
// individuals rank last.
std::vector<Individual> select(std::vector<Individual> pool, uint32_t n);

struct IterationStats {
    uint32_t iteration = 0;
    double best_fitness = 0;
    double mean_fitness = 0;
    double p = 0;
    uint32_t lambda = 0;
    uint64_t best_hash = 0;
};

struct TrainResult {
    Individual best;
    std::vector<IterationStats> history;
};

using FitnessFn = std::function<double(const PolicyPair&)>;

// Evolutionary search warm-started from the OCC, 2PL* and pipeline seeds.
// Each iteration every survivor spawns `children_per_parent` mutants, the
// pool (parents + children) is evaluated, and the best `population` survive.
// p and lambda decay linearly over the configured iterations.
TrainResult train(const EaConfig& cfg, const WorkloadSchema& schema, const FitnessFn& evaluate);

// Commit throughput of one policy on a running engine: swap the tables in,
// warm up, then count commits over the measure window.
double evaluate_policy(Engine& engine, const PolicyPair& policy,
                       std::chrono::milliseconds warmup, std::chrono::milliseconds measure);

FitnessFn make_engine_evaluator(Engine& engine, const EaConfig& cfg);

std::string history_to_csv(const std::vector<IterationStats>& history);

}  // namespace lccdb
