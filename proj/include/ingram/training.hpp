#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ingram/evaluation.hpp"
#include "ingram/kg.hpp"
#include "ingram/model.hpp"
#include "ingram/rng.hpp"

namespace ingram {

struct TrainConfig {
    HyperParams hp;
    int epochs = 10000;
    int validate_every = 200;
    int negatives = 10;
    int batch_size = 0;  // 0 = full batch
    double learning_rate = 0.001;
    uint64_t seed = 0;
    bool dynamic_split = true;  // re-split facts/targets every epoch

    void validate() const;
};

// Triplets forming a random spanning tree of the undirected entity graph:
// |V| - 1 edges chosen by union-find over a shuffled triplet order.
// Self-loop triplets never enter the tree. Throws GraphError (naming the
// component count) when the graph is disconnected.
std::vector<Triplet> spanning_tree_triplets(const KnowledgeGraph& g, Rng& rng);

// Random 3:1 fact/target split constrained so that the facts contain a
// spanning tree and cover every relation. When the constraints need more
// than 3/4 of the edges the ratio yields to the constraints.
SplitState dynamic_split(const KnowledgeGraph& g_tr, Rng& rng);

// Corrupts the head or the tail (fair coin) with a uniformly random entity.
// The positive itself is rejected and redrawn.
std::vector<Triplet> sample_negatives(const KnowledgeGraph& g, const Triplet& positive,
                                      int count, Rng& rng);

// Validation-side inputs: the message graph plus held-out targets.
struct ValidationSet {
    KnowledgeGraph graph;  // un-augmented, built from the message triplets
    std::vector<Triplet> targets;
    TripletFilter filter;
    std::vector<char> is_known_relation;
};

struct TrainLogEntry {
    int epoch = 0;
    double loss = 0.0;
    double val_mrr = std::numeric_limits<double>::quiet_NaN();
    double val_hit10 = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
    ModelParameters params;  // best validation checkpoint (last epoch if never validated)
    std::vector<TrainLogEntry> log;
    int best_epoch = -1;
    double best_mrr = std::numeric_limits<double>::quiet_NaN();
    uint64_t best_val_seed = 0;
};

// Epoch loop: re-split, re-draw features, margin loss over the target side,
// Adam step; periodic validation through the inference path keeps the
// best-MRR checkpoint.
TrainResult fit(const KnowledgeGraph& g_tr, const TrainConfig& config,
                const ValidationSet* validation);

// Seed used for the validation embedding at a given epoch; exposed so a
// retained checkpoint can be re-scored exactly.
uint64_t validation_seed(uint64_t train_seed, int epoch);

}  // namespace ingram
