#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ingram/kg.hpp"

namespace ingram {

struct GenConfig {
    int n_tr = 10;        // seed entities for the training graph
    int n_inf = 20;       // seed entities for the inference graph
    double p_rel = 0.4;   // fraction of relations assigned to the inference-only pool
    double p_tri = 1.0;   // target fraction of inference triplets with new relations
    int hop_cap = 50;     // max neighbors kept per entity per hop
    uint64_t seed = 0;

    void validate() const;
};

// Label-level triplet, ready to serialize.
using LabelTriplet = std::array<std::string, 3>;

struct GeneratedDataset {
    std::vector<LabelTriplet> train;  // full training edge set
    std::vector<LabelTriplet> msg;    // inference facts
    std::vector<LabelTriplet> valid;
    std::vector<LabelTriplet> test;

    // meta.txt content
    int train_entities = 0, train_relations = 0;
    int inf_entities = 0, inf_relations = 0;
    double achieved_new_triplet_fraction = 0.0;  // |Y| / |E_inf|
    std::vector<std::string> warnings;
};

// Carves a raw corpus into disjoint-entity training and inference graphs:
// relation pools split p_rel, two-hop ball sampling with a per-hop cap,
// induced-triplet restriction, giant-component extraction, then a 3:1:1
// facts/valid/test split of the inference edges where the fact side is
// seeded with a spanning tree and one triplet per relation.
GeneratedDataset generate(const KnowledgeGraph& raw, const GenConfig& cfg);

// Writes train.txt, msg.txt, valid.txt, test.txt and meta.txt.
void write_dataset(const GeneratedDataset& ds, const GenConfig& cfg,
                   const std::filesystem::path& dir);

}  // namespace ingram
