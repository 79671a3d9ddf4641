#pragma once

#include <cstdint>

#include "ingram/kg.hpp"
#include "ingram/model.hpp"

namespace ingram {

// Embeds a new graph with frozen parameters: rebuild the relation graph,
// draw fresh random features from `seed`, run the forward pass, project.
// Only structure-derived indices are used, so entirely new relations and
// entities are handled uniformly. Accepts the message graph either
// un-augmented (augments a copy) or already augmented.
EmbeddingSet embed_graph(const ModelParameters& params, const KnowledgeGraph& g_inf,
                         uint64_t seed);

}  // namespace ingram
