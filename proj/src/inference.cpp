#include "ingram/inference.hpp"

#include "ingram/errors.hpp"
#include "ingram/relation_graph.hpp"

namespace ingram {

EmbeddingSet embed_graph(const ModelParameters& params, const KnowledgeGraph& g_inf,
                         uint64_t seed) {
    if (g_inf.triplets().empty()) throw GraphError("embed_graph: empty inference graph");
    const KnowledgeGraph g_aug = g_inf.augmented() ? g_inf : g_inf.augment_reverse();

    const RelationGraph rg = build_relation_graph(g_aug, params.hp.num_bins);
    const ForwardPlan plan = make_plan(g_aug, rg);

    Rng rng(seed);
    const FeatureSet features =
        FeatureSet::draw(params.hp, g_aug.num_relations(), g_aug.num_entities(), rng);

    Tape tape;
    const ParamBinding bind = bind_parameters(tape, params);
    const ForwardResult fwd = model_forward(tape, params, bind, plan, features);

    EmbeddingSet emb;
    emb.relation_embeddings = tape.value(fwd.rel_emb);
    emb.entity_embeddings = tape.value(fwd.ent_emb);
    emb.graph_fingerprint = plan.graph_fingerprint;
    emb.seed = seed;
    return emb;
}

}  // namespace ingram
