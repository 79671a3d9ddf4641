#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ingram/autodiff.hpp"
#include "ingram/kg.hpp"
#include "ingram/relation_graph.hpp"
#include "ingram/rng.hpp"
#include "ingram/tensor.hpp"

namespace ingram {

inline constexpr double kLeakySlope = 0.2;

enum class Aggregator { attention, mean, sum };
enum class SelfLoop { mean_relation, learned_vector };

struct HyperParams {
    int rel_dim = 32;      // d: relation feature/embedding width
    int ent_dim = 32;      // entity feature/embedding width
    int rel_hidden = 64;   // d': relation hidden width
    int ent_hidden = 128;  // entity hidden width; the entity side needs room
    int rel_layers = 2;    // L
    int ent_layers = 2;    // L^
    int rel_heads = 8;     // K, must divide rel_hidden
    int ent_heads = 8;     // K^, must divide ent_hidden
    int num_bins = 10;     // B
    double margin = 1.5;   // gamma

    Aggregator aggregator = Aggregator::attention;
    SelfLoop self_loop = SelfLoop::mean_relation;
    bool relation_update = true;  // when false the relation layers are skipped

    void validate() const;
};

// All trainable tensors. Attention weights (theta, y, c) are per head;
// the message matrices W / W^ are stored as per-head row blocks whose
// vertical concatenation is the full matrix.
struct ModelParameters {
    struct RelHead {
        Tensor theta;  // rel_hidden x 2*rel_hidden
        Tensor y;      // 1 x rel_hidden
        Tensor c;      // num_bins x 1, affinity-bin attention bias
        Tensor w;      // (rel_hidden / rel_heads) x rel_hidden
    };
    struct EntHead {
        Tensor theta;  // ent_hidden x (2*ent_hidden + rel_hidden)
        Tensor y;      // 1 x ent_hidden
        Tensor w;      // (ent_hidden / ent_heads) x (ent_hidden + rel_hidden)
    };

    HyperParams hp;
    uint64_t train_seed = 0;  // provenance, recorded in checkpoints
    Tensor rel_input_proj;                        // H: rel_hidden x rel_dim
    std::vector<std::vector<RelHead>> rel_layers; // [layer][head]
    Tensor self_loop_vec;                         // 1 x rel_hidden (learned_vector ablation)
    Tensor ent_input_proj;                        // H^: ent_hidden x ent_dim
    std::vector<std::vector<EntHead>> ent_layers; // [layer][head]
    Tensor rel_output_proj;                       // M: rel_dim x rel_hidden
    Tensor ent_output_proj;                       // M^: ent_dim x ent_hidden
    Tensor score_mix;                             // W~: ent_dim x rel_dim

    static ModelParameters init(const HyperParams& hp, Rng& rng);
    // Zero tensors with the shapes implied by `hp`; checkpoint loading fills them.
    static ModelParameters shaped(const HyperParams& hp);

    // Stable iteration order over all tensors; drives the optimizer, the
    // checkpoint layout and gradient checks.
    template <typename F>
    void for_each_parameter(F&& f) {
        f("H", rel_input_proj);
        for (size_t l = 0; l < rel_layers.size(); ++l)
            for (size_t h = 0; h < rel_layers[l].size(); ++h) {
                const std::string p = "rel" + std::to_string(l) + ".h" + std::to_string(h) + ".";
                f(p + "w", rel_layers[l][h].w);
                f(p + "theta", rel_layers[l][h].theta);
                f(p + "y", rel_layers[l][h].y);
                f(p + "c", rel_layers[l][h].c);
            }
        f("self_loop_vec", self_loop_vec);
        f("H_hat", ent_input_proj);
        for (size_t l = 0; l < ent_layers.size(); ++l)
            for (size_t h = 0; h < ent_layers[l].size(); ++h) {
                const std::string p = "ent" + std::to_string(l) + ".h" + std::to_string(h) + ".";
                f(p + "w", ent_layers[l][h].w);
                f(p + "theta", ent_layers[l][h].theta);
                f(p + "y", ent_layers[l][h].y);
            }
        f("M", rel_output_proj);
        f("M_hat", ent_output_proj);
        f("W_tilde", score_mix);
    }

    template <typename F>
    void for_each_parameter(F&& f) const {
        const_cast<ModelParameters*>(this)->for_each_parameter(
            [&f](const std::string& name, Tensor& t) { f(name, const_cast<const Tensor&>(t)); });
    }

    // 64-bit checksum over every tensor payload; used to assert that
    // inference does not mutate parameters.
    uint64_t checksum() const;
};

// Per-epoch random feature draws.
struct FeatureSet {
    Tensor relation_features;  // m x rel_dim
    Tensor entity_features;    // n x ent_dim

    static FeatureSet draw(const HyperParams& hp, int num_relations, int num_entities, Rng& rng) {
        return {Tensor::glorot(num_relations, hp.rel_dim, rng),
                Tensor::glorot(num_entities, hp.ent_dim, rng)};
    }
};

// Final projected embeddings of one graph.
struct EmbeddingSet {
    Tensor relation_embeddings;  // m x rel_dim
    Tensor entity_embeddings;    // n x ent_dim
    uint64_t graph_fingerprint = 0;
    uint64_t seed = 0;
};

// Graph structure flattened into index arrays consumed by the tape forward.
struct ForwardPlan {
    int num_entities = 0;
    int num_relations = 0;
    // Relation-graph edges: relation rg_dst aggregates from rg_src.
    std::vector<int32_t> rg_dst, rg_src, rg_bin0;  // rg_bin0 is the 0-based bin
    // Entity edges, one per augmented triplet (src --rel--> dst).
    std::vector<int32_t> ee_dst, ee_src, ee_rel;
    std::vector<double> inv_in_degree;  // 1 / #incoming edges, 0 for isolated entities
    uint64_t graph_fingerprint = 0;
};

ForwardPlan make_plan(const KnowledgeGraph& g, const RelationGraph& rg);

// Attention weights recorded during a forward pass, for diagnostics and the
// normalization checks. `weights` rows group by `segments` into `num_segments`
// softmax groups.
struct AttentionRecord {
    std::string tag;
    Tape::Id weights = -1;
    std::vector<int32_t> segments;
    int num_segments = 0;
};
using ForwardTrace = std::vector<AttentionRecord>;

// Tape ids of all parameters, in registry order, plus named handles.
struct ParamBinding {
    std::vector<Tape::Id> ordered;
    std::vector<std::string> names;
};
ParamBinding bind_parameters(Tape& tape, const ModelParameters& params);

struct ForwardResult {
    Tape::Id rel_hidden = -1;  // z^(L): m x rel_hidden
    Tape::Id ent_hidden = -1;  // h^(L^): n x ent_hidden
    Tape::Id rel_emb = -1;     // z: m x rel_dim
    Tape::Id ent_emb = -1;     // h: n x ent_dim
};

// Full forward pass: relation aggregation over the relation graph, entity
// aggregation over the triplet edges, final projections.
ForwardResult model_forward(Tape& tape, const ModelParameters& params, const ParamBinding& bind,
                            const ForwardPlan& plan, const FeatureSet& features,
                            ForwardTrace* trace = nullptr);

// Batched triplet scores on the tape: row q is the score of queries[q].
Tape::Id score_batch(Tape& tape, const ParamBinding& bind, const ModelParameters& params,
                     const ForwardResult& fwd, const std::vector<Triplet>& queries);

// Hinge loss sum over positives paired with their own negatives:
// negatives[q] belongs to positives[q / negatives_per_positive].
Tape::Id margin_loss_batch(Tape& tape, Tape::Id positive_scores, Tape::Id negative_scores,
                           int negatives_per_positive, double margin);

// ---- Plain (tape-free) counterparts used by evaluation and tests ----

// Multiplicity-weighted mean of incoming relation vectors per entity.
// rel_vectors is m x d; the result is n x d.
Tensor mean_adjacent_relations(const KnowledgeGraph& g, const Tensor& rel_vectors);

// score(i, k, j) = sum_c h_i[c] * (W~ z_k)[c] * h_j[c].
double score(const EmbeddingSet& emb, const ModelParameters& params, const Triplet& t);

// Margin ranking loss over explicit negative lists.
double margin_loss(const ModelParameters& params, const EmbeddingSet& emb,
                   const std::vector<Triplet>& positives,
                   const std::vector<std::vector<Triplet>>& negatives_per_positive);

}  // namespace ingram
