#include "ingram/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "ingram/errors.hpp"

namespace ingram {

void HyperParams::validate() const {
    if (rel_dim < 1 || ent_dim < 1 || rel_hidden < 1 || ent_hidden < 1)
        throw ConfigError("dimensions must be positive");
    if (rel_layers < 0 || ent_layers < 0) throw ConfigError("layer counts must be >= 0");
    if (rel_heads < 1 || ent_heads < 1) throw ConfigError("head counts must be positive");
    if (rel_hidden % rel_heads != 0)
        throw ConfigError("rel_hidden must be divisible by rel_heads");
    if (ent_hidden % ent_heads != 0)
        throw ConfigError("ent_hidden must be divisible by ent_heads");
    if (num_bins < 1) throw ConfigError("number of bins must be >= 1");
    if (margin <= 0.0) throw ConfigError("margin must be positive");
}

namespace {

template <typename Alloc>
ModelParameters build_parameters(const HyperParams& hp, Alloc&& alloc) {
    hp.validate();
    ModelParameters p;
    p.hp = hp;
    p.rel_input_proj = alloc(hp.rel_hidden, hp.rel_dim);
    p.rel_layers.resize(size_t(hp.rel_layers));
    for (auto& layer : p.rel_layers) {
        layer.resize(size_t(hp.rel_heads));
        for (auto& head : layer) {
            head.w = alloc(hp.rel_hidden / hp.rel_heads, hp.rel_hidden);
            head.theta = alloc(hp.rel_hidden, 2 * hp.rel_hidden);
            head.y = alloc(1, hp.rel_hidden);
            head.c = alloc(hp.num_bins, 1);
        }
    }
    p.self_loop_vec = alloc(1, hp.rel_hidden);
    p.ent_input_proj = alloc(hp.ent_hidden, hp.ent_dim);
    p.ent_layers.resize(size_t(hp.ent_layers));
    for (auto& layer : p.ent_layers) {
        layer.resize(size_t(hp.ent_heads));
        for (auto& head : layer) {
            head.w = alloc(hp.ent_hidden / hp.ent_heads, hp.ent_hidden + hp.rel_hidden);
            head.theta = alloc(hp.ent_hidden, 2 * hp.ent_hidden + hp.rel_hidden);
            head.y = alloc(1, hp.ent_hidden);
        }
    }
    p.rel_output_proj = alloc(hp.rel_dim, hp.rel_hidden);
    p.ent_output_proj = alloc(hp.ent_dim, hp.ent_hidden);
    p.score_mix = alloc(hp.ent_dim, hp.rel_dim);
    return p;
}

}  // namespace

ModelParameters ModelParameters::init(const HyperParams& hp, Rng& rng) {
    return build_parameters(hp, [&rng](int r, int c) { return Tensor::glorot(r, c, rng); });
}

ModelParameters ModelParameters::shaped(const HyperParams& hp) {
    return build_parameters(hp, [](int r, int c) { return Tensor::zeros(r, c); });
}

uint64_t ModelParameters::checksum() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for_each_parameter([&h](const std::string&, const Tensor& t) {
        for (double x : t.v) {
            uint64_t bits;
            static_assert(sizeof bits == sizeof x);
            std::memcpy(&bits, &x, sizeof bits);
            h ^= bits;
            h *= 0x100000001b3ULL;
        }
    });
    return h;
}

ForwardPlan make_plan(const KnowledgeGraph& g, const RelationGraph& rg) {
    if (!g.augmented()) throw GraphError("make_plan: graph must be augmented");
    if (rg.num_relations != g.num_relations())
        throw GraphError("make_plan: relation graph size mismatch");
    if (rg.num_bins < 1) throw GraphError("make_plan: bins not assigned");
    ForwardPlan plan;
    plan.num_entities = g.num_entities();
    plan.num_relations = g.num_relations();
    plan.graph_fingerprint = g.fingerprint();
    plan.rg_dst.reserve(rg.entries.size());
    for (const auto& e : rg.entries) {
        plan.rg_dst.push_back(e.i);
        plan.rg_src.push_back(e.j);
        plan.rg_bin0.push_back(e.bin - 1);
    }
    const auto& triplets = g.triplets();
    plan.ee_dst.reserve(triplets.size());
    for (const Triplet& t : triplets) {
        plan.ee_dst.push_back(t.tail);
        plan.ee_src.push_back(t.head);
        plan.ee_rel.push_back(t.rel);
    }
    plan.inv_in_degree.assign(size_t(plan.num_entities), 0.0);
    for (int32_t dst : plan.ee_dst) plan.inv_in_degree[size_t(dst)] += 1.0;
    for (auto& d : plan.inv_in_degree)
        if (d > 0.0) d = 1.0 / d;
    return plan;
}

ParamBinding bind_parameters(Tape& tape, const ModelParameters& params) {
    ParamBinding bind;
    params.for_each_parameter([&](const std::string& name, const Tensor& t) {
        bind.ordered.push_back(tape.param(t));
        bind.names.push_back(name);
    });
    return bind;
}

namespace {

// Handles to the bound tensors in registry order, mirroring
// ModelParameters::for_each_parameter.
struct BoundParams {
    Tape::Id rel_input_proj;
    struct RelHead { Tape::Id w, theta, y, c; };
    struct EntHead { Tape::Id w, theta, y; };
    std::vector<std::vector<RelHead>> rel_layers;
    Tape::Id self_loop_vec;
    Tape::Id ent_input_proj;
    std::vector<std::vector<EntHead>> ent_layers;
    Tape::Id rel_output_proj, ent_output_proj, score_mix;
};

BoundParams unpack(const ModelParameters& p, const ParamBinding& bind) {
    BoundParams b;
    size_t k = 0;
    auto next = [&bind, &k]() { return bind.ordered.at(k++); };
    b.rel_input_proj = next();
    b.rel_layers.resize(p.rel_layers.size());
    for (size_t l = 0; l < p.rel_layers.size(); ++l)
        for (size_t h = 0; h < p.rel_layers[l].size(); ++h) {
            BoundParams::RelHead head;
            head.w = next();
            head.theta = next();
            head.y = next();
            head.c = next();
            b.rel_layers[l].push_back(head);
        }
    b.self_loop_vec = next();
    b.ent_input_proj = next();
    b.ent_layers.resize(p.ent_layers.size());
    for (size_t l = 0; l < p.ent_layers.size(); ++l)
        for (size_t h = 0; h < p.ent_layers[l].size(); ++h) {
            BoundParams::EntHead head;
            head.w = next();
            head.theta = next();
            head.y = next();
            b.ent_layers[l].push_back(head);
        }
    b.rel_output_proj = next();
    b.ent_output_proj = next();
    b.score_mix = next();
    if (k != bind.ordered.size()) throw NumericError("parameter binding mismatch");
    return b;
}

// Uniform attention weights for the mean-aggregator ablation: every member
// of a segment gets 1 / segment size.
Tensor uniform_segment_weights(const std::vector<int32_t>& seg, int num_segments) {
    std::vector<double> count(size_t(num_segments), 0.0);
    for (int32_t s : seg) count[size_t(s)] += 1.0;
    Tensor w(int(seg.size()), 1);
    for (size_t r = 0; r < seg.size(); ++r) w.v[r] = 1.0 / count[size_t(seg[r])];
    return w;
}

Tape::Id concat_heads(Tape& tape, const std::vector<Tape::Id>& heads) {
    Tape::Id out = heads[0];
    for (size_t h = 1; h < heads.size(); ++h) out = tape.concat_cols(out, heads[h]);
    return out;
}

}  // namespace

ForwardResult model_forward(Tape& tape, const ModelParameters& params, const ParamBinding& bind,
                            const ForwardPlan& plan, const FeatureSet& features,
                            ForwardTrace* trace) {
    const HyperParams& hp = params.hp;
    hp.validate();
    if (features.relation_features.rows != plan.num_relations ||
        features.relation_features.cols != hp.rel_dim)
        throw NumericError("model_forward: relation feature shape mismatch");
    if (features.entity_features.rows != plan.num_entities ||
        features.entity_features.cols != hp.ent_dim)
        throw NumericError("model_forward: entity feature shape mismatch");

    const BoundParams bp = unpack(params, bind);
    const int m = plan.num_relations;
    const int n = plan.num_entities;

    const Tape::Id x_rel = tape.input(features.relation_features, false);
    const Tape::Id x_ent = tape.input(features.entity_features, false);

    // z^(0) = H x, rows are relations.
    Tape::Id z = tape.matmul(x_rel, bp.rel_input_proj, false, true);

    if (hp.relation_update) {
        for (size_t l = 0; l < bp.rel_layers.size(); ++l) {
            std::vector<Tape::Id> head_out;
            for (size_t h = 0; h < bp.rel_layers[l].size(); ++h) {
                const auto& head = bp.rel_layers[l][h];
                // Attention input theta [z_i || z_j] decomposed into two
                // per-relation projections gathered per edge.
                const Tape::Id th_i = tape.slice_cols(head.theta, 0, hp.rel_hidden);
                const Tape::Id th_j = tape.slice_cols(head.theta, hp.rel_hidden,
                                                      2 * hp.rel_hidden);
                const Tape::Id proj_i = tape.matmul(z, th_i, false, true);
                const Tape::Id proj_j = tape.matmul(z, th_j, false, true);
                const Tape::Id pre = tape.gather_rows_sum(
                    {{proj_i, &plan.rg_dst}, {proj_j, &plan.rg_src}});
                const Tape::Id act = tape.leaky_relu(pre, kLeakySlope);
                Tape::Id logits = tape.matmul(act, head.y, false, true);
                logits = tape.add(logits, tape.gather_rows(head.c, plan.rg_bin0));

                Tape::Id weights;
                switch (hp.aggregator) {
                    case Aggregator::attention:
                        weights = tape.segment_softmax(logits, plan.rg_dst, m);
                        break;
                    case Aggregator::mean:
                        weights = tape.input(uniform_segment_weights(plan.rg_dst, m), false);
                        break;
                    case Aggregator::sum:
                        weights = tape.input(Tensor::filled(int(plan.rg_dst.size()), 1, 1.0),
                                             false);
                        break;
                }
                if (trace && hp.aggregator == Aggregator::attention)
                    trace->push_back({"rel l" + std::to_string(l) + " h" + std::to_string(h),
                                      weights, plan.rg_dst, m});

                const Tape::Id msg = tape.gather_rows(tape.matmul(z, head.w, false, true),
                                                      plan.rg_src);
                head_out.push_back(tape.segment_weighted_sum(msg, weights, plan.rg_dst, m));
            }
            z = tape.leaky_relu(tape.add(concat_heads(tape, head_out), z), kLeakySlope);
        }
    }
    const Tape::Id z_hidden = z;

    // Self-loop relation context: multiplicity-weighted mean of incoming
    // relation vectors, or the learned vector ablation.
    Tape::Id z_bar;
    if (hp.self_loop == SelfLoop::mean_relation) {
        Tensor inv_deg(n, 1);
        for (int i = 0; i < n; ++i) inv_deg.v[size_t(i)] = plan.inv_in_degree[size_t(i)];
        const Tape::Id summed =
            tape.segment_sum(tape.gather_rows(z_hidden, plan.ee_rel), plan.ee_dst, n);
        z_bar = tape.scale_rows(summed, tape.input(std::move(inv_deg), false));
    } else {
        z_bar = tape.matmul(tape.input(Tensor::filled(n, 1, 1.0), false), bp.self_loop_vec);
    }

    // h^(0) = H^ x^.
    Tape::Id hrep = tape.matmul(x_ent, bp.ent_input_proj, false, true);

    // Joint softmax slots: one per incoming edge plus one self slot per
    // entity, appended after the edges.
    std::vector<int32_t> slot_seg = plan.ee_dst;
    slot_seg.reserve(plan.ee_dst.size() + size_t(n));
    for (int32_t i = 0; i < n; ++i) slot_seg.push_back(i);

    for (size_t l = 0; l < bp.ent_layers.size(); ++l) {
        std::vector<Tape::Id> head_out;
        for (size_t h = 0; h < bp.ent_layers[l].size(); ++h) {
            const auto& head = bp.ent_layers[l][h];
            const Tape::Id th_self = tape.slice_cols(head.theta, 0, hp.ent_hidden);
            const Tape::Id th_nbr =
                tape.slice_cols(head.theta, hp.ent_hidden, 2 * hp.ent_hidden);
            const Tape::Id th_rel = tape.slice_cols(head.theta, 2 * hp.ent_hidden,
                                                    2 * hp.ent_hidden + hp.rel_hidden);
            const Tape::Id p_self = tape.matmul(hrep, th_self, false, true);  // n x ent_hidden
            const Tape::Id p_nbr = tape.matmul(hrep, th_nbr, false, true);
            const Tape::Id p_rel = tape.matmul(z_hidden, th_rel, false, true);  // m x ent_hidden
            const Tape::Id p_rel_bar = tape.matmul(z_bar, th_rel, false, true);  // n x ent_hidden

            // b_ijk = [h_i || h_j || z_k] rows for edges; b_ii = [h_i || h_i || z~_i].
            const Tape::Id pre_edge = tape.gather_rows_sum({{p_self, &plan.ee_dst},
                                                            {p_nbr, &plan.ee_src},
                                                            {p_rel, &plan.ee_rel}});
            const Tape::Id pre_self = tape.add(tape.add(p_self, p_nbr), p_rel_bar);
            const Tape::Id logit_edge =
                tape.matmul(tape.leaky_relu(pre_edge, kLeakySlope), head.y, false, true);
            const Tape::Id logit_self =
                tape.matmul(tape.leaky_relu(pre_self, kLeakySlope), head.y, false, true);
            const Tape::Id logits = tape.concat_rows(logit_edge, logit_self);

            Tape::Id weights;
            switch (hp.aggregator) {
                case Aggregator::attention:
                    weights = tape.segment_softmax(logits, slot_seg, n);
                    break;
                case Aggregator::mean:
                    weights = tape.input(uniform_segment_weights(slot_seg, n), false);
                    break;
                case Aggregator::sum:
                    weights = tape.input(Tensor::filled(int(slot_seg.size()), 1, 1.0), false);
                    break;
            }
            if (trace && hp.aggregator == Aggregator::attention)
                trace->push_back({"ent l" + std::to_string(l) + " h" + std::to_string(h),
                                  weights, slot_seg, n});

            // Messages W^ [h || z] via the column split of W^.
            const Tape::Id w_ent = tape.slice_cols(head.w, 0, hp.ent_hidden);
            const Tape::Id w_rel =
                tape.slice_cols(head.w, hp.ent_hidden, hp.ent_hidden + hp.rel_hidden);
            const Tape::Id m_ent = tape.matmul(hrep, w_ent, false, true);      // n x dh/K
            const Tape::Id m_rel = tape.matmul(z_hidden, w_rel, false, true);  // m x dh/K
            const Tape::Id m_rel_bar = tape.matmul(z_bar, w_rel, false, true); // n x dh/K
            const Tape::Id msg_edge =
                tape.gather_rows_sum({{m_ent, &plan.ee_src}, {m_rel, &plan.ee_rel}});
            const Tape::Id msg_self = tape.add(m_ent, m_rel_bar);
            const Tape::Id msgs = tape.concat_rows(msg_edge, msg_self);
            head_out.push_back(tape.segment_weighted_sum(msgs, weights, slot_seg, n));
        }
        hrep = tape.leaky_relu(tape.add(concat_heads(tape, head_out), hrep), kLeakySlope);
    }
    const Tape::Id h_hidden = hrep;

    ForwardResult out;
    out.rel_hidden = z_hidden;
    out.ent_hidden = h_hidden;
    out.rel_emb = tape.matmul(z_hidden, bp.rel_output_proj, false, true);
    out.ent_emb = tape.matmul(h_hidden, bp.ent_output_proj, false, true);
    (void)m;
    return out;
}

Tape::Id score_batch(Tape& tape, const ParamBinding& bind, const ModelParameters& params,
                     const ForwardResult& fwd, const std::vector<Triplet>& queries) {
    const BoundParams bp = unpack(params, bind);
    const Tape::Id rel_mixed = tape.matmul(fwd.rel_emb, bp.score_mix, false, true);  // m x ent_dim
    std::vector<int32_t> heads, rels, tails;
    heads.reserve(queries.size());
    for (const Triplet& q : queries) {
        heads.push_back(q.head);
        rels.push_back(q.rel);
        tails.push_back(q.tail);
    }
    const Tape::Id h_i = tape.gather_rows(fwd.ent_emb, std::move(heads));
    const Tape::Id w_k = tape.gather_rows(rel_mixed, std::move(rels));
    const Tape::Id h_j = tape.gather_rows(fwd.ent_emb, std::move(tails));
    return tape.row_sum(tape.mul(tape.mul(h_i, w_k), h_j));
}

Tape::Id margin_loss_batch(Tape& tape, Tape::Id positive_scores, Tape::Id negative_scores,
                           int negatives_per_positive, double margin) {
    if (negatives_per_positive < 1) throw ConfigError("margin loss requires >= 1 negative");
    const int p = tape.value(positive_scores).rows;
    const int q = tape.value(negative_scores).rows;
    if (q != p * negatives_per_positive)
        throw NumericError("margin_loss_batch: negative count mismatch");
    std::vector<int32_t> rep(size_t(q), 0);
    for (int i = 0; i < q; ++i) rep[size_t(i)] = int32_t(i / negatives_per_positive);
    const Tape::Id pos_rep = tape.gather_rows(positive_scores, std::move(rep));
    const Tape::Id hinge =
        tape.relu(tape.add_scalar(tape.sub(negative_scores, pos_rep), margin));
    return tape.sum_all(hinge);
}

Tensor mean_adjacent_relations(const KnowledgeGraph& g, const Tensor& rel_vectors) {
    Tensor out(g.num_entities(), rel_vectors.cols);
    for (int i = 0; i < g.num_entities(); ++i) {
        const auto& in = g.in_neighbors(i);
        if (in.empty()) continue;
        for (const auto& [src, rel] : in)
            for (int c = 0; c < rel_vectors.cols; ++c) out.at(i, c) += rel_vectors.at(rel, c);
        for (int c = 0; c < rel_vectors.cols; ++c) out.at(i, c) /= double(in.size());
    }
    return out;
}

double score(const EmbeddingSet& emb, const ModelParameters& params, const Triplet& t) {
    const Tensor& H = emb.entity_embeddings;
    const Tensor& Z = emb.relation_embeddings;
    if (t.head < 0 || t.head >= H.rows || t.tail < 0 || t.tail >= H.rows || t.rel < 0 ||
        t.rel >= Z.rows)
        throw GraphError("score: triplet id out of range");
    const Tensor& W = params.score_mix;
    double s = 0.0;
    for (int c = 0; c < W.rows; ++c) {
        double wz = 0.0;
        for (int d = 0; d < W.cols; ++d) wz += W.at(c, d) * Z.at(t.rel, d);
        s += H.at(t.head, c) * wz * H.at(t.tail, c);
    }
    return s;
}

double margin_loss(const ModelParameters& params, const EmbeddingSet& emb,
                   const std::vector<Triplet>& positives,
                   const std::vector<std::vector<Triplet>>& negatives_per_positive) {
    if (positives.size() != negatives_per_positive.size())
        throw NumericError("margin_loss: positives/negatives mismatch");
    double total = 0.0;
    for (size_t p = 0; p < positives.size(); ++p) {
        if (negatives_per_positive[p].empty())
            throw NumericError("margin_loss: empty negative list");
        const double pos = score(emb, params, positives[p]);
        for (const Triplet& neg : negatives_per_positive[p])
            total += std::max(0.0, params.hp.margin - pos + score(emb, params, neg));
    }
    return total;
}

}  // namespace ingram
