#include "ingram/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "ingram/adam.hpp"
#include "ingram/errors.hpp"
#include "ingram/inference.hpp"

namespace ingram {

void TrainConfig::validate() const {
    hp.validate();
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (validate_every < 1) throw ConfigError("validate_every must be >= 1");
    if (negatives < 1) throw ConfigError("negatives must be >= 1");
    if (batch_size < 0) throw ConfigError("batch_size must be >= 0");
    if (learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
}

namespace {

class UnionFind {
public:
    explicit UnionFind(int n) : parent_(size_t(n)), rank_(size_t(n), 0), components_(n) {
        std::iota(parent_.begin(), parent_.end(), 0);
    }
    int find(int x) {
        while (parent_[size_t(x)] != x) {
            parent_[size_t(x)] = parent_[size_t(parent_[size_t(x)])];
            x = parent_[size_t(x)];
        }
        return x;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        if (rank_[size_t(a)] < rank_[size_t(b)]) std::swap(a, b);
        parent_[size_t(b)] = a;
        if (rank_[size_t(a)] == rank_[size_t(b)]) ++rank_[size_t(a)];
        --components_;
        return true;
    }
    int components() const { return components_; }

private:
    std::vector<int> parent_;
    std::vector<int> rank_;
    int components_;
};

}  // namespace

std::vector<Triplet> spanning_tree_triplets(const KnowledgeGraph& g, Rng& rng) {
    if (g.augmented()) throw GraphError("spanning_tree_triplets: expects un-augmented graph");
    std::vector<size_t> order(g.triplets().size());
    std::iota(order.begin(), order.end(), size_t(0));
    rng.shuffle(order);
    UnionFind uf(g.num_entities());
    std::vector<Triplet> tree;
    tree.reserve(size_t(g.num_entities()) - 1);
    for (size_t idx : order) {
        const Triplet& t = g.triplets()[idx];
        if (uf.unite(t.head, t.tail)) tree.push_back(t);
    }
    if (uf.components() != 1)
        throw GraphError("graph is disconnected: " + std::to_string(uf.components()) +
                         " components");
    return tree;
}

SplitState dynamic_split(const KnowledgeGraph& g_tr, Rng& rng) {
    if (g_tr.augmented()) throw GraphError("dynamic_split: expects un-augmented graph");
    const auto& all = g_tr.triplets();
    const size_t total = all.size();

    std::unordered_set<Triplet, TripletHash> facts;
    for (const Triplet& t : spanning_tree_triplets(g_tr, rng)) facts.insert(t);

    // One random triplet per relation not yet covered by the tree.
    std::vector<char> covered(size_t(g_tr.num_relations()), 0);
    for (const Triplet& t : facts) covered[size_t(t.rel)] = 1;
    std::vector<std::vector<size_t>> by_rel(size_t(g_tr.num_relations()));
    for (size_t i = 0; i < total; ++i) by_rel[size_t(all[i].rel)].push_back(i);
    for (int r = 0; r < g_tr.num_relations(); ++r) {
        if (covered[size_t(r)] || by_rel[size_t(r)].empty()) continue;
        const auto& pool = by_rel[size_t(r)];
        facts.insert(all[pool[size_t(rng.uniform_int(int64_t(pool.size())))]]);
    }

    // Fill uniformly at random up to a 3:1 fact/target ratio. Constraints
    // win when they already exceed it.
    const size_t desired_facts = (3 * total + 2) / 4;
    if (facts.size() < desired_facts) {
        std::vector<size_t> remaining;
        remaining.reserve(total - facts.size());
        for (size_t i = 0; i < total; ++i)
            if (!facts.count(all[i])) remaining.push_back(i);
        rng.shuffle(remaining);
        for (size_t k = 0; k < remaining.size() && facts.size() < desired_facts; ++k)
            facts.insert(all[remaining[k]]);
    }

    SplitState split;
    split.facts.reserve(facts.size());
    split.targets.reserve(total - facts.size());
    for (const Triplet& t : all) (facts.count(t) ? split.facts : split.targets).push_back(t);
    return split;
}

std::vector<Triplet> sample_negatives(const KnowledgeGraph& g, const Triplet& positive,
                                      int count, Rng& rng) {
    if (count < 1) throw ConfigError("sample_negatives: count must be >= 1");
    if (g.num_entities() < 2)
        throw GraphError("sample_negatives: need at least two entities to corrupt");
    std::vector<Triplet> out;
    out.reserve(size_t(count));
    while (int(out.size()) < count) {
        Triplet neg = positive;
        const bool corrupt_head = rng.coin();
        const int32_t entity = int32_t(rng.uniform_int(g.num_entities()));
        (corrupt_head ? neg.head : neg.tail) = entity;
        if (neg == positive) continue;  // redraw
        out.push_back(neg);
    }
    return out;
}

uint64_t validation_seed(uint64_t train_seed, int epoch) {
    return mix_seed(mix_seed(train_seed, 0x76616c6964617465ULL), uint64_t(epoch));
}

namespace {

double run_validation(const ModelParameters& params, const ValidationSet& val, uint64_t seed,
                      double* hit10_out) {
    const EmbeddingSet emb = embed_graph(params, val.graph, seed);
    EvalOptions opts;
    opts.is_known_relation = val.is_known_relation;
    const KnowledgeGraph g_aug = val.graph.augment_reverse();
    const EvalReport rep = evaluate(emb, params, g_aug, val.targets, val.filter, opts);
    if (hit10_out) *hit10_out = rep.all.hit10;
    return rep.all.mrr;
}

// One optimization step over `positives` given a fixed fact graph.
double train_step(ModelParameters& params, Adam& adam, const ForwardPlan& plan,
                  const FeatureSet& features, const std::vector<Triplet>& positives,
                  const std::vector<Triplet>& negatives, int negatives_per_positive) {
    Tape tape;
    const ParamBinding bind = bind_parameters(tape, params);
    const ForwardResult fwd = model_forward(tape, params, bind, plan, features);
    const Tape::Id pos_scores = score_batch(tape, bind, params, fwd, positives);
    const Tape::Id neg_scores = score_batch(tape, bind, params, fwd, negatives);
    const Tape::Id loss =
        margin_loss_batch(tape, pos_scores, neg_scores, negatives_per_positive, params.hp.margin);
    const double loss_value = tape.value(loss).v[0];
    tape.backward(loss);

    std::vector<Tensor*> tensors;
    params.for_each_parameter([&tensors](const std::string&, Tensor& t) { tensors.push_back(&t); });
    std::vector<const Tensor*> grads;
    grads.reserve(bind.ordered.size());
    for (Tape::Id id : bind.ordered) grads.push_back(&tape.grad(id));
    adam.step(tensors, grads);
    return loss_value;
}

}  // namespace

TrainResult fit(const KnowledgeGraph& g_tr, const TrainConfig& config,
                const ValidationSet* validation) {
    config.validate();
    if (g_tr.augmented()) throw GraphError("fit: expects un-augmented training graph");

    Rng rng(config.seed);
    ModelParameters params = ModelParameters::init(config.hp, rng);
    params.train_seed = config.seed;

    Adam adam(config.learning_rate);
    params.for_each_parameter(
        [&adam](const std::string&, const Tensor& t) { adam.register_parameter(t); });

    TrainResult result;
    result.params = params;

    std::optional<SplitState> fixed_split;
    if (!config.dynamic_split) fixed_split = dynamic_split(g_tr, rng);

    bool validated = false;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const SplitState split = config.dynamic_split ? dynamic_split(g_tr, rng) : *fixed_split;

        const KnowledgeGraph g_fact = g_tr.with_triplets(split.facts).augment_reverse();
        const RelationGraph rg = build_relation_graph(g_fact, config.hp.num_bins);
        const ForwardPlan plan = make_plan(g_fact, rg);
        const FeatureSet features =
            FeatureSet::draw(config.hp, g_fact.num_relations(), g_fact.num_entities(), rng);

        std::vector<Triplet> positives = split.targets;
        rng.shuffle(positives);
        std::vector<Triplet> negatives;
        negatives.reserve(positives.size() * size_t(config.negatives));
        for (const Triplet& pos : positives)
            for (const Triplet& neg : sample_negatives(g_tr, pos, config.negatives, rng))
                negatives.push_back(neg);

        double epoch_loss = 0.0;
        const int bs = config.batch_size == 0 ? int(positives.size()) : config.batch_size;
        for (size_t b0 = 0; b0 < positives.size(); b0 += size_t(bs)) {
            const size_t b1 = std::min(positives.size(), b0 + size_t(bs));
            const std::vector<Triplet> batch_pos(positives.begin() + ptrdiff_t(b0),
                                                 positives.begin() + ptrdiff_t(b1));
            const std::vector<Triplet> batch_neg(
                negatives.begin() + ptrdiff_t(b0 * size_t(config.negatives)),
                negatives.begin() + ptrdiff_t(b1 * size_t(config.negatives)));
            epoch_loss += train_step(params, adam, plan, features, batch_pos, batch_neg,
                                     config.negatives);
        }
        if (!std::isfinite(epoch_loss))
            throw NumericError("fit: non-finite loss at epoch " + std::to_string(epoch));

        TrainLogEntry entry;
        entry.epoch = epoch;
        entry.loss = epoch_loss;

        if (validation && (epoch + 1) % config.validate_every == 0) {
            const uint64_t vseed = validation_seed(config.seed, epoch);
            double hit10 = 0.0;
            const double mrr = run_validation(params, *validation, vseed, &hit10);
            entry.val_mrr = mrr;
            entry.val_hit10 = hit10;
            if (!validated || mrr > result.best_mrr) {
                result.best_mrr = mrr;
                result.best_epoch = epoch;
                result.best_val_seed = vseed;
                result.params = params;
            }
            validated = true;
        }
        result.log.push_back(entry);
    }

    if (!validated) result.params = params;
    return result;
}

}  // namespace ingram
