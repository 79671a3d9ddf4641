#include "ingram/dataset_gen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "ingram/errors.hpp"
#include "ingram/rng.hpp"

namespace ingram {

void GenConfig::validate() const {
    if (n_tr < 1 || n_inf < 1) throw ConfigError("n_tr and n_inf must be >= 1");
    if (p_rel < 0.0 || p_rel > 1.0) throw ConfigError("p_rel must be in [0, 1]");
    if (p_tri < 0.0 || p_tri > 1.0) throw ConfigError("p_tri must be in [0, 1]");
    if (hop_cap < 1) throw ConfigError("hop_cap must be >= 1");
}

namespace {

using IndexList = std::vector<size_t>;

// Undirected entity adjacency with sorted, deduplicated neighbor lists.
std::vector<std::vector<int32_t>> build_adjacency(const KnowledgeGraph& g,
                                                  const std::vector<Triplet>& triplets) {
    std::vector<std::vector<int32_t>> adj(size_t(g.num_entities()));
    for (const Triplet& t : triplets) {
        if (t.head == t.tail) continue;
        adj[size_t(t.head)].push_back(t.tail);
        adj[size_t(t.tail)].push_back(t.head);
    }
    for (auto& row : adj) {
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
    }
    return adj;
}

// Entity ids of the largest connected component among `triplets`; ties break
// toward the component containing the smallest entity id.
std::unordered_set<int32_t> giant_component_entities(int num_entities,
                                                     const std::vector<Triplet>& triplets) {
    std::vector<int32_t> parent(size_t(num_entities), 0);
    std::iota(parent.begin(), parent.end(), 0);
    std::vector<char> seen(size_t(num_entities), 0);
    std::function<int32_t(int32_t)> find = [&](int32_t x) {
        while (parent[size_t(x)] != x) {
            parent[size_t(x)] = parent[size_t(parent[size_t(x)])];
            x = parent[size_t(x)];
        }
        return x;
    };
    for (const Triplet& t : triplets) {
        seen[size_t(t.head)] = seen[size_t(t.tail)] = 1;
        const int32_t a = find(t.head), b = find(t.tail);
        if (a != b) parent[size_t(std::max(a, b))] = std::min(a, b);
    }
    std::unordered_map<int32_t, int> size_of;
    for (int32_t e = 0; e < num_entities; ++e)
        if (seen[size_t(e)]) ++size_of[find(e)];
    int32_t best_root = -1;
    int best_size = 0;
    for (int32_t e = 0; e < num_entities; ++e) {
        if (!seen[size_t(e)]) continue;
        const int32_t root = find(e);
        const int sz = size_of[root];
        if (sz > best_size) {
            best_size = sz;
            best_root = root;
        }
    }
    std::unordered_set<int32_t> out;
    for (int32_t e = 0; e < num_entities; ++e)
        if (seen[size_t(e)] && find(e) == best_root) out.insert(e);
    return out;
}

std::vector<Triplet> triplets_within(const std::vector<Triplet>& triplets,
                                     const std::unordered_set<int32_t>& entities) {
    std::vector<Triplet> out;
    for (const Triplet& t : triplets)
        if (entities.count(t.head) && entities.count(t.tail)) out.push_back(t);
    return out;
}

// Uniform sample of `k` values without replacement, deterministic in rng.
template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> pool, size_t k, Rng& rng) {
    if (pool.size() <= k) return pool;
    for (size_t i = 0; i < k; ++i) {
        const size_t j = i + size_t(rng.uniform_int(int64_t(pool.size() - i)));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

// Seeds plus their two-hop neighborhood, at most `cap` fresh neighbors per
// entity per hop, restricted to `allowed` (empty set = no restriction).
std::unordered_set<int32_t> two_hop_ball(const std::vector<std::vector<int32_t>>& adj,
                                         const std::vector<int32_t>& seeds,
                                         const std::unordered_set<int32_t>* allowed, int cap,
                                         Rng& rng) {
    std::unordered_set<int32_t> ball(seeds.begin(), seeds.end());
    std::vector<int32_t> frontier = seeds;
    std::sort(frontier.begin(), frontier.end());
    for (int hop = 0; hop < 2; ++hop) {
        std::vector<int32_t> next;
        for (int32_t e : frontier) {
            std::vector<int32_t> eligible;
            for (int32_t nbr : adj[size_t(e)]) {
                if (allowed && !allowed->count(nbr)) continue;
                if (ball.count(nbr)) continue;
                eligible.push_back(nbr);
            }
            for (int32_t pick :
                 sample_without_replacement(std::move(eligible), size_t(cap), rng)) {
                if (ball.insert(pick).second) next.push_back(pick);
            }
        }
        std::sort(next.begin(), next.end());
        frontier = std::move(next);
    }
    return ball;
}

// Random spanning tree over an arbitrary triplet list; returns kept indices.
std::vector<size_t> local_spanning_tree(const std::vector<Triplet>& triplets, Rng& rng) {
    std::unordered_map<int32_t, int32_t> compact;
    for (const Triplet& t : triplets) {
        compact.emplace(t.head, int32_t(compact.size()));
        compact.emplace(t.tail, int32_t(compact.size()));
    }
    std::vector<int32_t> parent(compact.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int32_t(int32_t)> find = [&](int32_t x) {
        while (parent[size_t(x)] != x) {
            parent[size_t(x)] = parent[size_t(parent[size_t(x)])];
            x = parent[size_t(x)];
        }
        return x;
    };
    IndexList order(triplets.size());
    std::iota(order.begin(), order.end(), size_t(0));
    rng.shuffle(order);
    std::vector<size_t> tree;
    for (size_t idx : order) {
        const int32_t a = find(compact.at(triplets[idx].head));
        const int32_t b = find(compact.at(triplets[idx].tail));
        if (a == b) continue;
        parent[size_t(std::max(a, b))] = std::min(a, b);
        tree.push_back(idx);
    }
    return tree;
}

LabelTriplet to_labels(const KnowledgeGraph& g, const Triplet& t) {
    return {g.entity_label(t.head), g.relation_label(t.rel), g.entity_label(t.tail)};
}

}  // namespace

GeneratedDataset generate(const KnowledgeGraph& raw, const GenConfig& cfg) {
    cfg.validate();
    if (raw.augmented()) throw GraphError("generate: expects un-augmented raw graph");
    Rng rng(cfg.seed);
    GeneratedDataset ds;

    // Giant connected component of the raw corpus.
    const auto component = giant_component_entities(raw.num_entities(), raw.triplets());
    const std::vector<Triplet> corpus = triplets_within(raw.triplets(), component);
    if (int(component.size()) < cfg.n_tr)
        throw GraphError("generate: giant component has " + std::to_string(component.size()) +
                         " entities, fewer than n_tr=" + std::to_string(cfg.n_tr));

    // Relation pool split.
    std::unordered_set<int32_t> rels_in_corpus;
    for (const Triplet& t : corpus) rels_in_corpus.insert(t.rel);
    std::vector<int32_t> all_rels(rels_in_corpus.begin(), rels_in_corpus.end());
    std::sort(all_rels.begin(), all_rels.end());
    rng.shuffle(all_rels);
    const size_t n_tr_rels = size_t(std::llround((1.0 - cfg.p_rel) * double(all_rels.size())));
    std::vector<char> in_train_pool(size_t(raw.num_original_relations()), 0);
    for (size_t i = 0; i < all_rels.size(); ++i)
        if (i < n_tr_rels) in_train_pool[size_t(all_rels[i])] = 1;

    const auto adj = build_adjacency(raw, corpus);

    // Training side: seeds, two-hop ball, induced triplets, giant component.
    std::vector<int32_t> entity_pool(component.begin(), component.end());
    std::sort(entity_pool.begin(), entity_pool.end());
    const std::vector<int32_t> tr_seeds =
        sample_without_replacement(entity_pool, size_t(cfg.n_tr), rng);
    const auto tr_ball = two_hop_ball(adj, tr_seeds, &component, cfg.hop_cap, rng);

    std::vector<Triplet> train_edges;
    for (const Triplet& t : corpus)
        if (in_train_pool[size_t(t.rel)] && tr_ball.count(t.head) && tr_ball.count(t.tail))
            train_edges.push_back(t);
    if (train_edges.empty()) throw GraphError("generate: no training triplets sampled");
    const auto tr_component = giant_component_entities(raw.num_entities(), train_edges);
    train_edges = triplets_within(train_edges, tr_component);

    std::unordered_set<int32_t> v_tr, r_tr;
    for (const Triplet& t : train_edges) {
        v_tr.insert(t.head);
        v_tr.insert(t.tail);
        r_tr.insert(t.rel);
    }

    // Inference side lives in the corpus minus the training entities.
    std::unordered_set<int32_t> allowed_inf;
    for (int32_t e : entity_pool)
        if (!v_tr.count(e)) allowed_inf.insert(e);
    if (int(allowed_inf.size()) < cfg.n_inf)
        throw GraphError("generate: only " + std::to_string(allowed_inf.size()) +
                         " entities remain for the inference graph, fewer than n_inf=" +
                         std::to_string(cfg.n_inf));
    std::vector<int32_t> inf_pool(allowed_inf.begin(), allowed_inf.end());
    std::sort(inf_pool.begin(), inf_pool.end());
    const std::vector<int32_t> inf_seeds =
        sample_without_replacement(inf_pool, size_t(cfg.n_inf), rng);
    const auto inf_ball = two_hop_ball(adj, inf_seeds, &allowed_inf, cfg.hop_cap, rng);

    // Known-pool (X) and new-pool (Y) triplets among the sampled entities.
    std::vector<Triplet> known_side, new_side;
    for (const Triplet& t : corpus) {
        if (!inf_ball.count(t.head) || !inf_ball.count(t.tail)) continue;
        if (r_tr.count(t.rel))
            known_side.push_back(t);
        else if (!in_train_pool[size_t(t.rel)])
            new_side.push_back(t);
        // Triplets whose relation fell out of r_tr at the giant-component
        // step belong to neither pool.
    }
    if (cfg.p_tri > 0.0 && new_side.empty())
        throw GraphError("generate: no new-relation triplets available while p_tri > 0");

    // Enforce |X| : |Y| = (1 - p_tri) : p_tri by downsampling the overfull
    // side, keeping as many triplets as the ratio allows.
    size_t keep_known = known_side.size(), keep_new = new_side.size();
    if (cfg.p_tri == 0.0) {
        keep_new = 0;
    } else if (cfg.p_tri == 1.0) {
        keep_known = 0;
    } else {
        const double want_known = 1.0 - cfg.p_tri;
        if (double(known_side.size()) * cfg.p_tri <= double(new_side.size()) * want_known)
            keep_new = std::min(new_side.size(),
                                size_t(std::llround(double(known_side.size()) * cfg.p_tri /
                                                    want_known)));
        else
            keep_known = std::min(known_side.size(),
                                  size_t(std::llround(double(new_side.size()) * want_known /
                                                      cfg.p_tri)));
    }
    known_side = sample_without_replacement(std::move(known_side), keep_known, rng);
    new_side = sample_without_replacement(std::move(new_side), keep_new, rng);

    std::vector<Triplet> inf_edges;
    inf_edges.reserve(known_side.size() + new_side.size());
    inf_edges.insert(inf_edges.end(), known_side.begin(), known_side.end());
    inf_edges.insert(inf_edges.end(), new_side.begin(), new_side.end());
    if (inf_edges.empty()) throw GraphError("generate: inference edge set is empty");
    const auto inf_component = giant_component_entities(raw.num_entities(), inf_edges);
    inf_edges = triplets_within(inf_edges, inf_component);
    if (inf_edges.size() < 5)
        throw GraphError("generate: inference edge set too small to split 3:1:1");

    size_t final_new = 0;
    std::unordered_set<int32_t> v_inf, r_inf;
    for (const Triplet& t : inf_edges) {
        v_inf.insert(t.head);
        v_inf.insert(t.tail);
        r_inf.insert(t.rel);
        if (!in_train_pool[size_t(t.rel)]) ++final_new;
    }
    ds.achieved_new_triplet_fraction = double(final_new) / double(inf_edges.size());
    if (std::abs(ds.achieved_new_triplet_fraction - cfg.p_tri) > 0.1)
        ds.warnings.push_back("achieved new-relation triplet fraction " +
                              std::to_string(ds.achieved_new_triplet_fraction) +
                              " misses p_tri=" + std::to_string(cfg.p_tri) +
                              " by more than 0.1 (pool exhausted)");

    // 3:1:1 split of the inference edges. The fact side is seeded with a
    // random spanning tree plus one triplet per relation, so it contains
    // every entity and relation of the inference graph.
    std::vector<char> in_fact(inf_edges.size(), 0);
    size_t fact_count = 0;
    for (size_t idx : local_spanning_tree(inf_edges, rng)) {
        in_fact[idx] = 1;
        ++fact_count;
    }
    {
        std::unordered_set<int32_t> covered;
        for (size_t i = 0; i < inf_edges.size(); ++i)
            if (in_fact[i]) covered.insert(inf_edges[i].rel);
        std::vector<std::vector<size_t>> by_rel;
        std::unordered_map<int32_t, size_t> rel_slot;
        for (size_t i = 0; i < inf_edges.size(); ++i) {
            auto [it, fresh] = rel_slot.emplace(inf_edges[i].rel, by_rel.size());
            if (fresh) by_rel.emplace_back();
            by_rel[it->second].push_back(i);
        }
        std::vector<int32_t> sorted_rels(r_inf.begin(), r_inf.end());
        std::sort(sorted_rels.begin(), sorted_rels.end());
        for (int32_t rel : sorted_rels) {
            if (covered.count(rel)) continue;
            const auto& pool = by_rel[rel_slot.at(rel)];
            const size_t pick = pool[size_t(rng.uniform_int(int64_t(pool.size())))];
            if (!in_fact[pick]) {
                in_fact[pick] = 1;
                ++fact_count;
            }
        }
    }
    const size_t total = inf_edges.size();
    const size_t fact_target = size_t(std::llround(0.6 * double(total)));
    if (fact_count > fact_target)
        ds.warnings.push_back("fact side forced to " + std::to_string(fact_count) +
                              " triplets (> 3/5 of " + std::to_string(total) +
                              ") by spanning-tree and coverage constraints");
    IndexList leftover;
    for (size_t i = 0; i < total; ++i)
        if (!in_fact[i]) leftover.push_back(i);
    rng.shuffle(leftover);
    size_t cursor = 0;
    while (fact_count < fact_target && cursor < leftover.size()) {
        in_fact[leftover[cursor++]] = 1;
        ++fact_count;
    }
    const size_t remaining = leftover.size() - cursor;
    const size_t val_count = size_t(std::llround(double(remaining) / 2.0));
    for (size_t k = 0; k < remaining; ++k) {
        const Triplet& t = inf_edges[leftover[cursor + k]];
        (k < val_count ? ds.valid : ds.test).push_back(to_labels(raw, t));
    }
    for (size_t i = 0; i < total; ++i)
        if (in_fact[i]) ds.msg.push_back(to_labels(raw, inf_edges[i]));
    for (const Triplet& t : train_edges) ds.train.push_back(to_labels(raw, t));

    ds.train_entities = int(v_tr.size());
    ds.train_relations = int(r_tr.size());
    ds.inf_entities = int(v_inf.size());
    ds.inf_relations = int(r_inf.size());
    return ds;
}

namespace {

void write_label_file(const std::vector<LabelTriplet>& rows, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path.string());
    for (const auto& row : rows) out << row[0] << '\t' << row[1] << '\t' << row[2] << '\n';
}

}  // namespace

void write_dataset(const GeneratedDataset& ds, const GenConfig& cfg,
                   const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_label_file(ds.train, dir / "train.txt");
    write_label_file(ds.msg, dir / "msg.txt");
    write_label_file(ds.valid, dir / "valid.txt");
    write_label_file(ds.test, dir / "test.txt");
    std::ofstream meta(dir / "meta.txt", std::ios::binary);
    if (!meta) throw ParseError("cannot write " + (dir / "meta.txt").string());
    meta << "n_tr = " << cfg.n_tr << "\n";
    meta << "n_inf = " << cfg.n_inf << "\n";
    meta << "p_rel = " << cfg.p_rel << "\n";
    meta << "p_tri = " << cfg.p_tri << "\n";
    meta << "hop_cap = " << cfg.hop_cap << "\n";
    meta << "seed = " << cfg.seed << "\n";
    meta << "train_entities = " << ds.train_entities << "\n";
    meta << "train_relations = " << ds.train_relations << "\n";
    meta << "train_triplets = " << ds.train.size() << "\n";
    meta << "inf_entities = " << ds.inf_entities << "\n";
    meta << "inf_relations = " << ds.inf_relations << "\n";
    meta << "inf_triplets = " << ds.msg.size() + ds.valid.size() + ds.test.size() << "\n";
    meta << "msg_triplets = " << ds.msg.size() << "\n";
    meta << "valid_triplets = " << ds.valid.size() << "\n";
    meta << "test_triplets = " << ds.test.size() << "\n";
    meta << "achieved_new_triplet_fraction = " << ds.achieved_new_triplet_fraction << "\n";
    for (const auto& w : ds.warnings) meta << "warning = " << w << "\n";
}

}  // namespace ingram
