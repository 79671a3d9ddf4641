#pragma once

// Shared test fixtures: toy graph builders, a loop-based reference
// implementation of the forward pass (kept independent of the tape path on
// purpose), a brute-force affinity oracle, and the synthetic rule-based
// corpus used by the training and acceptance suites.

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <unistd.h>
#include <vector>

#include "ingram/kg.hpp"
#include "ingram/model.hpp"
#include "ingram/relation_graph.hpp"
#include "ingram/rng.hpp"
#include "ingram/tensor.hpp"

namespace testutil {

using namespace ingram;

// ---------------------------------------------------------------- fixtures

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("ingram_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

using LabelRow = std::array<std::string, 3>;

inline void write_rows(const std::vector<LabelRow>& rows, const std::filesystem::path& path) {
    FILE* f = std::fopen(path.string().c_str(), "wb");
    REQUIRE(f != nullptr);
    for (const auto& r : rows)
        std::fprintf(f, "%s\t%s\t%s\n", r[0].c_str(), r[1].c_str(), r[2].c_str());
    std::fclose(f);
}

inline KnowledgeGraph kg_from(const std::vector<LabelRow>& rows) {
    std::vector<std::string> ents, rels;
    std::vector<Triplet> triplets;
    auto intern = [](const std::string& s, std::vector<std::string>& pool) {
        for (size_t i = 0; i < pool.size(); ++i)
            if (pool[i] == s) return int32_t(i);
        pool.push_back(s);
        return int32_t(pool.size() - 1);
    };
    for (const auto& r : rows)
        triplets.push_back({intern(r[0], ents), intern(r[1], rels), intern(r[2], ents)});
    return KnowledgeGraph::from_labeled(ents, rels, triplets);
}

// Random tree over the entities plus `extra` random triplets: connected by
// construction, every relation used at least once when possible.
inline KnowledgeGraph random_connected_kg(int n, int m, int extra, Rng& rng) {
    std::vector<LabelRow> rows;
    auto ent = [](int i) { return "e" + std::to_string(i); };
    auto rel = [](int i) { return "r" + std::to_string(i); };
    std::set<std::array<int, 3>> seen;
    for (int i = 1; i < n; ++i) {
        const int j = int(rng.uniform_int(i));
        const int r = int(rng.uniform_int(m));
        if (seen.insert({j, r, i}).second) rows.push_back({ent(j), rel(r), ent(i)});
    }
    for (int k = 0; k < extra; ++k) {
        const int a = int(rng.uniform_int(n));
        const int b = int(rng.uniform_int(n));
        const int r = int(rng.uniform_int(m));
        if (seen.insert({a, r, b}).second) rows.push_back({ent(a), rel(r), ent(b)});
    }
    return kg_from(rows);
}

// Not necessarily connected; for the affinity oracle.
inline KnowledgeGraph random_kg(int n, int m, int triplets, Rng& rng) {
    std::vector<LabelRow> rows;
    std::set<std::array<int, 3>> seen;
    for (int k = 0; k < triplets; ++k) {
        const int a = int(rng.uniform_int(n));
        const int b = int(rng.uniform_int(n));
        const int r = int(rng.uniform_int(m));
        if (seen.insert({a, r, b}).second)
            rows.push_back({"e" + std::to_string(a), "r" + std::to_string(r),
                            "e" + std::to_string(b)});
    }
    if (rows.empty()) rows.push_back({"e0", "r0", "e1"});
    return kg_from(rows);
}

// ------------------------------------------------- brute-force affinity

// Dense affinity via the literal triple loop over (entity, rel_i, rel_j).
inline Tensor brute_force_affinity(const KnowledgeGraph& g_aug) {
    const int n = g_aug.num_entities();
    const int m = g_aug.num_relations();
    Tensor eh(n, m), et(n, m);
    for (const Triplet& t : g_aug.triplets()) {
        eh.at(t.head, t.rel) += 1.0;
        et.at(t.tail, t.rel) += 1.0;
    }
    Tensor a(m, m);
    for (int e = 0; e < n; ++e) {
        double dh = 0.0, dt = 0.0;
        for (int r = 0; r < m; ++r) {
            dh += eh.at(e, r);
            dt += et.at(e, r);
        }
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
                if (dh > 0.0) a.at(i, j) += eh.at(e, i) * eh.at(e, j) / (dh * dh);
                if (dt > 0.0) a.at(i, j) += et.at(e, i) * et.at(e, j) / (dt * dt);
            }
    }
    return a;
}

// ------------------------------------------------- reference forward pass

// Straightforward per-node implementation of the aggregation formulas.
// Deliberately structured differently from the batched tape forward: this is
// the oracle the fast path is checked against.

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double lrelu(double x) { return x > 0.0 ? x : kLeakySlope * x; }

inline std::vector<double> row_of(const Tensor& t, int r) {
    std::vector<double> out(size_t(t.cols));
    for (int c = 0; c < t.cols; ++c) out[size_t(c)] = t.at(r, c);
    return out;
}

// y = M x (matrix times column vector)
inline std::vector<double> matvec(const Tensor& M, const std::vector<double>& x) {
    std::vector<double> y(size_t(M.rows), 0.0);
    for (int r = 0; r < M.rows; ++r)
        for (int c = 0; c < M.cols; ++c) y[size_t(r)] += M.at(r, c) * x[size_t(c)];
    return y;
}

inline std::vector<double> concat(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out = a;
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

inline std::vector<double> concat(const std::vector<double>& a, const std::vector<double>& b,
                                  const std::vector<double>& c) {
    return concat(concat(a, b), c);
}

inline std::vector<double> lrelu_vec(std::vector<double> v) {
    for (auto& x : v) x = lrelu(x);
    return v;
}

inline std::vector<double> softmax(std::vector<double> logits) {
    double mx = logits[0];
    for (double x : logits) mx = std::max(mx, x);
    double sum = 0.0;
    for (auto& x : logits) {
        x = std::exp(x - mx);
        sum += x;
    }
    for (auto& x : logits) x /= sum;
    return logits;
}

struct RefOutputs {
    Tensor z_hidden;  // m x rel_hidden
    Tensor h_hidden;  // n x ent_hidden
    Tensor z_emb;     // m x rel_dim
    Tensor h_emb;     // n x ent_dim
};

inline RefOutputs ref_forward(const ModelParameters& p, const KnowledgeGraph& g_aug,
                              const RelationGraph& rg, const FeatureSet& feat) {
    const HyperParams& hp = p.hp;
    const int m = g_aug.num_relations();
    const int n = g_aug.num_entities();

    Tensor z(m, hp.rel_hidden);
    for (int i = 0; i < m; ++i) {
        const auto zi = matvec(p.rel_input_proj, row_of(feat.relation_features, i));
        for (int c = 0; c < hp.rel_hidden; ++c) z.at(i, c) = zi[size_t(c)];
    }

    if (hp.relation_update) {
        const int hw = hp.rel_hidden / hp.rel_heads;
        for (const auto& layer : p.rel_layers) {
            Tensor agg(m, hp.rel_hidden);
            for (int h = 0; h < hp.rel_heads; ++h) {
                const auto& head = layer[size_t(h)];
                for (int i = 0; i < m; ++i) {
                    std::vector<int32_t> nbr;
                    std::vector<int32_t> bin;
                    for (size_t e = rg.row_start[size_t(i)]; e < rg.row_start[size_t(i) + 1];
                         ++e) {
                        nbr.push_back(rg.entries[e].j);
                        bin.push_back(rg.entries[e].bin);
                    }
                    if (nbr.empty()) continue;
                    std::vector<double> weights;
                    if (hp.aggregator == Aggregator::attention) {
                        std::vector<double> logits;
                        const auto zi = row_of(z, i);
                        for (size_t k = 0; k < nbr.size(); ++k) {
                            const auto u = lrelu_vec(
                                matvec(head.theta, concat(zi, row_of(z, nbr[k]))));
                            logits.push_back(dot(row_of(head.y, 0), u) +
                                             head.c.at(bin[k] - 1, 0));
                        }
                        weights = softmax(logits);
                    } else if (hp.aggregator == Aggregator::mean) {
                        weights.assign(nbr.size(), 1.0 / double(nbr.size()));
                    } else {
                        weights.assign(nbr.size(), 1.0);
                    }
                    for (size_t k = 0; k < nbr.size(); ++k) {
                        const auto msg = matvec(head.w, row_of(z, nbr[k]));
                        for (int c = 0; c < hw; ++c)
                            agg.at(i, h * hw + c) += weights[k] * msg[size_t(c)];
                    }
                }
            }
            for (int i = 0; i < m; ++i)
                for (int c = 0; c < hp.rel_hidden; ++c)
                    z.at(i, c) = lrelu(agg.at(i, c) + z.at(i, c));
        }
    }

    // Self-loop relation context.
    Tensor zbar(n, hp.rel_hidden);
    if (hp.self_loop == SelfLoop::mean_relation) {
        zbar = mean_adjacent_relations(g_aug, z);
    } else {
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < hp.rel_hidden; ++c) zbar.at(i, c) = p.self_loop_vec.at(0, c);
    }

    Tensor hrep(n, hp.ent_hidden);
    for (int i = 0; i < n; ++i) {
        const auto hi = matvec(p.ent_input_proj, row_of(feat.entity_features, i));
        for (int c = 0; c < hp.ent_hidden; ++c) hrep.at(i, c) = hi[size_t(c)];
    }

    const int ehw = hp.ent_hidden / hp.ent_heads;
    for (const auto& layer : p.ent_layers) {
        Tensor agg(n, hp.ent_hidden);
        for (int h = 0; h < hp.ent_heads; ++h) {
            const auto& head = layer[size_t(h)];
            for (int i = 0; i < n; ++i) {
                const auto& in = g_aug.in_neighbors(i);
                const auto hi = row_of(hrep, i);
                const auto zb = row_of(zbar, i);
                std::vector<double> weights;
                if (hp.aggregator == Aggregator::attention) {
                    std::vector<double> logits;
                    logits.push_back(dot(row_of(head.y, 0),
                                         lrelu_vec(matvec(head.theta, concat(hi, hi, zb)))));
                    for (const auto& [src, rel] : in)
                        logits.push_back(
                            dot(row_of(head.y, 0),
                                lrelu_vec(matvec(head.theta,
                                                 concat(hi, row_of(hrep, src), row_of(z, rel))))));
                    weights = softmax(logits);
                } else if (hp.aggregator == Aggregator::mean) {
                    weights.assign(in.size() + 1, 1.0 / double(in.size() + 1));
                } else {
                    weights.assign(in.size() + 1, 1.0);
                }
                const auto self_msg = matvec(head.w, concat(hi, zb));
                for (int c = 0; c < ehw; ++c)
                    agg.at(i, h * ehw + c) += weights[0] * self_msg[size_t(c)];
                for (size_t k = 0; k < in.size(); ++k) {
                    const auto msg = matvec(
                        head.w, concat(row_of(hrep, in[k].first), row_of(z, in[k].second)));
                    for (int c = 0; c < ehw; ++c)
                        agg.at(i, h * ehw + c) += weights[k + 1] * msg[size_t(c)];
                }
            }
        }
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < hp.ent_hidden; ++c)
                hrep.at(i, c) = lrelu(agg.at(i, c) + hrep.at(i, c));
    }

    RefOutputs out;
    out.z_hidden = z;
    out.h_hidden = hrep;
    out.z_emb = Tensor(m, hp.rel_dim);
    for (int i = 0; i < m; ++i) {
        const auto v = matvec(p.rel_output_proj, row_of(z, i));
        for (int c = 0; c < hp.rel_dim; ++c) out.z_emb.at(i, c) = v[size_t(c)];
    }
    out.h_emb = Tensor(n, hp.ent_dim);
    for (int i = 0; i < n; ++i) {
        const auto v = matvec(p.ent_output_proj, row_of(hrep, i));
        for (int c = 0; c < hp.ent_dim; ++c) out.h_emb.at(i, c) = v[size_t(c)];
    }
    return out;
}

// -------------------------------------------------- synthetic corpus

// Role-structured corpus with planted composition rules. Entities split into
// three role pools (x / y / z), each subdivided into blocks. Every block
// carries a few random pairing skeletons (permutations pi, sigma of the
// block); each relation family uses its group's skeleton:
//   (x_i, A_f, y_pi(i)), (y_j, B_f, z_sigma(j)), (x_i, C_f, z_sigma(pi(i)))
// so C_f always composes A_f with B_f, and families in the same group lay
// parallel evidence over the same entity pairs. Coverage subsamples the
// skeleton per family; bridge chains connect consecutive blocks.
inline std::vector<LabelRow> synthetic_corpus(int entities, int families, Rng& rng,
                                              int blocks = 12, int groups = 2,
                                              int partners = 2, double coverage = 0.5,
                                              int bridges_per_block = 6) {
    const int role_size = entities / 3;
    const int block_size = std::max(2, role_size / blocks);
    const int nblocks = role_size / block_size;
    auto ent = [&](int role, int block, int idx) {
        return "n" + std::to_string(role * role_size + block * block_size + idx);
    };
    std::vector<LabelRow> rows;
    std::set<std::array<std::string, 3>> seen;
    auto add = [&](const std::string& h, const std::string& r, const std::string& t) {
        if (seen.insert({h, r, t}).second) rows.push_back({h, r, t});
    };
    auto rel = [](const char* kind, int f) { return std::string(kind) + std::to_string(f); };
    auto pick_partners = [&](int span) {
        std::vector<int> out;
        while (int(out.size()) < partners) {
            const int p = int(rng.uniform_int(span));
            if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
        }
        return out;
    };

    for (int b = 0; b < nblocks; ++b) {
        for (int g = 0; g < groups; ++g) {
            // Per-group partner skeleton shared by every family of the group.
            std::vector<std::vector<int>> xy, yz;
            for (int i = 0; i < block_size; ++i) xy.push_back(pick_partners(block_size));
            for (int j = 0; j < block_size; ++j) yz.push_back(pick_partners(block_size));
            for (int f = g; f < families; f += groups) {
                for (int i = 0; i < block_size; ++i)
                    for (int j : xy[size_t(i)]) {
                        if (rng.uniform() < coverage)
                            add(ent(0, b, i), rel("A", f), ent(1, b, j));
                        // Compose through one of j's targets.
                        const int k =
                            yz[size_t(j)][size_t(rng.uniform_int(int64_t(partners)))];
                        if (rng.uniform() < coverage)
                            add(ent(0, b, i), rel("C", f), ent(2, b, k));
                    }
                for (int j = 0; j < block_size; ++j)
                    for (int k : yz[size_t(j)])
                        if (rng.uniform() < coverage)
                            add(ent(1, b, j), rel("B", f), ent(2, b, k));
            }
        }
        for (int k = 0; k < bridges_per_block; ++k) {
            const int f = int(rng.uniform_int(families));
            const int b2 = (b + 1) % nblocks;
            const int i = int(rng.uniform_int(block_size));
            const int j = int(rng.uniform_int(block_size));
            const int l = int(rng.uniform_int(block_size));
            add(ent(0, b, i), rel("A", f), ent(1, b2, j));
            add(ent(1, b2, j), rel("B", f), ent(2, b2, l));
            add(ent(0, b, i), rel("C", f), ent(2, b2, l));
        }
    }
    return rows;
}

}  // namespace testutil
