#include "ingram/relation_graph.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "ingram/errors.hpp"

namespace ingram {

IncidenceCounts build_incidence(const KnowledgeGraph& g) {
    if (!g.augmented()) throw GraphError("build_incidence: graph must be augmented");
    IncidenceCounts inc;
    inc.num_entities = g.num_entities();
    inc.num_relations = g.num_relations();
    std::vector<std::map<int32_t, double>> head(size_t(inc.num_entities));
    std::vector<std::map<int32_t, double>> tail(size_t(inc.num_entities));
    for (const Triplet& t : g.triplets()) {
        head[size_t(t.head)][t.rel] += 1.0;
        tail[size_t(t.tail)][t.rel] += 1.0;
    }
    inc.head_rows.resize(size_t(inc.num_entities));
    inc.tail_rows.resize(size_t(inc.num_entities));
    inc.head_degree.assign(size_t(inc.num_entities), 0.0);
    inc.tail_degree.assign(size_t(inc.num_entities), 0.0);
    for (int e = 0; e < inc.num_entities; ++e) {
        for (auto [rel, cnt] : head[size_t(e)]) {
            inc.head_rows[size_t(e)].emplace_back(rel, cnt);
            inc.head_degree[size_t(e)] += cnt;
        }
        for (auto [rel, cnt] : tail[size_t(e)]) {
            inc.tail_rows[size_t(e)].emplace_back(rel, cnt);
            inc.tail_degree[size_t(e)] += cnt;
        }
    }
    return inc;
}

RelationGraph build_affinity(const IncidenceCounts& inc) {
    // Collect the upper-triangle (i <= j) contributions per pair, then sum
    // each pair's terms in sorted value order. The sums are therefore
    // bitwise independent of entity ids, and the mirrored copy is bitwise
    // equal, so bin boundaries survive graph relabeling exactly.
    std::map<std::pair<int32_t, int32_t>, std::vector<double>> upper;
    auto accumulate = [&upper](const std::vector<std::vector<std::pair<int32_t, double>>>& rows,
                               const std::vector<double>& degree) {
        for (size_t e = 0; e < rows.size(); ++e) {
            const auto& row = rows[e];
            if (row.empty()) continue;
            const double inv_sq = 1.0 / (degree[e] * degree[e]);
            for (size_t a = 0; a < row.size(); ++a)
                for (size_t b = a; b < row.size(); ++b)
                    upper[{row[a].first, row[b].first}].push_back(row[a].second * row[b].second *
                                                                  inv_sq);
        }
    };
    accumulate(inc.head_rows, inc.head_degree);
    accumulate(inc.tail_rows, inc.tail_degree);

    RelationGraph rg;
    rg.num_relations = inc.num_relations;
    for (auto& [ij, terms] : upper) {
        std::sort(terms.begin(), terms.end());
        double value = 0.0;
        for (double t : terms) value += t;
        if (value == 0.0) continue;
        rg.entries.push_back({ij.first, ij.second, value, 0});
        if (ij.first != ij.second) rg.entries.push_back({ij.second, ij.first, value, 0});
    }
    std::sort(rg.entries.begin(), rg.entries.end(), [](const auto& a, const auto& b) {
        return std::pair(a.i, a.j) < std::pair(b.i, b.j);
    });
    rg.row_start.assign(size_t(rg.num_relations) + 1, 0);
    for (const auto& e : rg.entries) ++rg.row_start[size_t(e.i) + 1];
    std::partial_sum(rg.row_start.begin(), rg.row_start.end(), rg.row_start.begin());
    return rg;
}

void assign_bins(RelationGraph& rg, int num_bins) {
    if (num_bins < 1) throw ConfigError("number of bins must be >= 1");
    rg.num_bins = num_bins;
    const size_t nnz = rg.entries.size();
    if (nnz == 0) return;

    std::vector<size_t> order(nnz);
    std::iota(order.begin(), order.end(), size_t(0));
    std::sort(order.begin(), order.end(), [&rg](size_t a, size_t b) {
        const auto& ea = rg.entries[a];
        const auto& eb = rg.entries[b];
        if (ea.affinity != eb.affinity) return ea.affinity > eb.affinity;
        return std::pair(ea.i, ea.j) < std::pair(eb.i, eb.j);
    });

    // Walk tie groups of exactly equal affinity; every member gets the bin of
    // the group's mid rank. Integer arithmetic keeps this exact.
    size_t g0 = 0;
    while (g0 < nnz) {
        size_t g1 = g0 + 1;
        while (g1 < nnz &&
               rg.entries[order[g1]].affinity == rg.entries[order[g0]].affinity)
            ++g1;
        const uint64_t rank2 = uint64_t(g0 + 1) + uint64_t(g1);  // first + last, 1-based
        const uint64_t num = rank2 * uint64_t(num_bins);
        const uint64_t den = 2 * uint64_t(nnz);
        const int32_t bin = int32_t((num + den - 1) / den);
        for (size_t k = g0; k < g1; ++k) rg.entries[order[k]].bin = bin;
        g0 = g1;
    }
}

RelationGraph build_relation_graph(const KnowledgeGraph& g, int num_bins) {
    RelationGraph rg = build_affinity(build_incidence(g));
    assign_bins(rg, num_bins);
    return rg;
}

}  // namespace ingram
