#pragma once

#include <cstdint>
#include <vector>

#include "ingram/kg.hpp"

namespace ingram {

// Head/tail incidence frequencies of an augmented graph. Rows are stored
// sparsely per entity, sorted by relation id.
struct IncidenceCounts {
    int num_entities = 0;
    int num_relations = 0;
    std::vector<std::vector<std::pair<int32_t, double>>> head_rows;  // (relation, frequency)
    std::vector<std::vector<std::pair<int32_t, double>>> tail_rows;
    std::vector<double> head_degree;  // row sums of head_rows
    std::vector<double> tail_degree;
};

IncidenceCounts build_incidence(const KnowledgeGraph& g);

// Weighted relation graph. The affinity matrix is symmetric and stored
// fully: the diagonal once, off-diagonal values as both (i,j) and (j,i).
// Entries are sorted by (i, j).
struct RelationGraph {
    struct Entry {
        int32_t i = 0;
        int32_t j = 0;
        double affinity = 0.0;
        int32_t bin = 0;  // in [1, num_bins] once assigned
    };

    int num_relations = 0;
    int num_bins = 0;  // 0 until assign_bins ran
    std::vector<Entry> entries;
    std::vector<size_t> row_start;  // CSR offsets into entries, size num_relations+1

    size_t nnz() const { return entries.size(); }

    // Neighbor ids of relation i (ascending, includes i when a_ii > 0).
    std::vector<int32_t> neighbors(int i) const {
        std::vector<int32_t> out;
        for (size_t e = row_start[size_t(i)]; e < row_start[size_t(i) + 1]; ++e)
            out.push_back(entries[e].j);
        return out;
    }

    double affinity_at(int i, int j) const {
        for (size_t e = row_start[size_t(i)]; e < row_start[size_t(i) + 1]; ++e)
            if (entries[e].j == j) return entries[e].affinity;
        return 0.0;
    }
};

// a_ij = sum_e Eh[e,i] Eh[e,j] / Dh[e]^2  +  sum_e Et[e,i] Et[e,j] / Dt[e]^2.
// Entities absent from a role contribute nothing for that role.
RelationGraph build_affinity(const IncidenceCounts& inc);

// Buckets stored nonzeros into `num_bins` rank quantiles: entries are sorted
// by descending affinity and an entry of rank r gets bin ceil(r*B/nnz).
// Exactly equal affinities share their mid rank, so bin assignment does not
// depend on relation ids and survives relabeling.
void assign_bins(RelationGraph& rg, int num_bins);

RelationGraph build_relation_graph(const KnowledgeGraph& g, int num_bins);

}  // namespace ingram
