#pragma once

#include <cstdint>
#include <unordered_set>
#include <vector>

#include "ingram/kg.hpp"
#include "ingram/model.hpp"

namespace ingram {

enum class TieHandling { mid_rank, optimistic, pessimistic };

// True-triplet lookup for the filtered ranking protocol. Triplets are stored
// in both directions so head queries (realized through reverse relations)
// filter correctly.
class TripletFilter {
public:
    TripletFilter() = default;

    // `m_orig` is the original relation count of the graph the ids refer to.
    void add(const Triplet& t, int m_orig) {
        set_.insert(key(t.head, t.rel, t.tail));
        set_.insert(key(t.tail, t.rel + m_orig, t.head));
    }
    void add_all(const std::vector<Triplet>& ts, int m_orig) {
        for (const Triplet& t : ts) add(t, m_orig);
    }
    bool contains(int32_t head, int32_t rel, int32_t tail) const {
        return set_.count(key(head, rel, tail)) > 0;
    }
    size_t size() const { return set_.size(); }

private:
    static uint64_t key(int32_t h, int32_t r, int32_t t) {
        return (uint64_t(uint32_t(h)) << 42) ^ (uint64_t(uint32_t(r)) << 21) ^
               uint64_t(uint32_t(t));
    }
    std::unordered_set<uint64_t> set_;
};

// Rank of `answer` among unmasked candidates:
// 1 + #strictly-greater + (#equal - 1) / 2 under mid-rank ties.
// masked[c] != 0 removes candidate c from the pool; the answer itself must
// not be masked.
double rank_from_scores(const std::vector<double>& scores, int answer,
                        const std::vector<char>& masked,
                        TieHandling ties = TieHandling::mid_rank);

struct MetricBlock {
    double mr = 0.0;
    double mrr = 0.0;
    double hit1 = 0.0;
    double hit3 = 0.0;
    double hit10 = 0.0;
    int n_queries = 0;
};

struct QueryRank {
    int target_index = 0;     // index into the targets vector
    bool head_direction = false;
    bool known_relation = false;
    double rank = 0.0;
};

struct EvalReport {
    MetricBlock all, known, unseen, head_dir, tail_dir;
    std::vector<QueryRank> ranks;
};

struct EvalOptions {
    bool filtered = true;
    TieHandling ties = TieHandling::mid_rank;
    // is_known_relation[k] for original relation id k of the inference graph;
    // empty means "all new".
    std::vector<char> is_known_relation;
};

// Rank of one query against every entity of the graph. The query is
// (head, rel, ?) in the augmented relation space: pass rel + m_orig to rank
// the head side of an original triplet.
double rank_query(const EmbeddingSet& emb, const ModelParameters& params, int32_t head,
                  int32_t rel, int32_t answer, const TripletFilter& filter, bool filtered,
                  TieHandling ties = TieHandling::mid_rank);

// Both-direction filtered ranking of every target triplet. Targets are in
// the un-augmented relation space of g_inf.
EvalReport evaluate(const EmbeddingSet& emb, const ModelParameters& params,
                    const KnowledgeGraph& g_inf_augmented, const std::vector<Triplet>& targets,
                    const TripletFilter& filter, const EvalOptions& opts = {});

}  // namespace ingram
