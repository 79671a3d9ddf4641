#include "ingram/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "ingram/errors.hpp"

namespace ingram {

double rank_from_scores(const std::vector<double>& scores, int answer,
                        const std::vector<char>& masked, TieHandling ties) {
    if (answer < 0 || answer >= int(scores.size()))
        throw GraphError("rank_from_scores: answer outside candidate set");
    if (!masked.empty() && masked[size_t(answer)])
        throw GraphError("rank_from_scores: answer is filtered out");
    const double target = scores[size_t(answer)];
    int greater = 0, equal = 0;
    for (size_t c = 0; c < scores.size(); ++c) {
        if (!masked.empty() && masked[c]) continue;
        if (scores[c] > target)
            ++greater;
        else if (scores[c] == target)
            ++equal;  // includes the answer itself
    }
    switch (ties) {
        case TieHandling::mid_rank: return 1.0 + greater + (equal - 1) / 2.0;
        case TieHandling::optimistic: return 1.0 + greater;
        case TieHandling::pessimistic: return double(greater + equal);
    }
    return 0.0;
}

namespace {

// Scores f(head, rel, c) for every candidate entity c.
std::vector<double> score_candidates(const EmbeddingSet& emb, const ModelParameters& params,
                                     int32_t head, int32_t rel) {
    const Tensor& H = emb.entity_embeddings;
    const Tensor& Z = emb.relation_embeddings;
    const Tensor& W = params.score_mix;
    if (rel < 0 || rel >= Z.rows) throw GraphError("rank_query: relation id out of range");
    if (head < 0 || head >= H.rows) throw GraphError("rank_query: entity id out of range");
    // w = (W~ z_rel) elementwise-scaled by the head row; score is then a dot
    // product per candidate row.
    std::vector<double> hw(size_t(W.rows));
    for (int c = 0; c < W.rows; ++c) {
        double wz = 0.0;
        for (int d = 0; d < W.cols; ++d) wz += W.at(c, d) * Z.at(rel, d);
        hw[size_t(c)] = wz * H.at(head, c);
    }
    std::vector<double> scores(size_t(H.rows));
    for (int cand = 0; cand < H.rows; ++cand) {
        const double* row = &H.v[size_t(cand) * H.cols];
        double s = 0.0;
        for (int c = 0; c < H.cols; ++c) s += hw[size_t(c)] * row[c];
        scores[size_t(cand)] = s;
    }
    return scores;
}

MetricBlock summarize(const std::vector<double>& ranks) {
    MetricBlock b;
    b.n_queries = int(ranks.size());
    if (ranks.empty()) return b;
    double mr = 0.0, mrr = 0.0, h1 = 0.0, h3 = 0.0, h10 = 0.0;
    for (double r : ranks) {
        mr += r;
        mrr += 1.0 / r;
        h1 += r <= 1.0 ? 1.0 : 0.0;
        h3 += r <= 3.0 ? 1.0 : 0.0;
        h10 += r <= 10.0 ? 1.0 : 0.0;
    }
    const double n = double(ranks.size());
    b.mr = mr / n;
    b.mrr = mrr / n;
    b.hit1 = h1 / n;
    b.hit3 = h3 / n;
    b.hit10 = h10 / n;
    return b;
}

}  // namespace

double rank_query(const EmbeddingSet& emb, const ModelParameters& params, int32_t head,
                  int32_t rel, int32_t answer, const TripletFilter& filter, bool filtered,
                  TieHandling ties) {
    const std::vector<double> scores = score_candidates(emb, params, head, rel);
    std::vector<char> masked;
    if (filtered) {
        masked.assign(scores.size(), 0);
        for (int32_t c = 0; c < int32_t(scores.size()); ++c)
            if (c != answer && filter.contains(head, rel, c)) masked[size_t(c)] = 1;
    }
    return rank_from_scores(scores, answer, masked, ties);
}

EvalReport evaluate(const EmbeddingSet& emb, const ModelParameters& params,
                    const KnowledgeGraph& g_inf_augmented, const std::vector<Triplet>& targets,
                    const TripletFilter& filter, const EvalOptions& opts) {
    if (targets.empty()) throw GraphError("evaluate: no target triplets");
    if (!g_inf_augmented.augmented()) throw GraphError("evaluate: graph must be augmented");
    const int m_orig = g_inf_augmented.num_original_relations();

    EvalReport report;
    report.ranks.reserve(2 * targets.size());
    for (size_t q = 0; q < targets.size(); ++q) {
        const Triplet& t = targets[q];
        const bool known = !opts.is_known_relation.empty() &&
                           t.rel < int32_t(opts.is_known_relation.size()) &&
                           opts.is_known_relation[size_t(t.rel)] != 0;
        // Tail query (h, r, ?).
        report.ranks.push_back(
            {int(q), false, known,
             rank_query(emb, params, t.head, t.rel, t.tail, filter, opts.filtered, opts.ties)});
        // Head query (?, r, t) realized as (t, r^-1, ?).
        report.ranks.push_back(
            {int(q), true, known,
             rank_query(emb, params, t.tail, t.rel + m_orig, t.head, filter, opts.filtered,
                        opts.ties)});
    }

    std::vector<double> all, known, unseen, head_dir, tail_dir;
    for (const QueryRank& r : report.ranks) {
        all.push_back(r.rank);
        (r.known_relation ? known : unseen).push_back(r.rank);
        (r.head_direction ? head_dir : tail_dir).push_back(r.rank);
    }
    report.all = summarize(all);
    report.known = summarize(known);
    report.unseen = summarize(unseen);
    report.head_dir = summarize(head_dir);
    report.tail_dir = summarize(tail_dir);
    return report;
}

}  // namespace ingram
