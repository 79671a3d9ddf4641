#include "ingram/kg.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "ingram/errors.hpp"

namespace ingram {

KnowledgeGraph KnowledgeGraph::from_labeled(std::vector<std::string> entity_labels,
                                            std::vector<std::string> relation_labels,
                                            std::vector<Triplet> triplets) {
    KnowledgeGraph g;
    g.entity_labels_ = std::move(entity_labels);
    g.relation_labels_ = std::move(relation_labels);
    g.m_orig_ = int(g.relation_labels_.size());
    for (int32_t i = 0; i < int32_t(g.entity_labels_.size()); ++i)
        g.entity_ids_[g.entity_labels_[size_t(i)]] = i;
    for (int32_t i = 0; i < int32_t(g.relation_labels_.size()); ++i)
        g.relation_ids_[g.relation_labels_[size_t(i)]] = i;
    // Dedup, keeping first-appearance order.
    g.triplets_.reserve(triplets.size());
    for (const Triplet& t : triplets) {
        if (t.head < 0 || t.head >= g.num_entities() || t.tail < 0 ||
            t.tail >= g.num_entities() || t.rel < 0 || t.rel >= g.m_orig_)
            throw GraphError("triplet id out of range");
        if (g.triplet_set_.emplace(t, 1).second) g.triplets_.push_back(t);
    }
    g.rebuild_indexes();
    return g;
}

void KnowledgeGraph::rebuild_indexes() {
    in_neighbors_.assign(size_t(num_entities()), {});
    for (const Triplet& t : triplets_)
        in_neighbors_[size_t(t.tail)].emplace_back(t.head, t.rel);
}

std::vector<int32_t> KnowledgeGraph::relations_between(int j, int i) const {
    std::set<int32_t> rels;
    for (const auto& [src, rel] : in_neighbors_[size_t(i)])
        if (src == j) rels.insert(rel);
    return {rels.begin(), rels.end()};
}

std::string KnowledgeGraph::relation_label(int id) const {
    if (id < m_orig_) return relation_labels_[size_t(id)];
    return relation_labels_[size_t(id - m_orig_)] + "^-1";
}

int KnowledgeGraph::entity_id(const std::string& label) const {
    auto it = entity_ids_.find(label);
    return it == entity_ids_.end() ? -1 : it->second;
}

int KnowledgeGraph::relation_id(const std::string& label) const {
    auto it = relation_ids_.find(label);
    return it == relation_ids_.end() ? -1 : it->second;
}

KnowledgeGraph KnowledgeGraph::with_triplets(std::vector<Triplet> triplets) const {
    if (augmented_) throw GraphError("with_triplets: expects an un-augmented source graph");
    return from_labeled(entity_labels_, relation_labels_, std::move(triplets));
}

KnowledgeGraph KnowledgeGraph::augment_reverse() const {
    if (augmented_) throw GraphError("augment_reverse: graph is already augmented");
    KnowledgeGraph g = *this;
    g.triplets_.reserve(2 * triplets_.size());
    for (const Triplet& t : triplets_) {
        Triplet rev{t.tail, t.rel + m_orig_, t.head};
        g.triplets_.push_back(rev);
        g.triplet_set_.emplace(rev, 1);
    }
    g.augmented_ = true;
    g.rebuild_indexes();
    return g;
}

uint64_t KnowledgeGraph::fingerprint() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto eat = [&h](const void* data, size_t len) {
        const unsigned char* p = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < len; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ULL;
        }
    };
    auto eat_str = [&](const std::string& s) { eat(s.data(), s.size()); eat("\0", 1); };
    for (const auto& s : entity_labels_) eat_str(s);
    for (const auto& s : relation_labels_) eat_str(s);
    for (const Triplet& t : triplets_) {
        eat(&t.head, sizeof t.head);
        eat(&t.rel, sizeof t.rel);
        eat(&t.tail, sizeof t.tail);
    }
    eat(&augmented_, sizeof augmented_);
    return h;
}

namespace {

struct RawLine {
    std::string head, rel, tail;
};

// Splits one line into exactly three TAB-separated, non-empty fields.
bool split_line(const std::string& line, RawLine& out) {
    size_t t1 = line.find('\t');
    if (t1 == std::string::npos) return false;
    size_t t2 = line.find('\t', t1 + 1);
    if (t2 == std::string::npos) return false;
    if (line.find('\t', t2 + 1) != std::string::npos) return false;
    out.head = line.substr(0, t1);
    out.rel = line.substr(t1 + 1, t2 - t1 - 1);
    out.tail = line.substr(t2 + 1);
    return !out.head.empty() && !out.rel.empty() && !out.tail.empty();
}

template <typename Fn>
void for_each_triplet_line(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open triplet file: " + path.string());
    std::string line;
    size_t line_no = 0;
    size_t parsed = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        RawLine raw;
        if (!split_line(line, raw))
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": expected head<TAB>relation<TAB>tail");
        fn(raw);
        ++parsed;
    }
    if (parsed == 0) throw ParseError("empty triplet file: " + path.string());
}

}  // namespace

KnowledgeGraph parse_triplets(const std::filesystem::path& path) {
    std::vector<std::string> ents, rels;
    std::unordered_map<std::string, int32_t> ent_ids, rel_ids;
    std::vector<Triplet> triplets;
    auto intern = [](const std::string& label, std::vector<std::string>& labels,
                     std::unordered_map<std::string, int32_t>& ids) {
        auto [it, inserted] = ids.emplace(label, int32_t(labels.size()));
        if (inserted) labels.push_back(label);
        return it->second;
    };
    for_each_triplet_line(path, [&](const RawLine& raw) {
        Triplet t;
        t.head = intern(raw.head, ents, ent_ids);
        t.rel = intern(raw.rel, rels, rel_ids);
        t.tail = intern(raw.tail, ents, ent_ids);
        triplets.push_back(t);
    });
    return KnowledgeGraph::from_labeled(std::move(ents), std::move(rels), std::move(triplets));
}

std::vector<Triplet> parse_targets(const std::filesystem::path& path,
                                   const KnowledgeGraph& vocab) {
    std::vector<Triplet> out;
    for_each_triplet_line(path, [&](const RawLine& raw) {
        Triplet t;
        t.head = vocab.entity_id(raw.head);
        t.rel = vocab.relation_id(raw.rel);
        t.tail = vocab.entity_id(raw.tail);
        if (t.head < 0 || t.tail < 0)
            throw GraphError(path.string() + ": entity not present in the fact graph: " +
                             (t.head < 0 ? raw.head : raw.tail));
        if (t.rel < 0)
            throw GraphError(path.string() + ": relation not present in the fact graph: " +
                             raw.rel);
        out.push_back(t);
    });
    return out;
}

void write_triplets(const KnowledgeGraph& g, const std::filesystem::path& path) {
    if (g.augmented()) throw GraphError("write_triplets: refusing to write reverse triplets");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write triplet file: " + path.string());
    for (const Triplet& t : g.triplets())
        out << g.entity_label(t.head) << '\t' << g.relation_label(t.rel) << '\t'
            << g.entity_label(t.tail) << '\n';
}

}  // namespace ingram
