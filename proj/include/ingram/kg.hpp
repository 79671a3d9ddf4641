#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ingram {

struct Triplet {
    int32_t head = 0;
    int32_t rel = 0;
    int32_t tail = 0;
    auto operator<=>(const Triplet&) const = default;
};

struct TripletHash {
    size_t operator()(const Triplet& t) const {
        uint64_t x = (uint64_t(uint32_t(t.head)) << 42) ^ (uint64_t(uint32_t(t.rel)) << 21) ^
                     uint64_t(uint32_t(t.tail));
        x ^= x >> 33;
        x *= 0xff51afd7ed558ccdULL;
        x ^= x >> 33;
        return size_t(x);
    }
};

// Indexed triplet store. Entity/relation ids are dense and assigned in
// first-appearance order. Reverse augmentation doubles the relation space:
// relation k gets its inverse at id k + num_original_relations().
// Immutable after construction; augmenting returns a new graph.
class KnowledgeGraph {
public:
    KnowledgeGraph() = default;

    static KnowledgeGraph from_labeled(std::vector<std::string> entity_labels,
                                       std::vector<std::string> relation_labels,
                                       std::vector<Triplet> triplets);

    int num_entities() const { return int(entity_labels_.size()); }
    // Relation count in the current (augmented or not) id space.
    int num_relations() const { return augmented_ ? 2 * m_orig_ : m_orig_; }
    int num_original_relations() const { return m_orig_; }
    bool augmented() const { return augmented_; }

    const std::vector<Triplet>& triplets() const { return triplets_; }

    // Incoming edges (source entity, relation) of an entity; one entry per
    // stored triplet with this entity as tail.
    const std::vector<std::pair<int32_t, int32_t>>& in_neighbors(int entity) const {
        return in_neighbors_[size_t(entity)];
    }

    // R_ji: distinct relations labeling edges j -> i, ascending.
    std::vector<int32_t> relations_between(int j, int i) const;

    const std::string& entity_label(int id) const { return entity_labels_[size_t(id)]; }
    // Labels of reverse relations carry a "^-1" suffix.
    std::string relation_label(int id) const;

    int entity_id(const std::string& label) const;    // -1 when absent
    int relation_id(const std::string& label) const;  // original relations only

    bool contains(const Triplet& t) const { return triplet_set_.count(t) > 0; }

    // Same vocabulary, different (un-augmented) edge set.
    KnowledgeGraph with_triplets(std::vector<Triplet> triplets) const;

    // Adds (tail, rel + m_orig, head) for every stored triplet.
    // Throws GraphError when called on an already augmented graph.
    KnowledgeGraph augment_reverse() const;

    // FNV-1a over labels and triplets; identifies the graph in provenance
    // records and default inference seeds.
    uint64_t fingerprint() const;

private:
    void rebuild_indexes();

    std::vector<std::string> entity_labels_;
    std::vector<std::string> relation_labels_;  // original relations only
    std::unordered_map<std::string, int32_t> entity_ids_;
    std::unordered_map<std::string, int32_t> relation_ids_;
    std::vector<Triplet> triplets_;
    std::unordered_map<Triplet, char, TripletHash> triplet_set_;
    std::vector<std::vector<std::pair<int32_t, int32_t>>> in_neighbors_;
    int m_orig_ = 0;
    bool augmented_ = false;
};

// Fact/target split container. Both sides hold un-augmented triplets in the
// parent graph's id space; reverse augmentation happens after splitting.
struct SplitState {
    std::vector<Triplet> facts;
    std::vector<Triplet> targets;
};

// Reads a UTF-8 file with one head<TAB>relation<TAB>tail triplet per line.
// Duplicate lines are deduplicated. Throws ParseError on malformed lines
// (with the line number) and on empty files.
KnowledgeGraph parse_triplets(const std::filesystem::path& path);

// Parses a triplet file against an existing graph's vocabulary. Every label
// must already be known: target triplets may only mention entities and
// relations present in the fact graph. Throws GraphError otherwise.
std::vector<Triplet> parse_targets(const std::filesystem::path& path, const KnowledgeGraph& vocab);

// Writes triplets (un-augmented) back as a TSV triplet file.
void write_triplets(const KnowledgeGraph& g, const std::filesystem::path& path);

}  // namespace ingram
