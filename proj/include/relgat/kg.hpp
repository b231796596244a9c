#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace relgat {

using EntityId = std::int32_t;
using RelationId = std::int32_t;

struct Triple {
    EntityId head = 0;
    RelationId relation = 0;
    EntityId tail = 0;

    friend bool operator==(const Triple&, const Triple&) = default;
    friend auto operator<=>(const Triple&, const Triple&) = default;
};

// Name <-> dense id map. Ids are assigned in insertion order.
class Vocabulary {
public:
    std::int32_t add(std::string_view name);
    std::int32_t insert_with_id(std::string_view name, std::int32_t id);
    std::int32_t id(std::string_view name) const;  // -1 when absent
    const std::string& name(std::int32_t id) const { return names_.at(static_cast<std::size_t>(id)); }
    std::size_t size() const noexcept { return names_.size(); }
    const std::vector<std::string>& names() const noexcept { return names_; }

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.names_ == b.names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::int32_t> index_;
};

struct Neighbor {
    EntityId source;
    RelationId relation;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
    friend auto operator<=>(const Neighbor&, const Neighbor&) = default;
};

// Immutable after construction. The in-neighborhood index holds training
// edges only, sorted by (source, relation) per target.
class KnowledgeGraph {
public:
    KnowledgeGraph(Vocabulary entities, Vocabulary relations, std::vector<Triple> train,
                   std::vector<Triple> valid, std::vector<Triple> test);

    const Vocabulary& entities() const noexcept { return entities_; }
    const Vocabulary& relations() const noexcept { return relations_; }
    std::size_t num_entities() const noexcept { return entities_.size(); }
    // Original relations only; the self-loop id is num_relations().
    std::size_t num_relations() const noexcept { return relations_.size(); }
    RelationId self_relation() const noexcept { return static_cast<RelationId>(relations_.size()); }
    // Rows of the relation embedding matrix: originals plus the self-loop.
    std::size_t num_relation_rows() const noexcept { return relations_.size() + 1; }

    const std::vector<Triple>& train() const noexcept { return train_; }
    const std::vector<Triple>& valid() const noexcept { return valid_; }
    const std::vector<Triple>& test() const noexcept { return test_; }

    std::span<const Neighbor> in_neighbors(EntityId e) const;
    bool is_known(const Triple& t) const { return known_.contains(key(t)); }

    std::uint64_t key(const Triple& t) const noexcept {
        return (static_cast<std::uint64_t>(t.head) * num_relation_rows() + static_cast<std::uint64_t>(t.relation)) *
                   num_entities() +
               static_cast<std::uint64_t>(t.tail);
    }

private:
    Vocabulary entities_;
    Vocabulary relations_;
    std::vector<Triple> train_, valid_, test_;
    std::vector<std::size_t> in_offsets_;
    std::vector<Neighbor> in_list_;
    std::unordered_set<std::uint64_t> known_;
};

struct GraphStats {
    std::size_t n_entities = 0;
    std::size_t n_relations = 0;
    std::size_t n_train = 0;
    std::size_t n_valid = 0;
    std::size_t n_test = 0;
    std::size_t n_total = 0;
    double mean_in_degree = 0.0;
    double median_in_degree = 0.0;
};

KnowledgeGraph load_dataset(const std::filesystem::path& dir);
void write_dataset(const KnowledgeGraph& kg, const std::filesystem::path& dir);
GraphStats compute_stats(const KnowledgeGraph& kg);

// Sorted by (neighbor, relation). Self-loops are not part of this view.
std::vector<Neighbor> in_neighborhood(const KnowledgeGraph& kg, EntityId e);

double median(std::vector<double> values);

} // namespace relgat
