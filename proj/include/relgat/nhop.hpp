#pragma once

#include "relgat/kg.hpp"
#include "relgat/numerics.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace relgat {

// Directed path source -> ... -> target over training edges, summarized by
// its relation sequence. The auxiliary edge flows into `target`.
struct AuxPath {
    EntityId source = 0;
    EntityId target = 0;
    std::vector<RelationId> relation_seq;

    std::size_t hop_count() const noexcept { return relation_seq.size(); }

    friend bool operator==(const AuxPath&, const AuxPath&) = default;
    friend auto operator<=>(const AuxPath& a, const AuxPath& b) {
        if (auto c = a.target <=> b.target; c != 0) return c;
        if (auto c = a.source <=> b.source; c != 0) return c;
        return a.relation_seq <=> b.relation_seq;
    }
};

struct AuxConfig {
    int max_hops = 2;
    // 0 disables the cap.
    std::size_t per_node_cap = 1000;
    bool dedup = true;

    void validate() const;
};

// Simple paths (no repeated node) of 2..max_hops edges, sorted by
// (target, source, relation_seq). The cap keeps the first paths per target in
// that order.
std::vector<AuxPath> enumerate_nhop_paths(const KnowledgeGraph& kg, const AuxConfig& cfg);

// Sum of the live relation rows along the path.
std::vector<double> aux_relation_embedding(const AuxPath& path, const Matrix& relations);

void write_aux_cache(const std::filesystem::path& file, const KnowledgeGraph& kg, std::span<const AuxPath> paths);
std::vector<AuxPath> read_aux_cache(const std::filesystem::path& file, const KnowledgeGraph& kg);

} // namespace relgat
