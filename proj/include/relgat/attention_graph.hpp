#pragma once

#include "relgat/kg.hpp"
#include "relgat/nhop.hpp"

#include <span>
#include <vector>

namespace relgat {

// Edges incident to each target entity, grouped contiguously by target. An
// edge carries one relation (direct or self-loop) or a relation sequence
// (auxiliary path). Transposed indexes by source and by relation support
// deterministic gradient scatters.
struct AttentionGraph {
    struct Edge {
        EntityId target;
        EntityId source;
        std::uint32_t rel_begin;
        std::uint32_t rel_count;
        std::uint32_t hop_count;  // 0 for self-loops
    };

    std::size_t num_entities = 0;
    std::size_t num_relation_rows = 0;
    std::vector<Edge> edges;
    std::vector<RelationId> relations;        // flat relation sequences
    std::vector<std::size_t> target_offsets;  // size num_entities + 1

    std::vector<std::size_t> source_offsets;  // size num_entities + 1
    std::vector<std::uint32_t> by_source;     // edge ids
    std::vector<std::size_t> relation_offsets;
    std::vector<std::uint32_t> by_relation;   // edge ids, repeated per occurrence

    std::span<const RelationId> edge_relations(const Edge& e) const {
        return {relations.data() + e.rel_begin, e.rel_count};
    }
    std::size_t group_size(EntityId target) const {
        const auto t = static_cast<std::size_t>(target);
        return target_offsets[t + 1] - target_offsets[t];
    }
};

struct NeighborhoodOptions {
    bool self_loops = true;
    bool include_aux = true;
};

AttentionGraph build_attention_graph(const KnowledgeGraph& kg, std::span<const AuxPath> aux,
                                     const NeighborhoodOptions& opts = {});

} // namespace relgat
