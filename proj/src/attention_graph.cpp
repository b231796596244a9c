#include "relgat/attention_graph.hpp"

#include "relgat/error.hpp"

#include <algorithm>
#include <limits>

namespace relgat {

AttentionGraph build_attention_graph(const KnowledgeGraph& kg, std::span<const AuxPath> aux,
                                     const NeighborhoodOptions& opts) {
    AttentionGraph g;
    g.num_entities = kg.num_entities();
    g.num_relation_rows = kg.num_relation_rows();

    std::vector<std::vector<std::uint32_t>> aux_by_target(g.num_entities);
    if (opts.include_aux)
        for (std::size_t p = 0; p < aux.size(); ++p)
            aux_by_target[static_cast<std::size_t>(aux[p].target)].push_back(static_cast<std::uint32_t>(p));

    auto push = [&](EntityId target, EntityId source, std::span<const RelationId> rels, std::uint32_t hops) {
        if (g.relations.size() + rels.size() > std::numeric_limits<std::uint32_t>::max())
            input_error("attention graph too large");
        g.edges.push_back({target, source, static_cast<std::uint32_t>(g.relations.size()),
                           static_cast<std::uint32_t>(rels.size()), hops});
        g.relations.insert(g.relations.end(), rels.begin(), rels.end());
    };

    g.target_offsets.assign(g.num_entities + 1, 0);
    const RelationId self = kg.self_relation();
    for (std::size_t i = 0; i < g.num_entities; ++i) {
        const auto target = static_cast<EntityId>(i);
        if (opts.self_loops) push(target, target, std::span<const RelationId>(&self, 1), 0);
        for (const auto& nb : kg.in_neighbors(target))
            push(target, nb.source, std::span<const RelationId>(&nb.relation, 1), 1);
        for (const auto p : aux_by_target[i])
            push(target, aux[p].source, aux[p].relation_seq, static_cast<std::uint32_t>(aux[p].relation_seq.size()));
        g.target_offsets[i + 1] = g.edges.size();
    }
    if (g.edges.size() > std::numeric_limits<std::uint32_t>::max()) input_error("attention graph too large");

    g.source_offsets.assign(g.num_entities + 1, 0);
    for (const auto& e : g.edges) ++g.source_offsets[static_cast<std::size_t>(e.source) + 1];
    for (std::size_t i = 0; i < g.num_entities; ++i) g.source_offsets[i + 1] += g.source_offsets[i];
    g.by_source.resize(g.edges.size());
    {
        auto cursor = g.source_offsets;
        for (std::size_t e = 0; e < g.edges.size(); ++e)
            g.by_source[cursor[static_cast<std::size_t>(g.edges[e].source)]++] = static_cast<std::uint32_t>(e);
    }

    g.relation_offsets.assign(g.num_relation_rows + 1, 0);
    for (const auto r : g.relations) ++g.relation_offsets[static_cast<std::size_t>(r) + 1];
    for (std::size_t r = 0; r < g.num_relation_rows; ++r) g.relation_offsets[r + 1] += g.relation_offsets[r];
    g.by_relation.resize(g.relations.size());
    {
        auto cursor = g.relation_offsets;
        for (std::size_t e = 0; e < g.edges.size(); ++e)
            for (const auto r : g.edge_relations(g.edges[e]))
                g.by_relation[cursor[static_cast<std::size_t>(r)]++] = static_cast<std::uint32_t>(e);
    }

    for (std::size_t i = 0; i < g.num_entities; ++i)
        if (g.target_offsets[i + 1] == g.target_offsets[i])
            input_error("entity " + kg.entities().name(static_cast<EntityId>(i)) +
                        " has an empty attention neighborhood; enable self-loops");
    return g;
}

} // namespace relgat
