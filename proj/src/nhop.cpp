#include "relgat/nhop.hpp"

#include "relgat/error.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace relgat {

void AuxConfig::validate() const {
    if (max_hops < 2) input_error("aux.max_hops must be >= 2");
    if (max_hops > 5) input_error("aux.max_hops above 5 is not supported");
}

namespace {

struct OutEdge {
    EntityId tail;
    RelationId relation;
    friend auto operator<=>(const OutEdge&, const OutEdge&) = default;
};

void extend(const std::vector<std::vector<OutEdge>>& out, EntityId source, EntityId node, int max_hops,
            std::vector<EntityId>& nodes, std::vector<RelationId>& rels, std::vector<AuxPath>& sink) {
    for (const auto& e : out[static_cast<std::size_t>(node)]) {
        if (std::find(nodes.begin(), nodes.end(), e.tail) != nodes.end()) continue;
        nodes.push_back(e.tail);
        rels.push_back(e.relation);
        if (rels.size() >= 2) sink.push_back({source, e.tail, rels});
        if (static_cast<int>(rels.size()) < max_hops) extend(out, source, e.tail, max_hops, nodes, rels, sink);
        nodes.pop_back();
        rels.pop_back();
    }
}

} // namespace

std::vector<AuxPath> enumerate_nhop_paths(const KnowledgeGraph& kg, const AuxConfig& cfg) {
    cfg.validate();
    const auto n = kg.num_entities();
    std::vector<std::vector<OutEdge>> out(n);
    for (const auto& t : kg.train()) out[static_cast<std::size_t>(t.head)].push_back({t.tail, t.relation});
    for (auto& list : out) std::sort(list.begin(), list.end());

    std::vector<std::vector<AuxPath>> per_source(n);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t s = 0; s < n; ++s) {
        std::vector<EntityId> nodes{static_cast<EntityId>(s)};
        std::vector<RelationId> rels;
        extend(out, static_cast<EntityId>(s), static_cast<EntityId>(s), cfg.max_hops, nodes, rels, per_source[s]);
    }

    std::vector<AuxPath> paths;
    for (auto& list : per_source) {
        std::move(list.begin(), list.end(), std::back_inserter(paths));
        std::vector<AuxPath>().swap(list);
    }
    std::sort(paths.begin(), paths.end());
    if (cfg.dedup) paths.erase(std::unique(paths.begin(), paths.end()), paths.end());

    if (cfg.per_node_cap > 0) {
        std::vector<AuxPath> capped;
        capped.reserve(paths.size());
        std::size_t run = 0;
        for (std::size_t i = 0; i < paths.size(); ++i) {
            run = (i > 0 && paths[i].target == paths[i - 1].target) ? run + 1 : 0;
            if (run < cfg.per_node_cap) capped.push_back(std::move(paths[i]));
        }
        paths = std::move(capped);
    }
    return paths;
}

std::vector<double> aux_relation_embedding(const AuxPath& path, const Matrix& relations) {
    std::vector<double> sum(relations.cols(), 0.0);
    for (const auto r : path.relation_seq) {
        if (r < 0 || static_cast<std::size_t>(r) >= relations.rows())
            input_error("aux path relation id " + std::to_string(r) + " out of range");
        const auto row = relations.row(static_cast<std::size_t>(r));
        for (std::size_t c = 0; c < sum.size(); ++c) sum[c] += row[c];
    }
    return sum;
}

void write_aux_cache(const std::filesystem::path& file, const KnowledgeGraph& kg, std::span<const AuxPath> paths) {
    std::ofstream out(file);
    if (!out) input_error("cannot write " + file.string());
    for (const auto& p : paths) {
        out << kg.entities().name(p.source) << '\t' << kg.entities().name(p.target) << '\t';
        for (std::size_t i = 0; i < p.relation_seq.size(); ++i)
            out << (i ? "," : "") << kg.relations().name(p.relation_seq[i]);
        out << '\n';
    }
}

std::vector<AuxPath> read_aux_cache(const std::filesystem::path& file, const KnowledgeGraph& kg) {
    std::ifstream in(file);
    if (!in) input_error("cannot read " + file.string());
    std::vector<AuxPath> paths;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string src, dst, seq;
        if (!std::getline(fields, src, '\t') || !std::getline(fields, dst, '\t') || !std::getline(fields, seq))
            input_error("malformed aux cache line " + std::to_string(lineno));
        AuxPath p;
        p.source = kg.entities().id(src);
        p.target = kg.entities().id(dst);
        if (p.source < 0 || p.target < 0) input_error("unknown entity in aux cache line " + std::to_string(lineno));
        std::istringstream rels(seq);
        std::string name;
        while (std::getline(rels, name, ',')) {
            const auto r = kg.relations().id(name);
            if (r < 0) input_error("unknown relation '" + name + "' in aux cache line " + std::to_string(lineno));
            p.relation_seq.push_back(r);
        }
        if (p.relation_seq.size() < 2) input_error("aux path shorter than 2 hops at line " + std::to_string(lineno));
        paths.push_back(std::move(p));
    }
    return paths;
}

} // namespace relgat
