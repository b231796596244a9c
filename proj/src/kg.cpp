#include "relgat/kg.hpp"

#include "relgat/error.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <limits>

namespace relgat {

std::int32_t Vocabulary::add(std::string_view name) {
    if (auto it = index_.find(std::string(name)); it != index_.end()) return it->second;
    if (names_.size() >= static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max()))
        input_error("id overflow: vocabulary exceeds int32 range");
    const auto id = static_cast<std::int32_t>(names_.size());
    names_.emplace_back(name);
    index_.emplace(std::string(name), id);
    return id;
}

std::int32_t Vocabulary::insert_with_id(std::string_view name, std::int32_t id) {
    if (id < 0) input_error("negative id for '" + std::string(name) + "'");
    if (index_.contains(std::string(name))) input_error("duplicate name '" + std::string(name) + "'");
    const auto slot = static_cast<std::size_t>(id);
    if (slot >= names_.size()) names_.resize(slot + 1);
    if (!names_[slot].empty()) input_error("duplicate id " + std::to_string(id));
    names_[slot] = std::string(name);
    index_.emplace(std::string(name), id);
    return id;
}

std::int32_t Vocabulary::id(std::string_view name) const {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? -1 : it->second;
}

KnowledgeGraph::KnowledgeGraph(Vocabulary entities, Vocabulary relations, std::vector<Triple> train,
                               std::vector<Triple> valid, std::vector<Triple> test)
    : entities_(std::move(entities)), relations_(std::move(relations)), train_(std::move(train)),
      valid_(std::move(valid)), test_(std::move(test)) {
    const auto ne = static_cast<EntityId>(entities_.size());
    const auto nr = static_cast<RelationId>(relations_.size());
    for (const auto* split : {&train_, &valid_, &test_}) {
        for (const auto& t : *split) {
            if (t.head < 0 || t.head >= ne || t.tail < 0 || t.tail >= ne || t.relation < 0 || t.relation >= nr)
                input_error("triple references an id outside the vocabulary");
            known_.insert(key(t));
        }
    }

    std::vector<std::size_t> counts(entities_.size(), 0);
    for (const auto& t : train_) ++counts[static_cast<std::size_t>(t.tail)];
    in_offsets_.assign(entities_.size() + 1, 0);
    for (std::size_t e = 0; e < counts.size(); ++e) in_offsets_[e + 1] = in_offsets_[e] + counts[e];
    in_list_.resize(train_.size());
    auto cursor = in_offsets_;
    for (const auto& t : train_) in_list_[cursor[static_cast<std::size_t>(t.tail)]++] = {t.head, t.relation};
    for (std::size_t e = 0; e < entities_.size(); ++e)
        std::sort(in_list_.begin() + static_cast<std::ptrdiff_t>(in_offsets_[e]),
                  in_list_.begin() + static_cast<std::ptrdiff_t>(in_offsets_[e + 1]));
}

std::span<const Neighbor> KnowledgeGraph::in_neighbors(EntityId e) const {
    if (e < 0 || static_cast<std::size_t>(e) >= entities_.size())
        input_error("unknown entity id " + std::to_string(e));
    const auto u = static_cast<std::size_t>(e);
    return {in_list_.data() + in_offsets_[u], in_offsets_[u + 1] - in_offsets_[u]};
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find('\t', start);
        fields.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return fields;
}

std::string_view strip_cr(std::string_view s) {
    if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
    return s;
}

using RawTriple = std::array<std::string, 3>;

std::vector<RawTriple> read_triples(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) input_error("missing file: " + file.string());
    std::vector<RawTriple> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto view = strip_cr(line);
        if (view.empty()) continue;
        const auto fields = split_tabs(view);
        if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty())
            input_error("malformed line " + std::to_string(lineno) + " in " + file.string() +
                        ": expected head<TAB>relation<TAB>tail");
        out.push_back({std::string(fields[0]), std::string(fields[1]), std::string(fields[2])});
    }
    return out;
}

void read_id_map(const std::filesystem::path& file, Vocabulary& vocab) {
    std::ifstream in(file);
    if (!in) input_error("cannot open " + file.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto view = strip_cr(line);
        if (view.empty()) continue;
        const auto fields = split_tabs(view);
        // Some published id files start with a bare count line.
        if (lineno == 1 && fields.size() == 1) continue;
        if (fields.size() != 2) input_error("malformed line " + std::to_string(lineno) + " in " + file.string());
        long long id = 0;
        const auto* first = fields[1].data();
        const auto* last = first + fields[1].size();
        auto [ptr, ec] = std::from_chars(first, last, id);
        if (ec == std::errc::result_out_of_range || (ec == std::errc() && id > std::numeric_limits<std::int32_t>::max()))
            input_error("id overflow at line " + std::to_string(lineno) + " in " + file.string());
        if (ec != std::errc() || ptr != last)
            input_error("bad id at line " + std::to_string(lineno) + " in " + file.string());
        vocab.insert_with_id(fields[0], static_cast<std::int32_t>(id));
    }
    for (std::size_t i = 0; i < vocab.size(); ++i)
        if (vocab.name(static_cast<std::int32_t>(i)).empty())
            input_error("ids in " + file.string() + " are not dense (gap at " + std::to_string(i) + ")");
}

} // namespace

KnowledgeGraph load_dataset(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) input_error("dataset directory not found: " + dir.string());
    const auto train_raw = read_triples(dir / "train.txt");
    const auto valid_raw = read_triples(dir / "valid.txt");
    const auto test_raw = read_triples(dir / "test.txt");
    if (train_raw.empty()) input_error("no training triples in " + (dir / "train.txt").string());

    Vocabulary entities, relations;
    const bool fixed_entities = std::filesystem::exists(dir / "entity2id.txt");
    const bool fixed_relations = std::filesystem::exists(dir / "relation2id.txt");
    if (fixed_entities) read_id_map(dir / "entity2id.txt", entities);
    if (fixed_relations) read_id_map(dir / "relation2id.txt", relations);

    auto resolve = [](Vocabulary& v, const std::string& name, bool fixed, const char* what) {
        if (!fixed) return v.add(name);
        const auto id = v.id(name);
        if (id < 0) input_error(std::string(what) + " '" + name + "' missing from its id file");
        return id;
    };
    auto convert = [&](const std::vector<RawTriple>& raw) {
        std::vector<Triple> out;
        out.reserve(raw.size());
        for (const auto& r : raw) {
            const auto h = resolve(entities, r[0], fixed_entities, "entity");
            const auto rel = resolve(relations, r[1], fixed_relations, "relation");
            const auto t = resolve(entities, r[2], fixed_entities, "entity");
            out.push_back({h, rel, t});
        }
        return out;
    };
    auto train = convert(train_raw);
    auto valid = convert(valid_raw);
    auto test = convert(test_raw);
    return KnowledgeGraph(std::move(entities), std::move(relations), std::move(train), std::move(valid),
                          std::move(test));
}

void write_dataset(const KnowledgeGraph& kg, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto dump = [&](const std::vector<Triple>& split, const char* name) {
        std::ofstream out(dir / name);
        if (!out) input_error("cannot write " + (dir / name).string());
        for (const auto& t : split)
            out << kg.entities().name(t.head) << '\t' << kg.relations().name(t.relation) << '\t'
                << kg.entities().name(t.tail) << '\n';
    };
    dump(kg.train(), "train.txt");
    dump(kg.valid(), "valid.txt");
    dump(kg.test(), "test.txt");
    // Id files pin the vocabulary order so a reload is exact even when an
    // entity first appears in a later split.
    std::ofstream ents(dir / "entity2id.txt");
    for (std::size_t i = 0; i < kg.num_entities(); ++i) ents << kg.entities().names()[i] << '\t' << i << '\n';
    std::ofstream rels(dir / "relation2id.txt");
    for (std::size_t i = 0; i < kg.num_relations(); ++i) rels << kg.relations().names()[i] << '\t' << i << '\n';
}

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

GraphStats compute_stats(const KnowledgeGraph& kg) {
    GraphStats s;
    s.n_entities = kg.num_entities();
    s.n_relations = kg.num_relations();
    s.n_train = kg.train().size();
    s.n_valid = kg.valid().size();
    s.n_test = kg.test().size();
    s.n_total = s.n_train + s.n_valid + s.n_test;
    std::vector<double> degree(kg.num_entities(), 0.0);
    for (const auto& t : kg.train()) degree[static_cast<std::size_t>(t.tail)] += 1.0;
    s.mean_in_degree = s.n_entities ? static_cast<double>(s.n_train) / static_cast<double>(s.n_entities) : 0.0;
    s.median_in_degree = median(std::move(degree));
    return s;
}

std::vector<Neighbor> in_neighborhood(const KnowledgeGraph& kg, EntityId e) {
    const auto view = kg.in_neighbors(e);
    return {view.begin(), view.end()};
}

} // namespace relgat
