#pragma once

#include "relgat/kg.hpp"
#include "relgat/numerics.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <random>
#include <string>
#include <tuple>
#include <vector>

namespace testutil {

using relgat::KnowledgeGraph;
using relgat::Triple;
using relgat::Vocabulary;

using NamedTriple = std::tuple<std::string, std::string, std::string>;

// Graph from named triples; vocabularies follow first occurrence.
inline KnowledgeGraph make_graph(std::initializer_list<NamedTriple> train, std::initializer_list<NamedTriple> valid = {},
                                 std::initializer_list<NamedTriple> test = {},
                                 std::initializer_list<std::string> extra_entities = {}) {
    Vocabulary ents, rels;
    auto convert = [&](std::initializer_list<NamedTriple> src) {
        std::vector<Triple> out;
        for (const auto& [h, r, t] : src) {
            const auto hi = ents.add(h);
            const auto ri = rels.add(r);
            out.push_back({hi, ri, ents.add(t)});
        }
        return out;
    };
    auto tr = convert(train);
    auto va = convert(valid);
    auto te = convert(test);
    for (const auto& e : extra_entities) ents.add(e);
    return KnowledgeGraph(std::move(ents), std::move(rels), std::move(tr), std::move(va), std::move(te));
}

// Random multigraph with n entities and r relations; every entity appears.
inline KnowledgeGraph random_graph(std::mt19937_64& rng, int n, int r, int n_train, int n_valid = 0, int n_test = 0) {
    Vocabulary ents, rels;
    for (int i = 0; i < n; ++i) ents.add("e" + std::to_string(i));
    for (int i = 0; i < r; ++i) rels.add("r" + std::to_string(i));
    std::uniform_int_distribution<int> pe(0, n - 1), pr(0, r - 1);
    std::vector<Triple> all;
    std::vector<std::uint64_t> seen;
    auto fresh = [&] {
        for (;;) {
            Triple t{pe(rng), pr(rng), pe(rng)};
            const auto key = (static_cast<std::uint64_t>(t.head) * 1000 + t.relation) * 1000 + t.tail;
            if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
            seen.push_back(key);
            return t;
        }
    };
    std::vector<Triple> tr, va, te;
    for (int i = 0; i < n_train; ++i) tr.push_back(fresh());
    for (int i = 0; i < n_valid; ++i) va.push_back(fresh());
    for (int i = 0; i < n_test; ++i) te.push_back(fresh());
    return KnowledgeGraph(std::move(ents), std::move(rels), std::move(tr), std::move(va), std::move(te));
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        static int counter = 0;
        std::random_device rd;
        path = std::filesystem::temp_directory_path() /
               ("relgat_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline relgat::Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
    return relgat::uniform_matrix(r, c, -scale, scale, rng);
}

} // namespace testutil
