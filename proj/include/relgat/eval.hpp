#pragma once

#include "relgat/decoder.hpp"
#include "relgat/kg.hpp"
#include "relgat/numerics.hpp"

#include <array>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace relgat {

enum class Side { head, tail };

const char* to_string(Side s);

// Triple scorer where lower is better. Implementations must be pure for a
// fixed model snapshot.
class Scorer {
public:
    virtual ~Scorer() = default;
    virtual double score(const Triple& t) const = 0;
    // Scores `t` with its `side` entity replaced by every entity id in turn.
    virtual void score_all(const Triple& t, Side side, std::span<double> out) const;
};

// Translational distance ||h + g - t||_1 over an embedding snapshot.
class TranslationalScorer final : public Scorer {
public:
    TranslationalScorer(const Matrix& entity, const Matrix& relation, bool use_relations = true)
        : entity_(entity), relation_(relation), use_relations_(use_relations) {}
    double score(const Triple& t) const override;

private:
    const Matrix& entity_;
    const Matrix& relation_;
    bool use_relations_;
};

// ConvKB score f; lower is more plausible, so it ranks ascending like the
// translational distance.
class ConvKBScorer final : public Scorer {
public:
    ConvKBScorer(const Matrix& entity, const Matrix& relation, const DecoderParams& params);
    double score(const Triple& t) const override;

private:
    const Matrix& entity_;
    const Matrix& relation_;
    const DecoderParams& params_;
};

struct RankingMetrics {
    double mr = 0.0;
    double mrr = 0.0;
    std::map<int, double> hits_at{{1, 0.0}, {3, 0.0}, {10, 0.0}};
    std::size_t n_queries = 0;

    std::string to_json() const;
    std::string to_table() const;
};

struct RankOptions {
    bool filtered = true;
};

// 1 + number of surviving corruptions scoring below or equal to the true
// triple (ties rank the true triple last). Corruptions present in any split
// are removed when filtered.
std::size_t filtered_rank(const Triple& triple, Side side, const Scorer& scorer, const KnowledgeGraph& kg,
                          const RankOptions& opts = {});

// Same rank from a precomputed score vector over all replacement entities.
std::size_t rank_from_scores(const Triple& triple, Side side, std::span<const double> scores,
                             const KnowledgeGraph& kg, const RankOptions& opts = {});

struct QueryRank {
    Triple triple;
    Side side;
    std::size_t rank;
};

struct Evaluation {
    RankingMetrics metrics;
    std::vector<QueryRank> ranks;  // split order, head then tail per triple
};

RankingMetrics metrics_from_ranks(std::span<const std::size_t> ranks);

Evaluation evaluate(std::span<const Triple> split, const Scorer& scorer, const KnowledgeGraph& kg,
                    const RankOptions& opts = {});

void write_per_triple_csv(std::ostream& out, const Evaluation& ev, const KnowledgeGraph& kg);

} // namespace relgat
