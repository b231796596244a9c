#include "relgat/eval.hpp"

#include "relgat/error.hpp"
#include "relgat/kernels.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace relgat {

const char* to_string(Side s) { return s == Side::head ? "head" : "tail"; }

void Scorer::score_all(const Triple& t, Side side, std::span<double> out) const {
    Triple c = t;
    for (std::size_t e = 0; e < out.size(); ++e) {
        (side == Side::head ? c.head : c.tail) = static_cast<EntityId>(e);
        out[e] = score(c);
    }
}

double TranslationalScorer::score(const Triple& t) const {
    const auto h = entity_.row(static_cast<std::size_t>(t.head));
    const auto tl = entity_.row(static_cast<std::size_t>(t.tail));
    if (!use_relations_) return l1_distance(h, tl);
    const auto g = relation_.row(static_cast<std::size_t>(t.relation));
    double s = 0.0;
    for (std::size_t d = 0; d < h.size(); ++d) s += std::abs(h[d] + g[d] - tl[d]);
    return s;
}

ConvKBScorer::ConvKBScorer(const Matrix& entity, const Matrix& relation, const DecoderParams& params)
    : entity_(entity), relation_(relation), params_(params) {
    if (entity.cols() != params.dim() || relation.cols() != params.dim())
        input_error("ConvKBScorer: embedding width does not match the decoder");
}

double ConvKBScorer::score(const Triple& t) const {
    const kernels::ConvKBView view{&entity_, &relation_, &params_.filters, params_.weights.flat()};
    return kernels::convkb_score_one(view, entity_.row(static_cast<std::size_t>(t.head)),
                                     relation_.row(static_cast<std::size_t>(t.relation)),
                                     entity_.row(static_cast<std::size_t>(t.tail)));
}

std::size_t rank_from_scores(const Triple& triple, Side side, std::span<const double> scores,
                             const KnowledgeGraph& kg, const RankOptions& opts) {
    if (scores.size() != kg.num_entities()) input_error("rank_from_scores: one score per entity required");
    const EntityId truth = side == Side::head ? triple.head : triple.tail;
    const double target = scores[static_cast<std::size_t>(truth)];
    std::size_t rank = 1;
    Triple c = triple;
    for (std::size_t e = 0; e < scores.size(); ++e) {
        if (static_cast<EntityId>(e) == truth) continue;
        if (!(scores[e] <= target)) continue;
        if (opts.filtered) {
            (side == Side::head ? c.head : c.tail) = static_cast<EntityId>(e);
            if (kg.is_known(c)) continue;
        }
        ++rank;
    }
    return rank;
}

std::size_t filtered_rank(const Triple& triple, Side side, const Scorer& scorer, const KnowledgeGraph& kg,
                          const RankOptions& opts) {
    const auto n = static_cast<EntityId>(kg.num_entities());
    if (triple.head < 0 || triple.head >= n || triple.tail < 0 || triple.tail >= n || triple.relation < 0 ||
        static_cast<std::size_t>(triple.relation) >= kg.num_relation_rows())
        input_error("filtered_rank: unknown ids in query triple");
    std::vector<double> scores(kg.num_entities());
    scorer.score_all(triple, side, scores);
    for (double s : scores)
        if (std::isnan(s)) numeric_error("filtered_rank: NaN score");
    return rank_from_scores(triple, side, scores, kg, opts);
}

RankingMetrics metrics_from_ranks(std::span<const std::size_t> ranks) {
    if (ranks.empty()) input_error("no queries to average");
    RankingMetrics m;
    for (const auto r : ranks) {
        m.mr += static_cast<double>(r);
        m.mrr += 1.0 / static_cast<double>(r);
        for (auto& [n, v] : m.hits_at)
            if (r <= static_cast<std::size_t>(n)) v += 1.0;
    }
    const double q = static_cast<double>(ranks.size());
    m.mr /= q;
    m.mrr /= q;
    for (auto& [n, v] : m.hits_at) v /= q;
    m.n_queries = ranks.size();
    return m;
}

Evaluation evaluate(std::span<const Triple> split, const Scorer& scorer, const KnowledgeGraph& kg,
                    const RankOptions& opts) {
    if (split.empty()) input_error("evaluate: empty split");
    Evaluation ev;
    ev.ranks.resize(2 * split.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t q = 0; q < static_cast<std::ptrdiff_t>(ev.ranks.size()); ++q) {
        const auto& t = split[static_cast<std::size_t>(q) / 2];
        const Side side = q % 2 == 0 ? Side::head : Side::tail;
        ev.ranks[static_cast<std::size_t>(q)] = {t, side, filtered_rank(t, side, scorer, kg, opts)};
    }
    std::vector<std::size_t> ranks;
    ranks.reserve(ev.ranks.size());
    for (const auto& r : ev.ranks) ranks.push_back(r.rank);
    ev.metrics = metrics_from_ranks(ranks);
    return ev;
}

std::string RankingMetrics::to_json() const {
    std::ostringstream os;
    os << std::setprecision(10) << "{\"mr\": " << mr << ", \"mrr\": " << mrr;
    for (const auto& [n, v] : hits_at) os << ", \"hits@" << n << "\": " << v;
    os << ", \"n_queries\": " << n_queries << "}";
    return os.str();
}

std::string RankingMetrics::to_table() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << "metric     value\n";
    os << "MR         " << mr << "\n";
    os << "MRR        " << mrr << "\n";
    for (const auto& [n, v] : hits_at) os << "Hits@" << std::left << std::setw(5) << n << v << "\n";
    os << "queries    " << n_queries << "\n";
    return os.str();
}

void write_per_triple_csv(std::ostream& out, const Evaluation& ev, const KnowledgeGraph& kg) {
    out << "head,relation,tail,side,rank\n";
    for (const auto& q : ev.ranks)
        out << kg.entities().name(q.triple.head) << ',' << kg.relations().name(q.triple.relation) << ','
            << kg.entities().name(q.triple.tail) << ',' << to_string(q.side) << ',' << q.rank << '\n';
}

} // namespace relgat
