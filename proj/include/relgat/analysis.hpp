#pragma once

#include "relgat/attention_graph.hpp"
#include "relgat/config.hpp"
#include "relgat/encoder.hpp"
#include "relgat/kg.hpp"
#include "relgat/nhop.hpp"

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace relgat {

struct PagerankResult {
    std::vector<double> scores;
    int iterations = 0;
    double residual = 0.0;  // final L1 change

    double mean() const;
};

enum class KernelVariant { serial, parallel };

// Damped PageRank over the training graph with relation labels dropped and
// parallel edges collapsed. Teleport and dangling mass are uniform. Throws a
// convergence error when pr_max_iters is reached.
PagerankResult pagerank(const KnowledgeGraph& kg, const AnalysisConfig& cfg,
                        KernelVariant variant = KernelVariant::parallel);
PagerankResult pagerank(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> edges,
                        const AnalysisConfig& cfg, KernelVariant variant = KernelVariant::parallel);

struct AttentionSnapshot {
    int epoch = 0;
    std::vector<AttentionTrace> traces;
};

// only_target >= 0 keeps just that entity's incoming edges.
AttentionSnapshot capture_attention(const EncoderParams& params, const AttentionGraph& graph, const EncoderConfig& cfg,
                                    int epoch, EntityId only_target = -1);

struct AttentionRow {
    int epoch;
    EntityId target;
    EntityId source;
    std::vector<RelationId> relations;
    std::size_t hop_count;
    double alpha;  // averaged over heads
};

// Rows for one target entity and layer (-1: last layer) across snapshots.
std::vector<AttentionRow> attention_rows(std::span<const AttentionSnapshot> snapshots, EntityId entity,
                                         int layer = -1);
// CSV with header epoch,target_entity,source_entity,relation,hop_count,alpha.
// Auxiliary relation sequences are joined with '+'.
void export_attention(std::span<const AttentionSnapshot> snapshots, EntityId entity, const KnowledgeGraph& kg,
                      const std::filesystem::path& file, int layer = -1);

enum class AblationMode { full, minus_pg, minus_relations };

AblationMode parse_ablation(const std::string& name);
std::string to_string(AblationMode m);

struct AblationResult {
    AblationMode mode = AblationMode::full;
    std::vector<std::pair<int, double>> curve;  // (epoch, test MR)

    double final_mr() const { return curve.empty() ? 0.0 : curve.back().second; }
};

// Trains the encoder in the given mode from `init` and records test MR under
// the translational scorer every analysis.ablation_every epochs and at the
// end. minus_pg drops auxiliary edges; minus_relations removes G from both
// the attention input and the distance.
AblationResult run_ablation(const KnowledgeGraph& kg, std::span<const AuxPath> aux, const EmbeddingState& init,
                            AblationMode mode, const RunConfig& cfg,
                            const std::function<void(int epoch, double mr)>& log = {});

void write_ablation_csv(const std::filesystem::path& file, std::span<const AblationResult> results);

} // namespace relgat
