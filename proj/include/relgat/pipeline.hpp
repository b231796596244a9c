#pragma once

#include "relgat/analysis.hpp"
#include "relgat/config.hpp"
#include "relgat/eval.hpp"
#include "relgat/kg.hpp"
#include "relgat/nhop.hpp"
#include "relgat/training.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace relgat {

using Logger = std::function<void(const std::string&)>;

// SHA-1 of "blob <size>\0<content>", as git computes object ids.
std::string git_blob_sha1(const std::filesystem::path& file);

struct RunManifest {
    std::string command;
    std::filesystem::path dataset;
    RunConfig config;
    std::vector<std::pair<std::string, std::string>> input_hashes;  // file name -> blob id
    std::string started_utc;
    std::string finished_utc;
    std::vector<std::pair<std::string, std::string>> outputs;  // role -> path relative to the output dir
    std::optional<RankingMetrics> metrics;

    std::string to_json() const;
};

std::string utc_now();
RunManifest start_manifest(const std::string& command, const std::filesystem::path& dataset, const RunConfig& cfg);
void write_manifest(const std::filesystem::path& out_dir, RunManifest& manifest);
// Dataset path and configuration recorded in a manifest file.
std::pair<std::filesystem::path, RunConfig> read_manifest(const std::filesystem::path& file);

// Stages. Each writes only below out_dir and appends its outputs to the manifest.
std::vector<AuxPath> stage_build_aux(const KnowledgeGraph& kg, const RunConfig& cfg,
                                     const std::filesystem::path& out_dir, RunManifest& manifest, const Logger& log);
EmbeddingState stage_transe(const KnowledgeGraph& kg, const RunConfig& cfg, const std::filesystem::path& out_dir,
                            RunManifest& manifest, const Logger& log);
EmbeddingState load_transe(const std::filesystem::path& dir);

struct EncoderStageOptions {
    std::optional<EntityId> attention_entity;  // export attention at analysis.snapshot_epochs
};

EncoderTrainResult stage_encoder(const KnowledgeGraph& kg, std::span<const AuxPath> aux, const EmbeddingState& init,
                                 const RunConfig& cfg, const std::filesystem::path& out_dir, RunManifest& manifest,
                                 const Logger& log, const EncoderStageOptions& opts = {});
DecoderTrainResult stage_decoder(const KnowledgeGraph& kg, const Matrix& entity, const Matrix& relation,
                                 const RunConfig& cfg, const std::filesystem::path& out_dir, RunManifest& manifest,
                                 const Logger& log);

struct EvalStageOptions {
    bool per_triple = false;
    bool raw = false;
    std::string split = "test";
};

Evaluation stage_evaluate(const KnowledgeGraph& kg, const Scorer& scorer, const std::filesystem::path& out_dir,
                          RunManifest& manifest, const EvalStageOptions& opts = {});

std::span<const Triple> split_by_name(const KnowledgeGraph& kg, const std::string& name);

struct PipelineOptions {
    std::filesystem::path data_dir;
    std::filesystem::path out_dir;
    RunConfig config;
    EvalStageOptions eval;
    std::optional<std::string> ablation;  // mode name or "all"
    std::optional<std::string> attention_entity;
    Logger log;
};

struct PipelineResult {
    std::optional<RankingMetrics> metrics;  // absent for ablation runs
    std::vector<AblationResult> ablations;
};

// build-aux -> TransE -> encoder -> decoder -> evaluate, or the ablation
// route. Writes run_manifest.json into out_dir.
PipelineResult run_pipeline(const PipelineOptions& opts);

} // namespace relgat
