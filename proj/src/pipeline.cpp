#include "relgat/pipeline.hpp"

#include "relgat/checkpoint.hpp"
#include "relgat/error.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace relgat {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string git_blob_sha1(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) input_error("cannot read " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string body = ss.str();
    const std::string header = "blob " + std::to_string(body.size()) + '\0';

    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1 ||
        EVP_DigestUpdate(ctx.get(), body.data(), body.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
        input_error("SHA-1 failed for " + file.string());
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return hex.str();
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

std::string RunManifest::to_json() const {
    ordered_json j;
    j["command"] = command;
    j["dataset"] = fs::absolute(dataset).lexically_normal().string();
    j["seed"] = config.seed;
    ordered_json inputs = ordered_json::object();
    for (const auto& [name, hash] : input_hashes) inputs[name] = hash;
    j["input_hashes"] = inputs;
    ordered_json cfg = ordered_json::object();
    for (const auto& [k, v] : config.to_map()) cfg[k] = v;
    j["config"] = cfg;
    j["started_utc"] = started_utc;
    j["finished_utc"] = finished_utc;
    ordered_json outs = ordered_json::object();
    for (const auto& [role, path] : outputs) outs[role] = path;
    j["outputs"] = outs;
    if (metrics) j["metrics"] = ordered_json::parse(metrics->to_json());
    return j.dump(2) + "\n";
}

RunManifest start_manifest(const std::string& command, const fs::path& dataset, const RunConfig& cfg) {
    RunManifest m;
    m.command = command;
    m.dataset = dataset;
    m.config = cfg;
    m.started_utc = utc_now();
    for (const char* name : {"train.txt", "valid.txt", "test.txt", "entity2id.txt", "relation2id.txt"})
        if (fs::exists(dataset / name)) m.input_hashes.emplace_back(name, git_blob_sha1(dataset / name));
    return m;
}

void write_manifest(const fs::path& out_dir, RunManifest& manifest) {
    manifest.finished_utc = utc_now();
    fs::create_directories(out_dir);
    const auto tmp = out_dir / "run_manifest.json.tmp";
    {
        std::ofstream out(tmp);
        if (!out) input_error("cannot write " + tmp.string());
        out << manifest.to_json();
    }
    fs::rename(tmp, out_dir / "run_manifest.json");
}

std::pair<fs::path, RunConfig> read_manifest(const fs::path& file) {
    std::ifstream in(file);
    if (!in) input_error("cannot read manifest " + file.string());
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        input_error("malformed manifest " + file.string() + ": " + e.what());
    }
    if (!j.contains("dataset") || !j.contains("config")) input_error("manifest lacks dataset/config");
    RunConfig cfg;
    for (const auto& [k, v] : j["config"].items()) cfg.set(k, v.get<std::string>());
    return {fs::path(j["dataset"].get<std::string>()), cfg};
}

namespace {

template <class F>
auto tagged(const std::string& stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error& e) {
        throw Error(e.kind(), stage + ": " + e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        throw Error(ErrorKind::input, stage + ": " + e.what());
    }
}

void write_loss_csv(const fs::path& file, const std::vector<EpochLog>& logs) {
    std::ofstream out(file);
    if (!out) input_error("cannot write " + file.string());
    out << "epoch,loss,valid_mrr\n" << std::setprecision(12);
    for (const auto& l : logs) {
        out << l.epoch << ',' << l.loss << ',';
        if (!std::isnan(l.valid_mrr)) out << l.valid_mrr;
        out << '\n';
    }
}

EpochCallback epoch_logger(std::vector<EpochLog>& sink, const Logger& log, int every) {
    return [&sink, log, every](const EpochLog& e) {
        sink.push_back(e);
        if (!log) return;
        if (e.epoch % every != 0 && e.epoch != 1 && std::isnan(e.valid_mrr)) return;
        std::ostringstream os;
        os << e.stage << " epoch " << e.epoch << " loss " << std::setprecision(6) << e.loss;
        if (!std::isnan(e.valid_mrr)) os << " valid_mrr " << e.valid_mrr;
        log(os.str());
    };
}

} // namespace

std::vector<AuxPath> stage_build_aux(const KnowledgeGraph& kg, const RunConfig& cfg, const fs::path& out_dir,
                                     RunManifest& manifest, const Logger& log) {
    return tagged("build-aux", [&] {
        auto paths = enumerate_nhop_paths(kg, cfg.aux);
        fs::create_directories(out_dir);
        write_aux_cache(out_dir / "aux_paths.tsv", kg, paths);
        manifest.outputs.emplace_back("aux_paths", "aux_paths.tsv");
        if (log) log("build-aux: " + std::to_string(paths.size()) + " auxiliary paths");
        return paths;
    });
}

EmbeddingState stage_transe(const KnowledgeGraph& kg, const RunConfig& cfg, const fs::path& out_dir,
                            RunManifest& manifest, const Logger& log) {
    return tagged("init-transe", [&] {
        std::vector<EpochLog> logs;
        auto result = train_transe(kg, cfg.transe.dim, cfg.transe.train, epoch_logger(logs, log, 50));
        Checkpoint ckpt;
        ckpt.put("H", result.state.entity);
        ckpt.put("G", result.state.relation);
        ckpt.config = cfg.to_map();
        save_checkpoint(out_dir / "transe", ckpt);
        write_loss_csv(out_dir / "transe_loss.csv", logs);
        manifest.outputs.emplace_back("transe", "transe");
        manifest.outputs.emplace_back("transe_loss", "transe_loss.csv");
        return std::move(result.state);
    });
}

EmbeddingState load_transe(const fs::path& dir) {
    const auto ckpt = load_checkpoint(dir);
    return {ckpt.matrix("H"), ckpt.matrix("G")};
}

EncoderTrainResult stage_encoder(const KnowledgeGraph& kg, std::span<const AuxPath> aux, const EmbeddingState& init,
                                 const RunConfig& cfg, const fs::path& out_dir, RunManifest& manifest,
                                 const Logger& log, const EncoderStageOptions& opts) {
    return tagged("train-encoder", [&] {
        const auto graph = build_attention_graph(kg, aux);
        if (log)
            log("train-encoder: " + std::to_string(graph.edges.size()) + " attention edges over " +
                std::to_string(graph.num_entities) + " entities");
        std::vector<EpochLog> logs;
        std::vector<AttentionSnapshot> snapshots;
        EncoderTrainOptions topts;
        topts.log = epoch_logger(logs, log, 50);
        if (opts.attention_entity) {
            const auto& epochs = cfg.analysis.epochs_snapshot;
            topts.observe = [&](int epoch, const EncoderParams& p) {
                if (std::find(epochs.begin(), epochs.end(), epoch) != epochs.end())
                    snapshots.push_back(capture_attention(p, graph, cfg.enc, epoch, *opts.attention_entity));
            };
        }
        auto result = train_encoder(kg, graph, init, cfg.enc, cfg.enc_train, topts);
        for (const auto& w : result.warnings)
            if (log) log("warning: " + w);
        auto ckpt = encoder_checkpoint(result.params, result.h_out, result.g_out, cfg.to_map());
        ckpt.config["best_epoch"] = std::to_string(result.best_epoch);
        save_checkpoint(out_dir / "encoder", ckpt);
        write_loss_csv(out_dir / "encoder_loss.csv", logs);
        manifest.outputs.emplace_back("encoder", "encoder");
        manifest.outputs.emplace_back("encoder_loss", "encoder_loss.csv");
        if (opts.attention_entity && !snapshots.empty()) {
            export_attention(snapshots, *opts.attention_entity, kg, out_dir / "attention.csv");
            manifest.outputs.emplace_back("attention", "attention.csv");
        }
        return result;
    });
}

DecoderTrainResult stage_decoder(const KnowledgeGraph& kg, const Matrix& entity, const Matrix& relation,
                                 const RunConfig& cfg, const fs::path& out_dir, RunManifest& manifest,
                                 const Logger& log) {
    return tagged("train-decoder", [&] {
        std::vector<EpochLog> logs;
        auto result = train_decoder(kg, entity, relation, cfg.dec, cfg.seed + 2, epoch_logger(logs, log, 10));
        auto ckpt = decoder_checkpoint(result.params, result.entity, result.relation, cfg.to_map());
        ckpt.config["best_epoch"] = std::to_string(result.best_epoch);
        save_checkpoint(out_dir / "decoder", ckpt);
        write_loss_csv(out_dir / "decoder_loss.csv", logs);
        manifest.outputs.emplace_back("decoder", "decoder");
        manifest.outputs.emplace_back("decoder_loss", "decoder_loss.csv");
        return result;
    });
}

std::span<const Triple> split_by_name(const KnowledgeGraph& kg, const std::string& name) {
    if (name == "test") return kg.test();
    if (name == "valid") return kg.valid();
    if (name == "train") return kg.train();
    input_error("unknown split '" + name + "' (train, valid, test)");
}

Evaluation stage_evaluate(const KnowledgeGraph& kg, const Scorer& scorer, const fs::path& out_dir,
                          RunManifest& manifest, const EvalStageOptions& opts) {
    return tagged("evaluate", [&] {
        RankOptions ro;
        ro.filtered = !opts.raw;
        auto ev = evaluate(split_by_name(kg, opts.split), scorer, kg, ro);
        fs::create_directories(out_dir);
        {
            std::ofstream out(out_dir / "metrics.json");
            if (!out) input_error("cannot write metrics.json");
            out << ev.metrics.to_json() << '\n';
        }
        manifest.outputs.emplace_back("metrics", "metrics.json");
        if (opts.per_triple) {
            std::ofstream out(out_dir / "per_triple.csv");
            if (!out) input_error("cannot write per_triple.csv");
            write_per_triple_csv(out, ev, kg);
            manifest.outputs.emplace_back("per_triple", "per_triple.csv");
        }
        manifest.metrics = ev.metrics;
        return ev;
    });
}

PipelineResult run_pipeline(const PipelineOptions& opts) {
    RunConfig cfg = opts.config;
    cfg.propagate_seed();
    cfg.validate();
    const auto kg = tagged("load", [&] { return load_dataset(opts.data_dir); });
    auto manifest = start_manifest(opts.ablation ? "pipeline --ablation " + *opts.ablation : "pipeline",
                                   opts.data_dir, cfg);
    fs::create_directories(opts.out_dir);

    std::optional<EntityId> attention_entity;
    if (opts.attention_entity) {
        const auto id = kg.entities().id(*opts.attention_entity);
        if (id < 0) input_error("unknown entity '" + *opts.attention_entity + "'");
        attention_entity = id;
    }

    PipelineResult result;
    const auto aux = stage_build_aux(kg, cfg, opts.out_dir, manifest, opts.log);
    const auto init = stage_transe(kg, cfg, opts.out_dir, manifest, opts.log);

    if (opts.ablation) {
        std::vector<AblationMode> modes;
        if (*opts.ablation == "all")
            modes = {AblationMode::full, AblationMode::minus_pg, AblationMode::minus_relations};
        else
            modes = {parse_ablation(*opts.ablation)};
        for (const auto mode : modes) {
            result.ablations.push_back(tagged("ablate", [&] {
                return run_ablation(kg, aux, init, mode, cfg, [&](int epoch, double mr) {
                    if (opts.log) opts.log("ablate " + to_string(mode) + " epoch " + std::to_string(epoch) +
                                           " test_mr " + std::to_string(mr));
                });
            }));
        }
        write_ablation_csv(opts.out_dir / "ablation.csv", result.ablations);
        manifest.outputs.emplace_back("ablation", "ablation.csv");
        write_manifest(opts.out_dir, manifest);
        return result;
    }

    const auto enc = stage_encoder(kg, aux, init, cfg, opts.out_dir, manifest, opts.log, {attention_entity});
    const auto dec = stage_decoder(kg, enc.h_out, enc.g_out, cfg, opts.out_dir, manifest, opts.log);
    ConvKBScorer scorer(dec.entity, dec.relation, dec.params);
    result.metrics = stage_evaluate(kg, scorer, opts.out_dir, manifest, opts.eval).metrics;
    write_manifest(opts.out_dir, manifest);
    return result;
}

} // namespace relgat
