// Command-line entry point. Exit codes: 0 ok, 2 input error, 3 numeric
// failure, 4 non-convergence.

#include "relgat/analysis.hpp"
#include "relgat/checkpoint.hpp"
#include "relgat/config.hpp"
#include "relgat/error.hpp"
#include "relgat/eval.hpp"
#include "relgat/kg.hpp"
#include "relgat/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace relgat;

namespace {

struct Common {
    std::string config_file;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::string data;
    std::string out;
    bool quiet = false;
};

// Precedence: defaults < KG_SEED < config file < --set < --seed.
RunConfig resolve_config(const Common& c) {
    RunConfig cfg;
    if (const char* env = std::getenv("KG_SEED"); env && *env) cfg.set("seed", env);
    if (!c.config_file.empty()) apply_config_file(cfg, c.config_file);
    for (const auto& o : c.overrides) apply_override(cfg, o);
    if (c.seed) cfg.seed = *c.seed;
    cfg.propagate_seed();
    cfg.validate();
    return cfg;
}

Logger make_logger(const Common& c) {
    if (c.quiet) return {};
    return [](const std::string& line) { std::cerr << line << std::endl; };
}

void add_common(CLI::App* app, Common& c, bool needs_out) {
    app->add_option("--data", c.data, "Dataset directory with train/valid/test.txt")->required();
    if (needs_out) app->add_option("--out", c.out, "Output directory")->required();
    app->add_option("--config", c.config_file, "Flat key = value config file");
    app->add_option("--set", c.overrides, "Config override key=value (repeatable)");
    app->add_option("--seed", c.seed, "Seed (falls back to KG_SEED)");
    app->add_flag("--quiet,-q", c.quiet, "No progress output");
}

void print_stats(const GraphStats& s, const fs::path& data, bool json) {
    if (json) {
        nlohmann::ordered_json j;
        j["dataset"] = data.lexically_normal().string();
        j["entities"] = s.n_entities;
        j["relations"] = s.n_relations;
        j["train"] = s.n_train;
        j["valid"] = s.n_valid;
        j["test"] = s.n_test;
        j["total"] = s.n_total;
        j["mean_in_degree"] = s.mean_in_degree;
        j["median_in_degree"] = s.median_in_degree;
        std::cout << j.dump() << '\n';
        return;
    }
    std::cout << std::fixed << std::setprecision(2);
    std::cout << "entities          " << s.n_entities << '\n'
              << "relations         " << s.n_relations << '\n'
              << "train             " << s.n_train << '\n'
              << "valid             " << s.n_valid << '\n'
              << "test              " << s.n_test << '\n'
              << "total             " << s.n_total << '\n'
              << "mean in-degree    " << s.mean_in_degree << '\n'
              << "median in-degree  " << s.median_in_degree << '\n';
}

void print_metrics(const RankingMetrics& m, bool json) {
    if (json)
        std::cout << m.to_json() << '\n';
    else
        std::cout << m.to_table();
}

std::vector<AuxPath> aux_for(const KnowledgeGraph& kg, const RunConfig& cfg, const std::string& aux_file) {
    if (!aux_file.empty()) return read_aux_cache(aux_file, kg);
    return enumerate_nhop_paths(kg, cfg.aux);
}

EmbeddingState init_for(const KnowledgeGraph& kg, const RunConfig& cfg, const std::string& init_dir) {
    if (!init_dir.empty()) return load_transe(init_dir);
    // No TransE checkpoint: seeded uniform embeddings.
    std::mt19937_64 rng(cfg.seed);
    return {uniform_init(kg.num_entities(), cfg.enc.input_dim, rng),
            uniform_init(kg.num_relation_rows(), cfg.enc.input_dim, rng)};
}

std::string joined_args(int argc, char** argv) {
    std::string s;
    for (int i = 1; i < argc; ++i) s += (i > 1 ? " " : "") + std::string(argv[i]);
    return s;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Relation-aware graph attention embeddings for knowledge base completion"};
    app.require_subcommand(1);
    const std::string command_line = joined_args(argc, argv);

    Common stats_c, aux_c, transe_c, enc_c, dec_c, eval_c, abl_c, pr_c, att_c, pipe_c;
    bool stats_json = false, eval_json = false, pr_json = false, pipe_json = false;
    std::string enc_init, enc_aux, enc_entity, dec_encoder;
    std::string eval_decoder, eval_encoder, eval_transe;
    EvalStageOptions eval_opts;
    std::string abl_mode = "all", abl_init;
    std::string att_encoder, att_entity;
    int att_layer = -1;
    std::string pipe_ablation, pipe_entity, pipe_manifest;
    bool pipe_per_triple = false;

    auto* stats = app.add_subcommand("stats", "Dataset statistics");
    stats->add_option("--data", stats_c.data, "Dataset directory")->required();
    stats->add_flag("--json", stats_json, "Machine-readable output");

    auto* build_aux = app.add_subcommand("build-aux", "Enumerate n-hop auxiliary paths");
    add_common(build_aux, aux_c, true);

    auto* init_transe = app.add_subcommand("init-transe", "Train TransE initial embeddings");
    add_common(init_transe, transe_c, true);

    auto* train_enc = app.add_subcommand("train-encoder", "Train the attention encoder");
    add_common(train_enc, enc_c, true);
    train_enc->add_option("--init", enc_init, "TransE checkpoint directory");
    train_enc->add_option("--aux", enc_aux, "Auxiliary path file from build-aux");
    train_enc->add_option("--attention-entity", enc_entity,
                          "Export attention for this entity at analysis.snapshot_epochs");

    auto* train_dec = app.add_subcommand("train-decoder", "Train the ConvKB decoder on encoder outputs");
    add_common(train_dec, dec_c, true);
    train_dec->add_option("--encoder", dec_encoder, "Encoder checkpoint directory")->required();

    auto* eval = app.add_subcommand("evaluate", "Filtered ranking metrics");
    add_common(eval, eval_c, true);
    auto* eval_group = eval->add_option_group("model", "Checkpoint to score with");
    eval_group->add_option("--decoder", eval_decoder, "Decoder checkpoint (ConvKB scorer)");
    eval_group->add_option("--encoder", eval_encoder, "Encoder checkpoint (translational scorer)");
    eval_group->add_option("--transe", eval_transe, "TransE checkpoint (translational scorer)");
    eval_group->require_option(1);
    eval->add_option("--split", eval_opts.split, "Split to rank")->check(CLI::IsMember({"train", "valid", "test"}));
    eval->add_flag("--per-triple", eval_opts.per_triple, "Write per_triple.csv");
    eval->add_flag("--raw", eval_opts.raw, "Unfiltered ranking (diagnostic)");
    eval->add_flag("--json", eval_json, "Print metrics as JSON");

    auto* ablate = app.add_subcommand("ablate", "Ablation MR curves");
    add_common(ablate, abl_c, true);
    ablate->add_option("--mode", abl_mode, "full, minus_pg, minus_relations or all")
        ->check(CLI::IsMember({"full", "minus_pg", "minus_relations", "all"}));
    ablate->add_option("--init", abl_init, "TransE checkpoint directory (trained when absent)");

    auto* analyze = app.add_subcommand("analyze", "PageRank and attention exports");
    analyze->require_subcommand(1);
    auto* pr = analyze->add_subcommand("pagerank", "Mean PageRank over the training graph");
    add_common(pr, pr_c, false);
    pr->add_option("--out", pr_c.out, "Directory for pagerank.csv");
    pr->add_flag("--json", pr_json, "Machine-readable output");
    auto* att = analyze->add_subcommand("attention", "Export attention for one entity");
    add_common(att, att_c, true);
    att->add_option("--encoder", att_encoder, "Encoder checkpoint directory")->required();
    att->add_option("--entity", att_entity, "Entity name")->required();
    att->add_option("--layer", att_layer, "Layer index (-1: last)");

    auto* pipeline = app.add_subcommand("pipeline", "Full two-step run");
    pipeline->add_option("--data", pipe_c.data, "Dataset directory");
    pipeline->add_option("--out", pipe_c.out, "Output directory")->required();
    pipeline->add_option("--config", pipe_c.config_file, "Flat key = value config file");
    pipeline->add_option("--set", pipe_c.overrides, "Config override key=value (repeatable)");
    pipeline->add_option("--seed", pipe_c.seed, "Seed (falls back to KG_SEED)");
    pipeline->add_flag("--quiet,-q", pipe_c.quiet, "No progress output");
    pipeline->add_option("--ablation", pipe_ablation, "Route through the ablation runner")
        ->check(CLI::IsMember({"full", "minus_pg", "minus_relations", "all"}));
    pipeline->add_option("--attention-entity", pipe_entity, "Export attention for this entity");
    pipeline->add_option("--from-manifest", pipe_manifest, "Re-run the dataset and config of a manifest");
    pipeline->add_flag("--per-triple", pipe_per_triple, "Write per_triple.csv");
    pipeline->add_flag("--json", pipe_json, "Print metrics as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ErrorKind::input);
    }

    try {
        if (stats->parsed()) {
            const auto kg = load_dataset(stats_c.data);
            print_stats(compute_stats(kg), stats_c.data, stats_json);
        } else if (build_aux->parsed()) {
            const auto cfg = resolve_config(aux_c);
            const auto kg = load_dataset(aux_c.data);
            auto manifest = start_manifest(command_line, aux_c.data, cfg);
            stage_build_aux(kg, cfg, aux_c.out, manifest, make_logger(aux_c));
            write_manifest(aux_c.out, manifest);
        } else if (init_transe->parsed()) {
            const auto cfg = resolve_config(transe_c);
            const auto kg = load_dataset(transe_c.data);
            auto manifest = start_manifest(command_line, transe_c.data, cfg);
            stage_transe(kg, cfg, transe_c.out, manifest, make_logger(transe_c));
            write_manifest(transe_c.out, manifest);
        } else if (train_enc->parsed()) {
            const auto cfg = resolve_config(enc_c);
            const auto kg = load_dataset(enc_c.data);
            auto manifest = start_manifest(command_line, enc_c.data, cfg);
            EncoderStageOptions opts;
            if (!enc_entity.empty()) {
                opts.attention_entity = kg.entities().id(enc_entity);
                if (*opts.attention_entity < 0) input_error("unknown entity '" + enc_entity + "'");
            }
            const auto aux = aux_for(kg, cfg, enc_aux);
            stage_encoder(kg, aux, init_for(kg, cfg, enc_init), cfg, enc_c.out, manifest, make_logger(enc_c), opts);
            write_manifest(enc_c.out, manifest);
        } else if (train_dec->parsed()) {
            const auto cfg = resolve_config(dec_c);
            const auto kg = load_dataset(dec_c.data);
            auto manifest = start_manifest(command_line, dec_c.data, cfg);
            const auto ckpt = load_checkpoint(dec_encoder);
            stage_decoder(kg, ckpt.matrix("H_out"), ckpt.matrix("G_out"), cfg, dec_c.out, manifest,
                          make_logger(dec_c));
            write_manifest(dec_c.out, manifest);
        } else if (eval->parsed()) {
            const auto cfg = resolve_config(eval_c);
            const auto kg = load_dataset(eval_c.data);
            auto manifest = start_manifest(command_line, eval_c.data, cfg);
            Evaluation ev;
            if (!eval_decoder.empty()) {
                const auto ckpt = load_checkpoint(eval_decoder);
                const auto params = decoder_params_from(ckpt);
                ConvKBScorer scorer(ckpt.matrix("H"), ckpt.matrix("G"), params);
                ev = stage_evaluate(kg, scorer, eval_c.out, manifest, eval_opts);
            } else if (!eval_encoder.empty()) {
                const auto ckpt = load_checkpoint(eval_encoder);
                bool use_relations = true;
                if (auto it = ckpt.config.find("enc.use_relations"); it != ckpt.config.end())
                    use_relations = it->second == "true";
                TranslationalScorer scorer(ckpt.matrix("H_out"), ckpt.matrix("G_out"), use_relations);
                ev = stage_evaluate(kg, scorer, eval_c.out, manifest, eval_opts);
            } else {
                const auto state = load_transe(eval_transe);
                TranslationalScorer scorer(state.entity, state.relation);
                ev = stage_evaluate(kg, scorer, eval_c.out, manifest, eval_opts);
            }
            write_manifest(eval_c.out, manifest);
            print_metrics(ev.metrics, eval_json);
        } else if (ablate->parsed()) {
            const auto cfg = resolve_config(abl_c);
            const auto kg = load_dataset(abl_c.data);
            const auto log = make_logger(abl_c);
            auto manifest = start_manifest(command_line, abl_c.data, cfg);
            const auto aux = stage_build_aux(kg, cfg, abl_c.out, manifest, log);
            const auto init =
                abl_init.empty() ? stage_transe(kg, cfg, abl_c.out, manifest, log) : load_transe(abl_init);
            std::vector<AblationMode> modes;
            if (abl_mode == "all")
                modes = {AblationMode::full, AblationMode::minus_pg, AblationMode::minus_relations};
            else
                modes = {parse_ablation(abl_mode)};
            std::vector<AblationResult> results;
            for (const auto mode : modes) {
                results.push_back(run_ablation(kg, aux, init, mode, cfg, [&](int epoch, double mr) {
                    if (log) log("ablate " + to_string(mode) + " epoch " + std::to_string(epoch) + " test_mr " +
                                 std::to_string(mr));
                }));
                std::cout << to_string(mode) << " final test MR " << std::fixed << std::setprecision(3)
                          << results.back().final_mr() << '\n';
            }
            write_ablation_csv(fs::path(abl_c.out) / "ablation.csv", results);
            manifest.outputs.emplace_back("ablation", "ablation.csv");
            write_manifest(abl_c.out, manifest);
        } else if (pr->parsed()) {
            const auto cfg = resolve_config(pr_c);
            const auto kg = load_dataset(pr_c.data);
            const auto result = pagerank(kg, cfg.analysis);
            if (!pr_c.out.empty()) {
                fs::create_directories(pr_c.out);
                std::ofstream out(fs::path(pr_c.out) / "pagerank.csv");
                if (!out) input_error("cannot write pagerank.csv");
                out << "entity,pagerank\n" << std::setprecision(17);
                for (std::size_t e = 0; e < result.scores.size(); ++e)
                    out << kg.entities().name(static_cast<EntityId>(e)) << ',' << result.scores[e] << '\n';
                auto manifest = start_manifest(command_line, pr_c.data, cfg);
                manifest.outputs.emplace_back("pagerank", "pagerank.csv");
                write_manifest(pr_c.out, manifest);
            }
            if (pr_json) {
                nlohmann::ordered_json j;
                j["entities"] = result.scores.size();
                j["mean_pagerank"] = result.mean();
                j["mean_pagerank_e5"] = result.mean() * 1e5;
                j["iterations"] = result.iterations;
                j["edges"] = "simple directed training edges, relation labels dropped";
                std::cout << j.dump() << '\n';
            } else {
                std::cout << "mean PageRank (x1e-5)  " << std::fixed << std::setprecision(2) << result.mean() * 1e5
                          << "\niterations            " << result.iterations << '\n';
            }
        } else if (att->parsed()) {
            const auto cfg = resolve_config(att_c);
            const auto kg = load_dataset(att_c.data);
            const auto entity = kg.entities().id(att_entity);
            if (entity < 0) input_error("unknown entity '" + att_entity + "'");
            const auto ckpt = load_checkpoint(att_encoder);
            RunConfig ck_cfg = cfg;
            for (const auto& [k, v] : ckpt.config)
                if (k.rfind("enc.", 0) == 0 || k.rfind("aux.", 0) == 0 || k == "transe.dim") ck_cfg.set(k, v);
            const auto params = encoder_params_from(ckpt, ck_cfg.enc);
            const auto aux = enumerate_nhop_paths(kg, ck_cfg.aux);
            NeighborhoodOptions nb;
            nb.include_aux = true;
            const auto graph = build_attention_graph(kg, aux, nb);
            int epoch = -1;
            if (auto it = ckpt.config.find("best_epoch"); it != ckpt.config.end()) epoch = std::stoi(it->second);
            const std::vector<AttentionSnapshot> snaps{capture_attention(params, graph, ck_cfg.enc, epoch, entity)};
            fs::create_directories(att_c.out);
            export_attention(snaps, entity, kg, fs::path(att_c.out) / "attention.csv", att_layer);
            auto manifest = start_manifest(command_line, att_c.data, ck_cfg);
            manifest.outputs.emplace_back("attention", "attention.csv");
            write_manifest(att_c.out, manifest);
        } else if (pipeline->parsed()) {
            PipelineOptions opts;
            if (!pipe_manifest.empty()) {
                auto [data, cfg] = read_manifest(pipe_manifest);
                opts.data_dir = pipe_c.data.empty() ? data : fs::path(pipe_c.data);
                opts.config = cfg;
            } else {
                if (pipe_c.data.empty()) input_error("pipeline needs --data or --from-manifest");
                opts.data_dir = pipe_c.data;
                opts.config = resolve_config(pipe_c);
            }
            opts.out_dir = pipe_c.out;
            opts.eval.per_triple = pipe_per_triple;
            if (!pipe_ablation.empty()) opts.ablation = pipe_ablation;
            if (!pipe_entity.empty()) opts.attention_entity = pipe_entity;
            opts.log = make_logger(pipe_c);
            const auto result = run_pipeline(opts);
            if (result.metrics) print_metrics(*result.metrics, pipe_json);
            for (const auto& a : result.ablations)
                std::cout << to_string(a.mode) << " final test MR " << std::fixed << std::setprecision(3)
                          << a.final_mr() << '\n';
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ErrorKind::input);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ErrorKind::input);
    }
    return 0;
}
