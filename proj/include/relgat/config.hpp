#pragma once

#include "relgat/decoder.hpp"
#include "relgat/encoder.hpp"
#include "relgat/nhop.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace relgat {

// Shared by the TransE and encoder trainers.
struct TrainConfig {
    double margin = 1.0;
    double lr = 1e-3;
    int epochs = 100;
    int negative_ratio = 2;
    std::uint64_t seed = 0;  // filled from RunConfig::seed
    bool normalize_every_iter = true;
    int eval_every = 0;  // validation MRR cadence (translational scorer); 0 disables
    int patience = 2;
    int lr_decay_every = 0;  // step schedule; 0 keeps lr fixed
    double lr_decay = 0.5;
    double weight_decay = 0.0;  // L2 added to every gradient

    void validate(const std::string& prefix) const;
};

struct TranseConfig {
    std::size_t dim = 50;
    TrainConfig train;
};

struct AnalysisConfig {
    double damping = 0.85;
    double pr_tol = 1e-10;
    int pr_max_iters = 1000;
    std::vector<int> epochs_snapshot;  // encoder epochs at which attention is captured
    int ablation_every = 50;           // MR curve cadence for ablation runs

    void validate() const;
};

struct RunConfig {
    std::uint64_t seed = 42;
    AuxConfig aux;
    TranseConfig transe;
    EncoderConfig enc;
    TrainConfig enc_train;
    DecoderConfig dec;
    AnalysisConfig analysis;

    RunConfig();

    // Throws an input error for unknown keys or unparsable values.
    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;
    std::vector<std::string> keys() const;

    // Sorted "key = value" lines; round-trips through parse_config_text.
    std::string to_text() const;
    std::map<std::string, std::string> to_map() const;

    void validate() const;
    // Copies the run seed into the per-stage training configs.
    void propagate_seed();
};

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin);
void apply_config_file(RunConfig& cfg, const std::filesystem::path& file);
// "key=value" as given on the command line.
void apply_override(RunConfig& cfg, const std::string& assignment);

} // namespace relgat
