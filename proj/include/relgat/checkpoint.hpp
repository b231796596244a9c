#pragma once

#include "relgat/decoder.hpp"
#include "relgat/encoder.hpp"
#include "relgat/numerics.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace relgat {

// A checkpoint directory: `manifest` lists "matrix <name> <rows> <cols>" and
// "config <key> = <value>" lines; each matrix lives in <name>.mat.
struct Checkpoint {
    std::vector<std::pair<std::string, Matrix>> matrices;
    std::map<std::string, std::string> config;

    const Matrix& matrix(const std::string& name) const;
    bool has(const std::string& name) const;
    void put(const std::string& name, Matrix m);
};

// Writes into a sibling temp directory, then renames over `dir`.
void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

// Encoder checkpoints also carry the encoder outputs H_out (H'') and G_out.
Checkpoint encoder_checkpoint(const EncoderParams& params, const Matrix& h_out, const Matrix& g_out,
                              const std::map<std::string, std::string>& config);
EncoderParams encoder_params_from(const Checkpoint& ckpt, const EncoderConfig& cfg);

Checkpoint decoder_checkpoint(const DecoderParams& params, const Matrix& entity, const Matrix& relation,
                              const std::map<std::string, std::string>& config);
DecoderParams decoder_params_from(const Checkpoint& ckpt);

} // namespace relgat
