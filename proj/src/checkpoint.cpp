#include "relgat/checkpoint.hpp"

#include "relgat/error.hpp"

#include <fstream>
#include <sstream>

namespace relgat {

namespace fs = std::filesystem;

const Matrix& Checkpoint::matrix(const std::string& name) const {
    for (const auto& [n, m] : matrices)
        if (n == name) return m;
    input_error("checkpoint has no matrix '" + name + "'");
}

bool Checkpoint::has(const std::string& name) const {
    for (const auto& [n, _] : matrices)
        if (n == name) return true;
    return false;
}

void Checkpoint::put(const std::string& name, Matrix m) {
    for (auto& [n, old] : matrices)
        if (n == name) {
            old = std::move(m);
            return;
        }
    matrices.emplace_back(name, std::move(m));
}

void save_checkpoint(const fs::path& dir, const Checkpoint& ckpt) {
    const fs::path target = dir.lexically_normal();
    fs::path tmp = target;
    tmp += ".tmp";
    std::error_code ec;
    fs::remove_all(tmp, ec);
    if (!fs::create_directories(tmp, ec) && ec) input_error("cannot create " + tmp.string() + ": " + ec.message());

    std::ofstream manifest(tmp / "manifest");
    if (!manifest) input_error("cannot write checkpoint manifest in " + tmp.string());
    for (const auto& [name, m] : ckpt.matrices) {
        if (name.empty() || name.find_first_of(" \t\n/") != std::string::npos)
            input_error("bad checkpoint matrix name '" + name + "'");
        manifest << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
        save_matrix(tmp / (name + ".mat"), m);
    }
    for (const auto& [k, v] : ckpt.config) manifest << "config " << k << " = " << v << '\n';
    manifest.close();
    if (!manifest) input_error("failed writing checkpoint manifest");

    fs::remove_all(target, ec);
    fs::rename(tmp, target, ec);
    if (ec) input_error("cannot move checkpoint into " + target.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const fs::path& dir) {
    std::ifstream manifest(dir / "manifest");
    if (!manifest) input_error("no checkpoint manifest in " + dir.string());
    Checkpoint ckpt;
    std::string line;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        if (kind == "matrix") {
            std::string name;
            std::size_t rows = 0, cols = 0;
            if (!(ls >> name >> rows >> cols)) input_error("bad manifest line: " + line);
            Matrix m = load_matrix(dir / (name + ".mat"));
            if (m.rows() != rows || m.cols() != cols) input_error("checkpoint matrix '" + name + "' has wrong shape");
            ckpt.matrices.emplace_back(name, std::move(m));
        } else if (kind == "config") {
            const auto eq = line.find(" = ");
            if (eq == std::string::npos) input_error("bad manifest line: " + line);
            ckpt.config[line.substr(7, eq - 7)] = line.substr(eq + 3);
        } else {
            input_error("bad manifest line: " + line);
        }
    }
    return ckpt;
}

Checkpoint encoder_checkpoint(const EncoderParams& params, const Matrix& h_out, const Matrix& g_out,
                              const std::map<std::string, std::string>& config) {
    Checkpoint ckpt;
    params.for_each([&](const std::string& name, const Matrix& m) { ckpt.put(name, m); });
    ckpt.put("H_out", h_out);
    ckpt.put("G_out", g_out);
    ckpt.config = config;
    return ckpt;
}

EncoderParams encoder_params_from(const Checkpoint& ckpt, const EncoderConfig& cfg) {
    EncoderParams p;
    p.layers.resize(static_cast<std::size_t>(cfg.n_layers));
    for (auto& l : p.layers) l.heads.resize(static_cast<std::size_t>(cfg.heads));
    p.for_each([&](const std::string& name, Matrix& m) { m = ckpt.matrix(name); });
    return p;
}

Checkpoint decoder_checkpoint(const DecoderParams& params, const Matrix& entity, const Matrix& relation,
                              const std::map<std::string, std::string>& config) {
    Checkpoint ckpt;
    ckpt.put("filters", params.filters);
    ckpt.put("W", params.weights);
    ckpt.put("H", entity);
    ckpt.put("G", relation);
    ckpt.config = config;
    return ckpt;
}

DecoderParams decoder_params_from(const Checkpoint& ckpt) {
    DecoderParams p{ckpt.matrix("filters"), ckpt.matrix("W")};
    if (p.filters.cols() != 3 || p.num_filters() == 0 || p.weights.cols() != 1 ||
        p.weights.rows() % p.num_filters() != 0)
        input_error("decoder checkpoint has inconsistent shapes");
    return p;
}

} // namespace relgat
