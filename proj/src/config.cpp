#include "relgat/config.hpp"

#include "relgat/error.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace relgat {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) input_error("config key '" + key + "': cannot parse '" + v + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    input_error("config key '" + key + "': expected a boolean, got '" + v + "'");
}

std::string fmt(double x) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

template <class T>
std::string fmt_int(T x) {
    return std::to_string(x);
}

struct Entry {
    std::function<std::string()> get;
    std::function<void(const std::string&)> set;
};

using Table = std::map<std::string, Entry>;

template <class T>
Entry int_entry(const std::string& key, T& field) {
    return {[&field] { return fmt_int(field); }, [&field, key](const std::string& v) { field = parse_number<T>(key, v); }};
}

Entry real_entry(const std::string& key, double& field) {
    return {[&field] { return fmt(field); }, [&field, key](const std::string& v) { field = parse_number<double>(key, v); }};
}

Entry bool_entry(const std::string& key, bool& field) {
    return {[&field] { return std::string(field ? "true" : "false"); },
            [&field, key](const std::string& v) { field = parse_bool(key, v); }};
}

void add_train(Table& t, const std::string& p, TrainConfig& c) {
    t[p + "margin"] = real_entry(p + "margin", c.margin);
    t[p + "lr"] = real_entry(p + "lr", c.lr);
    t[p + "epochs"] = int_entry(p + "epochs", c.epochs);
    t[p + "neg_ratio"] = int_entry(p + "neg_ratio", c.negative_ratio);
    t[p + "normalize_every_iter"] = bool_entry(p + "normalize_every_iter", c.normalize_every_iter);
    t[p + "eval_every"] = int_entry(p + "eval_every", c.eval_every);
    t[p + "patience"] = int_entry(p + "patience", c.patience);
    t[p + "lr_decay_every"] = int_entry(p + "lr_decay_every", c.lr_decay_every);
    t[p + "lr_decay"] = real_entry(p + "lr_decay", c.lr_decay);
    t[p + "weight_decay"] = real_entry(p + "weight_decay", c.weight_decay);
}

Table make_table(RunConfig& c) {
    Table t;
    t["seed"] = int_entry("seed", c.seed);

    t["aux.max_hops"] = int_entry("aux.max_hops", c.aux.max_hops);
    t["aux.per_node_cap"] = int_entry("aux.per_node_cap", c.aux.per_node_cap);
    t["aux.dedup"] = bool_entry("aux.dedup", c.aux.dedup);

    t["transe.dim"] = int_entry("transe.dim", c.transe.dim);
    add_train(t, "transe.", c.transe.train);

    t["enc.layers"] = int_entry("enc.layers", c.enc.n_layers);
    t["enc.heads"] = int_entry("enc.heads", c.enc.heads);
    t["enc.hidden_dim"] = int_entry("enc.hidden_dim", c.enc.hidden_dim);
    t["enc.final_dim"] = int_entry("enc.final_dim", c.enc.final_dim);
    t["enc.slope"] = real_entry("enc.slope", c.enc.slope);
    t["enc.activation"] = {[&c] { return to_string(c.enc.activation); },
                           [&c](const std::string& v) { c.enc.activation = parse_activation(v); }};
    t["enc.normalize"] = bool_entry("enc.normalize", c.enc.normalize);
    t["enc.dropout"] = real_entry("enc.dropout", c.enc.dropout);
    t["enc.use_relations"] = bool_entry("enc.use_relations", c.enc.use_relations);
    t["enc.literal_hinge"] = bool_entry("enc.literal_hinge", c.enc.literal_hinge);
    t["enc.aux_positives"] = bool_entry("enc.aux_positives", c.enc.aux_positives);
    add_train(t, "enc.", c.enc_train);

    t["dec.filters"] = int_entry("dec.filters", c.dec.filters);
    t["dec.lambda"] = real_entry("dec.lambda", c.dec.lambda);
    t["dec.neg_ratio"] = int_entry("dec.neg_ratio", c.dec.negative_ratio);
    t["dec.lr"] = real_entry("dec.lr", c.dec.lr);
    t["dec.lr_decay_every"] = int_entry("dec.lr_decay_every", c.dec.lr_decay_every);
    t["dec.lr_decay"] = real_entry("dec.lr_decay", c.dec.lr_decay);
    t["dec.dropout"] = real_entry("dec.dropout", c.dec.dropout);
    t["dec.epochs"] = int_entry("dec.epochs", c.dec.epochs);
    t["dec.batch_size"] = int_entry("dec.batch_size", c.dec.batch_size);
    t["dec.freeze_embeddings"] = bool_entry("dec.freeze_embeddings", c.dec.freeze_embeddings);
    t["dec.filter_noise"] = real_entry("dec.filter_noise", c.dec.filter_noise);
    t["dec.eval_every"] = int_entry("dec.eval_every", c.dec.eval_every);
    t["dec.patience"] = int_entry("dec.patience", c.dec.patience);

    t["pr.damping"] = real_entry("pr.damping", c.analysis.damping);
    t["pr.tol"] = real_entry("pr.tol", c.analysis.pr_tol);
    t["pr.max_iters"] = int_entry("pr.max_iters", c.analysis.pr_max_iters);
    t["analysis.ablation_every"] = int_entry("analysis.ablation_every", c.analysis.ablation_every);
    t["analysis.snapshot_epochs"] = {
        [&c] {
            std::string s;
            for (std::size_t i = 0; i < c.analysis.epochs_snapshot.size(); ++i)
                s += (i ? "," : "") + std::to_string(c.analysis.epochs_snapshot[i]);
            return s;
        },
        [&c](const std::string& v) {
            c.analysis.epochs_snapshot.clear();
            std::stringstream ss(v);
            std::string item;
            while (std::getline(ss, item, ','))
                if (!trim(item).empty())
                    c.analysis.epochs_snapshot.push_back(parse_number<int>("analysis.snapshot_epochs", trim(item)));
            std::sort(c.analysis.epochs_snapshot.begin(), c.analysis.epochs_snapshot.end());
        }};
    return t;
}

} // namespace

void TrainConfig::validate(const std::string& prefix) const {
    if (!(margin >= 0.0)) input_error(prefix + "margin must be >= 0");
    if (!(lr > 0.0)) input_error(prefix + "lr must be > 0");
    if (epochs < 0) input_error(prefix + "epochs must be >= 0");
    if (negative_ratio < 1) input_error(prefix + "neg_ratio must be >= 1");
    if (eval_every < 0) input_error(prefix + "eval_every must be >= 0");
    if (patience < 1) input_error(prefix + "patience must be >= 1");
    if (lr_decay_every < 0) input_error(prefix + "lr_decay_every must be >= 0");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) input_error(prefix + "lr_decay must be in (0, 1]");
    if (!(weight_decay >= 0.0)) input_error(prefix + "weight_decay must be >= 0");
}

void AnalysisConfig::validate() const {
    if (!(damping > 0.0 && damping < 1.0)) input_error("pr.damping must lie in (0,1)");
    if (!(pr_tol > 0.0)) input_error("pr.tol must be > 0");
    if (pr_max_iters < 1) input_error("pr.max_iters must be >= 1");
    if (ablation_every < 1) input_error("analysis.ablation_every must be >= 1");
}

RunConfig::RunConfig() {
    transe.dim = 50;
    transe.train.margin = 1.0;
    transe.train.lr = 0.01;
    transe.train.epochs = 300;
    transe.train.negative_ratio = 2;

    enc.input_dim = transe.dim;
    enc_train.margin = 1.0;
    enc_train.lr = 1e-3;
    enc_train.epochs = 3000;
    enc_train.negative_ratio = 2;
    enc_train.lr_decay_every = 500;
    enc_train.weight_decay = 1e-5;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    auto table = make_table(*this);
    const auto it = table.find(key);
    if (it == table.end()) input_error("unknown config key '" + key + "'");
    it->second.set(trim(value));
    enc.input_dim = transe.dim;
}

std::string RunConfig::get(const std::string& key) const {
    auto table = make_table(const_cast<RunConfig&>(*this));
    const auto it = table.find(key);
    if (it == table.end()) input_error("unknown config key '" + key + "'");
    return it->second.get();
}

std::vector<std::string> RunConfig::keys() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : make_table(const_cast<RunConfig&>(*this))) out.push_back(k);
    return out;
}

std::map<std::string, std::string> RunConfig::to_map() const {
    std::map<std::string, std::string> out;
    for (const auto& [k, e] : make_table(const_cast<RunConfig&>(*this))) out[k] = e.get();
    return out;
}

std::string RunConfig::to_text() const {
    std::string out;
    for (const auto& [k, v] : to_map()) out += k + " = " + v + "\n";
    return out;
}

void RunConfig::validate() const {
    aux.validate();
    if (transe.dim == 0) input_error("transe.dim must be > 0");
    transe.train.validate("transe.");
    enc.validate();
    enc_train.validate("enc.");
    dec.validate();
    analysis.validate();
}

void RunConfig::propagate_seed() {
    transe.train.seed = seed;
    enc_train.seed = seed + 1;
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            input_error(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        cfg.set(trim(std::string_view(body).substr(0, eq)), trim(std::string_view(body).substr(eq + 1)));
    }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) input_error("cannot read config " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    apply_config_text(cfg, ss.str(), file.string());
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) input_error("override '" + assignment + "' is not key=value");
    cfg.set(trim(std::string_view(assignment).substr(0, eq)), trim(std::string_view(assignment).substr(eq + 1)));
}

} // namespace relgat
