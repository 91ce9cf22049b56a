#include "styleflow/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <variant>

#include "styleflow/error.hpp"

namespace styleflow {

namespace {

static_assert(std::is_same_v<std::size_t, std::uint64_t>, "seed and counts share one field kind");
using Field = std::variant<std::string Config::*, std::size_t Config::*, double Config::*, bool Config::*>;

struct Entry {
    ConfigKey key;
    Field field;
};

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::uint64_t parse_unsigned(std::string_view key, std::string_view text) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw ConfigError(std::string(key) + ": expected a non-negative integer, got '" + std::string(text) + "'");
    }
    return v;
}

double parse_double(std::string_view key, std::string_view text) {
    std::string s(text);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size() || !std::isfinite(v)) {
        throw ConfigError(std::string(key) + ": expected a finite number, got '" + s + "'");
    }
    return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw ConfigError(std::string(key) + ": expected true or false, got '" + std::string(text) + "'");
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

const std::vector<Entry>& entries() {
    static const std::vector<Entry> table = [] {
        const std::vector<std::string> all;
        const std::vector<std::string> scorer{"train-scorer"};
        const std::vector<std::string> model{"train-scorer", "train", "transfer", "augment"};
        const std::vector<std::string> train{"train"};
        std::vector<Entry> t{
            {{"seed", "base seed of every random stream", all}, &Config::seed},
            {{"threads", "worker threads for data-parallel loops", all}, &Config::threads},
            {{"train_data", "training corpus (label<TAB>sentence)", {"train-scorer", "train", "eval", "synth"}},
             &Config::train_data},
            {{"test_data", "corpus to transfer or augment when --input is not given", {"transfer", "augment", "synth"}},
             &Config::test_data},
            {{"eval_data", "held-out corpus for the evaluation scorer and the LM", {"train-scorer", "eval", "synth"}},
             &Config::eval_data},
            {{"references", "human references, one per transfer output line", {"eval"}}, &Config::references},
            {{"augment_data", "augmented rows mixed into flow training", train}, &Config::augment_data},
            {{"scorer_checkpoint", "scorer checkpoint (embeddings, attention, head)",
              {"train-scorer", "train"}},
             &Config::scorer_checkpoint},
            {{"eval_scorer_checkpoint", "frozen evaluation classifier", {"train-scorer", "eval"}},
             &Config::eval_scorer_checkpoint},
            {{"model_checkpoint", "flow model checkpoint", {"train", "transfer", "augment"}},
             &Config::model_checkpoint},
            {{"metrics_csv", "per-step loss log", train}, &Config::metrics_csv},
            {{"dump_path", "diagnostic dump written on a non-finite loss", train}, &Config::dump_path},
            {{"transfer_output", "transfer output file", {"transfer", "eval"}}, &Config::transfer_output},
            {{"augment_output", "augmented corpus; a .sidecar.csv is written next to it", {"augment"}},
             &Config::augment_output},
            {{"report", "metrics report", {"eval"}}, &Config::report},
            {{"hidden_dim", "scorer GRU width", scorer}, &Config::hidden_dim},
            {{"attention_dim", "scorer attention width", scorer}, &Config::attention_dim},
            {{"embed_radius", "norm of every embedding row", scorer}, &Config::embed_radius},
            {{"scorer_epochs", "scorer training epochs", scorer}, &Config::scorer_epochs},
            {{"scorer_lr", "scorer learning rate", scorer}, &Config::scorer_lr},
            {{"scorer_batch", "scorer batch size", scorer}, &Config::scorer_batch},
            {{"model_dim", "embedding and flow width", model}, &Config::model_dim},
            {{"heads", "attention heads per coupling block", train}, &Config::heads},
            {{"ffn_dim", "feed-forward width per coupling block", train}, &Config::ffn_dim},
            {{"chain_length", "coupling layers in the flow", train}, &Config::chain_length},
            {{"split", "coupling split: attention, parity or channel", train}, &Config::split},
            {{"style_fraction", "fraction of tokens on the style side (rho)", train}, &Config::style_fraction},
            {{"cln_eps", "conditional layer norm epsilon", train}, &Config::cln_eps},
            {{"cln_reduction", "style rows from CLN rows: nearest or mean", train}, &Config::cln_reduction},
            {{"inverse_split", "inverse partitions: recorded or rescore", train}, &Config::inverse_split},
            {{"positions", "style positions from latent or tokens", train}, &Config::positions},
            {{"head_init_std", "stddev of the coupling output heads at init (0: identity flow)", train},
             &Config::head_init_std},
            {{"lr", "flow learning rate", train}, &Config::lr},
            {{"batch", "flow batch size", train}, &Config::batch},
            {{"epochs", "flow training epochs", train}, &Config::epochs},
            {{"max_steps", "stop after this many updates (0: no limit)", train}, &Config::max_steps},
            {{"checkpoint_every", "checkpoint period in steps (0: final only)", train}, &Config::checkpoint_every},
            {{"lambda_self", "weight of the self reconstruction loss", train}, &Config::lambda_self},
            {{"lambda_cycle", "weight of the cycle reconstruction loss", train}, &Config::lambda_cycle},
            {{"lambda_content", "weight of the content preservation loss", train}, &Config::lambda_content},
            {{"lambda_style", "weight of the style loss", train}, &Config::lambda_style},
            {{"straight_through", "discretize transfers in the forward pass", train}, &Config::straight_through},
            {{"resume", "continue from model_checkpoint", train}, &Config::resume},
            {{"target_style", "opposite, or a style label", {"transfer"}}, &Config::target_style},
            {{"replace_style", "false keeps the source style rows", {"transfer"}}, &Config::replace_style},
            {{"aug_epsilon", "latent noise scale", {"augment"}}, &Config::aug_epsilon},
            {{"aug_samples", "variants per source sentence", {"augment"}}, &Config::aug_samples},
            {{"aug_content_only", "leave style positions unperturbed", {"augment"}}, &Config::aug_content_only},
            {{"mix_ratio", "share of augmented rows in each epoch", train}, &Config::mix_ratio},
            {{"lm_order", "n-gram order of the evaluation LM", {"eval"}}, &Config::lm_order},
            {{"lm_discount", "absolute discount of the evaluation LM", {"eval"}}, &Config::lm_discount},
            {{"synth_per_style", "synthetic training rows per style", {"synth"}}, &Config::synth_per_style},
            {{"synth_test_per_style", "synthetic test and held-out rows per style", {"synth"}},
             &Config::synth_test_per_style},
            {{"synth_vocab", "approximate synthetic vocabulary size", {"synth"}}, &Config::synth_vocab},
        };
        return t;
    }();
    return table;
}

const Entry& find_entry(std::string_view key) {
    for (const Entry& e : entries())
        if (e.key.name == key) return e;
    throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void check_choice(std::string_view key, const std::string& value, std::initializer_list<std::string_view> options) {
    for (std::string_view o : options)
        if (value == o) return;
    std::string msg = std::string(key) + ": '" + value + "' is not one of";
    for (std::string_view o : options) msg += " " + std::string(o);
    throw ConfigError(msg);
}

void check_positive(std::string_view key, double v) {
    if (!(v > 0.0)) throw ConfigError(std::string(key) + " must be positive");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> out{{"workspace", "root that relative paths resolve against", {}}};
        for (const Entry& e : entries()) out.push_back(e.key);
        return out;
    }();
    return keys;
}

std::vector<const ConfigKey*> keys_for(std::string_view command) {
    std::vector<const ConfigKey*> out;
    for (const ConfigKey& k : config_keys()) {
        bool reads = k.commands.empty();
        for (const std::string& c : k.commands) reads = reads || c == command;
        if (reads) out.push_back(&k);
    }
    return out;
}

void set_config_value(Config& config, std::string_view key, std::string_view raw) {
    const std::string value = trim(raw);
    if (key == "workspace") {
        config.workspace = value;
        return;
    }
    const Entry& e = find_entry(key);
    std::visit(
        [&](auto member) {
            using T = std::remove_reference_t<decltype(config.*member)>;
            if constexpr (std::is_same_v<T, std::string>) {
                config.*member = value;
            } else if constexpr (std::is_same_v<T, bool>) {
                config.*member = parse_bool(key, value);
            } else if constexpr (std::is_same_v<T, double>) {
                config.*member = parse_double(key, value);
            } else {
                config.*member = static_cast<T>(parse_unsigned(key, value));
            }
        },
        e.field);
}

std::string get_config_value(const Config& config, std::string_view key) {
    if (key == "workspace") return config.workspace.string();
    const Entry& e = find_entry(key);
    return std::visit(
        [&](auto member) -> std::string {
            using T = std::remove_cvref_t<decltype(config.*member)>;
            if constexpr (std::is_same_v<T, std::string>) {
                return config.*member;
            } else if constexpr (std::is_same_v<T, bool>) {
                return config.*member ? "true" : "false";
            } else if constexpr (std::is_same_v<T, double>) {
                return format_double(config.*member);
            } else {
                return std::to_string(config.*member);
            }
        },
        e.field);
}

void parse_config_text(Config& config, std::string_view text, std::string_view source_name) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        const std::string where = std::string(source_name) + ":" + std::to_string(lineno) + ": ";
        if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
        const std::string key = trim(std::string_view(body).substr(0, eq));
        try {
            set_config_value(config, key, std::string_view(body).substr(eq + 1));
        } catch (const ConfigError& err) {
            throw ConfigError(where + err.what());
        }
    }
}

Config load_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw MissingFileError("config file not found: " + path.string());
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    Config config;
    config.workspace.clear();
    parse_config_text(config, buf.str(), path.filename().string());
    // A relative workspace is relative to the config file.
    const std::filesystem::path dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    config.workspace = config.workspace.empty() ? dir : config.workspace.is_relative() ? dir / config.workspace
                                                                                       : config.workspace;
    return config;
}

std::string format_config(const Config& config) {
    std::string out;
    for (const ConfigKey& k : config_keys()) out += k.name + " = " + get_config_value(config, k.name) + "\n";
    return out;
}

void Config::validate() const {
    if (threads == 0) throw ConfigError("threads must be at least 1");
    check_positive("hidden_dim", static_cast<double>(hidden_dim));
    check_positive("attention_dim", static_cast<double>(attention_dim));
    check_positive("embed_radius", embed_radius);
    check_positive("scorer_lr", scorer_lr);
    check_positive("scorer_batch", static_cast<double>(scorer_batch));
    check_positive("model_dim", static_cast<double>(model_dim));
    check_positive("heads", static_cast<double>(heads));
    if (model_dim % heads != 0) throw ConfigError("model_dim must be divisible by heads");
    check_positive("ffn_dim", static_cast<double>(ffn_dim));
    check_positive("chain_length", static_cast<double>(chain_length));
    check_choice("split", split, {"attention", "parity", "channel"});
    if (!(style_fraction > 0.0 && style_fraction < 1.0)) throw ConfigError("style_fraction must lie in (0, 1)");
    check_positive("cln_eps", cln_eps);
    check_choice("cln_reduction", cln_reduction, {"nearest", "mean"});
    check_choice("inverse_split", inverse_split, {"recorded", "rescore"});
    check_choice("positions", positions, {"latent", "tokens"});
    if (!(head_init_std >= 0.0)) throw ConfigError("head_init_std must be non-negative");
    check_positive("lr", lr);
    check_positive("batch", static_cast<double>(batch));
    for (const auto& [name, v] : {std::pair<const char*, double>{"lambda_self", lambda_self},
                                  {"lambda_cycle", lambda_cycle},
                                  {"lambda_content", lambda_content},
                                  {"lambda_style", lambda_style}}) {
        if (!(v >= 0.0)) throw ConfigError(std::string(name) + " must be non-negative");
    }
    if (target_style != "opposite" && parse_label(target_style) < 0) {
        throw ConfigError("target_style: '" + target_style + "' is neither 'opposite' nor a style label");
    }
    if (!(aug_epsilon >= 0.0)) throw ConfigError("aug_epsilon must be non-negative");
    check_positive("aug_samples", static_cast<double>(aug_samples));
    if (!(mix_ratio >= 0.0 && mix_ratio < 1.0)) throw ConfigError("mix_ratio must lie in [0, 1)");
    if (lm_order < 1) throw ConfigError("lm_order must be at least 1");
    if (!(lm_discount > 0.0 && lm_discount < 1.0)) throw ConfigError("lm_discount must lie in (0, 1)");
    if (synth_vocab < 50) throw ConfigError("synth_vocab must be at least 50");
}

std::filesystem::path Config::resolve(const std::string& path) const {
    const std::filesystem::path p(path);
    return p.is_absolute() ? p : workspace / p;
}

std::string Config::relative(const std::filesystem::path& path) const {
    std::error_code ec;
    const auto rel = std::filesystem::relative(path, workspace, ec);
    return ec || rel.empty() ? path.generic_string() : rel.generic_string();
}

ScorerConfig Config::scorer_config() const {
    ScorerConfig c;
    c.embed_dim = model_dim;
    c.hidden_dim = hidden_dim;
    c.attention_dim = attention_dim;
    c.embed_radius = embed_radius;
    return c;
}

ScorerTrainConfig Config::scorer_train_config() const {
    ScorerTrainConfig c;
    c.epochs = scorer_epochs;
    c.lr = scorer_lr;
    c.batch = scorer_batch;
    c.seed = seed;
    c.threads = threads;
    return c;
}

ModelConfig Config::model_config() const {
    ModelConfig c;
    c.flow.block = {model_dim, heads, ffn_dim};
    c.flow.chain_length = chain_length;
    c.flow.split = parse_split_mode(split);
    c.style_fraction = style_fraction;
    c.cln_eps = cln_eps;
    c.cln_reduction = parse_cln_reduction(cln_reduction);
    c.inverse_split = parse_inverse_split(inverse_split);
    c.positions = parse_position_source(positions);
    return c;
}

TrainConfig Config::train_config() const {
    TrainConfig c;
    c.epochs = epochs;
    c.batch = batch;
    c.lr = lr;
    c.loss.weights = {lambda_self, lambda_cycle, lambda_content, lambda_style};
    c.loss.straight_through = straight_through;
    c.seed = seed;
    c.threads = threads;
    c.max_steps = max_steps;
    c.checkpoint_every = checkpoint_every;
    c.checkpoint_path = resolve(model_checkpoint);
    c.metrics_path = resolve(metrics_csv);
    c.dump_path = resolve(dump_path);
    c.mix_ratio = mix_ratio;
    return c;
}

PerturbationConfig Config::perturbation_config() const {
    PerturbationConfig c;
    c.epsilon = aug_epsilon;
    c.samples = aug_samples;
    c.seed = seed;
    c.content_only = aug_content_only;
    return c;
}

}  // namespace styleflow
