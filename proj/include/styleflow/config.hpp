#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "styleflow/augment.hpp"
#include "styleflow/model.hpp"
#include "styleflow/scorer.hpp"
#include "styleflow/train.hpp"

namespace styleflow {

// Flat run configuration, one `key = value` per line with `#` comments.
// Relative paths resolve against `workspace`.
struct Config {
    std::filesystem::path workspace = ".";
    std::uint64_t seed = 1;
    std::size_t threads = 1;

    // data
    std::string train_data = "data/train.tsv";
    std::string test_data = "data/test.tsv";
    std::string eval_data;  // held-out corpus for the evaluation scorer and the LM
    std::string references;
    std::string augment_data;  // extra training rows mixed in at mix_ratio

    // artifacts
    std::string scorer_checkpoint = "out/scorer.sflow";
    std::string eval_scorer_checkpoint = "out/eval_scorer.sflow";
    std::string model_checkpoint = "out/model.sflow";
    std::string metrics_csv = "out/metrics.csv";
    std::string dump_path = "out/nonfinite.json";
    std::string transfer_output = "out/transfer.tsv";
    std::string augment_output = "out/augmented.tsv";
    std::string report = "out/report.txt";

    // scorer
    std::size_t hidden_dim = 256;
    std::size_t attention_dim = 256;
    double embed_radius = 4.0;
    std::size_t scorer_epochs = 5;
    double scorer_lr = 3e-3;
    std::size_t scorer_batch = 16;

    // model
    std::size_t model_dim = 256;
    std::size_t heads = 4;
    std::size_t ffn_dim = 256;
    std::size_t chain_length = 8;
    std::string split = "attention";
    double style_fraction = 0.25;
    double cln_eps = 1e-6;
    std::string cln_reduction = "nearest";
    std::string inverse_split = "recorded";
    std::string positions = "tokens";
    double head_init_std = 0.0;

    // training
    double lr = 1e-3;
    std::size_t batch = 32;
    std::size_t epochs = 10;
    std::size_t max_steps = 0;
    std::size_t checkpoint_every = 0;
    double lambda_self = 0.5;
    double lambda_cycle = 0.5;
    double lambda_content = 1.0;
    double lambda_style = 1.0;
    bool straight_through = false;
    bool resume = false;

    // transfer
    std::string target_style = "opposite";
    bool replace_style = true;

    // augmentation
    double aug_epsilon = 0.1;
    std::size_t aug_samples = 4;
    bool aug_content_only = false;
    double mix_ratio = 0.25;

    // evaluation
    std::size_t lm_order = 5;
    double lm_discount = 0.75;

    // synthetic corpus
    std::size_t synth_per_style = 1000;
    std::size_t synth_test_per_style = 100;
    std::size_t synth_vocab = 200;

    /// ConfigError naming the key on a value outside its documented range.
    void validate() const;

    /// `path` under the workspace unless absolute.
    std::filesystem::path resolve(const std::string& path) const;
    /// `path` relative to the workspace, for recording in outputs.
    std::string relative(const std::filesystem::path& path) const;

    ScorerConfig scorer_config() const;
    ScorerTrainConfig scorer_train_config() const;
    ModelConfig model_config() const;
    TrainConfig train_config() const;
    PerturbationConfig perturbation_config() const;
};

struct ConfigKey {
    std::string name;
    std::string help;
    std::vector<std::string> commands;  // commands that read the key; empty: all
};

/// Every key the parser accepts, in file order.
const std::vector<ConfigKey>& config_keys();
/// Keys read by `command` (global keys included).
std::vector<const ConfigKey*> keys_for(std::string_view command);

/// Sets one key from its text form. ConfigError on an unknown key or a
/// malformed value.
void set_config_value(Config& config, std::string_view key, std::string_view value);
std::string get_config_value(const Config& config, std::string_view key);

/// Applies `key = value` lines onto `config`. ConfigError names the line.
void parse_config_text(Config& config, std::string_view text, std::string_view source_name = "<config>");
/// MissingFileError if `path` does not exist. `workspace` defaults to the
/// directory holding the file.
Config load_config(const std::filesystem::path& path);
/// Every key as `key = value` lines.
std::string format_config(const Config& config);

}  // namespace styleflow
