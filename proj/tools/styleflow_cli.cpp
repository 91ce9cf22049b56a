// styleflow: scorer pretraining, flow training, transfer, augmentation and
// evaluation from one flat config file.
//
//   styleflow --config run.cfg train-scorer
//   styleflow --config run.cfg train --epochs 3
//   styleflow --config run.cfg transfer --input data/test.tsv --target opposite
//
// Failures print one line `error: <category>: <message>` and exit 2.

#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "styleflow/commands.hpp"
#include "styleflow/error.hpp"

namespace {

using namespace styleflow;

struct Overrides {
    std::map<std::string, std::string> values;
};

std::string key_listing(std::string_view command) {
    std::string out = "Config keys read by " + std::string(command) + ":\n";
    for (const ConfigKey* k : keys_for(command)) {
        std::string name = k->name;
        name.resize(std::max<std::size_t>(name.size(), 24), ' ');
        out += "  " + name + k->help + "\n";
    }
    return out;
}

// Every key the command reads can also be given as --<key>; seed and threads
// are global flags.
void add_key_options(CLI::App* sub, std::string_view command, Overrides& ov) {
    for (const ConfigKey* k : keys_for(command)) {
        if (k->name == "seed" || k->name == "threads") continue;
        const std::string name = k->name;
        sub->add_option_function<std::string>(
               "--" + name, [&ov, name](const std::string& v) { ov.values[name] = v; }, k->help)
            ->group("Config overrides");
    }
    sub->footer(key_listing(command));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Attention-aware normalizing-flow text style transfer"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    Overrides ov;
    app.add_option("--config", config_path, "flat key = value config file");
    app.add_option("--seed", seed, "override the config seed");
    app.add_option("--threads", threads, "override the config thread count");

    auto* synth = app.add_subcommand("synth", "write the synthetic train/test/held-out corpora");
    auto* train_scorer = app.add_subcommand("train-scorer", "train the attention scorer (and the evaluation scorer)");
    auto* train = app.add_subcommand("train", "train the flow model");
    auto* transfer = app.add_subcommand("transfer", "transfer a corpus to a target style");
    auto* augment = app.add_subcommand("augment", "augment a corpus by latent perturbation");
    auto* eval = app.add_subcommand("eval", "score a transfer file");

    std::string input;
    std::optional<std::string> target;
    transfer->add_option("--input", input, "corpus to transfer (default: test_data)");
    transfer->add_option("--target", target, "opposite, or a style label (default: target_style)");
    augment->add_option("--input", input, "corpus to augment (default: test_data)");
    eval->add_option("--input", input, "transfer file to score (default: transfer_output)");

    add_key_options(synth, "synth", ov);
    add_key_options(train_scorer, "train-scorer", ov);
    add_key_options(train, "train", ov);
    add_key_options(transfer, "transfer", ov);
    add_key_options(augment, "augment", ov);
    add_key_options(eval, "eval", ov);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 2;
    }

    try {
        Config config = config_path.empty() ? Config{} : load_config(config_path);
        for (const auto& [key, value] : ov.values) set_config_value(config, key, value);
        if (seed) config.seed = *seed;
        if (threads) config.threads = *threads;

        if (synth->parsed()) cmd_synth(config, std::cout);
        if (train_scorer->parsed()) cmd_train_scorer(config, std::cout);
        if (train->parsed()) cmd_train(config, std::cout);
        if (transfer->parsed()) cmd_transfer(config, input, std::cout, target);
        if (augment->parsed()) cmd_augment(config, input, std::cout);
        if (eval->parsed()) cmd_eval(config, input, std::cout);
    } catch (const Error& e) {
        std::cerr << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: io: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
