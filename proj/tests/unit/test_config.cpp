#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "styleflow/config.hpp"
#include "styleflow/error.hpp"

using namespace styleflow;

namespace {

std::string message_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("config text parses, with comments and blank lines") {
    Config c;
    parse_config_text(c, "# toy\nmodel_dim = 64\n\n heads=8  # inline\nsplit = parity\nstraight_through = true\n");
    CHECK(c.model_dim == 64);
    CHECK(c.heads == 8);
    CHECK(c.split == "parity");
    CHECK(c.straight_through);
    CHECK(get_config_value(c, "model_dim") == "64");
}

TEST_CASE("unknown keys and malformed values name the line") {
    Config c;
    const std::string unknown = message_of([&] { parse_config_text(c, "seed = 2\nmodel_dimm = 3\n", "x.cfg"); });
    CHECK(unknown.find("x.cfg:2") != std::string::npos);
    CHECK(unknown.find("model_dimm") != std::string::npos);
    CHECK_THROWS_AS(parse_config_text(c, "epochs = -1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text(c, "lr = fast\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text(c, "resume = maybe\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text(c, "just words\n"), ConfigError);
    CHECK_THROWS_AS(set_config_value(c, "nope", "1"), ConfigError);
}

TEST_CASE("validation rejects out-of-range values") {
    auto bad = [](const char* key, const char* value) {
        Config c;
        set_config_value(c, key, value);
        return message_of([&] { c.validate(); });
    };
    CHECK_NOTHROW(Config{}.validate());
    CHECK(bad("style_fraction", "1.0").find("style_fraction") != std::string::npos);
    CHECK(bad("heads", "3").find("divisible") != std::string::npos);
    CHECK(bad("lambda_style", "-1").find("lambda_style") != std::string::npos);
    CHECK(bad("aug_epsilon", "-0.1").find("aug_epsilon") != std::string::npos);
    CHECK(bad("mix_ratio", "1").find("mix_ratio") != std::string::npos);
    CHECK(bad("target_style", "sarcastic").find("target_style") != std::string::npos);
    CHECK(!bad("split", "diagonal").empty());
    CHECK(!bad("lr", "0").empty());
}

TEST_CASE("every key round-trips through its text form") {
    const Config defaults;
    const std::string text = format_config(defaults);
    Config again;
    parse_config_text(again, text);
    CHECK(format_config(again) == text);
}

TEST_CASE("keys per command") {
    auto names = [](std::string_view cmd) {
        std::vector<std::string> out;
        for (const ConfigKey* k : keys_for(cmd)) out.push_back(k->name);
        return out;
    };
    auto has = [](const std::vector<std::string>& v, const std::string& k) {
        return std::find(v.begin(), v.end(), k) != v.end();
    };
    const auto train = names("train");
    CHECK(has(train, "seed"));
    CHECK(has(train, "lambda_cycle"));
    CHECK_FALSE(has(train, "aug_epsilon"));
    const auto augment = names("augment");
    CHECK(has(augment, "aug_epsilon"));
    CHECK_FALSE(has(augment, "lambda_cycle"));
    CHECK(keys_for("train").size() < config_keys().size());
}

TEST_CASE("load_config resolves the workspace against the file") {
    const auto dir = std::filesystem::temp_directory_path() / "styleflow_config" / "cfg";
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "a.cfg") << "workspace = ../runs\nseed = 4\n";
    const Config c = load_config(dir / "a.cfg");
    CHECK(c.seed == 4);
    CHECK(c.workspace == dir / "../runs");
    CHECK(c.resolve("data/x.tsv") == dir / "../runs" / "data/x.tsv");
    CHECK(c.resolve("/abs/x.tsv") == std::filesystem::path("/abs/x.tsv"));

    std::ofstream(dir / "b.cfg") << "seed = 5\n";
    CHECK(load_config(dir / "b.cfg").workspace == dir);
    CHECK_THROWS_AS(load_config(dir / "missing.cfg"), MissingFileError);
}
