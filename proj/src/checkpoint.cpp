#include "styleflow/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "json.hpp"
#include "styleflow/error.hpp"

namespace styleflow {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

using nlohmann::json;

constexpr char kMagic[] = "SFLOW1";
constexpr std::size_t kMagicSize = 6;

struct Blob {
    json meta;
    std::vector<std::pair<std::string, Tensor>> tensors;
};

void write_blob(const std::filesystem::path& path, const Blob& blob) {
    json meta = blob.meta;
    meta["format"] = kMagic;
    meta["version"] = kCheckpointVersion;
    json entries = json::array();
    for (const auto& [name, t] : blob.tensors) entries.push_back({{"name", name}, {"shape", t.shape()}});
    meta["tensors"] = std::move(entries);
    const std::string header = meta.dump();

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write checkpoint " + path.string());
        out.write(kMagic, kMagicSize);
        const std::uint64_t n = header.size();
        out.write(reinterpret_cast<const char*>(&n), sizeof n);
        out.write(header.data(), static_cast<std::streamsize>(header.size()));
        for (const auto& [name, t] : blob.tensors) {
            out.write(reinterpret_cast<const char*>(t.data().data()),
                      static_cast<std::streamsize>(t.size() * sizeof(double)));
        }
        if (!out) throw IoError("short write to checkpoint " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

json read_header(std::ifstream& in, const std::filesystem::path& path) {
    char magic[kMagicSize];
    if (!in.read(magic, kMagicSize) || std::memcmp(magic, kMagic, kMagicSize) != 0) {
        throw CheckpointVersionError(path.string() + " is not an SFLOW1 checkpoint");
    }
    std::uint64_t n = 0;
    if (!in.read(reinterpret_cast<char*>(&n), sizeof n) || n > (std::uint64_t{1} << 32)) {
        throw IoError("truncated checkpoint header in " + path.string());
    }
    std::string text(n, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(n))) throw IoError("truncated checkpoint header in " + path.string());
    json meta;
    try {
        meta = json::parse(text);
    } catch (const json::exception& e) {
        throw IoError("unreadable checkpoint header in " + path.string() + ": " + e.what());
    }
    const int version = meta.value("version", 0);
    if (version != kCheckpointVersion) {
        throw CheckpointVersionError("checkpoint " + path.string() + " has version " + std::to_string(version) +
                                     ", expected " + std::to_string(kCheckpointVersion));
    }
    return meta;
}

std::ifstream open_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw MissingFileError("checkpoint not found: " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    return in;
}

Blob read_blob(const std::filesystem::path& path, std::string_view expected_kind) {
    std::ifstream in = open_checkpoint(path);
    Blob blob;
    blob.meta = read_header(in, path);
    const std::string kind = blob.meta.value("kind", "");
    if (kind != expected_kind) {
        throw CheckpointVersionError(path.string() + " holds a " + kind + " checkpoint, expected " +
                                     std::string(expected_kind));
    }
    for (const auto& entry : blob.meta.at("tensors")) {
        Tensor t(entry.at("shape").get<Shape>());
        if (!in.read(reinterpret_cast<char*>(t.data().data()), static_cast<std::streamsize>(t.size() * sizeof(double)))) {
            throw IoError("truncated tensor data in " + path.string());
        }
        blob.tensors.emplace_back(entry.at("name").get<std::string>(), std::move(t));
    }
    if (in.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes in " + path.string());
    return blob;
}

json scorer_config_json(const ScorerConfig& c) {
    return {{"embed_dim", c.embed_dim}, {"hidden_dim", c.hidden_dim}, {"attention_dim", c.attention_dim},
            {"embed_radius", c.embed_radius}};
}

ScorerConfig scorer_config_from(const json& j) {
    ScorerConfig c;
    c.embed_dim = j.at("embed_dim");
    c.hidden_dim = j.at("hidden_dim");
    c.attention_dim = j.at("attention_dim");
    c.embed_radius = j.at("embed_radius");
    return c;
}

json model_config_json(const ModelConfig& c) {
    return {{"model_dim", c.flow.block.model_dim},
            {"heads", c.flow.block.heads},
            {"ffn_dim", c.flow.block.ffn_dim},
            {"chain_length", c.flow.chain_length},
            {"split", std::string(to_string(c.flow.split))},
            {"style_fraction", c.style_fraction},
            {"cln_eps", c.cln_eps},
            {"cln_reduction", std::string(to_string(c.cln_reduction))},
            {"inverse_split", std::string(to_string(c.inverse_split))},
            {"positions", std::string(to_string(c.positions))}};
}

ModelConfig model_config_from(const json& j) {
    ModelConfig c;
    c.flow.block.model_dim = j.at("model_dim");
    c.flow.block.heads = j.at("heads");
    c.flow.block.ffn_dim = j.at("ffn_dim");
    c.flow.chain_length = j.at("chain_length");
    c.flow.split = parse_split_mode(j.at("split").get<std::string>());
    c.style_fraction = j.at("style_fraction");
    c.cln_eps = j.at("cln_eps");
    c.cln_reduction = parse_cln_reduction(j.at("cln_reduction").get<std::string>());
    c.inverse_split = parse_inverse_split(j.at("inverse_split").get<std::string>());
    c.positions = parse_position_source(j.at("positions").get<std::string>());
    return c;
}

void restore(std::vector<Parameter*> params, std::map<std::string, Tensor>& stored, const std::string& source) {
    for (Parameter* p : params) {
        auto it = stored.find(p->name);
        if (it == stored.end()) throw CheckpointVersionError(source + " lacks tensor '" + p->name + "'");
        if (it->second.shape() != p->value.shape()) {
            throw CheckpointVersionError(source + ": tensor '" + p->name + "' has shape " +
                                         shape_string(it->second.shape()) + ", expected " +
                                         shape_string(p->value.shape()));
        }
        p->value = std::move(it->second);
        stored.erase(it);
    }
}

Scorer scorer_from(const json& meta, std::size_t vocab_size, std::map<std::string, Tensor>& stored,
                   const std::string& source) {
    Scorer s = Scorer::initialize(vocab_size, scorer_config_from(meta.at("scorer_config")), 0);
    restore(s.parameters(), stored, source);
    s.freeze();
    return s;
}

}  // namespace

void save_scorer(const std::filesystem::path& path, const Scorer& scorer, const Vocabulary& vocab,
                 std::uint64_t seed) {
    Blob blob;
    blob.meta = {{"kind", "scorer"}, {"step", 0}, {"seed", seed}, {"vocab", vocab.tokens()},
                 {"scorer_config", scorer_config_json(scorer.config())}};
    for (const Parameter* p : scorer.parameters()) blob.tensors.emplace_back(p->name, p->value);
    write_blob(path, blob);
}

ScorerBundle load_scorer(const std::filesystem::path& path) {
    Blob blob = read_blob(path, "scorer");
    std::map<std::string, Tensor> stored(blob.tensors.begin(), blob.tensors.end());
    Vocabulary vocab = Vocabulary::from_tokens(blob.meta.at("vocab").get<std::vector<std::string>>());
    Scorer scorer = scorer_from(blob.meta, vocab.size(), stored, path.string());
    return {std::move(vocab), std::move(scorer)};
}

void save_model(const std::filesystem::path& path, const Model& model, const TrainingState& state) {
    Blob blob;
    blob.meta = {{"kind", "model"},
                 {"step", state.step},
                 {"seed", state.seed},
                 {"rng_state", state.rng_state},
                 {"adam_steps", state.adam_steps},
                 {"vocab", model.vocab.tokens()},
                 {"scorer_config", scorer_config_json(model.scorer.config())},
                 {"model_config", model_config_json(model.config)},
                 {"has_moments", !state.moments.empty()}};
    for (const Parameter* p : model.scorer.parameters()) blob.tensors.emplace_back(p->name, p->value);
    auto trainable = const_cast<Model&>(model).trainable();
    for (const Parameter* p : trainable) blob.tensors.emplace_back(p->name, p->value);
    if (!state.moments.empty()) {
        if (state.moments.size() != trainable.size()) throw ContractError("optimizer state does not match the model");
        for (std::size_t k = 0; k < trainable.size(); ++k) {
            blob.tensors.emplace_back("adam.m/" + trainable[k]->name, state.moments[k].m);
            blob.tensors.emplace_back("adam.v/" + trainable[k]->name, state.moments[k].v);
        }
    }
    write_blob(path, blob);
}

std::pair<Model, TrainingState> load_model(const std::filesystem::path& path) {
    Blob blob = read_blob(path, "model");
    const std::string source = path.string();
    std::map<std::string, Tensor> stored(blob.tensors.begin(), blob.tensors.end());
    Vocabulary vocab = Vocabulary::from_tokens(blob.meta.at("vocab").get<std::vector<std::string>>());
    Scorer scorer = scorer_from(blob.meta, vocab.size(), stored, source);
    Model model = Model::create(std::move(vocab), std::move(scorer), model_config_from(blob.meta.at("model_config")), 0);
    auto trainable = model.trainable();
    restore(trainable, stored, source);

    TrainingState state;
    state.step = blob.meta.at("step");
    state.seed = blob.meta.at("seed");
    state.rng_state = blob.meta.value("rng_state", "");
    state.adam_steps = blob.meta.value("adam_steps", std::int64_t{0});
    if (blob.meta.value("has_moments", false)) {
        for (const Parameter* p : trainable) {
            auto m = stored.find("adam.m/" + p->name);
            auto v = stored.find("adam.v/" + p->name);
            if (m == stored.end() || v == stored.end()) {
                throw CheckpointVersionError(source + " lacks optimizer state for '" + p->name + "'");
            }
            state.moments.push_back({std::move(m->second), std::move(v->second)});
            stored.erase(m);
            stored.erase(v);
        }
    }
    if (!stored.empty()) throw CheckpointVersionError(source + " has unexpected tensor '" + stored.begin()->first + "'");
    return {std::move(model), std::move(state)};
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
    std::ifstream in = open_checkpoint(path);
    const json meta = read_header(in, path);
    CheckpointInfo info;
    info.kind = meta.value("kind", "");
    info.version = meta.value("version", 0);
    info.step = meta.value("step", std::uint64_t{0});
    info.seed = meta.value("seed", std::uint64_t{0});
    for (const auto& e : meta.at("tensors")) info.tensor_names.push_back(e.at("name"));
    return info;
}

}  // namespace styleflow
