#include "styleflow/augment.hpp"

#include <cmath>
#include <fstream>

#include "styleflow/error.hpp"

namespace styleflow {

void PerturbationConfig::validate() const {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ConfigError("perturbation scale must be nonnegative");
    if (samples == 0) throw ConfigError("augmentation needs at least one sample per input");
}

LatentState perturb_latent(const LatentState& z, double epsilon, Rng& rng, const std::vector<bool>& mask) {
    if (!(epsilon >= 0.0)) throw ConfigError("perturbation scale must be nonnegative");
    const std::size_t rows = z.values.dim(0), cols = z.values.dim(1);
    if (!mask.empty() && mask.size() != rows) throw ContractError("perturbation mask length does not match latent");
    LatentState out = z;
    const Tensor noise = normal_tensor({rows, cols}, 1.0, rng);
    if (epsilon == 0.0) return out;
    for (std::size_t r = 0; r < rows; ++r) {
        if (!mask.empty() && !mask[r]) continue;
        for (std::size_t c = 0; c < cols; ++c) out.values(r, c) += epsilon * noise(r, c);
    }
    out.logdet_stale = true;
    return out;
}

std::vector<AugmentedSample> augment(const Model& model, const TokenSequence& seq, const PerturbationConfig& config,
                                     std::uint64_t stream) {
    config.validate();
    const TokenSequence source = strip_padding(seq);
    const Tensor x = model.scorer.embed(source);
    const std::vector<bool> fixed = Scorer::boundary_mask(source);
    const LatentState z = chain_forward(model.chain, x, model.partitioner(fixed));
    std::vector<bool> mask;
    if (config.content_only) {
        const Partition positions = style_positions(model, z.values, x, fixed);
        mask.assign(z.values.dim(0), true);
        for (std::size_t s : positions.style) mask[s] = false;
    }
    std::vector<AugmentedSample> out;
    out.reserve(config.samples);
    for (std::size_t v = 0; v < config.samples; ++v) {
        Rng rng(derive_seed(config.seed, stream, v));
        const LatentState moved = perturb_latent(z, config.epsilon, rng, mask);
        AugmentedSample sample;
        sample.variant = v;
        sample.tokens.label = source.label;
        sample.tokens.ids = decode_tokens(chain_inverse(model.chain, moved), model.embedding_table());
        sample.degenerate = true;
        for (TokenId id : sample.tokens.ids)
            if (!Vocabulary::is_special(id)) sample.degenerate = false;
        out.push_back(std::move(sample));
    }
    return out;
}

std::string render_sample(const AugmentedSample& sample, const Vocabulary& vocab) {
    if (!sample.degenerate) return detokenize(sample.tokens, vocab);
    std::string out;
    for (TokenId id : sample.tokens.ids) {
        if (!out.empty()) out += ' ';
        out += vocab.token(id);
    }
    return out;
}

void write_augmented_corpus(const std::filesystem::path& path, const std::vector<AugmentRecord>& records,
                            const std::vector<std::string>& style_names) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& r : records) {
        const std::string label = r.label >= 0 && static_cast<std::size_t>(r.label) < style_names.size()
                                      ? style_names[static_cast<std::size_t>(r.label)]
                                      : std::to_string(r.label);
        out << label << '\t' << r.sentence << '\n';
    }
}

void write_augment_sidecar(const std::filesystem::path& path, const std::vector<AugmentRecord>& records) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "source_line,variant_index,epsilon,label_preserved\n";
    for (const auto& r : records) {
        out << r.source_line << ',' << r.variant << ',' << r.epsilon << ',' << (r.label_preserved ? 1 : 0) << '\n';
    }
}

}  // namespace styleflow
