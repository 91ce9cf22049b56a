#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "styleflow/data.hpp"
#include "styleflow/flow.hpp"
#include "styleflow/model.hpp"
#include "styleflow/rng.hpp"

namespace styleflow {

struct PerturbationConfig {
    double epsilon = 0.1;
    std::size_t samples = 4;
    std::uint64_t seed = 1;
    bool content_only = false;  // leave style positions unperturbed

    void validate() const;
};

/// values += epsilon * N(0, I). With `mask`, only rows where mask[i] is true
/// move (noise is still drawn for every entry, so draws do not depend on the
/// mask). The logdet is marked stale.
LatentState perturb_latent(const LatentState& z, double epsilon, Rng& rng, const std::vector<bool>& mask = {});

struct AugmentedSample {
    TokenSequence tokens;  // labeled with the source style
    std::size_t variant = 0;
    bool degenerate = false;  // decoded to padding/specials only
};

/// `samples` variants of `seq`, each from an independent perturbation of its
/// latent, inverted with the forward partitions and decoded.
std::vector<AugmentedSample> augment(const Model& model, const TokenSequence& seq, const PerturbationConfig& config,
                                     std::uint64_t stream = 0);

/// Sentence text of a sample; degenerate samples keep their special tokens.
std::string render_sample(const AugmentedSample& sample, const Vocabulary& vocab);

struct AugmentRecord {
    std::size_t source_line = 0;  // 1-based line of the source corpus
    std::size_t variant = 0;
    double epsilon = 0.0;
    bool label_preserved = false;
    int label = -1;
    std::string sentence;
    bool degenerate = false;
};

/// `label<TAB>sentence` rows.
void write_augmented_corpus(const std::filesystem::path& path, const std::vector<AugmentRecord>& records,
                            const std::vector<std::string>& style_names);
/// `source_line,variant_index,epsilon,label_preserved` rows.
void write_augment_sidecar(const std::filesystem::path& path, const std::vector<AugmentRecord>& records);

}  // namespace styleflow
