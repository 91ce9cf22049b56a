#pragma once

#include <cstdint>
#include <vector>

#include "styleflow/autodiff.hpp"
#include "styleflow/data.hpp"
#include "styleflow/partition.hpp"
#include "styleflow/rng.hpp"
#include "styleflow/tensor.hpp"

namespace styleflow {

/// Energy offset that removes a position from the attention softmax.
inline constexpr double kExcludedEnergy = 1e9;

struct ScorerConfig {
    std::size_t embed_dim = 256;
    std::size_t hidden_dim = 256;
    std::size_t attention_dim = 256;
    /// Embedding rows are kept on a sphere of this radius, so nearest-neighbour
    /// decoding (Euclidean) and tied-softmax decoding (inner product) agree.
    double embed_radius = 4.0;
};

/// Gated recurrent unit, one direction. Gates: z (update), r (reset).
struct GruParams {
    Parameter input_w;   // [d, 3H]  columns: z | r | candidate
    Parameter input_b;   // [3H]
    Parameter gate_u;    // [H, 2H]  recurrent weights of z | r
    Parameter cand_u;    // [H, H]

    std::vector<Parameter*> parameters();
};

/// Bidirectional GRU attention scorer with a style head. Attention energies
/// see the recurrent states and the embedding of each token; the head
/// classifies the attention-weighted mean embedding. Owns the token embedding
/// table that the flow model also uses.
class Scorer {
public:
    struct Output {
        ad::Var weights;    // [1, n] attention over the n input rows
        ad::Var log_probs;  // [1, styles]
    };

    /// Untrained scorer: random recurrent weights, zero attention vector and
    /// zero head, so attention is uniform and class probabilities are equal.
    static Scorer initialize(std::size_t vocab_size, const ScorerConfig& config, std::uint64_t seed);

    /// Differentiable path over embedding rows (padding already removed).
    /// Rows flagged in `excluded` still feed the recurrent states but receive
    /// zero attention; if every row is flagged the mask is ignored.
    Output forward(ad::Graph& g, ad::Var rows, const std::vector<bool>& excluded = {}) const;

    /// Sentence-boundary positions (bos/eos). They sit in every sentence, so
    /// the scorer never attends to them and splits keep them as content.
    static std::vector<bool> boundary_mask(const TokenSequence& seq);

    /// Embedding rows for every position of `seq` (padding included).
    Tensor embed(const TokenSequence& seq) const;

    /// Attention weights, one per position; padding and boundary positions get 0.
    std::vector<double> score_tokens(const TokenSequence& seq) const;
    /// Attention weights over continuous rows. Padding rows are dropped before
    /// the recurrence; excluded rows are kept but get weight 0.
    std::vector<double> score_rows(const Tensor& rows, const std::vector<bool>& padding = {},
                                   const std::vector<bool>& excluded = {}) const;

    std::vector<double> classify(const TokenSequence& seq) const;
    std::vector<double> classify(const Tensor& rows, const std::vector<bool>& padding = {},
                                 const std::vector<bool>& excluded = {}) const;
    int predict(const TokenSequence& seq) const;

    /// Project every embedding row onto the configured sphere.
    void normalize_embeddings();
    void freeze();
    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;

    const ScorerConfig& config() const noexcept { return config_; }
    std::size_t vocab_size() const noexcept { return embedding.value.dim(0); }

    Parameter embedding;  // [V, d]
    GruParams forward_gru;
    GruParams backward_gru;
    Parameter att_w;  // [2H + d, A]  over [forward state | backward state | embedding]
    Parameter att_b;  // [A]
    Parameter att_v;  // [A, 1]
    Parameter cls_w;  // [d, styles]  over the attention-pooled embedding
    Parameter cls_b;  // [styles]

private:
    ScorerConfig config_;
};

struct ScorerTrainConfig {
    std::size_t epochs = 5;
    double lr = 3e-3;
    std::size_t batch = 16;
    double heldout_fraction = 0.1;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
};

struct ScorerTrainReport {
    std::vector<double> epoch_losses;  // mean training loss per epoch
    double heldout_accuracy = 0.0;
    std::size_t train_rows = 0;
    std::size_t heldout_rows = 0;
};

/// Supervised training of `scorer` (embeddings included) on labeled rows. A
/// deterministic held-out split is scored after training. Requires both style
/// labels to be present. The scorer is frozen on return.
ScorerTrainReport train_scorer(Scorer& scorer, const std::vector<CorpusRow>& rows,
                               const ScorerTrainConfig& config);

/// Classification accuracy of the scorer over labeled rows.
double scorer_accuracy(const Scorer& scorer, const std::vector<CorpusRow>& rows);

}  // namespace styleflow
