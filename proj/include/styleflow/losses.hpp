#pragma once

#include "styleflow/autodiff.hpp"
#include "styleflow/data.hpp"
#include "styleflow/model.hpp"
#include "styleflow/scorer.hpp"
#include "styleflow/tensor.hpp"

namespace styleflow {

/// Weights of the self, cycle, content and style terms.
struct LossWeights {
    double self = 0.5;
    double cycle = 0.5;
    double content = 1.0;
    double style = 1.0;

    /// ConfigError on any negative or non-finite weight.
    void validate() const;
};

struct LossBreakdown {
    double self_loss = 0.0;
    double cycle_loss = 0.0;
    double content_loss = 0.0;
    double style_loss = 0.0;
    double total = 0.0;
    LossWeights weights;
};

LossBreakdown total_loss(double self_loss, double cycle_loss, double content_loss, double style_loss,
                         const LossWeights& weights = {});

/// Mean negative log-likelihood of the non-padding target ids under tied
/// inner-product logits (predicted rows against every embedding row).
ad::Var reconstruction_nll(ad::Graph& g, ad::Var predicted, const TokenSequence& target, const Tensor& table);

/// Squared L2 distance between matching rows, averaged over rows.
ad::Var content_loss(ad::Var z_c, ad::Var z_c_prime);

/// -log p(target | rows) under the frozen scorer; `excluded` rows get no
/// attention.
ad::Var style_loss(ad::Graph& g, ad::Var embeddings, int target_style, const Scorer& scorer,
                   const std::vector<bool>& excluded = {});

struct LossOptions {
    LossWeights weights;
    /// Discretize the transferred sentence in the forward pass while passing
    /// gradients straight through to the continuous rows.
    bool straight_through = false;
};

struct SampleLosses {
    ad::Var self_loss;
    ad::Var cycle_loss;
    ad::Var content_loss;
    ad::Var style_loss;
    ad::Var total;
    Partition positions;
};

/// Self reconstruction through the source-style CLN only.
ad::Var self_loss(ad::Graph& g, const Model& model, const TokenSequence& seq);

/// All four terms for one sentence, with `target_style` as the transfer
/// direction of the cycle, content and style terms.
SampleLosses sample_losses(ad::Graph& g, const Model& model, const TokenSequence& seq, int target_style,
                           const LossOptions& options = {});

LossBreakdown breakdown(const SampleLosses& losses, const LossWeights& weights);

}  // namespace styleflow
