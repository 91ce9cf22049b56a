#include "styleflow/losses.hpp"

#include <cmath>
#include <string>

#include "styleflow/error.hpp"

namespace styleflow {

void LossWeights::validate() const {
    for (double w : {self, cycle, content, style}) {
        if (!std::isfinite(w) || w < 0.0) throw ConfigError("loss weights must be finite and nonnegative");
    }
}

LossBreakdown total_loss(double self_loss, double cycle_loss, double content_loss, double style_loss,
                         const LossWeights& weights) {
    weights.validate();
    LossBreakdown b{self_loss, cycle_loss, content_loss, style_loss, 0.0, weights};
    b.total = weights.self * self_loss + weights.cycle * cycle_loss + weights.content * content_loss +
              weights.style * style_loss;
    return b;
}

ad::Var reconstruction_nll(ad::Graph& g, ad::Var predicted, const TokenSequence& target, const Tensor& table) {
    std::vector<std::size_t> ids;
    for (TokenId id : target.ids) {
        if (id == kPad) continue;
        if (id < 0 || static_cast<std::size_t>(id) >= table.dim(0)) {
            throw VocabularyError("target id " + std::to_string(id) + " outside the embedding table");
        }
        ids.push_back(static_cast<std::size_t>(id));
    }
    if (predicted.shape().size() != 2 || predicted.shape()[0] != ids.size()) {
        throw ContractError("predicted rows " + shape_string(predicted.shape()) + " do not align with " +
                            std::to_string(ids.size()) + " target tokens");
    }
    Tensor table_t({table.dim(1), table.dim(0)});
    for (std::size_t v = 0; v < table.dim(0); ++v)
        for (std::size_t j = 0; j < table.dim(1); ++j) table_t(j, v) = table(v, j);
    ad::Var logits = ad::matmul(predicted, g.constant(std::move(table_t)));
    return ad::neg(ad::mean(ad::pick(ad::log_softmax(logits), std::move(ids))));
}

ad::Var content_loss(ad::Var z_c, ad::Var z_c_prime) {
    if (z_c.shape() != z_c_prime.shape()) {
        throw ContractError("content rows " + shape_string(z_c.shape()) + " and " + shape_string(z_c_prime.shape()) +
                            " differ in arity");
    }
    ad::Var diff = ad::sub(z_c, z_c_prime);
    return ad::scale(ad::sum(ad::mul(diff, diff)), 1.0 / static_cast<double>(z_c.shape()[0]));
}

ad::Var style_loss(ad::Graph& g, ad::Var embeddings, int target_style, const Scorer& scorer,
                   const std::vector<bool>& excluded) {
    if (target_style < 0 || target_style >= kNumStyles) throw ContractError("unknown style id");
    const auto out = scorer.forward(g, embeddings, excluded);
    return ad::neg(ad::sum(ad::pick(out.log_probs, {static_cast<std::size_t>(target_style)})));
}

namespace {

struct Encoded {
    ad::Var x;
    FlowTrace forward;
    Partition positions;
    ad::Var content;
    std::vector<bool> boundaries;
};

Encoded encode_graph(ad::Graph& g, const Model& model, const TokenSequence& seq) {
    Encoded e;
    e.boundaries = Scorer::boundary_mask(seq);
    e.x = g.constant(model.scorer.embed(seq));
    e.forward = chain_forward(g, model.chain, e.x, model.partitioner(e.boundaries));
    e.positions = style_positions(model, e.forward.output.value(), e.x.value(), e.boundaries);
    e.content = ad::gather_rows(e.forward.output, e.positions.content);
    return e;
}

// CLN(z_c, style) fused back at `positions` and inverted under `partitions`.
ad::Var restyle_inverse(ad::Graph& g, const Model& model, ad::Var z_c, int style, const Partition& positions,
                        std::span<const Partition> partitions) {
    ad::Var z_s = conditional_layer_norm(g, z_c, style, model.styles, positions, model.config.cln_reduction,
                                         model.config.cln_eps);
    return chain_inverse(g, model.chain, fuse(g, z_c, z_s, positions), partitions).output;
}

}  // namespace

ad::Var self_loss(ad::Graph& g, const Model& model, const TokenSequence& seq) {
    const TokenSequence s = strip_padding(seq);
    model.styles.check_style(s.label);
    const Encoded e = encode_graph(g, model, s);
    ad::Var rebuilt = restyle_inverse(g, model, e.content, s.label, e.positions, e.forward.partitions);
    return reconstruction_nll(g, rebuilt, s, model.embedding_table());
}

SampleLosses sample_losses(ad::Graph& g, const Model& model, const TokenSequence& seq, int target_style,
                           const LossOptions& options) {
    options.weights.validate();
    const TokenSequence s = strip_padding(seq);
    model.styles.check_style(s.label);
    model.styles.check_style(target_style);
    const Tensor& table = model.embedding_table();
    const Encoded e = encode_graph(g, model, s);

    SampleLosses out;
    out.positions = e.positions;
    ad::Var rebuilt = restyle_inverse(g, model, e.content, s.label, e.positions, e.forward.partitions);
    out.self_loss = reconstruction_nll(g, rebuilt, s, table);

    // Transfer to the target style without discretizing.
    ad::Var z_t = conditional_layer_norm(g, e.content, target_style, model.styles, e.positions,
                                         model.config.cln_reduction, model.config.cln_eps);
    ad::Var fused = fuse(g, e.content, z_t, e.positions);
    ad::Var transferred = model.config.inverse_split == InverseSplit::recorded
                              ? chain_inverse(g, model.chain, fused, e.forward.partitions).output
                              : chain_inverse(g, model.chain, fused, model.partitioner(e.boundaries)).output;
    if (options.straight_through) {
        const Tensor& cont = transferred.value();
        const std::vector<TokenId> ids = decode_tokens(cont, table);
        Tensor offset(cont.shape());
        for (std::size_t r = 0; r < ids.size(); ++r) {
            auto e_row = table.row(static_cast<std::size_t>(ids[r]));
            for (std::size_t j = 0; j < cont.dim(1); ++j) offset(r, j) = e_row[j] - cont(r, j);
        }
        transferred = ad::add(transferred, g.constant(std::move(offset)));
    }
    out.style_loss = style_loss(g, transferred, target_style, model.scorer, e.boundaries);

    // Re-encode the transferred rows and map back to the source style.
    const FlowTrace again = chain_forward(g, model.chain, transferred, model.partitioner(e.boundaries));
    ad::Var content_again = ad::gather_rows(again.output, e.positions.content);
    out.content_loss = content_loss(e.content, content_again);
    ad::Var cycled = restyle_inverse(g, model, content_again, s.label, e.positions, again.partitions);
    out.cycle_loss = reconstruction_nll(g, cycled, s, table);

    const LossWeights& w = options.weights;
    out.total = ad::add(ad::add(ad::add(ad::scale(out.self_loss, w.self), ad::scale(out.cycle_loss, w.cycle)),
                                ad::scale(out.content_loss, w.content)),
                        ad::scale(out.style_loss, w.style));
    return out;
}

LossBreakdown breakdown(const SampleLosses& losses, const LossWeights& weights) {
    LossBreakdown b = total_loss(losses.self_loss.value().item(), losses.cycle_loss.value().item(),
                                 losses.content_loss.value().item(), losses.style_loss.value().item(), weights);
    b.total = losses.total.value().item();
    return b;
}

}  // namespace styleflow
