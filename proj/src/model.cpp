#include "styleflow/model.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "styleflow/error.hpp"
#include "styleflow/nn.hpp"

namespace styleflow {

StyleTable StyleTable::initialize(std::size_t model_dim, std::size_t styles, std::uint64_t seed, double jitter) {
    StyleTable t;
    Rng rng(derive_seed(seed, 0x57e1));
    for (std::size_t s = 0; s < styles; ++s) {
        Tensor g({model_dim}), b({model_dim});
        g.fill(1.0);
        if (jitter > 0.0) {
            const Tensor ng = normal_tensor({model_dim}, jitter, rng);
            const Tensor nb = normal_tensor({model_dim}, jitter, rng);
            for (std::size_t i = 0; i < model_dim; ++i) {
                g[i] += ng[i];
                b[i] += nb[i];
            }
        }
        t.gamma.emplace_back("styles.gamma" + std::to_string(s), std::move(g));
        t.beta.emplace_back("styles.beta" + std::to_string(s), std::move(b));
    }
    return t;
}

void StyleTable::check_style(int style) const {
    if (style < 0 || static_cast<std::size_t>(style) >= gamma.size()) {
        throw ContractError("unknown style id " + std::to_string(style));
    }
}

std::vector<Parameter*> StyleTable::parameters() {
    std::vector<Parameter*> out;
    for (std::size_t s = 0; s < gamma.size(); ++s) {
        out.push_back(&gamma[s]);
        out.push_back(&beta[s]);
    }
    return out;
}

std::string_view to_string(ClnReduction v) { return v == ClnReduction::nearest ? "nearest" : "mean"; }
std::string_view to_string(InverseSplit v) { return v == InverseSplit::recorded ? "recorded" : "rescore"; }
std::string_view to_string(PositionSource v) { return v == PositionSource::latent ? "latent" : "tokens"; }

ClnReduction parse_cln_reduction(std::string_view text) {
    if (text == "nearest") return ClnReduction::nearest;
    if (text == "mean") return ClnReduction::mean;
    throw ConfigError("unknown cln reduction '" + std::string(text) + "' (expected nearest or mean)");
}

InverseSplit parse_inverse_split(std::string_view text) {
    if (text == "recorded") return InverseSplit::recorded;
    if (text == "rescore") return InverseSplit::rescore;
    throw ConfigError("unknown inverse split '" + std::string(text) + "' (expected recorded or rescore)");
}

PositionSource parse_position_source(std::string_view text) {
    if (text == "latent") return PositionSource::latent;
    if (text == "tokens") return PositionSource::tokens;
    throw ConfigError("unknown position source '" + std::string(text) + "' (expected latent or tokens)");
}

Model Model::create(Vocabulary vocab, Scorer scorer, const ModelConfig& config, std::uint64_t seed,
                    double head_stddev) {
    if (scorer.config().embed_dim != config.flow.block.model_dim) {
        throw DimensionError("embedding width " + std::to_string(scorer.config().embed_dim) +
                             " does not match flow width " + std::to_string(config.flow.block.model_dim));
    }
    if (scorer.vocab_size() != vocab.size()) {
        throw VocabularyError("scorer embedding has " + std::to_string(scorer.vocab_size()) +
                              " rows for a vocabulary of " + std::to_string(vocab.size()));
    }
    if (!(config.style_fraction > 0.0 && config.style_fraction < 1.0)) {
        throw ConfigError("style fraction must lie in (0, 1)");
    }
    if (!(config.cln_eps > 0.0)) throw ConfigError("cln epsilon must be positive");
    Model m;
    m.vocab = std::move(vocab);
    m.scorer = std::move(scorer);
    m.config = config;
    m.chain = FlowChain::initialize(config.flow, derive_seed(seed, 1), head_stddev);
    m.styles = StyleTable::initialize(config.flow.block.model_dim, kNumStyles, derive_seed(seed, 2),
                                      config.style_init_jitter);
    return m;
}

Partitioner Model::partitioner(const std::vector<bool>& fixed_content) const {
    return partitioner_for(config.flow.split, &scorer, config.style_fraction, fixed_content);
}

std::vector<Parameter*> Model::trainable() {
    std::vector<Parameter*> out = chain.parameters();
    for (Parameter* p : styles.parameters()) out.push_back(p);
    return out;
}

LatentState encode(const Model& model, const TokenSequence& seq) {
    const TokenSequence s = strip_padding(seq);
    return chain_forward(model.chain, model.scorer.embed(s), model.partitioner(Scorer::boundary_mask(s)));
}

Disentangled disentangle(const Tensor& values, const Partition& positions) {
    if (positions.axis != SplitAxis::tokens || positions.extent != values.dim(0)) {
        throw ContractError("positions do not match the latent length");
    }
    positions.validate();
    const std::size_t d = values.dim(1);
    Disentangled out{Tensor({positions.content.size(), d}), Tensor({positions.style.size(), d}), positions};
    for (std::size_t i = 0; i < positions.content.size(); ++i) {
        auto src = values.row(positions.content[i]);
        std::copy(src.begin(), src.end(), out.content.row(i).begin());
    }
    for (std::size_t i = 0; i < positions.style.size(); ++i) {
        auto src = values.row(positions.style[i]);
        std::copy(src.begin(), src.end(), out.style.row(i).begin());
    }
    return out;
}

Disentangled disentangle(const LatentState& z, const Scorer& scorer, double rho,
                         const std::vector<bool>& fixed_content) {
    return disentangle(z.values, attention_split(scorer.score_rows(z.values, {}, fixed_content), rho, fixed_content));
}

Partition style_positions(const Model& model, const Tensor& latent, const Tensor& embeddings,
                          const std::vector<bool>& fixed_content) {
    const Tensor& rows = model.config.positions == PositionSource::latent ? latent : embeddings;
    return attention_split(model.scorer.score_rows(rows, {}, fixed_content), model.config.style_fraction,
                           fixed_content);
}

ad::Var normalize_rows(ad::Var z, double eps) {
    ad::Var centered = ad::sub(z, ad::mean_last(z));
    return ad::div(centered, ad::sqrt(ad::add_scalar(ad::var_last(z), eps * eps)));
}

ad::Var conditional_rows(ad::Graph& g, ad::Var z_c, int style, const StyleTable& table, double eps) {
    table.check_style(style);
    const auto s = static_cast<std::size_t>(style);
    return ad::add(ad::mul(normalize_rows(z_c, eps), g.parameter(table.gamma[s])), g.parameter(table.beta[s]));
}

ad::Var reduce_to_style(ad::Var rows, const Partition& positions, ClnReduction mode) {
    const std::size_t n_content = positions.content.size();
    if (rows.shape()[0] != n_content) throw ContractError("CLN rows do not match the content positions");
    if (mode == ClnReduction::mean) {
        Tensor w({1, n_content});
        w.fill(1.0 / static_cast<double>(n_content));
        ad::Var pooled = ad::matmul(rows.graph->constant(std::move(w)), rows);
        return ad::gather_rows(pooled, std::vector<std::size_t>(positions.style.size(), 0));
    }
    std::vector<std::size_t> pick;
    pick.reserve(positions.style.size());
    for (std::size_t p : positions.style) {
        std::size_t best = 0;
        std::size_t best_gap = std::numeric_limits<std::size_t>::max();
        for (std::size_t i = 0; i < n_content; ++i) {
            const std::size_t c = positions.content[i];
            const std::size_t gap = c > p ? c - p : p - c;
            if (gap < best_gap) {
                best_gap = gap;
                best = i;
            }
        }
        pick.push_back(best);
    }
    return ad::gather_rows(rows, std::move(pick));
}

ad::Var conditional_layer_norm(ad::Graph& g, ad::Var z_c, int style, const StyleTable& table,
                               const Partition& positions, ClnReduction mode, double eps) {
    return reduce_to_style(conditional_rows(g, z_c, style, table, eps), positions, mode);
}

Tensor conditional_layer_norm(const Tensor& z_c, int style, const StyleTable& table, const Partition& positions,
                              ClnReduction mode, double eps) {
    ad::Graph g;
    return conditional_layer_norm(g, g.constant(z_c), style, table, positions, mode, eps).value();
}

ad::Var fuse(ad::Graph& g, ad::Var z_c, ad::Var z_s, const Partition& positions) {
    if (z_c.shape().size() != 2 || z_s.shape().size() != 2 || z_c.shape()[1] != z_s.shape()[1]) {
        throw DimensionError("cannot fuse " + shape_string(z_c.shape()) + " with " + shape_string(z_s.shape()));
    }
    if (z_c.shape()[0] != positions.content.size() || z_s.shape()[0] != positions.style.size()) {
        throw ContractError("fuse arity mismatch: " + std::to_string(z_s.shape()[0]) + " style rows for " +
                            std::to_string(positions.style.size()) + " style positions");
    }
    ad::Var base = g.constant(Tensor({positions.extent, z_c.shape()[1]}));
    return ad::scatter_rows(ad::scatter_rows(base, z_c, positions.content), z_s, positions.style);
}

Tensor fuse(const Tensor& z_c, const Tensor& z_s, const Partition& positions) {
    ad::Graph g;
    return fuse(g, g.constant(z_c), g.constant(z_s), positions).value();
}

std::vector<TokenId> decode_tokens(const Tensor& rows, const Tensor& table) {
    if (rows.rank() != 2 || table.rank() != 2 || rows.dim(1) != table.dim(1)) {
        throw DimensionError("cannot decode " + shape_string(rows.shape()) + " against table " +
                             shape_string(table.shape()));
    }
    std::vector<TokenId> out(rows.dim(0));
    for (std::size_t r = 0; r < rows.dim(0); ++r) {
        auto x = rows.row(r);
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t v = 0; v < table.dim(0); ++v) {
            auto e = table.row(v);
            double dist = 0.0;
            for (std::size_t j = 0; j < x.size(); ++j) {
                const double diff = x[j] - e[j];
                dist += diff * diff;
            }
            if (dist < best) {
                best = dist;
                arg = v;
            }
        }
        out[r] = static_cast<TokenId>(arg);
    }
    return out;
}

TransferRecord transfer(const Model& model, const TokenSequence& seq, int target_style,
                        const TransferOptions& options) {
    model.styles.check_style(target_style);
    TransferRecord rec;
    rec.source = strip_padding(seq);
    rec.source_style = seq.label;
    rec.target_style = target_style;
    const Tensor x = model.scorer.embed(rec.source);
    const std::vector<bool> fixed = Scorer::boundary_mask(rec.source);
    rec.source_latent = chain_forward(model.chain, x, model.partitioner(fixed));
    rec.positions = style_positions(model, rec.source_latent.values, x, fixed);
    const Disentangled parts = disentangle(rec.source_latent.values, rec.positions);
    const Tensor z_s = options.replace_style
                           ? conditional_layer_norm(parts.content, target_style, model.styles, rec.positions,
                                                    model.config.cln_reduction, model.config.cln_eps)
                           : parts.style;
    rec.fused = fuse(parts.content, z_s, rec.positions);

    ad::Graph g;
    const ad::Var z = g.constant(rec.fused);
    const FlowTrace inv = model.config.inverse_split == InverseSplit::recorded
                              ? chain_inverse(g, model.chain, z, rec.source_latent.layer_partitions)
                              : chain_inverse(g, model.chain, z, model.partitioner(fixed));
    rec.inverse_partitions = inv.partitions;
    rec.output_embeddings = inv.output.value();
    rec.output.ids = decode_tokens(rec.output_embeddings, model.embedding_table());
    rec.output.label = target_style;
    return rec;
}

}  // namespace styleflow
