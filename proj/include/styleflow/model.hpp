#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "styleflow/autodiff.hpp"
#include "styleflow/data.hpp"
#include "styleflow/flow.hpp"
#include "styleflow/partition.hpp"
#include "styleflow/scorer.hpp"
#include "styleflow/tensor.hpp"

namespace styleflow {

/// Per-style gain and bias of the conditional layer norm.
struct StyleTable {
    std::vector<Parameter> gamma;  // one [d] vector per style
    std::vector<Parameter> beta;

    /// gamma = 1 and beta = 0 plus optional N(0, jitter^2) noise.
    static StyleTable initialize(std::size_t model_dim, std::size_t styles, std::uint64_t seed, double jitter = 0.0);

    std::size_t styles() const noexcept { return gamma.size(); }
    /// Throws ContractError for an undeclared style.
    void check_style(int style) const;
    std::vector<Parameter*> parameters();
};

/// How the per-content-row CLN output becomes one row per style position.
enum class ClnReduction {
    nearest,  // row of the nearest content position (left wins a tie)
    mean,     // mean over content rows, broadcast
};

/// Which split the transfer inverse uses.
enum class InverseSplit {
    recorded,  // partitions recorded by the forward pass
    rescore,   // partitions recomputed from each layer's output
};

/// Where the content/style positions of a latent come from.
enum class PositionSource {
    latent,  // scorer attention over the latent rows
    tokens,  // scorer attention over the input embeddings
};

std::string_view to_string(ClnReduction v);
std::string_view to_string(InverseSplit v);
std::string_view to_string(PositionSource v);
ClnReduction parse_cln_reduction(std::string_view text);
InverseSplit parse_inverse_split(std::string_view text);
PositionSource parse_position_source(std::string_view text);

struct ModelConfig {
    FlowConfig flow;
    double style_fraction = 0.25;
    double cln_eps = 1e-6;
    ClnReduction cln_reduction = ClnReduction::nearest;
    InverseSplit inverse_split = InverseSplit::recorded;
    PositionSource positions = PositionSource::tokens;
    double style_init_jitter = 0.0;
};

/// Frozen scorer (which owns the embedding table) plus the trainable flow and
/// style table.
struct Model {
    Vocabulary vocab;
    Scorer scorer;
    FlowChain chain;
    StyleTable styles;
    ModelConfig config;

    static Model create(Vocabulary vocab, Scorer scorer, const ModelConfig& config, std::uint64_t seed,
                        double head_stddev = 0.0);

    const Tensor& embedding_table() const { return scorer.embedding.value; }
    /// Split rule of the flow for one sentence; `fixed_content` positions
    /// (sentence boundaries) never join the style side of an attention split.
    Partitioner partitioner(const std::vector<bool>& fixed_content = {}) const;
    /// Trainable parameters (flow and style table).
    std::vector<Parameter*> trainable();
};

/// Embeds `seq` (padding removed) and runs the flow forward.
LatentState encode(const Model& model, const TokenSequence& seq);

struct Disentangled {
    Tensor content;  // [|C|, d]
    Tensor style;    // [|S|, d]
    Partition positions;
};

/// Positions from scorer attention over the latent rows, top fraction rho.
Disentangled disentangle(const LatentState& z, const Scorer& scorer, double rho,
                         const std::vector<bool>& fixed_content = {});
/// Split `values` at fixed positions.
Disentangled disentangle(const Tensor& values, const Partition& positions);

/// Content/style positions of an encoded sentence under the model's
/// configured position source.
Partition style_positions(const Model& model, const Tensor& latent, const Tensor& embeddings,
                          const std::vector<bool>& fixed_content);

/// (z - mean) / sqrt(var + eps^2) per row, over channels.
ad::Var normalize_rows(ad::Var z, double eps);
/// gamma_s * normalize_rows(z_c) + beta_s, one row per content row.
ad::Var conditional_rows(ad::Graph& g, ad::Var z_c, int style, const StyleTable& table, double eps);
/// Reduces CLN rows (one per content position) to one row per style position.
ad::Var reduce_to_style(ad::Var rows, const Partition& positions, ClnReduction mode);
ad::Var conditional_layer_norm(ad::Graph& g, ad::Var z_c, int style, const StyleTable& table,
                               const Partition& positions, ClnReduction mode, double eps);
Tensor conditional_layer_norm(const Tensor& z_c, int style, const StyleTable& table, const Partition& positions,
                              ClnReduction mode, double eps);

/// Content rows at content positions, style rows at style positions.
ad::Var fuse(ad::Graph& g, ad::Var z_c, ad::Var z_s, const Partition& positions);
Tensor fuse(const Tensor& z_c, const Tensor& z_s, const Partition& positions);

/// Nearest embedding row (Euclidean) for every input row; ties go to the
/// smaller id.
std::vector<TokenId> decode_tokens(const Tensor& rows, const Tensor& table);

struct TransferOptions {
    bool replace_style = true;  // false keeps the source style rows (round trip)
};

struct TransferRecord {
    TokenSequence source;
    int source_style = -1;
    int target_style = -1;
    LatentState source_latent;
    Partition positions;
    Tensor fused;
    std::vector<Partition> inverse_partitions;
    Tensor output_embeddings;
    TokenSequence output;
};

TransferRecord transfer(const Model& model, const TokenSequence& seq, int target_style,
                        const TransferOptions& options = {});

}  // namespace styleflow
