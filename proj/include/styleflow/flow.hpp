#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "styleflow/autodiff.hpp"
#include "styleflow/partition.hpp"
#include "styleflow/rng.hpp"
#include "styleflow/tensor.hpp"

namespace styleflow {

class Scorer;

struct BlockConfig {
    std::size_t model_dim = 256;
    std::size_t heads = 4;
    std::size_t ffn_dim = 256;
};

/// Single-layer Transformer block that maps an [L, d] sequence to [L, 2d]
/// per-token (log-scale, shift) pairs. Positions or channels on the style side
/// of the partition are hidden from it: style rows are replaced by a learned
/// mask vector and excluded as attention keys (token axis), or style channels
/// are zeroed (channel axis). Its output therefore depends on the content side
/// only.
struct TransformerBlock {
    Parameter mask_token;  // [d]
    Parameter ln1_gain, ln1_bias;
    Parameter wq, wk, wv, wo;  // [d, d]
    Parameter ln2_gain, ln2_bias;
    Parameter ffn_w1, ffn_b1;  // [d, f], [f]
    Parameter ffn_w2, ffn_b2;  // [f, d], [d]
    Parameter ln3_gain, ln3_bias;
    Parameter head_w, head_b;  // [d, 2d], [2d]
    BlockConfig config;

    /// Xavier init for the body; the output head is drawn with `head_stddev`
    /// (0 gives an identity coupling).
    static TransformerBlock initialize(const std::string& prefix, const BlockConfig& config, Rng& rng,
                                       double head_stddev = 0.0);

    ad::Var apply(ad::Graph& g, ad::Var x, const Partition& partition) const;

    std::vector<Parameter*> parameters();
};

enum class SplitMode {
    attention,  // token positions chosen by scorer attention
    parity,     // alternating token-position parity
    channel,    // channel halves
};

std::string_view to_string(SplitMode mode);
SplitMode parse_split_mode(std::string_view text);

inline constexpr double kLogScaleClamp = 5.0;

struct CouplingLayer {
    TransformerBlock block;
    SplitMode mode = SplitMode::attention;
};

struct FlowConfig {
    BlockConfig block;
    std::size_t chain_length = 8;
    SplitMode split = SplitMode::attention;
};

class FlowChain {
public:
    static FlowChain initialize(const FlowConfig& config, std::uint64_t seed, double head_stddev = 0.0);

    std::vector<CouplingLayer> layers;
    FlowConfig config;

    std::size_t size() const noexcept { return layers.size(); }
    std::size_t model_dim() const noexcept { return config.block.model_dim; }
    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
};

/// Chooses the partition of a layer from that layer's input.
using Partitioner = std::function<Partition(std::size_t layer, const Tensor& layer_input)>;

/// Attention-split partitioner. Without a scorer, weights are uniform and the
/// layer parity breaks the ties. `fixed_content` positions are never style.
Partitioner attention_partitioner(const Scorer* scorer, double style_fraction,
                                  std::vector<bool> fixed_content = {});
Partitioner parity_partitioner();
Partitioner channel_partitioner();
Partitioner partitioner_for(SplitMode mode, const Scorer* scorer, double style_fraction,
                            const std::vector<bool>& fixed_content = {});

// ---------------------------------------------------------------------------
// Graph-level operations (differentiable).

struct CouplingTrace {
    ad::Var output;
    ad::Var logdet;  // scalar
};

CouplingTrace coupling_forward(ad::Graph& g, const CouplingLayer& layer, ad::Var x, const Partition& partition);
/// Inverse of coupling_forward under the same partition; logdet is that of the
/// inverse map (the negated forward logdet).
CouplingTrace coupling_inverse(ad::Graph& g, const CouplingLayer& layer, ad::Var y, const Partition& partition);

struct FlowTrace {
    ad::Var output;
    ad::Var logdet;                    // sum of layer logdets
    std::vector<ad::Var> layer_logdets;
    std::vector<Partition> partitions;  // one per layer, as used
};

/// Forward pass; each layer's partition is computed from its own input.
FlowTrace chain_forward(ad::Graph& g, const FlowChain& chain, ad::Var x, const Partitioner& partitioner);
/// Forward pass with partitions fixed in advance.
FlowTrace chain_forward(ad::Graph& g, const FlowChain& chain, ad::Var x, std::span<const Partition> partitions);
/// Inverse pass (last layer first). `partitions` are the forward partitions.
FlowTrace chain_inverse(ad::Graph& g, const FlowChain& chain, ad::Var z, std::span<const Partition> partitions);
/// Inverse pass that re-derives each layer's split from the layer output.
FlowTrace chain_inverse(ad::Graph& g, const FlowChain& chain, ad::Var z, const Partitioner& partitioner);

// ---------------------------------------------------------------------------
// Value-level API.

/// Latent code of one sentence plus the bookkeeping needed to invert it.
struct LatentState {
    Tensor values;                           // [L, d]
    std::optional<Partition> positions;      // content/style split of the latent, once disentangled
    std::vector<Partition> layer_partitions; // forward partitions, one per layer
    double logdet = 0.0;                     // forward log|det J|
    bool logdet_stale = false;               // set when values were edited after the forward pass
};

struct CouplingResult {
    Tensor output;
    double logdet = 0.0;
};

CouplingResult coupling_forward(const CouplingLayer& layer, const Tensor& x, const Partition& partition);
Tensor coupling_inverse(const CouplingLayer& layer, const Tensor& y, const Partition& partition);

LatentState chain_forward(const FlowChain& chain, const Tensor& x, const Partitioner& partitioner);
LatentState chain_forward(const FlowChain& chain, const Tensor& x, std::span<const Partition> partitions);
/// Inverts with z.layer_partitions.
Tensor chain_inverse(const FlowChain& chain, const LatentState& z);

/// log N(values; 0, I) + logdet: the log density of the input under the
/// pushed-forward standard Gaussian.
double log_density(const LatentState& z);

}  // namespace styleflow
