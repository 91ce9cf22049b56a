#include "styleflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "styleflow/error.hpp"
#include "styleflow/nn.hpp"
#include "styleflow/scorer.hpp"

namespace styleflow {

namespace {

Parameter normal_param(std::string name, Shape shape, double stddev, Rng& rng) {
    if (stddev == 0.0) return zeros(std::move(name), std::move(shape));
    return Parameter(std::move(name), normal_tensor(shape, stddev, rng));
}

void check_input(const Tensor& x_shape_holder, std::size_t d, const Partition& partition) {
    const Shape& s = x_shape_holder.shape();
    if (s.size() != 2 || s[1] != d) {
        throw DimensionError("flow input " + shape_string(s) + " does not match model width " + std::to_string(d));
    }
    const std::size_t extent = partition.axis == SplitAxis::tokens ? s[0] : s[1];
    if (partition.extent != extent) {
        throw ContractError("partition extent " + std::to_string(partition.extent) + " does not match input " +
                            shape_string(s));
    }
    partition.validate();
}

// Selects the given columns of an [L, n] matrix.
ad::Var gather_cols(ad::Var x, const std::vector<std::size_t>& cols) {
    return ad::transpose(ad::gather_rows(ad::transpose(x), cols));
}

struct ScaleShift {
    ad::Var log_scale;  // clamped
    ad::Var shift;
};

// (log s, t) for the transformed side, shaped like that side:
// [|S|, d] on the token axis, [L, |S|] on the channel axis.
ScaleShift scale_shift(ad::Graph& g, const CouplingLayer& layer, ad::Var x, const Partition& p) {
    const std::size_t d = layer.block.config.model_dim;
    ad::Var out = layer.block.apply(g, x, p);
    ad::Var raw_s = ad::slice(out, 1, 0, d);
    ad::Var raw_t = ad::slice(out, 1, d, 2 * d);
    if (p.axis == SplitAxis::tokens) {
        raw_s = ad::gather_rows(raw_s, p.style);
        raw_t = ad::gather_rows(raw_t, p.style);
    } else {
        raw_s = gather_cols(raw_s, p.style);
        raw_t = gather_cols(raw_t, p.style);
    }
    return {ad::clamp(raw_s, -kLogScaleClamp, kLogScaleClamp), raw_t};
}

ad::Var take_side(ad::Var x, const Partition& p) {
    return p.axis == SplitAxis::tokens ? ad::gather_rows(x, p.style) : gather_cols(x, p.style);
}

ad::Var put_side(ad::Var x, ad::Var side, const Partition& p) {
    if (p.axis == SplitAxis::tokens) return ad::scatter_rows(x, side, p.style);
    return ad::transpose(ad::scatter_rows(ad::transpose(x), ad::transpose(side), p.style));
}

}  // namespace

TransformerBlock TransformerBlock::initialize(const std::string& prefix, const BlockConfig& config, Rng& rng,
                                              double head_stddev) {
    const std::size_t d = config.model_dim, f = config.ffn_dim;
    if (d == 0 || config.heads == 0 || d % config.heads != 0) {
        throw DimensionError("model width " + std::to_string(d) + " is not divisible by " +
                             std::to_string(config.heads) + " heads");
    }
    if (f == 0) throw DimensionError("feed-forward width must be positive");
    TransformerBlock b;
    b.config = config;
    b.mask_token = Parameter(prefix + ".mask_token", normal_tensor({d}, 0.02, rng));
    b.ln1_gain = filled(prefix + ".ln1_gain", {d}, 1.0);
    b.ln1_bias = zeros(prefix + ".ln1_bias", {d});
    b.wq = xavier(prefix + ".wq", d, d, rng);
    b.wk = xavier(prefix + ".wk", d, d, rng);
    b.wv = xavier(prefix + ".wv", d, d, rng);
    b.wo = xavier(prefix + ".wo", d, d, rng);
    b.ln2_gain = filled(prefix + ".ln2_gain", {d}, 1.0);
    b.ln2_bias = zeros(prefix + ".ln2_bias", {d});
    b.ffn_w1 = xavier(prefix + ".ffn_w1", d, f, rng);
    b.ffn_b1 = zeros(prefix + ".ffn_b1", {f});
    b.ffn_w2 = xavier(prefix + ".ffn_w2", f, d, rng);
    b.ffn_b2 = zeros(prefix + ".ffn_b2", {d});
    b.ln3_gain = filled(prefix + ".ln3_gain", {d}, 1.0);
    b.ln3_bias = zeros(prefix + ".ln3_bias", {d});
    b.head_w = normal_param(prefix + ".head_w", {d, 2 * d}, head_stddev, rng);
    b.head_b = zeros(prefix + ".head_b", {2 * d});
    return b;
}

ad::Var TransformerBlock::apply(ad::Graph& g, ad::Var x, const Partition& partition) const {
    const std::size_t d = config.model_dim;
    const std::size_t length = x.shape()[0];
    ad::Var h = x;
    std::vector<std::size_t> keys;
    if (partition.axis == SplitAxis::tokens) {
        ad::Var mask = ad::reshape(g.parameter(mask_token), {1, d});
        ad::Var masks = ad::gather_rows(mask, std::vector<std::size_t>(partition.style.size(), 0));
        h = ad::scatter_rows(x, masks, partition.style);
        keys = partition.content;
    } else {
        Tensor keep({d});
        keep.fill(1.0);
        for (std::size_t c : partition.style) keep[c] = 0.0;
        h = ad::mul(x, g.constant(std::move(keep)));
        keys.resize(length);
        for (std::size_t i = 0; i < length; ++i) keys[i] = i;
    }
    h = ad::add(h, g.constant(nn::positional_encoding(length, d)));

    ad::Var normed = nn::layer_norm(g, h, ln1_gain, ln1_bias);
    ad::Var kv_rows = ad::gather_rows(normed, keys);
    ad::Var q = ad::matmul(normed, g.parameter(wq));
    ad::Var k = ad::matmul(kv_rows, g.parameter(wk));
    ad::Var v = ad::matmul(kv_rows, g.parameter(wv));
    const std::size_t dh = d / config.heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<ad::Var> heads;
    heads.reserve(config.heads);
    for (std::size_t i = 0; i < config.heads; ++i) {
        ad::Var qh = ad::slice(q, 1, i * dh, (i + 1) * dh);
        ad::Var kh = ad::slice(k, 1, i * dh, (i + 1) * dh);
        ad::Var vh = ad::slice(v, 1, i * dh, (i + 1) * dh);
        ad::Var att = ad::softmax(ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt));
        heads.push_back(ad::matmul(att, vh));
    }
    ad::Var attended = ad::matmul(ad::concat(heads, 1), g.parameter(wo));
    h = ad::add(h, attended);

    ad::Var ffn_in = nn::layer_norm(g, h, ln2_gain, ln2_bias);
    ad::Var ffn = nn::linear(g, ad::tanh(nn::linear(g, ffn_in, ffn_w1, ffn_b1)), ffn_w2, ffn_b2);
    h = ad::add(h, ffn);
    return nn::linear(g, nn::layer_norm(g, h, ln3_gain, ln3_bias), head_w, head_b);
}

std::vector<Parameter*> TransformerBlock::parameters() {
    return {&mask_token, &ln1_gain, &ln1_bias, &wq,       &wk,       &wv,       &wo,       &ln2_gain, &ln2_bias,
            &ffn_w1,     &ffn_b1,   &ffn_w2,   &ffn_b2,   &ln3_gain, &ln3_bias, &head_w,   &head_b};
}

std::string_view to_string(SplitMode mode) {
    switch (mode) {
        case SplitMode::attention: return "attention";
        case SplitMode::parity: return "parity";
        case SplitMode::channel: return "channel";
    }
    return "?";
}

SplitMode parse_split_mode(std::string_view text) {
    if (text == "attention") return SplitMode::attention;
    if (text == "parity") return SplitMode::parity;
    if (text == "channel") return SplitMode::channel;
    throw ConfigError("unknown split mode '" + std::string(text) + "' (expected attention, parity or channel)");
}

FlowChain FlowChain::initialize(const FlowConfig& config, std::uint64_t seed, double head_stddev) {
    if (config.chain_length == 0) throw ConfigError("chain length must be positive");
    FlowChain chain;
    chain.config = config;
    Rng rng(derive_seed(seed, 0xf10f));
    for (std::size_t k = 0; k < config.chain_length; ++k) {
        chain.layers.push_back(
            {TransformerBlock::initialize("flow.layer" + std::to_string(k), config.block, rng, head_stddev),
             config.split});
    }
    return chain;
}

std::vector<Parameter*> FlowChain::parameters() {
    std::vector<Parameter*> out;
    for (auto& layer : layers)
        for (Parameter* p : layer.block.parameters()) out.push_back(p);
    return out;
}

std::vector<const Parameter*> FlowChain::parameters() const {
    auto mut = const_cast<FlowChain*>(this)->parameters();
    return {mut.begin(), mut.end()};
}

Partitioner attention_partitioner(const Scorer* scorer, double style_fraction, std::vector<bool> fixed_content) {
    return [scorer, style_fraction, fixed = std::move(fixed_content)](std::size_t layer, const Tensor& input) {
        const std::size_t length = input.dim(0);
        if (length < 2) throw ContractError("token split needs at least 2 tokens, got " + std::to_string(length));
        if (!fixed.empty() && fixed.size() != length) throw ContractError("fixed-content mask length does not match input");
        // Too few free positions: fall back to splitting over all of them.
        const auto free = static_cast<std::size_t>(std::count(fixed.begin(), fixed.end(), false));
        const std::vector<bool>& mask = free >= 2 ? fixed : std::vector<bool>{};
        std::vector<double> weights = scorer != nullptr ? scorer->score_rows(input, {}, mask)
                                                        : std::vector<double>(length, 1.0 / static_cast<double>(length));
        return attention_split(weights, style_fraction, mask, layer % 2);
    };
}

Partitioner parity_partitioner() {
    return [](std::size_t layer, const Tensor& input) { return parity_split(input.dim(0), layer % 2); };
}

Partitioner channel_partitioner() {
    return [](std::size_t layer, const Tensor& input) { return channel_split(input.dim(1), layer); };
}

Partitioner partitioner_for(SplitMode mode, const Scorer* scorer, double style_fraction,
                            const std::vector<bool>& fixed_content) {
    switch (mode) {
        case SplitMode::attention: return attention_partitioner(scorer, style_fraction, fixed_content);
        case SplitMode::parity: return parity_partitioner();
        case SplitMode::channel: return channel_partitioner();
    }
    throw ContractError("unknown split mode");
}

CouplingTrace coupling_forward(ad::Graph& g, const CouplingLayer& layer, ad::Var x, const Partition& partition) {
    check_input(x.value(), layer.block.config.model_dim, partition);
    const auto [log_s, t] = scale_shift(g, layer, x, partition);
    ad::Var side = ad::add(ad::mul(take_side(x, partition), ad::exp(log_s)), t);
    return {put_side(x, side, partition), ad::sum(log_s)};
}

CouplingTrace coupling_inverse(ad::Graph& g, const CouplingLayer& layer, ad::Var y, const Partition& partition) {
    check_input(y.value(), layer.block.config.model_dim, partition);
    const auto [log_s, t] = scale_shift(g, layer, y, partition);
    ad::Var s = ad::exp(log_s);
    for (double v : s.value().data()) {
        if (!(std::abs(v) >= 1e-12)) throw NumericError("coupling scale below 1e-12; inverse undefined");
    }
    ad::Var side = ad::div(ad::sub(take_side(y, partition), t), s);
    return {put_side(y, side, partition), ad::neg(ad::sum(log_s))};
}

namespace {

FlowTrace run_chain(ad::Graph& g, const FlowChain& chain, ad::Var x, bool inverse,
                    const std::function<Partition(std::size_t, const Tensor&)>& choose) {
    const Shape& shape = x.shape();
    if (shape.size() != 2 || shape[1] != chain.model_dim()) {
        throw DimensionError("flow input " + shape_string(shape) + " does not match model width " +
                             std::to_string(chain.model_dim()));
    }
    FlowTrace trace;
    ad::Var h = x;
    const std::size_t n = chain.size();
    trace.partitions.resize(n);
    trace.layer_logdets.resize(n);
    for (std::size_t step = 0; step < n; ++step) {
        const std::size_t k = inverse ? n - 1 - step : step;
        const CouplingLayer& layer = chain.layers[k];
        if (layer.mode != SplitMode::channel && h.shape()[0] < 2) {
            throw ContractError("token split needs at least 2 tokens, got " + std::to_string(h.shape()[0]));
        }
        Partition p = choose(k, h.value());
        CouplingTrace out = inverse ? coupling_inverse(g, layer, h, p) : coupling_forward(g, layer, h, p);
        h = out.output;
        trace.layer_logdets[k] = out.logdet;
        trace.partitions[k] = std::move(p);
    }
    trace.output = h;
    ad::Var total = trace.layer_logdets[0];
    for (std::size_t k = 1; k < n; ++k) total = ad::add(total, trace.layer_logdets[k]);
    trace.logdet = total;
    return trace;
}

std::function<Partition(std::size_t, const Tensor&)> fixed(std::span<const Partition> partitions,
                                                            std::size_t chain_length) {
    if (partitions.size() != chain_length) {
        throw ContractError("got " + std::to_string(partitions.size()) + " partitions for a chain of " +
                            std::to_string(chain_length) + " layers");
    }
    return [partitions](std::size_t k, const Tensor&) { return partitions[k]; };
}

}  // namespace

FlowTrace chain_forward(ad::Graph& g, const FlowChain& chain, ad::Var x, const Partitioner& partitioner) {
    return run_chain(g, chain, x, false, partitioner);
}

FlowTrace chain_forward(ad::Graph& g, const FlowChain& chain, ad::Var x, std::span<const Partition> partitions) {
    return run_chain(g, chain, x, false, fixed(partitions, chain.size()));
}

FlowTrace chain_inverse(ad::Graph& g, const FlowChain& chain, ad::Var z, std::span<const Partition> partitions) {
    return run_chain(g, chain, z, true, fixed(partitions, chain.size()));
}

FlowTrace chain_inverse(ad::Graph& g, const FlowChain& chain, ad::Var z, const Partitioner& partitioner) {
    return run_chain(g, chain, z, true, partitioner);
}

CouplingResult coupling_forward(const CouplingLayer& layer, const Tensor& x, const Partition& partition) {
    ad::Graph g;
    const CouplingTrace t = coupling_forward(g, layer, g.constant(x), partition);
    return {t.output.value(), t.logdet.value().item()};
}

Tensor coupling_inverse(const CouplingLayer& layer, const Tensor& y, const Partition& partition) {
    ad::Graph g;
    return coupling_inverse(g, layer, g.constant(y), partition).output.value();
}

namespace {

LatentState to_latent(const FlowTrace& trace) {
    LatentState z;
    z.values = trace.output.value();
    z.layer_partitions = trace.partitions;
    z.logdet = trace.logdet.value().item();
    return z;
}

}  // namespace

LatentState chain_forward(const FlowChain& chain, const Tensor& x, const Partitioner& partitioner) {
    ad::Graph g;
    return to_latent(chain_forward(g, chain, g.constant(x), partitioner));
}

LatentState chain_forward(const FlowChain& chain, const Tensor& x, std::span<const Partition> partitions) {
    ad::Graph g;
    return to_latent(chain_forward(g, chain, g.constant(x), partitions));
}

Tensor chain_inverse(const FlowChain& chain, const LatentState& z) {
    ad::Graph g;
    return chain_inverse(g, chain, g.constant(z.values), z.layer_partitions).output.value();
}

double log_density(const LatentState& z) {
    if (z.logdet_stale) throw ContractError("latent was edited after the forward pass; its logdet is stale");
    double sq = 0.0;
    for (double v : z.values.data()) sq += v * v;
    const auto n = static_cast<double>(z.values.size());
    return -0.5 * sq - 0.5 * n * std::log(2.0 * std::numbers::pi) + z.logdet;
}

}  // namespace styleflow
