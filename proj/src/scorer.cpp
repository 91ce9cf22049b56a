#include "styleflow/scorer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "styleflow/error.hpp"
#include "styleflow/nn.hpp"
#include "styleflow/optim.hpp"

namespace styleflow {

namespace {

GruParams make_gru(const std::string& prefix, std::size_t d, std::size_t h, Rng& rng) {
    GruParams p;
    p.input_w = xavier(prefix + ".input_w", d, 3 * h, rng);
    p.input_b = zeros(prefix + ".input_b", {3 * h});
    p.gate_u = xavier(prefix + ".gate_u", h, 2 * h, rng);
    p.cand_u = xavier(prefix + ".cand_u", h, h, rng);
    return p;
}

// Hidden states for every row, in row order. `reverse` runs right to left.
ad::Var run_gru(ad::Graph& g, const GruParams& p, ad::Var rows, bool reverse) {
    const std::size_t n = rows.shape()[0];
    const std::size_t h = p.cand_u.value.dim(0);
    ad::Var projected = nn::linear(g, rows, p.input_w, p.input_b);  // [n, 3H]
    ad::Var gate_u = g.parameter(p.gate_u);
    ad::Var cand_u = g.parameter(p.cand_u);
    ad::Var state = g.constant(Tensor({1, h}));
    std::vector<ad::Var> states(n);
    for (std::size_t step = 0; step < n; ++step) {
        const std::size_t t = reverse ? n - 1 - step : step;
        ad::Var xt = ad::slice(projected, 0, t, t + 1);
        ad::Var gates = ad::sigmoid(ad::add(ad::slice(xt, 1, 0, 2 * h), ad::matmul(state, gate_u)));
        ad::Var z = ad::slice(gates, 1, 0, h);
        ad::Var r = ad::slice(gates, 1, h, 2 * h);
        ad::Var cand = ad::tanh(ad::add(ad::slice(xt, 1, 2 * h, 3 * h), ad::matmul(ad::mul(r, state), cand_u)));
        state = ad::add(state, ad::mul(z, ad::sub(cand, state)));
        states[t] = state;
    }
    return ad::concat(states, 0);
}

std::vector<std::size_t> nonpad_positions(std::size_t n, const std::vector<bool>& padding) {
    if (!padding.empty() && padding.size() != n) throw ContractError("padding mask length does not match rows");
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < n; ++i) {
        if (padding.empty() || !padding[i]) keep.push_back(i);
    }
    return keep;
}

}  // namespace

std::vector<Parameter*> GruParams::parameters() { return {&input_w, &input_b, &gate_u, &cand_u}; }

Scorer Scorer::initialize(std::size_t vocab_size, const ScorerConfig& config, std::uint64_t seed) {
    if (vocab_size <= kFirstWord) throw ContractError("scorer needs a vocabulary with words");
    Rng rng(derive_seed(seed, 0x5c0e));
    Scorer s;
    s.config_ = config;
    const std::size_t d = config.embed_dim, h = config.hidden_dim, a = config.attention_dim;
    s.embedding = Parameter("scorer.embedding", normal_tensor({vocab_size, d}, 1.0, rng));
    s.forward_gru = make_gru("scorer.gru_fwd", d, h, rng);
    s.backward_gru = make_gru("scorer.gru_bwd", d, h, rng);
    s.att_w = xavier("scorer.att_w", 2 * h + d, a, rng);
    s.att_b = zeros("scorer.att_b", {a});
    s.att_v = zeros("scorer.att_v", {a, 1});
    s.cls_w = zeros("scorer.cls_w", {d, static_cast<std::size_t>(kNumStyles)});
    s.cls_b = zeros("scorer.cls_b", {static_cast<std::size_t>(kNumStyles)});
    s.normalize_embeddings();
    return s;
}

Scorer::Output Scorer::forward(ad::Graph& g, ad::Var rows, const std::vector<bool>& excluded) const {
    const Shape& shape = rows.shape();
    if (shape.size() != 2 || shape[1] != config_.embed_dim) {
        throw DimensionError("scorer input " + shape_string(shape) + " does not match embedding width " +
                             std::to_string(config_.embed_dim));
    }
    const std::size_t n = shape[0];
    if (n == 0) throw ContractError("cannot score an empty sequence");
    if (!excluded.empty() && excluded.size() != n) throw ContractError("exclusion mask length does not match rows");
    ad::Var fwd = run_gru(g, forward_gru, rows, false);
    ad::Var bwd = run_gru(g, backward_gru, rows, true);
    const ad::Var features[] = {fwd, bwd, rows};
    ad::Var states = ad::concat(features, 1);  // [n, 2H + d]
    ad::Var energy = ad::matmul(ad::tanh(nn::linear(g, states, att_w, att_b)), g.parameter(att_v));  // [n, 1]
    const auto kept = static_cast<std::size_t>(std::count(excluded.begin(), excluded.end(), false));
    if (!excluded.empty() && kept > 0 && kept < n) {
        Tensor offset({n, 1});
        for (std::size_t i = 0; i < n; ++i) offset[i] = excluded[i] ? -kExcludedEnergy : 0.0;
        energy = ad::add(energy, g.constant(std::move(offset)));
    }
    ad::Var weights = ad::softmax(ad::transpose(energy));  // [1, n]
    // The head reads the attention-pooled embeddings, not the recurrent
    // states, so the weights have to land on the tokens that carry the style.
    ad::Var context = ad::matmul(weights, rows);  // [1, d]
    ad::Var logits = nn::linear(g, context, cls_w, cls_b);
    return {weights, ad::log_softmax(logits)};
}

std::vector<bool> Scorer::boundary_mask(const TokenSequence& seq) {
    std::vector<bool> mask(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) mask[i] = seq.ids[i] == kBos || seq.ids[i] == kEos;
    return mask;
}

Tensor Scorer::embed(const TokenSequence& seq) const {
    const std::size_t d = config_.embed_dim;
    Tensor out({seq.size(), d});
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const TokenId id = seq.ids[i];
        if (id < 0 || static_cast<std::size_t>(id) >= vocab_size()) {
            throw VocabularyError("token id " + std::to_string(id) + " outside embedding table of " +
                                  std::to_string(vocab_size()) + " rows");
        }
        std::copy_n(embedding.value.row(static_cast<std::size_t>(id)).begin(), d, out.row(i).begin());
    }
    return out;
}

namespace {

std::vector<bool> subset(const std::vector<bool>& mask, const std::vector<std::size_t>& keep) {
    if (mask.empty()) return {};
    std::vector<bool> out(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) out[i] = mask[keep[i]];
    return out;
}

}  // namespace

std::vector<double> Scorer::score_rows(const Tensor& rows, const std::vector<bool>& padding,
                                       const std::vector<bool>& excluded) const {
    if (rows.rank() != 2 || rows.dim(0) == 0) throw ContractError("cannot score an empty sequence");
    if (!excluded.empty() && excluded.size() != rows.dim(0)) throw ContractError("exclusion mask length does not match rows");
    const auto keep = nonpad_positions(rows.dim(0), padding);
    if (keep.empty()) throw ContractError("cannot score an all-padding sequence");
    ad::Graph g;
    ad::Var x = ad::gather_rows(g.constant(rows), keep);
    const Tensor& w = forward(g, x, subset(excluded, keep)).weights.value();
    std::vector<double> out(rows.dim(0), 0.0);
    for (std::size_t i = 0; i < keep.size(); ++i) out[keep[i]] = w[i];
    return out;
}

std::vector<double> Scorer::score_tokens(const TokenSequence& seq) const {
    return score_rows(embed(seq), seq.padding_mask(), boundary_mask(seq));
}

std::vector<double> Scorer::classify(const Tensor& rows, const std::vector<bool>& padding,
                                     const std::vector<bool>& excluded) const {
    if (rows.rank() != 2 || rows.dim(0) == 0) throw ContractError("cannot classify an empty sequence");
    if (!excluded.empty() && excluded.size() != rows.dim(0)) throw ContractError("exclusion mask length does not match rows");
    const auto keep = nonpad_positions(rows.dim(0), padding);
    if (keep.empty()) throw ContractError("cannot classify an all-padding sequence");
    ad::Graph g;
    ad::Var x = ad::gather_rows(g.constant(rows), keep);
    const Tensor& lp = forward(g, x, subset(excluded, keep)).log_probs.value();
    std::vector<double> out(lp.size());
    for (std::size_t i = 0; i < lp.size(); ++i) out[i] = std::exp(lp[i]);
    return out;
}

std::vector<double> Scorer::classify(const TokenSequence& seq) const {
    return classify(embed(seq), seq.padding_mask(), boundary_mask(seq));
}

int Scorer::predict(const TokenSequence& seq) const {
    const auto p = classify(seq);
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

void Scorer::normalize_embeddings() {
    Tensor& e = embedding.value;
    for (std::size_t r = 0; r < e.dim(0); ++r) {
        auto row = e.row(r);
        double norm = 0.0;
        for (double x : row) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) continue;
        for (double& x : row) x *= config_.embed_radius / norm;
    }
}

void Scorer::freeze() {
    for (Parameter* p : parameters()) {
        p->requires_grad = false;
        p->grad = Tensor();
    }
}

std::vector<Parameter*> Scorer::parameters() {
    std::vector<Parameter*> out{&embedding};
    for (auto* gru : {&forward_gru, &backward_gru})
        for (Parameter* p : gru->parameters()) out.push_back(p);
    for (Parameter* p : {&att_w, &att_b, &att_v, &cls_w, &cls_b}) out.push_back(p);
    return out;
}

std::vector<const Parameter*> Scorer::parameters() const {
    auto mut = const_cast<Scorer*>(this)->parameters();
    return {mut.begin(), mut.end()};
}

double scorer_accuracy(const Scorer& scorer, const std::vector<CorpusRow>& rows) {
    if (rows.empty()) throw DataError("accuracy over an empty set");
    std::size_t correct = 0;
    for (const auto& r : rows) correct += scorer.predict(r.tokens) == r.tokens.label ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(rows.size());
}

ScorerTrainReport train_scorer(Scorer& scorer, const std::vector<CorpusRow>& rows, const ScorerTrainConfig& config) {
    std::array<std::size_t, kNumStyles> per_label{};
    for (const auto& r : rows) {
        if (r.tokens.label < 0 || r.tokens.label >= kNumStyles) throw DataError("row with unknown style label");
        ++per_label[static_cast<std::size_t>(r.tokens.label)];
    }
    for (std::size_t c : per_label) {
        if (c == 0) throw ContractError("scorer training needs at least two style labels, each nonempty");
    }
    if (config.batch == 0) throw ConfigError("scorer batch size must be positive");

    // Deterministic held-out split.
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng(derive_seed(config.seed, 0x401d));
    std::shuffle(order.begin(), order.end(), split_rng);
    const auto n_held = static_cast<std::size_t>(std::floor(config.heldout_fraction * static_cast<double>(rows.size())));
    std::vector<CorpusRow> heldout, train;
    for (std::size_t i = 0; i < order.size(); ++i) (i < n_held ? heldout : train).push_back(rows[order[i]]);

    for (Parameter* p : scorer.parameters()) {
        p->requires_grad = true;
        p->zero_grad();
    }
    Adam opt(scorer.parameters(), AdamConfig{.lr = config.lr});
    ScorerTrainReport report;
    report.train_rows = train.size();
    report.heldout_rows = heldout.size();

    std::vector<std::size_t> idx(train.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        Rng epoch_rng(derive_seed(config.seed, 0xe90c, epoch));
        std::shuffle(idx.begin(), idx.end(), epoch_rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < idx.size(); start += config.batch) {
            const std::size_t count = std::min(config.batch, idx.size() - start);
            std::vector<std::vector<std::pair<const Parameter*, Tensor>>> grads(count);
            std::vector<double> losses(count);
            parallel_for(count, config.threads, [&](std::size_t k) {
                const CorpusRow& row = train[idx[start + k]];
                ad::Graph g;
                const auto keep = row.tokens.padding_mask();
                std::vector<std::size_t> ids;
                for (std::size_t i = 0; i < row.tokens.size(); ++i)
                    if (!keep[i]) ids.push_back(static_cast<std::size_t>(row.tokens.ids[i]));
                ad::Var x = ad::gather_rows(g.parameter(scorer.embedding), ids);
                const auto out = scorer.forward(g, x, Scorer::boundary_mask(strip_padding(row.tokens)));
                ad::Var loss = ad::neg(ad::sum(ad::pick(out.log_probs, {static_cast<std::size_t>(row.tokens.label)})));
                g.backward(loss);
                losses[k] = loss.value().item();
                grads[k] = g.parameter_grads();
            });
            for (std::size_t k = 0; k < count; ++k) {
                accumulate_grads(grads[k], 1.0 / static_cast<double>(count));
                epoch_loss += losses[k];
            }
            opt.step();
            scorer.normalize_embeddings();
        }
        report.epoch_losses.push_back(idx.empty() ? 0.0 : epoch_loss / static_cast<double>(idx.size()));
    }
    scorer.freeze();
    report.heldout_accuracy = heldout.empty() ? 0.0 : scorer_accuracy(scorer, heldout);
    return report;
}

}  // namespace styleflow
