#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include "../support/toy.hpp"
#include "doctest.h"
#include "styleflow/error.hpp"
#include "styleflow/model.hpp"
#include "styleflow/partition.hpp"

using namespace styleflow;

namespace {

TokenSequence words_only(std::initializer_list<TokenId> ids, int label = 0) {
    TokenSequence s;
    s.ids = ids;
    s.label = label;
    return s;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST_CASE("attention split examples") {
    const Partition eight = attention_split({.1, .3, .2, .05, .05, .1, .15, .05}, 0.25);
    CHECK(eight.style.size() == 2);
    CHECK(eight.style == std::vector<std::size_t>{1, 2});

    const Partition tie = attention_split({.25, .25, .25, .25}, 0.25);
    CHECK(tie.style == std::vector<std::size_t>{0});

    const Partition arg = attention_split({0.1, 0.6, 0.1, 0.2}, 0.25);
    CHECK(arg.style == std::vector<std::size_t>{1});
    CHECK(arg.content == std::vector<std::size_t>{0, 2, 3});

    const Partition pad = attention_split({0.0, 0.5, 0.5, 0.0}, 0.5, {true, false, false, true});
    CHECK(pad.style == std::vector<std::size_t>{1});
    CHECK(pad.content == std::vector<std::size_t>{0, 2, 3});

    CHECK_THROWS_AS(attention_split({1.0}, 0.25), ContractError);
    CHECK_THROWS_AS(attention_split({0.5, 0.5, 0.0}, 0.25, {true, false, true}), ContractError);
}

TEST_CASE("attention split always yields a valid cover") {
    Rng rng(1);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 2 + trial % 20;
        std::vector<double> w(n);
        for (double& x : w) x = std::uniform_real_distribution<double>(0, 1)(rng);
        const double rho = std::uniform_real_distribution<double>(0.01, 0.99)(rng);
        const Partition p = attention_split(w, rho);
        REQUIRE_NOTHROW(p.validate());
        REQUIRE(!p.content.empty());
        REQUIRE(p.style.size() == std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(rho * n)), 1, n - 1));
    }
}

TEST_CASE("untrained scorer is uniform") {
    const Scorer s = Scorer::initialize(20, ScorerConfig{8, 8, 8, 4.0}, 3);
    const auto w = s.score_tokens(words_only({4, 5, 6, 7}));
    for (double x : w) CHECK(x == doctest::Approx(0.25).epsilon(1e-14));
    const auto p = s.classify(words_only({4, 5, 6}));
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-14));

    const auto one = s.score_tokens(words_only({kPad, 9, kPad, kPad}));
    CHECK(one == std::vector<double>{0.0, 1.0, 0.0, 0.0});

    const auto bounded = s.score_tokens(words_only({kBos, 4, 5, kEos}));
    CHECK(bounded[0] == 0.0);
    CHECK(bounded[3] == 0.0);
    CHECK(bounded[1] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK_THROWS_AS(s.score_tokens(words_only({})), ContractError);
}

TEST_CASE("zero-epoch scorer sits at chance") {
    const auto& f = toy::fixture();
    const Scorer s = Scorer::initialize(f.train.vocab.size(), ScorerConfig{16, 16, 16, 4.0}, 2);
    const double acc = scorer_accuracy(s, f.heldout.rows);
    CHECK(acc >= 0.4);
    CHECK(acc <= 0.6);
}

TEST_CASE("trained scorer: held-out accuracy and attention on the polarity word") {
    const auto& f = toy::fixture();
    CHECK(f.report.heldout_accuracy >= 0.95);
    CHECK(scorer_accuracy(f.scorer, f.heldout.rows) >= 0.95);

    std::size_t on_polarity = 0;
    for (const CorpusRow& r : f.heldout.rows) {
        const auto w = f.scorer.score_tokens(r.tokens);
        REQUIRE(sum(w) == doctest::Approx(1.0).epsilon(1e-10));
        const auto arg = static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin());
        on_polarity += f.polarity.count(f.train.vocab.token(r.tokens.ids[arg])) ? 1 : 0;
    }
    CHECK(static_cast<double>(on_polarity) / static_cast<double>(f.heldout.rows.size()) >= 0.95);
}

TEST_CASE("trained scorer classifies embeddings and tokens identically") {
    const auto& f = toy::fixture();
    std::size_t confident = 0, positives = 0;
    for (const CorpusRow& r : f.train.rows) {
        if (r.tokens.label != 1) continue;
        if (++positives > 100) break;
        const auto by_tokens = f.scorer.classify(r.tokens);
        const auto by_rows = f.scorer.classify(f.scorer.embed(r.tokens), {}, Scorer::boundary_mask(r.tokens));
        REQUIRE(by_tokens == by_rows);
        confident += by_tokens[1] > 0.9 ? 1 : 0;
    }
    CHECK(confident == 100);
}

TEST_CASE("padding does not change classification") {
    const auto& f = toy::fixture();
    for (std::size_t i = 0; i < 20; ++i) {
        const TokenSequence& t = f.heldout.rows[i].tokens;
        TokenSequence padded = t;
        padded.ids.insert(padded.ids.begin() + 2, kPad);
        padded.ids.push_back(kPad);
        const auto a = f.scorer.classify(t), b = f.scorer.classify(padded);
        CHECK(std::abs(a[0] - b[0]) < 1e-10);
    }
}

TEST_CASE("scorer training is deterministic and rejects single-class data") {
    const auto& f = toy::fixture();
    std::vector<CorpusRow> rows(f.train.rows.begin(), f.train.rows.begin() + 200);
    ScorerTrainConfig tc;
    tc.epochs = 2;
    tc.seed = 9;
    Scorer a = Scorer::initialize(f.train.vocab.size(), ScorerConfig{8, 8, 8, 4.0}, 4);
    Scorer b = Scorer::initialize(f.train.vocab.size(), ScorerConfig{8, 8, 8, 4.0}, 4);
    const auto ra = train_scorer(a, rows, tc);
    const auto rb = train_scorer(b, rows, tc);
    CHECK(ra.epoch_losses == rb.epoch_losses);
    CHECK(a.embedding.value == b.embedding.value);

    std::vector<CorpusRow> one_class;
    for (const auto& r : rows)
        if (r.tokens.label == 0) one_class.push_back(r);
    Scorer c = Scorer::initialize(f.train.vocab.size(), ScorerConfig{8, 8, 8, 4.0}, 4);
    CHECK_THROWS_AS(train_scorer(c, one_class, tc), ContractError);
}

TEST_CASE("conditional layer norm") {
    StyleTable table = StyleTable::initialize(4, 2, 1);
    Rng rng(6);
    const Tensor zc = normal_tensor({5, 4}, 2.0, rng);
    const Partition pos = Partition::from_style(SplitAxis::tokens, 6, {2});

    ad::Graph g;
    const Tensor rows = conditional_rows(g, g.constant(zc), 0, table, 1e-6).value();
    for (std::size_t r = 0; r < 5; ++r) {
        double m = 0, v = 0;
        for (std::size_t j = 0; j < 4; ++j) m += rows(r, j) / 4;
        for (std::size_t j = 0; j < 4; ++j) v += (rows(r, j) - m) * (rows(r, j) - m) / 4;
        CHECK(std::abs(m) < 1e-10);
        CHECK(std::abs(v - 1.0) < 1e-6);
    }

    const Tensor flat = Tensor::matrix({{5, 5, 5, 5}});
    const Tensor out = conditional_layer_norm(flat, 0, table, Partition::from_style(SplitAxis::tokens, 2, {1}),
                                              ClnReduction::nearest, 1e-6);
    for (std::size_t j = 0; j < 4; ++j) CHECK(out(0, j) == 0.0);

    StyleTable jittered = StyleTable::initialize(4, 2, 1, 0.3);
    const Tensor s0 = conditional_layer_norm(zc, 0, jittered, pos, ClnReduction::nearest, 1e-6);
    const Tensor s1 = conditional_layer_norm(zc, 1, jittered, pos, ClnReduction::nearest, 1e-6);
    CHECK(max_abs_diff(s0, s1) > 0.0);
    CHECK_THROWS_AS(conditional_layer_norm(zc, 2, table, pos, ClnReduction::nearest, 1e-6), ContractError);
}

TEST_CASE("cln reductions pick the nearest content row or the mean") {
    StyleTable table = StyleTable::initialize(2, 2, 1);
    const Tensor zc = Tensor::matrix({{1, -1}, {3, 1}, {-2, 0}});  // content at 0, 2, 3
    const Partition pos = Partition::from_style(SplitAxis::tokens, 5, {1, 4});
    const Tensor near = conditional_layer_norm(zc, 0, table, pos, ClnReduction::nearest, 1e-6);
    // Position 1 is equidistant from 0 and 2: the left neighbour wins.
    CHECK(near(0, 0) == doctest::Approx(1.0));
    CHECK(near(1, 0) == doctest::Approx(-1.0));  // row of position 3 normalized: [-2, 0] -> [-1, 1]
    const Tensor mean = conditional_layer_norm(zc, 0, table, pos, ClnReduction::mean, 1e-6);
    CHECK(mean(0, 0) == doctest::Approx((1.0 + 1.0 - 1.0) / 3.0));
    CHECK(mean(0, 0) == mean(1, 0));
}

TEST_CASE("fuse and disentangle") {
    Rng rng(2);
    const Tensor z = normal_tensor({4, 3}, 1.0, rng);
    const Partition pos = Partition::from_style(SplitAxis::tokens, 4, {1});
    const Disentangled d = disentangle(z, pos);
    CHECK(d.style.dim(0) == 1);
    CHECK(d.content.dim(0) == 3);
    CHECK(bitwise_equal(fuse(d.content, d.style, pos), z));

    const Tensor c = Tensor::matrix({{1, 1}, {3, 3}});
    const Tensor s = Tensor::matrix({{2, 2}});
    const Tensor three = fuse(c, s, Partition::from_style(SplitAxis::tokens, 3, {1}));
    CHECK(three == Tensor::matrix({{1, 1}, {2, 2}, {3, 3}}));
    const Disentangled back = disentangle(three, Partition::from_style(SplitAxis::tokens, 3, {1}));
    CHECK(back.content == c);
    CHECK(back.style == s);

    CHECK_THROWS_AS(fuse(c, Tensor::matrix({{2, 2}, {2, 2}}), Partition::from_style(SplitAxis::tokens, 3, {1})),
                    ContractError);
}

TEST_CASE("decode tokens") {
    const auto& f = toy::fixture();
    const Tensor& table = f.scorer.embedding.value;
    const TokenSequence& t = f.heldout.rows[0].tokens;
    CHECK(decode_tokens(f.scorer.embed(t), table) == t.ids);

    Tensor small({8, 2});
    small(3, 0) = 1.0;
    small(7, 0) = -1.0;
    for (std::size_t v : {0, 1, 2, 4, 5, 6}) small(v, 1) = 10.0 + static_cast<double>(v);
    CHECK(decode_tokens(Tensor::matrix({{0.0, 0.0}}), small) == std::vector<TokenId>{3});

    // Perturbations under half the smallest inter-row gap keep the decode.
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < table.dim(0); ++a)
        for (std::size_t b = a + 1; b < table.dim(0); ++b) {
            double d2 = 0;
            for (std::size_t j = 0; j < table.dim(1); ++j) d2 += std::pow(table(a, j) - table(b, j), 2);
            gap = std::min(gap, std::sqrt(d2));
        }
    Rng rng(3);
    Tensor x = f.scorer.embed(t);
    for (std::size_t r = 0; r < x.dim(0); ++r) {
        Tensor dir = normal_tensor({x.dim(1)}, 1.0, rng);
        double n = 0;
        for (double v : dir.data()) n += v * v;
        n = std::sqrt(n);
        for (std::size_t j = 0; j < x.dim(1); ++j) x(r, j) += 0.49 * gap * dir[j] / n;
    }
    CHECK(decode_tokens(x, table) == t.ids);
}

TEST_CASE("encode and transfer") {
    const auto& f = toy::fixture();
    const Model identity = toy::model(0.0);
    const TokenSequence& t = f.heldout.rows[3].tokens;
    CHECK(bitwise_equal(encode(identity, t).values, f.scorer.embed(t)));

    const Model m = toy::model(0.2);
    const LatentState a = encode(m, t), b = encode(m, t);
    CHECK(bitwise_equal(a.values, b.values));
    CHECK(a.layer_partitions == b.layer_partitions);
    for (const Partition& p : a.layer_partitions) {
        for (std::size_t s : p.style) CHECK((t.ids[s] != kBos && t.ids[s] != kEos));
    }

    TransferOptions keep;
    keep.replace_style = false;
    CHECK(transfer(m, t, t.label, keep).output.ids == t.ids);

    // Identity chain: output is the decode of the CLN-substituted embeddings.
    const TransferRecord r = transfer(identity, t, 1 - t.label);
    CHECK(r.output.ids == decode_tokens(r.fused, identity.embedding_table()));
    CHECK(transfer(m, t, 1 - t.label).output == transfer(m, t, 1 - t.label).output);

    TokenSequence bad = t;
    bad.ids[1] = static_cast<TokenId>(f.train.vocab.size() + 5);
    CHECK_THROWS_AS(encode(m, bad), VocabularyError);
}
