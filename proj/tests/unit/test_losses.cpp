#include <cmath>

#include "../support/gradcheck.hpp"
#include "../support/toy.hpp"
#include "doctest.h"
#include "styleflow/error.hpp"
#include "styleflow/losses.hpp"

using namespace styleflow;

namespace {

// |V| = 8 (four specials, four words), d = 4, three coupling layers.
Model miniature(std::uint64_t seed) {
    Vocabulary vocab;
    for (const char* w : {"a", "b", "c", "d"}) vocab.add(w);
    Scorer scorer = Scorer::initialize(vocab.size(), ScorerConfig{4, 4, 4, 2.0}, seed);
    ModelConfig c;
    c.flow.block = {4, 2, 8};
    c.flow.chain_length = 3;
    c.style_fraction = 0.34;
    c.style_init_jitter = 0.2;
    return Model::create(vocab, scorer, c, seed + 1, 0.3);
}

}  // namespace

TEST_CASE("reconstruction nll") {
    SUBCASE("uniform logits give ln |V|") {
        ad::Graph g;
        const Tensor table({10, 3});
        TokenSequence t;
        t.ids = {4, 7, 9};
        Rng rng(1);
        const double nll = reconstruction_nll(g, g.constant(normal_tensor({3, 3}, 1.0, rng)), t, table).value().item();
        CHECK(nll == doctest::Approx(std::log(10.0)).epsilon(1e-12));
    }
    SUBCASE("hand-computed two tokens over three words") {
        const Tensor table = Tensor::matrix({{1, 0}, {0, 1}, {1, 1}});
        const Tensor pred = Tensor::matrix({{2, -1}, {0.5, 0.25}});
        TokenSequence t;
        t.ids = {2, kPad, 1};
        ad::Graph g;
        const double nll = reconstruction_nll(g, g.constant(pred), t, table).value().item();
        // Row 1 logits: 2, -1, 1; target 2. Row 2 logits: .5, .25, .75; target 1.
        const double l1 = -(1.0 - std::log(std::exp(2.0) + std::exp(-1.0) + std::exp(1.0)));
        const double l2 = -(0.25 - std::log(std::exp(0.5) + std::exp(0.25) + std::exp(0.75)));
        CHECK(std::abs(nll - (l1 + l2) / 2) < 1e-12);
    }
    SUBCASE("dominant logits drive the loss to zero") {
        const Tensor table = Tensor::matrix({{1, 0}, {0, 1}});
        TokenSequence t;
        t.ids = {1};
        ad::Graph g;
        CHECK(reconstruction_nll(g, g.constant(Tensor::matrix({{0, 60}})), t, table).value().item() < 1e-20);
    }
    SUBCASE("arity mismatch") {
        ad::Graph g;
        TokenSequence t;
        t.ids = {0, 1};
        CHECK_THROWS_AS(reconstruction_nll(g, g.constant(Tensor({3, 2})), t, Tensor({2, 2})), ContractError);
    }
}

TEST_CASE("content loss") {
    ad::Graph g;
    CHECK(content_loss(g.constant(Tensor::matrix({{1, 0}})), g.constant(Tensor::matrix({{0, 1}}))).value().item() ==
          2.0);
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor a = normal_tensor({5, 3}, 1.0, rng), b = normal_tensor({5, 3}, 1.0, rng);
        double brute = 0.0;
        for (std::size_t r = 0; r < 5; ++r)
            for (std::size_t j = 0; j < 3; ++j) brute += (a(r, j) - b(r, j)) * (a(r, j) - b(r, j));
        CHECK(std::abs(content_loss(g.constant(a), g.constant(b)).value().item() - brute / 5) < 1e-12);
        CHECK(content_loss(g.constant(a), g.constant(a)).value().item() == 0.0);
    }
    CHECK_THROWS_AS(content_loss(g.constant(Tensor({2, 3})), g.constant(Tensor({3, 3}))), ContractError);
}

TEST_CASE("style loss") {
    const Scorer uniform = Scorer::initialize(12, ScorerConfig{6, 6, 6, 4.0}, 4);
    Rng rng(5);
    ad::Graph g;
    const double l = style_loss(g, g.constant(normal_tensor({4, 6}, 1.0, rng)), 1, uniform).value().item();
    CHECK(l == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    const auto& f = toy::fixture();
    const TokenSequence& t = f.heldout.rows[0].tokens;
    gradcheck::Result r = gradcheck::check_inputs(
        [&](ad::Graph& h, const std::vector<ad::Var>& x) {
            return style_loss(h, x[0], 1 - t.label, f.scorer, Scorer::boundary_mask(t));
        },
        {f.scorer.embed(t)}, rng);
    CHECK(r.worst < 1e-4);
}

TEST_CASE("total loss") {
    const LossBreakdown b = total_loss(1, 1, 1, 1);
    CHECK(b.total == 3.0);
    CHECK(total_loss(0, 0, 0, 0).total == 0.0);
    CHECK(total_loss(0.7, 2, 3, 4, LossWeights{1, 0, 0, 0}).total == 0.7);
    CHECK(std::abs(total_loss(0.3, 1.7, 0.2, 0.9, LossWeights{0.1, 0.2, 0.3, 0.4}).total -
                   (0.03 + 0.34 + 0.06 + 0.36)) < 1e-12);
    CHECK_THROWS_AS(total_loss(1, 1, 1, 1, LossWeights{-0.1, 1, 1, 1}), ConfigError);
    CHECK_THROWS_AS(total_loss(1, 1, 1, 1, LossWeights{1, 1, NAN, 1}), ConfigError);
}

TEST_CASE("sample losses are nonnegative and sum as weighted") {
    const auto& f = toy::fixture();
    const Model m = toy::model(0.2);
    const LossWeights w{0.5, 0.5, 1.0, 1.0};
    for (std::size_t i = 0; i < 10; ++i) {
        const TokenSequence& t = f.heldout.rows[i].tokens;
        ad::Graph g;
        const SampleLosses s = sample_losses(g, m, t, 1 - t.label, LossOptions{w});
        const LossBreakdown b = breakdown(s, w);
        CHECK(b.self_loss >= 0.0);
        CHECK(b.cycle_loss >= 0.0);
        CHECK(b.content_loss >= 0.0);
        CHECK(b.style_loss >= 0.0);
        CHECK(std::abs(s.total.value().item() -
                       (0.5 * b.self_loss + 0.5 * b.cycle_loss + b.content_loss + b.style_loss)) < 1e-12);
    }
}

TEST_CASE("every trainable parameter of a miniature model passes finite differences") {
    Model m = miniature(7);
    TokenSequence t;
    t.ids = {5, 6, 7};
    t.label = 0;
    Rng rng(11);
    const auto params = m.trainable();
    REQUIRE(!params.empty());
    double worst = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto loss = [&](ad::Graph& g) { return sample_losses(g, m, t, 1).total; };
        const auto r = gradcheck::check_parameters(loss, {params[k]}, 3, rng);
        INFO("parameter " << params[k]->name << " worst " << r.worst);
        CHECK(r.worst < 1e-4);
        worst = std::max(worst, r.worst);
    }
    MESSAGE("miniature model worst relative error " << worst);
}
