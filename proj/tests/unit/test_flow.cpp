#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "styleflow/error.hpp"
#include "styleflow/flow.hpp"

using namespace styleflow;

namespace {

FlowChain small_chain(std::size_t d, std::size_t k, SplitMode mode, std::uint64_t seed, double head_std) {
    FlowConfig cfg;
    cfg.block = {d, d % 2 == 0 ? 2u : 1u, 2 * d};
    cfg.chain_length = k;
    cfg.split = mode;
    return FlowChain::initialize(cfg, seed, head_std);
}

Tensor random_input(std::size_t length, std::size_t d, Rng& rng) { return normal_tensor({length, d}, 1.0, rng); }

// log|det| of the end-to-end map by central differences, partitions held fixed.
double fd_logdet(const FlowChain& chain, const Tensor& x, const std::vector<Partition>& parts) {
    const std::size_t n = x.size();
    Eigen::MatrixXd jac(n, n);
    const double h = 1e-5;
    for (std::size_t j = 0; j < n; ++j) {
        Tensor plus = x, minus = x;
        plus[j] += h;
        minus[j] -= h;
        const Tensor yp = chain_forward(chain, plus, parts).values;
        const Tensor ym = chain_forward(chain, minus, parts).values;
        for (std::size_t i = 0; i < n; ++i) jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (yp[i] - ym[i]) / (2 * h);
    }
    return std::log(std::abs(jac.determinant()));
}

}  // namespace

TEST_CASE("zero head gives the identity coupling") {
    Rng rng(3);
    const FlowChain chain = small_chain(4, 3, SplitMode::parity, 11, 0.0);
    const Tensor x = random_input(5, 4, rng);
    const LatentState z = chain_forward(chain, x, parity_partitioner());
    CHECK(bitwise_equal(z.values, x));
    CHECK(z.logdet == 0.0);
}

TEST_CASE("fixed scale and shift on a single style token") {
    // Zero body output and a head bias of (ln 2, ln 2 | 1, 1): s = [2,2], t = [1,1].
    FlowChain chain = small_chain(2, 1, SplitMode::parity, 5, 0.0);
    TransformerBlock& b = chain.layers[0].block;
    b.head_b.value = Tensor::vector({std::log(2.0), std::log(2.0), 1.0, 1.0});
    const Tensor x = Tensor::matrix({{0.5, -0.25}, {1.0, 2.0}});
    const Partition p = Partition::from_style(SplitAxis::tokens, 2, {1});
    const CouplingResult r = coupling_forward(chain.layers[0], x, p);
    CHECK(r.output(1, 0) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(r.output(1, 1) == doctest::Approx(5.0).epsilon(1e-14));
    CHECK(r.logdet == doctest::Approx(2 * std::log(2.0)).epsilon(1e-14));
    CHECK(r.output(0, 0) == 0.5);
    CHECK(r.output(0, 1) == -0.25);
    const Tensor back = coupling_inverse(chain.layers[0], r.output, p);
    CHECK(back(1, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(back(1, 1) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("coupling round trip and bitwise content rows") {
    Rng rng(7);
    const FlowChain chain = small_chain(8, 1, SplitMode::attention, 17, 0.3);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t length = 2 + trial % 7;
        const Tensor x = random_input(length, 8, rng);
        const Partition p = parity_split(length, static_cast<std::size_t>(trial) % 2);
        const CouplingResult r = coupling_forward(chain.layers[0], x, p);
        for (std::size_t c : p.content)
            for (std::size_t j = 0; j < 8; ++j) REQUIRE(std::bit_cast<std::uint64_t>(r.output(c, j)) == std::bit_cast<std::uint64_t>(x(c, j)));
        worst = std::max(worst, max_abs_diff(coupling_inverse(chain.layers[0], r.output, p), x));
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("channel coupling keeps the untouched channels") {
    Rng rng(2);
    const FlowChain chain = small_chain(6, 2, SplitMode::channel, 9, 0.3);
    const Tensor x = random_input(3, 6, rng);
    const Partition p = channel_split(6, 1);
    const CouplingResult r = coupling_forward(chain.layers[1], x, p);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t c : p.content) CHECK(r.output(i, c) == x(i, c));
    CHECK(max_abs_diff(coupling_inverse(chain.layers[1], r.output, p), x) < 1e-12);
}

TEST_CASE("chain round trip, logdet additivity and antisymmetry") {
    Rng rng(19);
    for (int trial = 0; trial < 50; ++trial) {
        const FlowChain chain = small_chain(8, 8, SplitMode::attention, 100 + trial, 0.2);
        const Tensor x = random_input(4 + trial % 9, 8, rng);
        ad::Graph g;
        const FlowTrace fwd = chain_forward(g, chain, g.constant(x), attention_partitioner(nullptr, 0.25));
        double sum = 0.0;
        for (const auto& l : fwd.layer_logdets) sum += l.value().item();
        CHECK(fwd.logdet.value().item() == sum);
        const FlowTrace inv = chain_inverse(g, chain, fwd.output, fwd.partitions);
        CHECK(max_abs_diff(inv.output.value(), x) < 1e-9);
        CHECK(inv.logdet.value().item() == doctest::Approx(-fwd.logdet.value().item()).epsilon(1e-12));
    }
}

TEST_CASE("chain logdet matches the finite-difference Jacobian") {
    Rng rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        const FlowChain chain = small_chain(3, 4, SplitMode::attention, 300 + trial, 0.5);
        const Tensor x = random_input(2, 3, rng);
        const LatentState z = chain_forward(chain, x, attention_partitioner(nullptr, 0.5));
        const double fd = fd_logdet(chain, x, z.layer_partitions);
        CHECK(std::abs(z.logdet - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("partition count must match chain length") {
    const FlowChain chain = small_chain(4, 3, SplitMode::parity, 1, 0.0);
    LatentState z;
    z.values = Tensor({3, 4});
    z.layer_partitions = {parity_split(3, 0)};
    CHECK_THROWS_AS(chain_inverse(chain, z), ContractError);
}

TEST_CASE("token chains need two tokens") {
    const FlowChain chain = small_chain(4, 2, SplitMode::attention, 1, 0.0);
    CHECK_THROWS_AS(chain_forward(chain, Tensor({1, 4}), attention_partitioner(nullptr, 0.25)), ContractError);
}

TEST_CASE("log density of the identity flow at the origin") {
    LatentState z;
    z.values = Tensor({1, 5});
    CHECK(log_density(z) == doctest::Approx(-2.5 * std::log(2 * std::numbers::pi)).epsilon(1e-15));
    z.logdet_stale = true;
    CHECK_THROWS_AS(log_density(z), ContractError);
}

TEST_CASE("two-dimensional affine flow density against an explicit determinant") {
    // d = 2, one token, channel split. A zero head weight makes each layer an
    // exact affine map of the style channel.
    FlowChain chain = small_chain(2, 2, SplitMode::channel, 4, 0.0);
    chain.layers[0].block.head_b.value = Tensor::vector({0.7, 0.0, -0.4, 0.0});
    chain.layers[1].block.head_b.value = Tensor::vector({0.0, -0.3, 0.0, 1.5});
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor x = random_input(1, 2, rng);
        const LatentState z = chain_forward(chain, x, channel_partitioner());
        Eigen::Matrix2d a;
        a << std::exp(0.7), 0.0, 0.0, std::exp(-0.3);
        Eigen::Vector2d b(-0.4, 1.5);
        Eigen::Vector2d zz = a * Eigen::Vector2d(x[0], x[1]) + b;
        const double expected = -0.5 * zz.squaredNorm() - std::log(2 * std::numbers::pi) + std::log(std::abs(a.determinant()));
        CHECK(std::abs(log_density(z) - expected) <= 1e-10 * std::abs(expected));
    }
}
