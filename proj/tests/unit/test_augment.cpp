#include <cmath>
#include <filesystem>
#include <fstream>

#include "../support/toy.hpp"
#include "doctest.h"
#include "styleflow/augment.hpp"
#include "styleflow/error.hpp"

using namespace styleflow;

TEST_CASE("zero epsilon leaves the latent and the sentence unchanged") {
    const auto& f = toy::fixture();
    const Model m = toy::model(0.2);
    Rng rng(1);
    const LatentState z = encode(m, f.heldout.rows[0].tokens);
    const LatentState same = perturb_latent(z, 0.0, rng);
    CHECK(bitwise_equal(same.values, z.values));
    CHECK_FALSE(same.logdet_stale);
    CHECK(perturb_latent(z, 0.1, rng).logdet_stale);
    CHECK(same.layer_partitions == z.layer_partitions);

    PerturbationConfig pc;
    pc.epsilon = 0.0;
    pc.samples = 3;
    for (std::size_t i = 0; i < 30; ++i) {
        const TokenSequence& t = f.heldout.rows[i].tokens;
        const auto out = augment(m, t, pc, i);
        REQUIRE(out.size() == 3);
        for (const auto& s : out) {
            CHECK(s.tokens.ids == t.ids);
            CHECK(s.tokens.label == t.label);
            CHECK_FALSE(s.degenerate);
        }
    }
}

TEST_CASE("perturbation variance is epsilon squared") {
    const double eps = 0.1;
    LatentState z;
    z.values = Tensor({100, 10});
    Rng rng(42);
    // 100 draws of 1000 entries: 1e5 samples of the noise.
    double sum = 0.0, sum2 = 0.0;
    std::size_t n = 0;
    for (int draw = 0; draw < 100; ++draw) {
        const LatentState p = perturb_latent(z, eps, rng);
        for (double v : p.values.data()) {
            sum += v;
            sum2 += v * v;
            ++n;
        }
    }
    const double mean = sum / static_cast<double>(n);
    const double var = sum2 / static_cast<double>(n) - mean * mean;
    CHECK(n == 100000);
    CHECK(std::abs(var / (eps * eps) - 1.0) < 0.02);
}

TEST_CASE("noise does not depend on the latent") {
    Rng r(3);
    LatentState a;
    a.values = normal_tensor({4, 3}, 1.0, r);
    LatentState b = a;
    for (double& v : b.values.data()) v += 5.0;
    Rng ra(9), rb(9);
    const LatentState pa = perturb_latent(a, 0.3, ra), pb = perturb_latent(b, 0.3, rb);
    for (std::size_t i = 0; i < a.values.size(); ++i)
        CHECK(std::abs((pa.values[i] - a.values[i]) - (pb.values[i] - b.values[i])) < 1e-12);

    Rng rm(9);
    const LatentState masked = perturb_latent(a, 0.3, rm, {true, false, true, false});
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(masked.values(0, j) == pa.values(0, j));
        CHECK(masked.values(1, j) == a.values(1, j));
    }
}

TEST_CASE("augment returns n deterministic samples") {
    const auto& f = toy::fixture();
    const Model m = toy::model(0.2);
    PerturbationConfig pc;
    pc.epsilon = 2.0;
    pc.samples = 5;
    for (std::size_t i = 0; i < 10; ++i) {
        const TokenSequence& t = f.heldout.rows[i].tokens;
        const auto a = augment(m, t, pc, i), b = augment(m, t, pc, i);
        REQUIRE(a.size() == 5);
        for (std::size_t k = 0; k < 5; ++k) {
            CHECK(a[k].tokens == b[k].tokens);
            CHECK(a[k].variant == k);
            CHECK(a[k].tokens.label == t.label);
        }
    }
    pc.epsilon = -1.0;
    CHECK_THROWS_AS(pc.validate(), ConfigError);
}

TEST_CASE("sidecar and augmented corpus files") {
    const auto dir = std::filesystem::temp_directory_path() / "styleflow_augment";
    std::vector<AugmentRecord> recs(2);
    recs[0] = {3, 0, 0.1, true, 1, "good soup", false};
    recs[1] = {3, 1, 0.1, false, 1, "<pad>", true};
    write_augmented_corpus(dir / "aug.tsv", recs, {"negative", "positive"});
    write_augment_sidecar(dir / "aug.sidecar.csv", recs);
    std::ifstream side(dir / "aug.sidecar.csv");
    std::string line;
    std::getline(side, line);
    CHECK(line == "source_line,variant_index,epsilon,label_preserved");
    std::getline(side, line);
    CHECK(line.rfind("3,0,", 0) == 0);
    std::ifstream corpus(dir / "aug.tsv");
    std::getline(corpus, line);
    CHECK(line == "positive\tgood soup");
}
