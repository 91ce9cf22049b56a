#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "styleflow/data.hpp"
#include "styleflow/error.hpp"
#include "styleflow/metrics.hpp"
#include "styleflow/optim.hpp"
#include "styleflow/rng.hpp"

using namespace styleflow;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
    const auto dir = std::filesystem::temp_directory_path() / "styleflow_unit";
    std::filesystem::create_directories(dir);
    const auto p = dir / name;
    std::ofstream(p, std::ios::trunc) << content;
    return p;
}

Words words(const std::string& s) { return split_words(s, false); }

}  // namespace

TEST_CASE("corpus line parses into label and bos/eos-wrapped ids") {
    const Corpus c = parse_corpus("1\tgreat food\n");
    REQUIRE(c.rows.size() == 1);
    const TokenSequence& t = c.rows[0].tokens;
    CHECK(t.label == 1);
    REQUIRE(t.ids.size() == 4);
    CHECK(t.ids[0] == kBos);
    CHECK(c.vocab.token(t.ids[1]) == "great");
    CHECK(c.vocab.token(t.ids[2]) == "food");
    CHECK(t.ids[3] == kEos);
    CHECK(c.rows[0].line == 1);
}

TEST_CASE("corpus errors") {
    SUBCASE("missing tab names the line") {
        try {
            parse_corpus("0\tfine\n1 no tab here\n", {}, "x.tsv");
            FAIL("expected DataError");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find("x.tsv:2") != std::string::npos);
        }
    }
    SUBCASE("empty file") {
        CHECK_THROWS_AS(load_corpus(temp_file("empty.tsv", "")), DataError);
    }
    SUBCASE("unknown label") { CHECK_THROWS_AS(parse_corpus("neutral\tok\n"), DataError); }
    SUBCASE("missing file") { CHECK_THROWS_AS(load_corpus("/nonexistent/corpus.tsv"), MissingFileError); }
}

TEST_CASE("labels accept digits and names") {
    CHECK(parse_label("0") == 0);
    CHECK(parse_label("Positive") == 1);
    CHECK(parse_label("negative") == 0);
    CHECK(parse_label("2") == -1);
}

TEST_CASE("vocabulary reserves the special ids and round-trips text") {
    Vocabulary v;
    CHECK(v.size() == 4);
    CHECK(v.lookup("anything") == kUnk);
    const TokenId id = v.add("word");
    CHECK(id == kFirstWord);
    CHECK(v.add("word") == id);
    for (const std::string s : {"the food was great", "a b c", "x"}) {
        Vocabulary w;
        for (const auto& t : split_words(s, true)) w.add(t);
        CHECK(detokenize(tokenize(s, w, 0), w) == s);
    }
}

TEST_CASE("corpus file round trip keeps rows and line numbers") {
    const auto p = temp_file("rt.tsv", "0\tthe soup was cold\n\n1\tthe soup was hot\n");
    const Corpus c = load_corpus(p);
    REQUIRE(c.rows.size() == 2);
    CHECK(c.rows[1].line == 3);
    CHECK(c.count(0) == 1);
    write_corpus(p, c);
    const Corpus again = load_corpus(p);
    CHECK(again.rows[1].text == "the soup was hot");
}

TEST_CASE("synthetic corpus is balanced, deterministic and lexically separable") {
    const Corpus a = generate_synthetic_corpus(5, 1000, 200);
    const Corpus b = generate_synthetic_corpus(5, 1000, 200);
    CHECK(a.rows.size() == 2000);
    CHECK(a.count(0) == 1000);
    CHECK(a.count(1) == 1000);
    CHECK(a.vocab.size() >= 150);
    CHECK(a.vocab.size() <= 250);
    for (std::size_t i = 0; i < a.rows.size(); ++i) REQUIRE(a.rows[i].tokens == b.rows[i].tokens);

    const SyntheticLexicon lex = make_synthetic_lexicon(200);
    const std::set<std::string> pos(lex.positive.begin(), lex.positive.end());
    const std::set<std::string> neg(lex.negative.begin(), lex.negative.end());
    for (const auto& w : pos) CHECK(neg.count(w) == 0);
    for (const CorpusRow& r : a.rows) {
        const auto ws = split_words(r.text, false);
        const auto n_pos = std::count_if(ws.begin(), ws.end(), [&](const auto& w) { return pos.count(w) > 0; });
        const auto n_neg = std::count_if(ws.begin(), ws.end(), [&](const auto& w) { return neg.count(w) > 0; });
        if (r.tokens.label == 1) {
            REQUIRE(n_pos >= 1);
            REQUIRE(n_neg == 0);
        } else {
            REQUIRE(n_neg >= 1);
            REQUIRE(n_pos == 0);
        }
    }
}

TEST_CASE("bleu: identity, disjoint and a hand-evaluated case") {
    CHECK(bleu(words("the cat sat on the mat"), {words("the cat sat on the mat")}) == 1.0);
    CHECK(bleu(words("x"), {words("x")}) == 1.0);
    CHECK(bleu(words("a b c d"), {words("e f g h")}) == 0.0);
    CHECK(bleu(Words{}, {words("a")}) == 0.0);

    // Unigram: "the" x3 clipped to 1 of 3. Bigram: 0 of 2 -> 1/3. Trigram:
    // 0 of 1 -> 1/2. Four-gram: none -> 1/1. Equal lengths, no penalty.
    const double expected = std::pow((1.0 / 3.0) * (1.0 / 3.0) * (1.0 / 2.0) * 1.0, 0.25);
    CHECK(bleu(words("the the the"), {words("the cat sat")}) == doctest::Approx(expected).epsilon(1e-12));

    // Brevity: candidate 2 words, reference 4 -> penalty exp(1 - 4/2).
    const double bp = std::exp(1.0 - 2.0);
    const double p = std::pow(1.0 * 1.0 * 1.0 * 1.0, 0.25);
    CHECK(bleu(words("a b"), {words("a b c d")}) == doctest::Approx(bp * p).epsilon(1e-12));
}

TEST_CASE("bleu on token sequences ignores boundary tokens") {
    Vocabulary w;
    w.add("good");
    w.add("food");
    const TokenSequence x = tokenize("good food", w, 1);
    TokenSequence y = x;
    y.ids.erase(y.ids.begin());
    CHECK(bleu(x, {y}) == 1.0);
}

TEST_CASE("language model distributions are normalized") {
    const Corpus c = generate_synthetic_corpus(3, 200, 120);
    std::vector<Words> sents;
    for (const auto& r : c.rows) sents.push_back(words(r.text));
    NGramLM lm(5, 0.75);
    lm.train(sents);
    const auto vocab = lm.vocabulary();
    Rng rng(8);
    double worst = 0.0;
    for (int trial = 0; trial < 40; ++trial) {
        const Words& s = sents[std::uniform_int_distribution<std::size_t>(0, sents.size() - 1)(rng)];
        const std::size_t cut = std::uniform_int_distribution<std::size_t>(0, s.size())(rng);
        Words ctx(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(cut));
        ctx.insert(ctx.begin(), 4, NGramLM::kBos);
        if (trial % 5 == 0) ctx.push_back("never-seen");
        double total = 0.0;
        for (const auto& w : vocab) total += std::exp(lm.log_prob(w, ctx));
        worst = std::max(worst, std::abs(total - 1.0));
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("language model perplexities") {
    SUBCASE("single repeated sentence") {
        NGramLM lm(5, 0.75);
        lm.train(std::vector<Words>(50, words("the food was great")));
        const auto r = perplexity(lm, {words("the food was great")});
        CHECK(r.perplexity >= 1.0);
        CHECK(r.perplexity < 1.2);
        CHECK(r.tokens == 5);
    }
    SUBCASE("training text beats shuffled text") {
        const Corpus c = generate_synthetic_corpus(4, 300, 150);
        std::vector<Words> sents, shuffled;
        Rng rng(2);
        for (const auto& r : c.rows) {
            sents.push_back(words(r.text));
            Words s = sents.back();
            std::shuffle(s.begin(), s.end(), rng);
            shuffled.push_back(s);
        }
        NGramLM lm;
        lm.train(sents);
        CHECK(perplexity(lm, sents).perplexity < perplexity(lm, shuffled).perplexity);
    }
    SUBCASE("unseen tokens stay finite; empty sentences are skipped") {
        NGramLM lm;
        lm.train({words("a b c")});
        const auto r = perplexity(lm, {words("zzz qqq"), Words{}});
        CHECK(std::isfinite(r.perplexity));
        CHECK(r.skipped == 1);
    }
}

TEST_CASE("adam: first steps match the update rule") {
    Parameter p("p", Tensor::vector({1.0, -2.0}));
    Adam opt({&p}, AdamConfig{.lr = 0.1});
    p.grad = Tensor::vector({0.5, -3.0});
    opt.step();
    // Step 1: m_hat = g, v_hat = g^2, so each entry moves by lr * g/(|g| + eps).
    CHECK(p.value[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-14));
    CHECK(p.value[1] == doctest::Approx(-2.0 + 0.1 * 3.0 / (3.0 + 1e-8)).epsilon(1e-14));
    CHECK(p.grad[0] == 0.0);

    p.grad = Tensor::vector({0.25, 0.0});
    opt.step();
    const double m = 0.9 * 0.05 + 0.1 * 0.25, v = 0.999 * 0.00025 + 0.001 * 0.0625;
    const double mhat = m / (1 - 0.81), vhat = v / (1 - 0.999 * 0.999);
    CHECK(p.value[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8) - 0.1 * mhat / (std::sqrt(vhat) + 1e-8))
                            .epsilon(1e-12));
    CHECK(opt.steps() == 2);
}

TEST_CASE("adam minimizes a quadratic") {
    Parameter p("p", Tensor::vector({3.0, -4.0}));
    Adam opt({&p}, AdamConfig{.lr = 0.05});
    for (int i = 0; i < 2000; ++i) {
        p.grad = Tensor::vector({2 * p.value[0], 2 * p.value[1]});
        opt.step();
    }
    CHECK(std::abs(p.value[0]) < 1e-3);
    CHECK(std::abs(p.value[1]) < 1e-3);
}

TEST_CASE("derived seeds separate streams and rng state round-trips") {
    CHECK(derive_seed(1, 2) != derive_seed(1, 3));
    CHECK(derive_seed(1, 2, 0) != derive_seed(1, 2, 1));
    CHECK(derive_seed(7, 9, 4) == derive_seed(7, 9, 4));
    Rng a(5);
    a();
    const std::string s = rng_state(a);
    Rng b;
    set_rng_state(b, s);
    CHECK(a() == b());
}
