#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "styleflow/data.hpp"

namespace styleflow {

using Words = std::vector<std::string>;

// ---------------------------------------------------------------------------
// BLEU, up to 4-grams.
//
// Clipped n-gram precisions, geometric mean, brevity penalty against the
// closest reference length (ties go to the shorter reference). A zero unigram
// match count gives 0. A zero match count at order n >= 2 is replaced by
// 1 / (total_n + 1) (add-one on empty matches), which is also what an order
// with no candidate n-grams at all receives; bleu(x, {x}) is therefore 1 for
// every nonempty x.

inline constexpr std::size_t kBleuOrder = 4;

struct BleuStats {
    std::array<std::size_t, kBleuOrder> matches{};
    std::array<std::size_t, kBleuOrder> totals{};
    std::size_t candidate_length = 0;
    std::size_t reference_length = 0;

    BleuStats& operator+=(const BleuStats& other);
};

BleuStats bleu_stats(const Words& candidate, const std::vector<Words>& references);
double bleu_from_stats(const BleuStats& stats);

/// Sentence BLEU in [0, 1]; an empty candidate scores 0.
double bleu(const Words& candidate, const std::vector<Words>& references);
/// Special tokens (other than unk) are ignored.
double bleu(const TokenSequence& candidate, const std::vector<TokenSequence>& references);
/// Corpus BLEU from summed statistics.
double corpus_bleu(const std::vector<Words>& candidates, const std::vector<std::vector<Words>>& references);

// ---------------------------------------------------------------------------
// N-gram language model with interpolated absolute discounting:
//
//   P(w | h) = (max(c(h,w) - d, 0) + d * N1+(h .) * P(w | h')) / c(h)
//
// recursing down to a uniform distribution over the model vocabulary (training
// words + </s> + <unk>). Contexts never seen in training defer to h'.

class NGramLM {
public:
    explicit NGramLM(std::size_t order = 5, double discount = 0.75);

    void train(const std::vector<Words>& sentences);

    /// log P(word | context); context holds preceding words (oldest first),
    /// with "<s>" padding for sentence starts.
    double log_prob(const std::string& word, const Words& context) const;
    /// Log probability of a sentence, including the end-of-sentence event.
    double sentence_log_prob(const Words& sentence) const;

    std::size_t order() const noexcept { return order_; }
    double discount() const noexcept { return discount_; }
    /// Prediction vocabulary (every word P(. | h) is normalized over).
    std::vector<std::string> vocabulary() const;
    std::size_t vocabulary_size() const noexcept { return words_.size(); }

    static constexpr const char* kBos = "<s>";
    static constexpr const char* kEos = "</s>";
    static constexpr const char* kUnk = "<unk>";

private:
    struct ContextStats {
        std::unordered_map<int, std::size_t> next;
        std::size_t total = 0;
    };

    int word_id(const std::string& w) const;
    double prob(int word, const std::vector<int>& context, std::size_t begin) const;

    std::size_t order_;
    double discount_;
    std::unordered_map<std::string, int> ids_;
    std::vector<std::string> words_;
    int bos_id_ = -1;
    // counts_[k] maps a context of length k to its continuation counts.
    std::vector<std::map<std::vector<int>, ContextStats>> counts_;
};

struct PerplexityResult {
    double perplexity = 0.0;
    std::size_t tokens = 0;   // scored events, end-of-sentence included
    std::size_t skipped = 0;  // empty sentences
};

PerplexityResult perplexity(const NGramLM& lm, const std::vector<Words>& sentences);

}  // namespace styleflow
