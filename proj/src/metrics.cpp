#include "styleflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>

#include "styleflow/error.hpp"

namespace styleflow {

namespace {

using NGramCounts = std::map<std::vector<std::string>, std::size_t>;

NGramCounts ngram_counts(const Words& words, std::size_t n) {
    NGramCounts counts;
    if (words.size() < n) return counts;
    for (std::size_t i = 0; i + n <= words.size(); ++i) {
        ++counts[Words(words.begin() + static_cast<std::ptrdiff_t>(i),
                       words.begin() + static_cast<std::ptrdiff_t>(i + n))];
    }
    return counts;
}

Words content_words(const TokenSequence& seq) {
    Words out;
    for (TokenId id : seq.ids) {
        if (Vocabulary::is_special(id) && id != kUnk) continue;
        out.push_back(std::to_string(id));
    }
    return out;
}

}  // namespace

BleuStats& BleuStats::operator+=(const BleuStats& other) {
    for (std::size_t n = 0; n < kBleuOrder; ++n) {
        matches[n] += other.matches[n];
        totals[n] += other.totals[n];
    }
    candidate_length += other.candidate_length;
    reference_length += other.reference_length;
    return *this;
}

BleuStats bleu_stats(const Words& candidate, const std::vector<Words>& references) {
    if (references.empty()) throw ContractError("bleu: at least one reference is required");
    BleuStats stats;
    stats.candidate_length = candidate.size();
    std::size_t best = references.front().size();
    for (const auto& ref : references) {
        const auto diff = [&](std::size_t len) {
            return std::abs(static_cast<long>(len) - static_cast<long>(candidate.size()));
        };
        if (diff(ref.size()) < diff(best) || (diff(ref.size()) == diff(best) && ref.size() < best)) {
            best = ref.size();
        }
    }
    stats.reference_length = best;
    for (std::size_t n = 1; n <= kBleuOrder; ++n) {
        const NGramCounts cand = ngram_counts(candidate, n);
        NGramCounts max_ref;
        for (const auto& ref : references) {
            for (const auto& [gram, c] : ngram_counts(ref, n)) max_ref[gram] = std::max(max_ref[gram], c);
        }
        for (const auto& [gram, c] : cand) {
            stats.totals[n - 1] += c;
            if (auto it = max_ref.find(gram); it != max_ref.end()) stats.matches[n - 1] += std::min(c, it->second);
        }
    }
    return stats;
}

double bleu_from_stats(const BleuStats& stats) {
    if (stats.candidate_length == 0 || stats.matches[0] == 0) return 0.0;
    double log_sum = 0.0;
    for (std::size_t n = 0; n < kBleuOrder; ++n) {
        const double m = static_cast<double>(stats.matches[n]);
        const double t = static_cast<double>(stats.totals[n]);
        const double p = stats.matches[n] == 0 ? 1.0 / (t + 1.0) : m / t;
        log_sum += std::log(p);
    }
    const double c = static_cast<double>(stats.candidate_length);
    const double r = static_cast<double>(stats.reference_length);
    const double log_bp = c > r ? 0.0 : 1.0 - r / c;
    return std::exp(log_sum / static_cast<double>(kBleuOrder) + log_bp);
}

double bleu(const Words& candidate, const std::vector<Words>& references) {
    if (candidate.empty()) return 0.0;
    return bleu_from_stats(bleu_stats(candidate, references));
}

double bleu(const TokenSequence& candidate, const std::vector<TokenSequence>& references) {
    std::vector<Words> refs;
    refs.reserve(references.size());
    for (const auto& r : references) refs.push_back(content_words(r));
    return bleu(content_words(candidate), refs);
}

double corpus_bleu(const std::vector<Words>& candidates, const std::vector<std::vector<Words>>& references) {
    if (candidates.size() != references.size()) throw ContractError("corpus_bleu: candidate/reference count mismatch");
    BleuStats total;
    for (std::size_t i = 0; i < candidates.size(); ++i) total += bleu_stats(candidates[i], references[i]);
    return bleu_from_stats(total);
}

// ---------------------------------------------------------------------------

NGramLM::NGramLM(std::size_t order, double discount) : order_(order), discount_(discount) {
    if (order == 0) throw ConfigError("n-gram order must be positive");
    if (!(discount > 0.0 && discount < 1.0)) throw ConfigError("absolute discount must lie in (0, 1)");
}

int NGramLM::word_id(const std::string& w) const {
    auto it = ids_.find(w);
    if (it != ids_.end()) return it->second;
    return ids_.at(kUnk);
}

void NGramLM::train(const std::vector<Words>& sentences) {
    ids_.clear();
    words_.clear();
    counts_.assign(order_, {});
    auto intern = [this](const std::string& w) {
        auto [it, inserted] = ids_.emplace(w, static_cast<int>(words_.size()));
        if (inserted) words_.push_back(w);
        return it->second;
    };
    intern(kEos);
    intern(kUnk);
    bos_id_ = -2;  // context-only symbol, outside the prediction vocabulary

    std::size_t used = 0;
    for (const auto& s : sentences) {
        if (s.empty()) continue;
        ++used;
        std::vector<int> seq(order_ - 1, bos_id_);
        for (const auto& w : s) seq.push_back(intern(w));
        seq.push_back(ids_.at(kEos));
        for (std::size_t i = order_ - 1; i < seq.size(); ++i) {
            for (std::size_t k = 0; k < order_; ++k) {
                std::vector<int> ctx(seq.begin() + static_cast<std::ptrdiff_t>(i - k),
                                     seq.begin() + static_cast<std::ptrdiff_t>(i));
                ContextStats& st = counts_[k][ctx];
                ++st.next[seq[i]];
                ++st.total;
            }
        }
    }
    if (used == 0) throw DataError("language model training corpus is empty");
}

double NGramLM::prob(int word, const std::vector<int>& context, std::size_t begin) const {
    const std::size_t k = context.size() - begin;
    const double lower = k == 0 ? 1.0 / static_cast<double>(words_.size()) : prob(word, context, begin + 1);
    const std::vector<int> ctx(context.begin() + static_cast<std::ptrdiff_t>(begin), context.end());
    const auto& table = counts_[k];
    auto it = table.find(ctx);
    if (it == table.end() || it->second.total == 0) return lower;
    const ContextStats& st = it->second;
    double c = 0.0;
    if (auto w = st.next.find(word); w != st.next.end()) c = static_cast<double>(w->second);
    const double total = static_cast<double>(st.total);
    const double types = static_cast<double>(st.next.size());
    return (std::max(c - discount_, 0.0) + discount_ * types * lower) / total;
}

double NGramLM::log_prob(const std::string& word, const Words& context) const {
    if (counts_.empty()) throw ContractError("language model is not trained");
    if (word == kBos) throw ContractError("<s> is not a predictable word");
    std::vector<int> ctx;
    const std::size_t keep = std::min(context.size(), order_ - 1);
    for (std::size_t i = context.size() - keep; i < context.size(); ++i) {
        ctx.push_back(context[i] == kBos ? bos_id_ : word_id(context[i]));
    }
    // Pad short contexts with <s>, matching how training sentences are framed.
    while (ctx.size() < order_ - 1) ctx.insert(ctx.begin(), bos_id_);
    return std::log(prob(word_id(word), ctx, 0));
}

double NGramLM::sentence_log_prob(const Words& sentence) const {
    Words context;
    double total = 0.0;
    for (const auto& w : sentence) {
        total += log_prob(w, context);
        context.push_back(w);
    }
    return total + log_prob(kEos, context);
}

std::vector<std::string> NGramLM::vocabulary() const { return words_; }

PerplexityResult perplexity(const NGramLM& lm, const std::vector<Words>& sentences) {
    PerplexityResult result;
    double nll = 0.0;
    for (const auto& s : sentences) {
        if (s.empty()) {
            ++result.skipped;
            continue;
        }
        nll -= lm.sentence_log_prob(s);
        result.tokens += s.size() + 1;
    }
    if (result.tokens == 0) throw DataError("perplexity: no scorable sentences");
    result.perplexity = std::exp(nll / static_cast<double>(result.tokens));
    return result;
}

}  // namespace styleflow
