#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace styleflow {

using TokenId = std::int32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUnk = 1;
inline constexpr TokenId kBos = 2;
inline constexpr TokenId kEos = 3;
inline constexpr TokenId kFirstWord = 4;

inline constexpr int kNumStyles = 2;

/// Token <-> id bijection. Ids 0..3 are reserved for pad/unk/bos/eos.
class Vocabulary {
public:
    Vocabulary();

    /// Id of `token`, adding it if new.
    TokenId add(std::string_view token);
    /// Id of `token`, or kUnk.
    TokenId lookup(std::string_view token) const;
    bool contains(std::string_view token) const;
    const std::string& token(TokenId id) const;
    std::size_t size() const noexcept { return tokens_.size(); }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

    static bool is_special(TokenId id) noexcept { return id < kFirstWord; }
    static Vocabulary from_tokens(const std::vector<std::string>& tokens);

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
};

/// Token ids of one sentence plus its style label. Positions holding kPad are
/// padding.
struct TokenSequence {
    std::vector<TokenId> ids;
    int label = -1;

    std::size_t size() const noexcept { return ids.size(); }
    std::vector<bool> padding_mask() const;
    std::size_t nonpad_count() const;
    friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

struct CorpusRow {
    TokenSequence tokens;
    std::string text;
    std::size_t line = 0;  // 1-based line in the source file; 0 if generated
};

struct Corpus {
    std::vector<CorpusRow> rows;
    Vocabulary vocab;
    std::vector<std::string> style_names{"negative", "positive"};

    std::size_t count(int label) const;
};

struct LoadOptions {
    bool lowercase = true;
    bool add_boundaries = true;  // wrap each sentence in bos/eos
    const Vocabulary* vocab = nullptr;  // fixed vocabulary; unknown words -> unk
};

/// Non-padding ids of `seq`, in order.
TokenSequence strip_padding(const TokenSequence& seq);

std::vector<std::string> split_words(std::string_view sentence, bool lowercase);
/// Ids for a sentence under `vocab` (unknown words -> unk), bos/eos wrapped.
TokenSequence tokenize(std::string_view sentence, const Vocabulary& vocab, int label,
                       bool lowercase = true, bool add_boundaries = true);
/// Space-joined words, special tokens other than unk dropped.
std::string detokenize(const TokenSequence& seq, const Vocabulary& vocab);

/// "0"/"1"/"negative"/"positive" (case-insensitive); -1 when unrecognised.
int parse_label(std::string_view text);

/// Reads `label<TAB>sentence` lines. Malformed lines raise DataError naming the
/// line number; an empty file raises DataError.
Corpus load_corpus(const std::filesystem::path& path, const LoadOptions& options = {});
Corpus parse_corpus(std::string_view content, const LoadOptions& options = {},
                    std::string_view source_name = "<memory>");
void write_corpus(const std::filesystem::path& path, const Corpus& corpus);

/// Word lists of the synthetic sentiment corpus.
struct SyntheticLexicon {
    std::vector<std::string> nouns;
    std::vector<std::string> positive;
    std::vector<std::string> negative;
    std::vector<std::string> distractors;

    /// Polarity word attached to noun `noun_index` under `label`.
    const std::string& polarity_word(std::size_t noun_index, int label) const;
};

SyntheticLexicon make_synthetic_lexicon(std::size_t vocab_size);

/// Templated sentences "the NOUN was POLARITY" with optional neutral clauses
/// before or after. Each noun is tied to one word per style, so the polarity
/// word is determined by (noun, style) and the style by the polarity word.
/// Rows alternate negative/positive; deterministic in `seed`.
Corpus generate_synthetic_corpus(std::uint64_t seed, std::size_t n_per_style,
                                 std::size_t vocab_size = 200);

}  // namespace styleflow
