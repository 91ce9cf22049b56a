#include "styleflow/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "styleflow/error.hpp"
#include "styleflow/rng.hpp"

namespace styleflow {

Vocabulary::Vocabulary() {
    for (const char* t : {"<pad>", "<unk>", "<bos>", "<eos>"}) {
        index_.emplace(t, static_cast<TokenId>(tokens_.size()));
        tokens_.emplace_back(t);
    }
}

TokenId Vocabulary::add(std::string_view token) {
    if (auto it = index_.find(std::string(token)); it != index_.end()) return it->second;
    const auto id = static_cast<TokenId>(tokens_.size());
    tokens_.emplace_back(token);
    index_.emplace(tokens_.back(), id);
    return id;
}

TokenId Vocabulary::lookup(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
    return index_.count(std::string(token)) != 0;
}

const std::string& Vocabulary::token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
        throw VocabularyError("token id " + std::to_string(id) + " outside vocabulary of size " +
                              std::to_string(tokens_.size()));
    }
    return tokens_[static_cast<std::size_t>(id)];
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
    Vocabulary v;
    if (tokens.size() < kFirstWord) throw DataError("vocabulary lacks reserved tokens");
    for (std::size_t i = 0; i < kFirstWord; ++i) {
        if (tokens[i] != v.tokens_[i]) throw DataError("vocabulary reserved ids are inconsistent");
    }
    for (std::size_t i = kFirstWord; i < tokens.size(); ++i) {
        if (v.contains(tokens[i])) throw DataError("duplicate vocabulary entry '" + tokens[i] + "'");
        v.add(tokens[i]);
    }
    return v;
}

std::vector<bool> TokenSequence::padding_mask() const {
    std::vector<bool> mask(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) mask[i] = ids[i] == kPad;
    return mask;
}

std::size_t TokenSequence::nonpad_count() const {
    return static_cast<std::size_t>(std::count_if(ids.begin(), ids.end(), [](TokenId t) { return t != kPad; }));
}

std::size_t Corpus::count(int label) const {
    return static_cast<std::size_t>(
        std::count_if(rows.begin(), rows.end(), [&](const CorpusRow& r) { return r.tokens.label == label; }));
}

TokenSequence strip_padding(const TokenSequence& seq) {
    TokenSequence out;
    out.label = seq.label;
    for (TokenId id : seq.ids)
        if (id != kPad) out.ids.push_back(id);
    return out;
}

std::vector<std::string> split_words(std::string_view sentence, bool lowercase) {
    std::vector<std::string> words;
    std::string current;
    for (char c : sentence) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!current.empty()) words.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(lowercase ? static_cast<char>(std::tolower(static_cast<unsigned char>(c))) : c);
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

TokenSequence tokenize(std::string_view sentence, const Vocabulary& vocab, int label, bool lowercase,
                       bool add_boundaries) {
    TokenSequence seq;
    seq.label = label;
    if (add_boundaries) seq.ids.push_back(kBos);
    for (const auto& w : split_words(sentence, lowercase)) seq.ids.push_back(vocab.lookup(w));
    if (add_boundaries) seq.ids.push_back(kEos);
    return seq;
}

std::string detokenize(const TokenSequence& seq, const Vocabulary& vocab) {
    std::string out;
    for (TokenId id : seq.ids) {
        if (Vocabulary::is_special(id) && id != kUnk) continue;
        if (!out.empty()) out.push_back(' ');
        out += vocab.token(id);
    }
    return out;
}

int parse_label(std::string_view text) {
    std::string t;
    for (char c : text) {
        if (!std::isspace(static_cast<unsigned char>(c)))
            t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (t == "0" || t == "negative") return 0;
    if (t == "1" || t == "positive") return 1;
    return -1;
}

Corpus parse_corpus(std::string_view content, const LoadOptions& options, std::string_view source_name) {
    Corpus corpus;
    if (options.vocab) corpus.vocab = *options.vocab;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < content.size()) {
        std::size_t end = content.find('\n', start);
        if (end == std::string_view::npos) end = content.size();
        std::string_view line = content.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        const std::size_t tab = line.find('\t');
        const std::string where = std::string(source_name) + ":" + std::to_string(line_no);
        if (tab == std::string_view::npos) throw DataError(where + ": missing tab separator");
        const int label = parse_label(line.substr(0, tab));
        if (label < 0) {
            throw DataError(where + ": unknown style label '" + std::string(line.substr(0, tab)) + "'");
        }
        const std::string_view sentence = line.substr(tab + 1);
        const auto words = split_words(sentence, options.lowercase);
        if (words.empty()) throw DataError(where + ": empty sentence");
        CorpusRow row;
        row.line = line_no;
        row.tokens.label = label;
        if (options.add_boundaries) row.tokens.ids.push_back(kBos);
        for (const auto& w : words) {
            row.tokens.ids.push_back(options.vocab ? corpus.vocab.lookup(w) : corpus.vocab.add(w));
        }
        if (options.add_boundaries) row.tokens.ids.push_back(kEos);
        std::string text;
        for (const auto& w : words) {
            if (!text.empty()) text.push_back(' ');
            text += w;
        }
        row.text = std::move(text);
        corpus.rows.push_back(std::move(row));
    }
    if (corpus.rows.empty()) throw DataError(std::string(source_name) + ": corpus is empty");
    return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, const LoadOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFileError("cannot open corpus file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_corpus(ss.str(), options, path.filename().string());
}

void write_corpus(const std::filesystem::path& path, const Corpus& corpus) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write corpus file " + path.string());
    for (const auto& row : corpus.rows) out << row.tokens.label << '\t' << row.text << '\n';
}

// ---------------------------------------------------------------------------
// Synthetic corpus

namespace {

const std::vector<std::string> kNouns = {
    "food", "service", "staff", "pizza", "burger", "coffee", "waiter", "room", "menu", "price",
    "pasta", "salad", "soup", "steak", "sushi", "dessert", "bread", "wine", "beer", "tea",
    "music", "decor", "patio", "parking", "location", "owner", "chef", "portion", "sauce", "fries",
    "chicken", "rice", "noodles", "breakfast", "lunch", "dinner", "hotel", "bar", "bartender", "table",
    "line", "delivery", "cake", "pie", "sandwich", "taco", "curry", "omelet", "bagel", "juice"};

const std::vector<std::string> kPositive = {
    "great", "delicious", "friendly", "amazing", "excellent", "wonderful", "fantastic", "tasty",
    "perfect", "lovely", "superb", "fresh", "awesome", "pleasant", "outstanding", "charming",
    "delightful", "helpful", "brilliant", "splendid", "terrific", "marvelous", "impressive", "superior",
    "flawless"};

const std::vector<std::string> kNegative = {
    "awful", "bland", "rude", "terrible", "horrible", "disgusting", "dreadful", "stale",
    "mediocre", "gross", "lousy", "soggy", "nasty", "unpleasant", "disappointing", "greasy",
    "filthy", "unhelpful", "poor", "burnt", "overpriced", "cold", "slow", "dirty",
    "inedible"};

const std::vector<std::string> kDistractors = {
    "tuesday", "monday", "friday", "sunday", "saturday", "weekend", "morning", "evening", "night", "noon",
    "friend", "sister", "brother", "mother", "father", "cousin", "boss", "family", "team", "neighbor",
    "downtown", "airport", "station", "campus", "mall", "beach", "park", "office", "highway", "corner",
    "birthday", "holiday", "meeting", "game", "concert", "movie", "trip", "party", "wedding", "class",
    "car", "bus", "train", "bike", "taxi", "umbrella", "jacket", "laptop", "phone", "book",
    "january", "february", "march", "april", "may", "june", "july", "august", "september", "october",
    "rain", "snow", "heat", "wind", "storm", "fog", "sunset", "sunrise", "spring", "autumn",
    "kids", "dog", "cat", "parents", "roommate", "coworker", "client", "date", "guest", "crowd",
    "city", "town", "village", "street", "avenue", "mountain", "lake", "river", "bridge", "tower",
    "paper", "radio", "camera", "guitar", "piano", "ticket", "map", "bag", "wallet", "watch"};

// Words used by the templates themselves.
const std::vector<std::string> kFunctionWords = {"the", "was", "we", "went", "on", "with", "my",
                                                 "at", "after", "a", "came", "for", "our"};

std::vector<std::string> take(const std::vector<std::string>& base, std::size_t n, std::string_view stem) {
    std::vector<std::string> out(base.begin(), base.begin() + static_cast<std::ptrdiff_t>(std::min(n, base.size())));
    for (std::size_t i = out.size(); i < n; ++i) out.push_back(std::string(stem) + std::to_string(i));
    return out;
}

}  // namespace

const std::string& SyntheticLexicon::polarity_word(std::size_t noun_index, int label) const {
    const auto& lex = label == 1 ? positive : negative;
    return lex[noun_index % lex.size()];
}

SyntheticLexicon make_synthetic_lexicon(std::size_t vocab_size) {
    if (vocab_size < 50) throw ContractError("synthetic corpus needs vocab_size >= 50");
    const std::size_t budget = vocab_size - kFirstWord - kFunctionWords.size();
    SyntheticLexicon lex;
    const std::size_t n_nouns = budget / 5;
    const std::size_t n_polar = std::max<std::size_t>(2, budget / 10);
    lex.nouns = take(kNouns, n_nouns, "noun");
    lex.positive = take(kPositive, n_polar, "goodword");
    lex.negative = take(kNegative, n_polar, "badword");
    lex.distractors = take(kDistractors, budget - n_nouns - 2 * n_polar, "thing");
    return lex;
}

Corpus generate_synthetic_corpus(std::uint64_t seed, std::size_t n_per_style, std::size_t vocab_size) {
    const SyntheticLexicon lex = make_synthetic_lexicon(vocab_size);
    Rng rng(derive_seed(seed, 0x5a17));
    auto pick = [&rng](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };

    auto clause = [&]() -> std::vector<std::string> {
        const std::string& d = lex.distractors[pick(lex.distractors.size())];
        switch (pick(4)) {
            case 0: return {"on", d};
            case 1: return {"with", "my", d};
            case 2: return {"at", "the", d};
            default: return {"we", "came", "for", "the", d};
        }
    };

    Corpus corpus;
    // Register every lexicon word so the vocabulary does not depend on sampling.
    for (const auto& w : kFunctionWords) corpus.vocab.add(w);
    for (const auto* list : {&lex.nouns, &lex.positive, &lex.negative, &lex.distractors})
        for (const auto& w : *list) corpus.vocab.add(w);

    for (std::size_t i = 0; i < 2 * n_per_style; ++i) {
        const int label = static_cast<int>(i % 2);
        const std::size_t noun = pick(lex.nouns.size());
        std::vector<std::string> words{"the", lex.nouns[noun], "was", lex.polarity_word(noun, label)};
        switch (pick(3)) {
            case 0: break;
            case 1: {
                auto c = clause();
                words.insert(words.begin(), c.begin(), c.end());
                break;
            }
            default: {
                auto c = clause();
                words.insert(words.end(), c.begin(), c.end());
                break;
            }
        }
        CorpusRow row;
        row.tokens.label = label;
        row.tokens.ids.push_back(kBos);
        std::string text;
        for (const auto& w : words) {
            row.tokens.ids.push_back(corpus.vocab.lookup(w));
            if (!text.empty()) text.push_back(' ');
            text += w;
        }
        row.tokens.ids.push_back(kEos);
        row.text = std::move(text);
        corpus.rows.push_back(std::move(row));
    }
    return corpus;
}

}  // namespace styleflow
