#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "styleflow/checkpoint.hpp"
#include "styleflow/metrics.hpp"

namespace styleflow {

/// One line of a transfer output file:
/// `source_label<TAB>target_label<TAB>source<TAB>output`.
struct TransferRow {
    int source_label = -1;
    int target_label = -1;
    std::string source;
    std::string output;
};

void write_transfer_file(const std::filesystem::path& path, const std::vector<TransferRow>& rows,
                         const std::vector<std::string>& style_names);
/// DataError on malformed lines and on an empty file.
std::vector<TransferRow> read_transfer_file(const std::filesystem::path& path);

/// Fraction of outputs the scorer assigns to their target label. Throws
/// DataError on empty input.
double style_accuracy(const std::vector<TransferRow>& rows, const ScorerBundle& scorer, std::size_t threads = 1);

struct EvalReport {
    std::size_t rows = 0;
    double acc = 0.0;
    double self_bleu = 0.0;
    std::optional<double> ref_bleu;
    std::optional<double> ppl;
    std::optional<double> ppl_source;
    std::size_t ppl_skipped = 0;
};

struct EvalInputs {
    const ScorerBundle* scorer = nullptr;
    const NGramLM* lm = nullptr;                       // perplexity off when null
    const std::vector<std::string>* references = nullptr;  // ref-BLEU off when null
    std::size_t threads = 1;
};

EvalReport evaluate(const std::vector<TransferRow>& rows, const EvalInputs& inputs);

/// Flat `key=value` lines, preceded by `#` lines stating the BLEU and LM
/// settings.
void write_report(const std::filesystem::path& path, const EvalReport& report, const NGramLM* lm);
std::string format_report(const EvalReport& report, const NGramLM* lm);

}  // namespace styleflow
