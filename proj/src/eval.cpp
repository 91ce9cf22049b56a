#include "styleflow/eval.hpp"

#include <fstream>
#include <sstream>

#include "styleflow/error.hpp"
#include "styleflow/nn.hpp"

namespace styleflow {

namespace {

std::string label_name(int label, const std::vector<std::string>& names) {
    if (label >= 0 && static_cast<std::size_t>(label) < names.size()) return names[static_cast<std::size_t>(label)];
    return std::to_string(label);
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << std::fixed << v;
    return os.str();
}

}  // namespace

void write_transfer_file(const std::filesystem::path& path, const std::vector<TransferRow>& rows,
                         const std::vector<std::string>& style_names) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& r : rows) {
        out << label_name(r.source_label, style_names) << '\t' << label_name(r.target_label, style_names) << '\t'
            << r.source << '\t' << r.output << '\n';
    }
}

std::vector<TransferRow> read_transfer_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw MissingFileError("transfer file not found: " + path.string());
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<TransferRow> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        for (;;) {
            const std::size_t tab = line.find('\t', start);
            fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        const std::string where = path.filename().string() + ":" + std::to_string(lineno);
        if (fields.size() != 4) throw DataError(where + ": expected 4 tab-separated fields, got " + std::to_string(fields.size()));
        TransferRow r{parse_label(fields[0]), parse_label(fields[1]), fields[2], fields[3]};
        if (r.source_label < 0 || r.target_label < 0) throw DataError(where + ": unknown style label");
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw DataError("transfer file " + path.string() + " is empty");
    return rows;
}

double style_accuracy(const std::vector<TransferRow>& rows, const ScorerBundle& scorer, std::size_t threads) {
    if (rows.empty()) throw DataError("no transfer outputs to score");
    std::vector<int> hit(rows.size(), 0);
    parallel_for(rows.size(), threads, [&](std::size_t i) {
        TokenSequence seq = tokenize(rows[i].output, scorer.vocab, rows[i].target_label);
        hit[i] = scorer.scorer.predict(seq) == rows[i].target_label ? 1 : 0;
    });
    std::size_t correct = 0;
    for (int h : hit) correct += static_cast<std::size_t>(h);
    return static_cast<double>(correct) / static_cast<double>(rows.size());
}

EvalReport evaluate(const std::vector<TransferRow>& rows, const EvalInputs& inputs) {
    if (rows.empty()) throw DataError("no transfer outputs to evaluate");
    if (inputs.scorer == nullptr) throw ContractError("evaluation needs a scorer");
    EvalReport report;
    report.rows = rows.size();
    report.acc = style_accuracy(rows, *inputs.scorer, inputs.threads);

    std::vector<Words> outputs, sources;
    for (const auto& r : rows) {
        outputs.push_back(split_words(r.output, false));
        sources.push_back(split_words(r.source, false));
    }
    double self_sum = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) self_sum += bleu(outputs[i], {sources[i]});
    report.self_bleu = self_sum / static_cast<double>(rows.size());

    if (inputs.references != nullptr) {
        if (inputs.references->size() != rows.size()) {
            throw DataError("reference file has " + std::to_string(inputs.references->size()) + " lines for " +
                            std::to_string(rows.size()) + " outputs");
        }
        double ref_sum = 0.0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            ref_sum += bleu(outputs[i], {split_words((*inputs.references)[i], false)});
        }
        report.ref_bleu = ref_sum / static_cast<double>(rows.size());
    }
    if (inputs.lm != nullptr) {
        const PerplexityResult out = perplexity(*inputs.lm, outputs);
        const PerplexityResult src = perplexity(*inputs.lm, sources);
        report.ppl = out.perplexity;
        report.ppl_source = src.perplexity;
        report.ppl_skipped = out.skipped;
    }
    return report;
}

std::string format_report(const EvalReport& report, const NGramLM* lm) {
    std::ostringstream os;
    os << "# self_bleu/ref_bleu: mean sentence BLEU, 4-gram, whitespace tokens, closest-length brevity penalty,"
          " add-one on zero matches at orders 2-4, 0 when no unigram matches\n";
    if (lm != nullptr) {
        os << "# ppl: " << lm->order() << "-gram LM, interpolated absolute discounting d=" << lm->discount()
           << ", unk-aware, end-of-sentence scored\n";
    }
    os << "rows=" << report.rows << "\n";
    os << "acc=" << fmt(report.acc) << "\n";
    os << "self_bleu=" << fmt(report.self_bleu) << "\n";
    if (report.ref_bleu) os << "ref_bleu=" << fmt(*report.ref_bleu) << "\n";
    if (report.ppl) {
        os << "ppl=" << fmt(*report.ppl) << "\n";
        os << "ppl_source=" << fmt(*report.ppl_source) << "\n";
        os << "ppl_skipped=" << report.ppl_skipped << "\n";
    }
    return os.str();
}

void write_report(const std::filesystem::path& path, const EvalReport& report, const NGramLM* lm) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << format_report(report, lm);
}

}  // namespace styleflow
