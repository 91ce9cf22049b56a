#include "styleflow/commands.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "styleflow/checkpoint.hpp"
#include "styleflow/data.hpp"
#include "styleflow/error.hpp"
#include "styleflow/nn.hpp"

namespace styleflow {

namespace {

constexpr std::uint64_t kSynthStream = 0x5e7;
constexpr std::uint64_t kScorerInitStream = 0x5c0;
constexpr std::uint64_t kEvalScorerStream = 0xe5c;

Corpus load_with(const Config& config, const std::string& key_value, const Vocabulary* vocab) {
    LoadOptions opts;
    opts.vocab = vocab;
    return load_corpus(config.resolve(key_value), opts);
}

int resolve_target(const std::string& wanted, int source_label) {
    if (wanted == "opposite") return (source_label + 1) % kNumStyles;
    const int t = parse_label(wanted);
    if (t < 0) throw ConfigError("target_style: unknown style '" + wanted + "'");
    return t;
}

std::string fixed(double v, int digits = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& corpus_path) {
    std::filesystem::path p = corpus_path;
    p.replace_extension(".sidecar.csv");
    return p;
}

void cmd_synth(const Config& config, std::ostream& log) {
    config.validate();
    auto emit = [&](const std::string& key_value, std::uint64_t stream, std::size_t per_style) {
        const Corpus c = generate_synthetic_corpus(derive_seed(config.seed, kSynthStream, stream), per_style,
                                                   config.synth_vocab);
        write_corpus(config.resolve(key_value), c);
        log << "synth " << key_value << " rows=" << c.rows.size() << " vocab=" << c.vocab.size() << "\n";
    };
    emit(config.train_data, 0, config.synth_per_style);
    emit(config.test_data, 1, config.synth_test_per_style);
    if (!config.eval_data.empty()) emit(config.eval_data, 2, config.synth_per_style);
}

void cmd_train_scorer(const Config& config, std::ostream& log) {
    config.validate();
    const Corpus train = load_with(config, config.train_data, nullptr);
    log << "train-scorer data=" << config.train_data << " rows=" << train.rows.size()
        << " negative=" << train.count(0) << " positive=" << train.count(1) << " vocab=" << train.vocab.size()
        << "\n";
    Scorer scorer = Scorer::initialize(train.vocab.size(), config.scorer_config(),
                                       derive_seed(config.seed, kScorerInitStream));
    const ScorerTrainReport rep = train_scorer(scorer, train.rows, config.scorer_train_config());
    save_scorer(config.resolve(config.scorer_checkpoint), scorer, train.vocab, config.seed);
    log << "scorer heldout_acc=" << fixed(rep.heldout_accuracy) << " -> " << config.scorer_checkpoint << "\n";

    if (config.eval_data.empty()) return;
    const Corpus held = load_with(config, config.eval_data, &train.vocab);
    Scorer eval_scorer = Scorer::initialize(train.vocab.size(), config.scorer_config(),
                                            derive_seed(config.seed, kEvalScorerStream));
    ScorerTrainConfig etc = config.scorer_train_config();
    etc.seed = derive_seed(config.seed, kEvalScorerStream, 1);
    const ScorerTrainReport erep = train_scorer(eval_scorer, held.rows, etc);
    save_scorer(config.resolve(config.eval_scorer_checkpoint), eval_scorer, train.vocab, config.seed);
    log << "eval scorer data=" << config.eval_data << " rows=" << held.rows.size()
        << " heldout_acc=" << fixed(erep.heldout_accuracy) << " -> " << config.eval_scorer_checkpoint << "\n";
}

void cmd_train(const Config& config, std::ostream& log) {
    config.validate();
    TrainConfig tc = config.train_config();
    std::optional<Model> model;
    TrainingState state;
    if (config.resume) {
        auto [m, s] = load_model(config.resolve(config.model_checkpoint));
        model.emplace(std::move(m));
        state = std::move(s);
        log << "resume " << config.model_checkpoint << " at step " << state.step << "\n";
    } else {
        ScorerBundle bundle = load_scorer(config.resolve(config.scorer_checkpoint));
        model.emplace(Model::create(std::move(bundle.vocab), std::move(bundle.scorer), config.model_config(),
                                    config.seed, config.head_init_std));
    }
    const Corpus corpus = load_with(config, config.train_data, &model->vocab);
    if (!config.augment_data.empty()) tc.extra_rows = load_with(config, config.augment_data, &model->vocab).rows;
    log << "train data=" << config.train_data << " rows=" << corpus.rows.size() << " extra=" << tc.extra_rows.size()
        << " split=" << config.split << "\n";
    const TrainReport rep = styleflow::train(*model, corpus.rows, tc, state, [&](const StepLog& s) {
        if (s.step % 20 == 0) {
            log << "step " << s.step << " epoch " << s.epoch << " total=" << fixed(s.mean.total)
                << " self=" << fixed(s.mean.self_loss) << " cycle=" << fixed(s.mean.cycle_loss)
                << " content=" << fixed(s.mean.content_loss) << " style=" << fixed(s.mean.style_loss) << "\n";
        }
    });
    log << "trained " << rep.final_step << " steps -> " << config.model_checkpoint << ", " << config.metrics_csv
        << "\n";
}

void cmd_transfer(const Config& config, const std::string& input, std::ostream& log,
                  const std::optional<std::string>& target) {
    config.validate();
    const std::string source = input.empty() ? config.test_data : input;
    TransferOptions opts;
    opts.replace_style = config.replace_style;
    const auto [model, state] = load_model(config.resolve(config.model_checkpoint));
    const Corpus corpus = load_with(config, source, &model.vocab);
    const std::string wanted = target.value_or(config.target_style);
    std::vector<TransferRow> rows(corpus.rows.size());
    parallel_for(rows.size(), config.threads, [&](std::size_t i) {
        const CorpusRow& row = corpus.rows[i];
        const int t = resolve_target(wanted, row.tokens.label);
        const TransferRecord rec = transfer(model, row.tokens, t, opts);
        rows[i] = {row.tokens.label, t, detokenize(rec.source, model.vocab), detokenize(rec.output, model.vocab)};
    });
    write_transfer_file(config.resolve(config.transfer_output), rows, corpus.style_names);
    log << "transfer " << source << " rows=" << rows.size() << " target=" << wanted << " -> " << config.transfer_output
        << "\n";
}

void cmd_augment(const Config& config, const std::string& input, std::ostream& log) {
    config.validate();
    const std::string source = input.empty() ? config.test_data : input;
    const PerturbationConfig pc = config.perturbation_config();
    const auto [model, state] = load_model(config.resolve(config.model_checkpoint));
    const Corpus corpus = load_with(config, source, &model.vocab);
    std::vector<std::vector<AugmentRecord>> per_row(corpus.rows.size());
    parallel_for(corpus.rows.size(), config.threads, [&](std::size_t i) {
        const CorpusRow& row = corpus.rows[i];
        for (const AugmentedSample& s : augment(model, row.tokens, pc, row.line)) {
            AugmentRecord r;
            r.source_line = row.line;
            r.variant = s.variant;
            r.epsilon = pc.epsilon;
            r.label = row.tokens.label;
            r.degenerate = s.degenerate;
            r.label_preserved = !s.degenerate && model.scorer.predict(s.tokens) == row.tokens.label;
            r.sentence = render_sample(s, model.vocab);
            per_row[i].push_back(std::move(r));
        }
    });
    std::vector<AugmentRecord> records;
    std::size_t preserved = 0;
    for (auto& rs : per_row) {
        for (auto& r : rs) {
            preserved += r.label_preserved ? 1 : 0;
            records.push_back(std::move(r));
        }
    }
    const std::filesystem::path out = config.resolve(config.augment_output);
    write_augmented_corpus(out, records, corpus.style_names);
    write_augment_sidecar(sidecar_path(out), records);
    log << "augment " << source << " rows=" << corpus.rows.size() << " samples=" << records.size()
        << " label_preserved=" << fixed(static_cast<double>(preserved) / static_cast<double>(records.size()))
        << " -> " << config.augment_output << "\n";
}

EvalReport cmd_eval(const Config& config, const std::string& input, std::ostream& log) {
    config.validate();
    const std::string source = input.empty() ? config.transfer_output : input;
    const std::vector<TransferRow> rows = read_transfer_file(config.resolve(source));
    const ScorerBundle scorer = load_scorer(config.resolve(config.eval_scorer_checkpoint));

    const std::string lm_data = config.eval_data.empty() ? config.train_data : config.eval_data;
    LoadOptions lm_opts;
    lm_opts.add_boundaries = false;
    const Corpus lm_corpus = load_corpus(config.resolve(lm_data), lm_opts);
    std::vector<Words> sentences;
    sentences.reserve(lm_corpus.rows.size());
    for (const CorpusRow& r : lm_corpus.rows) sentences.push_back(split_words(r.text, false));
    NGramLM lm(config.lm_order, config.lm_discount);
    lm.train(sentences);

    std::vector<std::string> refs;
    if (!config.references.empty()) {
        const std::filesystem::path ref_path = config.resolve(config.references);
        if (!std::filesystem::exists(ref_path)) throw MissingFileError("reference file not found: " + ref_path.string());
        std::ifstream in(ref_path);
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            refs.push_back(line);
        }
    }
    EvalInputs inputs;
    inputs.scorer = &scorer;
    inputs.lm = &lm;
    inputs.references = config.references.empty() ? nullptr : &refs;
    inputs.threads = config.threads;
    const EvalReport report = evaluate(rows, inputs);

    const std::filesystem::path out = config.resolve(config.report);
    if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
    std::ofstream f(out, std::ios::trunc);
    if (!f) throw IoError("cannot write " + out.string());
    f << "# outputs=" << config.relative(config.resolve(source))
      << " scorer=" << config.relative(config.resolve(config.eval_scorer_checkpoint))
      << " lm_data=" << config.relative(config.resolve(lm_data)) << "\n";
    if (!config.references.empty()) f << "# references=" << config.relative(config.resolve(config.references)) << "\n";
    f << format_report(report, &lm);
    log << format_report(report, nullptr);
    return report;
}

}  // namespace styleflow
