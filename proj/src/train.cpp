#include "styleflow/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>

#include "json.hpp"
#include "styleflow/error.hpp"
#include "styleflow/nn.hpp"
#include "styleflow/optim.hpp"

namespace styleflow {

namespace {

constexpr std::uint64_t kEpochStream = 0xe90c;
constexpr std::uint64_t kLoopStream = 0x100b;
constexpr std::uint64_t kExtraStream = 0xa06;

struct SampleResult {
    std::vector<std::pair<const Parameter*, Tensor>> grads;
    LossBreakdown losses;
    std::optional<std::string> failure;
};

void write_dump(const std::filesystem::path& path, std::uint64_t step, const std::vector<const CorpusRow*>& batch,
                const std::vector<int>& targets, const std::vector<SampleResult>& results, const Vocabulary& vocab) {
    nlohmann::json dump;
    dump["step"] = step;
    dump["rows"] = nlohmann::json::array();
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const auto& r = results[k];
        nlohmann::json row = {{"text", batch[k]->text},
                              {"label", batch[k]->tokens.label},
                              {"target_style", targets[k]},
                              {"ids", batch[k]->tokens.ids},
                              {"decoded", detokenize(batch[k]->tokens, vocab)}};
        if (r.failure) {
            row["error"] = *r.failure;
        } else {
            row["losses"] = {{"self", r.losses.self_loss},
                             {"cycle", r.losses.cycle_loss},
                             {"content", r.losses.content_loss},
                             {"style", r.losses.style_loss},
                             {"total", r.losses.total}};
        }
        dump["rows"].push_back(std::move(row));
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    out << std::setw(2) << dump << "\n";
}

bool finite(const LossBreakdown& b) {
    return std::isfinite(b.self_loss) && std::isfinite(b.cycle_loss) && std::isfinite(b.content_loss) &&
           std::isfinite(b.style_loss) && std::isfinite(b.total);
}

// Epoch stream: a permutation of the corpus plus, when extra rows are given,
// enough of them (cycled in a per-epoch order) to reach the mixing ratio.
std::vector<const CorpusRow*> epoch_stream(const std::vector<CorpusRow>& rows, const TrainConfig& config,
                                           std::size_t epoch) {
    std::vector<const CorpusRow*> stream;
    for (const auto& r : rows) stream.push_back(&r);
    if (!config.extra_rows.empty() && config.mix_ratio > 0.0) {
        const auto n_extra = static_cast<std::size_t>(
            std::llround(static_cast<double>(rows.size()) * config.mix_ratio / (1.0 - config.mix_ratio)));
        std::vector<std::size_t> order(config.extra_rows.size());
        std::iota(order.begin(), order.end(), 0);
        Rng extra_rng(derive_seed(config.seed, kExtraStream, epoch));
        std::shuffle(order.begin(), order.end(), extra_rng);
        for (std::size_t i = 0; i < n_extra; ++i) stream.push_back(&config.extra_rows[order[i % order.size()]]);
    }
    Rng epoch_rng(derive_seed(config.seed, kEpochStream, epoch));
    std::shuffle(stream.begin(), stream.end(), epoch_rng);
    return stream;
}

}  // namespace

void check_rows(const Model& model, const std::vector<CorpusRow>& rows) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const TokenSequence& t = rows[i].tokens;
        if (t.label < 0 || static_cast<std::size_t>(t.label) >= model.styles.styles()) {
            throw DataError("row " + std::to_string(i + 1) + " has style label " + std::to_string(t.label) +
                            " outside the model's styles");
        }
        for (TokenId id : t.ids) {
            if (id < 0 || static_cast<std::size_t>(id) >= model.vocab.size()) {
                throw DataError("row " + std::to_string(i + 1) + " has token id " + std::to_string(id) +
                                " outside the model vocabulary");
            }
        }
        if (t.nonpad_count() < 2) throw DataError("row " + std::to_string(i + 1) + " has fewer than 2 tokens");
    }
}

TrainReport train(Model& model, const std::vector<CorpusRow>& rows, const TrainConfig& config, TrainingState& state,
                  const std::function<void(const StepLog&)>& on_step) {
    if (rows.empty()) throw DataError("training corpus is empty");
    if (config.batch == 0) throw ConfigError("batch size must be positive");
    if (!(config.lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(config.mix_ratio >= 0.0 && config.mix_ratio < 1.0)) throw ConfigError("mix ratio must lie in [0, 1)");
    config.loss.weights.validate();
    check_rows(model, rows);
    check_rows(model, config.extra_rows);

    for (Parameter* p : model.trainable()) p->requires_grad = true;
    model.scorer.freeze();
    Adam opt(model.trainable(), AdamConfig{.lr = config.lr});
    if (!state.moments.empty()) {
        if (state.moments.size() != opt.moments().size()) throw ContractError("optimizer state does not match the model");
        opt.moments() = state.moments;
    }
    opt.set_steps(state.adam_steps);
    state.seed = config.seed;
    Rng loop_rng(derive_seed(config.seed, kLoopStream));
    if (!state.rng_state.empty()) set_rng_state(loop_rng, state.rng_state);

    std::ofstream metrics;
    if (!config.metrics_path.empty()) {
        if (config.metrics_path.has_parent_path()) std::filesystem::create_directories(config.metrics_path.parent_path());
        const bool append = state.step > 0 && std::filesystem::exists(config.metrics_path);
        metrics.open(config.metrics_path, append ? std::ios::app : std::ios::trunc);
        if (!metrics) throw IoError("cannot write metrics to " + config.metrics_path.string());
        if (!append) metrics << "step,self,cycle,content,style,total,lr\n";
        metrics << std::setprecision(10);
    }

    auto save = [&] {
        if (config.checkpoint_path.empty()) return;
        state.rng_state = rng_state(loop_rng);
        state.adam_steps = opt.steps();
        state.moments = opt.moments();
        save_model(config.checkpoint_path, model, state);
    };

    const std::size_t stream_size = epoch_stream(rows, config, 0).size();
    const std::size_t steps_per_epoch = (stream_size + config.batch - 1) / config.batch;
    const std::uint64_t total_steps = static_cast<std::uint64_t>(steps_per_epoch) * config.epochs;
    const std::uint64_t stop = config.max_steps > 0 ? std::min<std::uint64_t>(total_steps, config.max_steps) : total_steps;

    TrainReport report;
    const Model& frozen = model;
    while (state.step < stop) {
        const std::size_t epoch = static_cast<std::size_t>(state.step / steps_per_epoch);
        const std::size_t offset = static_cast<std::size_t>(state.step % steps_per_epoch) * config.batch;
        const auto stream = epoch_stream(rows, config, epoch);
        const std::size_t count = std::min(config.batch, stream.size() - offset);
        std::vector<const CorpusRow*> batch(stream.begin() + static_cast<std::ptrdiff_t>(offset),
                                            stream.begin() + static_cast<std::ptrdiff_t>(offset + count));
        std::vector<int> targets(count);
        for (std::size_t k = 0; k < count; ++k) {
            const int source = batch[k]->tokens.label;
            std::uniform_int_distribution<int> pick(0, static_cast<int>(model.styles.styles()) - 2);
            const int t = pick(loop_rng);
            targets[k] = t >= source ? t + 1 : t;
        }

        std::vector<SampleResult> results(count);
        parallel_for(count, config.threads, [&](std::size_t k) {
            try {
                ad::Graph g;
                const SampleLosses l = sample_losses(g, frozen, batch[k]->tokens, targets[k], config.loss);
                results[k].losses = breakdown(l, config.loss.weights);
                if (!finite(results[k].losses)) return;
                g.backward(l.total);
                results[k].grads = g.parameter_grads();
            } catch (const NumericError& e) {
                results[k].failure = e.what();
            }
        });
        for (std::size_t k = 0; k < count; ++k) {
            if (results[k].failure || !finite(results[k].losses)) {
                const std::filesystem::path dump =
                    config.dump_path.empty() ? std::filesystem::path("nonfinite_dump.json") : config.dump_path;
                write_dump(dump, state.step + 1, batch, targets, results, model.vocab);
                throw NumericError("non-finite loss at step " + std::to_string(state.step + 1) + " (row '" +
                                   batch[k]->text + "'); batch written to " + dump.string());
            }
        }

        opt.zero_grad();
        StepLog log;
        const double w = 1.0 / static_cast<double>(count);
        for (std::size_t k = 0; k < count; ++k) {
            accumulate_grads(results[k].grads, w);
            const LossBreakdown& b = results[k].losses;
            log.mean.self_loss += w * b.self_loss;
            log.mean.cycle_loss += w * b.cycle_loss;
            log.mean.content_loss += w * b.content_loss;
            log.mean.style_loss += w * b.style_loss;
            log.mean.total += w * b.total;
        }
        log.mean.weights = config.loss.weights;
        opt.step();
        ++state.step;
        log.step = state.step;
        log.epoch = epoch;
        log.lr = config.lr;
        report.steps.push_back(log);
        if (metrics.is_open()) {
            metrics << log.step << ',' << log.mean.self_loss << ',' << log.mean.cycle_loss << ','
                    << log.mean.content_loss << ',' << log.mean.style_loss << ',' << log.mean.total << ',' << log.lr
                    << '\n';
            metrics.flush();
        }
        if (on_step) on_step(log);
        if (config.checkpoint_every > 0 && state.step % config.checkpoint_every == 0) save();
    }
    state.rng_state = rng_state(loop_rng);
    state.adam_steps = opt.steps();
    state.moments = opt.moments();
    save();
    report.final_step = state.step;
    return report;
}

}  // namespace styleflow
