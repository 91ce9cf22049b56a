#pragma once

#include <optional>
#include <ostream>
#include <string>

#include "styleflow/config.hpp"
#include "styleflow/eval.hpp"

namespace styleflow {

// Pipeline commands. Each reads the keys listed by keys_for(<command>),
// writes its artifacts under the workspace and logs one line per event to
// `log`.

/// Writes train_data, test_data and (if set) eval_data from the synthetic
/// generator.
void cmd_synth(const Config& config, std::ostream& log);

/// Trains the flow's scorer on train_data and, when eval_data is set, the
/// evaluation scorer on it (sharing the training vocabulary).
void cmd_train_scorer(const Config& config, std::ostream& log);

/// Trains the flow model; writes model_checkpoint and metrics_csv.
void cmd_train(const Config& config, std::ostream& log);

/// Transfers every row of `input` (test_data when empty) and writes
/// transfer_output. `target` overrides config.target_style.
void cmd_transfer(const Config& config, const std::string& input, std::ostream& log,
                  const std::optional<std::string>& target = std::nullopt);

/// Augments every row of `input` (test_data when empty); writes
/// augment_output and its sidecar.
void cmd_augment(const Config& config, const std::string& input, std::ostream& log);

/// Scores a transfer file (transfer_output when `input` is empty) and writes
/// the report.
EvalReport cmd_eval(const Config& config, const std::string& input, std::ostream& log);

/// `out/augmented.tsv` -> `out/augmented.sidecar.csv`.
std::filesystem::path sidecar_path(const std::filesystem::path& corpus_path);

}  // namespace styleflow
