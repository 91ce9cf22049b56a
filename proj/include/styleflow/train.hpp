#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "styleflow/checkpoint.hpp"
#include "styleflow/data.hpp"
#include "styleflow/losses.hpp"
#include "styleflow/model.hpp"

namespace styleflow {

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch = 32;
    double lr = 1e-3;
    LossOptions loss;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    std::size_t max_steps = 0;         // 0: run all epochs
    std::size_t checkpoint_every = 0;  // in steps; 0: final checkpoint only
    std::filesystem::path checkpoint_path;  // empty: no checkpoints
    std::filesystem::path metrics_path;     // empty: no metrics CSV
    std::filesystem::path dump_path;        // diagnostic dump on a non-finite loss
    /// Extra rows (e.g. augmented) mixed into each epoch so that they make up
    /// `mix_ratio` of the stream.
    std::vector<CorpusRow> extra_rows;
    double mix_ratio = 0.25;
};

struct StepLog {
    std::uint64_t step = 0;  // 1-based count of completed updates
    std::size_t epoch = 0;
    LossBreakdown mean;      // mean over the batch
    double lr = 0.0;
};

struct TrainReport {
    std::vector<StepLog> steps;
    std::uint64_t final_step = 0;
};

/// Mini-batch Adam over the total loss. Each sample is paired with a
/// uniformly drawn style other than its own. `state` carries the step count,
/// loop RNG and optimizer moments in and out, so a run can be resumed.
TrainReport train(Model& model, const std::vector<CorpusRow>& rows, const TrainConfig& config, TrainingState& state,
                  const std::function<void(const StepLog&)>& on_step = {});

/// Throws DataError when a row's ids or label do not fit the model.
void check_rows(const Model& model, const std::vector<CorpusRow>& rows);

}  // namespace styleflow
