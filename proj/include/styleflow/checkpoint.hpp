#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "styleflow/data.hpp"
#include "styleflow/model.hpp"
#include "styleflow/optim.hpp"
#include "styleflow/scorer.hpp"

// File layout: the 6 bytes "SFLOW1", a uint64 little-endian byte count, that
// many bytes of UTF-8 JSON metadata, then one little-endian float64 block per
// tensor listed in the metadata, in listed order.

namespace styleflow {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointInfo {
    std::string kind;  // "scorer" or "model"
    int version = 0;
    std::uint64_t step = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> tensor_names;
};

/// Optimizer and loop state carried alongside a model.
struct TrainingState {
    std::uint64_t step = 0;
    std::uint64_t seed = 0;
    std::string rng_state;
    std::int64_t adam_steps = 0;
    std::vector<AdamMoments> moments;  // aligned with Model::trainable(); empty if none
};

struct ScorerBundle {
    Vocabulary vocab;
    Scorer scorer;
};

void save_scorer(const std::filesystem::path& path, const Scorer& scorer, const Vocabulary& vocab,
                 std::uint64_t seed);
ScorerBundle load_scorer(const std::filesystem::path& path);

void save_model(const std::filesystem::path& path, const Model& model, const TrainingState& state);
std::pair<Model, TrainingState> load_model(const std::filesystem::path& path);

/// Reads only the metadata header.
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

}  // namespace styleflow
