#pragma once

// Versioned JSON checkpoints. Doubles are written with round-trip precision,
// so save followed by load restores every parameter bit for bit.

#include <filesystem>
#include <string>

#include "ldacp/train.hpp"

namespace ldacp {

inline constexpr int kCheckpointVersion = 1;

std::string checkpoint_to_string(const TrainState& state);
TrainState checkpoint_from_string(const std::string& text);

void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

}  // namespace ldacp
