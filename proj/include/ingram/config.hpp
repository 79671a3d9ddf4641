#pragma once

#include <filesystem>

#include "ingram/training.hpp"

namespace ingram {

// Plain `key = value` config file. Blank lines and lines starting with '#'
// are skipped. Unknown keys are rejected so typos fail fast.
//
// Keys (defaults in parentheses):
//   rel_dim (32), ent_dim (32), rel_hidden (64), ent_hidden (64),
//   rel_layers (2), ent_layers (2), rel_heads (8), ent_heads (8),
//   bins (10), margin (1.5),
//   aggregator (attention|mean|sum), self_loop (mean_relation|learned_vector),
//   relation_update (true), dynamic_split (true),
//   epochs (10000), validate_every (200), negatives (10), batch_size (0),
//   learning_rate (0.001), seed (0)
TrainConfig parse_train_config(const std::filesystem::path& path);

// Parses a single `key = value` assignment into the config.
void apply_config_entry(TrainConfig& config, const std::string& key, const std::string& value);

}  // namespace ingram
