#pragma once

#include "ramol/learner.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string_view>

namespace ramol {

// Learner config files use one `key = value` per line; '#' starts a comment.
//
//   variant        baseline | ram_naive | ram_gated
//   buffer         B, buffer capacity
//   k              neighbours per step
//   horizon        time window H in steps, or "none"
//   tau            similarity temperature
//   tau_mode       fixed | running_median
//   rho            similarity gate fraction in [0, 1]
//   alpha          neighbour share in [0, 1]
//   beta           naive neighbour weight
//   lr             learning rate
//   lr_decay       true | false  (lr / sqrt(t + 1))
//   hidden         hidden width
//   activation     relu | tanh
//   seed           model seed
//   ablation       none | comma list of no_time, no_sim, no_decay
//   renormalize    true | false  (re-normalise weights after the gate)
//   no_decay_mode  full_weight | alpha_one
//   standardize    true | false
//   clip           clip standardized features to [-clip, clip]; 0 = off
//
// Setting `variant` resets the horizon to that variant's default, so it
// should come before `horizon`.
void apply_setting(LearnerConfig& config, std::string_view key, std::string_view value);

void parse_config(std::istream& in, LearnerConfig& config);
LearnerConfig load_config_file(const std::filesystem::path& path, LearnerConfig base = {});

nlohmann::json config_to_json(const LearnerConfig& config);
LearnerConfig config_from_json(const nlohmann::json& j);

}  // namespace ramol
