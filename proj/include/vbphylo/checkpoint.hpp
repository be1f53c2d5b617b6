#pragma once

#include <memory>
#include <optional>
#include <string>

#include "vbphylo/trainer.hpp"

namespace vbphylo {

// Versioned JSON formats. Support files pin the orderings that parameter
// arrays are aligned to; checkpoints embed the support plus every trainable
// block, a config echo, and RNG state strings.

std::string support_to_json(const SubsplitSupport& support);
std::shared_ptr<SubsplitSupport> support_from_json(const std::string& text);
void write_support_file(const std::string& path, const SubsplitSupport& support);
std::shared_ptr<SubsplitSupport> read_support_file(const std::string& path);

struct Checkpoint {
  std::string kind;  // "unrooted" | "timetree"
  bool psp = false;
  std::shared_ptr<SubsplitSupport> support;
  std::optional<UnrootedModel> unrooted;
  std::optional<TimeTreeModel> timetree;
  std::string config_echo;  // JSON text
  std::string rng_state;
};

std::string checkpoint_to_json(const UnrootedModel& model, bool psp,
                               const std::string& config_echo, const std::string& rng_state);
std::string checkpoint_to_json(const TimeTreeModel& model, bool psp,
                               const std::string& config_echo, const std::string& rng_state);
Checkpoint checkpoint_from_json(const std::string& text);

void write_checkpoint_file(const std::string& path, const std::string& json_text);
Checkpoint read_checkpoint_file(const std::string& path);

}  // namespace vbphylo
