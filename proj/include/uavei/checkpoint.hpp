// Agent checkpointing: one JSON document bundling every online net, target
// net, Adam state, and the training progress counter.
#pragma once

#include <cstdint>
#include <string>

#include "uavei/agent.hpp"

namespace uavei {

void save_checkpoint(const std::string& path, const Agent& agent, int episodes_completed);

// Loads into an agent freshly built from the same configuration. Throws
// std::runtime_error naming the offending net when dimensions or the policy
// kind disagree with the file.
void load_checkpoint(const std::string& path, Agent& agent, int* episodes_completed = nullptr);

} // namespace uavei
