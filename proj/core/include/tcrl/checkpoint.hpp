#pragma once

#include <optional>
#include <string>

#include "tcrl/encoder.hpp"
#include "tcrl/flow.hpp"

namespace tcrl {

// Versioned text container holding the trained heads. Doubles are written
// with 17 significant digits so reload reproduces parameters bit-exactly.
struct Checkpoint {
  std::optional<EncoderParams> encoder;
  std::optional<FlowParams> flow;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace tcrl
