#pragma once

#include <string>

#include "uamsim/nn/tensor.hpp"

namespace uamsim::nn {

// Checkpoint format:
//   uamsim.checkpoint 1
//   <one-line header string, typically the model config as JSON>
//   param <name> <ndim> <d0> <d1> ...
//   ...
//   DATA
//   <little-endian float64 blob, parameters in declaration order>
// Round-trips are bit-exact.

void save_checkpoint(const ParamStore& store, const std::string& header,
                     const std::string& path);

struct LoadedCheckpoint {
  ParamStore store;
  std::string header;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace uamsim::nn
