#pragma once

#include <cstdint>
#include <filesystem>

#include "tad/autodiff.hpp"
#include "tad/io.hpp"

namespace tad {

struct Checkpoint {
  ParameterSet params;
  io::json hyper;
  std::uint64_t step = 0;
};

// Header: {"format", "step", "hyper", "params": [{"name", "shape"}...]};
// payload: float64 values of every parameter in header order.
void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params,
                     const io::json& hyper, std::uint64_t step);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies values from `source` into same-named, same-shaped parameters of
// `target`; throws on any missing name or shape mismatch.
void assign_parameters(ParameterSet& target, const ParameterSet& source);

}  // namespace tad
