#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "tad/io.hpp"
#include "tad/tensor.hpp"

namespace tad {

// Window features of one sequence across views: values [V, T, C] with a
// V x T validity mask. Invalid cells hold zeros.
struct FeatureGrid {
  Tensor values;
  std::vector<std::uint8_t> valid;

  std::size_t views() const { return values.dim(0); }
  std::size_t steps() const { return values.dim(1); }
  std::size_t channels() const { return values.dim(2); }
  bool is_valid(std::size_t v, std::size_t t) const { return valid[v * steps() + t] != 0; }
  void validate() const;
};

// Keeps the listed views, in the given order.
FeatureGrid select_views(const FeatureGrid& grid, const std::vector<std::size_t>& views);

// Framed file: JSON header (shape, mask, caller metadata) + float32 values.
void save_feature_grid(const std::filesystem::path& path, const FeatureGrid& grid,
                       const io::json& meta = io::json::object());
FeatureGrid load_feature_grid(const std::filesystem::path& path, io::json* meta = nullptr);

}  // namespace tad
