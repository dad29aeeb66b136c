#include "tad/feature_grid.hpp"

#include <stdexcept>

namespace tad {

void FeatureGrid::validate() const {
  if (values.rank() != 3) throw ShapeError("feature grid must be [V, T, C]");
  if (views() == 0 || steps() == 0) throw ShapeError("feature grid needs V >= 1 and T >= 1");
  if (valid.size() != views() * steps()) throw ShapeError("feature grid mask must be V x T");
  if (!all_finite(values.data())) throw NonFiniteError("feature grid contains non-finite values");
  const std::size_t c = channels();
  for (std::size_t cell = 0; cell < valid.size(); ++cell) {
    if (valid[cell]) continue;
    for (std::size_t k = 0; k < c; ++k) {
      if (values[cell * c + k] != 0.0) throw std::invalid_argument("invalid feature cell is not zero");
    }
  }
}

FeatureGrid select_views(const FeatureGrid& grid, const std::vector<std::size_t>& views) {
  if (views.empty()) throw std::invalid_argument("select_views: no views requested");
  const std::size_t t = grid.steps(), c = grid.channels();
  FeatureGrid out;
  out.values = Tensor(Shape{views.size(), t, c});
  out.valid.resize(views.size() * t);
  for (std::size_t i = 0; i < views.size(); ++i) {
    const std::size_t v = views[i];
    if (v >= grid.views()) throw std::out_of_range("select_views: view index out of range");
    std::copy_n(grid.values.data().begin() + static_cast<std::ptrdiff_t>(v * t * c), t * c,
                out.values.data().begin() + static_cast<std::ptrdiff_t>(i * t * c));
    std::copy_n(grid.valid.begin() + static_cast<std::ptrdiff_t>(v * t), t,
                out.valid.begin() + static_cast<std::ptrdiff_t>(i * t));
  }
  return out;
}

void save_feature_grid(const std::filesystem::path& path, const FeatureGrid& grid,
                       const io::json& meta) {
  grid.validate();
  io::json header{{"format", "tad-features/1"},
                  {"shape", grid.values.shape()},
                  {"valid", grid.valid},
                  {"meta", meta}};
  std::vector<std::uint8_t> payload;
  io::append_f32(payload, grid.values.data());
  io::write_framed(path, header, payload);
}

FeatureGrid load_feature_grid(const std::filesystem::path& path, io::json* meta) {
  const io::FramedFile f = io::read_framed(path);
  if (f.header.value("format", "") != "tad-features/1") {
    throw std::runtime_error("not a feature cache: " + path.string());
  }
  const auto shape = f.header.at("shape").get<Shape>();
  const std::size_t n = shape_numel(shape);
  if (f.payload.size() != n * 4) throw std::runtime_error("feature cache payload size mismatch");
  FeatureGrid grid;
  grid.values = Tensor(shape, io::read_f32(f.payload, 0, n));
  grid.valid = f.header.at("valid").get<std::vector<std::uint8_t>>();
  if (meta) *meta = f.header.at("meta");
  grid.validate();
  return grid;
}

}  // namespace tad
