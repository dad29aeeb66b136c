#include "tad/checkpoint.hpp"

#include <stdexcept>

namespace tad {

namespace {
constexpr const char* kFormat = "tad-checkpoint/1";
}

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params,
                     const io::json& hyper, std::uint64_t step) {
  io::json header;
  header["format"] = kFormat;
  header["step"] = step;
  header["hyper"] = hyper;
  header["frozen"] = params.frozen();
  header["params"] = io::json::array();
  std::vector<std::uint8_t> payload;
  for (const auto& p : params.items()) {
    header["params"].push_back({{"name", p.name}, {"shape", p.value.shape()}});
    io::append_f64(payload, p.value.data());
  }
  io::write_framed(path, header, payload);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const io::FramedFile f = io::read_framed(path);
  if (f.header.value("format", "") != kFormat) {
    throw std::runtime_error("not a checkpoint file: " + path.string());
  }
  Checkpoint ck;
  ck.step = f.header.at("step").get<std::uint64_t>();
  ck.hyper = f.header.at("hyper");
  std::size_t offset = 0;
  for (const auto& entry : f.header.at("params")) {
    Shape shape = entry.at("shape").get<Shape>();
    const std::size_t n = shape_numel(shape);
    ck.params.add(entry.at("name").get<std::string>(),
                  Tensor(shape, io::read_f64(f.payload, offset, n)));
    offset += n * 8;
  }
  if (offset != f.payload.size()) throw std::runtime_error("checkpoint payload size mismatch");
  if (f.header.value("frozen", false)) ck.params.freeze();
  return ck;
}

void assign_parameters(ParameterSet& target, const ParameterSet& source) {
  if (target.size() != source.size()) {
    throw std::runtime_error("checkpoint has " + std::to_string(source.size()) +
                             " parameters, model expects " + std::to_string(target.size()));
  }
  for (auto& p : target.items()) {
    const Parameter* src = source.find(p.name);
    if (!src) throw std::runtime_error("checkpoint is missing parameter " + p.name);
    if (src->value.shape() != p.value.shape()) {
      throw std::runtime_error("checkpoint parameter " + p.name + " has shape " +
                               shape_str(src->value.shape()) + ", model expects " +
                               shape_str(p.value.shape()));
    }
    p.value = src->value;
  }
}

}  // namespace tad
