#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"

namespace tad::io {

using json = nlohmann::json;

// On-disk framing shared by checkpoints, sequence files and feature caches:
//   uint64 little-endian byte length of the header
//   header: UTF-8 JSON text
//   payload: raw little-endian numbers described by the header
struct FramedFile {
  json header;
  std::vector<std::uint8_t> payload;
};

void write_framed(const std::filesystem::path& path, const json& header,
                  std::span<const std::uint8_t> payload);
FramedFile read_framed(const std::filesystem::path& path);

void append_f64(std::vector<std::uint8_t>& out, std::span<const double> values);
void append_f32(std::vector<std::uint8_t>& out, std::span<const double> values);
std::vector<double> read_f64(std::span<const std::uint8_t> bytes, std::size_t offset,
                             std::size_t count);
std::vector<double> read_f32(std::span<const std::uint8_t> bytes, std::size_t offset,
                             std::size_t count);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// FNV-1a 64-bit, rendered as 16 hex digits.
std::string fnv1a_hex(std::span<const std::uint8_t> bytes);
std::string file_hash(const std::filesystem::path& path);

}  // namespace tad::io
