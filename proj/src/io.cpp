#include "tad/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace tad::io {

namespace {

template <class U>
void put_le(std::vector<std::uint8_t>& out, U bits) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

template <class U>
U get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(bytes[offset + i]) << (8 * i);
  return bits;
}

void check_range(std::span<const std::uint8_t> bytes, std::size_t offset, std::size_t n) {
  if (offset > bytes.size() || bytes.size() - offset < n) {
    throw std::runtime_error("payload truncated");
  }
}

}  // namespace

void write_framed(const std::filesystem::path& path, const json& header,
                  std::span<const std::uint8_t> payload) {
  const std::string text = header.dump();
  std::vector<std::uint8_t> prefix;
  put_le<std::uint64_t>(prefix, text.size());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os.write(reinterpret_cast<const char*>(prefix.data()), static_cast<std::streamsize>(prefix.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  os.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

FramedFile read_framed(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  std::vector<std::uint8_t> all((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (all.size() < 8) throw std::runtime_error("file too short for header: " + path.string());
  const auto header_len = get_le<std::uint64_t>(all, 0);
  if (header_len > all.size() - 8) throw std::runtime_error("header truncated: " + path.string());
  FramedFile f;
  f.header = json::parse(all.begin() + 8, all.begin() + 8 + static_cast<std::ptrdiff_t>(header_len));
  f.payload.assign(all.begin() + 8 + static_cast<std::ptrdiff_t>(header_len), all.end());
  return f;
}

void append_f64(std::vector<std::uint8_t>& out, std::span<const double> values) {
  out.reserve(out.size() + values.size() * 8);
  for (double v : values) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
}

void append_f32(std::vector<std::uint8_t>& out, std::span<const double> values) {
  out.reserve(out.size() + values.size() * 4);
  for (double v : values) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

std::vector<double> read_f64(std::span<const std::uint8_t> bytes, std::size_t offset,
                             std::size_t count) {
  check_range(bytes, offset, count * 8);
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = std::bit_cast<double>(get_le<std::uint64_t>(bytes, offset + 8 * i));
  }
  return out;
}

std::vector<double> read_f32(std::span<const std::uint8_t> bytes, std::size_t offset,
                             std::size_t count) {
  check_range(bytes, offset, count * 4);
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, offset + 4 * i));
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string fnv1a_hex(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string file_hash(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  return fnv1a_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace tad::io
