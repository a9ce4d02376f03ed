#include "strokeseg/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

namespace strokeseg {

using json = nlohmann::json;

namespace {

constexpr std::array<char, 8> kMagic = {'S', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};
constexpr std::uint64_t kMaxHeader = 1u << 26;

template <typename T>
void put_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw CheckpointError("truncated checkpoint");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

}  // namespace

void write_checkpoint_header(std::ostream& out, const json& header) {
  const std::string text = header.dump();
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

json read_checkpoint_header(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw CheckpointError("not a checkpoint file");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto length = get_le<std::uint64_t>(in);
  if (length > kMaxHeader) throw CheckpointError("checkpoint header too large");
  std::string text(length, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(length))) throw CheckpointError("truncated checkpoint header");
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  }
}

void write_float64(std::ostream& out, const double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(data[i]));
}

void read_float64(std::istream& in, double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) data[i] = std::bit_cast<double>(get_le<std::uint64_t>(in));
}

json shapes_to_json(const std::vector<BlockShape>& shapes) {
  json out = json::array();
  for (const auto& s : shapes) out.push_back({{"name", s.name}, {"rows", s.rows}, {"cols", s.cols}});
  return out;
}

void check_shapes(const json& stored, const std::vector<BlockShape>& expected) {
  if (!stored.is_array() || stored.size() != expected.size())
    throw CheckpointError("checkpoint has " + std::to_string(stored.size()) + " blocks, model expects " +
                          std::to_string(expected.size()));
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& s = stored[i];
    const auto& e = expected[i];
    if (s.at("name").get<std::string>() != e.name || s.at("rows").get<Eigen::Index>() != e.rows ||
        s.at("cols").get<Eigen::Index>() != e.cols)
      throw CheckpointError("block " + e.name + " does not match the model (" + std::to_string(e.rows) + "x" +
                            std::to_string(e.cols) + " expected)");
  }
}

}  // namespace strokeseg
