#pragma once

// Binary parameter snapshots.
//
// Layout: 8-byte magic "SSEGCKPT", u32 format version, u64 header length,
// a JSON header, then every parameter block as little-endian float64 in
// visit order, followed by the Adam moments when the header says so.
// The header records kind, config, block names and shapes.

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "strokeseg/recurrent.hpp"

namespace strokeseg {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BlockShape {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
};

void write_checkpoint_header(std::ostream& out, const nlohmann::json& header);
nlohmann::json read_checkpoint_header(std::istream& in);

void write_float64(std::ostream& out, const double* data, std::size_t n);
void read_float64(std::istream& in, double* data, std::size_t n);

/// Shapes of every block of a params struct with `visit`.
template <typename Params>
std::vector<BlockShape> block_shapes(Params& params) {
  std::vector<BlockShape> out;
  params.visit("", [&](const std::string& name, auto& block) { out.push_back({name, block.rows(), block.cols()}); });
  return out;
}

nlohmann::json shapes_to_json(const std::vector<BlockShape>& shapes);
/// Throws CheckpointError naming the first block that differs.
void check_shapes(const nlohmann::json& stored, const std::vector<BlockShape>& expected);

namespace detail {

template <typename Scalar>
void write_block(std::ostream& out, const Eigen::Ref<const VectorX<Scalar>>& v) {
  if constexpr (std::is_same_v<Scalar, double>) {
    write_float64(out, v.data(), static_cast<std::size_t>(v.size()));
  } else {
    const Eigen::VectorXd d = v.template cast<double>();
    write_float64(out, d.data(), static_cast<std::size_t>(d.size()));
  }
}

template <typename Scalar>
void read_block(std::istream& in, Eigen::Ref<VectorX<Scalar>> v) {
  Eigen::VectorXd d(v.size());
  read_float64(in, d.data(), static_cast<std::size_t>(d.size()));
  v = d.cast<Scalar>();
}

}  // namespace detail

/// header gets "blocks" and "optimizer" filled in; the caller supplies kind
/// and config.
template <typename Params>
void save_checkpoint(std::ostream& out, nlohmann::json header, Params& params,
                     const OptimizerState<typename Params::Scalar>* state) {
  using Scalar = typename Params::Scalar;
  const auto shapes = block_shapes(params);
  header["blocks"] = shapes_to_json(shapes);
  const bool with_state = state != nullptr && state->first_moment.size() == shapes.size();
  header["optimizer"] = with_state;
  header["step"] = state != nullptr ? state->step : 0;
  write_checkpoint_header(out, header);
  for (auto& view : parameter_views(params)) detail::write_block<Scalar>(out, view);
  if (with_state) {
    for (const auto& m : state->first_moment) detail::write_block<Scalar>(out, m);
    for (const auto& v : state->second_moment) detail::write_block<Scalar>(out, v);
  }
  if (!out) throw CheckpointError("failed writing checkpoint");
}

/// Reads the payload that follows a header obtained from
/// read_checkpoint_header; params must already have the stored shapes.
template <typename Params>
void load_checkpoint_payload(std::istream& in, const nlohmann::json& header, Params& params,
                             OptimizerState<typename Params::Scalar>* state) {
  using Scalar = typename Params::Scalar;
  check_shapes(header.at("blocks"), block_shapes(params));
  auto views = parameter_views(params);
  for (auto& view : views) detail::read_block<Scalar>(in, view);
  if (state == nullptr) return;
  *state = {};
  state->step = header.value("step", std::int64_t{0});
  if (!header.value("optimizer", false)) return;
  for (auto* moments : {&state->first_moment, &state->second_moment})
    for (const auto& view : views) {
      moments->emplace_back(view.size());
      detail::read_block<Scalar>(in, moments->back());
    }
}

}  // namespace strokeseg
