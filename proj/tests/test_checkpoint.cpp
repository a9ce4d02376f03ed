#include <sstream>

#include "doctest.h"
#include "strokeseg/model_io.hpp"
#include "test_support.hpp"

using namespace strokeseg;

namespace {

template <typename P>
Eigen::Matrix<typename P::Scalar, Eigen::Dynamic, 1> flat(P& params) {
  auto v = parameter_views(params);
  return flatten(v);
}

std::vector<Sketch> tiny_corpus(Rng& rng) {
  std::vector<Sketch> out(4);
  for (auto& s : out) {
    s.strokes = {testing::random_stroke(rng, 4, 1.0), testing::random_stroke(rng, 3, 1.0)};
    for (auto& st : s.strokes)
      for (auto& p : st.points) p -= Point2(49, 49);
  }
  return out;
}

}  // namespace

TEST_CASE("autoencoder checkpoint round trip is bit exact") {
  Rng rng(1);
  auto c = testing::tiny_vae_config();
  c.learning_rate = 1e-2;
  auto m = VaeModel<double>::init(c, rng);
  OptimizerState<double> state;
  auto corpus = tiny_corpus(rng);
  train(m, state, std::span<const Sketch>(corpus), TrainOptions<double>{}, rng);
  REQUIRE(state.step > 0);

  std::stringstream buf;
  save_vae(buf, m, &state, {{"note", "x"}});
  auto loaded = load_vae<double>(buf);
  CHECK(flat(loaded.model.params) == flat(m.params));
  CHECK(loaded.optimizer.step == state.step);
  REQUIRE(loaded.optimizer.first_moment.size() == state.first_moment.size());
  for (std::size_t k = 0; k < state.first_moment.size(); ++k) {
    CHECK(loaded.optimizer.first_moment[k] == state.first_moment[k]);
    CHECK(loaded.optimizer.second_moment[k] == state.second_moment[k]);
  }
  CHECK(loaded.model.config.enc_hidden == c.enc_hidden);
  CHECK(loaded.model.config.learning_rate == c.learning_rate);
  CHECK(loaded.header["note"] == "x");
  CHECK(loaded.header["step"] == state.step);
}

TEST_CASE("checkpoint without optimizer state") {
  Rng rng(2);
  auto m = VaeModel<double>::init(testing::tiny_vae_config(), rng);
  std::stringstream buf;
  save_vae<double>(buf, m, nullptr);
  auto loaded = load_vae<double>(buf);
  CHECK(loaded.optimizer.step == 0);
  CHECK(loaded.optimizer.first_moment.empty());
  CHECK(flat(loaded.model.params) == flat(m.params));
}

TEST_CASE("resuming continues exactly where training stopped") {
  Rng init(3);
  auto c = testing::tiny_vae_config();
  c.batch = 2;
  c.learning_rate = 1e-2;
  auto start = VaeModel<double>::init(c, init);
  auto corpus = tiny_corpus(init);

  auto straight = start;
  OptimizerState<double> s1;
  Rng r1(4);
  TrainOptions<double> two;
  two.epochs = 2;
  auto h1 = train(straight, s1, std::span<const Sketch>(corpus), two, r1);

  auto first = start;
  OptimizerState<double> s2;
  Rng r2(4);
  train(first, s2, std::span<const Sketch>(corpus), TrainOptions<double>{}, r2);
  std::stringstream buf;
  save_vae(buf, first, &s2);
  auto resumed = load_vae<double>(buf);
  auto h2 = train(resumed.model, resumed.optimizer, std::span<const Sketch>(corpus), TrainOptions<double>{}, r2);

  CHECK(flat(resumed.model.params) == flat(straight.params));
  CHECK(resumed.optimizer.step == s1.step);
  REQUIRE(!h2.empty());
  CHECK(h2.front().step == h1[h1.size() - h2.size()].step);
  CHECK(h2.back().total == h1.back().total);
}

TEST_CASE("float checkpoints") {
  Rng rng(5);
  auto m = VaeModel<float>::init(testing::tiny_vae_config(), rng);
  std::stringstream buf;
  save_vae<float>(buf, m, nullptr);
  auto loaded = load_vae<float>(buf);
  CHECK(flat(loaded.model.params) == flat(m.params));
}

TEST_CASE("segmenter checkpoint") {
  Rng rng(6);
  SegConfig c;
  c.hidden1 = 7;
  c.hidden2 = 3;
  auto m = SegModel<double>::init(11, c, {"back", "leg", "seat"}, rng);
  std::stringstream buf;
  save_segmenter(buf, m, {{"feature", "idm"}});
  auto loaded = load_segmenter<double>(buf);
  CHECK(flat(loaded.model.params) == flat(m.params));
  CHECK(loaded.model.classes == m.classes);
  CHECK(loaded.model.config.hidden1 == 7);
  CHECK(loaded.header["feature"] == "idm");

  std::stringstream again(buf.str());
  CHECK_THROWS_AS(load_vae<double>(again), CheckpointError);
}

TEST_CASE("damaged checkpoints are rejected") {
  Rng rng(7);
  auto m = VaeModel<double>::init(testing::tiny_vae_config(), rng);
  std::stringstream buf;
  save_vae<double>(buf, m, nullptr);
  const std::string bytes = buf.str();

  std::stringstream bad_magic("XXXXXXXX" + bytes.substr(8));
  CHECK_THROWS_AS(load_vae<double>(bad_magic), CheckpointError);

  std::stringstream truncated(bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(load_vae<double>(truncated), CheckpointError);

  std::string wrong_version = bytes;
  wrong_version[8] = 9;
  std::stringstream v(wrong_version);
  CHECK_THROWS_AS(load_vae<double>(v), CheckpointError);

  std::stringstream empty;
  CHECK_THROWS_AS(load_vae<double>(empty), CheckpointError);
}

TEST_CASE("shape mismatch is reported") {
  Rng rng(8);
  auto m = VaeModel<double>::init(testing::tiny_vae_config(), rng);
  std::stringstream buf;
  save_vae<double>(buf, m, nullptr);
  auto header = read_checkpoint_header(buf);
  auto other = testing::tiny_vae_config();
  other.dec_hidden = 9;
  auto params = VaeParams<double>::zeros(other);
  CHECK_THROWS_AS(load_checkpoint_payload(buf, header, params, nullptr), CheckpointError);
}

TEST_CASE("float64 encoding is little endian") {
  std::stringstream buf;
  const double one = 1.0;
  write_float64(buf, &one, 1);
  const std::string b = buf.str();
  REQUIRE(b.size() == 8);
  CHECK(static_cast<unsigned char>(b[7]) == 0x3f);
  CHECK(static_cast<unsigned char>(b[6]) == 0xf0);
  CHECK(b[0] == 0);
}
