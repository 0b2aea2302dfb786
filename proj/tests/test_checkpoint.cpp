#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "maskfix/checkpoint.hpp"
#include "maskfix/errors.hpp"
#include "maskfix/model.hpp"
#include "maskfix/training.hpp"

using namespace maskfix;

namespace {

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

bool bit_identical(const Parameters& a, const Parameters& b) {
  std::vector<const MatT<float>*> ta, tb;
  a.for_each_tensor(
      [&](const std::string&, const MatT<float>& m) { ta.push_back(&m); });
  b.for_each_tensor(
      [&](const std::string&, const MatT<float>& m) { tb.push_back(&m); });
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    const MatT<float>& x = *ta[i];
    const MatT<float>& y = *tb[i];
    if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        if (std::memcmp(&x(r, c), &y(r, c), sizeof(float)) != 0) return false;
      }
    }
  }
  return true;
}

ModelConfig tiny_config() { return ModelConfig{1, 8, 2, 3, 4, 2, 0.1}; }

}  // namespace

TEST_CASE("checkpoint round-trips parameters bit-exactly") {
  ModelConfig cfg = tiny_config();
  Parameters params = random_parameters<float>(cfg, 77);
  std::string path = temp_path("maskfix_ckpt_roundtrip.bin");

  save_checkpoint(path, params, 1234, 99);
  Checkpoint loaded = load_checkpoint(path);

  CHECK(loaded.config == cfg);
  CHECK(loaded.step == 1234);
  CHECK(loaded.seed == 99);
  CHECK_FALSE(loaded.opt.has_value());
  CHECK(bit_identical(loaded.params, params));
  std::remove(path.c_str());
}

TEST_CASE("checkpoint round-trips optimizer state after real updates") {
  ModelConfig cfg = tiny_config();
  Parameters params = init_parameters<float>(cfg, 5);
  AdamState state = make_adam_state(params);

  TrainConfig tc;
  tc.total_steps = 10;
  tc.warmup_steps = 2;
  tc.steps = 2;
  tc.batch_size = 4;
  tc.dropout = cfg.dropout;
  tc.seed = 11;

  Vocabulary vocab(cfg.vocab);
  std::vector<std::pair<TokenGrid, int>> batch;
  for (int i = 0; i < 4; ++i) {
    batch.emplace_back(TokenGrid(2, 2, vocab,
                                 {i % 3, (i + 1) % 3, (i + 2) % 3, i % 2}),
                       i % 2);
  }
  for (long long s = 0; s < 3; ++s) training_step(params, state, batch, tc, s);
  REQUIRE(state.step == 3);

  std::string path = temp_path("maskfix_ckpt_opt.bin");
  save_checkpoint(path, params, 3, tc.seed, &state);
  Checkpoint loaded = load_checkpoint(path);

  REQUIRE(loaded.opt.has_value());
  CHECK(loaded.opt->step == 3);
  CHECK(bit_identical(loaded.params, params));
  CHECK(bit_identical(loaded.opt->m, state.m));
  CHECK(bit_identical(loaded.opt->v, state.v));

  // The restored pair must continue training exactly like the original.
  Parameters resumed_params = loaded.params;
  AdamState resumed_state = *loaded.opt;
  TrainMetrics a = training_step(params, state, batch, tc, 3);
  TrainMetrics b = training_step(resumed_params, resumed_state, batch, tc, 3);
  CHECK(a.loss == b.loss);
  CHECK(bit_identical(params, resumed_params));
  std::remove(path.c_str());
}

TEST_CASE("checkpoint loader rejects malformed files") {
  std::string path = temp_path("maskfix_ckpt_bad.bin");

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint(temp_path("maskfix_no_such_ckpt.bin")),
                    CheckpointError);
  }

  SUBCASE("bad magic") {
    std::ofstream(path) << "XFM1 layers=1\n";
    CHECK_THROWS_AS(load_checkpoint(path), ParseError);
  }

  SUBCASE("missing header key") {
    std::ofstream(path) << "MFX1 layers=1 hidden_dim=8 heads=2 vocab=3\n";
    CHECK_THROWS_AS(load_checkpoint(path), ParseError);
  }

  SUBCASE("header token without equals sign") {
    std::ofstream(path) << "MFX1 layers\n";
    CHECK_THROWS_AS(load_checkpoint(path), ParseError);
  }

  SUBCASE("unparseable header value") {
    std::ofstream(path) << "MFX1 layers=zebra hidden_dim=8 heads=2 vocab=3 "
                           "positions=4 num_classes=2 dropout=0.1 step=0 "
                           "seed=0\n";
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  }

  SUBCASE("truncated tensor data") {
    ModelConfig cfg = tiny_config();
    Parameters params = random_parameters<float>(cfg, 3);
    save_checkpoint(path, params, 0, 0);
    auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size - 10);
    CHECK_THROWS_AS(load_checkpoint(path), ParseError);
  }

  SUBCASE("parse error carries a byte offset") {
    std::ofstream(path) << "garbage\n";
    try {
      load_checkpoint(path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("byte") != std::string::npos);
    }
  }
  std::remove(path.c_str());
}

TEST_CASE("checkpoint loader rejects tensors that disagree with the header") {
  ModelConfig cfg = tiny_config();
  Parameters params = random_parameters<float>(cfg, 9);
  std::string path = temp_path("maskfix_ckpt_mismatch.bin");
  save_checkpoint(path, params, 0, 0);

  // Rewrite the header to claim a wider model; every tensor is now the
  // wrong shape.
  std::ifstream in(path, std::ios::binary);
  std::string contents((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  in.close();
  std::size_t pos = contents.find("hidden_dim=8");
  REQUIRE(pos != std::string::npos);
  // Same byte count so the binary payload stays aligned.
  contents.replace(pos, 12, "hidden_dim=9");
  std::ofstream(path, std::ios::binary) << contents;

  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  std::remove(path.c_str());
}

TEST_CASE("checkpoint header records config, step and seed") {
  ModelConfig cfg = tiny_config();
  Parameters params = init_parameters<float>(cfg, 0);
  std::string path = temp_path("maskfix_ckpt_header.bin");
  save_checkpoint(path, params, 42, 7);

  std::ifstream in(path, std::ios::binary);
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("MFX1 ", 0) == 0);
  CHECK(header.find("layers=1") != std::string::npos);
  CHECK(header.find("hidden_dim=8") != std::string::npos);
  CHECK(header.find("vocab=3") != std::string::npos);
  CHECK(header.find("step=42") != std::string::npos);
  CHECK(header.find("seed=7") != std::string::npos);
  CHECK(header.find("opt_step") == std::string::npos);

  // First tensor record follows immediately, sorted by name.
  std::string record;
  std::getline(in, record);
  CHECK(record.rfind("blocks.0.adaln_b 1 48", 0) == 0);
  std::remove(path.c_str());
}
