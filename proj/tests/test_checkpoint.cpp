#include <filesystem>

#include "doctest.h"
#include "helpers.hpp"

#include "cgat/checkpoint.hpp"
#include "cgat/dataset.hpp"
#include "cgat/hash.hpp"
#include "cgat/synth.hpp"

using namespace cgat;
using cgat::test::error_code_of;

TEST_SUITE("checkpoint") {

TEST_CASE("round trip preserves config, metadata and float32 parameters") {
  for (auto arch : {Architecture::cgat, Architecture::gat_mean, Architecture::gcn_mean}) {
    ModelConfig c = test::tiny_config(3, 5, 2);
    c.architecture = arch;
    c.head_merge = arch == Architecture::cgat ? HeadMerge::concat : HeadMerge::max;
    c.cls_mode = ClsMode::undirected;
    c.features = FeatureChannels::dist;
    Model m = init_model(c, 4);
    const nlohmann::json meta = {{"target_vertices", 750}, {"scaler_min", {-3.5, 0.01}}};
    const Checkpoint back = parse_checkpoint(serialize_checkpoint(m, meta));
    CHECK(back.model.config == c);
    CHECK(back.metadata == meta);
    round_to_float32(m);
    REQUIRE(back.model.params.size() == m.params.size());
    for (std::size_t i = 0; i < m.params.size(); ++i) {
      CHECK(back.model.params.params()[i].name == m.params.params()[i].name);
      CHECK(back.model.params.params()[i].value == m.params.params()[i].value);
    }
  }
}

TEST_CASE("corruption is detected") {
  const Model m = init_model(test::tiny_config(), 1);
  const std::string bytes = serialize_checkpoint(m);
  CHECK(error_code_of([&] { parse_checkpoint(bytes.substr(0, bytes.size() - 3)); }) == ErrorCode::malformed_file);
  CHECK(error_code_of([&] { parse_checkpoint(bytes + "x"); }) == ErrorCode::malformed_file);
  CHECK(error_code_of([&] { parse_checkpoint("CGAT2" + bytes.substr(5)); }) == ErrorCode::malformed_file);
  CHECK(error_code_of([] { parse_checkpoint(""); }) == ErrorCode::malformed_file);

  // A parameter renamed in the file no longer matches the configuration.
  std::string renamed = bytes;
  const auto pos = renamed.find("head.bias");
  REQUIRE(pos != std::string::npos);
  renamed.replace(pos, 9, "head.bxas");
  CHECK(error_code_of([&] { parse_checkpoint(renamed); }) == ErrorCode::malformed_file);
}

TEST_CASE("saved checkpoints are byte-stable and hashable") {
  const auto dir = std::filesystem::temp_directory_path() / "cgat_ckpt_test";
  std::filesystem::create_directories(dir);
  const Model m = init_model(test::tiny_config(), 2);
  save_checkpoint(dir / "a.ckpt", m, {{"seed", 2}});
  save_checkpoint(dir / "b.ckpt", load_checkpoint(dir / "a.ckpt").model, {{"seed", 2}});
  CHECK(read_file(dir / "a.ckpt") == read_file(dir / "b.ckpt"));
  CHECK(sha256_file(dir / "a.ckpt") == sha256_hex(read_file(dir / "a.ckpt")));
  CHECK(error_code_of([&] { load_checkpoint(dir / "missing.ckpt"); }) == ErrorCode::io_failure);
  std::filesystem::remove_all(dir);
}

TEST_CASE("sha256 known answers") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("config json") {
  ModelConfig c;
  c.attention = AttentionKind::static_gat;
  c.blocks = 4;
  CHECK(model_config_from_json(to_json(c)) == c);
  CHECK(model_config_from_json(nlohmann::json::object()) == ModelConfig{});
  CHECK(error_code_of([] { model_config_from_json({{"cls", "sideways"}}); }) == ErrorCode::invalid_config);
}

TEST_CASE("graph cache round trip") {
  GraphDataset data;
  data.config.target_vertices = 60;
  data.config.split_seed = 5;
  for (int stage = 0; stage < kStageCount; ++stage) {
    for (int i = 0; i < 3; ++i) {
      GraphRecord r = preprocess_mesh(generate_tooth(dataset_sample_params(stage, 5, stage * 3 + i)).mesh, 60);
      r.id = "tooth_" + std::to_string(stage * 3 + i);
      r.label = stage;
      data.records.push_back(std::move(r));
    }
  }
  finalize_dataset(data);
  const auto dir = std::filesystem::temp_directory_path() / "cgat_cache_test";
  std::filesystem::create_directories(dir);
  save_graph_cache(dir / "graphs.bin", data);
  const GraphDataset back = load_graph_cache(dir / "graphs.bin");
  CHECK(back.config.target_vertices == 60);
  CHECK(back.scaler.minimum == data.scaler.minimum);
  CHECK(back.scaler.maximum == data.scaler.maximum);
  REQUIRE(back.records.size() == data.records.size());
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    CHECK(back.records[i].id == data.records[i].id);
    CHECK(back.records[i].label == data.records[i].label);
    CHECK(back.records[i].split == data.records[i].split);
    CHECK(back.records[i].mesh.vertices == data.records[i].mesh.vertices);
    CHECK(back.records[i].mesh.faces == data.records[i].mesh.faces);
    CHECK(back.records[i].features.curvature == data.records[i].features.curvature);
  }
  std::string bytes = read_file(dir / "graphs.bin");
  write_file(dir / "short.bin", bytes.substr(0, bytes.size() / 2));
  CHECK(error_code_of([&] { load_graph_cache(dir / "short.bin"); }) == ErrorCode::malformed_file);
  std::filesystem::remove_all(dir);

  ModelConfig c = test::tiny_config();
  const auto train = make_samples(data, c, Split::train);
  const auto test = make_samples(data, c, Split::test);
  CHECK(train.size() + test.size() + make_samples(data, c, Split::val).size() == data.records.size());
  for (const auto& s : train) {
    CHECK(s.graph.has_cls());
    CHECK(s.graph.x.cols() == 2);
  }
  c.features = FeatureChannels::curv;
  CHECK(make_samples(data, c, Split::train).front().graph.x.cols() == 1);
}

TEST_CASE("scaler is fitted on training records unless asked otherwise") {
  GraphDataset data;
  for (int i = 0; i < 4; ++i) {
    GraphRecord r;
    r.id = std::to_string(i);
    r.split = i < 3 ? Split::train : Split::test;
    r.features = {{double(i), double(i) + 1.0}, {0.1 * i, 0.2 + 0.1 * i}};
    data.records.push_back(r);
  }
  const FeatureScaler train_only = fit_dataset_scaler(data.records, false);
  CHECK(train_only.maximum[0] == 3.0);
  const FeatureScaler all = fit_dataset_scaler(data.records, true);
  CHECK(all.maximum[0] == 4.0);
}

}  // TEST_SUITE
