#include <doctest.h>

#include <bit>
#include <cstring>
#include <json.hpp>
#include <limits>
#include <random>

#include "filterlens/error.hpp"
#include "filterlens/weights_io.hpp"
#include "oracles.hpp"

using namespace filterlens;
using namespace filterlens::testing;

namespace {

// Hand-assembled container so the reader is checked against the byte layout
// rather than against encode_container.
std::vector<std::byte> raw_container(const std::string& manifest, const std::vector<float>& blob,
                                     std::size_t blob_bytes) {
  std::vector<std::byte> out;
  for (char c : std::string("NFWv0001")) out.push_back(std::byte(c));
  const std::uint64_t m = manifest.size();
  for (int i = 0; i < 8; ++i) out.push_back(std::byte((m >> (8 * i)) & 0xff));
  for (char c : manifest) out.push_back(std::byte(c));
  for (std::size_t i = 0; i < blob_bytes; ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(blob[i / 4]);
    out.push_back(std::byte((bits >> (8 * (i % 4))) & 0xff));
  }
  return out;
}

std::string one_layer_manifest(std::size_t nbytes) {
  return R"({"model_id":"m","dataset":"cifar10","robust":true,"layers":[)"
         R"({"name":"conv1","shape":[2,1,3,3],"offset":0,"nbytes":)" +
         std::to_string(nbytes) + "}]}";
}

}  // namespace

TEST_CASE("read a one-layer container from raw bytes") {
  std::vector<float> blob(18);
  for (std::size_t i = 0; i < blob.size(); ++i) blob[i] = 0.25f * static_cast<float>(i) - 1.0f;
  const auto model = decode_container(raw_container(one_layer_manifest(72), blob, 72));
  CHECK(model.model_id == "m");
  CHECK(model.dataset_tag == "cifar10");
  CHECK(model.robust_flag);
  REQUIRE(model.layers.size() == 1);
  const auto& l = model.layers[0];
  CHECK(l.c_out == 2);
  CHECK(l.c_in == 1);
  CHECK(l.k1 == 3);
  CHECK(l.k2 == 3);
  CHECK(l.weights == blob);
}

TEST_CASE("shape and byte-count disagreement is a ShapeError") {
  std::vector<float> blob(18, 1.0f);
  CHECK_THROWS_AS(decode_container(raw_container(one_layer_manifest(68), blob, 68)), ShapeError);
  // Declared 72 but the data section only holds 68 bytes.
  CHECK_THROWS_AS(decode_container(raw_container(one_layer_manifest(72), blob, 68)), ShapeError);
}

TEST_CASE("non-finite weights are a DataError naming the layer and index") {
  std::vector<float> blob(18, 0.5f);
  blob[7] = std::numeric_limits<float>::quiet_NaN();
  try {
    decode_container(raw_container(one_layer_manifest(72), blob, 72));
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("conv1") != std::string::npos);
    CHECK(msg.find("7") != std::string::npos);
  }
  blob[7] = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(decode_container(raw_container(one_layer_manifest(72), blob, 72)), DataError);
}

TEST_CASE("malformed headers are FormatErrors") {
  std::vector<float> blob(18, 0.5f);
  auto bytes = raw_container(one_layer_manifest(72), blob, 72);
  SUBCASE("bad magic") {
    bytes[3] = std::byte('X');
    CHECK_THROWS_AS(decode_container(bytes), FormatError);
  }
  SUBCASE("truncated header") {
    bytes.resize(10);
    CHECK_THROWS_AS(decode_container(bytes), FormatError);
  }
  SUBCASE("manifest length past end of file") {
    bytes[8] = std::byte(0xff);
    bytes[12] = std::byte(0x01);
    CHECK_THROWS_AS(decode_container(bytes), FormatError);
  }
  SUBCASE("invalid JSON") {
    CHECK_THROWS_AS(decode_container(raw_container("{not json", blob, 72)), FormatError);
  }
  SUBCASE("missing fields") {
    CHECK_THROWS_AS(decode_container(raw_container(R"({"model_id":"m"})", blob, 72)),
                    FormatError);
    CHECK_THROWS_AS(
        decode_container(raw_container(
            R"({"model_id":"","dataset":"d","robust":false,"layers":[]})", blob, 0)),
        FormatError);
    CHECK_THROWS_AS(decode_container(raw_container(
                        R"({"model_id":"m","dataset":"d","robust":false,"layers":[)"
                        R"({"name":"c","shape":[2,1,3],"offset":0,"nbytes":72}]})",
                        blob, 72)),
                    FormatError);
  }
}

TEST_CASE("write then read reproduces every weight bit-exactly") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<ConvLayerRecord> layers;
    const int n_layers = 1 + static_cast<int>(rng() % 4);
    for (int i = 0; i < n_layers; ++i) {
      const std::size_t k = (rng() % 3 == 0) ? 1 : 3;
      layers.push_back(random_layer(rng, "layer" + std::to_string(i), 1 + rng() % 5,
                                    1 + rng() % 4, k));
    }
    // Include subnormals and signed zero.
    layers[0].weights[0] = -0.0f;
    layers[0].weights.back() = std::numeric_limits<float>::denorm_min();
    const auto model = make_model("model-" + std::to_string(trial), layers, "imnet", trial % 2);
    const auto dir = scratch_dir("roundtrip");
    write_container(model, dir / "m.nfw");
    const auto back = read_container(dir / "m.nfw");
    CHECK(back.model_id == model.model_id);
    CHECK(back.dataset_tag == model.dataset_tag);
    CHECK(back.robust_flag == model.robust_flag);
    REQUIRE(back.layers.size() == model.layers.size());
    for (std::size_t i = 0; i < back.layers.size(); ++i) {
      const auto& a = back.layers[i];
      const auto& b = model.layers[i];
      CHECK(a.layer_name == b.layer_name);
      CHECK(a.depth_rank == i);
      CHECK(std::memcmp(a.weights.data(), b.weights.data(), a.weights.size() * 4) == 0);
    }
    CHECK(encode_container(back) == encode_container(model));
  }
}

TEST_CASE("encoded manifest follows the documented layout") {
  std::mt19937_64 rng(5);
  const auto model = make_model("abc", {random_layer(rng, "a", 2, 1), random_layer(rng, "b", 1, 2, 5)});
  const auto bytes = encode_container(model);
  CHECK(std::memcmp(bytes.data(), "NFWv0001", 8) == 0);
  std::uint64_t m = 0;
  for (int i = 7; i >= 0; --i) m = (m << 8) | std::to_integer<std::uint64_t>(bytes[8 + i]);
  const auto manifest = nlohmann::json::parse(reinterpret_cast<const char*>(bytes.data() + 16),
                                              reinterpret_cast<const char*>(bytes.data() + 16 + m));
  CHECK(manifest["layers"][0]["offset"] == 0);
  CHECK(manifest["layers"][0]["nbytes"] == 72);
  CHECK(manifest["layers"][1]["offset"] == 72);
  CHECK(manifest["layers"][1]["shape"] == nlohmann::json({1, 2, 5, 5}));
  CHECK(bytes.size() == 16 + m + 72 + 200);
}

TEST_CASE("select_3x3_layers keeps 3x3 layers and re-densifies depth") {
  std::mt19937_64 rng(1);
  SUBCASE("mixed kernel sizes") {
    const auto model = make_model("m", {random_layer(rng, "stem", 4, 3, 7), random_layer(rng, "a", 2, 4),
                                        random_layer(rng, "b", 2, 2), random_layer(rng, "proj", 2, 2, 1)});
    const auto sel = select_3x3_layers(model);
    REQUIRE(sel.size() == 2);
    CHECK(sel[0].layer_name == "a");
    CHECK(sel[0].depth_rank == 0);
    CHECK(sel[1].layer_name == "b");
    CHECK(sel[1].depth_rank == 1);
  }
  SUBCASE("only 1x1 kernels") {
    const auto model = make_model("m", {random_layer(rng, "a", 2, 2, 1)});
    CHECK_THROWS_AS(select_3x3_layers(model), EmptySelectionError);
  }
  SUBCASE("five 3x3 layers; idempotent") {
    std::vector<ConvLayerRecord> layers;
    for (int i = 0; i < 5; ++i) layers.push_back(random_layer(rng, "c" + std::to_string(i), 2, 2));
    const auto model = make_model("m", layers);
    const auto sel = select_3x3_layers(model);
    REQUIRE(sel.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(sel[i].depth_rank == i);
    ModelRecord again = model;
    again.layers = sel;
    const auto sel2 = select_3x3_layers(again);
    REQUIRE(sel2.size() == sel.size());
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(sel2[i].layer_name == sel[i].layer_name);
      CHECK(sel2[i].depth_rank == sel[i].depth_rank);
      CHECK(sel2[i].weights == sel[i].weights);
    }
  }
}

TEST_CASE("validate_collection diagnostics") {
  std::mt19937_64 rng(2);
  const auto a = make_model("a", {random_layer(rng, "x", 2, 3), random_layer(rng, "y", 4, 2, 1)});
  const auto b = make_model("b", {random_layer(rng, "x", 2, 2)});
  const auto c = make_model("a", {random_layer(rng, "z", 2, 2, 1)});

  const std::vector<ModelRecord> distinct{a, b};
  auto report = validate_collection(distinct);
  REQUIRE(report.models.size() == 2);
  CHECK(report.warnings.empty());
  CHECK(report.models[0].filter_3x3_count == 6);
  CHECK(report.models[0].layer_count == 2);
  CHECK(report.models[0].layer_3x3_count == 1);

  const std::vector<ModelRecord> dup{a, b, c};
  report = validate_collection(dup);
  REQUIRE(report.warnings.size() == 1);
  CHECK(report.warnings[0].find("a") != std::string::npos);
  REQUIRE(report.models[2].notes.size() == 1);
  CHECK(report.models[2].notes[0] == "no 3x3 layers");
}
