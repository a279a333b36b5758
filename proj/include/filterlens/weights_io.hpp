#pragma once

// NFW ("neutral filter weights") container reading and writing.
//
// Layout, little-endian throughout:
//   [0, 8)        magic "NFWv0001"
//   [8, 16)       uint64 manifest length M
//   [16, 16 + M)  UTF-8 JSON manifest
//   [16 + M, ...) concatenated float32 blobs, row-major [c_out, c_in, k1, k2]
// Layer offsets in the manifest are relative to the first blob byte.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace filterlens {

inline constexpr char kNfwMagic[8] = {'N', 'F', 'W', 'v', '0', '0', '0', '1'};

struct ConvLayerRecord {
  std::string layer_name;
  std::size_t depth_rank = 0;
  std::size_t c_out = 0;
  std::size_t c_in = 0;
  std::size_t k1 = 0;
  std::size_t k2 = 0;
  std::vector<float> weights;  // [c_out, c_in, k1, k2], row-major

  std::size_t element_count() const { return c_out * c_in * k1 * k2; }
  std::size_t filter_count() const { return c_out * c_in; }
  bool is_3x3() const { return k1 == 3 && k2 == 3; }
};

struct ModelRecord {
  std::string model_id;
  std::string dataset_tag;
  bool robust_flag = false;
  std::vector<ConvLayerRecord> layers;  // ascending depth_rank
};

// Throws FormatError, ShapeError or DataError (see error.hpp).
ModelRecord read_container(const std::filesystem::path& path);
ModelRecord decode_container(std::span<const std::byte> bytes);

// Offsets are assigned contiguously in layer order; the manifest is written
// with a stable key order so identical records encode to identical bytes.
std::vector<std::byte> encode_container(const ModelRecord& model);
void write_container(const ModelRecord& model, const std::filesystem::path& path);

// Keeps only k1 = k2 = 3 layers, in order, with depth_rank re-densified to
// 0..L-1. Throws EmptySelectionError when nothing survives.
std::vector<ConvLayerRecord> select_3x3_layers(const ModelRecord& model);

struct ModelDiagnostics {
  std::string model_id;
  std::size_t layer_count = 0;
  std::size_t layer_3x3_count = 0;
  std::size_t filter_3x3_count = 0;
  std::vector<std::string> notes;
};

struct CollectionReport {
  std::vector<ModelDiagnostics> models;
  std::vector<std::string> warnings;
};

CollectionReport validate_collection(std::span<const ModelRecord> models);

}  // namespace filterlens
