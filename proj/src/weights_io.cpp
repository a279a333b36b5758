#include "filterlens/weights_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <map>

#include "filterlens/error.hpp"

namespace filterlens {
namespace {

using json = nlohmann::json;

constexpr std::size_t kHeaderSize = 16;

std::uint64_t read_u64_le(const std::byte* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<std::uint64_t>(p[i]);
  return v;
}

void append_u64_le(std::vector<std::byte>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
}

float read_f32_le(const std::byte* p) {
  std::uint32_t bits = 0;
  for (int i = 3; i >= 0; --i) bits = (bits << 8) | static_cast<std::uint32_t>(p[i]);
  return std::bit_cast<float>(bits);
}

void append_f32_le(std::vector<std::byte>& out, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((bits >> (8 * i)) & 0xff));
}

std::uint64_t manifest_uint(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number_unsigned()) {
    throw FormatError(where + ": missing or non-integer \"" + key + "\"");
  }
  return it->get<std::uint64_t>();
}

ConvLayerRecord decode_layer(const json& entry, std::size_t index,
                             std::span<const std::byte> blob) {
  const std::string where = "layer #" + std::to_string(index);
  if (!entry.is_object()) throw FormatError(where + ": manifest entry is not an object");
  auto name = entry.find("name");
  if (name == entry.end() || !name->is_string()) {
    throw FormatError(where + ": missing \"name\"");
  }
  ConvLayerRecord layer;
  layer.layer_name = name->get<std::string>();
  layer.depth_rank = index;

  auto shape = entry.find("shape");
  if (shape == entry.end() || !shape->is_array() || shape->size() != 4) {
    throw FormatError(layer.layer_name + ": \"shape\" must be [c_out, c_in, k1, k2]");
  }
  std::size_t dims[4];
  for (std::size_t i = 0; i < 4; ++i) {
    const json& d = (*shape)[i];
    if (!d.is_number_unsigned() || d.get<std::uint64_t>() == 0) {
      throw FormatError(layer.layer_name + ": shape entries must be positive integers");
    }
    dims[i] = d.get<std::size_t>();
  }
  layer.c_out = dims[0];
  layer.c_in = dims[1];
  layer.k1 = dims[2];
  layer.k2 = dims[3];

  const std::uint64_t offset = manifest_uint(entry, "offset", layer.layer_name);
  const std::uint64_t nbytes = manifest_uint(entry, "nbytes", layer.layer_name);
  const std::uint64_t expected = static_cast<std::uint64_t>(layer.element_count()) * 4;
  if (nbytes != expected) {
    throw ShapeError(layer.layer_name + ": declared shape needs " + std::to_string(expected) +
                     " bytes, manifest gives " + std::to_string(nbytes));
  }
  if (offset > blob.size() || nbytes > blob.size() - offset) {
    throw ShapeError(layer.layer_name + ": blob range [" + std::to_string(offset) + ", " +
                     std::to_string(offset + nbytes) + ") exceeds data section of " +
                     std::to_string(blob.size()) + " bytes");
  }

  layer.weights.resize(layer.element_count());
  const std::byte* src = blob.data() + offset;
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(layer.weights.data(), src, nbytes);
  } else {
    for (std::size_t i = 0; i < layer.weights.size(); ++i) {
      layer.weights[i] = read_f32_le(src + 4 * i);
    }
  }
  for (std::size_t i = 0; i < layer.weights.size(); ++i) {
    if (!std::isfinite(layer.weights[i])) {
      throw DataError(layer.layer_name + ": non-finite weight at flat index " +
                      std::to_string(i));
    }
  }
  return layer;
}

}  // namespace

ModelRecord decode_container(std::span<const std::byte> bytes) {
  if (bytes.size() < kHeaderSize ||
      std::memcmp(bytes.data(), kNfwMagic, sizeof(kNfwMagic)) != 0) {
    throw FormatError("not an NFW container (bad magic)");
  }
  const std::uint64_t manifest_len = read_u64_le(bytes.data() + 8);
  if (manifest_len > bytes.size() - kHeaderSize) {
    throw FormatError("manifest length " + std::to_string(manifest_len) +
                      " exceeds file size");
  }
  const auto* text = reinterpret_cast<const char*>(bytes.data() + kHeaderSize);
  json manifest;
  try {
    manifest = json::parse(text, text + manifest_len);
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!manifest.is_object()) throw FormatError("manifest must be a JSON object");

  ModelRecord model;
  try {
    model.model_id = manifest.at("model_id").get<std::string>();
    model.dataset_tag = manifest.at("dataset").get<std::string>();
    model.robust_flag = manifest.at("robust").get<bool>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest header fields: ") + e.what());
  }
  if (model.model_id.empty()) throw FormatError("manifest model_id is empty");

  auto layers = manifest.find("layers");
  if (layers == manifest.end() || !layers->is_array()) {
    throw FormatError("manifest is missing the \"layers\" array");
  }
  const auto blob = bytes.subspan(kHeaderSize + manifest_len);
  model.layers.reserve(layers->size());
  for (std::size_t i = 0; i < layers->size(); ++i) {
    model.layers.push_back(decode_layer((*layers)[i], i, blob));
  }
  return model;
}

ModelRecord read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = in.tellg();
  if (size < 0) throw FormatError("cannot size " + path.string());
  in.seekg(0, std::ios::beg);
  std::vector<std::byte> bytes(static_cast<std::size_t>(size));
  if (!in.read(reinterpret_cast<char*>(bytes.data()), size)) {
    throw FormatError("short read on " + path.string());
  }
  try {
    return decode_container(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const ShapeError& e) {
    throw ShapeError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<std::byte> encode_container(const ModelRecord& model) {
  json layers = json::array();
  std::uint64_t offset = 0;
  for (const auto& layer : model.layers) {
    if (layer.weights.size() != layer.element_count()) {
      throw ShapeError(layer.layer_name + ": weight count does not match shape");
    }
    const std::uint64_t nbytes = layer.weights.size() * 4;
    layers.push_back({{"name", layer.layer_name},
                      {"shape", {layer.c_out, layer.c_in, layer.k1, layer.k2}},
                      {"offset", offset},
                      {"nbytes", nbytes}});
    offset += nbytes;
  }
  const json manifest = {{"model_id", model.model_id},
                         {"dataset", model.dataset_tag},
                         {"robust", model.robust_flag},
                         {"layers", std::move(layers)}};
  const std::string text = manifest.dump();

  std::vector<std::byte> out;
  out.reserve(kHeaderSize + text.size() + offset);
  for (char c : kNfwMagic) out.push_back(static_cast<std::byte>(c));
  append_u64_le(out, text.size());
  for (char c : text) out.push_back(static_cast<std::byte>(c));
  for (const auto& layer : model.layers) {
    for (float w : layer.weights) append_f32_le(out, w);
  }
  return out;
}

void write_container(const ModelRecord& model, const std::filesystem::path& path) {
  const auto bytes = encode_container(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

std::vector<ConvLayerRecord> select_3x3_layers(const ModelRecord& model) {
  std::vector<ConvLayerRecord> out;
  for (const auto& layer : model.layers) {
    if (!layer.is_3x3()) continue;
    out.push_back(layer);
    out.back().depth_rank = out.size() - 1;
  }
  if (out.empty()) {
    throw EmptySelectionError(model.model_id + ": no 3x3 convolution layers");
  }
  return out;
}

CollectionReport validate_collection(std::span<const ModelRecord> models) {
  CollectionReport report;
  std::map<std::string, std::size_t> seen;
  for (const auto& model : models) {
    ModelDiagnostics diag;
    diag.model_id = model.model_id;
    diag.layer_count = model.layers.size();
    for (const auto& layer : model.layers) {
      if (!layer.is_3x3()) continue;
      ++diag.layer_3x3_count;
      diag.filter_3x3_count += layer.filter_count();
    }
    if (diag.layer_3x3_count == 0) diag.notes.emplace_back("no 3x3 layers");
    if (++seen[model.model_id] == 2) {
      report.warnings.push_back("duplicated model_id: " + model.model_id);
    }
    report.models.push_back(std::move(diag));
  }
  return report;
}

}  // namespace filterlens
