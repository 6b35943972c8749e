// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "sawtopics/model.hpp"

namespace sawtopics {

// Checkpoint container: 8-byte magic, little-endian u64 manifest length, the
// manifest JSON, then the named arrays concatenated row-major in IEEE-754
// little-endian at the manifest's precision.
inline constexpr char kCheckpointMagic[8] = {'S', 'A', 'W', 'T', 'C', 'K', 'P', '1'};

template <typename Scalar>
constexpr const char* precision_name();
template <>
constexpr const char* precision_name<double>() {
  return "float64";
}
template <>
constexpr const char* precision_name<float>() {
  return "float32";
}

template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path, const ModelParams<Scalar>& model,
                     long long step, nlohmann::json extra = nlohmann::json::object()) {
  static_assert(sizeof(double) == 8 && sizeof(float) == 4);

  nlohmann::json manifest = std::move(extra);
  manifest["layer_widths"] = model.layer_widths;
  manifest["embed_dim"] = model.embed_dim;
  manifest["hidden"] = model.hidden;
  manifest["variant"] = to_string(model.variant);
  manifest["step"] = step;
  manifest["precision"] = precision_name<Scalar>();
  manifest["vocab_size"] = model.vocab_size;
  manifest["log1p_input"] = model.log1p_input;

  nlohmann::json arrays = nlohmann::json::array();
  std::uint64_t offset = 0;
  model.for_each_param([&](const std::string& name, const Mat<Scalar>& m) {
    arrays.push_back({{"name", name},
                      {"rows", m.rows()},
                      {"cols", m.cols()},
                      {"offset", offset}});
    offset += static_cast<std::uint64_t>(m.size()) * sizeof(Scalar);
  });
  manifest["arrays"] = arrays;

  const std::string manifest_bytes = manifest.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::uint64_t len = manifest_bytes.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(manifest_bytes.data(), static_cast<std::streamsize>(manifest_bytes.size()));
  model.for_each_param([&](const std::string&, const Mat<Scalar>& m) {
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(Scalar)));
  });
  if (!out) throw std::runtime_error("checkpoint write failed: " + path.string());
}

inline nlohmann::json read_checkpoint_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path.string());
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string manifest_bytes(len, '\0');
  in.read(manifest_bytes.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("truncated checkpoint: " + path.string());
  return nlohmann::json::parse(manifest_bytes);
}

template <typename Scalar>
ModelParams<Scalar> load_checkpoint(const std::filesystem::path& path) {
  const nlohmann::json manifest = read_checkpoint_manifest(path);
  if (manifest.at("precision").get<std::string>() != precision_name<Scalar>()) {
    throw std::runtime_error("checkpoint precision is " +
                             manifest.at("precision").get<std::string>() +
                             ", expected " + precision_name<Scalar>());
  }

  ModelParams<Scalar> model = init_model<Scalar>(
      decoder_kind_from_string(manifest.at("variant").get<std::string>()),
      manifest.at("vocab_size").get<int>(),
      manifest.at("layer_widths").get<std::vector<int>>(),
      manifest.at("embed_dim").get<int>(), manifest.at("hidden").get<int>(), 0,
      manifest.value("log1p_input", false));

  std::ifstream in(path, std::ios::binary);
  char magic[8];
  in.read(magic, sizeof(magic));
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  in.seekg(static_cast<std::streamoff>(len), std::ios::cur);
  const std::streamoff payload_start = in.tellg();

  std::size_t loaded = 0;
  for (const auto& entry : manifest.at("arrays")) {
    const std::string name = entry.at("name").get<std::string>();
    const Index rows = entry.at("rows").get<Index>();
    const Index cols = entry.at("cols").get<Index>();
    const std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
    bool found = false;
    model.for_each_param([&](const std::string& pname, Mat<Scalar>& m) {
      if (pname != name) return;
      if (m.rows() != rows || m.cols() != cols) {
        throw std::runtime_error("checkpoint array " + name + " has shape " +
                                 shape_str(rows, cols) + ", expected " +
                                 shape_str(m.rows(), m.cols()));
      }
      in.seekg(payload_start + static_cast<std::streamoff>(offset));
      in.read(reinterpret_cast<char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(Scalar)));
      found = true;
    });
    if (!found) throw std::runtime_error("checkpoint array " + name + " is not a model parameter");
    ++loaded;
  }
  if (!in) throw std::runtime_error("truncated checkpoint payload: " + path.string());
  if (loaded != model.num_param_matrices()) {
    throw std::runtime_error("checkpoint is missing parameter arrays");
  }
  return model;
}

}  // namespace sawtopics
