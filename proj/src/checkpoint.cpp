#include <fstream>
#include <iterator>

#include "brsent/training.hpp"
#include "byte_io.hpp"
#include "json.hpp"

namespace brsent {

using nlohmann::json;

namespace {

constexpr std::string_view kCheckpointFormat = "brsent-checkpoint";
constexpr std::string_view kOptimizerFormat = "brsent-optimizer";

std::filesystem::path with_suffix(const std::filesystem::path& stem, std::string_view suffix) {
  std::filesystem::path p = stem;
  p += suffix;
  return p;
}

json config_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size},
          {"embed_dim", c.embed_dim},
          {"hidden", c.hidden},
          {"n_out", c.n_out},
          {"dropout_rate", c.dropout_rate},
          {"output_peephole", format_output_peephole(c.output_peephole)},
          {"use_bias", c.use_bias}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.n_out = j.at("n_out").get<int>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.output_peephole = parse_output_peephole(j.at("output_peephole").get<std::string>());
  c.use_bias = j.at("use_bias").get<bool>();
  return c;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json tensor_entries(const std::vector<NamedConstTensor>& tensors, std::string_view prefix = "") {
  json entries = json::array();
  for (const auto& t : tensors) {
    entries.push_back({{"name", std::string(prefix) + t.name},
                       {"rows", t.tensor->rows()},
                       {"cols", t.tensor->cols()}});
  }
  return entries;
}

void append_payload(std::string& payload, const std::vector<NamedConstTensor>& tensors) {
  for (const auto& t : tensors) {
    for (double v : t.tensor->values()) detail::put_le<double>(payload, v);
  }
}

void write_manifest_and_payload(const std::filesystem::path& stem, json manifest,
                                const std::string& payload) {
  manifest["payload_bytes"] = payload.size();
  manifest["payload_crc32"] = detail::crc32_of(payload);
  write_file(with_suffix(stem, ".json"), manifest.dump(2) + "\n");
  write_file(with_suffix(stem, ".bin"), payload);
}

// Checks every declared tensor against the layout of `target`.
void check_layout(const json& entries, const std::vector<NamedTensor>& target,
                  std::string_view prefix = "") {
  for (std::size_t k = 0; k < target.size(); ++k) {
    const std::string name = std::string(prefix) + target[k].name;
    if (k >= entries.size()) throw CheckpointError("checkpoint is missing tensor '" + name + "'");
    const auto& e = entries[k];
    const auto rows = e.at("rows").get<std::size_t>();
    const auto cols = e.at("cols").get<std::size_t>();
    if (e.at("name").get<std::string>() != name) {
      throw CheckpointError("checkpoint tensor " + std::to_string(k) + " is '" +
                            e.at("name").get<std::string>() + "', expected '" + name + "'");
    }
    if (rows != target[k].tensor->rows() || cols != target[k].tensor->cols()) {
      throw CheckpointError("shape mismatch for tensor '" + name + "': checkpoint has " +
                            std::to_string(rows) + "x" + std::to_string(cols) + ", expected " +
                            shape_string(*target[k].tensor));
    }
  }
  if (entries.size() != target.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(entries.size()) +
                          " tensors, expected " + std::to_string(target.size()));
  }
}

std::string read_payload(const std::filesystem::path& stem, const json& manifest) {
  const std::string payload = read_file(with_suffix(stem, ".bin"));
  if (detail::crc32_of(payload) != manifest.at("payload_crc32").get<std::uint32_t>()) {
    throw CheckpointError("checksum mismatch in " + with_suffix(stem, ".bin").string() +
                          " (payload truncated or corrupt)");
  }
  if (payload.size() != manifest.at("payload_bytes").get<std::size_t>()) {
    throw CheckpointError("payload size does not match the manifest");
  }
  return payload;
}

std::size_t fill_tensors(const std::string& payload, std::size_t offset,
                         const std::vector<NamedTensor>& tensors) {
  for (const auto& t : tensors) {
    for (double& v : t.tensor->values()) {
      if (offset + 8 > payload.size()) throw CheckpointError("payload shorter than its tensors");
      v = detail::get_le<double>(payload.data() + offset);
      offset += 8;
    }
  }
  return offset;
}

json parse_manifest(const std::filesystem::path& stem, std::string_view format) {
  json manifest;
  try {
    manifest = json::parse(read_file(with_suffix(stem, ".json")));
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed manifest: ") + e.what());
  }
  if (manifest.value("format", "") != format) {
    throw CheckpointError(with_suffix(stem, ".json").string() + " is not a " +
                          std::string(format) + " manifest");
  }
  return manifest;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::filesystem::path& stem) {
  const auto tensors = params.tensors();
  json manifest;
  manifest["format"] = kCheckpointFormat;
  manifest["version"] = 1;
  manifest["config"] = config_json(params.config);
  manifest["tensors"] = tensor_entries(tensors);
  std::string payload;
  append_payload(payload, tensors);
  write_manifest_and_payload(stem, std::move(manifest), payload);
}

ModelParams load_checkpoint(const std::filesystem::path& stem, const ModelConfig& expected) {
  const json manifest = parse_manifest(stem, kCheckpointFormat);
  try {
    ModelParams params = ModelParams::zeros(expected);
    const auto target = params.tensors();
    check_layout(manifest.at("tensors"), target);
    const std::string payload = read_payload(stem, manifest);
    if (fill_tensors(payload, 0, target) != payload.size()) {
      throw CheckpointError("payload longer than its tensors");
    }
    for (const auto& t : params.tensors()) {
      if (!t.tensor->all_finite()) {
        throw CheckpointError("tensor '" + t.name + "' holds non-finite values");
      }
    }
    return params;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed manifest: ") + e.what());
  }
}

ModelParams load_checkpoint(const std::filesystem::path& stem) {
  const json manifest = parse_manifest(stem, kCheckpointFormat);
  ModelConfig config;
  try {
    config = config_from_json(manifest.at("config"));
    config.validate();
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("bad model config in manifest: ") + e.what());
  }
  return load_checkpoint(stem, config);
}

void save_optimizer_state(const OptimizerState& state, const std::filesystem::path& stem) {
  const auto opt_stem = with_suffix(stem, ".opt");
  json manifest;
  manifest["format"] = kOptimizerFormat;
  manifest["version"] = 1;
  manifest["optimizer"] = format_optimizer(state.config.kind);
  manifest["lr"] = state.config.lr;
  manifest["beta1"] = state.config.beta1;
  manifest["beta2"] = state.config.beta2;
  manifest["epsilon"] = state.config.epsilon;
  manifest["step"] = state.step;
  std::string payload;
  json entries = json::array();
  if (state.first_moment && state.second_moment) {
    const auto m = state.first_moment->tensors();
    const auto v = state.second_moment->tensors();
    entries = tensor_entries(m, "m.");
    for (auto& e : tensor_entries(v, "v.")) entries.push_back(e);
    append_payload(payload, m);
    append_payload(payload, v);
  }
  manifest["tensors"] = entries;
  write_manifest_and_payload(opt_stem, std::move(manifest), payload);
}

OptimizerState load_optimizer_state(const std::filesystem::path& stem, const ModelConfig& model) {
  const auto opt_stem = with_suffix(stem, ".opt");
  const json manifest = parse_manifest(opt_stem, kOptimizerFormat);
  try {
    OptimizerState state;
    state.config.kind = parse_optimizer(manifest.at("optimizer").get<std::string>());
    state.config.lr = manifest.at("lr").get<double>();
    state.config.beta1 = manifest.at("beta1").get<double>();
    state.config.beta2 = manifest.at("beta2").get<double>();
    state.config.epsilon = manifest.at("epsilon").get<double>();
    state.step = manifest.at("step").get<std::uint64_t>();
    const std::string payload = read_payload(opt_stem, manifest);
    const auto& entries = manifest.at("tensors");
    if (!entries.empty()) {
      ModelParams m = ModelParams::zeros(model);
      ModelParams v = ModelParams::zeros(model);
      auto m_t = m.tensors();
      auto v_t = v.tensors();
      std::vector<NamedTensor> both = m_t;
      for (auto& t : both) t.name = "m." + t.name;
      for (auto t : v_t) {
        t.name = "v." + t.name;
        both.push_back(t);
      }
      check_layout(entries, both);
      fill_tensors(payload, 0, both);
      state.first_moment = std::move(m);
      state.second_moment = std::move(v);
    }
    return state;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed optimizer manifest: ") + e.what());
  }
}

}  // namespace brsent
