#include "prefalign/checkpoint.hpp"

#include <cstring>

namespace prefalign::model {

namespace {

constexpr std::string_view kMagic = "PFCKPT01";

template <typename Scalar>
constexpr const char* dtype_name() {
  return sizeof(Scalar) == 4 ? "f32" : "f64";
}

}  // namespace

nlohmann::json to_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"context_length", c.context_length}, {"layers", c.layers},
          {"heads", c.heads},           {"embed_dim", c.embed_dim},           {"seed", c.seed}};
}

nlohmann::json to_json(const LoraConfig& c) {
  return {{"rank", c.rank}, {"alpha", c.alpha}, {"targets", c.targets}, {"seed", c.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.context_length = j.at("context_length").get<int>();
  c.layers = j.at("layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

LoraConfig lora_config_from_json(const nlohmann::json& j) {
  LoraConfig c;
  c.rank = j.at("rank").get<int>();
  c.alpha = j.at("alpha").get<double>();
  c.targets = j.at("targets").get<std::vector<std::string>>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

template <typename Scalar>
std::string serialize_checkpoint(const Model<Scalar>& model, const Checkpoint& info) {
  nlohmann::ordered_json header;
  header["dtype"] = dtype_name<Scalar>();
  header["config"] = to_json(model.config());
  header["lora"] = model.lora() ? nlohmann::ordered_json(to_json(*model.lora())) : nlohmann::ordered_json();
  header["lineage"] = info.lineage;
  auto& table = header["tensors"] = nlohmann::ordered_json::array();
  std::string data;
  model.for_each_parameter([&](const std::string& name, const Parameter<Scalar>& p) {
    table.push_back({{"name", name}, {"rows", p.value.rows()}, {"cols", p.value.cols()},
                     {"trainable", p.trainable}});
    data.append(reinterpret_cast<const char*>(p.value.data()),
                sizeof(Scalar) * static_cast<std::size_t>(p.value.size()));
  });
  const std::string text = header.dump();
  std::string out(kMagic);
  const std::uint64_t n = text.size();
  out.append(reinterpret_cast<const char*>(&n), sizeof n);
  out += text;
  out += data;
  return out;
}

template <typename Scalar>
Model<Scalar> deserialize_checkpoint(std::string_view bytes, Checkpoint* info) {
  if (bytes.size() < kMagic.size() + 8 || bytes.substr(0, kMagic.size()) != kMagic) {
    throw ValidationError("checkpoint: bad magic");
  }
  std::uint64_t n = 0;
  std::memcpy(&n, bytes.data() + kMagic.size(), sizeof n);
  std::size_t pos = kMagic.size() + sizeof n;
  if (n > bytes.size() - pos) throw ValidationError("checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, n));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint: malformed header: ") + e.what());
  }
  pos += n;
  if (header.at("dtype") != dtype_name<Scalar>()) {
    throw ValidationError("checkpoint: stored as " + header.at("dtype").get<std::string>() +
                          ", requested " + dtype_name<Scalar>());
  }
  Model<Scalar> model(model_config_from_json(header.at("config")));
  if (!header.at("lora").is_null()) model = apply_lora(std::move(model), lora_config_from_json(header.at("lora")));
  const auto& table = header.at("tensors");
  std::size_t index = 0;
  model.for_each_parameter([&](const std::string& name, Parameter<Scalar>& p) {
    if (index >= table.size()) throw ValidationError("checkpoint: missing tensor " + name);
    const auto& t = table[index++];
    if (t.at("name") != name || t.at("rows") != p.value.rows() || t.at("cols") != p.value.cols()) {
      throw ValidationError("checkpoint: tensor table mismatch at " + name);
    }
    const auto size = sizeof(Scalar) * static_cast<std::size_t>(p.value.size());
    if (size > bytes.size() - pos) throw ValidationError("checkpoint: truncated data at " + name);
    std::memcpy(p.value.data(), bytes.data() + pos, size);
    pos += size;
    p.trainable = t.at("trainable").get<bool>();
  });
  if (index != table.size() || pos != bytes.size()) {
    throw ValidationError("checkpoint: trailing tensors or bytes");
  }
  if (info) info->lineage = header.at("lineage");
  return model;
}

template <typename Scalar>
void write_checkpoint(const std::string& path, const Model<Scalar>& model, const Checkpoint& info) {
  write_file(path, serialize_checkpoint(model, info));
}

template <typename Scalar>
Model<Scalar> read_checkpoint(const std::string& path, Checkpoint* info) {
  return deserialize_checkpoint<Scalar>(read_file(path), info);
}

#define PREFALIGN_INSTANTIATE(S)                                                         \
  template std::string serialize_checkpoint(const Model<S>&, const Checkpoint&);         \
  template Model<S> deserialize_checkpoint<S>(std::string_view, Checkpoint*);            \
  template void write_checkpoint(const std::string&, const Model<S>&, const Checkpoint&); \
  template Model<S> read_checkpoint<S>(const std::string&, Checkpoint*);

PREFALIGN_INSTANTIATE(float)
PREFALIGN_INSTANTIATE(double)

#undef PREFALIGN_INSTANTIATE

}  // namespace prefalign::model
