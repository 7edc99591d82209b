#pragma once

#include <string>

#include <json.hpp>

#include "prefalign/model.hpp"

namespace prefalign::model {

// Binary layout: "PFCKPT01", u64 header size, JSON header (config, lora,
// lineage and a tensor table), then raw native-endian tensor data in table
// order.
struct Checkpoint {
  nlohmann::json lineage = nlohmann::json::object();  // seeds that produced the weights
};

template <typename Scalar>
std::string serialize_checkpoint(const Model<Scalar>& model, const Checkpoint& info = {});

template <typename Scalar>
Model<Scalar> deserialize_checkpoint(std::string_view bytes, Checkpoint* info = nullptr);

template <typename Scalar>
void write_checkpoint(const std::string& path, const Model<Scalar>& model, const Checkpoint& info = {});

template <typename Scalar>
Model<Scalar> read_checkpoint(const std::string& path, Checkpoint* info = nullptr);

nlohmann::json to_json(const ModelConfig& config);
nlohmann::json to_json(const LoraConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);
LoraConfig lora_config_from_json(const nlohmann::json& j);

}  // namespace prefalign::model
