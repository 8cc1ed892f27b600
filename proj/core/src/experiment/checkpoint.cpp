#include "tasktcn/experiment/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tasktcn/common/errors.hpp"

namespace tasktcn::experiment {

using nlohmann::json;

namespace {

json config_json(const models::ModelConfig& c) {
  return {{"kind", models::to_string(c.kind)},
          {"embedding_kind", models::to_string(c.embedding_kind)},
          {"embedding_position", models::to_string(c.embedding_position)},
          {"num_features", c.num_features},
          {"num_tasks", c.num_tasks},
          {"seq_len", c.seq_len},
          {"width_factor", c.width_factor},
          {"embedding_dim", c.embedding_dim},
          {"kernel_size", c.kernel_size},
          {"levels", c.levels},
          {"channels", c.channels},
          {"dropout", c.dropout},
          {"kld_weight", c.kld_weight},
          {"seed", c.seed}};
}

models::ModelConfig config_from(const json& j) {
  models::ModelConfig c;
  c.kind = models::parse_model_kind(j.at("kind").get<std::string>());
  c.embedding_kind = models::parse_embedding_kind(j.at("embedding_kind").get<std::string>());
  c.embedding_position =
      models::parse_embedding_position(j.at("embedding_position").get<std::string>());
  c.num_features = j.at("num_features").get<std::size_t>();
  c.num_tasks = j.at("num_tasks").get<std::size_t>();
  c.seq_len = j.at("seq_len").get<std::size_t>();
  c.width_factor = j.at("width_factor").get<std::size_t>();
  c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
  c.kernel_size = j.at("kernel_size").get<std::size_t>();
  c.levels = j.at("levels").get<std::size_t>();
  c.channels = j.at("channels").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.kld_weight = j.at("kld_weight").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

json tensor_json(const std::string& name, const autodiff::Tensor<float>& t) {
  return {{"name", name},
          {"shape", t.shape()},
          {"data", std::vector<float>(t.values().begin(), t.values().end())}};
}

void load_tensor(const json& j, const std::string& name, autodiff::Tensor<float>& target) {
  const auto shape = j.at("shape").get<autodiff::Shape>();
  if (shape != target.shape()) {
    throw ConfigError("checkpoint tensor " + name + " has shape " + autodiff::shape_to_string(shape) +
                      ", model expects " + autodiff::shape_to_string(target.shape()));
  }
  const auto data = j.at("data").get<std::vector<float>>();
  if (data.size() != target.numel()) throw ConfigError("checkpoint tensor " + name + " is truncated");
  std::copy(data.begin(), data.end(), target.data());
}

json parse(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + " is not valid JSON: " + e.what());
  }
}

}  // namespace

std::string model_config_to_json(const models::ModelConfig& config) {
  return config_json(config).dump();
}

models::ModelConfig model_config_from_json(const std::string& text) {
  try {
    return config_from(parse(text, "model config"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
}

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
  if (!checkpoint.model) throw ContractViolation("checkpoint without a model");
  auto& model = *checkpoint.model;
  json params = json::array();
  for (auto* p : model.parameters()) params.push_back(tensor_json(p->name, p->value));
  json buffers = json::array();
  for (const auto& b : model.buffers()) buffers.push_back(tensor_json(b.name, *b.value));
  json j;
  j["format"] = "tasktcn-checkpoint";
  j["schema_version"] = kCheckpointSchemaVersion;
  j["model"] = config_json(model.config());
  j["parameters"] = std::move(params);
  j["buffers"] = std::move(buffers);
  j["tasks"] = checkpoint.tasks;
  j["standardizer"] = {{"names", checkpoint.standardizer.names()},
                       {"mean", checkpoint.standardizer.mean()},
                       {"stddev", checkpoint.standardizer.stddev()}};
  j["meta"] = {{"fold", checkpoint.fold},
               {"cell", checkpoint.cell},
               {"seed", checkpoint.seed},
               {"val_nrmse", checkpoint.val_nrmse}};
  return j.dump();
}

Checkpoint deserialize_checkpoint(const std::string& text) {
  const json j = parse(text, "checkpoint");
  try {
    if (j.value("format", std::string()) != "tasktcn-checkpoint") {
      throw ConfigError("not a tasktcn checkpoint");
    }
    const int version = j.at("schema_version").get<int>();
    if (version != kCheckpointSchemaVersion) {
      throw ConfigError("checkpoint schema version " + std::to_string(version) +
                        " is not supported (expected " + std::to_string(kCheckpointSchemaVersion) +
                        ")");
    }
    Checkpoint c;
    c.model = models::make_model(config_from(j.at("model")));
    const auto& params = j.at("parameters");
    auto model_params = c.model->parameters();
    if (params.size() != model_params.size()) {
      throw ConfigError("checkpoint holds " + std::to_string(params.size()) +
                        " parameters, model has " + std::to_string(model_params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto name = params[i].at("name").get<std::string>();
      if (name != model_params[i]->name) {
        throw ConfigError("checkpoint parameter " + name + " where " + model_params[i]->name +
                          " was expected");
      }
      load_tensor(params[i], name, model_params[i]->value);
    }
    const auto& buffers = j.at("buffers");
    auto model_buffers = c.model->buffers();
    if (buffers.size() != model_buffers.size()) throw ConfigError("checkpoint buffer count mismatch");
    for (std::size_t i = 0; i < buffers.size(); ++i) {
      const auto name = buffers[i].at("name").get<std::string>();
      if (name != model_buffers[i].name) throw ConfigError("checkpoint buffer " + name + " out of place");
      load_tensor(buffers[i], name, *model_buffers[i].value);
    }
    c.tasks = j.at("tasks").get<std::vector<std::string>>();
    if (c.tasks.size() != c.model->embedding().num_tasks()) {
      throw ConfigError("task registry does not match the embedding table");
    }
    const auto& s = j.at("standardizer");
    c.standardizer = data::Standardizer::from_stats(s.at("names").get<std::vector<std::string>>(),
                                                    s.at("mean").get<std::vector<double>>(),
                                                    s.at("stddev").get<std::vector<double>>());
    const auto& meta = j.at("meta");
    c.fold = meta.at("fold").get<std::size_t>();
    c.cell = meta.at("cell").get<std::string>();
    c.seed = meta.at("seed").get<std::uint64_t>();
    c.val_nrmse = meta.at("val_nrmse").get<double>();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out << serialize_checkpoint(checkpoint);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace tasktcn::experiment
