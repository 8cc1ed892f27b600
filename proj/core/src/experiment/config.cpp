#include "tasktcn/experiment/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tasktcn/common/errors.hpp"
#include "tasktcn/common/hash.hpp"

namespace tasktcn::experiment {

using nlohmann::json;

std::string ModelCell::label() const {
  std::string s = models::to_string(model.kind) + "-" + models::to_string(model.embedding_kind);
  if (model.kind == models::ModelKind::tcn) s += "-" + models::to_string(model.embedding_position);
  return s;
}

std::string ModelCell::key() const {
  std::ostringstream os;
  os << model.key() << "|epochs=" << epochs << "|batch=" << batch_size;
  return os.str();
}

std::vector<ModelCell> ExperimentConfig::cells(std::size_t num_features, std::size_t num_tasks,
                                               std::size_t seq_len) const {
  std::vector<ModelCell> out;
  for (auto kind : grid.kinds) {
    const bool mlp = kind == models::ModelKind::mlp;
    for (auto emb : grid.embedding_kinds) {
      const std::vector<double> lambdas =
          emb == models::EmbeddingKind::bayes ? grid.kld_weights : std::vector<double>{0.0};
      std::vector<models::EmbeddingPosition> positions = grid.positions;
      if (mlp) positions = {models::EmbeddingPosition::first};
      for (auto pos : positions) {
        for (auto k : grid.width_factors) {
          for (auto d : grid.embedding_dims) {
            for (double lambda : lambdas) {
              for (auto epochs : grid.epochs) {
                for (auto batch : mlp ? grid.batch_sizes_mlp : grid.batch_sizes_tcn) {
                  ModelCell cell;
                  cell.model.kind = kind;
                  cell.model.embedding_kind = emb;
                  cell.model.embedding_position = pos;
                  cell.model.num_features = num_features;
                  cell.model.num_tasks = num_tasks;
                  cell.model.seq_len = seq_len;
                  cell.model.width_factor = k;
                  cell.model.embedding_dim = d;
                  cell.model.kld_weight = lambda;
                  cell.model.channels = grid.channels;
                  cell.model.levels = grid.levels;
                  cell.model.dropout = grid.dropout;
                  cell.epochs = epochs;
                  cell.batch_size = batch;
                  out.push_back(cell);
                }
              }
            }
          }
        }
      }
    }
  }
  return out;
}

models::TrainConfig ExperimentConfig::train_config(const ModelCell& cell, std::uint64_t s) const {
  models::TrainConfig t;
  t.warm_epochs = training.warm_epochs;
  t.epochs = cell.epochs;
  t.batch_size = cell.batch_size;
  t.lr_max = training.lr_max;
  t.lr = training.lr;
  t.warmup_fraction = training.warmup_fraction;
  t.div_start = training.div_start;
  t.div_final = training.div_final;
  t.seed = s;
  return t;
}

void ExperimentConfig::validate() const {
  if (schema_version != kConfigSchemaVersion) {
    throw ConfigError("config schema version " + std::to_string(schema_version) +
                      " is not supported (expected " + std::to_string(kConfigSchemaVersion) + ")");
  }
  if (num_folds < 2) throw ConfigError("need at least two folds");
  if (grid.kinds.empty() || grid.embedding_kinds.empty() || grid.positions.empty() ||
      grid.width_factors.empty() || grid.embedding_dims.empty() || grid.epochs.empty() ||
      grid.batch_sizes_mlp.empty() || grid.batch_sizes_tcn.empty()) {
    throw ConfigError("model grid has an empty axis");
  }
  for (auto e : grid.embedding_kinds) {
    if (e == models::EmbeddingKind::bayes && grid.kld_weights.empty()) {
      throw ConfigError("bayes embeddings need at least one KLD weight");
    }
  }
  if (!(training.validation_fraction > 0.0 && training.validation_fraction < 1.0)) {
    throw ConfigError("validation fraction must lie in (0, 1)");
  }
  if (dataset.kind != data::DatasetKind::synthetic && dataset.path.empty()) {
    throw ConfigError("dataset.path is required for wind and solar data");
  }
  if (finetune.epochs_grid.empty() || finetune.weight_decay_grid.empty()) {
    throw ConfigError("finetune grid has an empty axis");
  }
}

namespace {

template <typename E>
std::vector<std::string> names(const std::vector<E>& values) {
  std::vector<std::string> out;
  for (const auto& v : values) out.push_back(models::to_string(v));
  return out;
}

std::vector<std::string> season_names(const std::vector<transfer::Season>& values) {
  std::vector<std::string> out;
  for (auto v : values) out.push_back(transfer::to_string(v));
  return out;
}

std::string init_name(transfer::EmbeddingInit init) {
  return init == transfer::EmbeddingInit::copy ? "copy" : "default";
}

transfer::EmbeddingInit parse_init(const std::string& s) {
  if (s == "copy") return transfer::EmbeddingInit::copy;
  if (s == "default") return transfer::EmbeddingInit::standard_normal;
  throw ConfigError("unknown embedding init '" + s + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string ExperimentConfig::to_json() const {
  json j;
  j["schema_version"] = schema_version;
  j["profile"] = profile;
  j["seed"] = seed;
  j["fold_seed"] = fold_seed;
  j["num_folds"] = num_folds;
  j["output_dir"] = output_dir.string();
  j["threads"] = threads;
  j["baseline"] = baseline;
  j["dataset"] = {{"kind", data::to_string(dataset.kind)},
                  {"path", dataset.path.string()},
                  {"cache_dir", dataset.cache_dir.string()},
                  {"train_days", dataset.train_days},
                  {"feature_columns", dataset.feature_columns},
                  {"similarity_feature", dataset.similarity_feature}};
  std::vector<std::size_t> clones = synthetic.clone_of;
  j["synthetic"] = {{"num_tasks", synthetic.num_tasks},
                    {"num_clusters", synthetic.num_clusters},
                    {"days", synthetic.days},
                    {"day_len", synthetic.day_len},
                    {"num_features", synthetic.num_features},
                    {"noise", synthetic.noise},
                    {"feature_noise", synthetic.feature_noise},
                    {"mixture_spread", synthetic.mixture_spread},
                    {"task_spread", synthetic.task_spread},
                    {"ar_coefficient", synthetic.ar_coefficient},
                    {"lag_window", synthetic.lag_window},
                    {"profile", data::to_string(synthetic.profile)},
                    {"similarity_feature", synthetic.similarity_feature},
                    {"clone_of", clones},
                    {"seed", synthetic.seed},
                    {"start", synthetic.start}};
  j["model_grid"] = {{"kind", names(grid.kinds)},
                     {"embedding_kind", names(grid.embedding_kinds)},
                     {"embedding_position", names(grid.positions)},
                     {"width_factor", grid.width_factors},
                     {"embedding_dim", grid.embedding_dims},
                     {"kld_weight", grid.kld_weights},
                     {"epochs", grid.epochs},
                     {"batch_size_mlp", grid.batch_sizes_mlp},
                     {"batch_size_tcn", grid.batch_sizes_tcn},
                     {"channels", grid.channels},
                     {"levels", grid.levels},
                     {"dropout", grid.dropout}};
  j["training"] = {{"warm_epochs", training.warm_epochs},
                   {"lr_max", training.lr_max},
                   {"lr", training.lr},
                   {"warmup_fraction", training.warmup_fraction},
                   {"div_start", training.div_start},
                   {"div_final", training.div_final},
                   {"validation_fraction", training.validation_fraction}};
  std::vector<std::string> inits;
  for (auto i : finetune.inits) inits.push_back(init_name(i));
  j["finetune"] = {{"seasons", season_names(finetune.seasons)},
                   {"days", finetune.days},
                   {"init", inits},
                   {"epochs_grid", finetune.epochs_grid},
                   {"weight_decay_grid", finetune.weight_decay_grid},
                   {"lr", finetune.lr},
                   {"batch_size", finetune.batch_size}};
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.contains("schema_version")) throw ConfigError("config lacks schema_version");
  const std::string profile = j.value("profile", std::string("paper"));
  ExperimentConfig c = preset(profile);
  try {
    read(j, "schema_version", c.schema_version);
    read(j, "seed", c.seed);
    read(j, "fold_seed", c.fold_seed);
    read(j, "num_folds", c.num_folds);
    read(j, "threads", c.threads);
    read(j, "baseline", c.baseline);
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("dataset")) {
      const auto& d = j["dataset"];
      if (d.contains("kind")) c.dataset.kind = data::parse_dataset_kind(d["kind"].get<std::string>());
      if (d.contains("path")) c.dataset.path = d["path"].get<std::string>();
      if (d.contains("cache_dir")) c.dataset.cache_dir = d["cache_dir"].get<std::string>();
      read(d, "train_days", c.dataset.train_days);
      read(d, "feature_columns", c.dataset.feature_columns);
      read(d, "similarity_feature", c.dataset.similarity_feature);
    }
    if (j.contains("synthetic")) {
      const auto& s = j["synthetic"];
      auto& y = c.synthetic;
      read(s, "num_tasks", y.num_tasks);
      read(s, "num_clusters", y.num_clusters);
      read(s, "days", y.days);
      read(s, "day_len", y.day_len);
      read(s, "num_features", y.num_features);
      read(s, "noise", y.noise);
      read(s, "feature_noise", y.feature_noise);
      read(s, "mixture_spread", y.mixture_spread);
      read(s, "task_spread", y.task_spread);
      read(s, "ar_coefficient", y.ar_coefficient);
      read(s, "lag_window", y.lag_window);
      if (s.contains("profile")) y.profile = data::parse_cluster_profile(s["profile"].get<std::string>());
      read(s, "similarity_feature", y.similarity_feature);
      read(s, "clone_of", y.clone_of);
      read(s, "seed", y.seed);
      read(s, "start", y.start);
    }
    if (j.contains("model_grid")) {
      const auto& g = j["model_grid"];
      auto& m = c.grid;
      if (g.contains("kind")) {
        m.kinds.clear();
        for (const auto& s : g["kind"]) m.kinds.push_back(models::parse_model_kind(s.get<std::string>()));
      }
      if (g.contains("embedding_kind")) {
        m.embedding_kinds.clear();
        for (const auto& s : g["embedding_kind"]) {
          m.embedding_kinds.push_back(models::parse_embedding_kind(s.get<std::string>()));
        }
      }
      if (g.contains("embedding_position")) {
        m.positions.clear();
        for (const auto& s : g["embedding_position"]) {
          m.positions.push_back(models::parse_embedding_position(s.get<std::string>()));
        }
      }
      read(g, "width_factor", m.width_factors);
      read(g, "embedding_dim", m.embedding_dims);
      read(g, "kld_weight", m.kld_weights);
      read(g, "epochs", m.epochs);
      read(g, "batch_size_mlp", m.batch_sizes_mlp);
      read(g, "batch_size_tcn", m.batch_sizes_tcn);
      read(g, "channels", m.channels);
      read(g, "levels", m.levels);
      read(g, "dropout", m.dropout);
    }
    if (j.contains("training")) {
      const auto& t = j["training"];
      read(t, "warm_epochs", c.training.warm_epochs);
      read(t, "lr_max", c.training.lr_max);
      read(t, "lr", c.training.lr);
      read(t, "warmup_fraction", c.training.warmup_fraction);
      read(t, "div_start", c.training.div_start);
      read(t, "div_final", c.training.div_final);
      read(t, "validation_fraction", c.training.validation_fraction);
    }
    if (j.contains("finetune")) {
      const auto& f = j["finetune"];
      if (f.contains("seasons")) {
        c.finetune.seasons.clear();
        for (const auto& s : f["seasons"]) c.finetune.seasons.push_back(transfer::parse_season(s.get<std::string>()));
      }
      read(f, "days", c.finetune.days);
      if (f.contains("init")) {
        c.finetune.inits.clear();
        for (const auto& s : f["init"]) c.finetune.inits.push_back(parse_init(s.get<std::string>()));
      }
      read(f, "epochs_grid", c.finetune.epochs_grid);
      read(f, "weight_decay_grid", c.finetune.weight_decay_grid);
      read(f, "lr", c.finetune.lr);
      read(f, "batch_size", c.finetune.batch_size);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field has the wrong type: ") + e.what());
  }
  c.profile = profile;
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

ExperimentConfig ExperimentConfig::paper_preset() {
  ExperimentConfig c;
  c.profile = "paper";
  c.dataset.kind = data::DatasetKind::solar;
  c.grid.kinds = {models::ModelKind::mlp, models::ModelKind::tcn};
  return c;
}

ExperimentConfig ExperimentConfig::fast_preset() {
  ExperimentConfig c;
  c.profile = "fast";
  c.dataset.kind = data::DatasetKind::synthetic;
  c.dataset.train_days = 100;
  c.synthetic.num_tasks = 10;
  c.synthetic.num_clusters = 2;
  c.synthetic.days = 150;
  c.synthetic.day_len = 24;
  c.synthetic.num_features = 6;
  c.synthetic.noise = 0.05;
  c.synthetic.seed = 11;
  c.grid.kinds = {models::ModelKind::mlp, models::ModelKind::tcn};
  c.grid.embedding_kinds = {models::EmbeddingKind::normal};
  c.grid.positions = {models::EmbeddingPosition::first};
  c.grid.width_factors = {1};
  c.grid.embedding_dims = {4};
  c.grid.kld_weights = {1e-3};
  c.grid.epochs = {10};
  c.grid.batch_sizes_mlp = {256};
  c.grid.batch_sizes_tcn = {16};
  c.grid.channels = 16;
  c.grid.dropout = 0.1;
  c.training.warm_epochs = 10;
  c.finetune.seasons = {transfer::Season::winter};
  c.finetune.days = {7, 30};
  c.finetune.epochs_grid = {1, 2, 5, 10, 20};
  c.finetune.lr = 1e-2;
  c.finetune.batch_size = 4;
  return c;
}

ExperimentConfig ExperimentConfig::preset(const std::string& profile) {
  if (profile == "paper") return paper_preset();
  if (profile == "fast") return fast_preset();
  throw ConfigError("unknown profile '" + profile + "' (expected fast or paper)");
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  Fnv1a h;
  h.update(config.to_json());
  return h.digest();
}

}  // namespace tasktcn::experiment
