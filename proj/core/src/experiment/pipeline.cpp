#include "tasktcn/experiment/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tasktcn/common/errors.hpp"
#include "tasktcn/data/synthetic.hpp"

namespace tasktcn::experiment {

using data::ParkRecord;

std::vector<std::string> Dataset::park_ids() const {
  std::vector<std::string> out;
  for (const auto& r : records) out.push_back(r.park_id);
  return out;
}

const ParkRecord& Dataset::park(const std::string& id) const {
  for (const auto& r : records) {
    if (r.park_id == id) return r;
  }
  throw ValidationError("unknown park " + id);
}

namespace {

data::DatasetSpec spec_for(const ExperimentConfig& config) {
  data::DatasetSpec spec;
  switch (config.dataset.kind) {
    case data::DatasetKind::wind:
      spec = data::DatasetSpec::wind();
      break;
    case data::DatasetKind::solar:
      spec = data::DatasetSpec::solar();
      break;
    case data::DatasetKind::synthetic:
      spec = config.synthetic.dataset_spec();
      break;
  }
  if (!config.dataset.feature_columns.empty()) spec.feature_columns = config.dataset.feature_columns;
  if (!config.dataset.similarity_feature.empty()) {
    spec.similarity_feature = config.dataset.similarity_feature;
  }
  spec.validate();
  return spec;
}

void read_cluster_labels(const std::filesystem::path& dir, std::vector<ParkRecord>& records) {
  const auto path = dir / "manifest.json";
  if (!std::filesystem::exists(path)) return;
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    const auto j = nlohmann::json::parse(ss.str());
    if (!j.contains("parks")) return;
    for (const auto& p : j["parks"]) {
      const auto id = p.at("park_id").get<std::string>();
      for (auto& r : records) {
        if (r.park_id == id) r.cluster = p.at("cluster").get<int>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("unreadable manifest " + path.string() + ": " + e.what());
  }
}

}  // namespace

Dataset load_dataset(const ExperimentConfig& config) {
  Dataset d;
  d.name = data::to_string(config.dataset.kind);
  d.spec = spec_for(config);
  if (config.dataset.kind == data::DatasetKind::synthetic && config.dataset.path.empty()) {
    d.records = data::gen_synthetic(config.synthetic);
  } else {
    d.records = data::prepare_dataset(config.dataset.path, d.spec, config.dataset.cache_dir);
    read_cluster_labels(config.dataset.path, d.records);
  }
  std::sort(d.records.begin(), d.records.end(),
            [](const ParkRecord& a, const ParkRecord& b) { return a.park_id < b.park_id; });
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    d.records[i].task_id = models::TaskId(static_cast<std::uint32_t>(i + 1));
  }
  return d;
}

std::vector<std::string> FoldData::source_parks() const {
  std::vector<std::string> out;
  for (const auto& r : source_train) out.push_back(r.park_id);
  return out;
}

FoldData prepare_fold(const Dataset& dataset, const data::FoldPlan& plan, std::size_t fold,
                      std::size_t train_days, double validation_fraction) {
  FoldData f;
  f.fold = fold;
  f.day_len = dataset.spec.day_len;
  std::vector<ParkRecord> src_train, src_test;
  for (const auto& id : plan.sources(fold)) {
    auto [tr, te] = data::split_train_test(dataset.park(id), train_days);
    src_train.push_back(std::move(tr));
    src_test.push_back(std::move(te));
  }
  f.standardizer = data::Standardizer::fit(src_train);
  std::vector<ParkRecord> fit, val;
  for (std::size_t i = 0; i < src_train.size(); ++i) {
    const models::TaskId id(static_cast<std::uint32_t>(i + 1));
    auto train = f.standardizer.apply(src_train[i]);
    auto test = f.standardizer.apply(src_test[i]);
    train.task_id = test.task_id = id;
    auto [a, b] = data::validation_split(train, validation_fraction, f.day_len);
    fit.push_back(std::move(a));
    val.push_back(std::move(b));
    f.source_train.push_back(std::move(train));
    f.source_test.push_back(std::move(test));
  }
  f.fit = data::make_samples(fit, f.day_len);
  f.validation = data::make_samples(val, f.day_len);
  for (const auto& id : plan.targets(fold)) {
    auto [tr, te] = data::split_train_test(dataset.park(id), train_days);
    auto train = f.standardizer.apply(tr);
    auto test = f.standardizer.apply(te);
    train.task_id = test.task_id = models::TaskId{};
    f.target_train.push_back(std::move(train));
    f.target_test.push_back(std::move(test));
  }
  return f;
}

data::SampleSet record_samples(const ParkRecord& record, models::TaskId id, std::size_t day_len) {
  auto s = data::make_samples(std::span(&record, 1), day_len);
  std::fill(s.ids.begin(), s.ids.end(), id);
  return s;
}

double record_nrmse(models::TaskModel& model, const ParkRecord& record, models::TaskId id,
                    std::size_t day_len) {
  return models::evaluate_nrmse(model, record_samples(record, id, day_len));
}

std::uint64_t cell_seed(std::uint64_t master, std::size_t fold, std::size_t cell) {
  return derive_seed(derive_seed(master, fold), cell);
}

CellRun run_cell(const ExperimentConfig& config, const FoldData& fold, const ModelCell& cell,
                 std::size_t cell_index) {
  CellRun run;
  run.fold = fold.fold;
  run.cell = cell_index;
  run.spec = cell;
  run.seed = cell_seed(config.seed, fold.fold, cell_index);
  run.spec.model.seed = derive_seed(run.seed, 1);
  try {
    run.model = models::make_model(run.spec.model);
    run.report = models::train_model(*run.model, fold.fit, &fold.validation,
                                     config.train_config(run.spec, derive_seed(run.seed, 2)));
    run.val_nrmse = models::evaluate_nrmse(*run.model, fold.validation);
    for (const auto& rec : fold.source_test) {
      run.test.push_back({rec.park_id, cell.label(),
                          record_nrmse(*run.model, rec, rec.task_id, fold.day_len)});
    }
  } catch (const TrainingDiverged& e) {
    run.status = std::string("failed: ") + e.what();
  } catch (const ConfigError& e) {
    run.status = std::string("failed: ") + e.what();
  }
  if (!run.ok()) {
    run.val_nrmse = std::nan("");
    run.model.reset();
  }
  return run;
}

}  // namespace tasktcn::experiment
