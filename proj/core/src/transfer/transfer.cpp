#include "tasktcn/transfer/transfer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "tasktcn/common/errors.hpp"
#include "tasktcn/data/preprocess.hpp"
#include "tasktcn/models/trainer.hpp"

namespace tasktcn::transfer {

using autodiff::Tensor;

autodiff::Tensor<float> zero_shot_forecast(models::TaskModel& model, const Tensor<float>& x,
                                           TaskId selected, std::size_t num_sources) {
  if (selected.value < 1 || selected.value > num_sources) {
    throw UnknownTask("task " + std::to_string(selected.value) + " is not a source task");
  }
  if (x.rank() != 3) throw ContractViolation("zero-shot input must be [N, F, T]");
  const std::vector<TaskId> ids(x.dim(0), selected);
  return model.predict(x, ids);
}

TaskId select_source_by_mse(models::TaskModel& model, const data::SampleSet& subset,
                            std::size_t num_sources) {
  if (subset.size() == 0) throw InsufficientData("source selection on an empty subset");
  if (num_sources == 0 || num_sources > model.embedding().num_tasks()) {
    throw ContractViolation("source count does not match the embedding table");
  }
  TaskId best{1};
  double best_mse = 0.0;
  for (std::size_t m = 1; m <= num_sources; ++m) {
    data::SampleSet probe = subset;
    std::fill(probe.ids.begin(), probe.ids.end(), TaskId(static_cast<std::uint32_t>(m)));
    const double mse = models::evaluate_mse(model, probe);
    if (m == 1 || mse < best_mse) {
      best = TaskId(static_cast<std::uint32_t>(m));
      best_mse = mse;
    }
  }
  return best;
}

data::SampleSet leading_fraction(const data::SampleSet& samples, double fraction) {
  if (samples.size() == 0) throw InsufficientData("no samples");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("fraction must lie in (0, 1]");
  const auto count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(static_cast<double>(samples.size()) * fraction)));
  std::vector<std::size_t> positions(count);
  std::iota(positions.begin(), positions.end(), 0);
  return samples.subset(positions);
}

std::string to_string(Season season) {
  switch (season) {
    case Season::winter:
      return "winter";
    case Season::spring:
      return "spring";
    case Season::summer:
      return "summer";
    case Season::autumn:
      return "autumn";
    case Season::full_year:
      return "full_year";
  }
  return "full_year";
}

Season parse_season(const std::string& s) {
  if (s == "winter") return Season::winter;
  if (s == "spring") return Season::spring;
  if (s == "summer") return Season::summer;
  if (s == "autumn" || s == "fall") return Season::autumn;
  if (s == "full_year" || s == "year") return Season::full_year;
  throw ConfigError("unknown season '" + s + "'");
}

namespace {

bool in_season(std::int64_t day, Season season) {
  const std::chrono::year_month_day ymd{
      std::chrono::sys_days{std::chrono::days{static_cast<int>(day)}}};
  const unsigned month = static_cast<unsigned>(ymd.month());
  switch (season) {
    case Season::winter:
      return month == 12 || month <= 2;
    case Season::spring:
      return month >= 3 && month <= 5;
    case Season::summer:
      return month >= 6 && month <= 8;
    case Season::autumn:
      return month >= 9 && month <= 11;
    case Season::full_year:
      return true;
  }
  return false;
}

}  // namespace

data::ParkRecord season_window(const data::ParkRecord& record, Season season, std::size_t days,
                               std::size_t day_len) {
  if (days == 0) throw ConfigError("finetuning window of zero days");
  if (day_len == 0 || record.length() % day_len != 0) {
    throw ContractViolation("season window needs a record of whole days");
  }
  if (days == 365 || season == Season::full_year) return record;
  const std::size_t total = record.length() / day_len;
  std::size_t first = total;
  for (std::size_t d = 0; d < total; ++d) {
    if (in_season(data::day_of(record.timestamps[d * day_len]), season)) {
      first = d;
      break;
    }
  }
  if (first == total || first + days > total) {
    throw InsufficientData("park " + record.park_id + " does not cover " + std::to_string(days) +
                           " days of " + to_string(season));
  }
  return record.slice(first * day_len, (first + days) * day_len);
}

FinetuneReport finetune_embedding(models::TaskModel& model, TaskId task,
                                  const data::SampleSet& fit, const data::SampleSet& validation,
                                  const FinetuneConfig& config) {
  if (fit.size() == 0) throw InsufficientData("empty finetuning window");
  if (config.epochs_grid.empty() || config.weight_decay_grid.empty()) {
    throw ConfigError("finetuning grid is empty");
  }
  const std::size_t prior_rows = task.row();
  FinetuneReport report;
  report.task = task;
  report.frozen_hash_before = model.frozen_hash(prior_rows);

  auto tables = model.embedding().parameters();
  const auto row_of = [&](std::size_t i) {
    const std::size_t d = tables[i]->value.dim(1);
    auto v = tables[i]->value.values().subspan(task.row() * d, d);
    return std::vector<float>(v.begin(), v.end());
  };
  const auto write_row = [&](std::size_t i, const std::vector<float>& values) {
    const std::size_t d = tables[i]->value.dim(1);
    std::copy(values.begin(), values.end(), tables[i]->value.data() + task.row() * d);
  };
  std::vector<std::vector<float>> initial;
  for (std::size_t i = 0; i < tables.size(); ++i) initial.push_back(row_of(i));

  std::vector<std::size_t> epochs_grid = config.epochs_grid;
  std::sort(epochs_grid.begin(), epochs_grid.end());
  std::vector<double> wd_grid = config.weight_decay_grid;
  std::sort(wd_grid.begin(), wd_grid.end());
  const std::size_t max_epochs = epochs_grid.back();

  std::optional<GridCell> best;
  std::vector<std::vector<float>> best_rows = initial;
  const auto evaluate = [&]() {
    return validation.size() > 0 ? models::evaluate_nrmse(model, validation)
                                 : models::evaluate_nrmse(model, fit);
  };
  for (std::size_t w = 0; w < wd_grid.size(); ++w) {
    for (std::size_t i = 0; i < tables.size(); ++i) write_row(i, initial[i]);
    models::EmbeddingFinetuner tuner(model, task, config.lr, wd_grid[w], config.batch_size,
                                     derive_seed(config.seed, w));
    for (std::size_t e = 0; e <= max_epochs; ++e) {
      if (e > 0) tuner.run_epoch(fit);
      if (std::find(epochs_grid.begin(), epochs_grid.end(), e) == epochs_grid.end()) continue;
      GridCell cell{e, wd_grid[w], evaluate()};
      report.grid.push_back(cell);
      const bool wins = !best || cell.val_nrmse < best->val_nrmse ||
                        (cell.val_nrmse == best->val_nrmse &&
                         (cell.epochs < best->epochs ||
                          (cell.epochs == best->epochs && cell.weight_decay < best->weight_decay)));
      if (wins) {
        best = cell;
        for (std::size_t i = 0; i < tables.size(); ++i) best_rows[i] = row_of(i);
      }
    }
  }
  for (std::size_t i = 0; i < tables.size(); ++i) write_row(i, best_rows[i]);
  report.chosen = *best;
  std::sort(report.grid.begin(), report.grid.end(), [](const GridCell& a, const GridCell& b) {
    return a.epochs != b.epochs ? a.epochs < b.epochs : a.weight_decay < b.weight_decay;
  });
  report.frozen_hash_after = model.frozen_hash(prior_rows);
  return report;
}

FinetuneReport adapt_to_target(models::TaskModel& model, const data::ParkRecord& target_train,
                               std::size_t day_len, const FinetuneConfig& config) {
  if (target_train.split == data::Split::test) {
    throw ContractViolation("finetuning on test data of " + target_train.park_id);
  }
  const std::size_t num_sources = model.embedding().num_tasks();
  const auto window = season_window(target_train, config.season, config.days, day_len);
  const auto [fit_rec, val_rec] = data::validation_split(window, config.validation_fraction(), day_len);
  const TaskId task(static_cast<std::uint32_t>(num_sources + 1));
  auto to_samples = [&](const data::ParkRecord& r) {
    auto s = data::make_samples(std::span(&r, 1), day_len);
    std::fill(s.ids.begin(), s.ids.end(), task);
    return s;
  };
  const auto fit = to_samples(fit_rec);
  const auto val = to_samples(val_rec);

  const std::uint64_t before = model.frozen_hash(num_sources);
  embedding::ExtendInit init = embedding::ExtendInit::standard_normal();
  TaskId source{};
  if (config.init == EmbeddingInit::copy) {
    source = select_source_by_mse(model, leading_fraction(fit, 0.1), num_sources);
    init = embedding::ExtendInit::copy_from(source);
  }
  Rng rng(derive_seed(config.seed, 0xe47e4d));
  model.add_task(init, rng);
  FinetuneReport report = finetune_embedding(model, task, fit, val, config);
  report.copy_source = source;
  report.frozen_hash_before = before;
  return report;
}

}  // namespace tasktcn::transfer
