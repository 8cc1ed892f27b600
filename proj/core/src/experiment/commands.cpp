#include "tasktcn/experiment/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>

#include "json.hpp"
#include "tasktcn/common/errors.hpp"
#include "tasktcn/common/hash.hpp"
#include "tasktcn/common/parallel.hpp"
#include "tasktcn/data/csv.hpp"
#include "tasktcn/data/synthetic.hpp"
#include "tasktcn/experiment/checkpoint.hpp"
#include "tasktcn/transfer/dtw.hpp"
#include "tasktcn/transfer/transfer.hpp"

#ifndef TASKTCN_VERSION
#define TASKTCN_VERSION "unknown"
#endif

namespace tasktcn::experiment {

namespace fs = std::filesystem;
using evaluation::MetricRow;
using evaluation::ResultRow;
using nlohmann::json;

std::string code_version() { return TASKTCN_VERSION; }

namespace {

using Clock = std::chrono::steady_clock;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string() + " (run train-mtl first?)");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + " is not valid JSON: " + e.what());
  }
}

// JSON has no NaN; failed values become null.
json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_manifest(const fs::path& dir, const ExperimentConfig& config, const std::string& command,
                    double seconds, const std::vector<std::string>& files) {
  json j;
  j["command"] = command;
  j["code_version"] = code_version();
  j["config_hash"] = to_hex(config_hash(config));
  j["seed"] = config.seed;
  j["fold_seed"] = config.fold_seed;
  j["wall_clock_seconds"] = seconds;
  j["files"] = files;
  write_text(dir / "manifest.json", j.dump(2) + "\n");
  write_text(dir / "config.json", config.to_json() + "\n");
}

struct LabelParts {
  std::string model, embedding_type, embedding_position;
};

LabelParts label_parts(const ModelCell& cell) {
  return {models::to_string(cell.model.kind), models::to_string(cell.model.embedding_kind),
          cell.model.kind == models::ModelKind::tcn
              ? models::to_string(cell.model.embedding_position)
              : "-"};
}

void fill_parts(std::vector<ResultRow>& rows, const std::map<std::string, LabelParts>& parts) {
  for (auto& r : rows) {
    const auto it = parts.find(r.model);
    if (it == parts.end()) continue;
    r.embedding_type = it->second.embedding_type;
    r.embedding_position = it->second.embedding_position;
    r.model = it->second.model;
  }
}

std::string metrics_file(const std::string& label) { return "metrics/" + label + ".tsv"; }

std::vector<FoldData> prepare_folds(const ExperimentConfig& config, const Dataset& dataset,
                                    const data::FoldPlan& plan) {
  std::vector<FoldData> folds;
  for (std::size_t k = 0; k < plan.num_folds(); ++k) {
    folds.push_back(prepare_fold(dataset, plan, k, config.dataset.train_days,
                                 config.training.validation_fraction));
  }
  return folds;
}

bool better_run(const CellRun& a, const CellRun& b) {
  if (!a.ok()) return false;
  if (!b.ok()) return true;
  if (a.val_nrmse != b.val_nrmse) return a.val_nrmse < b.val_nrmse;
  return a.spec.key() < b.spec.key();
}

struct Sweep {
  SweepResult result;
  std::vector<FoldData> folds;
  std::map<std::string, std::vector<CellRun>> best;  // label -> per fold
  std::map<std::string, LabelParts> parts;
};

Sweep run_sweep(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  Sweep s;
  auto& r = s.result;
  r.dataset = load_dataset(config);
  const auto ids = r.dataset.park_ids();
  r.plan = data::make_folds(ids, config.num_folds, config.fold_seed);
  s.folds = prepare_folds(config, r.dataset, r.plan);

  std::vector<std::vector<ModelCell>> cells;
  for (const auto& f : s.folds) {
    cells.push_back(config.cells(f.fit.num_features(), f.source_train.size(), f.day_len));
  }
  r.cells = cells.front();
  if (r.cells.empty()) throw ConfigError("model grid is empty");
  for (const auto& c : r.cells) s.parts[c.label()] = label_parts(c);

  const std::size_t nc = r.cells.size(), nf = s.folds.size();
  log << "sweep: " << nc << " cells x " << nf << " folds on " << r.dataset.records.size()
      << " parks (" << r.dataset.name << ")\n";
  std::vector<CellRun> runs(nc * nf);
  for (const auto& c : r.cells) s.best[c.label()].resize(nf);
  std::mutex mu;
  parallel_for(runs.size(), config.threads, [&](std::size_t i) {
    const std::size_t fold = i / nc, cell = i % nc;
    CellRun run = run_cell(config, s.folds[fold], cells[fold][cell], cell);
    std::lock_guard lock(mu);
    log << "  fold " << fold << " cell " << cell << " " << run.spec.label() << " val "
        << evaluation::format_number(run.val_nrmse) << (run.ok() ? "" : " " + run.status) << "\n";
    auto& slot = s.best[run.spec.label()][fold];
    CellRun meta;
    meta.fold = run.fold;
    meta.cell = run.cell;
    meta.spec = run.spec;
    meta.seed = run.seed;
    meta.status = run.status;
    meta.val_nrmse = run.val_nrmse;
    meta.report = run.report;
    meta.test = run.test;
    if (run.ok() && (!slot.model || better_run(run, slot))) slot = std::move(run);
    runs[i] = std::move(meta);
  });

  for (std::size_t c = 0; c < nc; ++c) {
    LeaderboardEntry e;
    e.cell = c;
    e.key = r.cells[c].key();
    e.label = r.cells[c].label();
    double sum = 0.0;
    for (std::size_t k = 0; k < nf; ++k) {
      const auto& run = runs[k * nc + c];
      if (!run.ok() && e.status == "ok") e.status = run.status;
      sum += run.val_nrmse;
    }
    e.val_nrmse = e.status == "ok" ? sum / static_cast<double>(nf) : std::nan("");
    r.leaderboard.push_back(e);
  }
  r.leaderboard = rank_leaderboard(std::move(r.leaderboard));

  std::map<std::string, std::string> failures;
  for (auto& [label, per_fold] : s.best) {
    auto& sel = r.selected[label];
    std::map<std::string, std::pair<double, std::size_t>> acc;
    for (std::size_t k = 0; k < nf; ++k) {
      if (!per_fold[k].model) {
        sel.push_back(std::numeric_limits<std::size_t>::max());
        failures[label] = "failed: no successful cell in fold " + std::to_string(k);
        continue;
      }
      sel.push_back(per_fold[k].cell);
      for (const auto& m : per_fold[k].test) {
        acc[m.park_id].first += m.nrmse;
        acc[m.park_id].second += 1;
      }
    }
    if (failures.count(label)) continue;
    auto& rows = r.park_nrmse[label];
    for (const auto& [park, a] : acc) rows.push_back({park, label, a.first / a.second});
  }
  std::vector<std::string> labels;
  for (const auto& [label, _] : s.best) labels.push_back(label);
  r.baseline = resolve_baseline(config.baseline, labels);
  r.results = summarize(r.park_nrmse, r.baseline, r.dataset.name, failures);
  fill_parts(r.results, s.parts);
  return s;
}

void write_leaderboard(const fs::path& path, const SweepResult& r) {
  std::ostringstream os;
  os << "rank\tcell\tlabel\tval_nRMSE\tstatus\tkey\n";
  for (std::size_t i = 0; i < r.leaderboard.size(); ++i) {
    const auto& e = r.leaderboard[i];
    os << i + 1 << '\t' << e.cell << '\t' << e.label << '\t'
       << evaluation::format_number(e.val_nrmse) << '\t' << e.status << '\t' << e.key << '\n';
  }
  write_text(path, os.str());
}

std::string season_tag(const transfer::Season s) { return transfer::to_string(s); }

std::string init_tag(transfer::EmbeddingInit i) {
  return i == transfer::EmbeddingInit::copy ? "copy" : "default";
}

struct MtlArtifacts {
  data::FoldPlan plan;
  /// label -> per-fold selected cell (npos when missing).
  std::map<std::string, std::vector<std::optional<std::size_t>>> selection;
  std::map<std::string, LabelParts> parts;
};

MtlArtifacts read_mtl(const ExperimentConfig& config) {
  const fs::path dir = config.output_dir / "mtl";
  MtlArtifacts a;
  a.plan = data::FoldPlan::from_json(read_text(dir / "folds.json"));
  const json sel = parse_json(dir / "selection.json");
  try {
    for (const auto& [label, entry] : sel.items()) {
      auto& v = a.selection[label];
      for (const auto& f : entry.at("folds")) {
        v.push_back(f.is_null() ? std::nullopt : std::optional(f.at("cell").get<std::size_t>()));
      }
      a.parts[label] = {entry.at("model").get<std::string>(),
                        entry.at("embedding_type").get<std::string>(),
                        entry.at("embedding_position").get<std::string>()};
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed selection.json: ") + e.what());
  }
  return a;
}

fs::path checkpoint_path(const ExperimentConfig& config, std::size_t fold, const std::string& label) {
  return config.output_dir / "mtl" / "checkpoints" / ("fold" + std::to_string(fold)) /
         (label + ".json");
}

Checkpoint load_fold_checkpoint(const ExperimentConfig& config, const FoldData& fold,
                                const std::string& label) {
  Checkpoint c = load_checkpoint(checkpoint_path(config, fold.fold, label));
  if (c.tasks != fold.source_parks()) {
    throw ConfigError("checkpoint " + checkpoint_path(config, fold.fold, label).string() +
                      " does not match the fold plan");
  }
  return c;
}

}  // namespace

std::vector<data::ParkRecord> cmd_synth(const ExperimentConfig& config, const fs::path& out,
                                        std::ostream& log) {
  const auto t0 = Clock::now();
  const auto spec = config.synthetic.dataset_spec();
  auto records = data::gen_synthetic(config.synthetic);
  json parks = json::array();
  std::vector<std::string> files;
  for (const auto& r : records) {
    const std::string name = r.park_id + ".csv";
    data::write_park_csv(out / name, r, spec);
    parks.push_back({{"park_id", r.park_id}, {"task_id", r.task_id.value}, {"cluster", r.cluster}});
    files.push_back(name);
  }
  json j;
  j["generator"] = "tasktcn-synthetic";
  j["code_version"] = code_version();
  j["seed"] = config.synthetic.seed;
  j["spec"] = json::parse(config.to_json())["synthetic"];
  j["parks"] = std::move(parks);
  j["files"] = files;
  write_text(out / "manifest.json", j.dump(2) + "\n");
  log << "synth: " << records.size() << " parks, " << config.synthetic.days << " days each -> "
      << out.string() << " ("
      << std::chrono::duration<double>(Clock::now() - t0).count() << " s)\n";
  return records;
}

std::vector<LeaderboardEntry> rank_leaderboard(std::vector<LeaderboardEntry> entries) {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const LeaderboardEntry& a, const LeaderboardEntry& b) {
                     const bool fa = !std::isfinite(a.val_nrmse), fb = !std::isfinite(b.val_nrmse);
                     if (fa != fb) return fb;
                     if (!fa && a.val_nrmse != b.val_nrmse) return a.val_nrmse < b.val_nrmse;
                     return a.key < b.key;
                   });
  return entries;
}

std::string resolve_baseline(const std::string& configured, std::span<const std::string> labels) {
  if (labels.empty()) throw ConfigError("no model labels to pick a baseline from");
  const auto has = [&](const std::string& l) {
    return std::find(labels.begin(), labels.end(), l) != labels.end();
  };
  if (!configured.empty()) {
    if (!has(configured)) throw ConfigError("baseline '" + configured + "' is not in the grid");
    return configured;
  }
  if (has("mlp-bayes")) return "mlp-bayes";
  for (const auto& l : labels) {
    if (l.rfind("mlp", 0) == 0) return l;
  }
  return labels.front();
}

std::vector<ResultRow> summarize(const std::map<std::string, std::vector<MetricRow>>& metrics,
                                 const std::string& baseline, const std::string& dataset,
                                 const std::map<std::string, std::string>& failures) {
  std::vector<std::string> labels;
  for (const auto& [l, _] : metrics) labels.push_back(l);
  for (const auto& [l, _] : failures) {
    if (!metrics.count(l)) labels.push_back(l);
  }
  std::sort(labels.begin(), labels.end());
  const auto base_it = metrics.find(baseline);
  std::vector<ResultRow> rows;
  for (const auto& label : labels) {
    ResultRow row;
    row.model = label;
    row.dataset = dataset;
    const auto fail = failures.find(label);
    const auto it = metrics.find(label);
    if (fail != failures.end() || it == metrics.end()) {
      row.skill = row.ratio_skill = row.nrmse = std::nan("");
      row.status = fail != failures.end() ? fail->second : "failed";
      rows.push_back(row);
      continue;
    }
    double sum = 0.0;
    for (const auto& m : it->second) sum += m.nrmse;
    row.nrmse = it->second.empty() ? std::nan("") : sum / static_cast<double>(it->second.size());
    if (base_it == metrics.end()) {
      row.skill = row.ratio_skill = std::nan("");
      row.status = "no baseline";
      rows.push_back(row);
      continue;
    }
    try {
      const auto table = evaluation::skill(it->second, base_it->second);
      row.skill = table.mean_skill;
      row.ratio_skill = table.ratio_of_means;
      std::map<std::string, double> base_by_park;
      for (const auto& m : base_it->second) base_by_park[m.park_id] = m.nrmse;
      std::vector<double> a, b;
      for (const auto& m : it->second) {
        a.push_back(m.nrmse);
        b.push_back(base_by_park.at(m.park_id));
      }
      try {
        row.significant = evaluation::wilcoxon_signed_rank(a, b).significant;
      } catch (const InsufficientData&) {
        row.significant.reset();
      }
    } catch (const UndefinedSkill& e) {
      row.skill = row.ratio_skill = std::nan("");
      row.status = std::string("undefined skill: ") + e.what();
    }
    rows.push_back(row);
  }
  return rows;
}

SweepResult cmd_train_mtl(const ExperimentConfig& config, std::ostream& log) {
  const auto t0 = Clock::now();
  Sweep s = run_sweep(config, log);
  auto& r = s.result;
  const fs::path dir = config.output_dir / "mtl";
  std::vector<std::string> files{"folds.json", "leaderboard.tsv", "selection.json", "results.tsv"};
  write_text(dir / "folds.json", r.plan.to_json() + "\n");
  write_leaderboard(dir / "leaderboard.tsv", r);

  json sel;
  for (auto& [label, per_fold] : s.best) {
    json folds = json::array();
    for (std::size_t k = 0; k < per_fold.size(); ++k) {
      auto& run = per_fold[k];
      if (!run.model) {
        folds.push_back(nullptr);
        continue;
      }
      folds.push_back({{"cell", run.cell},
                       {"key", run.spec.key()},
                       {"val_nrmse", number_or_null(run.val_nrmse)},
                       {"best_epoch", run.report.best_epoch},
                       {"seed", run.seed}});
      Checkpoint c;
      c.model = std::move(run.model);
      c.tasks = s.folds[k].source_parks();
      c.standardizer = s.folds[k].standardizer;
      c.fold = k;
      c.cell = run.spec.key();
      c.seed = run.seed;
      c.val_nrmse = run.val_nrmse;
      const auto path = checkpoint_path(config, k, label);
      save_checkpoint(path, c);
      files.push_back(fs::relative(path, dir).string());
      run.model = std::move(c.model);
    }
    const auto& p = s.parts.at(label);
    sel[label] = {{"model", p.model},
                  {"embedding_type", p.embedding_type},
                  {"embedding_position", p.embedding_position},
                  {"folds", std::move(folds)}};
  }
  write_text(dir / "selection.json", sel.dump(2) + "\n");
  for (const auto& [label, rows] : r.park_nrmse) {
    evaluation::write_metric_rows(dir / metrics_file(label), rows);
    files.push_back(metrics_file(label));
  }
  evaluation::write_results_table(dir / "results.tsv", r.results);
  log << evaluation::format_results_table(r.results);
  write_manifest(dir, config, "train-mtl",
                 std::chrono::duration<double>(Clock::now() - t0).count(), files);
  return std::move(s.result);
}

SweepResult cmd_gridsearch(const ExperimentConfig& config, std::ostream& log) {
  const auto t0 = Clock::now();
  Sweep s = run_sweep(config, log);
  auto& r = s.result;
  const fs::path dir = config.output_dir / "gridsearch";
  write_leaderboard(dir / "leaderboard.tsv", r);
  json best;
  for (const auto& e : r.leaderboard) {
    const auto kind = models::to_string(r.cells[e.cell].model.kind);
    if (best.contains(kind) || e.status != "ok") continue;
    best[kind] = {{"cell", e.cell},
                  {"label", e.label},
                  {"key", e.key},
                  {"dataset", r.dataset.name},
                  {"val_nrmse", number_or_null(e.val_nrmse)}};
  }
  write_text(dir / "best.json", best.dump(2) + "\n");
  log << "gridsearch: best " << best.dump() << "\n";
  write_manifest(dir, config, "gridsearch",
                 std::chrono::duration<double>(Clock::now() - t0).count(),
                 {"leaderboard.tsv", "best.json"});
  return std::move(s.result);
}

ZeroShotResult cmd_zero_shot(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  const auto t0 = Clock::now();
  const auto mtl = read_mtl(config);
  const Dataset dataset = load_dataset(config);
  const auto folds = prepare_folds(config, dataset, mtl.plan);
  const std::string feature = dataset.spec.similarity_feature;

  // Selection depends on data only; shared by every model.
  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (const auto& f : folds) {
    for (std::size_t t = 0; t < f.target_train.size(); ++t) jobs.emplace_back(f.fold, t);
  }
  std::vector<transfer::SourceChoice> choice(jobs.size());
  parallel_for(jobs.size(), config.threads, [&](std::size_t i) {
    const auto& f = folds[jobs[i].first];
    choice[i] = transfer::select_source_dtw(f.source_train, f.target_train[jobs[i].second], feature);
  });

  ZeroShotResult result;
  std::map<std::string, std::vector<MetricRow>> metrics;
  std::map<std::string, std::string> failures;
  for (const auto& [label, per_fold] : mtl.selection) {
    for (const auto& f : folds) {
      if (!per_fold.at(f.fold)) {
        failures[label] = "failed: no source model in fold " + std::to_string(f.fold);
        break;
      }
      Checkpoint c = load_fold_checkpoint(config, f, label);
      const auto before = c.model->parameter_hash();
      for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (jobs[i].first != f.fold) continue;
        const auto& test = f.target_test[jobs[i].second];
        const auto samples = record_samples(test, models::TaskId{}, f.day_len);
        const auto pred = transfer::zero_shot_forecast(*c.model, samples.x, choice[i].task,
                                                       f.source_train.size());
        const double n = evaluation::nrmse(pred.values(), samples.y.values());
        result.selections.push_back({label, f.fold, test.park_id, choice[i].park_id,
                                     choice[i].task, choice[i].mean_cost, n});
        metrics[label].push_back({test.park_id, label, n});
      }
      if (c.model->parameter_hash() != before) {
        throw NumericalFault("zero-shot forecasting modified checkpoint of fold " +
                             std::to_string(f.fold));
      }
    }
  }
  for (auto& [_, rows] : metrics) {
    std::sort(rows.begin(), rows.end(),
              [](const MetricRow& a, const MetricRow& b) { return a.park_id < b.park_id; });
  }
  for (const auto& [label, _] : failures) metrics.erase(label);
  std::vector<std::string> labels;
  for (const auto& [label, _] : mtl.selection) labels.push_back(label);
  result.results = summarize(metrics, resolve_baseline(config.baseline, labels), dataset.name, failures);
  fill_parts(result.results, mtl.parts);

  const fs::path dir = config.output_dir / "zero_shot";
  std::ostringstream os;
  os << "model\tfold\ttarget\tsource\tsource_task\tdtw_mean_cost\tnRMSE\n";
  for (const auto& s : result.selections) {
    os << s.label << '\t' << s.fold << '\t' << s.target << '\t' << s.source << '\t'
       << s.source_task.value << '\t' << evaluation::format_number(s.dtw_cost) << '\t'
       << evaluation::format_number(s.nrmse) << '\n';
  }
  write_text(dir / "selections.tsv", os.str());
  std::vector<std::string> files{"selections.tsv", "results.tsv"};
  for (const auto& [label, rows] : metrics) {
    evaluation::write_metric_rows(dir / metrics_file(label), rows);
    files.push_back(metrics_file(label));
  }
  evaluation::write_results_table(dir / "results.tsv", result.results);
  log << evaluation::format_results_table(result.results);
  write_manifest(dir, config, "zero-shot", std::chrono::duration<double>(Clock::now() - t0).count(),
                 files);
  return result;
}

FinetuneResult cmd_finetune(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  const auto t0 = Clock::now();
  const auto mtl = read_mtl(config);
  const Dataset dataset = load_dataset(config);
  const auto folds = prepare_folds(config, dataset, mtl.plan);

  std::map<std::pair<std::string, std::size_t>, Checkpoint> sources;
  std::map<std::string, std::string> missing;
  for (const auto& [label, per_fold] : mtl.selection) {
    for (const auto& f : folds) {
      if (!per_fold.at(f.fold)) {
        missing[label] = "failed: no source model in fold " + std::to_string(f.fold);
        continue;
      }
      sources.emplace(std::pair(label, f.fold), load_fold_checkpoint(config, f, label));
    }
  }

  FinetuneResult result;
  for (const auto& [key, _] : sources) {
    const auto& f = folds[key.second];
    for (const auto& target : f.target_train) {
      for (auto season : config.finetune.seasons) {
        for (auto days : config.finetune.days) {
          for (auto init : config.finetune.inits) {
            FinetuneRun run;
            run.label = key.first;
            run.fold = key.second;
            run.target = target.park_id;
            run.season = season;
            run.days = days;
            run.init = init;
            result.runs.push_back(run);
          }
        }
      }
    }
  }
  log << "finetune: " << result.runs.size() << " runs\n";
  std::mutex mu;
  parallel_for(result.runs.size(), config.threads, [&](std::size_t i) {
    auto& run = result.runs[i];
    const auto& f = folds[run.fold];
    std::size_t t = 0;
    while (f.target_train[t].park_id != run.target) ++t;
    auto model = sources.at({run.label, run.fold}).model->clone();
    transfer::FinetuneConfig fc;
    fc.season = run.season;
    fc.days = run.days;
    fc.epochs_grid = config.finetune.epochs_grid;
    fc.weight_decay_grid = config.finetune.weight_decay_grid;
    fc.init = run.init;
    fc.lr = config.finetune.lr;
    fc.batch_size = config.finetune.batch_size;
    fc.seed = derive_seed(derive_seed(config.seed, 0xf17e), i);
    try {
      run.report = transfer::adapt_to_target(*model, f.target_train[t], f.day_len, fc);
      run.nrmse = record_nrmse(*model, f.target_test[t], run.report.task, f.day_len);
      if (!run.report.frozen_unchanged()) run.status = "failed: frozen parameters changed";
    } catch (const InsufficientData& e) {
      run.status = std::string("skipped: ") + e.what();
      run.nrmse = std::nan("");
    } catch (const TrainingDiverged& e) {
      run.status = std::string("failed: ") + e.what();
      run.nrmse = std::nan("");
    }
    std::lock_guard lock(mu);
    log << "  " << run.label << " fold " << run.fold << " " << run.target << " "
        << season_tag(run.season) << " " << run.days << "d " << init_tag(run.init) << " nRMSE "
        << evaluation::format_number(run.nrmse) << " frozen "
        << (run.report.frozen_unchanged() ? "unchanged" : "CHANGED") << "\n";
  });

  const fs::path dir = config.output_dir / "finetune";
  std::ostringstream os;
  os << "model\tfold\ttarget\tseason\tdays\tinit\tcopy_source\tepochs\tweight_decay\tval_nRMSE"
        "\tnRMSE\tfrozen_hash_before\tfrozen_hash_after\tstatus\n";
  for (const auto& r : result.runs) {
    os << r.label << '\t' << r.fold << '\t' << r.target << '\t' << season_tag(r.season) << '\t'
       << r.days << '\t' << init_tag(r.init) << '\t' << r.report.copy_source.value << '\t'
       << r.report.chosen.epochs << '\t' << evaluation::format_number(r.report.chosen.weight_decay)
       << '\t' << evaluation::format_number(r.report.chosen.val_nrmse) << '\t'
       << evaluation::format_number(r.nrmse) << '\t' << to_hex(r.report.frozen_hash_before)
       << '\t' << to_hex(r.report.frozen_hash_after) << '\t' << r.status << '\n';
  }
  write_text(dir / "runs.tsv", os.str());

  std::vector<std::string> labels;
  for (const auto& [label, _] : mtl.selection) labels.push_back(label);
  const std::string baseline = resolve_baseline(config.baseline, labels);
  for (auto season : config.finetune.seasons) {
    for (auto days : config.finetune.days) {
      for (auto init : config.finetune.inits) {
        std::map<std::string, std::vector<MetricRow>> metrics;
        std::map<std::string, std::string> failures = missing;
        for (const auto& r : result.runs) {
          if (r.season != season || r.days != days || r.init != init) continue;
          if (r.status != "ok") {
            failures.emplace(r.label, r.status);
            continue;
          }
          metrics[r.label].push_back({r.target, r.label, r.nrmse});
        }
        for (const auto& [label, _] : failures) metrics.erase(label);
        for (auto& [_, rows] : metrics) {
          std::sort(rows.begin(), rows.end(),
                    [](const MetricRow& a, const MetricRow& b) { return a.park_id < b.park_id; });
        }
        const std::string tag = dataset.name + ":" + season_tag(season) + ":" +
                                std::to_string(days) + "d:" + init_tag(init);
        auto rows = summarize(metrics, baseline, tag, failures);
        fill_parts(rows, mtl.parts);
        result.results.insert(result.results.end(), rows.begin(), rows.end());
      }
    }
  }
  evaluation::write_results_table(dir / "results.tsv", result.results);
  log << evaluation::format_results_table(result.results);
  write_manifest(dir, config, "finetune", std::chrono::duration<double>(Clock::now() - t0).count(),
                 {"runs.tsv", "results.tsv"});
  return result;
}

evaluation::EmbeddingAnalysis cmd_analyze_embedding(const fs::path& checkpoint, const fs::path& out,
                                                    const fs::path& manifest, std::ostream& log) {
  Checkpoint c = load_checkpoint(checkpoint);
  auto analysis = evaluation::analyze_embedding(*c.model);
  evaluation::write_matrix(out / "embedding_distances.txt", analysis.embedding_distances);
  std::vector<std::string> files{"embedding_distances.txt"};
  if (!analysis.transformed_distances.empty()) {
    evaluation::write_matrix(out / "transformed_distances.txt", analysis.transformed_distances);
    files.push_back("transformed_distances.txt");
    for (std::size_t ch = 0; ch < analysis.channel_distances.size(); ++ch) {
      const std::string name = "channels/channel_" + std::to_string(ch) + ".txt";
      evaluation::write_matrix(out / name, analysis.channel_distances[ch]);
      files.push_back(name);
    }
  }
  json report;
  report["checkpoint"] = checkpoint.string();
  report["model"] = json::parse(model_config_to_json(c.model->config()));
  report["tasks"] = c.tasks;
  report["correlation"] = number_or_null(analysis.correlation);
  report["files"] = files;
  if (!manifest.empty()) {
    const json m = parse_json(manifest);
    std::map<std::string, int> cluster;
    for (const auto& p : m.at("parks")) cluster[p.at("park_id").get<std::string>()] = p.at("cluster").get<int>();
    std::vector<int> labels;
    for (const auto& t : c.tasks) {
      if (!cluster.count(t)) throw ValidationError("park " + t + " is not in " + manifest.string());
      labels.push_back(cluster.at(t));
    }
    const auto sep = evaluation::cluster_separation(analysis.embedding_distances, labels);
    report["embedding_separation"] = {{"within", number_or_null(sep.within)},
                                      {"between", number_or_null(sep.between)}};
    if (!analysis.transformed_distances.empty()) {
      const auto t = evaluation::cluster_separation(analysis.transformed_distances, labels);
      report["transformed_separation"] = {{"within", number_or_null(t.within)},
                                          {"between", number_or_null(t.between)}};
    }
  }
  write_text(out / "report.json", report.dump(2) + "\n");
  log << "analyze-embedding: " << c.tasks.size() << " tasks, correlation "
      << evaluation::format_number(analysis.correlation) << " -> " << out.string() << "\n";
  return analysis;
}

bool cmd_gradcheck(std::uint64_t seed, std::ostream& log) {
  const auto t0 = Clock::now();
  const auto report = autodiff::run_gradcheck_suite(seed);
  log << std::left << std::setw(44) << "op" << std::setw(16) << "max_rel_error" << "result\n";
  for (const auto& e : report.entries) {
    log << std::left << std::setw(44) << e.op << std::setw(16) << std::scientific
        << std::setprecision(3) << e.max_rel_error << std::defaultfloat
        << (e.passed ? "PASS" : "FAIL") << "\n";
  }
  log << "tolerance " << report.tolerance << ", "
      << std::chrono::duration<double>(Clock::now() - t0).count() << " s: "
      << (report.all_passed() ? "all passed" : "FAILED") << "\n";
  return report.all_passed();
}

std::vector<MetricRow> evaluate_checkpoint(const ExperimentConfig& config, const fs::path& checkpoint) {
  Checkpoint c = load_checkpoint(checkpoint);
  const Dataset dataset = load_dataset(config);
  std::vector<MetricRow> rows;
  const std::string label = models::to_string(c.model->config().kind) + "-" +
                            models::to_string(c.model->config().embedding_kind);
  for (std::size_t i = 0; i < c.tasks.size(); ++i) {
    auto [train, test] = data::split_train_test(dataset.park(c.tasks[i]), config.dataset.train_days);
    const auto std_test = c.standardizer.apply(test);
    rows.push_back({c.tasks[i], label,
                    record_nrmse(*c.model, std_test, models::TaskId(static_cast<std::uint32_t>(i + 1)),
                                 dataset.spec.day_len)});
  }
  return rows;
}

}  // namespace tasktcn::experiment
