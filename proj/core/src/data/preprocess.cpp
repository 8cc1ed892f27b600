#include "tasktcn/data/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>

#include "json.hpp"
#include "tasktcn/common/errors.hpp"

namespace tasktcn::data {

ParkRecord interpolate_linear(const ParkRecord& record, std::int64_t source_resolution,
                              std::int64_t target_resolution) {
  if (target_resolution <= 0 || source_resolution % target_resolution != 0) {
    throw ConfigError("source resolution must be a positive multiple of the target");
  }
  ParkRecord out = record.slice(0, 0);
  const std::size_t f = record.num_features();
  auto push = [&](std::int64_t ts, std::size_t a, std::size_t b, double w) {
    out.timestamps.push_back(ts);
    for (std::size_t c = 0; c < f; ++c) {
      const double va = record.feature(a, c), vb = record.feature(b, c);
      out.features.push_back(static_cast<float>(va + w * (vb - va)));
    }
    const double pa = record.power[a], pb = record.power[b];
    out.power.push_back(static_cast<float>(pa + w * (pb - pa)));
  };
  for (std::size_t i = 0; i < record.length(); ++i) {
    push(record.timestamps[i], i, i, 0.0);
    if (i + 1 == record.length()) break;
    const std::int64_t gap = record.timestamps[i + 1] - record.timestamps[i];
    if (gap > source_resolution || gap % target_resolution != 0) continue;
    for (std::int64_t step = target_resolution; step < gap; step += target_resolution) {
      push(record.timestamps[i] + step, i, i + 1,
           static_cast<double>(step) / static_cast<double>(gap));
    }
  }
  return out;
}

namespace {

/// [begin, end) row ranges of each UTC day, in order.
std::vector<std::pair<std::size_t, std::size_t>> day_ranges(const ParkRecord& record) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t begin = 0;
  for (std::size_t t = 1; t <= record.length(); ++t) {
    if (t == record.length() || day_of(record.timestamps[t]) != day_of(record.timestamps[begin])) {
      out.emplace_back(begin, t);
      begin = t;
    }
  }
  return out;
}

void append_rows(ParkRecord& dst, const ParkRecord& src, std::size_t begin, std::size_t end) {
  const std::size_t f = src.num_features();
  dst.timestamps.insert(dst.timestamps.end(), src.timestamps.begin() + begin,
                        src.timestamps.begin() + end);
  dst.power.insert(dst.power.end(), src.power.begin() + begin, src.power.begin() + end);
  dst.features.insert(dst.features.end(), src.features.begin() + begin * f,
                      src.features.begin() + end * f);
}

}  // namespace

ParkRecord filter_complete_days(const ParkRecord& record, std::size_t day_len) {
  ParkRecord out = record.slice(0, 0);
  if (record.length() == 0) return out;
  for (auto [begin, end] : day_ranges(record)) {
    if (end - begin == day_len) append_rows(out, record, begin, end);
  }
  return out;
}

std::size_t count_complete_days(const ParkRecord& record, std::size_t day_len) {
  if (record.length() == 0) return 0;
  std::size_t count = 0;
  for (auto [begin, end] : day_ranges(record)) count += (end - begin == day_len) ? 1 : 0;
  return count;
}

std::pair<ParkRecord, ParkRecord> split_train_test(const ParkRecord& record,
                                                   std::size_t train_days) {
  if (record.length() == 0) throw InsufficientData("park " + record.park_id + " has no rows");
  const std::int64_t boundary =
      (day_of(record.timestamps.front()) + static_cast<std::int64_t>(train_days)) * kSecondsPerDay;
  const auto it = std::lower_bound(record.timestamps.begin(), record.timestamps.end(), boundary);
  const auto cut = static_cast<std::size_t>(it - record.timestamps.begin());
  if (cut == 0 || cut == record.length()) {
    throw InsufficientData("park " + record.park_id + " does not span more than " +
                           std::to_string(train_days) + " days");
  }
  auto train = record.slice(0, cut);
  auto test = record.slice(cut, record.length());
  train.split = Split::train;
  test.split = Split::test;
  return {std::move(train), std::move(test)};
}

std::pair<ParkRecord, ParkRecord> validation_split(const ParkRecord& train, double fraction,
                                                   std::size_t day_len) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ConfigError("validation fraction must lie in (0, 1)");
  }
  if (train.split == Split::test) throw ContractViolation("validation split of test data");
  if (day_len == 0 || train.length() % day_len != 0) {
    throw ContractViolation("validation split needs whole days");
  }
  const std::size_t days = train.length() / day_len;
  const auto val_days = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(static_cast<double>(days) * fraction)));
  if (val_days >= days) {
    throw InsufficientData("park " + train.park_id + ": " + std::to_string(days) +
                           " days leave nothing to fit after validation");
  }
  const std::size_t cut = (days - val_days) * day_len;
  return {train.slice(0, cut), train.slice(cut, train.length())};
}

Standardizer Standardizer::fit(std::span<const ParkRecord> train) {
  if (train.empty()) throw InsufficientData("standardizer needs at least one record");
  const auto& names = train.front().feature_names;
  const std::size_t f = names.size();
  std::vector<double> sum(f, 0.0), sq(f, 0.0);
  std::size_t rows = 0;
  for (const auto& r : train) {
    if (r.split == Split::test) {
      throw ContractViolation("standardizer fit on test-tagged park " + r.park_id);
    }
    if (r.feature_names != names) throw ValidationError("parks disagree on feature columns");
    for (std::size_t t = 0; t < r.length(); ++t) {
      for (std::size_t c = 0; c < f; ++c) sum[c] += r.feature(t, c);
    }
    rows += r.length();
  }
  if (rows == 0) throw InsufficientData("standardizer fit on zero rows");
  std::vector<double> mean(f);
  for (std::size_t c = 0; c < f; ++c) mean[c] = sum[c] / static_cast<double>(rows);
  for (const auto& r : train) {
    for (std::size_t t = 0; t < r.length(); ++t) {
      for (std::size_t c = 0; c < f; ++c) {
        const double d = r.feature(t, c) - mean[c];
        sq[c] += d * d;
      }
    }
  }
  Standardizer s;
  for (std::size_t c = 0; c < f; ++c) {
    const double sd = std::sqrt(sq[c] / static_cast<double>(rows));
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean[c])))) {
      s.dropped_.push_back(names[c]);
      std::cerr << "warning: dropping constant feature '" << names[c] << "'\n";
      continue;
    }
    s.names_.push_back(names[c]);
    s.mean_.push_back(mean[c]);
    s.std_.push_back(sd);
  }
  if (s.names_.empty()) throw ValidationError("every feature is constant on the training data");
  return s;
}

Standardizer Standardizer::from_stats(std::vector<std::string> names, std::vector<double> mean,
                                      std::vector<double> stddev) {
  if (names.size() != mean.size() || names.size() != stddev.size()) {
    throw ContractViolation("standardizer statistics disagree in length");
  }
  Standardizer s;
  s.names_ = std::move(names);
  s.mean_ = std::move(mean);
  s.std_ = std::move(stddev);
  return s;
}

ParkRecord Standardizer::apply(const ParkRecord& record) const {
  if (!fitted()) throw ContractViolation("standardizer used before fit");
  std::vector<std::size_t> cols;
  for (const auto& name : names_) cols.push_back(record.feature_index(name));
  ParkRecord out = record.slice(0, 0);
  out.feature_names = names_;
  out.timestamps = record.timestamps;
  out.power = record.power;
  out.features.resize(record.length() * cols.size());
  for (std::size_t t = 0; t < record.length(); ++t) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      out.features[t * cols.size() + c] =
          static_cast<float>((record.feature(t, cols[c]) - mean_[c]) / std_[c]);
    }
  }
  return out;
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  if (n == 0) throw ContractViolation("uniform_index over an empty range");
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

FoldPlan make_folds(std::span<const std::string> parks, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("fold count must be positive");
  if (parks.size() < n) {
    throw InsufficientData(std::to_string(parks.size()) + " parks cannot fill " +
                           std::to_string(n) + " folds");
  }
  std::vector<std::string> order(parks.begin(), parks.end());
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[uniform_index(rng, i)]);
  }
  FoldPlan plan;
  plan.seed = seed;
  plan.groups.resize(n);
  const std::size_t base = order.size() / n, extra = order.size() % n;
  std::size_t pos = 0;
  for (std::size_t g = 0; g < n; ++g) {
    const std::size_t size = base + (g < extra ? 1 : 0);
    plan.groups[g].assign(order.begin() + pos, order.begin() + pos + size);
    pos += size;
  }
  return plan;
}

std::vector<std::string> FoldPlan::sources(std::size_t fold) const {
  if (fold >= groups.size()) throw ContractViolation("fold index out of range");
  std::vector<std::string> out;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (g != fold) out.insert(out.end(), groups[g].begin(), groups[g].end());
  }
  return out;
}

std::size_t FoldPlan::target_fold(const std::string& park) const {
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (std::find(groups[g].begin(), groups[g].end(), park) != groups[g].end()) return g;
  }
  throw ValidationError("park " + park + " is in no fold");
}

std::string FoldPlan::to_json() const {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["seed"] = seed;
  j["groups"] = groups;
  return j.dump(2);
}

FoldPlan FoldPlan::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("schema_version").get<int>() != 1) throw ValidationError("unsupported fold plan schema");
    FoldPlan plan;
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.groups = j.at("groups").get<std::vector<std::vector<std::string>>>();
    std::map<std::string, int> seen;
    for (const auto& g : plan.groups) {
      for (const auto& p : g) {
        if (++seen[p] > 1) throw ValidationError("park " + p + " appears in two fold groups");
      }
    }
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("fold plan: ") + e.what(), 0);
  }
}

}  // namespace tasktcn::data
