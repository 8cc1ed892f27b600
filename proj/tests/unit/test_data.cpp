#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "tasktcn/data/csv.hpp"
#include "tasktcn/data/preprocess.hpp"
#include "tasktcn/data/samples.hpp"
#include "tasktcn/data/synthetic.hpp"

using namespace tasktcn;
using namespace tasktcn::data;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("tasktcn_data_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             std::to_string(counter++) + "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

DatasetSpec hourly() { return DatasetSpec::synthetic(24, "ws"); }

ParkRecord hourly_record(std::size_t days, std::int64_t start = 1420070400) {
  ParkRecord r;
  r.park_id = "p";
  r.feature_names = {"ws", "t"};
  for (std::size_t t = 0; t < days * 24; ++t) {
    r.timestamps.push_back(start + static_cast<std::int64_t>(t) * 3600);
    r.features.push_back(static_cast<float>(t));
    r.features.push_back(static_cast<float>(t % 7));
    r.power.push_back(static_cast<float>(t % 24) / 24.0f);
  }
  return r;
}

}  // namespace

TEST(Iso8601, ParseAndFormat) {
  EXPECT_EQ(parse_iso8601("2015-01-01T00:00:00Z"), 1420070400);
  EXPECT_EQ(parse_iso8601("2015-01-01 01:00"), 1420074000);
  EXPECT_EQ(parse_iso8601("2015-01-01T00:00:00+00:00"), 1420070400);
  EXPECT_EQ(format_iso8601(1420070400), "2015-01-01T00:00:00Z");
  EXPECT_THROW(parse_iso8601("01/01/2015"), ParseError);
  EXPECT_EQ(day_of(1420070400 + 86399), day_of(1420070400));
}

TEST(Csv, LoadsSortsAndDropsMissing) {
  TempDir dir;
  write_file(dir.path() / "a.csv",
             "timestamp,ws,temp,power\n"
             "2015-01-01T02:00:00Z,3,1,0.5\n"
             "2015-01-01T00:00:00Z,1,1,0.1\n"
             "2015-01-01T01:00:00Z,,1,0.2\n"
             "2015-01-01T03:00:00Z,4,nan,0.2\n");
  const auto r = load_park_csv(dir.path() / "a.csv", hourly());
  EXPECT_EQ(r.park_id, "a");
  EXPECT_EQ(r.feature_names, (std::vector<std::string>{"ws", "temp"}));
  ASSERT_EQ(r.length(), 2u);
  EXPECT_EQ(r.timestamps[0], 1420070400);
  EXPECT_FLOAT_EQ(r.power[1], 0.5f);
}

TEST(Csv, ErrorsCarryLineNumbers) {
  TempDir dir;
  write_file(dir.path() / "bad.csv",
             "timestamp,ws,power\n"
             "2015-01-01T00:00:00Z,1,0.1\n"
             "2015-01-01T01:00:00Z,abc,0.1\n");
  try {
    load_park_csv(dir.path() / "bad.csv", hourly());
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  write_file(dir.path() / "short.csv", "timestamp,ws,power\n2015-01-01T00:00:00Z,1\n");
  EXPECT_THROW(load_park_csv(dir.path() / "short.csv", hourly()), ParseError);
  write_file(dir.path() / "range.csv", "timestamp,ws,power\n2015-01-01T00:00:00Z,1,1.5\n");
  EXPECT_THROW(load_park_csv(dir.path() / "range.csv", hourly()), ValidationError);
  write_file(dir.path() / "nopower.csv", "timestamp,ws\n2015-01-01T00:00:00Z,1\n");
  EXPECT_THROW(load_park_csv(dir.path() / "nopower.csv", hourly()), ParseError);
}

TEST(Csv, WriteReadRoundTrip) {
  TempDir dir;
  SyntheticSpec spec;
  spec.num_tasks = 2;
  spec.num_clusters = 1;
  spec.days = 3;
  spec.seed = 4;
  const auto parks = gen_synthetic(spec);
  write_park_csv(dir.path() / "x" / "park_01.csv", parks[0], spec.dataset_spec());
  const auto back = load_park_csv(dir.path() / "x" / "park_01.csv", spec.dataset_spec());
  EXPECT_EQ(back.timestamps, parks[0].timestamps);
  EXPECT_EQ(back.features, parks[0].features);
  EXPECT_EQ(back.power, parks[0].power);
}

TEST(Interpolate, HourToQuarterHour) {
  ParkRecord r;
  r.park_id = "p";
  r.feature_names = {"ws"};
  r.timestamps = {0, 3600};
  r.features = {0, 4};
  r.power = {0, 0.4f};
  const auto out = interpolate_linear(r, 3600, 900);
  ASSERT_EQ(out.length(), 5u);
  EXPECT_EQ(out.features, (std::vector<float>{0, 1, 2, 3, 4}));
  EXPECT_NEAR(out.power[2], 0.2f, 1e-7);
  EXPECT_EQ(out.timestamps.back(), 3600);
}

TEST(Interpolate, LeavesLargeGapsOpen) {
  ParkRecord r;
  r.park_id = "p";
  r.feature_names = {"ws"};
  r.timestamps = {0, 3600, 3 * 3600};
  r.features = {0, 4, 8};
  r.power = {0, 0, 0};
  const auto out = interpolate_linear(r, 3600, 900);
  EXPECT_EQ(out.length(), 6u);  // 0..3600 in 5 steps, then the lone point
}

TEST(FilterDays, KeepsCompleteDaysOnly) {
  auto r = hourly_record(3);
  r = r.slice(0, 24 * 3 - 1);  // last day incomplete
  EXPECT_EQ(count_complete_days(r, 24), 2u);
  const auto f = filter_complete_days(r, 24);
  EXPECT_EQ(f.length(), 48u);
}

TEST(Split, TrainTestBoundary) {
  const auto r = hourly_record(10);
  const auto [tr, te] = split_train_test(r, 7);
  EXPECT_EQ(tr.length(), 7u * 24);
  EXPECT_EQ(te.length(), 3u * 24);
  EXPECT_EQ(tr.split, Split::train);
  EXPECT_EQ(te.split, Split::test);
  EXPECT_THROW(split_train_test(r, 10), InsufficientData);
}

TEST(Split, ValidationTakesLastDays) {
  const auto r = hourly_record(10);
  const auto [fit, val] = validation_split(r, 0.1, 24);
  EXPECT_EQ(val.length(), 24u);
  EXPECT_EQ(fit.length(), 9u * 24);
  EXPECT_EQ(val.timestamps.front(), r.timestamps[9 * 24]);
  const auto [f2, v2] = validation_split(r, 0.25, 24);
  EXPECT_EQ(v2.length(), 2u * 24);
  EXPECT_THROW(validation_split(r, 0.0, 24), ConfigError);
  EXPECT_THROW(validation_split(hourly_record(1), 0.5, 24), InsufficientData);
}

TEST(Standardizer, ZScoresByTrainingStats) {
  ParkRecord r;
  r.park_id = "p";
  r.feature_names = {"a", "c"};
  r.timestamps = {0, 1};
  r.features = {8, 5, 12, 5};
  r.power = {0, 0};
  const auto s = Standardizer::fit(std::span(&r, 1));
  EXPECT_EQ(s.names(), (std::vector<std::string>{"a"}));
  EXPECT_EQ(s.dropped(), (std::vector<std::string>{"c"}));
  EXPECT_DOUBLE_EQ(s.mean()[0], 10.0);
  EXPECT_DOUBLE_EQ(s.stddev()[0], 2.0);
  const auto z = s.apply(r);
  EXPECT_EQ(z.feature_names, (std::vector<std::string>{"a"}));
  EXPECT_FLOAT_EQ(z.features[1], 1.0f);
  EXPECT_EQ(z.power, r.power);
}

TEST(Standardizer, RefusesTestData) {
  auto r = hourly_record(2);
  r.split = Split::test;
  EXPECT_THROW(Standardizer::fit(std::span(&r, 1)), ContractViolation);
}

TEST(Folds, SizesAndPartition) {
  std::vector<std::string> parks;
  for (int i = 0; i < 45; ++i) parks.push_back("p" + std::to_string(i));
  const auto plan = make_folds(parks, 5, 7);
  std::set<std::string> seen;
  for (const auto& g : plan.groups) {
    EXPECT_EQ(g.size(), 9u);
    seen.insert(g.begin(), g.end());
  }
  EXPECT_EQ(seen.size(), 45u);
  EXPECT_EQ(plan.sources(2).size(), 36u);
  EXPECT_EQ(plan.target_fold(plan.groups[3][0]), 3u);

  parks.resize(21);
  const auto p21 = make_folds(parks, 5, 7);
  std::vector<std::size_t> sizes;
  for (const auto& g : p21.groups) sizes.push_back(g.size());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{5, 4, 4, 4, 4}));

  EXPECT_EQ(make_folds(parks, 5, 7).groups, p21.groups);
  EXPECT_NE(make_folds(parks, 5, 8).groups, p21.groups);
  EXPECT_THROW(make_folds(std::span(parks).first(3), 5, 1), InsufficientData);
}

TEST(Folds, JsonRoundTrip) {
  std::vector<std::string> parks{"a", "b", "c", "d", "e"};
  const auto plan = make_folds(parks, 2, 3);
  const auto back = FoldPlan::from_json(plan.to_json());
  EXPECT_EQ(back.groups, plan.groups);
  EXPECT_EQ(back.seed, plan.seed);
}

TEST(Samples, DayShaped) {
  auto a = hourly_record(3);
  a.task_id = TaskId(1);
  auto b = hourly_record(2);
  b.task_id = TaskId(2);
  const std::vector<ParkRecord> recs{a, b};
  const auto s = make_samples(recs, 24);
  EXPECT_EQ(s.size(), 5u);
  EXPECT_EQ(s.x.shape(), (autodiff::Shape{5, 2, 24}));
  EXPECT_EQ(s.ids[3], TaskId(2));
  EXPECT_FLOAT_EQ(s.x[(1 * 2 + 0) * 24 + 5], 24.0f + 5.0f);
  EXPECT_EQ(s.for_task(TaskId(1)).size(), 3u);
  const std::vector<std::size_t> pos{4, 0};
  EXPECT_EQ(s.subset(pos).ids[0], TaskId(2));
  EXPECT_EQ(SampleSet::concat(s, s).size(), 10u);
  auto odd = hourly_record(1).slice(0, 20);
  EXPECT_THROW(make_samples(std::span(&odd, 1), 24), ContractViolation);
}

TEST(Synthetic, BitReproducibleFromSeed) {
  SyntheticSpec spec;
  spec.num_tasks = 4;
  spec.days = 10;
  spec.seed = 9;
  const auto a = gen_synthetic(spec);
  const auto b = gen_synthetic(spec);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].features, b[i].features);
    EXPECT_EQ(a[i].power, b[i].power);
  }
  spec.seed = 10;
  EXPECT_NE(gen_synthetic(spec)[0].power, a[0].power);
}

TEST(Synthetic, NoiselessSameClusterTasksCoincide) {
  SyntheticSpec spec;
  spec.num_tasks = 4;
  spec.num_clusters = 2;
  spec.days = 5;
  spec.noise = 0;
  spec.feature_noise = 0;
  spec.mixture_spread = 0;
  spec.task_spread = 0;
  const auto parks = gen_synthetic(spec);
  EXPECT_EQ(parks[0].cluster, parks[1].cluster);
  EXPECT_EQ(parks[0].power, parks[1].power);
  EXPECT_EQ(parks[2].power, parks[3].power);
  EXPECT_NE(parks[0].power, parks[2].power);
}

TEST(Synthetic, MillionPointsInUnitInterval) {
  SyntheticSpec spec;
  spec.num_tasks = 6;
  spec.num_clusters = 3;
  spec.days = 7000;  // 6 * 7000 * 24 > 1e6
  spec.noise = 0.2;
  const auto parks = gen_synthetic(spec);
  std::size_t n = 0;
  for (const auto& p : parks) {
    for (float v : p.power) {
      ASSERT_GE(v, 0.0f);
      ASSERT_LE(v, 1.0f);
      ++n;
    }
    EXPECT_NO_THROW(p.check());
  }
  EXPECT_GE(n, 1000000u);
}

TEST(Synthetic, ClonesShareFeatures) {
  SyntheticSpec spec;
  spec.num_tasks = 3;
  spec.days = 5;
  spec.clone_of = {2};
  const auto parks = gen_synthetic(spec);
  ASSERT_EQ(parks.size(), 4u);
  EXPECT_EQ(parks[3].features, parks[1].features);
  EXPECT_EQ(parks[3].cluster, parks[1].cluster);
  EXPECT_NE(parks[3].power, parks[1].power);
  spec.clone_of = {7};
  EXPECT_THROW(gen_synthetic(spec), ConfigError);
}

TEST(Synthetic, InvalidSpecRejected) {
  SyntheticSpec spec;
  spec.num_clusters = 9;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = {};
  spec.noise = -1;
  EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(Prepare, CacheReusedAndInvalidated) {
  TempDir dir;
  SyntheticSpec spec;
  spec.num_tasks = 2;
  spec.num_clusters = 1;
  spec.days = 4;
  const auto parks = gen_synthetic(spec);
  const auto ds = spec.dataset_spec();
  for (const auto& p : parks) write_park_csv(dir.path() / "csv" / (p.park_id + ".csv"), p, ds);
  const auto cache = dir.path() / "cache";
  const auto first = prepare_dataset(dir.path() / "csv", ds, cache);
  ASSERT_EQ(first.size(), 2u);
  EXPECT_EQ(first[1].task_id, TaskId(2));
  std::size_t files = 0;
  for (auto& e : fs::directory_iterator(cache)) files += e.is_regular_file();
  EXPECT_EQ(files, 1u);
  const auto second = prepare_dataset(dir.path() / "csv", ds, cache);
  EXPECT_EQ(second[0].power, first[0].power);
  // editing a CSV changes the key
  auto edited = parks[0];
  edited.power[0] = 0.123f;
  write_park_csv(dir.path() / "csv" / "park_01.csv", edited, ds);
  const auto third = prepare_dataset(dir.path() / "csv", ds, cache);
  EXPECT_FLOAT_EQ(third[0].power[0], 0.123f);
}

TEST(Records, BinaryRoundTrip) {
  TempDir dir;
  auto r = hourly_record(2);
  r.split = Split::train;
  r.task_id = TaskId(3);
  save_records(dir.path() / "r.bin", std::span(&r, 1));
  const auto back = load_records(dir.path() / "r.bin");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].features, r.features);
  EXPECT_EQ(back[0].timestamps, r.timestamps);
  EXPECT_EQ(back[0].split, Split::train);
  EXPECT_EQ(back[0].task_id, TaskId(3));
}

TEST(DatasetSpec, Validation) {
  EXPECT_EQ(DatasetSpec::wind().day_len, 96u);
  EXPECT_EQ(DatasetSpec::solar().day_len, 24u);
  auto s = DatasetSpec::solar();
  s.day_len = 25;
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_THROW(parse_dataset_kind("hydro"), ConfigError);
}
