#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "tasktcn/evaluation/embedding_space.hpp"
#include "tasktcn/evaluation/metrics.hpp"
#include "tasktcn/evaluation/tables.hpp"
#include "tasktcn/models/task_model.hpp"

using namespace tasktcn;
using namespace tasktcn::evaluation;

namespace {

// P(min(W+, W-) <= observed) by enumerating all sign patterns over average ranks.
double brute_wilcoxon_p(const std::vector<double>& d) {
  std::vector<double> mag;
  for (double v : d) mag.push_back(std::abs(v));
  const std::size_t n = d.size();
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      less += mag[j] < mag[i];
      equal += mag[j] == mag[i];
    }
    rank[i] = less + (equal + 1) / 2.0;
  }
  double total = 0, wp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total += rank[i];
    if (d[i] > 0) wp += rank[i];
  }
  const double obs = std::min(wp, total - wp);
  std::size_t hits = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1) s += rank[i];
    if (std::min(s, total - s) <= obs + 1e-9) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(std::size_t{1} << n);
}

}  // namespace

TEST(Nrmse, Examples) {
  const std::vector<float> p1{1, 0}, t1{0, 0};
  EXPECT_NEAR(nrmse(p1, t1), std::sqrt(0.5), 1e-12);
  const std::vector<float> p2{0.1f, 0.1f, 0.1f}, t2{0, 0, 0};
  EXPECT_NEAR(nrmse(p2, t2), 0.1, 1e-7);
  const std::vector<float> p3{1.5f, -0.5f}, t3{1, 0};
  EXPECT_EQ(nrmse(p3, t3), 0.0);  // clipped
  EXPECT_NEAR(nrmse(p1, t1, 2.0), std::sqrt(0.5) / 2, 1e-12);
  EXPECT_THROW(nrmse(std::vector<float>{}, std::vector<float>{}), ContractViolation);
  EXPECT_THROW(nrmse(p1, p2), ContractViolation);
}

TEST(Skill, Examples) {
  EXPECT_DOUBLE_EQ(skill(0.1, 0.2), 0.5);
  EXPECT_NEAR(skill(0.136, 0.184), 0.261, 5e-4);
  EXPECT_THROW(skill(0.1, 0.0), UndefinedSkill);
  EXPECT_LT(skill(0.3, 0.2), 0.0);
}

TEST(Skill, MeanOfSkillsDiffersFromRatioOfMeans) {
  const std::vector<MetricRow> ref{{"a", "m", 0.1}, {"b", "m", 0.3}};
  const std::vector<MetricRow> base{{"b", "x", 0.3}, {"a", "x", 0.2}};
  const auto t = skill(ref, base);
  EXPECT_DOUBLE_EQ(t.per_park.at("a"), 0.5);
  EXPECT_DOUBLE_EQ(t.per_park.at("b"), 0.0);
  EXPECT_DOUBLE_EQ(t.mean_skill, 0.25);
  EXPECT_NEAR(t.ratio_of_means, 0.2, 1e-12);
}

TEST(Skill, RejectsMismatchedParks) {
  const std::vector<MetricRow> ref{{"a", "m", 0.1}};
  const std::vector<MetricRow> base{{"b", "x", 0.3}};
  EXPECT_THROW(skill(ref, base), ValidationError);
  const std::vector<MetricRow> zero{{"a", "x", 0.0}};
  EXPECT_THROW(skill(ref, zero), UndefinedSkill);
}

TEST(Wilcoxon, FiveAllPositive) {
  const std::vector<double> a{1, 2, 3, 4, 5}, b{0, 0, 0, 0, 0};
  const auto r = wilcoxon_signed_rank(a, b);
  EXPECT_EQ(r.n, 5u);
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_EQ(r.w_plus, 15.0);
  EXPECT_TRUE(r.exact);
  EXPECT_DOUBLE_EQ(r.p_value, 0.0625);
  EXPECT_FALSE(r.significant);
}

TEST(Wilcoxon, ZeroDifferencesDroppedAndTooFewRejected) {
  const std::vector<double> a{1, 2, 3, 4, 5, 6}, b{1, 2, 0, 0, 0, 0};
  EXPECT_THROW(wilcoxon_signed_rank(a, b), InsufficientData);
  EXPECT_THROW(wilcoxon_signed_rank(std::vector<double>{1}, std::vector<double>{1, 2}), ContractViolation);
}

TEST(Wilcoxon, ExactMatchesBruteForce) {
  Rng rng(21);
  std::uniform_int_distribution<int> len(5, 12);
  std::uniform_int_distribution<int> val(-4, 4);  // integer diffs give tied magnitudes
  for (int trial = 0; trial < 150; ++trial) {
    std::vector<double> a, b;
    const int n = len(rng);
    while (static_cast<int>(a.size()) < n) {
      const int d = val(rng);
      if (d == 0) continue;
      a.push_back(d);
      b.push_back(0);
    }
    const auto r = wilcoxon_signed_rank(a, b);
    EXPECT_NEAR(r.p_value, brute_wilcoxon_p(a), 1e-12) << "trial " << trial;
    EXPECT_NEAR(r.w_plus + r.w_minus, n * (n + 1) / 2.0, 1e-12);
  }
}

TEST(Wilcoxon, NormalApproximationMatchesReference) {
  // two-sided, zero differences dropped, tie-corrected variance, no continuity correction
  const std::vector<double> a{0.34, 0.24, 0.45, 0.58, 0.73, 0.52, 0.39, 0.34, 0.65, 0.83,
                              0.55, 0.25, 0.31, 0.82, 0.54, 0.15, 0.48, 0.27, 0.37, 0.40,
                              0.36, 0.61, 0.49, 0.38, 0.58, 0.67, 0.17, 0.45, 0.30, 0.47};
  const std::vector<double> b{0.19, 0.45, 0.44, 0.39, 0.24, 0.37, 0.23, 0.18, 0.49, 0.23,
                              0.68, 0.59, 0.05, 0.50, 0.23, 0.46, 0.46, 0.05, 0.40, 0.40,
                              0.64, 0.21, 0.60, 0.23, 0.38, 0.28, 0.74, 0.56, 0.94, 0.58};
  const auto r = wilcoxon_signed_rank(a, b);
  EXPECT_EQ(r.n, 29u);
  EXPECT_FALSE(r.exact);
  EXPECT_DOUBLE_EQ(r.statistic, 159.5);
  EXPECT_NEAR(r.p_value, 0.20973578476282684, 1e-12);
  EXPECT_FALSE(r.significant);
}

TEST(Wilcoxon, SymmetricInArgumentOrder) {
  const std::vector<double> a{0.3, 0.1, 0.5, 0.2, 0.9, 0.4}, b{0.2, 0.3, 0.1, 0.25, 0.3, 0.35};
  const auto ab = wilcoxon_signed_rank(a, b);
  const auto ba = wilcoxon_signed_rank(b, a);
  EXPECT_EQ(ab.p_value, ba.p_value);
  EXPECT_EQ(ab.w_plus, ba.w_minus);
}

TEST(Distances, EuclideanAndMetricProperties) {
  const auto d = pairwise_distances({{0, 0}, {3, 4}, {1, 1}});
  EXPECT_DOUBLE_EQ(d[0][1], 5.0);
  Rng rng(2);
  std::normal_distribution<double> nd;
  std::vector<std::vector<double>> rows(8, std::vector<double>(5));
  for (auto& r : rows)
    for (double& v : r) v = nd(rng);
  const auto m = pairwise_distances(rows);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(m[i][i], 0.0);
    for (std::size_t j = 0; j < 8; ++j) {
      EXPECT_EQ(m[i][j], m[j][i]);
      for (std::size_t k = 0; k < 8; ++k) EXPECT_LE(m[i][k], m[i][j] + m[j][k] + 1e-12);
    }
  }
}

TEST(Pearson, Examples) {
  const std::vector<double> x{1, 2, 3, 4}, y{2, 4, 6, 8}, z{4, 3, 2, 1};
  EXPECT_NEAR(pearson(x, y), 1.0, 1e-12);
  EXPECT_NEAR(pearson(x, z), -1.0, 1e-12);
  const std::vector<double> c{1, 1, 1, 1};
  EXPECT_THROW(pearson(x, c), ValidationError);
  const auto a = pairwise_distances({{0}, {1}, {3}});
  const auto b = pairwise_distances({{0}, {2}, {6}});
  EXPECT_NEAR(space_correlation(a, b), 1.0, 1e-12);
}

TEST(ClusterSeparation, WithinAndBetween) {
  const auto d = pairwise_distances({{0}, {1}, {10}, {12}});
  const auto s = cluster_separation(d, {0, 0, 1, 1});
  EXPECT_DOUBLE_EQ(s.within, 1.5);
  EXPECT_DOUBLE_EQ(s.between, (10 + 12 + 9 + 11) / 4.0);
  EXPECT_THROW(cluster_separation(d, {0, 1}), ContractViolation);
}

TEST(EmbeddingSpace, TransformedIsAffineImageOfRows) {
  models::ModelConfig c;
  c.kind = models::ModelKind::tcn;
  c.num_features = 2;
  c.num_tasks = 4;
  c.seq_len = 8;
  c.channels = 3;
  c.embedding_dim = 5;
  c.seed = 1;
  auto model = models::make_model(c);
  auto* tcn = dynamic_cast<models::TaskTcn*>(model.get());
  ASSERT_NE(tcn, nullptr);
  const auto& inj = *tcn->blocks()[0].injection;
  const auto e = model->embedding().vector(models::TaskId(3));
  const auto t = transformed_embedding(*model, models::TaskId(3));
  ASSERT_EQ(t.shape(), (autodiff::Shape{3, 8}));
  for (std::size_t ch = 0; ch < 3; ++ch) {
    double acc = inj.bias.value[ch];
    for (std::size_t k = 0; k < 5; ++k) acc += inj.weight.value[ch * 5 + k] * e[k];
    for (std::size_t s = 0; s < 8; ++s) EXPECT_NEAR(t[ch * 8 + s], acc, 1e-5);
  }
  const auto a = analyze_embedding(*model);
  EXPECT_EQ(a.embedding_distances.size(), 4u);
  EXPECT_EQ(a.transformed_distances.size(), 4u);
  EXPECT_EQ(a.channel_distances.size(), 3u);
  EXPECT_GE(a.correlation, -1.0);
  EXPECT_LE(a.correlation, 1.0);
}

TEST(EmbeddingSpace, MlpHasNoTransformedSpace) {
  models::ModelConfig c;
  c.kind = models::ModelKind::mlp;
  c.num_features = 2;
  c.num_tasks = 3;
  c.embedding_dim = 2;
  auto model = models::make_model(c);
  EXPECT_THROW(transformed_embedding(*model, models::TaskId(1)), Unsupported);
  const auto a = analyze_embedding(*model);
  EXPECT_EQ(a.embedding_distances.size(), 3u);
  EXPECT_TRUE(a.transformed_distances.empty());
  EXPECT_TRUE(std::isnan(a.correlation));
}

TEST(Tables, MetricRowsRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "tasktcn_eval_rows" / "m.tsv";
  const std::vector<MetricRow> rows{{"p1", "tcn", 0.125}, {"p2", "tcn", 0.1 + 0.2}};
  write_metric_rows(path, rows);
  const auto back = read_metric_rows(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].nrmse, rows[1].nrmse);
  EXPECT_EQ(back[0].park_id, "p1");
  std::filesystem::remove_all(path.parent_path());
}

TEST(Tables, ResultsFormat) {
  ResultRow r;
  r.model = "tcn";
  r.embedding_type = "normal";
  r.embedding_position = "first";
  r.dataset = "synthetic";
  r.skill = 0.25;
  r.ratio_skill = 0.2;
  r.nrmse = 0.1;
  const auto text = format_results_table(std::span(&r, 1));
  EXPECT_EQ(text,
            "model\tembedding_type\tembedding_position\tdataset\tskill\tskill_ratio_of_means\tnRMSE\t"
            "significant\tstatus\n"
            "tcn\tnormal\tfirst\tsynthetic\t0.25\t0.2\t0.1\tn/a\tok\n");
  EXPECT_EQ(format_number(std::nan("")), "nan");
}
