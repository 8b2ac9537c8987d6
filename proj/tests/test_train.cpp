#include <cmath>
#include <cstdlib>
#include <map>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"

#include "cgat/dataset.hpp"
#include "cgat/metrics.hpp"
#include "cgat/optim.hpp"
#include "cgat/sampling.hpp"
#include "cgat/sweep.hpp"
#include "cgat/synth.hpp"
#include "cgat/train.hpp"

using namespace cgat;
using cgat::test::error_code_of;

namespace {

// Sample-level recount of every score, independent of the confusion matrix.
Metrics oracle_metrics(const std::vector<int>& truth, const std::vector<int>& pred, int classes) {
  Metrics m;
  const double n = static_cast<double>(truth.size());
  double err = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) err += std::abs(truth[i] - pred[i]);
  m.mae = err / n;
  for (int c = 0; c < classes; ++c) {
    int tp = 0, fp = 0, fn = 0, support = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool t = truth[i] == c, p = pred[i] == c;
      tp += t && p;
      fp += !t && p;
      fn += t && !p;
      support += t;
    }
    const double precision = tp + fp ? double(tp) / (tp + fp) : 0.0;
    const double recall = tp + fn ? double(tp) / (tp + fn) : 0.0;
    const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    m.weighted_precision += support / n * precision;
    m.weighted_recall += support / n * recall;
    m.weighted_f1 += support / n * f1;
  }
  return m;
}

// Small graphs whose features carry the label: separable by construction.
std::vector<Sample> separable_samples(const ModelConfig& config, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Sample> out;
  for (std::size_t i = 0; i < count; ++i) {
    const int label = static_cast<int>(i % config.classes);
    Graph g = test::random_graph(6 + i % 3, config.input_width(), rng, 0.3);
    for (auto& v : g.x.storage()) v = 0.3 * v + (label - 2) * 0.4;
    out.push_back({std::to_string(i), label, batch(prepare_graph(config, g))});
  }
  return out;
}

GraphDataset tiny_tooth_dataset(int per_class, std::uint64_t seed) {
  GraphDataset data;
  data.config.target_vertices = 80;
  for (int stage = 0; stage < kStageCount; ++stage) {
    for (int i = 0; i < per_class; ++i) {
      const auto tooth = generate_tooth(dataset_sample_params(stage, seed, stage * per_class + i));
      GraphRecord r = preprocess_mesh(tooth.mesh, 80);
      r.id = std::to_string(stage) + "_" + std::to_string(i);
      r.label = stage;
      data.records.push_back(std::move(r));
    }
  }
  data.config.split_seed = seed;
  finalize_dataset(data);
  return data;
}

}  // namespace

TEST_SUITE("train-eval") {

TEST_CASE("metrics worked example") {
  const std::vector<int> truth = {0, 0, 1}, pred = {0, 1, 1};
  const Metrics m = compute_metrics(truth, pred, 3);
  // Class 0: precision 1, recall 1/2. Class 1: precision 1/2, recall 1.
  CHECK(m.per_class_f1[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(m.per_class_f1[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(m.weighted_f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(m.mae == doctest::Approx(1.0 / 3.0));
  CHECK(m.confusion[0][1] == 1);

  const std::vector<int> perfect = {0, 1, 2, 2, 4};
  const Metrics p = compute_metrics(perfect, perfect, 5);
  CHECK(p.weighted_f1 == 1.0);
  CHECK(p.mae == 0.0);
}

TEST_CASE("metrics match exhaustive enumeration") {
  for (int len = 1; len <= 6; ++len) {
    int total = 1;
    for (int i = 0; i < 2 * len; ++i) total *= 3;
    for (int code = 0; code < total; ++code) {
      std::vector<int> truth(len), pred(len);
      int c = code;
      for (int i = 0; i < len; ++i, c /= 3) truth[i] = c % 3;
      for (int i = 0; i < len; ++i, c /= 3) pred[i] = c % 3;
      const Metrics got = compute_metrics(truth, pred, 3);
      const Metrics want = oracle_metrics(truth, pred, 3);
      REQUIRE(std::abs(got.weighted_f1 - want.weighted_f1) < 1e-12);
      REQUIRE(std::abs(got.weighted_precision - want.weighted_precision) < 1e-12);
      REQUIRE(std::abs(got.weighted_recall - want.weighted_recall) < 1e-12);
      REQUIRE(std::abs(got.mae - want.mae) < 1e-12);
      for (int t = 0; t < 3; ++t) {
        int support = 0;
        for (int v : truth) support += v == t;
        int row = 0;
        for (int v : got.confusion[t]) row += v;
        REQUIRE(row == support);
      }
    }
  }
}

TEST_CASE("metrics errors") {
  const std::vector<int> none;
  CHECK(error_code_of([&] { compute_metrics(none, none, 5); }) == ErrorCode::empty_eval_set);
  const std::vector<int> a = {0, 5}, b = {0, 1};
  CHECK(error_code_of([&] { compute_metrics(a, b, 5); }) == ErrorCode::label_out_of_range);
}

TEST_CASE("stratified split arithmetic") {
  const std::vector<int> single(100, 0);
  const auto s = stratified_split(single, 3);
  CHECK(std::count(s.begin(), s.end(), Split::train) == 80);
  CHECK(std::count(s.begin(), s.end(), Split::val) == 5);
  CHECK(std::count(s.begin(), s.end(), Split::test) == 15);

  std::vector<int> d(18, 0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto ds = stratified_split(d, seed);
    const auto tr = std::count(ds.begin(), ds.end(), Split::train);
    const auto va = std::count(ds.begin(), ds.end(), Split::val);
    const auto te = std::count(ds.begin(), ds.end(), Split::test);
    CHECK(tr >= 14);
    CHECK(tr <= 15);
    CHECK(va <= 1);
    CHECK(te >= 2);
    CHECK(te <= 3);
  }
  CHECK(stratified_split(single, 3) == s);

  const std::vector<int> tiny = {0, 1, 1, 2};
  const auto ts = stratified_split(tiny, 1);
  for (int c = 0; c < 3; ++c) {
    bool has_train = false;
    for (std::size_t i = 0; i < tiny.size(); ++i) has_train |= tiny[i] == c && ts[i] == Split::train;
    CHECK(has_train);
  }
  const std::vector<int> gap = {0, 2};
  CHECK(error_code_of([&] { stratified_split(gap, 1); }) == ErrorCode::empty_class);
}

TEST_CASE("stratified split proportions on random labels") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int classes = 2 + trial % 4;
    std::vector<int> labels;
    for (int c = 0; c < classes; ++c) labels.insert(labels.end(), 1 + rng() % 60, c);
    std::shuffle(labels.begin(), labels.end(), rng);
    const auto s = stratified_split(labels, trial);
    REQUIRE(s.size() == labels.size());
    for (int c = 0; c < classes; ++c) {
      std::map<Split, int> count;
      int n = 0;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != c) continue;
        ++n;
        ++count[s[i]];
      }
      CHECK(count[Split::none] == 0);
      CHECK(std::abs(count[Split::train] - 0.80 * n) <= 1.0);
      CHECK(std::abs(count[Split::val] - 0.05 * n) <= 1.0);
      CHECK(std::abs(count[Split::test] - 0.15 * n) <= 1.0);
      CHECK(count[Split::train] >= 1);
    }
  }
}

TEST_CASE("balanced batches") {
  std::vector<int> skew(90, 0);
  skew.insert(skew.end(), 10, 1);
  auto batches = balanced_batches(skew, 32, 1, 0);
  CHECK(batches.size() == 4);  // ceil(100 / 32)
  std::size_t ones = 0, total = 0;
  for (int epoch = 0; epoch < 100; ++epoch) {
    for (const auto& b : balanced_batches(skew, 32, 1, epoch)) {
      CHECK(b.size() == 32);
      for (auto i : b) {
        ones += skew[i] == 1;
        ++total;
      }
    }
  }
  CHECK(std::abs(double(ones) / total - 0.5) < 0.02);

  std::vector<int> paper;
  const std::vector<int> counts = {18, 40, 56, 351, 63};
  for (int c = 0; c < 5; ++c) paper.insert(paper.end(), counts[c], c);
  std::vector<std::size_t> per_class(5, 0);
  total = 0;
  for (int epoch = 0; total < 10000; ++epoch) {
    for (const auto& b : balanced_batches(paper, 32, 7, epoch)) {
      for (auto i : b) {
        ++per_class[paper[i]];
        ++total;
      }
    }
  }
  for (auto n : per_class) CHECK(std::abs(double(n) / total - 0.2) < 0.02);

  CHECK(balanced_batches(paper, 32, 7, 3) == balanced_batches(paper, 32, 7, 3));
  CHECK(balanced_batches(paper, 32, 7, 3) != balanced_batches(paper, 32, 7, 4));

  // Single class: uniform resampling over all indices.
  const std::vector<int> one(10, 0);
  std::vector<std::size_t> hits(10, 0);
  for (int epoch = 0; epoch < 2000; ++epoch) {
    for (const auto& b : balanced_batches(one, 4, 2, epoch)) {
      for (auto i : b) ++hits[i];
    }
  }
  const double drawn = std::accumulate(hits.begin(), hits.end(), 0.0);
  for (auto h : hits) CHECK(std::abs(h / drawn - 0.1) < 0.01);
}

TEST_CASE("adam") {
  ParamStore store;
  store.add("w", Tensor::vector({0.5, -1.0, 2.0}));
  store.zero_grad();
  Adam adam(store);
  adam.step(store, 0.1);
  CHECK(store.at("w").value == Tensor::vector({0.5, -1.0, 2.0}));

  store.at("w").grad = Tensor::vector({3.0, -0.01, 1e3});
  const Tensor before = store.at("w").value;
  Adam fresh(store);
  fresh.step(store, 0.001);
  for (std::size_t i = 0; i < 3; ++i) {
    const double g = store.at("w").grad[i];
    const double expected = -0.001 * g / (std::abs(g) + 1e-8);
    CHECK(store.at("w").value[i] - before[i] == doctest::Approx(expected).epsilon(1e-9));
  }
  CHECK(fresh.step_count() == 1);
}

TEST_CASE("plateau scheduler") {
  PlateauScheduler down(0.001);
  for (int e = 0; e < 30; ++e) CHECK(down.step(1.0 - 0.01 * e) == 0.001);

  PlateauScheduler flat(0.001);
  for (int e = 1; e <= 5; ++e) CHECK(flat.step(1.0) == 0.001);
  CHECK(flat.step(1.0) == 0.0005);  // epoch 6
  CHECK(flat.reductions() == 1);
  CHECK(flat.stalled_epochs() == 0);

  PlateauScheduler late(0.001);
  const std::vector<double> losses = {1.0, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9};
  std::vector<double> lrs;
  for (double l : losses) lrs.push_back(late.step(l));
  CHECK(lrs[5] == 0.001);
  CHECK(lrs[6] == 0.0005);  // fifth stall

  PlateauScheduler tiny(0.001);
  tiny.step(1.0);
  for (int e = 0; e < 5; ++e) tiny.step(1.0 - 1e-9);  // within threshold: not an improvement
  CHECK(tiny.reductions() == 1);

  PlateauScheduler bound(1.0);
  const int epochs = 150;
  for (int e = 0; e < epochs; ++e) {
    bound.step(5.0);
    CHECK(bound.lr() > 0.0);
  }
  CHECK(bound.reductions() <= epochs / 5);
}

TEST_CASE("one epoch smoke run") {
  ModelConfig c = test::tiny_config(2, 8, 2);
  const auto samples = separable_samples(c, 8, 1);
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 4;
  const auto r = train(init_model(c, 1), samples, {}, tc);
  REQUIRE(r.history.size() == 1);
  CHECK(std::isfinite(r.history[0].train_loss));
  CHECK(std::isfinite(r.history[0].val_loss));
  CHECK(r.best_epoch == 1);
}

TEST_CASE("loss decreases while overfitting one batch") {
  ModelConfig c = test::tiny_config(2, 32, 2);
  Model m = init_model(c, 2);
  const auto samples = separable_samples(c, 8, 2);
  std::vector<std::size_t> all(8);
  std::iota(all.begin(), all.end(), 0);
  Adam adam(m.params);
  double previous = 1e9;
  bool strictly = true;
  double loss = 0.0;
  for (int step = 0; step < 200; ++step) {
    loss = accumulate_gradients(m, samples, all, false, 0);
    if (step <= 50) strictly = strictly && loss < previous;
    previous = loss;
    adam.step(m.params, 0.001);
  }
  CHECK(strictly);
  CHECK(loss < 0.05);
}

TEST_CASE("batch gradient equals the block-diagonal batch gradient") {
  ModelConfig c = test::tiny_config(2, 6, 2);
  Model m = init_model(c, 3);
  const auto samples = separable_samples(c, 3, 5);
  const std::vector<std::size_t> idx = {0, 1, 2};
  accumulate_gradients(m, samples, idx, false, 0);
  std::vector<Tensor> per_sample;
  for (auto& p : m.params.params()) per_sample.push_back(p.grad);

  std::vector<AugmentedGraph> gs;
  std::vector<int> labels;
  for (const auto& s : samples) {
    gs.push_back(unbatch(s.graph).front());
    labels.push_back(s.label);
  }
  const GraphBatch joint = batch(gs);
  m.params.zero_grad();
  Tape t;
  std::mt19937_64 rng(0);
  const auto out = forward(t, m, bind_params(t, m), joint, false, rng);
  t.backward(ad::softmax_cross_entropy(t, out.logits, labels));
  for (std::size_t i = 0; i < per_sample.size(); ++i) {
    CHECK(test::max_abs_diff(per_sample[i], m.params.params()[i].grad) < 1e-12);
  }
}

TEST_CASE("gradients do not depend on the thread count") {
  ModelConfig c = test::tiny_config(2, 8, 2);
  c.dropout = 0.3;
  const auto samples = separable_samples(c, 7, 6);
  std::vector<std::size_t> idx(7);
  std::iota(idx.begin(), idx.end(), 0);
  auto grads = [&](const char* threads) {
    setenv("CGAT_THREADS", threads, 1);
    Model m = init_model(c, 5);
    const double loss = accumulate_gradients(m, samples, idx, true, 11);
    std::vector<Tensor> out{Tensor::scalar(loss)};
    for (auto& p : m.params.params()) out.push_back(p.grad);
    return out;
  };
  const auto one = grads("1");
  const auto three = grads("3");
  unsetenv("CGAT_THREADS");
  REQUIRE(one.size() == three.size());
  for (std::size_t i = 0; i < one.size(); ++i) CHECK(one[i] == three[i]);
}

TEST_CASE("training is deterministic and evaluation is consistent") {
  ModelConfig c = test::tiny_config(2, 8, 2);
  c.dropout = 0.3;
  const auto train_set = separable_samples(c, 10, 3);
  const auto val = separable_samples(c, 5, 4);
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 4;
  tc.seed = 9;
  const auto a = train(init_model(c, 1), train_set, val, tc);
  const auto b = train(init_model(c, 1), train_set, val, tc);
  for (std::size_t i = 0; i < a.final_model.params.size(); ++i) {
    CHECK(a.final_model.params.params()[i].value == b.final_model.params.params()[i].value);
  }
  CHECK(a.history.size() == 3);
  for (std::size_t e = 0; e < 3; ++e) {
    CHECK(a.history[e].train_loss == b.history[e].train_loss);
    CHECK(a.history[e].val_f1 <= a.best_val_f1);
  }

  const Evaluation ev = evaluate(a.best_model, val);
  std::vector<int> truth;
  for (const auto& s : val) truth.push_back(s.label);
  const Metrics direct = compute_metrics(truth, ev.predictions, 5);
  CHECK(ev.metrics.weighted_f1 == direct.weighted_f1);
  CHECK(ev.metrics.weighted_f1 == doctest::Approx(a.best_val_f1));
  CHECK(error_code_of([&] { evaluate(a.best_model, {}); }) == ErrorCode::empty_eval_set);

  const std::string tsv = history_tsv(a.history);
  CHECK(tsv.rfind("epoch\ttrain_loss\tval_loss\tval_f1\tlr\n", 0) == 0);
  CHECK(std::count(tsv.begin(), tsv.end(), '\n') == 4);

  TrainConfig bad;
  bad.lr = 0.0;
  CHECK(error_code_of([&] { validate(bad); }) == ErrorCode::invalid_config);
  bad = TrainConfig{};
  bad.factor = 1.0;
  CHECK(error_code_of([&] { validate(bad); }) == ErrorCode::invalid_config);
}

TEST_CASE("sweep smoke run") {
  const GraphDataset data = tiny_tooth_dataset(4, 3);
  SweepConfig sc;
  sc.base = test::tiny_config(1, 8, 2);
  sc.train.epochs = 2;
  sc.train.batch_size = 8;
  sc.blocks = {1, 2};
  sc.modes = {ClsMode::directed};
  sc.features = {FeatureChannels::both};
  sc.repeats = 1;
  sc.seed = 4;
  const SweepResult r = depth_sweep(data, sc);
  REQUIRE(r.runs.size() == 2);
  for (const auto& run : r.runs) CHECK(std::isfinite(run.test_f1));
  CHECK(std::isfinite(r.mean_f1(1, ClsMode::directed, FeatureChannels::both)));
  CHECK(std::isnan(r.mean_f1(3, ClsMode::directed, FeatureChannels::both)));

  const std::string runs = sweep_runs_tsv(r);
  CHECK(std::count(runs.begin(), runs.end(), '\n') == 3);
  const std::string grid = sweep_grid_tsv(r);
  std::istringstream lines(grid);
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  CHECK(header == "family\t1\t2");
  CHECK(row.rfind("CGAT→-both\t", 0) == 0);

  const SweepResult again = depth_sweep(data, sc);
  for (std::size_t i = 0; i < r.runs.size(); ++i) CHECK(again.runs[i].test_f1 == r.runs[i].test_f1);
}

}  // TEST_SUITE
