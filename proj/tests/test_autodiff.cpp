#include <cmath>

#include "doctest.h"
#include "helpers.hpp"

#include "cgat/autodiff.hpp"

using namespace cgat;
using cgat::test::error_code_of;
using cgat::test::random_matrix;

namespace {

// Random probe weights turn a tensor-valued op into a scalar.
Tensor probe_like(const Tensor& t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  Tensor c(t.shape());
  for (auto& v : c.storage()) v = u(rng);
  return c;
}

double check(const std::function<Var(Tape&, std::span<const Var>)>& op, std::vector<Param*> params,
             std::uint64_t probe_seed = 1) {
  Tensor coeffs;
  auto fn = [&](Tape& t, std::span<const Var> p) {
    Var y = op(t, p);
    if (coeffs.empty()) coeffs = probe_like(t.value(y), probe_seed);
    return ad::weighted_sum(t, y, coeffs);
  };
  return grad_check(fn, params).max_rel_error;
}

EdgeIndex two_segment_edges() {
  // node 0 <- {0, 1}; node 1 <- {0, 1, 2}; node 2 <- {2}
  return EdgeIndex::build(3, {0, 1, 0, 1, 2, 2}, {0, 0, 1, 1, 1, 2});
}

}  // namespace

TEST_SUITE("tensor-autodiff") {

TEST_CASE("linear forward") {
  Tape t(false);
  Var x = t.constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  Var w = t.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  Var y = ad::linear(t, x, w, t.constant(Tensor::vector({0, 0})));
  CHECK(t.value(y) == Tensor::matrix(2, 2, {1, 2, 3, 4}));

  Var z = ad::linear(t, t.constant(Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6})), t.constant(Tensor({2, 2})),
                     t.constant(Tensor::vector({7, -1})));
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(t.value(z)(r, 0) == 7.0);
    CHECK(t.value(z)(r, 1) == -1.0);
  }
  CHECK(error_code_of([&] { ad::linear(t, x, t.constant(Tensor({3, 2})), t.constant(Tensor({2}))); }) ==
        ErrorCode::shape_mismatch);
}

TEST_CASE("linear gradients") {
  std::mt19937_64 rng(1);
  Param x("x", random_matrix(4, 3, rng)), w("w", random_matrix(3, 5, rng)), b("b", random_matrix(1, 5, rng));
  const double err = check([](Tape& t, auto p) { return ad::linear(t, p[0], p[1], p[2]); }, {&x, &w, &b});
  CHECK(err < 1e-6);

  // Gradient of sum(y) w.r.t. W is x^T 1.
  Tape t;
  w.zero_grad();
  Var y = ad::linear(t, t.constant(x.value), t.param(w), t.constant(b.value));
  t.backward(ad::sum(t, y));
  for (std::size_t i = 0; i < 3; ++i) {
    double col = 0.0;
    for (std::size_t r = 0; r < 4; ++r) col += x.value(r, i);
    for (std::size_t j = 0; j < 5; ++j) CHECK(w.grad(i, j) == doctest::Approx(col).epsilon(1e-12));
  }
}

TEST_CASE("activations") {
  Tape t(false);
  Var x = t.constant(Tensor::vector({0.0, -1.0, 2.0}));
  CHECK(t.value(ad::gelu(t, x))[0] == 0.0);
  CHECK(t.value(ad::leaky_relu(t, x, 0.2))[1] == doctest::Approx(-0.2).epsilon(1e-15));
  CHECK(t.value(ad::leaky_relu(t, x, 0.2))[2] == 2.0);
  // Exact GeLU: x * Phi(x).
  const double g2 = 2.0 * 0.5 * std::erfc(-2.0 / std::sqrt(2.0));
  CHECK(t.value(ad::gelu(t, x))[2] == doctest::Approx(g2).epsilon(1e-14));

  Param p("x", Tensor::vector({-2.0, -0.5, 0.3, 1.7}));
  CHECK(check([](Tape& t, auto v) { return ad::gelu(t, v[0]); }, {&p}) < 1e-6);
  CHECK(check([](Tape& t, auto v) { return ad::leaky_relu(t, v[0]); }, {&p}) < 1e-6);
}

TEST_CASE("layer norm") {
  Tape t(false);
  Var gain = t.constant(Tensor::vector({1, 1}));
  Var bias = t.constant(Tensor::vector({0, 0}));
  const Tensor flat = t.value(ad::layer_norm(t, t.constant(Tensor::matrix(1, 2, {3, 3})), gain, bias));
  CHECK(flat[0] == 0.0);
  CHECK(flat[1] == 0.0);
  const Tensor pm = t.value(ad::layer_norm(t, t.constant(Tensor::matrix(1, 2, {1, -1})), gain, bias));
  CHECK(pm[0] == doctest::Approx(1.0 / std::sqrt(1.0 + 1e-5)).epsilon(1e-14));
  CHECK(pm[1] == doctest::Approx(-1.0 / std::sqrt(1.0 + 1e-5)).epsilon(1e-14));

  std::mt19937_64 rng(3);
  Param x("x", random_matrix(3, 4, rng)), g("g", random_matrix(1, 4, rng)), b("b", random_matrix(1, 4, rng));
  CHECK(check([](Tape& t, auto v) { return ad::layer_norm(t, v[0], v[1], v[2]); }, {&x, &g, &b}) < 1e-5);
}

TEST_CASE("segment softmax") {
  Tape t(false);
  const EdgeIndex one = EdgeIndex::from_targets(1, {0});
  CHECK(t.value(ad::segment_softmax(t, t.constant(Tensor::vector({3.7})), one))[0] == 1.0);
  const EdgeIndex pair = EdgeIndex::from_targets(1, {0, 0});
  const Tensor eq = t.value(ad::segment_softmax(t, t.constant(Tensor::vector({0.4, 0.4})), pair));
  CHECK(eq[0] == 0.5);
  CHECK(eq[1] == 0.5);
  const Tensor ln2 = t.value(ad::segment_softmax(t, t.constant(Tensor::vector({std::log(2.0), 0.0})), pair));
  CHECK(ln2[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(ln2[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  // Sums to 1 per segment and head; shift invariant; stable for huge scores.
  std::mt19937_64 rng(8);
  const EdgeIndex edges = two_segment_edges();
  Tensor scores = random_matrix(6, 3, rng, -50, 50);
  const Tensor a = t.value(ad::segment_softmax(t, t.constant(scores), edges));
  for (std::size_t node = 0; node < 3; ++node) {
    for (std::size_t k = 0; k < 3; ++k) {
      double s = 0.0;
      for (std::size_t e = edges.offsets[node]; e < edges.offsets[node + 1]; ++e) s += a(e, k);
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
  }
  Tensor shifted = scores;
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t e = 2; e < 5; ++e) shifted(e, k) += 1e5;
  }
  CHECK(test::max_abs_diff(t.value(ad::segment_softmax(t, t.constant(shifted), edges)), a) < 1e-12);

  Param s("s", random_matrix(6, 2, rng));
  CHECK(check([&](Tape& t, auto v) { return ad::segment_softmax(t, v[0], edges); }, {&s}) < 1e-6);

  const EdgeIndex gap = EdgeIndex::from_targets(3, {0, 2});
  CHECK(error_code_of([&] { ad::segment_softmax(t, t.constant(Tensor::vector({1, 2})), gap); }) ==
        ErrorCode::empty_segment);
}

TEST_CASE("scatter weighted sum") {
  Tape t(false);
  const EdgeIndex one = EdgeIndex::from_targets(2, {1});
  const Tensor copy = t.value(ad::scatter_weighted_sum(t, t.constant(Tensor::matrix(1, 3, {1, 2, 3})),
                                                       t.constant(Tensor::vector({1.0})), one));
  CHECK(copy == Tensor::matrix(2, 3, {0, 0, 0, 1, 2, 3}));
  const EdgeIndex pair = EdgeIndex::from_targets(1, {0, 0});
  const Tensor cancel = t.value(ad::scatter_weighted_sum(t, t.constant(Tensor::matrix(2, 2, {0.3, -2, -0.3, 2})),
                                                         t.constant(Tensor::vector({0.5, 0.5})), pair));
  CHECK(cancel[0] == 0.0);
  CHECK(cancel[1] == 0.0);

  std::mt19937_64 rng(5);
  const EdgeIndex edges = two_segment_edges();
  Param values("values", random_matrix(6, 4, rng)), weights("weights", random_matrix(6, 1, rng).reshaped({6}));
  CHECK(check([&](Tape& t, auto v) { return ad::scatter_weighted_sum(t, v[0], v[1], edges); }, {&values, &weights}) <
        1e-6);
}

TEST_CASE("multihead aggregation matches per-head scatter") {
  std::mt19937_64 rng(6);
  const EdgeIndex edges = two_segment_edges();
  const std::size_t heads = 2, f = 3;
  const Tensor nodes = random_matrix(3, heads * f, rng);
  const Tensor w = random_matrix(6, heads, rng);
  Tape t(false);
  const Tensor out = t.value(ad::multihead_aggregate(t, t.constant(nodes), t.constant(w), edges, heads));
  for (std::size_t node = 0; node < 3; ++node) {
    for (std::size_t k = 0; k < heads; ++k) {
      for (std::size_t c = 0; c < f; ++c) {
        double s = 0.0;
        for (std::size_t e = edges.offsets[node]; e < edges.offsets[node + 1]; ++e) {
          s += w(e, k) * nodes(edges.source[e], k * f + c);
        }
        CHECK(out(node, k * f + c) == doctest::Approx(s).epsilon(1e-14));
      }
    }
  }
  Param pn("nodes", nodes), pw("w", w);
  CHECK(check([&](Tape& t, auto v) { return ad::multihead_aggregate(t, v[0], v[1], edges, heads); }, {&pn, &pw}) <
        1e-6);
}

TEST_CASE("attention score kernels") {
  std::mt19937_64 rng(12);
  const EdgeIndex edges = two_segment_edges();
  const std::size_t heads = 2, f = 3;
  Param src("src", random_matrix(3, heads * f, rng)), dst("dst", random_matrix(3, heads * f, rng)),
      att("att", random_matrix(heads, f, rng));
  Tape t(false);
  const Tensor e = t.value(ad::gatv2_scores(t, t.constant(src.value), t.constant(dst.value), t.constant(att.value),
                                            edges, heads));
  for (std::size_t i = 0; i < edges.num_edges(); ++i) {
    for (std::size_t k = 0; k < heads; ++k) {
      double s = 0.0;
      for (std::size_t c = 0; c < f; ++c) {
        const double z = src.value(edges.source[i], k * f + c) + dst.value(edges.target[i], k * f + c);
        s += att.value(k, c) * (z > 0 ? z : 0.2 * z);
      }
      CHECK(e(i, k) == doctest::Approx(s).epsilon(1e-13));
    }
  }
  CHECK(check([&](Tape& t, auto v) { return ad::gatv2_scores(t, v[0], v[1], v[2], edges, heads); },
              {&src, &dst, &att}) < 1e-6);

  Param proj("proj", random_matrix(3, heads * f, rng)), ad_("att_dst", random_matrix(heads, f, rng)),
      as("att_src", random_matrix(heads, f, rng));
  CHECK(check([&](Tape& t, auto v) { return ad::static_gat_scores(t, v[0], v[1], v[2], edges, heads); },
              {&proj, &ad_, &as}) < 1e-6);
}

TEST_CASE("head max pool") {
  Tape t(false);
  // Node with heads [1, 5] and [3, 2] (K = 2, F = 2).
  const Tensor pooled = t.value(ad::head_max_pool(t, t.constant(Tensor::matrix(1, 4, {1, 5, 3, 2})), 2));
  CHECK(pooled == Tensor::matrix(1, 2, {3, 5}));
  const Tensor x = Tensor::matrix(2, 2, {1, 2, 3, 4});
  CHECK(t.value(ad::head_max_pool(t, t.constant(x), 1)) == x);

  // Ties route the gradient to the lowest head.
  Tape g;
  Param tie("tie", Tensor::matrix(1, 2, {7, 7}));
  tie.zero_grad();
  g.backward(ad::sum(g, ad::head_max_pool(g, g.param(tie), 2)));
  CHECK(tie.grad[0] == 1.0);
  CHECK(tie.grad[1] == 0.0);

  std::mt19937_64 rng(2);
  Param p("x", random_matrix(4, 3 * 5, rng));
  CHECK(check([](Tape& t, auto v) { return ad::head_max_pool(t, v[0], 3); }, {&p}) < 1e-6);
  CHECK(check([](Tape& t, auto v) { return ad::head_mean_pool(t, v[0], 3); }, {&p}) < 1e-6);
}

TEST_CASE("dropout") {
  std::mt19937_64 rng(1);
  Tape t(false);
  const Tensor x = random_matrix(10, 10, rng);
  CHECK(t.value(ad::dropout(t, t.constant(x), 0.0, true, rng)) == x);
  CHECK(t.value(ad::dropout(t, t.constant(x), 0.7, false, rng)) == x);

  const Tensor ones({100000}, 1.0);
  const Tensor d = t.value(ad::dropout(t, t.constant(ones), 0.3, true, rng));
  std::size_t zeros = 0;
  for (double v : d.storage()) {
    if (v == 0.0) {
      ++zeros;
    } else {
      CHECK(v == doctest::Approx(1.0 / 0.7).epsilon(1e-15));
    }
  }
  CHECK(std::abs(zeros / 1e5 - 0.3) < 0.01);
}

TEST_CASE("softmax cross entropy") {
  Tape t(false);
  const std::vector<int> label0 = {0};
  CHECK(t.value(ad::softmax_cross_entropy(t, t.constant(Tensor({1, 5})), label0))[0] ==
        doctest::Approx(std::log(5.0)).epsilon(1e-15));
  CHECK(t.value(ad::softmax_cross_entropy(t, t.constant(Tensor::matrix(1, 5, {30, 0, 0, 0, 0})), label0))[0] <
        1e-9);
  const std::vector<int> bad = {5};
  CHECK(error_code_of([&] { ad::softmax_cross_entropy(t, t.constant(Tensor({1, 5})), bad); }) ==
        ErrorCode::label_out_of_range);

  std::mt19937_64 rng(4);
  Param logits("logits", random_matrix(2, 5, rng, -3, 3));
  const std::vector<int> labels = {3, 1};
  auto fn = [&](Tape& t, std::span<const Var> p) { return ad::softmax_cross_entropy(t, p[0], labels); };
  std::vector<Param*> ps = {&logits};
  CHECK(grad_check(fn, ps).max_rel_error < 1e-6);

  // Analytic gradient (softmax - onehot) / B.
  Tape g;
  logits.zero_grad();
  g.backward(ad::softmax_cross_entropy(g, g.param(logits), labels));
  for (std::size_t r = 0; r < 2; ++r) {
    double z = 0.0;
    for (std::size_t c = 0; c < 5; ++c) z += std::exp(logits.value(r, c));
    for (std::size_t c = 0; c < 5; ++c) {
      const double expected = (std::exp(logits.value(r, c)) / z - (static_cast<int>(c) == labels[r])) / 2.0;
      CHECK(logits.grad(r, c) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("gather, overwrite and segment mean") {
  std::mt19937_64 rng(7);
  Param x("x", random_matrix(5, 3, rng)), row("row", random_matrix(1, 3, rng));
  const std::vector<std::int32_t> rows = {4, 1, 1};
  const std::vector<std::int32_t> cls = {2, 4};
  const std::vector<std::int32_t> group = {0, 0, 1, 1, 1};
  CHECK(check([&](Tape& t, auto v) { return ad::gather_rows(t, v[0], rows); }, {&x}) < 1e-6);
  CHECK(check([&](Tape& t, auto v) { return ad::overwrite_rows(t, v[0], v[1], cls); }, {&x, &row}) < 1e-6);
  CHECK(check([&](Tape& t, auto v) { return ad::segment_mean(t, v[0], group, 3); }, {&x}) < 1e-6);

  Tape t(false);
  const Tensor m = t.value(ad::segment_mean(t, t.constant(x.value), group, 3));
  CHECK(m(0, 1) == doctest::Approx((x.value(0, 1) + x.value(1, 1)) / 2));
  CHECK(m(2, 0) == 0.0);
}

TEST_CASE("grad check harness") {
  Param p("p", Tensor::vector({0.3, -0.2}));
  auto constant = [](Tape& t, std::span<const Var>) { return t.constant(Tensor::scalar(4.0)); };
  std::vector<Param*> ps = {&p};
  const auto r = grad_check(constant, ps);
  CHECK(r.max_rel_error == 0.0);
  CHECK(r.analytic == 0.0);
}

TEST_CASE("non-finite values trip an error") {
  Tape t(false);
  Tensor bad = Tensor::vector({1.0, std::nan("")});
  CHECK(error_code_of([&] { t.record(bad, {}, {}); }) == ErrorCode::non_finite);
  Var big = t.constant(Tensor::vector({1e6, -1e6}));
  CHECK(t.value(ad::gelu(t, big)).all_finite());
  const EdgeIndex pair = EdgeIndex::from_targets(1, {0, 0});
  CHECK(t.value(ad::segment_softmax(t, big, pair)).all_finite());
}

}  // TEST_SUITE
