#include <cmath>
#include <vector>

#include "doctest.h"
#include "nosm/error.hpp"
#include "nosm/numkit.hpp"

using namespace nosm;
using namespace nosm::num;

namespace {

Var sum_all(Var v) {
  // Sum of entries expressed with primitives: ones^T v.
  Graph& g = v.graph();
  Array ones({1, v.size()}, 1.0);
  return matvec(g.constant(std::move(ones)), reshape(v, {v.size()}));
}

Parameter random_param(Rng& rng, const std::string& name, Shape shape) {
  Parameter p(name, Array(std::move(shape)));
  rng.fill_uniform(p.value, -1.0, 1.0);
  return p;
}

}  // namespace

TEST_CASE("affine: identity and hand arithmetic") {
  Graph g;
  Var x = g.constant(Array::vector({3, -1}));
  Var eye = g.constant(Array::matrix(2, 2, {1, 0, 0, 1}));
  Var zero = g.constant(Array::vector({0, 0}));
  CHECK(affine(x, eye, zero).value() == Array::vector({3, -1}));

  Var w = g.constant(Array::matrix(2, 2, {1, 2, 3, 4}));
  Var b = g.constant(Array::vector({0, 1}));
  Var ones = g.constant(Array::vector({1, 1}));
  CHECK(affine(ones, w, b).value() == Array::vector({3, 8}));
}

TEST_CASE("affine: dimension mismatch names both shapes") {
  Graph g;
  Var x = g.constant(Array::vector({1, 2, 3}));
  Var w = g.constant(Array::matrix(2, 2, {1, 2, 3, 4}));
  Var b = g.constant(Array::vector({0, 0}));
  try {
    affine(x, w, b);
    FAIL("expected shape error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::shape);
    std::string msg = e.what();
    CHECK(msg.find("[2x2]") != std::string::npos);
    CHECK(msg.find("[3]") != std::string::npos);
  }
}

TEST_CASE("affine: gradient wrt W matches finite differences") {
  Rng rng(7);
  Parameter w = random_param(rng, "w", {3, 4});
  Parameter b = random_param(rng, "b", {3});
  Array x({4});
  rng.fill_uniform(x, -1, 1);
  std::vector<Parameter*> ps{&w, &b};
  auto r = grad_check(
      [&](Graph& g) { return sum_all(affine(g.constant(x), g.param(w), g.param(b))); },
      ps, 1e-4, 1e-6);
  CHECK(r.max_rel_error <= 1e-6);
}

TEST_CASE("mlp_tanh examples") {
  Graph g;
  Var a = g.constant(Array::vector({1}));
  Var b = g.constant(Array::vector({2}));
  const Var inputs[] = {a, b};
  Var zero_w = g.constant(Array::matrix(1, 2, {0, 0}));
  CHECK(mlp_tanh(inputs, zero_w, g.constant(Array::vector({0.5}))).scalar() ==
        doctest::Approx(std::tanh(0.5)).epsilon(1e-15));
  Var w = g.constant(Array::matrix(1, 2, {1, 1}));
  CHECK(mlp_tanh(inputs, w, g.constant(Array::vector({0}))).scalar() ==
        doctest::Approx(std::tanh(3.0)).epsilon(1e-15));

  Rng rng(3);
  Array big_w({4, 2});
  // tanh rounds to exactly +-1 in double once |x| exceeds ~19.
  rng.fill_uniform(big_w, -5, 5);
  Var out = mlp_tanh(inputs, g.constant(big_w), g.constant(Array({4}, 0.0)));
  for (double v : out.value().data()) {
    CHECK(v > -1.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("softmax examples and invariants") {
  auto p = softmax(std::vector<double>{0, 0, 0, 0});
  for (double v : p) CHECK(v == doctest::Approx(0.25));
  auto q = softmax(std::vector<double>{std::log(2.0), 0});
  CHECK(q[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(q[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK_THROWS_AS(softmax(std::vector<double>{}), Error);

  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(1 + rng.below(9));
    for (double& x : v) x = rng.uniform(-30, 30);
    auto s = softmax(v);
    double total = 0;
    for (double x : s) {
      CHECK(x > 0.0);
      total += x;
    }
    CHECK(std::abs(total - 1.0) <= 1e-9);
    const double c = rng.uniform(-100, 100);
    std::vector<double> shifted = v;
    for (double& x : shifted) x += c;
    auto t = softmax(shifted);
    for (std::size_t i = 0; i < v.size(); ++i) {
      CHECK(t[i] == doctest::Approx(s[i]).epsilon(1e-9));
      for (std::size_t j = 0; j < v.size(); ++j) {
        if (v[i] < v[j]) CHECK(s[i] <= s[j]);
      }
    }
  }
}

TEST_CASE("log_softmax_at agrees with log of softmax and honours exclusion") {
  Graph g;
  Var l = g.constant(Array::vector({1.0, 2.0, -1.0, 0.5}));
  auto p = softmax(l.value().data());
  CHECK(log_softmax_at(l, 1).scalar() == doctest::Approx(std::log(p[1])));
  // Excluding entry 0 renormalises over the other three.
  auto q = softmax(std::vector<double>{2.0, -1.0, 0.5});
  CHECK(log_softmax_at(l, 3, 0).scalar() == doctest::Approx(std::log(q[2])));
  CHECK_THROWS_AS(log_softmax_at(l, 0, 0), Error);
}

TEST_CASE("lstm_step analytic cases") {
  Graph g;
  std::vector<Parameter> ps;
  ps.reserve(8);
  for (const char* n : {"wi", "bi", "wf", "bf", "wo", "bo", "wg", "bg"}) {
    bool is_w = n[0] == 'w';
    ps.emplace_back(n, is_w ? Array({1, 2}) : Array({1}));
  }
  LstmWeights w{&ps[0], &ps[1], &ps[2], &ps[3], &ps[4], &ps[5], &ps[6], &ps[7]};
  Var x = g.constant(Array::vector({0.3}));
  Var h = g.constant(Array::vector({0.0}));

  auto s0 = lstm_step(w, h, g.constant(Array::vector({0.0})), x);
  CHECK(s0.c.value()[0] == 0.0);
  CHECK(s0.h.value()[0] == 0.0);

  auto s1 = lstm_step(w, h, g.constant(Array::vector({2.0})), x);
  CHECK(s1.c.value()[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s1.h.value()[0] == doctest::Approx(0.5 * std::tanh(1.0)).epsilon(1e-15));

  CHECK_THROWS_AS(lstm_step(w, h, g.constant(Array::vector({0.0, 1.0})), x), Error);
}

TEST_CASE("lstm_step gradients match finite differences") {
  Rng rng(21);
  const std::size_t d = 3, e = 2;
  std::vector<Parameter> ps;
  ps.reserve(8);
  for (const char* n : {"wi", "bi", "wf", "bf", "wo", "bo", "wg", "bg"}) {
    bool is_w = n[0] == 'w';
    ps.push_back(random_param(rng, n, is_w ? Shape{d, e + d} : Shape{d}));
  }
  Parameter x = random_param(rng, "x", {e});
  Parameter h0 = random_param(rng, "h0", {d});
  Parameter c0 = random_param(rng, "c0", {d});
  LstmWeights w{&ps[0], &ps[1], &ps[2], &ps[3], &ps[4], &ps[5], &ps[6], &ps[7]};
  std::vector<Parameter*> all;
  for (auto& p : ps) all.push_back(&p);
  all.push_back(&x);
  all.push_back(&h0);
  all.push_back(&c0);
  auto r = grad_check(
      [&](Graph& g) {
        auto s = lstm_step(w, g.param(h0), g.param(c0), g.param(x));
        auto s2 = lstm_step(w, s.h, s.c, g.param(x));
        const Var parts[] = {s2.h, s2.c};
        return sum_all(concat(parts));
      },
      all, 1e-4, 1e-3);
  CHECK(r.passed);
  CHECK(r.max_rel_error <= 1e-3);
}

TEST_CASE("sgd_step") {
  Parameter p("p", Array::vector({1}));
  p.grad[0] = 2;
  std::vector<Parameter*> ps{&p};
  sgd_step(ps, 0.5);
  CHECK(p.value[0] == 0.0);
  CHECK(p.grad[0] == 0.0);

  p.grad[0] = 3;
  sgd_step(ps, 0.0);
  CHECK(p.value[0] == 0.0);

  CHECK_THROWS_AS(sgd_step(ps, -0.1), Error);

  // Two steps with g equal one step with 2g.
  Parameter a("a", Array::vector({1.5, -2}));
  Parameter b("b", Array::vector({1.5, -2}));
  std::vector<Parameter*> pa{&a}, pb{&b};
  for (int i = 0; i < 2; ++i) {
    a.grad = Array::vector({0.25, -0.5});
    sgd_step(pa, 0.1);
  }
  b.grad = Array::vector({0.5, -1.0});
  sgd_step(pb, 0.1);
  CHECK(a.value[0] == doctest::Approx(b.value[0]).epsilon(1e-15));
  CHECK(a.value[1] == doctest::Approx(b.value[1]).epsilon(1e-15));
}

TEST_CASE("grad_check: quadratic, softmax classifier, planted fault") {
  Parameter theta("theta", Array::vector({1, 2}));
  std::vector<Parameter*> ps{&theta};
  auto quad = [&](Graph& g) {
    Var t = g.param(theta);
    return sum_all(mul(t, t));
  };
  auto r = grad_check(quad, ps, 1e-4, 1e-8);
  CHECK(r.max_rel_error <= 1e-8);

  Rng rng(5);
  Parameter w = random_param(rng, "w", {3, 4});
  Parameter b = random_param(rng, "b", {3});
  Array x({4});
  rng.fill_uniform(x, -1, 1);
  std::vector<Parameter*> wb{&w, &b};
  auto ce = grad_check(
      [&](Graph& g) {
        return scale(log_softmax_at(affine(g.constant(x), g.param(w), g.param(b)), 2), -1.0);
      },
      wb, 1e-4, 1e-5);
  CHECK(ce.max_rel_error <= 1e-5);

  // Custom node whose backward is doubled.
  auto corrupted = [&](Graph& g) {
    Var t = g.param(theta);
    const Array& tv = t.value();
    double s = 0;
    for (double v : tv.data()) s += v * v;
    return g.custom(Array::vector({s}), [t](Graph& gg, const Array& go) {
      const Array& tv = gg.value(t);
      for (std::size_t i = 0; i < tv.size(); ++i) gg.grad(t)[i] += go[0] * 4.0 * tv[i];
    });
  };
  auto bad = grad_check(corrupted, ps, 1e-4, 1e-3);
  CHECK_FALSE(bad.passed);
  CHECK(bad.max_rel_error == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("grad_check rejects non-deterministic losses and bad steps") {
  Parameter theta("theta", Array::vector({1}));
  std::vector<Parameter*> ps{&theta};
  int calls = 0;
  auto flaky = [&](Graph& g) {
    ++calls;
    return g.constant(Array::vector({static_cast<double>(calls)}));
  };
  CHECK_THROWS_AS(grad_check(flaky, ps, 1e-4, 1e-3), Error);
  auto fine = [&](Graph& g) { return g.param(theta); };
  CHECK_THROWS_AS(grad_check(fine, ps, 0.0, 1e-3), Error);
}

TEST_CASE("conv_feature_map shapes and values") {
  Graph g;
  CHECK(conv_feature_map(g.constant(Array({9, 4}, 0.1)), g.constant(Array({3, 4}, 0.2)),
                         g.constant(Array::vector({0})))
            .size() == 7);

  Var zero = conv_feature_map(g.constant(Array({5, 2}, 1.0)), g.constant(Array({2, 2}, 0.0)),
                              g.constant(Array::vector({0.3})));
  CHECK(zero.size() == 4);
  for (double v : zero.value().data()) CHECK(v == doctest::Approx(std::tanh(0.3)));

  Var fm = conv_feature_map(g.constant(Array({3, 1}, std::vector<double>{1, 2, 3})),
                            g.constant(Array({2, 1}, std::vector<double>{1, 1})),
                            g.constant(Array::vector({0})));
  REQUIRE(fm.size() == 2);
  CHECK(fm.value()[0] == doctest::Approx(std::tanh(3.0)));
  CHECK(fm.value()[1] == doctest::Approx(std::tanh(5.0)));

  CHECK_THROWS_AS(conv_valid(g.constant(Array({2, 1}, 1.0)), g.constant(Array({1, 3, 1}, 1.0)),
                             g.constant(Array::vector({0}))),
                  Error);
}

TEST_CASE("every primitive passes randomized gradient checks") {
  // 20 trials per primitive, random shapes up to 10 per dimension.
  Rng rng(1234);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + rng.below(10), n = 1 + rng.below(10);
    Parameter w = random_param(rng, "w", {m, n});
    Parameter b = random_param(rng, "b", {m});
    Parameter x = random_param(rng, "x", {n});
    Parameter y = random_param(rng, "y", {m});
    std::vector<Parameter*> ps{&w, &b, &x, &y};
    std::vector<Array> weights;
    for (int k = 0; k < 4; ++k) {
      Array c({m});
      rng.fill_uniform(c, -1, 1);
      weights.push_back(c);
    }
    auto project = [&](Graph& g, Var v, int k) {
      Array row({1, m}, std::vector<double>(weights[k].data().begin(), weights[k].data().end()));
      return matvec(g.constant(std::move(row)), v);
    };
    auto loss = [&](Graph& g) {
      Var a = affine(g.param(x), g.param(w), g.param(b));
      Var t = tanh(a);
      Var s = sigmoid(a);
      Var p = mul(t, one_minus(s));
      Var q = maximum(add(p, g.param(y)), sub(g.param(y), scale(s, 0.5)));
      const Var parts[] = {q, t};
      Var cat = concat(parts);
      Var mx = max_reduce(cat);
      Var lsm = log_softmax_at(a, m - 1);
      const Var terms[] = {project(g, q, 0), project(g, t, 1), mx, lsm};
      return sum(terms);
    };
    auto r = grad_check(loss, ps, 1e-4, 1e-3);
    worst = std::max(worst, r.max_rel_error);
  }
  CHECK(worst <= 1e-3);

  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t e = 1 + rng.below(6), n = 1 + rng.below(9);
    const std::size_t k = 1 + rng.below(n), f = 1 + rng.below(4);
    Parameter u = random_param(rng, "u", {n, e});
    Parameter q = random_param(rng, "q", {f, k, e});
    Parameter bq = random_param(rng, "bq", {f});
    std::vector<Parameter*> ps{&u, &q, &bq};
    auto loss = [&](Graph& g) {
      Var maps = tanh(conv_valid(g.param(u), g.param(q), g.param(bq)));
      Var pooled = row_max(maps);
      std::vector<Var> rows(2, pooled);
      Var st = stack_rows(rows);
      return sum_all(reshape(st, {st.size()}));
    };
    auto r = grad_check(loss, ps, 1e-4, 1e-3);
    CHECK(r.max_rel_error <= 1e-3);
  }
}

TEST_CASE("forward passes are deterministic") {
  Rng a(99), b(99);
  Array x({5}), y({5});
  a.fill_uniform(x, -1, 1);
  b.fill_uniform(y, -1, 1);
  CHECK(x == y);
  Graph g1, g2;
  Var r1 = tanh(matvec(g1.constant(Array({5, 5}, 0.3)), g1.constant(x)));
  Var r2 = tanh(matvec(g2.constant(Array({5, 5}, 0.3)), g2.constant(y)));
  CHECK(r1.value() == r2.value());
}

TEST_CASE("parameter store") {
  ParameterStore store;
  store.add("a", {2});
  CHECK_THROWS_AS(store.add("a", {3}), Error);
  CHECK(store.find("b") == nullptr);
  store.get("a").value[1] = 4;
  auto snap = store.snapshot();
  store.get("a").value[1] = 5;
  store.restore(snap);
  CHECK(store.get("a").value[1] == 4);
}

TEST_CASE("rng below and shuffle stay in range and are reproducible") {
  Rng a(1), b(1);
  std::vector<int> va{0, 1, 2, 3, 4, 5}, vb = va;
  a.shuffle(std::span<int>(va));
  b.shuffle(std::span<int>(vb));
  CHECK(va == vb);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.below(7) < 7);
    double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}
