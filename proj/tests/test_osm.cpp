#include <chrono>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "nosm/error.hpp"
#include "nosm/osm.hpp"

using namespace nosm;
using namespace nosm::osm;
using corpus::Sentence;
using corpus::Vocabulary;

namespace {

Vocabulary vocab_of(std::vector<std::string> words) {
  std::vector<std::pair<std::string, std::size_t>> counts;
  for (auto& w : words) counts.emplace_back(w, 1);
  return Vocabulary::from_counts(counts, 1);
}

ModelConfig tiny_config(encoders::EncoderKind kind) {
  ModelConfig c;
  c.encoder.kind = kind;
  c.encoder.source_dim = 5;
  c.encoder.unit_dim = kind == encoders::EncoderKind::bag ? 5 : 3;
  c.encoder.lstm_hidden = 3;
  c.encoder.kernel_widths = {1, 2};
  c.osm.target_dim = 4;
  c.osm.hidden = 6;
  return c;
}

Model tiny_model(encoders::EncoderKind kind, std::uint64_t seed = 3) {
  std::vector<std::string> src = {"ab", "ba", "abc", "c"};
  auto lex = corpus::SegmentationLexicon::characters(src);
  Model m(tiny_config(kind), vocab_of(src), vocab_of({"x", "y", "z"}), std::move(lex));
  m.initialize(seed);
  return m;
}

std::vector<Example> tiny_examples(const Model& m) {
  std::vector<Example> out;
  out.push_back(m.make_example({"ab", "c"}, {"x", "y", "z"}, {1, 0, 2}));
  out.push_back(m.make_example({"ba"}, {"y"}, {1}));
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

std::vector<double> row_of(const num::Array& a, std::size_t r) {
  auto d = a.row(r);
  return {d.begin(), d.end()};
}

double log_prob(const std::vector<double>& logits, std::size_t index, int skip = -1) {
  double mx = -1e300;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (static_cast<int>(i) != skip) mx = std::max(mx, logits[i]);
  }
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (static_cast<int>(i) != skip) z += std::exp(logits[i] - mx);
  }
  return logits[index] - mx - std::log(z);
}

// Straight-line recurrence over raw parameter values, word encoder only.
SequenceScore naive_score(const Model& m, const Example& ex) {
  const auto& p = m.params();
  const std::size_t s = ex.source.size();
  const std::size_t h_dim = p.initial_state->value.size();
  std::vector<std::vector<double>> rs;
  rs.emplace_back(p.null_row->value.data().begin(), p.null_row->value.data().end());
  const auto& table = m.store().get("src.word").value;
  for (const auto& w : ex.source) rs.push_back(row_of(table, static_cast<std::size_t>(w.word_id)));
  rs.emplace_back(p.finish_row->value.data().begin(), p.finish_row->value.data().end());

  const auto& emb = p.target_embedding->value;
  auto affine = [](const num::Array& w, std::span<const double> x, const num::Array& b) {
    std::vector<double> y(w.rows());
    for (std::size_t i = 0; i < w.rows(); ++i) y[i] = dot(w.row(i), x) + b.data()[i];
    return y;
  };
  auto project = [](const num::Array& w, std::span<const double> x) {
    std::vector<double> y(w.rows());
    for (std::size_t i = 0; i < w.rows(); ++i) y[i] = dot(w.row(i), x);
    return y;
  };

  std::vector<double> h(p.initial_state->value.data().begin(), p.initial_state->value.data().end());
  int prev_word = Vocabulary::kStart;
  int last = 0;
  SequenceScore sc;
  for (const auto& op : ex.ops.steps) {
    auto e = row_of(emb, static_cast<std::size_t>(prev_word));
    auto q1 = project(p.source_hidden->value, h);
    auto q2 = project(p.source_target->value, e);
    std::vector<double> logits(s + 2);
    for (std::size_t k = 0; k < s + 2; ++k) {
      double v = 0.0;
      for (std::size_t i = 0; i < q1.size(); ++i) v += rs[k][i] * (q1[i] + q2[i]);
      const auto& bf = p.jump_bias->value.data();
      if (k == 0) {
        v += bf[4];
      } else if (k == s + 1) {
        v += bf[5];
      } else {
        int d = static_cast<int>(k) - last;
        int cls = d == 0 ? 0 : d == 1 ? 1 : d >= 2 ? 2 : 3;
        v += bf[cls] + bf[6] * d + bf[7] * d / static_cast<double>(s);
      }
      logits[k] = v;
    }
    sc.log_align += log_prob(logits, static_cast<std::size_t>(op.jump));
    ++sc.align_decisions;
    if (op.jump == static_cast<int>(s) + 1) break;

    std::vector<double> in = h;
    in.insert(in.end(), e.begin(), e.end());
    in.insert(in.end(), rs[op.jump].begin(), rs[op.jump].end());
    auto pre = affine(p.state_w->value, in, p.state_b->value);
    for (std::size_t i = 0; i < h_dim; ++i) h[i] = std::tanh(pre[i]);
    if (op.jump >= 1) last = op.jump;

    auto wl = affine(p.output_w->value, h, p.output_b->value);
    sc.log_word += log_prob(wl, static_cast<std::size_t>(op.word), Vocabulary::kStart);
    ++sc.word_decisions;
    prev_word = op.word;
  }
  return sc;
}

}  // namespace

TEST_CASE("jump features") {
  auto phi = jump_features(2, 5);
  CHECK(phi.rows() == 7);
  CHECK(phi.cols() == kJumpFeatures);
  CHECK(row_of(phi, 3) == std::vector<double>{0, 1, 0, 0, 0, 0, 1, 0.2});
  CHECK(row_of(phi, 2) == std::vector<double>{1, 0, 0, 0, 0, 0, 0, 0});
  CHECK(row_of(phi, 1) == std::vector<double>{0, 0, 0, 1, 0, 0, -1, -0.2});
  CHECK(row_of(phi, 5) == std::vector<double>{0, 0, 1, 0, 0, 0, 3, 0.6});
  CHECK(row_of(phi, 0) == std::vector<double>{0, 0, 0, 0, 1, 0, 0, 0});
  CHECK(row_of(phi, 6) == std::vector<double>{0, 0, 0, 0, 0, 1, 0, 0});

  auto first = jump_features(0, 3);
  CHECK(row_of(first, 1) == std::vector<double>{0, 1, 0, 0, 0, 0, 1, 1.0 / 3});

  CHECK_THROWS_AS(jump_features(4, 3), Error);
  CHECK_THROWS_AS(jump_features(-1, 3), Error);
}

TEST_CASE("each row of the feature matrix has exactly one class bit") {
  for (std::size_t s = 1; s <= 9; ++s) {
    for (int last = 0; last <= static_cast<int>(s); ++last) {
      auto phi = jump_features(last, s);
      for (std::size_t r = 0; r < s + 2; ++r) {
        double bits = 0.0;
        for (std::size_t c = 0; c < 6; ++c) bits += phi.at(r, c);
        CHECK(bits == 1.0);
      }
    }
  }
}

TEST_CASE("all-zero parameters give uniform decisions") {
  std::vector<std::string> src = {"w"};
  auto lex = corpus::SegmentationLexicon::characters(src);
  ModelConfig c = tiny_config(encoders::EncoderKind::word);
  Model m(c, vocab_of(src), vocab_of({"a", "b"}), std::move(lex));
  CHECK(m.target_vocab().size() == 4);
  for (auto* p : m.store().all()) p->value.fill(0.0);

  auto ex = m.make_example({"w"}, {"a"}, {1});
  auto sc = m.sequence_score(ex);
  CHECK(std::abs(sc.log_align - 2 * std::log(1.0 / 3)) <= 1e-12);
  CHECK(std::abs(sc.log_word - std::log(1.0 / 3)) <= 1e-12);
  CHECK(sc.align_decisions == 2);
  CHECK(sc.word_decisions == 1);

  // Longer sentences: every alignment decision has |s|+2 choices.
  std::vector<std::string> src3 = {"u", "v", "w"};
  Model m3(c, vocab_of(src3), vocab_of({"a", "b"}),
           corpus::SegmentationLexicon::characters(src3));
  for (auto* p : m3.store().all()) p->value.fill(0.0);
  auto ex3 = m3.make_example({"u", "v", "w"}, {"a", "b"}, {3, 0});
  auto sc3 = m3.sequence_score(ex3);
  CHECK(sc3.log_align == doctest::Approx(3 * std::log(1.0 / 5)).epsilon(1e-12));
  CHECK(sc3.log_word == doctest::Approx(2 * std::log(1.0 / 3)).epsilon(1e-12));
}

TEST_CASE("score matches a naive recurrence") {
  Model m = tiny_model(encoders::EncoderKind::word, 11);
  // Non-trivial biases so every term contributes.
  num::Rng rng(5);
  rng.fill_uniform(m.store().get("osm.b_f").value, -0.5, 0.5);
  rng.fill_uniform(m.store().get("osm.output.b").value, -0.5, 0.5);
  rng.fill_uniform(m.store().get("osm.state.b").value, -0.5, 0.5);
  for (const auto& ex : tiny_examples(m)) {
    auto got = m.sequence_score(ex);
    auto want = naive_score(m, ex);
    CHECK(got.log_align == doctest::Approx(want.log_align).epsilon(1e-12));
    CHECK(got.log_word == doctest::Approx(want.log_word).epsilon(1e-12));
    CHECK(got.align_decisions == want.align_decisions);
    CHECK(got.word_decisions == want.word_decisions);
  }
  auto ex = m.make_example({"ab", "c", "ba"}, {"z", "x", "x", "y"}, {3, 1, 0, 3});
  CHECK(m.sequence_score(ex).total() == doctest::Approx(naive_score(m, ex).total()).epsilon(1e-12));
}

TEST_CASE("distributions are normalized and START is never generated") {
  Model m = tiny_model(encoders::EncoderKind::cnn);
  num::Graph g;
  auto words = m.encode_source({"ab", "c", "zz"});
  auto rs = m.source_matrix(g, words);
  auto st = initial_state(g, m.params());
  auto phi = jump_features(0, 3);
  auto a = alignment_distribution(m.params(), st.h, st.last_word, rs, phi);
  CHECK(a.size() == 5);
  CHECK(std::accumulate(a.begin(), a.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  auto next = state_update(m.params(), st, num::pick_row(rs, 2), 2, 3);
  CHECK(next.last_source == 2);
  auto w = word_distribution(m.params(), next.h);
  CHECK(w.size() == m.target_vocab().size());
  CHECK(w[Vocabulary::kStart] == 0.0);
  CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));

  auto null_step = state_update(m.params(), next, num::pick_row(rs, 0), 0, 3);
  CHECK(null_step.last_source == 2);
}

TEST_CASE("duplicate source tokens get equal alignment probability") {
  Model m = tiny_model(encoders::EncoderKind::bilstm);
  num::Graph g;
  auto words = m.encode_source({"ab", "ab"});
  auto rs = m.source_matrix(g, words);
  auto st = initial_state(g, m.params());
  // The two copies differ in jump features only, and b_f starts at zero.
  auto a = alignment_distribution(m.params(), st.h, st.last_word, rs, jump_features(0, 2));
  CHECK(a[1] == doctest::Approx(a[2]).epsilon(1e-12));
}

TEST_CASE("model gradients pass a finite-difference check") {
  for (auto kind : {encoders::EncoderKind::word, encoders::EncoderKind::bag,
                    encoders::EncoderKind::bilstm, encoders::EncoderKind::cnn}) {
    CAPTURE(encoders::kind_name(kind));
    Model m = tiny_model(kind, 21);
    // Wider than the training init so no gradient sits at roundoff level.
    num::Rng rng(8);
    for (auto* p : m.store().all()) rng.fill_uniform(p->value, -0.5, 0.5);
    auto examples = tiny_examples(m);
    auto loss = [&](num::Graph& g) {
      std::vector<num::Var> parts;
      for (const auto& ex : examples) parts.push_back(m.loss(g, ex));
      return num::sum(parts);
    };
    auto params = m.store().all();
    auto res = num::grad_check(loss, params, 1e-4, 1e-3);
    INFO(res.worst_param, " ", res.worst_index, " a=", res.analytic, " n=", res.numeric);
    CHECK(res.passed);
    CHECK(res.max_rel_error <= 1e-3);
  }
}

TEST_CASE("inconsistent examples are rejected") {
  Model m = tiny_model(encoders::EncoderKind::word);
  auto ex = m.make_example({"ab"}, {"x"}, {1});
  ex.ops.steps.front().word = 3;
  num::Graph g;
  CHECK_THROWS_AS(m.score_graph(g, ex), Error);
  CHECK_THROWS_AS(m.make_example({"ab"}, {"x"}, {2}), Error);
  CHECK_THROWS_AS(m.make_example({"ab"}, {"x", "y"}, {1}), Error);
}

TEST_CASE("a START token in the target is read as unknown") {
  Model m = tiny_model(encoders::EncoderKind::word);
  auto ex = m.make_example({"ab"}, {"<s>"}, {1});
  CHECK(ex.pair.target[0] == Vocabulary::kUnk);
}

TEST_CASE("early stopping") {
  EarlyStopping es(1);
  CHECK(es.update(-10).improved);
  CHECK(es.update(-9).improved);
  auto d = es.update(-9.5);
  CHECK_FALSE(d.improved);
  CHECK(d.stop);
  CHECK(*es.best() == -9);

  EarlyStopping patient(3);
  patient.update(-5);
  CHECK_FALSE(patient.update(-6).stop);
  CHECK_FALSE(patient.update(-5).stop);
  CHECK(patient.update(-7).stop);
}

TEST_CASE("training with zero learning rate stops after the second epoch") {
  Model m = tiny_model(encoders::EncoderKind::word);
  auto examples = tiny_examples(m);
  auto before = m.store().snapshot();
  TrainConfig tc;
  tc.learning_rate = 0.0;
  tc.seed = 4;
  auto res = train(m, examples, examples, tc);
  CHECK(res.log.size() == 2);
  CHECK(res.best_epoch == 1);
  CHECK(m.store().snapshot() == before);
}

TEST_CASE("a dev curve of -10, -9, -9.5 stops after epoch 3 with epoch-2 parameters") {
  Model m = tiny_model(encoders::EncoderKind::word);
  auto examples = tiny_examples(m);
  const std::vector<double> curve = {-10, -9, -9.5, -8};
  std::size_t calls = 0;
  std::vector<std::vector<num::Array>> seen;
  auto evaluate = [&](const Model& model) {
    seen.push_back(model.store().snapshot());
    return curve.at(calls++);
  };
  TrainConfig tc;
  tc.seed = 2;
  auto res = train_with(m, examples, evaluate, tc);
  CHECK(calls == 3);
  CHECK(res.log.size() == 3);
  CHECK(res.best_epoch == 2);
  CHECK(res.best_dev_log_likelihood == -9);
  CHECK(m.store().snapshot() == seen[1]);
  CHECK(m.store().snapshot() != seen[2]);
}

TEST_CASE("training raises the likelihood and is deterministic") {
  auto run = [](std::uint64_t seed) {
    Model m = tiny_model(encoders::EncoderKind::bag);
    auto examples = tiny_examples(m);
    const double start = corpus_log_likelihood(m, examples);
    TrainConfig tc;
    tc.seed = seed;
    tc.max_epochs = 30;
    auto res = train(m, examples, examples, tc);
    CHECK(res.best_dev_log_likelihood > start);
    CHECK(corpus_log_likelihood(m, examples) == res.best_dev_log_likelihood);
    return m.store().snapshot();
  };
  CHECK(run(9) == run(9));
}

TEST_CASE("training rejects empty sets and bad rates") {
  Model m = tiny_model(encoders::EncoderKind::word);
  auto examples = tiny_examples(m);
  TrainConfig tc;
  CHECK_THROWS_AS(train(m, {}, examples, tc), Error);
  CHECK_THROWS_AS(train(m, examples, {}, tc), Error);
  tc.learning_rate = -1;
  CHECK_THROWS_AS(train(m, examples, examples, tc), Error);
}

TEST_CASE("n-best scoring") {
  Model m = tiny_model(encoders::EncoderKind::cnn);
  std::vector<Candidate> cands = {
      {{"x", "y"}, {1, 2}},
      {{"x", "y"}, {1, 2}},
      {{"x"}, {7}},
      {{"q", "z"}, {0, 1}},
  };
  auto scores = score_nbest(m, {"ab", "c"}, cands);
  REQUIRE(scores.size() == 4);
  REQUIRE(scores[0].score);
  REQUIRE(scores[1].score);
  CHECK(scores[0].score->log_align == scores[1].score->log_align);
  CHECK(scores[0].score->log_word == scores[1].score->log_word);
  CHECK_FALSE(scores[2].score);
  CHECK_FALSE(scores[2].error.empty());
  REQUIRE(scores[3].score);
  auto direct = m.sequence_score(m.make_example({"ab", "c"}, {"x", "y"}, {1, 2}));
  CHECK(direct.total() == scores[0].score->total());
}
