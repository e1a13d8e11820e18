#include "nosm/osm.hpp"

#include <cmath>
#include <numeric>

#include "nosm/error.hpp"

namespace nosm::osm {

using num::Array;
using num::Graph;
using num::Parameter;
using num::Var;

namespace {

constexpr double kInitRange = 0.08;

}  // namespace

Array jump_features(int last_source, std::size_t source_length) {
  const int s = static_cast<int>(source_length);
  if (last_source < 0 || last_source > s) {
    fail(ErrorKind::argument, "last source position " + std::to_string(last_source) +
                                  " outside 0.." + std::to_string(s));
  }
  Array phi({source_length + 2, kJumpFeatures}, 0.0);
  phi.at(0, kJumpNull) = 1.0;
  phi.at(source_length + 1, kJumpFinish) = 1.0;
  for (int k = 1; k <= s; ++k) {
    const int d = k - last_source;
    const auto r = static_cast<std::size_t>(k);
    std::size_t cls = d == 0 ? kJumpZero : d == 1 ? kJumpOne : d >= 2 ? kJumpForward : kJumpBack;
    phi.at(r, cls) = 1.0;
    phi.at(r, kJumpDistance) = d;
    phi.at(r, kJumpScaled) = static_cast<double>(d) / static_cast<double>(s);
  }
  return phi;
}

// Parameters --------------------------------------------------------------

OsmParams OsmParams::create(num::ParameterStore& store, const OsmConfig& config,
                            std::size_t source_dim, std::size_t target_vocab) {
  if (config.hidden == 0 || config.target_dim == 0) {
    fail(ErrorKind::argument, "hidden and target_dim must be positive");
  }
  if (target_vocab < 3) fail(ErrorKind::argument, "target vocabulary needs at least one real word");
  const std::size_t h = config.hidden, et = config.target_dim, es = source_dim;
  OsmParams p;
  p.target_embedding = &store.add("tgt.embedding", {target_vocab, et});
  p.state_w = &store.add("osm.state.w", {h, h + et + es});
  p.state_b = &store.add("osm.state.b", {h});
  p.output_w = &store.add("osm.output.w", {target_vocab, h});
  p.output_b = &store.add("osm.output.b", {target_vocab});
  p.source_hidden = &store.add("osm.w_sh", {es, h});
  p.source_target = &store.add("osm.w_st", {es, et});
  p.jump_bias = &store.add("osm.b_f", {kJumpFeatures});
  p.initial_state = &store.add("osm.h0", {h});
  p.null_row = &store.add("osm.r_null", {es});
  p.finish_row = &store.add("osm.r_finish", {es});
  return p;
}

void OsmParams::initialize(num::Rng& rng) const {
  for (Parameter* w : {target_embedding, state_w, output_w, source_hidden, source_target,
                       initial_state, null_row, finish_row}) {
    rng.fill_uniform(w->value, -kInitRange, kInitRange);
  }
  for (Parameter* b : {state_b, output_b, jump_bias}) b->value.fill(0.0);
}

// Recurrence --------------------------------------------------------------

DecoderState initial_state(Graph& g, const OsmParams& p) {
  return DecoderState{g.param(*p.initial_state), corpus::Vocabulary::kStart, 0};
}

DecoderState state_update(const OsmParams& p, const DecoderState& state, Var source_row, int jump,
                          std::size_t source_length) {
  Graph& g = state.h.graph();
  Var prev_word = g.row(*p.target_embedding, static_cast<std::size_t>(state.last_word));
  const Var inputs[] = {state.h, prev_word, source_row};
  DecoderState next = state;
  next.h = num::mlp_tanh(inputs, g.param(*p.state_w), g.param(*p.state_b));
  if (jump >= 1 && jump <= static_cast<int>(source_length)) next.last_source = jump;
  return next;
}

Var word_logits(const OsmParams& p, Var h) {
  Graph& g = h.graph();
  return num::affine(h, g.param(*p.output_w), g.param(*p.output_b));
}

std::vector<double> word_distribution(const OsmParams& p, Var h) {
  auto logits = word_logits(p, h).value();
  std::vector<double> support;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (static_cast<int>(i) != corpus::Vocabulary::kStart) support.push_back(logits[i]);
  }
  auto probs = num::softmax(support);
  probs.insert(probs.begin() + corpus::Vocabulary::kStart, 0.0);
  return probs;
}

Var alignment_logits(const OsmParams& p, Var h, int word, Var source_matrix,
                     const Array& features) {
  Graph& g = h.graph();
  Var target = g.row(*p.target_embedding, static_cast<std::size_t>(word));
  Var query = num::add(num::matvec(g.param(*p.source_hidden), h),
                       num::matvec(g.param(*p.source_target), target));
  Var content = num::matvec(source_matrix, query);
  Var structure = num::matvec(g.constant(features), g.param(*p.jump_bias));
  return num::add(content, structure);
}

std::vector<double> alignment_distribution(const OsmParams& p, Var h, int word,
                                           Var source_matrix, const Array& features) {
  return num::softmax(alignment_logits(p, h, word, source_matrix, features).value().data());
}

// Model -------------------------------------------------------------------

Model::Model(const ModelConfig& config, corpus::Vocabulary source_vocab,
             corpus::Vocabulary target_vocab, corpus::SegmentationLexicon lexicon)
    : config_(config),
      source_vocab_(std::move(source_vocab)),
      target_vocab_(std::move(target_vocab)),
      lexicon_(std::move(lexicon)),
      store_(std::make_unique<num::ParameterStore>()) {
  if (config_.encoder.kind != encoders::EncoderKind::word &&
      lexicon_.mode() != config_.encoder.units) {
    fail(ErrorKind::argument, "segmentation lexicon mode does not match the encoder unit mode");
  }
  encoder_ = std::make_unique<encoders::SourceEncoder>(config_.encoder, *store_,
                                                       source_vocab_.size(), lexicon_.unit_count());
  osm_ = OsmParams::create(*store_, config_.osm, config_.encoder.source_dim, target_vocab_.size());
}

void Model::initialize(std::uint64_t seed) {
  num::Rng rng(seed);
  encoder_->initialize(rng);
  osm_.initialize(rng);
  store_->zero_grads();
}

encoders::WordInput Model::source_word(const std::string& token) const {
  encoders::WordInput w;
  w.word_id = source_vocab_.lookup(token);
  if (config_.encoder.kind != encoders::EncoderKind::word) w.segmentation = lexicon_.segment(token);
  return w;
}

std::vector<encoders::WordInput> Model::encode_source(const corpus::Sentence& tokens) const {
  std::vector<encoders::WordInput> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(source_word(t));
  return out;
}

Example Model::make_example(const corpus::Sentence& source, const corpus::Sentence& target,
                            std::vector<int> align) const {
  Example ex;
  ex.source = encode_source(source);
  ex.pair.source.reserve(source.size());
  for (const auto& w : ex.source) ex.pair.source.push_back(w.word_id);
  for (const auto& t : target) {
    int id = target_vocab_.lookup(t);
    ex.pair.target.push_back(id == corpus::Vocabulary::kStart ? corpus::Vocabulary::kUnk : id);
  }
  ex.pair.align = std::move(align);
  ex.ops = corpus::extract_operations(ex.pair);
  return ex;
}

Var Model::source_matrix(Graph& g, std::span<const encoders::WordInput> words) const {
  return encoders::represent_source_sentence(g, *encoder_, words, *osm_.null_row, *osm_.finish_row);
}

ScoreVars Model::score_graph(Graph& g, const Example& ex) const {
  const std::size_t s = ex.source.size();
  if (ex.pair.source.size() != s) fail(ErrorKind::contract, "example source lengths disagree");
  auto replayed = corpus::replay_operations(ex.ops, s);
  if (replayed.target != ex.pair.target || replayed.align != ex.pair.align) {
    fail(ErrorKind::contract, "operation sequence does not match the sentence pair");
  }
  const int vocab = static_cast<int>(target_vocab_.size());
  for (int t : ex.pair.target) {
    if (t < 0 || t >= vocab || t == corpus::Vocabulary::kStart) {
      fail(ErrorKind::contract, "target id " + std::to_string(t) + " cannot be generated");
    }
  }

  Var rs = source_matrix(g, ex.source);
  DecoderState state = initial_state(g, osm_);
  std::vector<Var> align_terms, word_terms;
  const int finish = static_cast<int>(s) + 1;
  for (const auto& op : ex.ops.steps) {
    Array phi = jump_features(state.last_source, s);
    Var logits = alignment_logits(osm_, state.h, state.last_word, rs, phi);
    align_terms.push_back(num::log_softmax_at(logits, static_cast<std::size_t>(op.jump)));
    if (op.jump == finish) break;
    state = state_update(osm_, state, num::pick_row(rs, static_cast<std::size_t>(op.jump)),
                         op.jump, s);
    word_terms.push_back(num::log_softmax_at(word_logits(osm_, state.h),
                                             static_cast<std::size_t>(op.word),
                                             corpus::Vocabulary::kStart));
    state.last_word = op.word;
  }

  ScoreVars out;
  out.align_decisions = align_terms.size();
  out.word_decisions = word_terms.size();
  out.log_align = num::sum(align_terms);
  out.log_word = word_terms.empty() ? g.constant(Array::vector({0.0})) : num::sum(word_terms);
  return out;
}

SequenceScore Model::sequence_score(const Example& example) const {
  Graph g;
  ScoreVars v = score_graph(g, example);
  return SequenceScore{v.log_align.scalar(), v.log_word.scalar(), v.align_decisions,
                       v.word_decisions};
}

Var Model::loss(Graph& g, const Example& example) const {
  ScoreVars v = score_graph(g, example);
  return num::scale(num::add(v.log_align, v.log_word), -1.0);
}

// Training ----------------------------------------------------------------

EarlyStopping::EarlyStopping(std::size_t patience) : patience_(patience == 0 ? 1 : patience) {}

EarlyStopping::Decision EarlyStopping::update(double dev_log_likelihood) {
  Decision d;
  if (!best_ || dev_log_likelihood > *best_) {
    best_ = dev_log_likelihood;
    bad_rounds_ = 0;
    d.improved = true;
    return d;
  }
  ++bad_rounds_;
  d.stop = bad_rounds_ >= patience_;
  return d;
}

double corpus_log_likelihood(const Model& model, std::span<const Example> examples) {
  double total = 0.0;
  for (const auto& ex : examples) total += model.sequence_score(ex).total();
  return total;
}

TrainResult train(Model& model, std::span<const Example> train_set,
                  std::span<const Example> dev_set, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  if (dev_set.empty()) fail(ErrorKind::argument, "development set is empty");
  auto evaluate = [dev_set](const Model& m) { return corpus_log_likelihood(m, dev_set); };
  return train_with(model, train_set, evaluate, config, on_epoch);
}

TrainResult train_with(Model& model, std::span<const Example> train_set,
                       const DevEvaluator& evaluate, const TrainConfig& config,
                       const EpochCallback& on_epoch) {
  if (train_set.empty()) fail(ErrorKind::argument, "training set is empty");
  if (config.max_epochs == 0) fail(ErrorKind::argument, "max_epochs must be positive");
  if (!(config.learning_rate >= 0.0) || !std::isfinite(config.learning_rate)) {
    fail(ErrorKind::argument, "learning rate must be finite and non-negative");
  }
  const std::size_t cadence = config.dev_every == 0 ? 1 : config.dev_every;

  num::Rng rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto params = model.store().all();
  model.store().zero_grads();

  EarlyStopping stopper(config.patience);
  std::vector<Array> best = model.store().snapshot();
  TrainResult result;
  double lr = config.learning_rate;
  bool stopped = false;

  for (std::size_t epoch = 1; epoch <= config.max_epochs && !stopped; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = lr;
    for (std::size_t k = 0; k < order.size(); ++k) {
      Graph g;
      Var l = model.loss(g, train_set[order[k]]);
      const double v = l.scalar();
      if (!std::isfinite(v)) {
        fail(ErrorKind::numeric, "training diverged at epoch " + std::to_string(epoch) +
                                     ", sentence " + std::to_string(order[k] + 1));
      }
      rec.train_loss += v;
      g.backward(l);
      num::sgd_step(params, lr);
    }

    if (epoch % cadence == 0 || epoch == config.max_epochs) {
      const double dev = evaluate(model);
      if (!std::isfinite(dev)) {
        fail(ErrorKind::numeric, "dev log-likelihood is not finite at epoch " + std::to_string(epoch));
      }
      rec.dev_log_likelihood = dev;
      auto decision = stopper.update(dev);
      rec.improved = decision.improved;
      if (decision.improved) {
        best = model.store().snapshot();
        result.best_epoch = epoch;
        result.best_dev_log_likelihood = dev;
      } else if (decision.stop) {
        stopped = true;
        result.stop_reason = "dev log-likelihood stopped improving";
      } else {
        lr *= 0.5;
      }
    }
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  if (!stopped) result.stop_reason = "reached max epochs";
  model.store().restore(best);
  return result;
}

std::vector<CandidateScore> score_nbest(const Model& model, const corpus::Sentence& source,
                                        std::span<const Candidate> candidates) {
  std::vector<CandidateScore> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    CandidateScore cs;
    try {
      cs.score = model.sequence_score(model.make_example(source, c.target, c.align));
    } catch (const Error& e) {
      cs.error = e.what();
    }
    out.push_back(std::move(cs));
  }
  return out;
}

}  // namespace nosm::osm
