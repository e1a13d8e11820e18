#include "nosm/encoders.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "nosm/error.hpp"

namespace nosm::encoders {

using num::Graph;
using num::Parameter;
using num::Var;

namespace {

constexpr double kInitRange = 0.08;

}  // namespace

std::string_view kind_name(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::word: return "word";
    case EncoderKind::bag: return "bag";
    case EncoderKind::bilstm: return "bilstm";
    case EncoderKind::cnn: return "cnn";
  }
  return "?";
}

EncoderKind parse_kind(std::string_view name) {
  if (name == "word") return EncoderKind::word;
  if (name == "bag" || name == "ave") return EncoderKind::bag;
  if (name == "bilstm") return EncoderKind::bilstm;
  if (name == "cnn") return EncoderKind::cnn;
  fail(ErrorKind::argument, "unknown encoder kind '" + std::string(name) + "'");
}

// Config ------------------------------------------------------------------

void EncoderConfig::validate() const {
  if (source_dim == 0) fail(ErrorKind::argument, "source_dim must be positive");
  if (kind == EncoderKind::bilstm && (lstm_hidden == 0 || unit_dim == 0)) {
    fail(ErrorKind::argument, "bilstm needs positive lstm_hidden and unit_dim");
  }
  if (kind == EncoderKind::cnn) {
    if (unit_dim == 0) fail(ErrorKind::argument, "cnn needs a positive unit_dim");
    if (kernel_widths.empty()) fail(ErrorKind::argument, "cnn needs at least one kernel width");
    for (auto w : kernel_widths) {
      if (w == 0) fail(ErrorKind::argument, "kernel widths must be positive");
    }
    auto counts = filter_counts();
    std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
    if (total != source_dim) {
      fail(ErrorKind::argument, "cnn filter counts sum to " + std::to_string(total) +
                                    ", must equal source_dim " + std::to_string(source_dim));
    }
  }
}

std::vector<std::size_t> EncoderConfig::filter_counts() const {
  if (!kernel_filters.empty()) {
    if (kernel_filters.size() != kernel_widths.size()) {
      fail(ErrorKind::argument, "kernel_filters and kernel_widths differ in length");
    }
    for (auto f : kernel_filters) {
      if (f == 0) fail(ErrorKind::argument, "every kernel width needs at least one filter");
    }
    return kernel_filters;
  }
  const std::size_t n = kernel_widths.size();
  if (n == 0) return {};
  if (source_dim < n) {
    fail(ErrorKind::argument, "source_dim " + std::to_string(source_dim) + " too small for " +
                                  std::to_string(n) + " kernel widths");
  }
  std::vector<std::size_t> counts(n, source_dim / n);
  auto widest = std::max_element(kernel_widths.begin(), kernel_widths.end()) - kernel_widths.begin();
  counts[static_cast<std::size_t>(widest)] += source_dim % n;
  return counts;
}

std::size_t EncoderConfig::effective_unit_dim() const {
  return kind == EncoderKind::bag ? source_dim : unit_dim;
}

std::size_t EncoderConfig::max_kernel_width() const {
  return kernel_widths.empty() ? 1 : *std::max_element(kernel_widths.begin(), kernel_widths.end());
}

// Encoder -----------------------------------------------------------------

SourceEncoder::SourceEncoder(const EncoderConfig& config, num::ParameterStore& store,
                             std::size_t vocab_size, std::size_t unit_count)
    : config_(config) {
  config_.validate();
  const std::size_t es = config_.source_dim;
  auto weight = [&](const std::string& name, num::Shape shape) {
    Parameter& p = store.add(name, std::move(shape));
    weights_.push_back(&p);
    return &p;
  };
  auto bias = [&](const std::string& name, std::size_t n) {
    Parameter& p = store.add(name, {n});
    biases_.push_back(&p);
    return &p;
  };

  word_table_ = weight("src.word", {vocab_size, es});
  if (config_.kind == EncoderKind::word) return;

  const std::size_t eu = config_.effective_unit_dim();
  if (unit_count < 2) fail(ErrorKind::argument, "unit inventory lacks reserved units");
  unit_table_ = weight("src.unit", {unit_count, eu});

  if (config_.kind == EncoderKind::bilstm) {
    const std::size_t h = config_.lstm_hidden;
    auto lstm = [&](const std::string& prefix) {
      num::LstmWeights w;
      w.input_w = weight(prefix + ".input.w", {h, eu + h});
      w.input_b = bias(prefix + ".input.b", h);
      w.forget_w = weight(prefix + ".forget.w", {h, eu + h});
      w.forget_b = bias(prefix + ".forget.b", h);
      w.output_w = weight(prefix + ".output.w", {h, eu + h});
      w.output_b = bias(prefix + ".output.b", h);
      w.cell_w = weight(prefix + ".cell.w", {h, eu + h});
      w.cell_b = bias(prefix + ".cell.b", h);
      return w;
    };
    forward_ = lstm("src.lstm.fwd");
    backward_ = lstm("src.lstm.bwd");
    bilstm_w_ = weight("src.bilstm.mlp.w", {es, 2 * h});
    bilstm_b_ = bias("src.bilstm.mlp.b", es);
  } else if (config_.kind == EncoderKind::cnn) {
    auto counts = config_.filter_counts();
    for (std::size_t l = 0; l < config_.kernel_widths.size(); ++l) {
      const std::size_t k = config_.kernel_widths[l];
      const std::string tag = "src.cnn." + std::to_string(l) + ".k" + std::to_string(k);
      kernels_.push_back(weight(tag + ".w", {counts[l], k, eu}));
      kernel_bias_.push_back(bias(tag + ".b", counts[l]));
    }
    for (std::size_t i = 0; i < config_.highway_layers; ++i) {
      const std::string tag = "src.highway." + std::to_string(i);
      Highway hw;
      hw.transform_w = weight(tag + ".transform.w", {es, es});
      hw.transform_b = bias(tag + ".transform.b", es);
      hw.gate_w = weight(tag + ".gate.w", {es, es});
      hw.gate_b = bias(tag + ".gate.b", es);
      highway_.push_back(hw);
    }
  }
}

void SourceEncoder::initialize(num::Rng& rng) const {
  for (Parameter* p : weights_) rng.fill_uniform(p->value, -kInitRange, kInitRange);
  for (Parameter* p : biases_) p->value.fill(0.0);
}

Var SourceEncoder::unit_matrix(Graph& g, std::span<const int> units) const {
  if (!unit_table_) fail(ErrorKind::contract, "word encoder has no unit embeddings");
  std::vector<Var> rows;
  rows.reserve(units.size());
  for (int u : units) rows.push_back(g.row(*unit_table_, static_cast<std::size_t>(u)));
  return num::stack_rows(rows);
}

Var SourceEncoder::encode_bag(Graph& g, std::span<const int> units) const {
  if (units.empty()) fail(ErrorKind::argument, "bag encoder needs at least one unit");
  if (!unit_table_) fail(ErrorKind::contract, "word encoder has no unit embeddings");
  std::vector<Var> rows;
  rows.reserve(units.size());
  for (int u : units) rows.push_back(g.row(*unit_table_, static_cast<std::size_t>(u)));
  return num::sum(rows);
}

Var SourceEncoder::encode_bilstm(Graph& g, std::span<const int> units) const {
  if (units.empty()) fail(ErrorKind::argument, "bi-LSTM encoder needs at least one unit");
  if (!bilstm_w_) fail(ErrorKind::contract, "encoder has no bi-LSTM parameters");
  const std::size_t h = config_.lstm_hidden;
  std::vector<Var> inputs;
  inputs.reserve(units.size());
  for (int u : units) inputs.push_back(g.row(*unit_table_, static_cast<std::size_t>(u)));

  num::LstmState fwd{g.constant(num::Array({h}, 0.0)), g.constant(num::Array({h}, 0.0))};
  for (Var x : inputs) fwd = num::lstm_step(forward_, fwd.h, fwd.c, x);
  num::LstmState bwd{g.constant(num::Array({h}, 0.0)), g.constant(num::Array({h}, 0.0))};
  for (auto it = inputs.rbegin(); it != inputs.rend(); ++it) {
    bwd = num::lstm_step(backward_, bwd.h, bwd.c, *it);
  }
  const Var ends[] = {fwd.h, bwd.h};
  return num::mlp_tanh(ends, g.param(*bilstm_w_), g.param(*bilstm_b_));
}

std::vector<int> SourceEncoder::pad_units(std::span<const int> units) const {
  const std::size_t need = config_.max_kernel_width();
  std::vector<int> out;
  if (units.size() >= need) {
    out.assign(units.begin(), units.end());
    return out;
  }
  const std::size_t deficit = need - units.size();
  const std::size_t left = deficit / 2;
  out.assign(left, corpus::SegmentationLexicon::kPadUnit);
  out.insert(out.end(), units.begin(), units.end());
  out.resize(need, corpus::SegmentationLexicon::kPadUnit);
  return out;
}

Var SourceEncoder::highway(Graph& g, Var x) const {
  for (const Highway& hw : highway_) {
    Var transform = num::tanh(num::affine(x, g.param(*hw.transform_w), g.param(*hw.transform_b)));
    Var gate = num::sigmoid(num::affine(x, g.param(*hw.gate_w), g.param(*hw.gate_b)));
    x = num::add(num::mul(gate, transform), num::mul(num::one_minus(gate), x));
  }
  return x;
}

Var SourceEncoder::encode_cnn(Graph& g, std::span<const int> units) const {
  if (units.empty()) fail(ErrorKind::argument, "CNN encoder needs at least one unit");
  if (kernels_.empty()) fail(ErrorKind::contract, "encoder has no CNN parameters");
  const std::vector<int> padded = pad_units(units);
  Var u = unit_matrix(g, padded);
  std::vector<Var> pooled;
  pooled.reserve(kernels_.size());
  for (std::size_t l = 0; l < kernels_.size(); ++l) {
    Var maps = num::tanh(num::conv_valid(u, g.param(*kernels_[l]), g.param(*kernel_bias_[l])));
    pooled.push_back(num::row_max(maps));
  }
  Var r = pooled.size() == 1 ? pooled[0] : num::concat(pooled);
  return highway(g, r);
}

Var SourceEncoder::encode_units(Graph& g, std::span<const int> units) const {
  switch (config_.kind) {
    case EncoderKind::bag: return encode_bag(g, units);
    case EncoderKind::bilstm: return encode_bilstm(g, units);
    case EncoderKind::cnn: return encode_cnn(g, units);
    case EncoderKind::word: break;
  }
  fail(ErrorKind::contract, "word encoder has no sub-word encoding");
}

WordRepresentation SourceEncoder::represent_word(Graph& g, const WordInput& word) const {
  WordRepresentation rep;
  rep.used_unk_row = word.word_id == corpus::Vocabulary::kUnk;
  Var m = g.row(*word_table_, static_cast<std::size_t>(word.word_id));
  if (config_.kind == EncoderKind::word) {
    rep.vector = m;
    return rep;
  }
  rep.used_fallback = word.segmentation.fallback;
  rep.vector = combine(m, encode_units(g, word.segmentation.units));
  return rep;
}

std::vector<double> SourceEncoder::word_vector(const WordInput& word) const {
  Graph g;
  auto d = represent_word(g, word).vector.value().data();
  return {d.begin(), d.end()};
}

Var combine(Var word_embedding, Var unit_encoding) {
  return num::maximum(word_embedding, unit_encoding);
}

Var represent_source_sentence(Graph& g, const SourceEncoder& encoder,
                              std::span<const WordInput> words, Parameter& null_row,
                              Parameter& finish_row) {
  std::vector<Var> rows;
  rows.reserve(words.size() + 2);
  rows.push_back(g.param(null_row));
  for (const auto& w : words) rows.push_back(encoder.represent_word(g, w).vector);
  rows.push_back(g.param(finish_row));
  return num::stack_rows(rows);
}

}  // namespace nosm::encoders
