#include "nosm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "nosm/error.hpp"

namespace nosm::eval {

PerplexityReport perplexities(std::span<const osm::SequenceScore> scores) {
  if (scores.empty()) fail(ErrorKind::argument, "perplexity needs at least one sentence");
  PerplexityReport r;
  for (const auto& s : scores) {
    r.log_word += s.log_word;
    r.log_align += s.log_align;
    r.word_decisions += s.word_decisions;
    r.align_decisions += s.align_decisions;
  }
  if (r.word_decisions > 0) {
    r.word_ppl = std::exp(-r.log_word / static_cast<double>(r.word_decisions));
  }
  r.align_ppl = std::exp(-r.log_align / static_cast<double>(r.align_decisions));
  return r;
}

PerplexityReport perplexities(const osm::Model& model, std::span<const osm::Example> examples) {
  std::vector<osm::SequenceScore> scores;
  scores.reserve(examples.size());
  for (const auto& ex : examples) scores.push_back(model.sequence_score(ex));
  return perplexities(scores);
}

// Nearest neighbours --------------------------------------------------------

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorKind::shape, "cosine of vectors with different lengths");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

std::vector<Neighbor> rank_neighbors(std::span<const std::vector<double>> vectors,
                                     std::span<const std::string> words,
                                     std::span<const double> query, std::size_t k,
                                     std::optional<std::size_t> exclude) {
  if (vectors.size() != words.size()) fail(ErrorKind::argument, "lexicon words and vectors differ");
  std::vector<Neighbor> all;
  all.reserve(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (exclude && *exclude == i) continue;
    all.push_back({i, words[i], cosine(vectors[i], query)});
  }
  auto better = [](const Neighbor& a, const Neighbor& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.index < b.index;
  };
  k = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), better);
  all.resize(k);
  return all;
}

NeighborIndex::NeighborIndex(const osm::Model& model, std::vector<std::string> lexicon)
    : model_(&model) {
  for (auto& w : lexicon) {
    if (position_.count(w) || !representable(w)) continue;
    auto input = model.source_word(w);
    position_.emplace(w, words_.size());
    vectors_.push_back(model.encoder().word_vector(input));
    words_.push_back(std::move(w));
  }
}

bool NeighborIndex::representable(const std::string& word) const {
  if (model_->config().encoder.kind != encoders::EncoderKind::word) return !word.empty();
  return model_->source_vocab().lookup(word) != corpus::Vocabulary::kUnk;
}

std::optional<std::vector<double>> NeighborIndex::vector_of(const std::string& word) const {
  if (!representable(word)) return std::nullopt;
  auto it = position_.find(word);
  if (it != position_.end()) return vectors_[it->second];
  return model_->encoder().word_vector(model_->source_word(word));
}

std::optional<std::vector<Neighbor>> NeighborIndex::query(const std::string& word,
                                                          std::size_t k) const {
  auto v = vector_of(word);
  if (!v) return std::nullopt;
  std::optional<std::size_t> self;
  if (auto it = position_.find(word); it != position_.end()) self = it->second;
  return rank_neighbors(vectors_, words_, *v, k, self);
}

// Translation table ---------------------------------------------------------

namespace {

const std::map<std::string, double> kEmpty;

void normalize(std::unordered_map<std::string, std::map<std::string, double>>& table) {
  for (auto& [key, row] : table) {
    double total = 0.0;
    for (auto& [_, c] : row) total += c;
    for (auto& [_, c] : row) c /= total;
  }
}

}  // namespace

TranslationTable TranslationTable::estimate(std::span<const corpus::Sentence> sources,
                                            std::span<const corpus::Sentence> targets,
                                            std::span<const std::vector<corpus::Link>> links) {
  if (sources.size() != targets.size() || sources.size() != links.size()) {
    fail(ErrorKind::argument, "bitext sides and link lists differ in length");
  }
  TranslationTable t;
  for (std::size_t k = 0; k < sources.size(); ++k) {
    for (const auto& e : sources[k]) {
      ++t.counts_[e];
      t.ids_.emplace(e, t.ids_.size());
    }
    for (const auto& l : links[k]) {
      if (l.source >= sources[k].size() || l.target >= targets[k].size()) {
        fail(ErrorKind::argument, "link out of range in sentence " + std::to_string(k + 1));
      }
      const auto& e = sources[k][l.source];
      const auto& f = targets[k][l.target];
      t.forward_[e][f] += 1.0;
      t.backward_[f][e] += 1.0;
    }
  }
  normalize(t.forward_);
  normalize(t.backward_);
  return t;
}

const std::map<std::string, double>& TranslationTable::target_given_source(
    const std::string& e) const {
  auto it = forward_.find(e);
  return it == forward_.end() ? kEmpty : it->second;
}

const std::map<std::string, double>& TranslationTable::source_given_target(
    const std::string& f) const {
  auto it = backward_.find(f);
  return it == backward_.end() ? kEmpty : it->second;
}

std::size_t TranslationTable::source_count(const std::string& e) const {
  auto it = counts_.find(e);
  return it == counts_.end() ? 0 : it->second;
}

std::optional<std::size_t> TranslationTable::source_id(const std::string& e) const {
  auto it = ids_.find(e);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::map<std::string, double> pivot_distribution(const TranslationTable& table,
                                                 const std::string& e) {
  std::map<std::string, double> out;
  for (const auto& [f, pf] : table.target_given_source(e)) {
    for (const auto& [e2, pe] : table.source_given_target(f)) out[e2] += pf * pe;
  }
  return out;
}

std::optional<std::vector<std::pair<std::string, double>>> pivot_synonyms(
    const TranslationTable& table, const std::string& e, std::size_t top, std::size_t floor) {
  if (table.target_given_source(e).empty() || table.source_count(e) < floor) return std::nullopt;
  std::vector<std::pair<std::string, double>> ranked;
  for (auto& [w, p] : pivot_distribution(table, e)) {
    if (w != e) ranked.emplace_back(w, p);
  }
  std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return table.source_id(a.first).value_or(0) < table.source_id(b.first).value_or(0);
  });
  if (ranked.size() > top) ranked.resize(top);
  return ranked;
}

double multilabel_accuracy(std::span<const OverlapCase> cases) {
  if (cases.empty()) fail(ErrorKind::argument, "multi-label accuracy over an empty word set");
  std::size_t hits = 0;
  for (const auto& c : cases) {
    std::set<std::string> gold(c.gold.begin(), c.gold.end());
    bool hit = std::any_of(c.neighbors.begin(), c.neighbors.end(),
                           [&](const std::string& n) { return gold.count(n) > 0; });
    if (hit) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(cases.size());
}

// Morphology ----------------------------------------------------------------

void TagLexicon::add(const std::string& word, Analyses analyses) {
  if (word.empty()) fail(ErrorKind::argument, "tag lexicon word is empty");
  if (analyses.lemmas.empty() || analyses.tags.empty()) {
    fail(ErrorKind::argument, "'" + word + "' needs at least one lemma and one tag vector");
  }
  for (const auto& t : analyses.tags) {
    if (t.empty() || t.find_first_not_of("01") != std::string::npos) {
      fail(ErrorKind::argument, "'" + word + "': tag vector '" + t + "' is not a bit string");
    }
    if (bits_ == 0) bits_ = t.size();
    if (t.size() != bits_) {
      fail(ErrorKind::argument, "'" + word + "': tag vector length " + std::to_string(t.size()) +
                                    ", expected " + std::to_string(bits_));
    }
  }
  if (!entries_.emplace(word, std::move(analyses)).second) {
    fail(ErrorKind::argument, "'" + word + "' listed twice in tag lexicon");
  }
}

const Analyses* TagLexicon::find(const std::string& word) const {
  auto it = entries_.find(word);
  return it == entries_.end() ? nullptr : &it->second;
}

namespace {

std::vector<std::string> split_commas(const std::string& field) {
  std::vector<std::string> out;
  std::stringstream ss(field);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

TagLexicon load_tag_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open tag lexicon " + path);
  TagLexicon lex;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    const std::string where = path + ": line " + std::to_string(n);
    if (fields.size() != 3) fail(ErrorKind::parse, where + ": expected 3 tab-separated fields");
    try {
      lex.add(fields[0], Analyses{split_commas(fields[1]), split_commas(fields[2])});
    } catch (const Error& e) {
      fail(ErrorKind::parse, where + ": " + e.what());
    }
  }
  return lex;
}

double hamming_similarity(std::string_view a, std::string_view b) {
  if (a.size() != b.size() || a.empty()) {
    fail(ErrorKind::argument, "bit vectors must be non-empty and of equal length");
  }
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i];
  return static_cast<double>(same) / static_cast<double>(a.size());
}

std::optional<double> tag_similarity(const std::string& a, const std::string& b,
                                     const TagLexicon& lexicon) {
  const Analyses* x = lexicon.find(a);
  const Analyses* y = lexicon.find(b);
  if (!x || !y) return std::nullopt;
  double lowest = 1.0;
  for (const auto& s : x->tags) {
    for (const auto& t : y->tags) lowest = std::min(lowest, hamming_similarity(s, t));
  }
  return lowest;
}

std::optional<double> lemma_similarity(const std::string& word,
                                       std::span<const std::string> neighbors,
                                       const TagLexicon& lexicon) {
  const Analyses* w = lexicon.find(word);
  if (!w || neighbors.empty()) return std::nullopt;
  std::size_t sharing = 0;
  for (const auto& n : neighbors) {
    const Analyses* a = lexicon.find(n);
    if (!a) continue;
    bool shared = std::any_of(a->lemmas.begin(), a->lemmas.end(), [&](const std::string& l) {
      return std::find(w->lemmas.begin(), w->lemmas.end(), l) != w->lemmas.end();
    });
    if (shared) ++sharing;
  }
  return static_cast<double>(sharing) / static_cast<double>(neighbors.size());
}

// Band tables ---------------------------------------------------------------

BandTable band_report(std::vector<std::string> metrics, std::span<const WordScores> scores) {
  BandTable table;
  table.metrics = std::move(metrics);
  const std::size_t m = table.metrics.size();
  for (auto band : corpus::kAllBands) {
    BandRow row{band, 0, std::vector<BandCell>(m)};
    std::vector<double> sums(m, 0.0);
    for (const auto& ws : scores) {
      if (ws.values.size() != m) fail(ErrorKind::argument, "'" + ws.word + "' has the wrong number of metric values");
      if (corpus::frequency_band(ws.count) != band) continue;
      ++row.words;
      for (std::size_t i = 0; i < m; ++i) {
        if (!ws.values[i]) continue;
        sums[i] += *ws.values[i];
        ++row.cells[i].words;
      }
    }
    if (row.words == 0) continue;
    for (std::size_t i = 0; i < m; ++i) {
      if (row.cells[i].words > 0) row.cells[i].mean = sums[i] / static_cast<double>(row.cells[i].words);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::size_t display_width(const std::string& s) { return corpus::utf8_characters(s).size(); }

}  // namespace

std::string BandTable::text() const {
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> head{"band", "words"};
  head.insert(head.end(), metrics.begin(), metrics.end());
  grid.push_back(head);
  for (const auto& r : rows) {
    std::vector<std::string> line{std::string(corpus::band_label(r.band)), std::to_string(r.words)};
    for (const auto& c : r.cells) line.push_back(c.mean ? fixed(*c.mean, 4) : std::string(kMissing));
    grid.push_back(std::move(line));
  }
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& line : grid) {
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], display_width(line[i]));
  }
  std::string out;
  for (const auto& line : grid) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i > 0) out += "  ";
      const std::string pad(width[i] - display_width(line[i]), ' ');
      out += i == 0 ? line[i] + pad : pad + line[i];
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
  }
  return out;
}

std::string BandTable::tsv() const {
  std::string out = "band\twords";
  for (const auto& m : metrics) out += "\t" + m;
  out += '\n';
  for (const auto& r : rows) {
    out += std::string(corpus::band_label(r.band)) + "\t" + std::to_string(r.words);
    for (const auto& c : r.cells) out += "\t" + (c.mean ? fixed(*c.mean, 6) : std::string(kMissing));
    out += '\n';
  }
  return out;
}

}  // namespace nosm::eval
