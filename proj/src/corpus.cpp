#include "nosm/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "nosm/error.hpp"

namespace nosm::corpus {

// Vocabulary --------------------------------------------------------------

Vocabulary Vocabulary::from_counts(std::vector<std::pair<std::string, std::size_t>> counts,
                                   std::size_t threshold) {
  Vocabulary v;
  v.threshold_ = threshold;
  v.tokens_ = {std::string(kUnkToken), std::string(kStartToken)};
  v.ids_[v.tokens_[0]] = kUnk;
  v.ids_[v.tokens_[1]] = kStart;
  v.counts_ = std::move(counts);
  for (std::size_t i = 0; i < v.counts_.size(); ++i) {
    const auto& [tok, n] = v.counts_[i];
    if (!v.count_index_.emplace(tok, i).second) {
      fail(ErrorKind::contract, "duplicate vocabulary token '" + tok + "'");
    }
    if (n >= threshold && !v.ids_.count(tok)) {
      v.ids_[tok] = static_cast<int>(v.tokens_.size());
      v.tokens_.push_back(tok);
    }
  }
  return v;
}

Vocabulary Vocabulary::build(std::span<const std::string> tokens, std::size_t threshold) {
  if (tokens.empty()) fail(ErrorKind::empty_corpus, "cannot build a vocabulary from no tokens");
  std::vector<std::pair<std::string, std::size_t>> counts;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& t : tokens) {
    auto [it, fresh] = index.emplace(t, counts.size());
    if (fresh) counts.emplace_back(t, 0);
    ++counts[it->second].second;
  }
  return from_counts(std::move(counts), threshold);
}

Vocabulary Vocabulary::build(std::span<const Sentence> sentences, std::size_t threshold) {
  std::vector<std::string> flat;
  for (const auto& s : sentences) flat.insert(flat.end(), s.begin(), s.end());
  return build(std::span<const std::string>(flat), threshold);
}

int Vocabulary::lookup(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::lookup(std::span<const std::string> tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(lookup(t));
  return out;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    fail(ErrorKind::argument, "vocabulary id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::size_t Vocabulary::count(std::string_view token) const {
  auto it = count_index_.find(std::string(token));
  return it == count_index_.end() ? 0 : counts_[it->second].second;
}

// Segmentation ------------------------------------------------------------

std::vector<std::string> utf8_characters(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if (lead >= 0xF0 && lead < 0xF8) {
      len = 4;
    } else if (lead >= 0xE0) {
      len = lead < 0xF0 ? 3 : 1;
    } else if (lead >= 0xC0) {
      len = 2;
    }
    if (len > 1) {
      bool ok = i + len <= text.size();
      for (std::size_t k = 1; ok && k < len; ++k) {
        ok = (static_cast<unsigned char>(text[i + k]) & 0xC0) == 0x80;
      }
      if (!ok) len = 1;
    }
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

std::string_view unit_mode_name(UnitMode mode) {
  return mode == UnitMode::characters ? "char" : "morph";
}

UnitMode parse_unit_mode(std::string_view name) {
  if (name == "char" || name == "characters") return UnitMode::characters;
  if (name == "morph" || name == "morphemes") return UnitMode::morphemes;
  fail(ErrorKind::argument, "unknown unit mode '" + std::string(name) + "'");
}

void SegmentationLexicon::add_unit(const std::string& unit) {
  if (unit_ids_.emplace(unit, static_cast<int>(units_.size())).second) {
    units_.push_back(unit);
  }
}

SegmentationLexicon SegmentationLexicon::characters(std::span<const std::string> words) {
  SegmentationLexicon lex;
  lex.mode_ = UnitMode::characters;
  lex.add_unit("<pad>");
  lex.add_unit("<unk>");
  for (const auto& w : words) {
    for (const auto& c : utf8_characters(w)) lex.add_unit(c);
  }
  return lex;
}

SegmentationLexicon SegmentationLexicon::morphemes(
    std::map<std::string, std::vector<std::string>> analyses, std::span<const std::string> words) {
  SegmentationLexicon lex;
  lex.mode_ = UnitMode::morphemes;
  lex.add_unit("<pad>");
  lex.add_unit("<unk>");
  lex.analyses_ = std::move(analyses);
  for (const auto& [word, units] : lex.analyses_) {
    if (units.empty()) fail(ErrorKind::contract, "empty analysis for '" + word + "'");
    for (const auto& u : units) lex.add_unit(u);
  }
  for (const auto& w : words) {
    if (!w.empty() && !lex.analyses_.count(w)) lex.add_unit(w);
  }
  return lex;
}

SegmentationLexicon SegmentationLexicon::restore(
    UnitMode mode, std::vector<std::string> units,
    std::map<std::string, std::vector<std::string>> analyses) {
  SegmentationLexicon lex;
  lex.mode_ = mode;
  for (const auto& u : units) {
    if (lex.unit_ids_.count(u)) fail(ErrorKind::parse, "duplicate unit '" + u + "'");
    lex.add_unit(u);
  }
  if (lex.units_.size() < 2) fail(ErrorKind::parse, "unit inventory lacks reserved units");
  lex.analyses_ = std::move(analyses);
  return lex;
}

std::vector<std::string> SegmentationLexicon::split(std::string_view word, bool* fallback) const {
  if (word.empty()) fail(ErrorKind::argument, "cannot segment an empty word");
  if (fallback) *fallback = false;
  if (mode_ == UnitMode::characters) return utf8_characters(word);
  auto it = analyses_.find(std::string(word));
  if (it != analyses_.end()) return it->second;
  if (fallback) *fallback = true;
  return {std::string(word)};
}

Segmentation SegmentationLexicon::segment(std::string_view word) const {
  Segmentation seg;
  for (const auto& u : split(word, &seg.fallback)) seg.units.push_back(unit_id(u));
  return seg;
}

const std::string& SegmentationLexicon::unit(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= units_.size()) {
    fail(ErrorKind::argument, "unit id " + std::to_string(id) + " out of range");
  }
  return units_[static_cast<std::size_t>(id)];
}

int SegmentationLexicon::unit_id(std::string_view unit) const {
  auto it = unit_ids_.find(std::string(unit));
  return it == unit_ids_.end() ? kUnknownUnit : it->second;
}

std::vector<std::string> parse_morph_analysis(std::string_view text, const std::string& where) {
  enum Cat { pre, stm, suf, none };
  std::vector<std::string> units;
  std::vector<Cat> cats;
  for (const auto& tok : tokenize(text)) {
    if (tok == "+") continue;
    auto slash = tok.rfind('/');
    Cat cat = none;
    std::string unit = tok;
    if (slash != std::string::npos && slash > 0) {
      std::string tag = tok.substr(slash + 1);
      if (tag == "PRE") cat = pre;
      else if (tag == "STM") cat = stm;
      else if (tag == "SUF") cat = suf;
      else fail(ErrorKind::parse, where + ": unknown morph category '" + tag + "'");
      unit = tok.substr(0, slash);
    }
    units.push_back(unit);
    cats.push_back(cat);
  }
  if (units.empty()) fail(ErrorKind::parse, where + ": empty analysis");
  const bool tagged = cats[0] != none;
  for (Cat c : cats) {
    if ((c != none) != tagged) fail(ErrorKind::parse, where + ": mixed tagged and untagged morphs");
  }
  if (tagged) {
    // prefix* stem+ suffix*
    std::size_t i = 0;
    while (i < cats.size() && cats[i] == pre) ++i;
    const std::size_t stems = i;
    while (i < cats.size() && cats[i] == stm) ++i;
    const bool has_stem = i > stems;
    while (i < cats.size() && cats[i] == suf) ++i;
    if (!has_stem || i != cats.size()) {
      fail(ErrorKind::parse, where + ": analysis is not of the form prefix* stem+ suffix*");
    }
  }
  return units;
}

std::map<std::string, std::vector<std::string>> load_segmentations(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open segmentation file '" + path + "'");
  std::map<std::string, std::vector<std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) fail(ErrorKind::parse, where + ": expected word<TAB>units");
    std::string word = line.substr(0, tab);
    auto units = parse_morph_analysis(std::string_view(line).substr(tab + 1), where);
    if (!out.emplace(word, std::move(units)).second) {
      fail(ErrorKind::parse, where + ": duplicate entry for '" + word + "'");
    }
  }
  return out;
}

// Alignments and operations -----------------------------------------------

void AlignedSentencePair::validate() const {
  if (align.size() != target.size()) {
    fail(ErrorKind::contract, "alignment length " + std::to_string(align.size()) +
                                  " differs from target length " + std::to_string(target.size()));
  }
  const int s = static_cast<int>(source.size());
  for (int a : align) {
    if (a < 0 || a > s) {
      fail(ErrorKind::contract, "alignment index " + std::to_string(a) +
                                    " outside 0.." + std::to_string(s));
    }
  }
}

OperationSequence extract_operations(const AlignedSentencePair& pair) {
  pair.validate();
  OperationSequence ops;
  ops.steps.reserve(pair.target.size() + 1);
  for (std::size_t j = 0; j < pair.target.size(); ++j) {
    ops.steps.push_back({pair.align[j], pair.target[j]});
  }
  ops.steps.push_back({static_cast<int>(pair.source.size()) + 1, Operation::kNoWord});
  return ops;
}

TargetAlignment replay_operations(const OperationSequence& ops, std::size_t source_length) {
  const int finish = static_cast<int>(source_length) + 1;
  if (ops.steps.empty() || ops.steps.back().jump != finish ||
      ops.steps.back().word != Operation::kNoWord) {
    fail(ErrorKind::contract, "operation sequence does not end in FINISH");
  }
  TargetAlignment out;
  for (std::size_t i = 0; i + 1 < ops.steps.size(); ++i) {
    const Operation& op = ops.steps[i];
    if (op.jump == finish) fail(ErrorKind::contract, "FINISH before the end of the sequence");
    if (op.jump < 0 || op.jump > finish) {
      fail(ErrorKind::contract, "jump target " + std::to_string(op.jump) + " out of range");
    }
    if (op.word == Operation::kNoWord) fail(ErrorKind::contract, "non-final step without a word");
    out.target.push_back(op.word);
    out.align.push_back(op.jump);
  }
  return out;
}

std::vector<Link> parse_links(std::string_view line, std::size_t source_length,
                              std::size_t target_length, std::size_t line_number) {
  std::vector<Link> links;
  const std::string where = "alignment line " + std::to_string(line_number);
  for (const auto& tok : tokenize(line)) {
    auto dash = tok.find('-');
    std::size_t i = 0, j = 0;
    const char* b = tok.data();
    const char* e = tok.data() + tok.size();
    bool ok = dash != std::string::npos && dash > 0 && dash + 1 < tok.size();
    if (ok) {
      auto r1 = std::from_chars(b, b + dash, i);
      auto r2 = std::from_chars(b + dash + 1, e, j);
      ok = r1.ec == std::errc() && r1.ptr == b + dash && r2.ec == std::errc() && r2.ptr == e;
    }
    if (!ok) fail(ErrorKind::parse, where + ": malformed pair '" + tok + "'");
    if (i >= source_length || j >= target_length) {
      fail(ErrorKind::parse, where + ": pair '" + tok + "' out of range for lengths " +
                                 std::to_string(source_length) + "/" + std::to_string(target_length));
    }
    links.push_back({i, j});
  }
  return links;
}

std::vector<int> parse_alignment_line(std::string_view line, std::size_t source_length,
                                      std::size_t target_length, std::size_t line_number) {
  std::vector<int> align(target_length, 0);
  for (const Link& l : parse_links(line, source_length, target_length, line_number)) {
    const int src = static_cast<int>(l.source) + 1;
    if (align[l.target] == 0 || src < align[l.target]) align[l.target] = src;
  }
  return align;
}

std::vector<std::vector<int>> load_alignments(const std::string& path,
                                              std::span<const std::size_t> source_lengths,
                                              std::span<const std::size_t> target_lengths) {
  if (source_lengths.size() != target_lengths.size()) {
    fail(ErrorKind::argument, "source and target sentence counts differ");
  }
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open alignment file '" + path + "'");
  std::vector<std::vector<int>> out;
  std::string line;
  while (out.size() < source_lengths.size() && std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t k = out.size();
    try {
      out.push_back(parse_alignment_line(line, source_lengths[k], target_lengths[k], k + 1));
    } catch (const Error& e) {
      fail(e.kind(), path + ": " + e.what());
    }
  }
  if (out.size() != source_lengths.size()) {
    fail(ErrorKind::parse, path + ": expected " + std::to_string(source_lengths.size()) +
                               " alignment lines, found " + std::to_string(out.size()));
  }
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      fail(ErrorKind::parse, path + ": more alignment lines than sentence pairs");
    }
  }
  return out;
}

Sentence tokenize(std::string_view line) {
  Sentence out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<Sentence> read_sentences(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open corpus file '" + path + "'");
  std::vector<Sentence> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(tokenize(line));
  return out;
}

// Frequency bands ---------------------------------------------------------

Band frequency_band(std::size_t count) {
  if (count <= 4) return Band::b0_4;
  if (count <= 9) return Band::b5_9;
  if (count <= 14) return Band::b10_14;
  if (count <= 19) return Band::b15_19;
  if (count <= 50) return Band::b20_50;
  return Band::b51_up;
}

std::string_view band_label(Band band) {
  switch (band) {
    case Band::b0_4: return "[0-4]";
    case Band::b5_9: return "[5-9]";
    case Band::b10_14: return "[10-14]";
    case Band::b15_19: return "[15-19]";
    case Band::b20_50: return "[20-50]";
    case Band::b51_up: return "50+";
  }
  return "?";
}

}  // namespace nosm::corpus
