#include "nosm/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nosm/archive.hpp"
#include "nosm/error.hpp"
#include "nosm/eval.hpp"

namespace nosm::app {

using corpus::Sentence;

namespace {

std::string real(double v, int digits = 17) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string join(const std::vector<std::string>& items, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

void write_output(const RunConfig& c, const std::string& name, const std::string& body) {
  std::filesystem::path dir(c.out.empty() ? "." : c.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const auto path = (dir / name).string();
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write " + path);
  out << body;
  if (!out) fail(ErrorKind::io, "failed writing " + path);
}

struct Bitext {
  std::vector<Sentence> source;
  std::vector<Sentence> target;
  std::vector<std::vector<corpus::Link>> links;
  std::vector<std::vector<int>> align;
};

std::vector<Sentence> read_required(std::string_view key, const std::string& path) {
  require_file(key, path);
  return corpus::read_sentences(path);
}

Bitext load_bitext(const std::string& source, const std::string& target,
                   const std::string& alignments, const std::string& prefix) {
  Bitext b;
  b.source = read_required(prefix + "source", source);
  b.target = read_required(prefix + "target", target);
  require_file(prefix + "alignments", alignments);
  if (b.source.size() != b.target.size()) {
    fail(ErrorKind::parse, source + " has " + std::to_string(b.source.size()) + " sentences but " +
                               target + " has " + std::to_string(b.target.size()));
  }
  if (b.source.empty()) fail(ErrorKind::empty_corpus, source + " contains no sentences");

  std::ifstream in(alignments);
  if (!in) fail(ErrorKind::io, "cannot open alignments file " + alignments);
  std::string line;
  for (std::size_t k = 0; k < b.source.size(); ++k) {
    if (!std::getline(in, line)) {
      fail(ErrorKind::parse, alignments + ": expected " + std::to_string(b.source.size()) +
                                 " alignment lines, found " + std::to_string(k));
    }
    try {
      const auto slen = b.source[k].size(), tlen = b.target[k].size();
      b.links.push_back(corpus::parse_links(line, slen, tlen, k + 1));
      b.align.push_back(corpus::parse_alignment_line(line, slen, tlen, k + 1));
    } catch (const Error& e) {
      fail(e.kind(), alignments + ": " + e.what());
    }
  }
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      fail(ErrorKind::parse, alignments + ": more alignment lines than sentence pairs");
    }
  }
  return b;
}

Bitext training_bitext(const RunConfig& c) {
  return load_bitext(c.source, c.target, c.alignments, "");
}

Bitext dev_bitext(const RunConfig& c) {
  return load_bitext(c.dev_source, c.dev_target, c.dev_alignments, "dev_");
}

std::vector<std::string> lexicon_words(const corpus::Vocabulary& v) {
  std::vector<std::string> out;
  out.reserve(v.counts().size());
  for (const auto& [tok, _] : v.counts()) out.push_back(tok);
  return out;
}

corpus::SegmentationLexicon build_lexicon(const RunConfig& c, const corpus::Vocabulary& source) {
  const auto words = lexicon_words(source);
  if (c.model.encoder.units == corpus::UnitMode::morphemes) {
    require_file("segmentations", c.segmentations);
    return corpus::SegmentationLexicon::morphemes(corpus::load_segmentations(c.segmentations), words);
  }
  return corpus::SegmentationLexicon::characters(words);
}

std::unique_ptr<osm::Model> build_model(const RunConfig& c, const Bitext& b) {
  auto sv = corpus::Vocabulary::build(std::span<const Sentence>(b.source), c.threshold);
  auto tv = corpus::Vocabulary::build(std::span<const Sentence>(b.target), c.threshold);
  auto lex = build_lexicon(c, sv);
  return std::make_unique<osm::Model>(c.model, std::move(sv), std::move(tv), std::move(lex));
}

std::vector<osm::Example> make_examples(const osm::Model& m, const Bitext& b,
                                        const std::string& where) {
  std::vector<osm::Example> out;
  out.reserve(b.source.size());
  for (std::size_t k = 0; k < b.source.size(); ++k) {
    try {
      out.push_back(m.make_example(b.source[k], b.target[k], b.align[k]));
    } catch (const Error& e) {
      fail(e.kind(), where + ": sentence " + std::to_string(k + 1) + ": " + e.what());
    }
  }
  return out;
}

LoadedModel open_archive(const RunConfig& c) {
  const auto path = c.archive_path();
  require_file("archive", path);
  return load_archive(path);
}

std::vector<std::string> read_queries(const RunConfig& c) {
  std::vector<std::string> out;
  for (const auto& s : read_required("queries", c.queries)) out.insert(out.end(), s.begin(), s.end());
  return out;
}

std::string ppl_line(const std::string& name, const eval::PerplexityReport& r) {
  return name + "\t" + real(r.word_ppl) + "\t" + real(r.align_ppl) + "\t" +
         std::to_string(r.word_decisions) + "\t" + std::to_string(r.align_decisions) + "\n";
}

}  // namespace

// vocab ---------------------------------------------------------------------

CommandResult cmd_vocab(const RunConfig& c) {
  auto src = read_required("source", c.source);
  auto tgt = read_required("target", c.target);
  auto sv = corpus::Vocabulary::build(std::span<const Sentence>(src), c.threshold);
  auto tv = corpus::Vocabulary::build(std::span<const Sentence>(tgt), c.threshold);

  std::string tsv = "side\ttoken\tcount\tid\n";
  std::string report;
  for (auto [side, v] : {std::pair<const char*, const corpus::Vocabulary*>{"source", &sv},
                         {"target", &tv}}) {
    std::size_t tokens = 0;
    for (const auto& [tok, n] : v->counts()) {
      tsv += std::string(side) + "\t" + tok + "\t" + std::to_string(n) + "\t" +
             std::to_string(v->lookup(tok)) + "\n";
      tokens += n;
    }
    report += std::string(side) + ": " + std::to_string(tokens) + " tokens, " +
              std::to_string(v->counts().size()) + " types, " + std::to_string(v->size() - 2) +
              " kept at threshold " + std::to_string(v->threshold()) + "\n";
  }
  write_output(c, "vocab.txt", report);
  write_output(c, "vocab.tsv", tsv);
  return {report};
}

// segment -------------------------------------------------------------------

CommandResult cmd_segment(const RunConfig& c) {
  auto src = read_required("source", c.source);
  auto sv = corpus::Vocabulary::build(std::span<const Sentence>(src), c.threshold);
  auto lex = build_lexicon(c, sv);
  std::string tsv = "word\tunits\tfallback\n";
  std::size_t fallback = 0;
  for (const auto& w : lexicon_words(sv)) {
    bool fb = false;
    auto units = lex.split(w, &fb);
    fallback += fb;
    tsv += w + "\t" + join(units) + "\t" + (fb ? "1" : "0") + "\n";
  }
  std::string report = "mode: " + std::string(corpus::unit_mode_name(lex.mode())) + "\n" +
                       "words: " + std::to_string(sv.counts().size()) + "\n" +
                       "units: " + std::to_string(lex.unit_count() - 2) + " (plus padding and unknown)\n";
  if (lex.mode() == corpus::UnitMode::morphemes) {
    report += "whole-word fallbacks: " + std::to_string(fallback) + "\n";
  }
  write_output(c, "segment.txt", report);
  write_output(c, "segment.tsv", tsv);
  return {report};
}

// ops -----------------------------------------------------------------------

CommandResult cmd_ops(const RunConfig& c) {
  auto b = training_bitext(c);
  std::string txt, tsv = "sentence\tstep\tjump\tword\n";
  std::size_t steps = 0;
  for (std::size_t k = 0; k < b.source.size(); ++k) {
    corpus::AlignedSentencePair pair;
    pair.source.assign(b.source[k].size(), 0);
    for (std::size_t j = 0; j < b.target[k].size(); ++j) pair.target.push_back(static_cast<int>(j));
    pair.align = b.align[k];
    auto ops = corpus::extract_operations(pair);
    std::vector<std::string> line;
    for (std::size_t j = 0; j < ops.steps.size(); ++j) {
      const auto& op = ops.steps[j];
      const bool finish = op.word == corpus::Operation::kNoWord;
      const std::string word = finish ? "FINISH" : b.target[k][static_cast<std::size_t>(op.word)];
      line.push_back(finish ? word : std::to_string(op.jump) + ":" + word);
      tsv += std::to_string(k + 1) + "\t" + std::to_string(j + 1) + "\t" + std::to_string(op.jump) +
             "\t" + word + "\n";
    }
    steps += ops.steps.size();
    txt += join(line) + "\n";
  }
  write_output(c, "ops.txt", txt);
  write_output(c, "ops.tsv", tsv);
  return {std::to_string(b.source.size()) + " sentences, " + std::to_string(steps) +
          " operations\n"};
}

// train ---------------------------------------------------------------------

CommandResult cmd_train(const RunConfig& c) {
  const auto seed = c.require_seed("train");
  auto train_set = training_bitext(c);
  if (c.dev_source.empty()) fail(ErrorKind::argument, "train needs dev_source, dev_target and dev_alignments");
  auto dev_set = dev_bitext(c);

  auto model = build_model(c, train_set);
  model->initialize(seed);
  auto train_ex = make_examples(*model, train_set, c.source);
  auto dev_ex = make_examples(*model, dev_set, c.dev_source);

  osm::TrainConfig tc = c.train;
  tc.seed = seed;
  std::string log = "epoch\ttrain_loss\tdev_log_likelihood\tlearning_rate\timproved\n";
  auto res = osm::train(*model, train_ex, dev_ex, tc, [&](const osm::EpochRecord& r) {
    log += std::to_string(r.epoch) + "\t" + real(r.train_loss) + "\t" +
           (r.dev_log_likelihood ? real(*r.dev_log_likelihood) : std::string("-")) + "\t" +
           real(r.learning_rate) + "\t" + (r.improved ? "1" : "0") + "\n";
  });

  const auto archive = c.archive_path();
  std::error_code ec;
  if (auto parent = std::filesystem::path(archive).parent_path(); !parent.empty()) {
    std::filesystem::create_directories(parent, ec);
  }
  save_archive(archive, *model, c);

  auto dev_ppl = eval::perplexities(*model, dev_ex);
  auto train_ppl = eval::perplexities(*model, train_ex);
  std::string report = "encoder: " + std::string(encoders::kind_name(c.model.encoder.kind)) +
                       " (" + std::string(corpus::unit_mode_name(c.model.encoder.units)) + ")\n" +
                       "epochs run: " + std::to_string(res.log.size()) + "\n" +
                       "best epoch: " + std::to_string(res.best_epoch) + "\n" +
                       "best dev log-likelihood: " + real(res.best_dev_log_likelihood, 10) + "\n" +
                       "stop reason: " + res.stop_reason + "\n" +
                       "train perplexity: word " + fixed(train_ppl.word_ppl, 4) + ", alignment " +
                       fixed(train_ppl.align_ppl, 4) + "\n" +
                       "dev perplexity: word " + fixed(dev_ppl.word_ppl, 4) + ", alignment " +
                       fixed(dev_ppl.align_ppl, 4) + "\n" + "archive: " + archive + "\n";
  write_output(c, "train.txt", report);
  write_output(c, "train.tsv", log);
  return {report};
}

// ppl -----------------------------------------------------------------------

CommandResult cmd_ppl(const RunConfig& c) {
  auto loaded = open_archive(c);
  const bool dev = !c.dev_source.empty();
  auto b = dev ? dev_bitext(c) : training_bitext(c);
  auto ex = make_examples(*loaded.model, b, dev ? c.dev_source : c.source);
  auto r = eval::perplexities(*loaded.model, ex);
  const std::string name = dev ? "dev" : "train";
  std::string report = name + ": word perplexity " + fixed(r.word_ppl, 4) + " over " +
                       std::to_string(r.word_decisions) + " words, alignment perplexity " +
                       fixed(r.align_ppl, 4) + " over " + std::to_string(r.align_decisions) +
                       " jumps\n";
  write_output(c, "ppl.txt", report);
  write_output(c, "ppl.tsv", "set\tword_ppl\talign_ppl\tword_decisions\talign_decisions\n" +
                                 ppl_line(name, r));
  return {report};
}

// score ---------------------------------------------------------------------

CommandResult cmd_score(const RunConfig& c) {
  auto loaded = open_archive(c);
  auto sources = read_required("source", c.source);
  require_file("nbest", c.nbest);
  std::ifstream in(c.nbest);
  if (!in) fail(ErrorKind::io, "cannot open n-best file " + c.nbest);

  std::string txt, tsv = "line\tsentence\tlog_align\tlog_word\terror\n";
  std::string line;
  std::size_t n = 0, failed = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = c.nbest + ": line " + std::to_string(n);
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      auto bar = line.find("|||", start);
      fields.push_back(line.substr(start, bar == std::string::npos ? std::string::npos : bar - start));
      if (bar == std::string::npos) break;
      start = bar + 3;
    }
    if (fields.size() != 3) fail(ErrorKind::parse, where + ": expected 'id ||| target ||| alignment'");
    auto id_tok = corpus::tokenize(fields[0]);
    std::size_t id = 0;
    if (id_tok.size() != 1 || std::sscanf(id_tok[0].c_str(), "%zu", &id) != 1 ||
        id_tok[0].find_first_not_of("0123456789") != std::string::npos) {
      fail(ErrorKind::parse, where + ": bad sentence id '" + fields[0] + "'");
    }
    if (id >= sources.size()) {
      fail(ErrorKind::parse, where + ": sentence id " + std::to_string(id) + " beyond " + c.source);
    }
    osm::Candidate cand;
    cand.target = corpus::tokenize(fields[1]);
    cand.align = corpus::parse_alignment_line(fields[2], sources[id].size(), cand.target.size(), n);
    auto scored = osm::score_nbest(*loaded.model, sources[id], std::span(&cand, 1));
    const auto& s = scored.front();
    if (s.score) {
      txt += std::to_string(id) + " ||| " + real(s.score->log_align) + " " +
             real(s.score->log_word) + "\n";
      tsv += std::to_string(n) + "\t" + std::to_string(id) + "\t" + real(s.score->log_align) +
             "\t" + real(s.score->log_word) + "\t\n";
    } else {
      ++failed;
      txt += std::to_string(id) + " ||| " + std::string(eval::kMissing) + " " +
             std::string(eval::kMissing) + "\n";
      tsv += std::to_string(n) + "\t" + std::to_string(id) + "\t\t\t" + s.error + "\n";
    }
  }
  write_output(c, "score.txt", txt);
  write_output(c, "score.tsv", tsv);
  std::string report = "scored " + std::to_string(n) + " lines";
  if (failed) report += ", " + std::to_string(failed) + " candidates could not be scored";
  return {report + "\n"};
}

// neighbors -----------------------------------------------------------------

CommandResult cmd_neighbors(const RunConfig& c) {
  auto loaded = open_archive(c);
  const auto& model = *loaded.model;
  eval::NeighborIndex index(model, lexicon_words(model.source_vocab()));
  std::string txt, tsv = "query\trank\tneighbor\tcosine\n";
  for (const auto& q : read_queries(c)) {
    auto found = index.query(q, c.neighbors);
    if (!found) {
      txt += q + "\t" + std::string(eval::kMissing) + "\n";
      tsv += q + "\t" + std::string(eval::kMissing) + "\t" + std::string(eval::kMissing) + "\t" +
             std::string(eval::kMissing) + "\n";
      continue;
    }
    std::vector<std::string> names;
    for (std::size_t r = 0; r < found->size(); ++r) {
      const auto& nb = (*found)[r];
      names.push_back(nb.word);
      tsv += q + "\t" + std::to_string(r + 1) + "\t" + nb.word + "\t" + real(nb.similarity) + "\n";
    }
    txt += q + "\t" + join(names) + "\n";
  }
  write_output(c, "neighbors.txt", txt);
  write_output(c, "neighbors.tsv", tsv);
  return {txt};
}

// synonyms ------------------------------------------------------------------

CommandResult cmd_synonyms(const RunConfig& c) {
  auto loaded = open_archive(c);
  const auto& model = *loaded.model;
  auto b = training_bitext(c);
  auto table = eval::TranslationTable::estimate(b.source, b.target, b.links);
  eval::NeighborIndex index(model, lexicon_words(model.source_vocab()));

  std::vector<std::string> queries = c.queries.empty() ? lexicon_words(model.source_vocab())
                                                       : read_queries(c);
  std::vector<eval::WordScores> scores;
  std::vector<eval::OverlapCase> cases;
  std::string tsv = "word\tcount\tband\tgold\tneighbors\toverlap\n";
  std::size_t skipped = 0;
  for (const auto& q : queries) {
    auto gold = eval::pivot_synonyms(table, q, c.synonym_top, c.synonym_floor);
    if (!gold) {
      ++skipped;
      continue;
    }
    std::vector<std::string> gold_words;
    for (const auto& [w, _] : *gold) gold_words.push_back(w);
    const auto count = model.source_vocab().count(q);
    const std::string band(corpus::band_label(corpus::frequency_band(count)));
    auto found = index.query(q, c.neighbors);
    if (!found) {
      scores.push_back({q, count, {std::nullopt}});
      tsv += q + "\t" + std::to_string(count) + "\t" + band + "\t" + join(gold_words, ",") + "\t" +
             std::string(eval::kMissing) + "\t" + std::string(eval::kMissing) + "\n";
      continue;
    }
    eval::OverlapCase oc{gold_words, {}};
    for (const auto& nb : *found) oc.neighbors.push_back(nb.word);
    const double hit = eval::multilabel_accuracy(std::span(&oc, 1));
    cases.push_back(oc);
    scores.push_back({q, count, {hit}});
    tsv += q + "\t" + std::to_string(count) + "\t" + band + "\t" + join(gold_words, ",") + "\t" +
           join(oc.neighbors, ",") + "\t" + (hit > 0 ? "1" : "0") + "\n";
  }
  auto bands = eval::band_report({"accuracy"}, scores);
  std::string report = bands.text();
  report += "overall accuracy: " +
            (cases.empty() ? std::string(eval::kMissing)
                           : fixed(eval::multilabel_accuracy(cases), 4)) +
            " over " + std::to_string(cases.size()) + " words\n";
  report += "queries without gold synonyms: " + std::to_string(skipped) + "\n";
  write_output(c, "synonyms.txt", report);
  write_output(c, "synonyms.tsv", tsv);
  return {report};
}

// morphsim ------------------------------------------------------------------

CommandResult cmd_morphsim(const RunConfig& c) {
  auto loaded = open_archive(c);
  const auto& model = *loaded.model;
  require_file("tags", c.tags);
  auto tags = eval::load_tag_lexicon(c.tags);
  eval::NeighborIndex index(model, lexicon_words(model.source_vocab()));

  std::vector<std::string> queries = c.queries.empty() ? lexicon_words(model.source_vocab())
                                                       : read_queries(c);
  std::vector<eval::WordScores> scores;
  std::string tsv = "word\tcount\tband\ttag_similarity\tlemma_share\n";
  std::size_t skipped = 0;
  for (const auto& q : queries) {
    if (!tags.find(q)) {
      ++skipped;
      continue;
    }
    const auto count = model.source_vocab().count(q);
    const std::string band(corpus::band_label(corpus::frequency_band(count)));
    auto found = index.query(q, c.neighbors);
    if (!found) {
      scores.push_back({q, count, {std::nullopt, std::nullopt}});
      tsv += q + "\t" + std::to_string(count) + "\t" + band + "\t" + std::string(eval::kMissing) +
             "\t" + std::string(eval::kMissing) + "\n";
      continue;
    }
    std::vector<std::string> names;
    double tag_sum = 0.0;
    std::size_t covered = 0;
    for (const auto& nb : *found) {
      names.push_back(nb.word);
      if (auto t = eval::tag_similarity(q, nb.word, tags)) {
        tag_sum += *t;
        ++covered;
      }
    }
    auto lemma = eval::lemma_similarity(q, names, tags);
    if (covered == 0 || !lemma) {
      ++skipped;
      continue;
    }
    const double tag_mean = tag_sum / static_cast<double>(covered);
    scores.push_back({q, count, {tag_mean, *lemma}});
    tsv += q + "\t" + std::to_string(count) + "\t" + band + "\t" + real(tag_mean) + "\t" +
           real(*lemma) + "\n";
  }
  auto bands = eval::band_report({"tags", "lemmas"}, scores);
  std::string report = bands.text();
  report += "lemmas: share of neighbours with a common lemma\n";
  report += "words skipped (no tags, or no tagged neighbour): " + std::to_string(skipped) + "\n";
  write_output(c, "morphsim.txt", report);
  write_output(c, "morphsim.tsv", tsv);
  return {report};
}

// gradcheck -----------------------------------------------------------------

CommandResult cmd_gradcheck(const RunConfig& c) {
  const auto seed = c.require_seed("gradcheck");
  auto b = training_bitext(c);
  const std::size_t n = std::min(b.source.size(), std::max<std::size_t>(c.gradcheck_sentences, 1));
  b.source.resize(n);
  b.target.resize(n);
  b.links.resize(n);
  b.align.resize(n);

  auto model = build_model(c, b);
  model->initialize(seed);
  if (c.gradcheck_range > 0) {
    num::Rng rng(seed);
    for (auto* p : model->store().all()) rng.fill_uniform(p->value, -c.gradcheck_range, c.gradcheck_range);
  }
  auto ex = make_examples(*model, b, c.source);
  auto loss = [&](num::Graph& g) {
    std::vector<num::Var> parts;
    for (const auto& e : ex) parts.push_back(model->loss(g, e));
    return num::sum(parts);
  };
  auto params = model->store().all();
  auto res = num::grad_check(loss, params, c.gradcheck_step, c.gradcheck_tolerance,
                             std::max<std::size_t>(c.gradcheck_stride, 1));

  std::string report = "encoder: " + std::string(encoders::kind_name(c.model.encoder.kind)) + "\n" +
                       "sentences: " + std::to_string(n) + "\n" +
                       "entries checked: " + std::to_string(res.entries_checked) + "\n" +
                       "max relative error: " + real(res.max_rel_error, 6) + "\n" +
                       "worst entry: " + res.worst_param + "[" + std::to_string(res.worst_index) +
                       "] analytic " + real(res.analytic, 10) + " numeric " +
                       real(res.numeric, 10) + "\n" + "tolerance: " + real(c.gradcheck_tolerance) +
                       "\n" + "result: " + (res.passed ? "PASS" : "FAIL") + "\n";
  write_output(c, "gradcheck.txt", report);
  write_output(c, "gradcheck.tsv",
               "encoder\tentries\tmax_rel_error\tworst_param\tworst_index\tpassed\n" +
                   std::string(encoders::kind_name(c.model.encoder.kind)) + "\t" +
                   std::to_string(res.entries_checked) + "\t" + real(res.max_rel_error) + "\t" +
                   res.worst_param + "\t" + std::to_string(res.worst_index) + "\t" +
                   (res.passed ? "1" : "0") + "\n");
  return {report, res.passed};
}

CommandResult run_command(const std::string& name, const RunConfig& config) {
  if (name == "vocab") return cmd_vocab(config);
  if (name == "segment") return cmd_segment(config);
  if (name == "ops") return cmd_ops(config);
  if (name == "train") return cmd_train(config);
  if (name == "ppl") return cmd_ppl(config);
  if (name == "score") return cmd_score(config);
  if (name == "neighbors") return cmd_neighbors(config);
  if (name == "synonyms") return cmd_synonyms(config);
  if (name == "morphsim") return cmd_morphsim(config);
  if (name == "gradcheck") return cmd_gradcheck(config);
  fail(ErrorKind::argument, "unknown command '" + name + "'");
}

}  // namespace nosm::app
