#ifndef NOSM_EVAL_HPP
#define NOSM_EVAL_HPP

// Word/alignment perplexity and the nearest-neighbour intrinsic evaluation.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "nosm/corpus.hpp"
#include "nosm/osm.hpp"

namespace nosm::eval {

/// Rendered where a model cannot represent a word or band.
inline constexpr std::string_view kMissing = "−";

struct PerplexityReport {
  double word_ppl = 1.0;
  double align_ppl = 1.0;
  double log_word = 0.0;
  double log_align = 0.0;
  std::size_t word_decisions = 0;
  std::size_t align_decisions = 0;
};

/// Corpus-level token averages: exp(-sum log p / #decisions) for each kind.
PerplexityReport perplexities(std::span<const osm::SequenceScore> scores);
PerplexityReport perplexities(const osm::Model& model, std::span<const osm::Example> examples);

// Nearest neighbours --------------------------------------------------------

struct Neighbor {
  std::size_t index = 0;
  std::string word;
  double similarity = 0.0;
};

double cosine(std::span<const double> a, std::span<const double> b);

/// Top-k by cosine, excluding `exclude`, ties to the lower index. k is
/// clamped to the number of candidates.
std::vector<Neighbor> rank_neighbors(std::span<const std::vector<double>> vectors,
                                     std::span<const std::string> words,
                                     std::span<const double> query, std::size_t k,
                                     std::optional<std::size_t> exclude = std::nullopt);

/// Word representations r_w over a fixed lexicon, computed once.
class NeighborIndex {
 public:
  NeighborIndex(const osm::Model& model, std::vector<std::string> lexicon);

  /// A word-kind model cannot represent words that look up to UNK.
  bool representable(const std::string& word) const;
  std::optional<std::vector<double>> vector_of(const std::string& word) const;
  /// nullopt when the query is not representable.
  std::optional<std::vector<Neighbor>> query(const std::string& word, std::size_t k = 20) const;

  const std::vector<std::string>& words() const noexcept { return words_; }

 private:
  const osm::Model* model_;
  std::vector<std::string> words_;
  std::vector<std::vector<double>> vectors_;
  std::unordered_map<std::string, std::size_t> position_;
};

// Translation table and pivot synonyms --------------------------------------

class TranslationTable {
 public:
  /// Relative link frequencies in both directions; NULL-aligned words carry
  /// no links and are absent.
  static TranslationTable estimate(std::span<const corpus::Sentence> sources,
                                   std::span<const corpus::Sentence> targets,
                                   std::span<const std::vector<corpus::Link>> links);

  /// p(f|e), empty if e has no links.
  const std::map<std::string, double>& target_given_source(const std::string& e) const;
  /// p(e|f), empty if f has no links.
  const std::map<std::string, double>& source_given_target(const std::string& f) const;
  /// Occurrences of e as a source token in the bitext.
  std::size_t source_count(const std::string& e) const;
  /// Order of first appearance, used to break ties.
  std::optional<std::size_t> source_id(const std::string& e) const;

 private:
  std::unordered_map<std::string, std::map<std::string, double>> forward_;
  std::unordered_map<std::string, std::map<std::string, double>> backward_;
  std::unordered_map<std::string, std::size_t> counts_;
  std::unordered_map<std::string, std::size_t> ids_;
};

/// p(e'|e) = sum_f p(f|e) p(e'|f) over the full source vocabulary.
std::map<std::string, double> pivot_distribution(const TranslationTable& table,
                                                 const std::string& e);

/// Top `top` pivoted synonyms of e excluding e itself. nullopt when e has no
/// links or occurs fewer than `floor` times.
std::optional<std::vector<std::pair<std::string, double>>> pivot_synonyms(
    const TranslationTable& table, const std::string& e, std::size_t top = 5,
    std::size_t floor = 5);

struct OverlapCase {
  std::vector<std::string> gold;
  std::vector<std::string> neighbors;
};

/// Share of cases whose gold set and neighbour set intersect.
double multilabel_accuracy(std::span<const OverlapCase> cases);

// Morphology ----------------------------------------------------------------

struct Analyses {
  std::vector<std::string> lemmas;
  std::vector<std::string> tags;  // equal-length bit strings
};

class TagLexicon {
 public:
  void add(const std::string& word, Analyses analyses);
  const Analyses* find(const std::string& word) const;
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t bit_length() const noexcept { return bits_; }

 private:
  std::unordered_map<std::string, Analyses> entries_;
  std::size_t bits_ = 0;
};

/// `word<TAB>lemma1,lemma2<TAB>bits1,bits2` per line.
TagLexicon load_tag_lexicon(const std::string& path);

/// Matching positions over length.
double hamming_similarity(std::string_view a, std::string_view b);

/// Minimum Hamming similarity over all cross pairs of analyses; nullopt if
/// either word is uncovered.
std::optional<double> tag_similarity(const std::string& a, const std::string& b,
                                     const TagLexicon& lexicon);

/// Fraction of the neighbours that share at least one lemma with `word`.
std::optional<double> lemma_similarity(const std::string& word,
                                       std::span<const std::string> neighbors,
                                       const TagLexicon& lexicon);

// Band tables ---------------------------------------------------------------

/// Metric values for one test word. nullopt marks a value the model could
/// not produce.
struct WordScores {
  std::string word;
  std::size_t count = 0;
  std::vector<std::optional<double>> values;
};

struct BandCell {
  std::optional<double> mean;  // nullopt renders as the missing marker
  std::size_t words = 0;
};

struct BandRow {
  corpus::Band band;
  std::size_t words = 0;
  std::vector<BandCell> cells;
};

struct BandTable {
  std::vector<std::string> metrics;
  std::vector<BandRow> rows;  // bands with no test words are absent

  std::string text() const;
  std::string tsv() const;
};

BandTable band_report(std::vector<std::string> metrics, std::span<const WordScores> scores);

}  // namespace nosm::eval

#endif  // NOSM_EVAL_HPP
