#ifndef NOSM_CORPUS_HPP
#define NOSM_CORPUS_HPP

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace nosm::corpus {

using Sentence = std::vector<std::string>;

/// Token <-> id map. Ids 0 and 1 are reserved for UNK and START; remaining
/// ids go to tokens whose training count reaches the threshold, in order of
/// first appearance. Counts are kept for every token seen, kept or not.
class Vocabulary {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kStart = 1;
  static constexpr std::string_view kUnkToken = "<unk>";
  static constexpr std::string_view kStartToken = "<s>";

  Vocabulary() = default;

  /// Throws ErrorKind::empty_corpus on an empty stream.
  static Vocabulary build(std::span<const std::string> tokens, std::size_t threshold = 5);
  static Vocabulary build(std::span<const Sentence> sentences, std::size_t threshold = 5);
  /// Rebuild from (token, count) pairs in first-appearance order.
  static Vocabulary from_counts(std::vector<std::pair<std::string, std::size_t>> counts,
                                std::size_t threshold);

  /// Never fails: rare or unseen tokens map to kUnk.
  int lookup(std::string_view token) const;
  std::vector<int> lookup(std::span<const std::string> tokens) const;
  const std::string& token(int id) const;
  std::size_t count(std::string_view token) const;

  std::size_t size() const noexcept { return tokens_.size(); }
  std::size_t threshold() const noexcept { return threshold_; }
  const std::vector<std::pair<std::string, std::size_t>>& counts() const noexcept {
    return counts_;
  }

 private:
  std::size_t threshold_ = 0;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  std::vector<std::pair<std::string, std::size_t>> counts_;
  std::unordered_map<std::string, std::size_t> count_index_;
};

/// Splits UTF-8 into Unicode scalar values, one string per character.
/// Malformed bytes become single-byte units.
std::vector<std::string> utf8_characters(std::string_view text);

enum class UnitMode { characters, morphemes };

std::string_view unit_mode_name(UnitMode mode);
UnitMode parse_unit_mode(std::string_view name);

struct Segmentation {
  std::vector<int> units;
  /// Morpheme mode only: the word had no analysis and is one whole-word unit.
  bool fallback = false;
};

/// Word -> sub-word unit sequences plus the unit vocabulary. Unit id 0 is the
/// padding unit and id 1 stands for units never seen when the lexicon was
/// built.
class SegmentationLexicon {
 public:
  static constexpr int kPadUnit = 0;
  static constexpr int kUnknownUnit = 1;

  SegmentationLexicon() = default;

  static SegmentationLexicon characters(std::span<const std::string> words);
  /// `analyses` maps words to their morphs. Words in `words` without an
  /// analysis contribute their whole form as a unit.
  static SegmentationLexicon morphemes(std::map<std::string, std::vector<std::string>> analyses,
                                       std::span<const std::string> words);
  /// Rebuild with an exact unit inventory (archive loading).
  static SegmentationLexicon restore(UnitMode mode, std::vector<std::string> units,
                                     std::map<std::string, std::vector<std::string>> analyses);

  /// Throws ErrorKind::argument on an empty word.
  Segmentation segment(std::string_view word) const;
  /// Unit strings for a word, before id lookup.
  std::vector<std::string> split(std::string_view word, bool* fallback = nullptr) const;

  UnitMode mode() const noexcept { return mode_; }
  std::size_t unit_count() const noexcept { return units_.size(); }
  const std::string& unit(int id) const;
  int unit_id(std::string_view unit) const;
  const std::vector<std::string>& units() const noexcept { return units_; }
  const std::map<std::string, std::vector<std::string>>& analyses() const noexcept {
    return analyses_;
  }

 private:
  void add_unit(const std::string& unit);

  UnitMode mode_ = UnitMode::characters;
  std::vector<std::string> units_;
  std::unordered_map<std::string, int> unit_ids_;
  std::map<std::string, std::vector<std::string>> analyses_;
};

/// Reads `word<TAB>unit unit ...` lines. Units may carry Morfessor category
/// tags (`/PRE`, `/STM`, `/SUF`); tagged analyses must match
/// prefix* stem+ suffix* and the tags are stripped.
std::map<std::string, std::vector<std::string>> load_segmentations(const std::string& path);
std::vector<std::string> parse_morph_analysis(std::string_view units, const std::string& where);

/// align[j] is the 1-based source position of target word j+1, or 0 for NULL.
struct AlignedSentencePair {
  std::vector<int> source;
  std::vector<int> target;
  std::vector<int> align;

  /// Throws ErrorKind::contract when lengths or indices are inconsistent.
  void validate() const;
};

/// One jump-and-generate step. FINISH steps carry no word.
struct Operation {
  static constexpr int kNoWord = -1;

  int jump = 0;
  int word = kNoWord;

  friend bool operator==(const Operation&, const Operation&) = default;
};

struct OperationSequence {
  std::vector<Operation> steps;

  friend bool operator==(const OperationSequence&, const OperationSequence&) = default;
};

struct TargetAlignment {
  std::vector<int> target;
  std::vector<int> align;

  friend bool operator==(const TargetAlignment&, const TargetAlignment&) = default;
};

OperationSequence extract_operations(const AlignedSentencePair& pair);
TargetAlignment replay_operations(const OperationSequence& ops, std::size_t source_length);

struct Link {
  std::size_t source = 0;  // 0-based
  std::size_t target = 0;

  friend bool operator==(const Link&, const Link&) = default;
};

/// Every "i-j" pair of one Pharaoh line, as given.
std::vector<Link> parse_links(std::string_view line, std::size_t source_length,
                              std::size_t target_length, std::size_t line_number);

/// Parses one Pharaoh line of 0-based "i-j" pairs into the 1-based
/// per-target convention. Multiple links keep the smallest source index.
std::vector<int> parse_alignment_line(std::string_view line, std::size_t source_length,
                                      std::size_t target_length, std::size_t line_number);
std::vector<std::vector<int>> load_alignments(const std::string& path,
                                              std::span<const std::size_t> source_lengths,
                                              std::span<const std::size_t> target_lengths);

/// One whitespace-tokenized sentence per line.
std::vector<Sentence> read_sentences(const std::string& path);
Sentence tokenize(std::string_view line);

enum class Band { b0_4, b5_9, b10_14, b15_19, b20_50, b51_up };

inline constexpr std::array<Band, 6> kAllBands = {Band::b0_4,   Band::b5_9,   Band::b10_14,
                                                 Band::b15_19, Band::b20_50, Band::b51_up};

Band frequency_band(std::size_t count);
std::string_view band_label(Band band);

}  // namespace nosm::corpus

#endif  // NOSM_CORPUS_HPP
