#ifndef NOSM_OSM_HPP
#define NOSM_OSM_HPP

// Neural operation sequence model: a hard-attention recurrent translation
// model that alternately jumps to a source position (or NULL / FINISH) and
// emits a target word.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nosm/corpus.hpp"
#include "nosm/encoders.hpp"
#include "nosm/numkit.hpp"

namespace nosm::osm {

/// One-hot jump classes {0, 1, >=2, <=-1, NULL, FINISH} then d and d/|s|.
inline constexpr std::size_t kJumpFeatures = 8;

enum JumpClass : std::size_t {
  kJumpZero = 0,
  kJumpOne = 1,
  kJumpForward = 2,
  kJumpBack = 3,
  kJumpNull = 4,
  kJumpFinish = 5,
  kJumpDistance = 6,
  kJumpScaled = 7,
};

/// Feature matrix [(|s|+2) x 8]. Row 0 is NULL, rows 1..|s| are source
/// positions, row |s|+1 is FINISH. `last_source` is the last real source
/// position aligned to (0 before any).
num::Array jump_features(int last_source, std::size_t source_length);

struct OsmConfig {
  std::size_t target_dim = 64;  // E_T
  std::size_t hidden = 128;     // H
};

struct ModelConfig {
  encoders::EncoderConfig encoder;
  OsmConfig osm;
};

/// Translation-model parameters, owned by a ParameterStore under "osm." and
/// "tgt." names.
struct OsmParams {
  num::Parameter* target_embedding = nullptr;  // R_t [V_T x E_T]
  num::Parameter* state_w = nullptr;           // [H x (H + E_T + E_S)]
  num::Parameter* state_b = nullptr;
  num::Parameter* output_w = nullptr;          // [V_T x H]
  num::Parameter* output_b = nullptr;
  num::Parameter* source_hidden = nullptr;     // W_sh [E_S x H]
  num::Parameter* source_target = nullptr;     // W_st [E_S x E_T]
  num::Parameter* jump_bias = nullptr;         // b_f [8]
  num::Parameter* initial_state = nullptr;     // h_0 [H]
  num::Parameter* null_row = nullptr;          // r_NULL [E_S]
  num::Parameter* finish_row = nullptr;        // r_FINISH [E_S]

  static OsmParams create(num::ParameterStore& store, const OsmConfig& config,
                          std::size_t source_dim, std::size_t target_vocab);
  void initialize(num::Rng& rng) const;
};

struct DecoderState {
  num::Var h;
  int last_word = corpus::Vocabulary::kStart;
  int last_source = 0;
};

DecoderState initial_state(num::Graph& g, const OsmParams& p);

/// h' = tanh(W [h; R_t[last_word]; source_row] + b). The returned state keeps
/// last_word; last_source moves only when `jump` is a real position.
DecoderState state_update(const OsmParams& p, const DecoderState& state, num::Var source_row,
                          int jump, std::size_t source_length);

/// affine(h) over the target vocabulary; START is excluded at scoring time.
num::Var word_logits(const OsmParams& p, num::Var h);
std::vector<double> word_distribution(const OsmParams& p, num::Var h);

/// Phi b_f + R_s (W_sh h + W_st R_t[word]).
num::Var alignment_logits(const OsmParams& p, num::Var h, int word, num::Var source_matrix,
                          const num::Array& features);
std::vector<double> alignment_distribution(const OsmParams& p, num::Var h, int word,
                                           num::Var source_matrix, const num::Array& features);

struct SequenceScore {
  double log_align = 0.0;
  double log_word = 0.0;
  std::size_t align_decisions = 0;
  std::size_t word_decisions = 0;

  double total() const { return log_align + log_word; }
};

/// A source sentence ready for encoding, with its aligned target.
struct Example {
  std::vector<encoders::WordInput> source;
  corpus::AlignedSentencePair pair;
  corpus::OperationSequence ops;
};

struct ScoreVars {
  num::Var log_align;
  num::Var log_word;
  std::size_t align_decisions = 0;
  std::size_t word_decisions = 0;
};

class Model {
 public:
  Model(const ModelConfig& config, corpus::Vocabulary source_vocab,
        corpus::Vocabulary target_vocab, corpus::SegmentationLexicon lexicon);

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;

  void initialize(std::uint64_t seed);

  encoders::WordInput source_word(const std::string& token) const;
  std::vector<encoders::WordInput> encode_source(const corpus::Sentence& tokens) const;
  Example make_example(const corpus::Sentence& source, const corpus::Sentence& target,
                       std::vector<int> align) const;

  /// R_s for an encoded sentence.
  num::Var source_matrix(num::Graph& g, std::span<const encoders::WordInput> words) const;

  /// Teacher-forced pass on the tape. Throws ErrorKind::contract if the
  /// operation sequence disagrees with the pair.
  ScoreVars score_graph(num::Graph& g, const Example& example) const;
  SequenceScore sequence_score(const Example& example) const;
  /// Negative log-likelihood of one example, as a 1-element node.
  num::Var loss(num::Graph& g, const Example& example) const;

  const ModelConfig& config() const noexcept { return config_; }
  const corpus::Vocabulary& source_vocab() const noexcept { return source_vocab_; }
  const corpus::Vocabulary& target_vocab() const noexcept { return target_vocab_; }
  const corpus::SegmentationLexicon& lexicon() const noexcept { return lexicon_; }
  const encoders::SourceEncoder& encoder() const noexcept { return *encoder_; }
  const OsmParams& params() const noexcept { return osm_; }
  num::ParameterStore& store() noexcept { return *store_; }
  const num::ParameterStore& store() const noexcept { return *store_; }

 private:
  ModelConfig config_;
  corpus::Vocabulary source_vocab_;
  corpus::Vocabulary target_vocab_;
  corpus::SegmentationLexicon lexicon_;
  std::unique_ptr<num::ParameterStore> store_;
  std::unique_ptr<encoders::SourceEncoder> encoder_;
  OsmParams osm_;
};

struct TrainConfig {
  double learning_rate = 0.1;
  std::size_t max_epochs = 500;
  std::uint64_t seed = 1;
  std::size_t dev_every = 1;
  std::size_t patience = 1;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> dev_log_likelihood;
  double learning_rate = 0.0;
  bool improved = false;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  double best_dev_log_likelihood = 0.0;
  std::string stop_reason;
};

/// Stop on the first evaluation that fails to improve on the best dev
/// log-likelihood, or after `patience` consecutive such evaluations.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience);

  struct Decision {
    bool improved = false;
    bool stop = false;
  };

  Decision update(double dev_log_likelihood);
  std::optional<double> best() const noexcept { return best_; }

 private:
  std::size_t patience_;
  std::size_t bad_rounds_ = 0;
  std::optional<double> best_;
};

double corpus_log_likelihood(const Model& model, std::span<const Example> examples);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Per-sentence SGD on the joint likelihood of words and jumps. Returns with
/// the model holding the parameters of the best dev evaluation. Throws
/// ErrorKind::numeric on a non-finite loss.
TrainResult train(Model& model, std::span<const Example> train_set,
                  std::span<const Example> dev_set, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// Dev log-likelihood of the model as it stands.
using DevEvaluator = std::function<double(const Model&)>;

/// train() with the dev evaluation supplied by the caller.
TrainResult train_with(Model& model, std::span<const Example> train_set,
                       const DevEvaluator& evaluate, const TrainConfig& config,
                       const EpochCallback& on_epoch = {});

struct Candidate {
  corpus::Sentence target;
  std::vector<int> align;  // 1-based, 0 = NULL
};

struct CandidateScore {
  std::optional<SequenceScore> score;
  std::string error;
};

/// Both likelihood terms for every candidate; a bad candidate does not stop
/// the others from being scored.
std::vector<CandidateScore> score_nbest(const Model& model, const corpus::Sentence& source,
                                        std::span<const Candidate> candidates);

}  // namespace nosm::osm

#endif  // NOSM_OSM_HPP
