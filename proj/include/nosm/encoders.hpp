#ifndef NOSM_ENCODERS_HPP
#define NOSM_ENCODERS_HPP

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "nosm/corpus.hpp"
#include "nosm/numkit.hpp"

namespace nosm::encoders {

enum class EncoderKind { word, bag, bilstm, cnn };

std::string_view kind_name(EncoderKind kind);
EncoderKind parse_kind(std::string_view name);

struct EncoderConfig {
  EncoderKind kind = EncoderKind::word;
  corpus::UnitMode units = corpus::UnitMode::characters;
  std::size_t source_dim = 64;  // E_S
  std::size_t unit_dim = 16;    // E_u; the bag encoder sums in E_S instead
  std::size_t lstm_hidden = 32;
  std::vector<std::size_t> kernel_widths{1, 2, 3, 4, 5};
  /// Filters per width. Empty means split source_dim as evenly as possible
  /// with the remainder going to the widest kernel.
  std::vector<std::size_t> kernel_filters;
  std::size_t highway_layers = 1;

  /// Throws ErrorKind::argument when dimensions cannot agree.
  void validate() const;
  std::vector<std::size_t> filter_counts() const;
  std::size_t effective_unit_dim() const;
  std::size_t max_kernel_width() const;
};

/// A source token as the encoders see it.
struct WordInput {
  int word_id = corpus::Vocabulary::kUnk;
  corpus::Segmentation segmentation;
};

struct WordRepresentation {
  num::Var vector;  // r_w, dimension E_S
  bool used_unk_row = false;
  bool used_fallback = false;
};

/// Source-side parameters and the four word encoders. Parameters live in the
/// caller's store under the "src." prefix.
class SourceEncoder {
 public:
  SourceEncoder(const EncoderConfig& config, num::ParameterStore& store,
                std::size_t vocab_size, std::size_t unit_count);

  /// Uniform(-0.08, 0.08) for weights and embeddings, zeros for biases.
  void initialize(num::Rng& rng) const;

  num::Var encode_bag(num::Graph& g, std::span<const int> units) const;
  num::Var encode_bilstm(num::Graph& g, std::span<const int> units) const;
  num::Var encode_cnn(num::Graph& g, std::span<const int> units) const;
  /// Sub-word encoding e_w for the configured kind (not valid for `word`).
  num::Var encode_units(num::Graph& g, std::span<const int> units) const;

  /// Unit matrix [n x E_u], one row per unit.
  num::Var unit_matrix(num::Graph& g, std::span<const int> units) const;
  /// Pads with the padding unit so every kernel fits.
  std::vector<int> pad_units(std::span<const int> units) const;
  num::Var highway(num::Graph& g, num::Var x) const;

  WordRepresentation represent_word(num::Graph& g, const WordInput& word) const;
  /// Plain r_w values.
  std::vector<double> word_vector(const WordInput& word) const;

  const EncoderConfig& config() const noexcept { return config_; }

 private:
  struct Highway {
    num::Parameter* transform_w;
    num::Parameter* transform_b;
    num::Parameter* gate_w;
    num::Parameter* gate_b;
  };

  EncoderConfig config_;
  num::Parameter* word_table_ = nullptr;
  num::Parameter* unit_table_ = nullptr;
  num::LstmWeights forward_{};
  num::LstmWeights backward_{};
  num::Parameter* bilstm_w_ = nullptr;
  num::Parameter* bilstm_b_ = nullptr;
  std::vector<num::Parameter*> kernels_;
  std::vector<num::Parameter*> kernel_bias_;
  std::vector<Highway> highway_;
  std::vector<num::Parameter*> weights_;
  std::vector<num::Parameter*> biases_;
};

/// r_w = max(m_w, e_w), elementwise.
num::Var combine(num::Var word_embedding, num::Var unit_encoding);

/// Rows: r_NULL, one representation per source word, r_FINISH.
num::Var represent_source_sentence(num::Graph& g, const SourceEncoder& encoder,
                                   std::span<const WordInput> words, num::Parameter& null_row,
                                   num::Parameter& finish_row);

}  // namespace nosm::encoders

#endif  // NOSM_ENCODERS_HPP
