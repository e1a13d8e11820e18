#ifndef NOSM_RUN_CONFIG_HPP
#define NOSM_RUN_CONFIG_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nosm/osm.hpp"

namespace nosm::app {

/// Everything one command needs. Read from flat `key = value` files and
/// overridden key by key from the command line.
struct RunConfig {
  std::string source;
  std::string target;
  std::string alignments;
  std::string dev_source;
  std::string dev_target;
  std::string dev_alignments;
  std::string segmentations;
  std::string tags;
  std::string nbest;
  std::string queries;
  std::string archive;
  std::string out = ".";

  osm::ModelConfig model;
  std::size_t threshold = 5;
  std::optional<std::uint64_t> seed;
  osm::TrainConfig train;

  std::size_t neighbors = 20;
  std::size_t synonym_top = 5;
  std::size_t synonym_floor = 5;

  double gradcheck_step = 1e-4;
  double gradcheck_tolerance = 1e-3;
  std::size_t gradcheck_sentences = 3;
  std::size_t gradcheck_stride = 1;
  double gradcheck_range = 0.5;

  /// Throws ErrorKind::argument for unknown keys or bad values.
  void set(std::string_view key, std::string_view value);
  std::optional<std::string> get(std::string_view key) const;
  /// Applies a config file; later lines win.
  void load_file(const std::string& path);

  /// Canonical `key = value` listing of every key, in a fixed order.
  std::string to_text() const;
  static const std::vector<std::string>& keys();

  /// Path of the model archive: `archive` if set, else out/model.osm.
  std::string archive_path() const;
  std::uint64_t require_seed(std::string_view command) const;
};

/// Throws ErrorKind::io naming the key and path when a file is missing.
void require_file(std::string_view key, const std::string& path);

}  // namespace nosm::app

#endif  // NOSM_RUN_CONFIG_HPP
