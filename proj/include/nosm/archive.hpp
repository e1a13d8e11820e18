#ifndef NOSM_ARCHIVE_HPP
#define NOSM_ARCHIVE_HPP

#include <iosfwd>
#include <memory>
#include <string>

#include "nosm/osm.hpp"
#include "nosm/run_config.hpp"

namespace nosm::app {

inline constexpr int kArchiveVersion = 1;

struct LoadedModel {
  RunConfig config;
  std::unique_ptr<osm::Model> model;
};

/// Text archive: `OSMMODEL 1`, the run config, both vocabularies with
/// counts, the unit inventory and analyses, then every parameter as
/// `name ndim dims...` followed by its values at 17 significant digits.
void write_archive(std::ostream& out, const osm::Model& model, const RunConfig& config);
void save_archive(const std::string& path, const osm::Model& model, const RunConfig& config);

/// Throws ErrorKind::version on a different format version and
/// ErrorKind::parse on anything malformed.
LoadedModel read_archive(std::istream& in, const std::string& name);
LoadedModel load_archive(const std::string& path);

}  // namespace nosm::app

#endif  // NOSM_ARCHIVE_HPP
