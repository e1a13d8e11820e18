#include "nosm/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>

#include "nosm/error.hpp"

namespace nosm::app {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  T v{};
  auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc() || r.ptr != text.data() + text.size()) {
    fail(ErrorKind::argument, "bad value '" + std::string(text) + "' for " + std::string(key));
  }
  return v;
}

std::vector<std::size_t> parse_list(std::string_view key, std::string_view text) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    if (comma == std::string_view::npos) comma = text.size();
    auto item = trim(text.substr(start, comma - start));
    if (!item.empty()) out.push_back(parse_number<std::size_t>(key, item));
    start = comma + 1;
  }
  return out;
}

std::string render_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string render_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Field {
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class M>
Field text_field(M RunConfig::*member) {
  return {[member](RunConfig& c, std::string_view v) { c.*member = std::string(v); },
          [member](const RunConfig& c) { return c.*member; }};
}

#define NOSM_SIZE_FIELD(expr)                                                           \
  Field {                                                                               \
    [](RunConfig& c, std::string_view v) { c.expr = parse_number<std::size_t>(#expr, v); }, \
        [](const RunConfig& c) { return std::to_string(c.expr); }                       \
  }

#define NOSM_REAL_FIELD(expr)                                                       \
  Field {                                                                           \
    [](RunConfig& c, std::string_view v) { c.expr = parse_number<double>(#expr, v); }, \
        [](const RunConfig& c) { return render_real(c.expr); }                      \
  }

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"source", text_field(&RunConfig::source)},
      {"target", text_field(&RunConfig::target)},
      {"alignments", text_field(&RunConfig::alignments)},
      {"dev_source", text_field(&RunConfig::dev_source)},
      {"dev_target", text_field(&RunConfig::dev_target)},
      {"dev_alignments", text_field(&RunConfig::dev_alignments)},
      {"segmentations", text_field(&RunConfig::segmentations)},
      {"tags", text_field(&RunConfig::tags)},
      {"nbest", text_field(&RunConfig::nbest)},
      {"queries", text_field(&RunConfig::queries)},
      {"archive", text_field(&RunConfig::archive)},
      {"out", text_field(&RunConfig::out)},
      {"encoder",
       {[](RunConfig& c, std::string_view v) { c.model.encoder.kind = encoders::parse_kind(v); },
        [](const RunConfig& c) { return std::string(encoders::kind_name(c.model.encoder.kind)); }}},
      {"units",
       {[](RunConfig& c, std::string_view v) { c.model.encoder.units = corpus::parse_unit_mode(v); },
        [](const RunConfig& c) {
          return std::string(corpus::unit_mode_name(c.model.encoder.units));
        }}},
      {"source_dim", NOSM_SIZE_FIELD(model.encoder.source_dim)},
      {"target_dim", NOSM_SIZE_FIELD(model.osm.target_dim)},
      {"hidden", NOSM_SIZE_FIELD(model.osm.hidden)},
      {"unit_dim", NOSM_SIZE_FIELD(model.encoder.unit_dim)},
      {"lstm_hidden", NOSM_SIZE_FIELD(model.encoder.lstm_hidden)},
      {"kernel_widths",
       {[](RunConfig& c, std::string_view v) {
          c.model.encoder.kernel_widths = parse_list("kernel_widths", v);
        },
        [](const RunConfig& c) { return render_list(c.model.encoder.kernel_widths); }}},
      {"kernel_filters",
       {[](RunConfig& c, std::string_view v) {
          c.model.encoder.kernel_filters = parse_list("kernel_filters", v);
        },
        [](const RunConfig& c) { return render_list(c.model.encoder.kernel_filters); }}},
      {"highway_layers", NOSM_SIZE_FIELD(model.encoder.highway_layers)},
      {"threshold", NOSM_SIZE_FIELD(threshold)},
      {"seed",
       {[](RunConfig& c, std::string_view v) {
          if (v.empty()) {
            c.seed.reset();
          } else {
            c.seed = parse_number<std::uint64_t>("seed", v);
          }
        },
        [](const RunConfig& c) { return c.seed ? std::to_string(*c.seed) : std::string(); }}},
      {"learning_rate", NOSM_REAL_FIELD(train.learning_rate)},
      {"max_epochs", NOSM_SIZE_FIELD(train.max_epochs)},
      {"dev_every", NOSM_SIZE_FIELD(train.dev_every)},
      {"patience", NOSM_SIZE_FIELD(train.patience)},
      {"neighbors", NOSM_SIZE_FIELD(neighbors)},
      {"synonym_top", NOSM_SIZE_FIELD(synonym_top)},
      {"synonym_floor", NOSM_SIZE_FIELD(synonym_floor)},
      {"gradcheck_step", NOSM_REAL_FIELD(gradcheck_step)},
      {"gradcheck_tolerance", NOSM_REAL_FIELD(gradcheck_tolerance)},
      {"gradcheck_sentences", NOSM_SIZE_FIELD(gradcheck_sentences)},
      {"gradcheck_stride", NOSM_SIZE_FIELD(gradcheck_stride)},
      {"gradcheck_range", NOSM_REAL_FIELD(gradcheck_range)},
  };
  return table;
}

#undef NOSM_SIZE_FIELD
#undef NOSM_REAL_FIELD

const Field* find_field(std::string_view key) {
  for (const auto& [name, f] : fields()) {
    if (name == key) return &f;
  }
  return nullptr;
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
  const Field* f = find_field(key);
  if (!f) fail(ErrorKind::argument, "unknown config key '" + std::string(key) + "'");
  f->set(*this, trim(value));
  if (key == "seed" && seed) train.seed = *seed;
}

std::optional<std::string> RunConfig::get(std::string_view key) const {
  const Field* f = find_field(key);
  if (!f) return std::nullopt;
  return f->get(*this);
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open config file " + path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    auto eq = line.find('=');
    const std::string where = path + ": line " + std::to_string(n);
    if (eq == std::string::npos) fail(ErrorKind::parse, where + ": expected key = value");
    try {
      set(trim(std::string_view(line).substr(0, eq)), std::string_view(line).substr(eq + 1));
    } catch (const Error& e) {
      fail(ErrorKind::parse, where + ": " + e.what());
    }
  }
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [name, f] : fields()) out += name + " = " + f.get(*this) + "\n";
  return out;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [name, _] : fields()) v.push_back(name);
    return v;
  }();
  return names;
}

std::string RunConfig::archive_path() const {
  if (!archive.empty()) return archive;
  return (std::filesystem::path(out) / "model.osm").string();
}

std::uint64_t RunConfig::require_seed(std::string_view command) const {
  if (!seed) fail(ErrorKind::argument, std::string(command) + " needs an explicit seed");
  return *seed;
}

void require_file(std::string_view key, const std::string& path) {
  if (path.empty()) fail(ErrorKind::argument, "config key '" + std::string(key) + "' is not set");
  if (!std::filesystem::is_regular_file(path)) {
    fail(ErrorKind::io, std::string(key) + " file not found: " + path);
  }
}

}  // namespace nosm::app
