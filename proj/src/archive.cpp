#include "nosm/archive.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nosm/error.hpp"

namespace nosm::app {

namespace {

constexpr std::string_view kMagic = "OSMMODEL";

std::string real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_vocab(std::ostream& out, std::string_view side, const corpus::Vocabulary& v) {
  out << "vocab " << side << ' ' << v.threshold() << ' ' << v.counts().size() << '\n';
  for (const auto& [tok, n] : v.counts()) out << tok << '\t' << n << '\n';
}

class Reader {
 public:
  Reader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}

  std::string line() {
    std::string s;
    if (!std::getline(in_, s)) bad("unexpected end of archive");
    ++line_;
    return s;
  }

  std::vector<std::string> words() {
    std::istringstream ss(line());
    std::vector<std::string> out;
    for (std::string w; ss >> w;) out.push_back(w);
    return out;
  }

  std::vector<std::string> expect(std::string_view head, std::size_t fields) {
    auto w = words();
    if (w.size() != fields || w[0] != head) bad("expected '" + std::string(head) + "' record");
    return w;
  }

  template <class T>
  T number(const std::string& s) {
    T v{};
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) bad("bad number '" + s + "'");
    return v;
  }

  [[noreturn]] void bad(const std::string& msg) const {
    fail(ErrorKind::parse, name_ + ": line " + std::to_string(line_) + ": " + msg);
  }

 private:
  std::istream& in_;
  std::string name_;
  std::size_t line_ = 0;
};

std::pair<std::string, std::string> split_tab(Reader& r, const std::string& s) {
  auto tab = s.find('\t');
  if (tab == std::string::npos) r.bad("expected a tab-separated record");
  return {s.substr(0, tab), s.substr(tab + 1)};
}

corpus::Vocabulary read_vocab(Reader& r, std::string_view side) {
  auto head = r.expect("vocab", 4);
  if (head[1] != side) r.bad("expected the " + std::string(side) + " vocabulary");
  const auto threshold = r.number<std::size_t>(head[2]);
  const auto n = r.number<std::size_t>(head[3]);
  std::vector<std::pair<std::string, std::size_t>> counts;
  counts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto [tok, count] = split_tab(r, r.line());
    counts.emplace_back(tok, r.number<std::size_t>(count));
  }
  return corpus::Vocabulary::from_counts(std::move(counts), threshold);
}

}  // namespace

void write_archive(std::ostream& out, const osm::Model& model, const RunConfig& config) {
  out << kMagic << ' ' << kArchiveVersion << '\n';
  const std::string text = config.to_text();
  out << "config " << RunConfig::keys().size() << '\n' << text;
  write_vocab(out, "source", model.source_vocab());
  write_vocab(out, "target", model.target_vocab());

  const auto& lex = model.lexicon();
  out << "units " << corpus::unit_mode_name(lex.mode()) << ' ' << lex.units().size() << '\n';
  for (const auto& u : lex.units()) out << u << '\n';
  out << "analyses " << lex.analyses().size() << '\n';
  for (const auto& [word, morphs] : lex.analyses()) {
    out << word << '\t';
    for (std::size_t i = 0; i < morphs.size(); ++i) out << (i ? " " : "") << morphs[i];
    out << '\n';
  }

  const auto params = model.store().all();
  out << "params " << params.size() << '\n';
  for (const auto* p : params) {
    const auto& shape = p->value.shape();
    out << p->name << ' ' << shape.size();
    for (auto d : shape) out << ' ' << d;
    out << '\n';
    const auto data = p->value.data();
    for (std::size_t i = 0; i < data.size(); ++i) out << (i ? " " : "") << real(data[i]);
    out << '\n';
  }
  out << "end\n";
}

void save_archive(const std::string& path, const osm::Model& model, const RunConfig& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write archive " + path);
  write_archive(out, model, config);
  if (!out) fail(ErrorKind::io, "failed writing archive " + path);
}

LoadedModel read_archive(std::istream& in, const std::string& name) {
  Reader r(in, name);
  auto head = r.words();
  if (head.size() != 2 || head[0] != kMagic) r.bad("not a model archive");
  if (head[1] != std::to_string(kArchiveVersion)) {
    fail(ErrorKind::version, name + ": archive version " + head[1] + ", this build reads version " +
                                 std::to_string(kArchiveVersion));
  }

  LoadedModel loaded;
  const auto n_config = r.number<std::size_t>(r.expect("config", 2)[1]);
  for (std::size_t i = 0; i < n_config; ++i) {
    const std::string s = r.line();
    auto eq = s.find(" = ");
    if (eq == std::string::npos) r.bad("expected key = value");
    try {
      loaded.config.set(s.substr(0, eq), s.substr(eq + 3));
    } catch (const Error& e) {
      r.bad(e.what());
    }
  }

  auto source = read_vocab(r, "source");
  auto target = read_vocab(r, "target");

  auto units_head = r.expect("units", 3);
  const auto mode = corpus::parse_unit_mode(units_head[1]);
  std::vector<std::string> units(r.number<std::size_t>(units_head[2]));
  for (auto& u : units) u = r.line();
  std::map<std::string, std::vector<std::string>> analyses;
  const auto n_analyses = r.number<std::size_t>(r.expect("analyses", 2)[1]);
  for (std::size_t i = 0; i < n_analyses; ++i) {
    auto [word, morphs] = split_tab(r, r.line());
    std::istringstream ss(morphs);
    std::vector<std::string> m;
    for (std::string w; ss >> w;) m.push_back(w);
    analyses.emplace(word, std::move(m));
  }
  auto lexicon = corpus::SegmentationLexicon::restore(mode, std::move(units), std::move(analyses));

  auto model = std::make_unique<osm::Model>(loaded.config.model, std::move(source),
                                            std::move(target), std::move(lexicon));
  const auto params = model->store().all();
  const auto n_params = r.number<std::size_t>(r.expect("params", 2)[1]);
  if (n_params != params.size()) {
    r.bad("archive has " + std::to_string(n_params) + " parameters, the configured model has " +
          std::to_string(params.size()));
  }
  for (auto* p : params) {
    auto w = r.words();
    if (w.size() < 2 || w[0] != p->name) r.bad("expected parameter " + p->name);
    num::Shape shape;
    for (std::size_t i = 2; i < w.size(); ++i) shape.push_back(r.number<std::size_t>(w[i]));
    if (shape.size() != r.number<std::size_t>(w[1]) || shape != p->value.shape()) {
      r.bad("parameter " + p->name + " has shape " + num::shape_string(shape) + ", expected " +
            num::shape_string(p->value.shape()));
    }
    auto values = r.words();
    auto data = p->value.data();
    if (values.size() != data.size()) r.bad("parameter " + p->name + " has the wrong value count");
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = r.number<double>(values[i]);
  }
  if (r.line() != "end") r.bad("expected end marker");
  loaded.model = std::move(model);
  return loaded;
}

LoadedModel load_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open archive " + path);
  return read_archive(in, path);
}

}  // namespace nosm::app
