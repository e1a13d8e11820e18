#include <cstdio>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "nosm/archive.hpp"
#include "nosm/error.hpp"
#include "nosm/run_config.hpp"

using namespace nosm;
using namespace nosm::app;

namespace {

corpus::Vocabulary vocab_of(std::vector<std::string> words) {
  std::vector<std::pair<std::string, std::size_t>> counts;
  for (auto& w : words) counts.emplace_back(w, 1);
  return corpus::Vocabulary::from_counts(counts, 1);
}

RunConfig small_config(const std::string& encoder) {
  RunConfig c;
  c.set("encoder", encoder);
  c.set("units", "char");
  c.set("source_dim", "5");
  c.set("target_dim", "4");
  c.set("hidden", "6");
  c.set("unit_dim", "5");
  c.set("lstm_hidden", "3");
  c.set("kernel_widths", "1,2");
  c.set("seed", "11");
  return c;
}

std::unique_ptr<osm::Model> small_model(const RunConfig& c) {
  std::vector<std::string> src = {"ab", "ba", "abc", "c"};
  auto m = std::make_unique<osm::Model>(c.model, vocab_of(src), vocab_of({"x", "y", "z"}),
                                        corpus::SegmentationLexicon::characters(src));
  m->initialize(*c.seed);
  return m;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::argument;
}

}  // namespace

TEST_CASE("config keys round-trip through the text form") {
  RunConfig a = small_config("bilstm");
  a.set("learning_rate", "0.1");
  a.set("source", "corpus/train.ru");
  a.set("gradcheck_range", "0.3");
  RunConfig b;
  std::istringstream lines(a.to_text());
  for (std::string line; std::getline(lines, line);) {
    auto eq = line.find(" = ");
    REQUIRE(eq != std::string::npos);
    b.set(line.substr(0, eq), line.substr(eq + 3));
  }
  CHECK(b.to_text() == a.to_text());
  CHECK(*b.get("learning_rate") == "0.10000000000000001");
  CHECK(*b.get("encoder") == "bilstm");
  CHECK(b.train.seed == 11);
}

TEST_CASE("config rejects unknown keys and bad values") {
  RunConfig c;
  CHECK(kind_of([&] { c.set("colour", "blue"); }) == ErrorKind::argument);
  CHECK(kind_of([&] { c.set("hidden", "many"); }) == ErrorKind::argument);
  CHECK(kind_of([&] { c.set("encoder", "transformer"); }) == ErrorKind::argument);
  CHECK_FALSE(c.get("colour"));
}

TEST_CASE("seed is mandatory") {
  RunConfig c;
  CHECK(kind_of([&] { c.require_seed("train"); }) == ErrorKind::argument);
  c.set("seed", "4");
  CHECK(c.require_seed("train") == 4);
}

TEST_CASE("config files: comments, later lines win, errors carry the line") {
  const std::string path = "test_app_config.conf";
  {
    std::ofstream f(path);
    f << "# comment\n\nhidden = 7\nhidden = 9\nout = results\n";
  }
  RunConfig c;
  c.load_file(path);
  CHECK(c.model.osm.hidden == 9);
  CHECK(c.archive_path() == "results/model.osm");
  {
    std::ofstream f(path);
    f << "hidden = 7\nthis line is wrong\n";
  }
  try {
    c.load_file(path);
    FAIL("accepted a malformed line");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::parse);
    CHECK(std::string(e.what()).find(path) != std::string::npos);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("missing input files name the key and path") {
  try {
    require_file("alignments", "no/such/file.align");
    FAIL("accepted a missing file");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::io);
    CHECK(std::string(e.what()).find("no/such/file.align") != std::string::npos);
  }
  CHECK(kind_of([] { require_file("alignments", ""); }) == ErrorKind::argument);
}

TEST_CASE("archive round-trip reproduces parameters and scores exactly") {
  for (const char* encoder : {"word", "bag", "bilstm", "cnn"}) {
    CAPTURE(encoder);
    RunConfig c = small_config(encoder);
    auto model = small_model(c);
    std::stringstream buf;
    write_archive(buf, *model, c);
    const std::string text = buf.str();
    auto loaded = read_archive(buf, "memory");

    const auto a = model->store().all();
    const auto b = loaded.model->store().all();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i]->name == b[i]->name);
      CHECK(a[i]->value.shape() == b[i]->value.shape());
      auto x = a[i]->value.data();
      auto y = b[i]->value.data();
      CHECK(std::equal(x.begin(), x.end(), y.begin(), y.end()));
    }
    CHECK(loaded.config.to_text() == c.to_text());

    auto ex1 = model->make_example({"ab", "zz", "c"}, {"x", "q", "z"}, {1, 0, 3});
    auto ex2 = loaded.model->make_example({"ab", "zz", "c"}, {"x", "q", "z"}, {1, 0, 3});
    auto s1 = model->sequence_score(ex1);
    auto s2 = loaded.model->sequence_score(ex2);
    CHECK(s1.log_align == s2.log_align);
    CHECK(s1.log_word == s2.log_word);

    std::stringstream again;
    write_archive(again, *loaded.model, loaded.config);
    CHECK(again.str() == text);
  }
}

TEST_CASE("archive version and format errors") {
  RunConfig c = small_config("cnn");
  auto model = small_model(c);
  std::stringstream buf;
  write_archive(buf, *model, c);
  const std::string text = buf.str();

  std::istringstream newer("OSMMODEL 2\n" + text.substr(text.find('\n') + 1));
  CHECK(kind_of([&] { read_archive(newer, "newer"); }) == ErrorKind::version);

  std::istringstream foreign("PK\x03\x04 junk\n");
  CHECK(kind_of([&] { read_archive(foreign, "foreign"); }) == ErrorKind::parse);

  std::istringstream truncated(text.substr(0, text.size() / 2));
  CHECK(kind_of([&] { read_archive(truncated, "truncated"); }) == ErrorKind::parse);

  std::string wrong_shape = text;
  wrong_shape.replace(wrong_shape.find("hidden = 6"), 10, "hidden = 7");
  std::istringstream reshaped(wrong_shape);
  CHECK(kind_of([&] { read_archive(reshaped, "reshaped"); }) == ErrorKind::parse);

  CHECK(kind_of([] { load_archive("no/such/model.osm"); }) == ErrorKind::io);
}
