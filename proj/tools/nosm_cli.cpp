// nosm: command-line front end over the C interface.

#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nosm/nosm.h"

namespace {

const std::vector<std::pair<std::string, std::string>> kCommands = {
    {"vocab", "Count source and target tokens and apply the frequency threshold"},
    {"segment", "Split the training lexicon into characters or morphs"},
    {"ops", "Write the operation sequence of every training pair"},
    {"train", "Train a model and write the archive and epoch log"},
    {"ppl", "Word and alignment perplexity of an archive"},
    {"score", "Reranking features for an n-best list"},
    {"neighbors", "Cosine nearest neighbours of query words"},
    {"synonyms", "Multi-label accuracy against pivoted gold synonyms"},
    {"morphsim", "Tag and lemma similarity of nearest neighbours"},
    {"gradcheck", "Finite-difference check of the model gradients"},
};

int exit_code(nosm_status s) {
  switch (s) {
    case NOSM_OK: return 0;
    case NOSM_ERR_NUMERIC:
    case NOSM_ERR_CHECK_FAILED: return 3;
    case NOSM_ERR_INTERNAL: return 1;
    default: return 2;
  }
}

std::vector<std::string> config_keys() {
  nosm_config* cfg = nullptr;
  std::vector<std::string> keys;
  if (nosm_config_create(&cfg) != NOSM_OK) return keys;
  char* text = nullptr;
  if (nosm_config_dump(cfg, &text) == NOSM_OK) {
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
      auto eq = line.find(" = ");
      if (eq != std::string::npos) keys.push_back(line.substr(0, eq));
    }
    nosm_free_string(text);
  }
  nosm_config_free(cfg);
  return keys;
}

std::string flag_name(std::string key) {
  for (auto& ch : key) {
    if (ch == '_') ch = '-';
  }
  return "--" + key;
}

int fail_with(nosm_status s) {
  std::fprintf(stderr, "nosm: %s: %s\n", nosm_status_name(s), nosm_last_error());
  return exit_code(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural operation sequence model with sub-word source encoders"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "Flat key = value config file")->check(CLI::ExistingFile);
  std::map<std::string, std::string> overrides;
  for (const auto& key : config_keys()) {
    app.add_option(flag_name(key), overrides[key], "Overrides '" + key + "'");
  }
  for (const auto& [name, help] : kCommands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  nosm_config* cfg = nullptr;
  nosm_status s = nosm_config_create(&cfg);
  if (s != NOSM_OK) return fail_with(s);
  if (!config_path.empty()) s = nosm_config_load_file(cfg, config_path.c_str());
  for (const auto& [key, value] : overrides) {
    if (s != NOSM_OK) break;
    if (app.count(flag_name(key)) > 0) s = nosm_config_set(cfg, key.c_str(), value.c_str());
  }
  if (s != NOSM_OK) {
    nosm_config_free(cfg);
    return fail_with(s);
  }

  const std::string command = app.get_subcommands().front()->get_name();
  char* report = nullptr;
  s = nosm_run(command.c_str(), cfg, &report);
  if (report) {
    std::fputs(report, stdout);
    nosm_free_string(report);
  }
  nosm_config_free(cfg);
  return s == NOSM_OK ? 0 : fail_with(s);
}
