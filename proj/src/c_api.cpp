#include "nosm/nosm.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "nosm/archive.hpp"
#include "nosm/commands.hpp"
#include "nosm/error.hpp"
#include "nosm/eval.hpp"

struct nosm_config {
  nosm::app::RunConfig config;
};

struct nosm_model {
  nosm::app::LoadedModel loaded;
};

namespace {

thread_local std::string last_error;

nosm_status status_of(nosm::ErrorKind kind) {
  using nosm::ErrorKind;
  switch (kind) {
    case ErrorKind::argument: return NOSM_ERR_ARGUMENT;
    case ErrorKind::shape: return NOSM_ERR_SHAPE;
    case ErrorKind::parse: return NOSM_ERR_PARSE;
    case ErrorKind::io: return NOSM_ERR_IO;
    case ErrorKind::contract: return NOSM_ERR_CONTRACT;
    case ErrorKind::numeric: return NOSM_ERR_NUMERIC;
    case ErrorKind::version: return NOSM_ERR_VERSION;
    case ErrorKind::empty_corpus: return NOSM_ERR_EMPTY_CORPUS;
  }
  return NOSM_ERR_INTERNAL;
}

template <class F>
nosm_status guarded(F&& body) {
  try {
    last_error.clear();
    return body();
  } catch (const nosm::Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown failure";
  }
  return NOSM_ERR_INTERNAL;
}

nosm_status null_argument(const char* what) {
  last_error = std::string(what) + " is null";
  return NOSM_ERR_ARGUMENT;
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* nosm_last_error(void) { return last_error.c_str(); }

const char* nosm_status_name(nosm_status status) {
  switch (status) {
    case NOSM_OK: return "ok";
    case NOSM_ERR_ARGUMENT: return "argument error";
    case NOSM_ERR_SHAPE: return "shape error";
    case NOSM_ERR_PARSE: return "parse error";
    case NOSM_ERR_IO: return "I/O error";
    case NOSM_ERR_CONTRACT: return "contract violation";
    case NOSM_ERR_NUMERIC: return "numeric failure";
    case NOSM_ERR_VERSION: return "version mismatch";
    case NOSM_ERR_EMPTY_CORPUS: return "empty corpus";
    case NOSM_ERR_CHECK_FAILED: return "check failed";
    case NOSM_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void nosm_free_string(char* s) { std::free(s); }
void nosm_free_vector(double* values) { std::free(values); }

nosm_status nosm_config_create(nosm_config** out) {
  if (!out) return null_argument("out");
  return guarded([&] {
    *out = new nosm_config();
    return NOSM_OK;
  });
}

void nosm_config_free(nosm_config* config) { delete config; }

nosm_status nosm_config_load_file(nosm_config* config, const char* path) {
  if (!config) return null_argument("config");
  if (!path) return null_argument("path");
  return guarded([&] {
    config->config.load_file(path);
    return NOSM_OK;
  });
}

nosm_status nosm_config_set(nosm_config* config, const char* key, const char* value) {
  if (!config) return null_argument("config");
  if (!key) return null_argument("key");
  if (!value) return null_argument("value");
  return guarded([&] {
    config->config.set(key, value);
    return NOSM_OK;
  });
}

nosm_status nosm_config_get(const nosm_config* config, const char* key, char** value) {
  if (!config) return null_argument("config");
  if (!key) return null_argument("key");
  if (!value) return null_argument("value");
  return guarded([&] {
    auto v = config->config.get(key);
    if (!v) nosm::fail(nosm::ErrorKind::argument, std::string("unknown config key '") + key + "'");
    *value = copy_string(*v);
    return NOSM_OK;
  });
}

nosm_status nosm_config_dump(const nosm_config* config, char** text) {
  if (!config) return null_argument("config");
  if (!text) return null_argument("text");
  return guarded([&] {
    *text = copy_string(config->config.to_text());
    return NOSM_OK;
  });
}

nosm_status nosm_run(const char* command, const nosm_config* config, char** report) {
  if (!command) return null_argument("command");
  if (!config) return null_argument("config");
  if (report) *report = nullptr;
  return guarded([&] {
    auto result = nosm::app::run_command(command, config->config);
    if (report) *report = copy_string(result.report);
    if (!result.ok) {
      last_error = std::string(command) + " check failed";
      return NOSM_ERR_CHECK_FAILED;
    }
    return NOSM_OK;
  });
}

nosm_status nosm_model_load(const char* path, nosm_model** out) {
  if (!path) return null_argument("path");
  if (!out) return null_argument("out");
  return guarded([&] {
    auto m = std::make_unique<nosm_model>();
    m->loaded = nosm::app::load_archive(path);
    *out = m.release();
    return NOSM_OK;
  });
}

nosm_status nosm_model_train(const nosm_config* config, nosm_model** out) {
  if (!config) return null_argument("config");
  if (!out) return null_argument("out");
  return guarded([&] {
    nosm::app::cmd_train(config->config);
    auto m = std::make_unique<nosm_model>();
    m->loaded = nosm::app::load_archive(config->config.archive_path());
    *out = m.release();
    return NOSM_OK;
  });
}

nosm_status nosm_model_save(const nosm_model* model, const char* path) {
  if (!model) return null_argument("model");
  if (!path) return null_argument("path");
  return guarded([&] {
    nosm::app::save_archive(path, *model->loaded.model, model->loaded.config);
    return NOSM_OK;
  });
}

void nosm_model_free(nosm_model* model) { delete model; }

nosm_status nosm_model_score(const nosm_model* model, const char* source, const char* target,
                             const char* alignment, double* log_align, double* log_word) {
  if (!model) return null_argument("model");
  if (!source || !target || !alignment) return null_argument("sentence");
  if (!log_align || !log_word) return null_argument("output");
  return guarded([&] {
    const auto& m = *model->loaded.model;
    auto src = nosm::corpus::tokenize(source);
    auto tgt = nosm::corpus::tokenize(target);
    auto align = nosm::corpus::parse_alignment_line(alignment, src.size(), tgt.size(), 1);
    auto s = m.sequence_score(m.make_example(src, tgt, std::move(align)));
    *log_align = s.log_align;
    *log_word = s.log_word;
    return NOSM_OK;
  });
}

nosm_status nosm_model_word_vector(const nosm_model* model, const char* word, double** values,
                                   size_t* dim) {
  if (!model) return null_argument("model");
  if (!word) return null_argument("word");
  if (!values || !dim) return null_argument("output");
  return guarded([&] {
    const auto& m = *model->loaded.model;
    if (m.config().encoder.kind == nosm::encoders::EncoderKind::word &&
        m.source_vocab().lookup(word) == nosm::corpus::Vocabulary::kUnk) {
      nosm::fail(nosm::ErrorKind::argument,
                 std::string("word model cannot represent '") + word + "'");
    }
    auto v = m.encoder().word_vector(m.source_word(word));
    auto* out = static_cast<double*>(std::malloc(v.size() * sizeof(double)));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, v.data(), v.size() * sizeof(double));
    *values = out;
    *dim = v.size();
    return NOSM_OK;
  });
}

}  // extern "C"
