#ifndef NOSM_H
#define NOSM_H

/* C interface to the neural operation sequence model library. Every call
 * returns a status; on failure nosm_last_error() describes the problem for
 * the calling thread. Strings returned through char** are owned by the
 * caller and released with nosm_free_string. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum nosm_status {
  NOSM_OK = 0,
  NOSM_ERR_ARGUMENT = 1,
  NOSM_ERR_SHAPE = 2,
  NOSM_ERR_PARSE = 3,
  NOSM_ERR_IO = 4,
  NOSM_ERR_CONTRACT = 5,
  NOSM_ERR_NUMERIC = 6,
  NOSM_ERR_VERSION = 7,
  NOSM_ERR_EMPTY_CORPUS = 8,
  NOSM_ERR_CHECK_FAILED = 9,
  NOSM_ERR_INTERNAL = 10
} nosm_status;

typedef struct nosm_config nosm_config;
typedef struct nosm_model nosm_model;

const char* nosm_last_error(void);
const char* nosm_status_name(nosm_status status);
void nosm_free_string(char* s);

nosm_status nosm_config_create(nosm_config** out);
void nosm_config_free(nosm_config* config);
nosm_status nosm_config_load_file(nosm_config* config, const char* path);
nosm_status nosm_config_set(nosm_config* config, const char* key, const char* value);
nosm_status nosm_config_get(const nosm_config* config, const char* key, char** value);
/* Canonical key = value listing. */
nosm_status nosm_config_dump(const nosm_config* config, char** text);

/* Runs a subcommand (vocab, segment, ops, train, ppl, score, neighbors,
 * synonyms, morphsim, gradcheck). The report is returned through `report`
 * even when the status is NOSM_ERR_CHECK_FAILED. */
nosm_status nosm_run(const char* command, const nosm_config* config, char** report);

nosm_status nosm_model_load(const char* path, nosm_model** out);
/* Builds and trains a model from the config's corpus files. */
nosm_status nosm_model_train(const nosm_config* config, nosm_model** out);
nosm_status nosm_model_save(const nosm_model* model, const char* path);
void nosm_model_free(nosm_model* model);

/* Scores one sentence pair. `alignment` is a Pharaoh line of 0-based
 * source-target pairs. */
nosm_status nosm_model_score(const nosm_model* model, const char* source, const char* target,
                             const char* alignment, double* log_align, double* log_word);

/* Word representation r_w; `dim` receives its length. The caller frees the
 * array with nosm_free_vector. Word-kind models return NOSM_ERR_ARGUMENT for
 * words they cannot represent. */
nosm_status nosm_model_word_vector(const nosm_model* model, const char* word, double** values,
                                   size_t* dim);
void nosm_free_vector(double* values);

#ifdef __cplusplus
}
#endif

#endif /* NOSM_H */
