/* Cascaded interactive reasoning network for natural language inference:
 * C API over the shared library. All functions return CIRN_OK on success;
 * on failure, cirn_last_error() holds a message for the calling thread. */
#ifndef CIRN_CIRN_H
#define CIRN_CIRN_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cirn_status {
  CIRN_OK = 0,
  CIRN_ERR_RUNTIME = 1, /* data or runtime failure */
  CIRN_ERR_CONFIG = 2   /* invalid configuration or usage */
} cirn_status;

const char* cirn_version(void);

/* Last error message for the calling thread; empty string when none. */
const char* cirn_last_error(void);

/* Frees strings returned through the report out-parameters. */
void cirn_free(char* p);

/* Each command takes a full run configuration as a JSON document and, when
 * report_json is non-NULL, returns a malloc'd JSON report the caller frees
 * with cirn_free(). Progress lines are written to stderr. */
cirn_status cirn_run_train(const char* config_json, char** report_json);
cirn_status cirn_run_gradcheck(const char* config_json, char** report_json);
cirn_status cirn_run_ablate(const char* config_json, char** report_json);

cirn_status cirn_run_eval(const char* checkpoint_path, const char* dataset_path,
                          char** report_json);

/* Inference handle over a trained checkpoint. */
typedef struct cirn_model cirn_model;

cirn_status cirn_model_open(const char* checkpoint_path, cirn_model** out);
void cirn_model_close(cirn_model* m);

/* Classifies a premise/hypothesis pair. probs receives the class
 * distribution in the fixed order entailment, contradiction, neutral;
 * label_id the argmax (ties toward the lowest index). */
cirn_status cirn_model_classify(cirn_model* m, const char* premise, const char* hypothesis,
                                double probs[3], int* label_id);

#ifdef __cplusplus
}
#endif

#endif /* CIRN_CIRN_H */
