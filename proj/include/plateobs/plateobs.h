#ifndef PLATEOBS_H
#define PLATEOBS_H

/* C interface of libplateobs. Every call returns a status code; on failure the
 * message is available from plateobs_last_error() on the calling thread.
 * Strings returned through char** are owned by the caller and released with
 * plateobs_string_free. */

#if defined(_WIN32)
#define PLATEOBS_API __declspec(dllexport)
#else
#define PLATEOBS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum plateobs_status {
  PLATEOBS_OK = 0,
  PLATEOBS_DOMAIN = 1,          /* point or parameter outside its domain */
  PLATEOBS_VALIDATION = 2,      /* invalid configuration or argument */
  PLATEOBS_UNSUPPORTED = 3,     /* combination not covered by the model */
  PLATEOBS_ITERATION_LIMIT = 4, /* solver did not converge */
  PLATEOBS_SINGULAR = 5,        /* assembly or factorization failure */
  PLATEOBS_IO = 6,
  PLATEOBS_INTERNAL = 7
} plateobs_status;

typedef struct plateobs_series plateobs_series;
typedef struct plateobs_config plateobs_config;

typedef struct plateobs_overrides {
  const char* problem;    /* NULL keeps the config value */
  const char* output_dir; /* NULL keeps the config value */
  int threads;            /* <= 0 keeps the config value */
  int m_max;
  int nx;
  int ny;
} plateobs_overrides;

PLATEOBS_API const char* plateobs_version(void);
PLATEOBS_API const char* plateobs_last_error(void);
PLATEOBS_API void plateobs_string_free(char* s);

/* Truncated Green series for sigma in (0,1), half width l in (0, pi/2). */
PLATEOBS_API plateobs_status plateobs_series_create(double sigma, double half_width, int m_max, plateobs_series** out);
PLATEOBS_API void plateobs_series_destroy(plateobs_series* series);
PLATEOBS_API plateobs_status plateobs_series_tail_bound(const plateobs_series* series, double* out);
PLATEOBS_API plateobs_status plateobs_green_value(const plateobs_series* series, double xi, double eta, double x, double y,
                                                  double* out);
/* Response to (delta_(xi,eta) - delta_(xi,-eta)) / 2. */
PLATEOBS_API plateobs_status plateobs_antisym_value(const plateobs_series* series, double xi, double eta, double x, double y,
                                                    double* out);
PLATEOBS_API plateobs_status plateobs_threshold_M(double sigma, double half_width, int m_max, double* value, double* tail_bound);

PLATEOBS_API plateobs_status plateobs_config_parse(const char* json_text, plateobs_config** out);
PLATEOBS_API void plateobs_config_destroy(plateobs_config* config);
PLATEOBS_API plateobs_status plateobs_config_apply(plateobs_config* config, const plateobs_overrides* overrides);
/* JSON array of diagnostic strings; empty array iff runnable. */
PLATEOBS_API plateobs_status plateobs_config_validate(const plateobs_config* config, char** diagnostics_json);
/* Runs and writes the artifacts; returns the summary document. */
PLATEOBS_API plateobs_status plateobs_config_run(const plateobs_config* config, char** summary_json);

#ifdef __cplusplus
}
#endif

#endif
