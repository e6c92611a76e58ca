/* C interface to the spatially variant diffusion inpainting library.
 * All handles are opaque. Every call returns a rad_status; on failure the
 * message is available from rad_last_error() on the calling thread. */
#ifndef RAD_RAD_H
#define RAD_RAD_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RAD_API __declspec(dllexport)
#else
#define RAD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rad_status {
    RAD_OK = 0,
    RAD_ERR_INVALID_ARGUMENT = 1,
    RAD_ERR_IO = 2,
    RAD_ERR_FORMAT = 3,
    RAD_ERR_DEGENERATE_MASK = 4,
    RAD_ERR_CONTRACT = 5,
    RAD_ERR_NUMERIC = 6,
    RAD_ERR_INTERNAL = 7
} rad_status;

typedef struct rad_field rad_field;
typedef struct rad_mask rad_mask;
typedef struct rad_schedule rad_schedule;
typedef struct rad_config rad_config;
typedef struct rad_model rad_model;

RAD_API const char* rad_last_error(void);
RAD_API const char* rad_status_name(rad_status s);

/* Fields: row-major doubles. */
RAD_API rad_status rad_field_create(int height, int width, const double* values, rad_field** out);
RAD_API rad_status rad_field_load(const char* path, rad_field** out);
RAD_API rad_status rad_field_save(const rad_field* f, const char* path);
RAD_API rad_status rad_field_save_pgm(const rad_field* f, const char* path, double lo, double hi);
RAD_API rad_status rad_field_shape(const rad_field* f, int* height, int* width);
RAD_API const double* rad_field_data(const rad_field* f);
RAD_API void rad_field_destroy(rad_field* f);

/* Masks: 1 marks a pixel to inpaint. */
RAD_API rad_status rad_mask_create(int height, int width, const uint8_t* values, rad_mask** out);
RAD_API rad_status rad_mask_load_pgm(const char* path, rad_mask** out);
RAD_API rad_status rad_mask_save_pgm(const rad_mask* m, const char* path);
RAD_API rad_status rad_mask_generate(const char* kind, uint64_t seed, int height, int width, rad_mask** out);
RAD_API rad_status rad_mask_shape(const rad_mask* m, int* height, int* width);
RAD_API const uint8_t* rad_mask_data(const rad_mask* m);
RAD_API double rad_mask_area_ratio(const rad_mask* m);
RAD_API void rad_mask_destroy(rad_mask* m);
/* Writes count masks named mask_NNNN.pgm plus manifest.csv into out_dir. */
RAD_API rad_status rad_gen_masks(const char* kind, int count, uint64_t seed, int size, const char* out_dir);

/* Two-phase linear schedule. */
RAD_API rad_status rad_schedule_create(int t1, int t2, double nu, double beta_min, double beta_max,
                                       rad_schedule** out);
RAD_API int rad_schedule_total(const rad_schedule* s);
/* CSV with one row per timestep 0..T. heatmap_path may be NULL. */
RAD_API rad_status rad_schedule_dump(const rad_schedule* s, const char* csv_path, const char* heatmap_path);
RAD_API void rad_schedule_destroy(rad_schedule* s);

/* Training configuration as key/value pairs. */
RAD_API rad_status rad_config_create(rad_config** out);
RAD_API rad_status rad_config_parse_file(const char* path, rad_config** out);
RAD_API rad_status rad_config_set(rad_config* c, const char* key, const char* value);
/* Copies the value into buf (NUL-terminated); *needed gets the full length. */
RAD_API rad_status rad_config_get(const rad_config* c, const char* key, char* buf, size_t cap, size_t* needed);
RAD_API int rad_config_key_count(void);
RAD_API const char* rad_config_key_name(int index);
RAD_API void rad_config_destroy(rad_config* c);

typedef void (*rad_line_fn)(const char* line, void* user);

/* Trains and writes checkpoint.radc, loss.csv and config.txt into out_dir.
 * log may be NULL; it receives one line per log interval. */
RAD_API rad_status rad_train(const rad_config* c, const char* out_dir, rad_line_fn log, void* user);

RAD_API rad_status rad_model_load(const char* checkpoint_path, rad_model** out);
/* Analytic two-pixel Gaussian noise predictor built from the config's data parameters. */
RAD_API rad_status rad_model_oracle(const rad_config* c, rad_model** out);
RAD_API rad_status rad_model_config(const rad_model* m, rad_config** out);
RAD_API void rad_model_destroy(rad_model* m);

RAD_API rad_status rad_inpaint(rad_model* m, const rad_field* x0, const rad_mask* mask, int steps, uint64_t seed,
                               rad_field** out, int* denoiser_calls);
RAD_API rad_status rad_sample(rad_model* m, int height, int width, int steps, uint64_t seed, rad_field** out);

typedef struct rad_eval_metrics {
    int n;
    int steps;
    double preservation_max_abs;
    double masked_rmse;
    int min_denoiser_calls;
    int max_denoiser_calls;
    double inpainted_mean;
    double truth_mean;
    int has_conditional;
    double cond_mean_error;
    double cond_mean_stderr;
} rad_eval_metrics;

/* dataset may be NULL to use the model's training dataset. masks is one of
 * perlin, box, extreme, wide. report may be NULL; otherwise it receives the
 * text report through the callback. */
RAD_API rad_status rad_evaluate(rad_model* m, const char* dataset, const char* masks, int n, int steps,
                                uint64_t seed, rad_eval_metrics* out, rad_line_fn report, void* user);

/* Runs the built-in brute-force checks; returns the failure count in *failures. */
RAD_API rad_status rad_selfcheck(uint64_t seed, int inject_fault, rad_line_fn line, void* user, int* failures);

#ifdef __cplusplus
}
#endif

#endif
