#ifndef X3ECG_H
#define X3ECG_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes shared by every entry point. The CLI maps OK to exit 0,
 * EINVAL/EIO to exit 2 (usage / IO), everything else to exit 1. */
typedef enum x3ecg_status {
    X3ECG_OK = 0,
    X3ECG_EINVAL = 1,
    X3ECG_EIO = 2,
    X3ECG_EFORMAT = 3,
    X3ECG_EDOMAIN = 4,
    X3ECG_EINTERNAL = 5,
} x3ecg_status;

/* Message of the most recent failure on this thread; empty string if none. */
const char* x3ecg_last_error(void);

/* ------------------------------------------------------------------------
 * key=value options feeding the command drivers
 * ------------------------------------------------------------------------ */
typedef struct x3ecg_options x3ecg_options;

x3ecg_options* x3ecg_options_new(void);
void x3ecg_options_free(x3ecg_options* opts);
x3ecg_status x3ecg_options_set(x3ecg_options* opts, const char* key, const char* value);
x3ecg_status x3ecg_options_load_file(x3ecg_options* opts, const char* path);

/* ------------------------------------------------------------------------
 * command drivers (the CLI subcommands)
 * ------------------------------------------------------------------------ */
x3ecg_status x3ecg_cmd_synth(const x3ecg_options* opts);
x3ecg_status x3ecg_cmd_preprocess(const x3ecg_options* opts);
x3ecg_status x3ecg_cmd_train(const x3ecg_options* opts);
x3ecg_status x3ecg_cmd_cv(const x3ecg_options* opts);
/* prints peak indices to stdout and `count=<n>` to stderr */
x3ecg_status x3ecg_cmd_rpeaks(const char* signal_path);

/* ------------------------------------------------------------------------
 * library calls
 * ------------------------------------------------------------------------ */

/* Zero-phase Butterworth bandpass (order 1..8) over n samples into y
 * (y may alias x). */
x3ecg_status x3ecg_bandpass_filtfilt(int order, double low_hz, double high_hz, double fs,
                                     const double* x, size_t n, double* y);

/* R-peak detection on one channel. *out_indices is malloc'd and must be
 * released with x3ecg_free_indices. */
x3ecg_status x3ecg_detect_rpeaks(const double* x, size_t n, int fs, int64_t** out_indices,
                                 size_t* out_count);
void x3ecg_free_indices(int64_t* indices);

/* One-hot demographic encoding into out[11]; age < 0 means missing, gender
 * is "m"/"f"/"male"/"female" (case-insensitive), anything else missing. */
x3ecg_status x3ecg_encode_demographics(double age, const char* gender, double out[11]);

/* ------------------------------------------------------------------------
 * trained models
 * ------------------------------------------------------------------------ */
typedef struct x3ecg_model x3ecg_model;

x3ecg_model* x3ecg_model_load(const char* path);
void x3ecg_model_free(x3ecg_model* m);
int x3ecg_model_num_classes(const x3ecg_model* m);
/* 0 = multi-class, 1 = multi-label */
int x3ecg_model_task(const x3ecg_model* m);
/* NULL when i is out of range */
const char* x3ecg_model_class_name(const x3ecg_model* m, int i);

/* x is the preprocessed recording, 3 leads x 5000 samples row-major.
 * demographics is the 11-entry one-hot vector or NULL when unavailable.
 * out_probs receives one probability per class (softmax over classes for
 * multi-class, per-class sigmoid for multi-label). */
x3ecg_status x3ecg_model_predict(x3ecg_model* m, const double* x, const double* demographics,
                                 double* out_probs);

#ifdef __cplusplus
}
#endif

#endif /* X3ECG_H */
