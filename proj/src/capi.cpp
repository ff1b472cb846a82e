#include "x3ecg/x3ecg.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "commands.hpp"
#include "demographics.hpp"
#include "dsp.hpp"
#include "model.hpp"
#include "rpeak.hpp"

using namespace x3ecg;

namespace {

thread_local std::string g_last_error;

x3ecg_status status_code(Status s) {
    switch (s) {
        case Status::ok: return X3ECG_OK;
        case Status::invalid_argument: return X3ECG_EINVAL;
        case Status::io: return X3ECG_EIO;
        case Status::format: return X3ECG_EFORMAT;
        case Status::domain: return X3ECG_EDOMAIN;
        case Status::internal: return X3ECG_EINTERNAL;
    }
    return X3ECG_EINTERNAL;
}

template <typename F>
x3ecg_status guarded(F&& f) {
    try {
        f();
        g_last_error.clear();
        return X3ECG_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_code(e.code());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return X3ECG_EINTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return X3ECG_EINTERNAL;
    }
}

}  // namespace

struct x3ecg_options {
    cmd::Options opts;
};

struct x3ecg_model {
    model::X3Model m;
};

extern "C" {

const char* x3ecg_last_error(void) { return g_last_error.c_str(); }

x3ecg_options* x3ecg_options_new(void) { return new (std::nothrow) x3ecg_options(); }

void x3ecg_options_free(x3ecg_options* opts) { delete opts; }

x3ecg_status x3ecg_options_set(x3ecg_options* opts, const char* key, const char* value) {
    if (!opts || !key || !value) {
        g_last_error = "null argument";
        return X3ECG_EINVAL;
    }
    return guarded([&] { opts->opts.set(key, value); });
}

x3ecg_status x3ecg_options_load_file(x3ecg_options* opts, const char* path) {
    if (!opts || !path) {
        g_last_error = "null argument";
        return X3ECG_EINVAL;
    }
    return guarded([&] { opts->opts.load_file(path); });
}

x3ecg_status x3ecg_cmd_synth(const x3ecg_options* opts) {
    if (!opts) {
        g_last_error = "null options";
        return X3ECG_EINVAL;
    }
    return guarded([&] { cmd::run_synth(opts->opts); });
}

x3ecg_status x3ecg_cmd_preprocess(const x3ecg_options* opts) {
    if (!opts) {
        g_last_error = "null options";
        return X3ECG_EINVAL;
    }
    return guarded([&] { cmd::run_preprocess(opts->opts); });
}

x3ecg_status x3ecg_cmd_train(const x3ecg_options* opts) {
    if (!opts) {
        g_last_error = "null options";
        return X3ECG_EINVAL;
    }
    return guarded([&] { cmd::run_train(opts->opts); });
}

x3ecg_status x3ecg_cmd_cv(const x3ecg_options* opts) {
    if (!opts) {
        g_last_error = "null options";
        return X3ECG_EINVAL;
    }
    return guarded([&] { cmd::run_cv(opts->opts); });
}

x3ecg_status x3ecg_cmd_rpeaks(const char* signal_path) {
    if (!signal_path) {
        g_last_error = "null path";
        return X3ECG_EINVAL;
    }
    return guarded([&] { cmd::run_rpeaks(signal_path); });
}

x3ecg_status x3ecg_bandpass_filtfilt(int order, double low_hz, double high_hz, double fs,
                                     const double* x, size_t n, double* y) {
    if (!x || !y) {
        g_last_error = "null buffer";
        return X3ECG_EINVAL;
    }
    return guarded([&] {
        dsp::BiquadCascade c = dsp::design_butterworth_bandpass(order, low_hz, high_hz, fs);
        std::vector<double> in(x, x + n);
        std::vector<double> out = dsp::filtfilt(c, in);
        std::memcpy(y, out.data(), n * sizeof(double));
    });
}

x3ecg_status x3ecg_detect_rpeaks(const double* x, size_t n, int fs, int64_t** out_indices,
                                 size_t* out_count) {
    if (!x || !out_indices || !out_count) {
        g_last_error = "null argument";
        return X3ECG_EINVAL;
    }
    *out_indices = nullptr;
    *out_count = 0;
    return guarded([&] {
        SignalBuffer buf;
        buf.fs = fs;
        buf.samples.assign(x, x + n);
        rpeak::RPeakResult res = rpeak::detect_rpeaks(buf);
        int64_t* arr =
            static_cast<int64_t*>(std::malloc(std::max<size_t>(1, res.peak_indices.size()) *
                                              sizeof(int64_t)));
        if (!arr) fail(Status::internal, "out of memory");
        std::memcpy(arr, res.peak_indices.data(), res.peak_indices.size() * sizeof(int64_t));
        *out_indices = arr;
        *out_count = res.peak_indices.size();
    });
}

void x3ecg_free_indices(int64_t* indices) { std::free(indices); }

x3ecg_status x3ecg_encode_demographics(double age, const char* gender, double out[11]) {
    if (!out) {
        g_last_error = "null output";
        return X3ECG_EINVAL;
    }
    return guarded([&] {
        demog::Demographics d;
        if (age >= 0.0) d.age = age;
        if (gender) d.gender = demog::parse_gender(gender);
        std::array<double, demog::kVectorLen> v = demog::encode(d);
        std::memcpy(out, v.data(), v.size() * sizeof(double));
    });
}

x3ecg_model* x3ecg_model_load(const char* path) {
    if (!path) {
        g_last_error = "null path";
        return nullptr;
    }
    try {
        auto* h = new x3ecg_model{model::X3Model::load_file(path)};
        g_last_error.clear();
        return h;
    } catch (const Error& e) {
        g_last_error = e.what();
        return nullptr;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return nullptr;
    }
}

void x3ecg_model_free(x3ecg_model* m) { delete m; }

int x3ecg_model_num_classes(const x3ecg_model* m) {
    return m ? m->m.config().num_classes : 0;
}

int x3ecg_model_task(const x3ecg_model* m) {
    return m && m->m.config().task == Task::multi_label ? 1 : 0;
}

const char* x3ecg_model_class_name(const x3ecg_model* m, int i) {
    if (!m || i < 0 || static_cast<size_t>(i) >= m->m.class_names.size()) return nullptr;
    return m->m.class_names[static_cast<size_t>(i)].c_str();
}

x3ecg_status x3ecg_model_predict(x3ecg_model* m, const double* x, const double* demographics,
                                 double* out_probs) {
    if (!m || !x || !out_probs) {
        g_last_error = "null argument";
        return X3ECG_EINVAL;
    }
    return guarded([&] {
        using nn::Tensor;
        size_t len = 3 * 5000;
        Tensor xt = Tensor::from({1, 3, 5000}, std::vector<double>(x, x + len));
        Tensor dt;
        if (m->m.config().use_demographics) {
            std::vector<double> dv(11, 0.0);
            if (demographics)
                dv.assign(demographics, demographics + 11);
            else
                dv = [] {
                    demog::Demographics none;
                    std::array<double, demog::kVectorLen> v = demog::encode(none);
                    return std::vector<double>(v.begin(), v.end());
                }();
            dt = Tensor::from({1, 11}, std::move(dv));
        }
        model::ModelOutput out = m->m.forward(nullptr, xt, dt, nn::Mode::eval, nullptr, false);
        Tensor probs = m->m.config().task == Task::multi_class
                           ? nn::softmax(nullptr, out.logits, 1)
                           : nn::sigmoid(nullptr, out.logits);
        std::memcpy(out_probs, probs.data(),
                    static_cast<size_t>(probs.size()) * sizeof(double));
    });
}

}  // extern "C"
