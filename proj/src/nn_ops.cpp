#include <algorithm>
#include <cmath>

#include "nn.hpp"

namespace x3ecg::nn {

namespace {

void check_rank(const Tensor& t, int rank, const char* op, const char* arg) {
    if (t.rank() != rank)
        fail(Status::invalid_argument, std::string(op) + ": " + arg + " must have rank " +
                                           std::to_string(rank) + ", got shape " + t.shape_str());
}

bool want_grad(Tape* tape, std::initializer_list<const Tensor*> inputs) {
    if (!tape) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

// Output positions whose receptive field stays inside [0, L) for kernel tap k.
void conv_lo_bounds(int64_t k, int64_t p, int64_t s, int64_t L, int64_t Lo, int64_t& lo_min,
                    int64_t& lo_max) {
    int64_t a = p - k;
    lo_min = a <= 0 ? 0 : (a + s - 1) / s;
    int64_t b = L - 1 + p - k;
    lo_max = b < 0 ? -1 : std::min(Lo - 1, b / s);
}

}  // namespace

// ---------------------------------------------------------------------------
// conv1d
// ---------------------------------------------------------------------------

Tensor conv1d(Tape* tape, const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int padding) {
    check_rank(x, 3, "conv1d", "input");
    check_rank(w, 3, "conv1d", "weight");
    check_rank(b, 1, "conv1d", "bias");
    if (stride < 1) fail(Status::invalid_argument, "conv1d: stride must be >= 1");
    if (padding < 0) fail(Status::invalid_argument, "conv1d: padding must be >= 0");
    int64_t N = x.dim(0), Ci = x.dim(1), L = x.dim(2);
    int64_t Co = w.dim(0), K = w.dim(2);
    if (w.dim(1) != Ci)
        fail(Status::invalid_argument, "conv1d: weight " + w.shape_str() +
                                           " does not match input channels of " + x.shape_str());
    if (b.dim(0) != Co)
        fail(Status::invalid_argument,
             "conv1d: bias " + b.shape_str() + " does not match weight " + w.shape_str());
    int64_t Lo = (L + 2 * padding - K) / stride + 1;
    if (L + 2 * padding < K || Lo < 1)
        fail(Status::invalid_argument, "conv1d: kernel " + std::to_string(K) +
                                           " too large for input " + x.shape_str() + " with padding " +
                                           std::to_string(padding));

    Tensor y = Tensor::zeros({N, Co, Lo});
    const double* xv = x.data();
    const double* wv = w.data();
    const double* bv = b.data();
    double* yv = y.data();
    const int64_t s = stride, p = padding;

    for (int64_t n = 0; n < N; ++n) {
        for (int64_t co = 0; co < Co; ++co) {
            double* yr = yv + (n * Co + co) * Lo;
            for (int64_t l = 0; l < Lo; ++l) yr[l] = bv[co];
            for (int64_t ci = 0; ci < Ci; ++ci) {
                const double* xr = xv + (n * Ci + ci) * L;
                const double* wr = wv + (co * Ci + ci) * K;
                for (int64_t k = 0; k < K; ++k) {
                    double wk = wr[k];
                    int64_t lo_min, lo_max;
                    conv_lo_bounds(k, p, s, L, Lo, lo_min, lo_max);
                    const double* xb = xr + k - p;
                    for (int64_t l = lo_min; l <= lo_max; ++l) yr[l] += wk * xb[l * s];
                }
            }
        }
    }

    if (want_grad(tape, {&x, &w, &b})) {
        y.set_requires_grad(true);
        Tensor xc = x, wc = w, bc = b, yc = y;
        tape->record([xc, wc, bc, yc, s, p, N, Ci, Co, K, L, Lo]() mutable {
            const std::vector<double>* gy = yc.grad_if();
            if (!gy) return;
            const double* dy = gy->data();
            const double* xv = xc.data();
            const double* wv = wc.data();
            double* dx = xc.requires_grad() ? xc.grad().data() : nullptr;
            double* dw = wc.requires_grad() ? wc.grad().data() : nullptr;
            double* db = bc.requires_grad() ? bc.grad().data() : nullptr;
            for (int64_t n = 0; n < N; ++n) {
                for (int64_t co = 0; co < Co; ++co) {
                    const double* dyr = dy + (n * Co + co) * Lo;
                    if (db) {
                        double sum = 0.0;
                        for (int64_t l = 0; l < Lo; ++l) sum += dyr[l];
                        db[co] += sum;
                    }
                    for (int64_t ci = 0; ci < Ci; ++ci) {
                        const double* xr = xv + (n * Ci + ci) * L;
                        const double* wr = wv + (co * Ci + ci) * K;
                        double* dxr = dx ? dx + (n * Ci + ci) * L : nullptr;
                        double* dwr = dw ? dw + (co * Ci + ci) * K : nullptr;
                        for (int64_t k = 0; k < K; ++k) {
                            int64_t lo_min, lo_max;
                            conv_lo_bounds(k, p, s, L, Lo, lo_min, lo_max);
                            int64_t base = k - p;
                            if (dwr) {
                                double sum = 0.0;
                                const double* xb = xr + base;
                                for (int64_t l = lo_min; l <= lo_max; ++l) sum += dyr[l] * xb[l * s];
                                dwr[k] += sum;
                            }
                            if (dxr) {
                                double wk = wr[k];
                                double* xb = dxr + base;
                                for (int64_t l = lo_min; l <= lo_max; ++l) xb[l * s] += wk * dyr[l];
                            }
                        }
                    }
                }
            }
        });
    }
    return y;
}

// ---------------------------------------------------------------------------
// dense
// ---------------------------------------------------------------------------

Tensor dense(Tape* tape, const Tensor& x, const Tensor& w, const Tensor& b) {
    check_rank(x, 2, "dense", "input");
    check_rank(w, 2, "dense", "weight");
    check_rank(b, 1, "dense", "bias");
    int64_t N = x.dim(0), Di = x.dim(1), Do = w.dim(0);
    if (w.dim(1) != Di)
        fail(Status::invalid_argument,
             "dense: weight " + w.shape_str() + " does not match input " + x.shape_str());
    if (b.dim(0) != Do)
        fail(Status::invalid_argument,
             "dense: bias " + b.shape_str() + " does not match weight " + w.shape_str());

    Tensor y = Tensor::zeros({N, Do});
    const double* xv = x.data();
    const double* wv = w.data();
    const double* bv = b.data();
    double* yv = y.data();
    for (int64_t n = 0; n < N; ++n) {
        const double* xr = xv + n * Di;
        double* yr = yv + n * Do;
        for (int64_t o = 0; o < Do; ++o) {
            const double* wr = wv + o * Di;
            double acc = bv[o];
            for (int64_t i = 0; i < Di; ++i) acc += xr[i] * wr[i];
            yr[o] = acc;
        }
    }

    if (want_grad(tape, {&x, &w, &b})) {
        y.set_requires_grad(true);
        Tensor xc = x, wc = w, bc = b, yc = y;
        tape->record([xc, wc, bc, yc, N, Di, Do]() mutable {
            const std::vector<double>* gy = yc.grad_if();
            if (!gy) return;
            const double* dy = gy->data();
            const double* xv = xc.data();
            const double* wv = wc.data();
            double* dx = xc.requires_grad() ? xc.grad().data() : nullptr;
            double* dw = wc.requires_grad() ? wc.grad().data() : nullptr;
            double* db = bc.requires_grad() ? bc.grad().data() : nullptr;
            for (int64_t n = 0; n < N; ++n) {
                const double* dyr = dy + n * Do;
                const double* xr = xv + n * Di;
                for (int64_t o = 0; o < Do; ++o) {
                    double g = dyr[o];
                    if (db) db[o] += g;
                    const double* wr = wv + o * Di;
                    if (dx) {
                        double* dxr = dx + n * Di;
                        for (int64_t i = 0; i < Di; ++i) dxr[i] += g * wr[i];
                    }
                    if (dw) {
                        double* dwr = dw + o * Di;
                        for (int64_t i = 0; i < Di; ++i) dwr[i] += g * xr[i];
                    }
                }
            }
        });
    }
    return y;
}

// ---------------------------------------------------------------------------
// pointwise activations
// ---------------------------------------------------------------------------

Tensor relu(Tape* tape, const Tensor& x) {
    Tensor y = Tensor::zeros(x.shape());
    const double* xv = x.data();
    double* yv = y.data();
    for (int64_t i = 0; i < x.size(); ++i) yv[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    if (want_grad(tape, {&x})) {
        y.set_requires_grad(true);
        Tensor xc = x, yc = y;
        tape->record([xc, yc]() mutable {
            const std::vector<double>* gy = yc.grad_if();
            if (!gy || !xc.requires_grad()) return;
            const double* dy = gy->data();
            const double* xv = xc.data();
            double* dx = xc.grad().data();
            for (int64_t i = 0; i < xc.size(); ++i)
                if (xv[i] > 0.0) dx[i] += dy[i];
        });
    }
    return y;
}

Tensor sigmoid(Tape* tape, const Tensor& x) {
    Tensor y = Tensor::zeros(x.shape());
    const double* xv = x.data();
    double* yv = y.data();
    for (int64_t i = 0; i < x.size(); ++i) yv[i] = stable_sigmoid(xv[i]);
    if (want_grad(tape, {&x})) {
        y.set_requires_grad(true);
        Tensor xc = x, yc = y;
        tape->record([xc, yc]() mutable {
            const std::vector<double>* gy = yc.grad_if();
            if (!gy || !xc.requires_grad()) return;
            const double* dy = gy->data();
            const double* yv = yc.data();
            double* dx = xc.grad().data();
            for (int64_t i = 0; i < xc.size(); ++i) dx[i] += dy[i] * yv[i] * (1.0 - yv[i]);
        });
    }
    return y;
}

Tensor softmax(Tape* tape, const Tensor& x, int axis) {
    if (axis < 0 || axis >= x.rank())
        fail(Status::invalid_argument, "softmax: axis " + std::to_string(axis) +
                                           " out of range for shape " + x.shape_str());
    const auto& shape = x.shape();
    int64_t outer = 1, inner = 1, len = shape[static_cast<size_t>(axis)];
    for (int i = 0; i < axis; ++i) outer *= shape[static_cast<size_t>(i)];
    for (int i = axis + 1; i < x.rank(); ++i) inner *= shape[static_cast<size_t>(i)];
    if (len < 1) fail(Status::invalid_argument, "softmax: empty axis in " + x.shape_str());

    Tensor y = Tensor::zeros(x.shape());
    const double* xv = x.data();
    double* yv = y.data();
    for (int64_t o = 0; o < outer; ++o) {
        for (int64_t in = 0; in < inner; ++in) {
            const double* src = xv + o * len * inner + in;
            double* dst = yv + o * len * inner + in;
            double m = src[0];
            for (int64_t j = 1; j < len; ++j) m = std::max(m, src[j * inner]);
            double sum = 0.0;
            for (int64_t j = 0; j < len; ++j) {
                double e = std::exp(src[j * inner] - m);
                dst[j * inner] = e;
                sum += e;
            }
            for (int64_t j = 0; j < len; ++j) dst[j * inner] /= sum;
        }
    }

    if (want_grad(tape, {&x})) {
        y.set_requires_grad(true);
        Tensor xc = x, yc = y;
        tape->record([xc, yc, outer, inner, len]() mutable {
            const std::vector<double>* gy = yc.grad_if();
            if (!gy || !xc.requires_grad()) return;
            const double* dy = gy->data();
            const double* yv = yc.data();
            double* dx = xc.grad().data();
            for (int64_t o = 0; o < outer; ++o) {
                for (int64_t in = 0; in < inner; ++in) {
                    const double* yr = yv + o * len * inner + in;
                    const double* gr = dy + o * len * inner + in;
                    double* xr = dx + o * len * inner + in;
                    double dot = 0.0;
                    for (int64_t j = 0; j < len; ++j) dot += gr[j * inner] * yr[j * inner];
                    for (int64_t j = 0; j < len; ++j)
                        xr[j * inner] += yr[j * inner] * (gr[j * inner] - dot);
                }
            }
        });
    }
    return y;
}

Tensor dropout(Tape* tape, const Tensor& x, double p, Mode mode, Rng& rng) {
    if (!(p >= 0.0) || !(p < 1.0))
        fail(Status::invalid_argument, "dropout: p must be in [0, 1), got " + format_double(p));
    if (mode == Mode::eval || p == 0.0) return x;

    double scale = 1.0 / (1.0 - p);
    auto mask = std::make_shared<std::vector<uint8_t>>(static_cast<size_t>(x.size()));
    Tensor y = Tensor::zeros(x.shape());
    const double* xv = x.data();
    double* yv = y.data();
    for (int64_t i = 0; i < x.size(); ++i) {
        bool keep = rng.uniform() >= p;
        (*mask)[static_cast<size_t>(i)] = keep;
        yv[i] = keep ? xv[i] * scale : 0.0;
    }
    if (want_grad(tape, {&x})) {
        y.set_requires_grad(true);
        Tensor xc = x, yc = y;
        tape->record([xc, yc, mask, scale]() mutable {
            const std::vector<double>* gy = yc.grad_if();
            if (!gy || !xc.requires_grad()) return;
            const double* dy = gy->data();
            double* dx = xc.grad().data();
            for (int64_t i = 0; i < xc.size(); ++i)
                if ((*mask)[static_cast<size_t>(i)]) dx[i] += dy[i] * scale;
        });
    }
    return y;
}

// ---------------------------------------------------------------------------
// batch normalization
// ---------------------------------------------------------------------------

void BatchNormState::init(int64_t channels) {
    running_mean.assign(static_cast<size_t>(channels), 0.0);
    running_var.assign(static_cast<size_t>(channels), 1.0);
}

Tensor batchnorm1d(Tape* tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   BatchNormState& state, Mode mode, double eps, double momentum) {
    if (x.rank() != 2 && x.rank() != 3)
        fail(Status::invalid_argument, "batchnorm1d: input must be [N,C] or [N,C,L], got " +
                                           x.shape_str());
    int64_t N = x.dim(0), C = x.dim(1), L = x.rank() == 3 ? x.dim(2) : 1;
    check_rank(gamma, 1, "batchnorm1d", "gamma");
    check_rank(beta, 1, "batchnorm1d", "beta");
    if (gamma.dim(0) != C || beta.dim(0) != C)
        fail(Status::invalid_argument, "batchnorm1d: gamma/beta must have " + std::to_string(C) +
                                           " channels for input " + x.shape_str());
    if (state.running_mean.size() != static_cast<size_t>(C))
        fail(Status::invalid_argument, "batchnorm1d: state has " +
                                           std::to_string(state.running_mean.size()) +
                                           " channels, input " + x.shape_str());
    if (mode == Mode::train && N < 2)
        fail(Status::invalid_argument,
             "batchnorm1d: train mode needs batch size >= 2, got " + std::to_string(N));

    int64_t m = N * L;
    std::vector<double> mean(static_cast<size_t>(C)), invstd(static_cast<size_t>(C));
    const double* xv = x.data();

    if (mode == Mode::train) {
        for (int64_t c = 0; c < C; ++c) {
            double s = 0.0;
            for (int64_t n = 0; n < N; ++n) {
                const double* xr = xv + (n * C + c) * L;
                for (int64_t l = 0; l < L; ++l) s += xr[l];
            }
            mean[static_cast<size_t>(c)] = s / static_cast<double>(m);
        }
        for (int64_t c = 0; c < C; ++c) {
            double mu = mean[static_cast<size_t>(c)];
            double s = 0.0;
            for (int64_t n = 0; n < N; ++n) {
                const double* xr = xv + (n * C + c) * L;
                for (int64_t l = 0; l < L; ++l) s += (xr[l] - mu) * (xr[l] - mu);
            }
            double var = s / static_cast<double>(m);
            invstd[static_cast<size_t>(c)] = 1.0 / std::sqrt(var + eps);
            double unbiased = m > 1 ? s / static_cast<double>(m - 1) : var;
            state.running_mean[static_cast<size_t>(c)] =
                (1.0 - momentum) * state.running_mean[static_cast<size_t>(c)] + momentum * mu;
            state.running_var[static_cast<size_t>(c)] =
                (1.0 - momentum) * state.running_var[static_cast<size_t>(c)] + momentum * unbiased;
        }
    } else {
        for (int64_t c = 0; c < C; ++c) {
            mean[static_cast<size_t>(c)] = state.running_mean[static_cast<size_t>(c)];
            invstd[static_cast<size_t>(c)] =
                1.0 / std::sqrt(state.running_var[static_cast<size_t>(c)] + eps);
        }
    }

    Tensor y = Tensor::zeros(x.shape());
    auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(x.size()));
    const double* gv = gamma.data();
    const double* bv = beta.data();
    double* yv = y.data();
    for (int64_t n = 0; n < N; ++n) {
        for (int64_t c = 0; c < C; ++c) {
            const double* xr = xv + (n * C + c) * L;
            double* yr = yv + (n * C + c) * L;
            double* hr = xhat->data() + (n * C + c) * L;
            double mu = mean[static_cast<size_t>(c)], is = invstd[static_cast<size_t>(c)];
            double g = gv[c], be = bv[c];
            for (int64_t l = 0; l < L; ++l) {
                double h = (xr[l] - mu) * is;
                hr[l] = h;
                yr[l] = g * h + be;
            }
        }
    }

    if (want_grad(tape, {&x, &gamma, &beta})) {
        y.set_requires_grad(true);
        Tensor xc = x, gc = gamma, bc = beta, yc = y;
        bool train = mode == Mode::train;
        auto istd = std::make_shared<std::vector<double>>(invstd);
        tape->record([xc, gc, bc, yc, xhat, istd, train, N, C, L, m]() mutable {
            const std::vector<double>* gy = yc.grad_if();
            if (!gy) return;
            const double* dy = gy->data();
            const double* hv = xhat->data();
            const double* gv = gc.data();
            double* dgamma = gc.requires_grad() ? gc.grad().data() : nullptr;
            double* dbeta = bc.requires_grad() ? bc.grad().data() : nullptr;
            double* dx = xc.requires_grad() ? xc.grad().data() : nullptr;
            for (int64_t c = 0; c < C; ++c) {
                double sum_dy = 0.0, sum_dyh = 0.0;
                for (int64_t n = 0; n < N; ++n) {
                    const double* dyr = dy + (n * C + c) * L;
                    const double* hr = hv + (n * C + c) * L;
                    for (int64_t l = 0; l < L; ++l) {
                        sum_dy += dyr[l];
                        sum_dyh += dyr[l] * hr[l];
                    }
                }
                if (dbeta) dbeta[c] += sum_dy;
                if (dgamma) dgamma[c] += sum_dyh;
                if (dx) {
                    double is = (*istd)[static_cast<size_t>(c)];
                    double g = gv[c];
                    double mean_dy = sum_dy / static_cast<double>(m);
                    double mean_dyh = sum_dyh / static_cast<double>(m);
                    for (int64_t n = 0; n < N; ++n) {
                        const double* dyr = dy + (n * C + c) * L;
                        const double* hr = hv + (n * C + c) * L;
                        double* dxr = dx + (n * C + c) * L;
                        if (train) {
                            for (int64_t l = 0; l < L; ++l)
                                dxr[l] += g * is * (dyr[l] - mean_dy - hr[l] * mean_dyh);
                        } else {
                            for (int64_t l = 0; l < L; ++l) dxr[l] += g * is * dyr[l];
                        }
                    }
                }
            }
        });
    }
    return y;
}

// ---------------------------------------------------------------------------
// pooling
// ---------------------------------------------------------------------------

Tensor max_pool1d(Tape* tape, const Tensor& x, int kernel, int stride, int padding) {
    check_rank(x, 3, "max_pool1d", "input");
    if (kernel < 1 || stride < 1 || padding < 0 || padding >= kernel)
        fail(Status::invalid_argument, "max_pool1d: bad kernel/stride/padding " +
                                           std::to_string(kernel) + "/" + std::to_string(stride) +
                                           "/" + std::to_string(padding));
    int64_t N = x.dim(0), C = x.dim(1), L = x.dim(2);
    int64_t Lo = (L + 2 * padding - kernel) / stride + 1;
    if (Lo < 1)
        fail(Status::invalid_argument,
             "max_pool1d: window larger than padded input " + x.shape_str());

    Tensor y = Tensor::zeros({N, C, Lo});
    auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(N * C * Lo));
    const double* xv = x.data();
    double* yv = y.data();
    for (int64_t n = 0; n < N; ++n) {
        for (int64_t c = 0; c < C; ++c) {
            const double* xr = xv + (n * C + c) * L;
            double* yr = yv + (n * C + c) * Lo;
            int64_t* ar = argmax->data() + (n * C + c) * Lo;
            for (int64_t lo = 0; lo < Lo; ++lo) {
                int64_t begin = std::max<int64_t>(0, lo * stride - padding);
                int64_t end = std::min<int64_t>(L, lo * stride - padding + kernel);
                if (begin >= end) fail(Status::internal, "max_pool1d: empty window");
                int64_t best = begin;
                double bv = xr[begin];
                for (int64_t i = begin + 1; i < end; ++i)
                    if (xr[i] > bv) {
                        bv = xr[i];
                        best = i;
                    }
                yr[lo] = bv;
                ar[lo] = best;
            }
        }
    }

    if (want_grad(tape, {&x})) {
        y.set_requires_grad(true);
        Tensor xc = x, yc = y;
        tape->record([xc, yc, argmax, N, C, L, Lo]() mutable {
            const std::vector<double>* gy = yc.grad_if();
            if (!gy || !xc.requires_grad()) return;
            const double* dy = gy->data();
            double* dx = xc.grad().data();
            for (int64_t n = 0; n < N; ++n)
                for (int64_t c = 0; c < C; ++c) {
                    const double* dyr = dy + (n * C + c) * Lo;
                    const int64_t* ar = argmax->data() + (n * C + c) * Lo;
                    double* dxr = dx + (n * C + c) * L;
                    for (int64_t lo = 0; lo < Lo; ++lo) dxr[ar[lo]] += dyr[lo];
                }
        });
    }
    return y;
}

Tensor global_avg_pool1d(Tape* tape, const Tensor& x) {
    check_rank(x, 3, "global_avg_pool1d", "input");
    int64_t N = x.dim(0), C = x.dim(1), L = x.dim(2);
    if (L < 1) fail(Status::invalid_argument, "global_avg_pool1d: empty length axis");
    Tensor y = Tensor::zeros({N, C});
    const double* xv = x.data();
    double* yv = y.data();
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const double* xr = xv + (n * C + c) * L;
            double s = 0.0;
            for (int64_t l = 0; l < L; ++l) s += xr[l];
            yv[n * C + c] = s / static_cast<double>(L);
        }
    if (want_grad(tape, {&x})) {
        y.set_requires_grad(true);
        Tensor xc = x, yc = y;
        tape->record([xc, yc, N, C, L]() mutable {
            const std::vector<double>* gy = yc.grad_if();
            if (!gy || !xc.requires_grad()) return;
            const double* dy = gy->data();
            double* dx = xc.grad().data();
            double inv = 1.0 / static_cast<double>(L);
            for (int64_t n = 0; n < N; ++n)
                for (int64_t c = 0; c < C; ++c) {
                    double g = dy[n * C + c] * inv;
                    double* dxr = dx + (n * C + c) * L;
                    for (int64_t l = 0; l < L; ++l) dxr[l] += g;
                }
        });
    }
    return y;
}

// ---------------------------------------------------------------------------
// structural ops
// ---------------------------------------------------------------------------

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        fail(Status::invalid_argument,
             "add: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    Tensor y = Tensor::zeros(a.shape());
    const double* av = a.data();
    const double* bv = b.data();
    double* yv = y.data();
    for (int64_t i = 0; i < a.size(); ++i) yv[i] = av[i] + bv[i];
    if (want_grad(tape, {&a, &b})) {
        y.set_requires_grad(true);
        Tensor ac = a, bc = b, yc = y;
        tape->record([ac, bc, yc]() mutable {
            const std::vector<double>* gy = yc.grad_if();
            if (!gy) return;
            const double* dy = gy->data();
            if (ac.requires_grad()) {
                double* da = ac.grad().data();
                for (int64_t i = 0; i < ac.size(); ++i) da[i] += dy[i];
            }
            if (bc.requires_grad()) {
                double* db = bc.grad().data();
                for (int64_t i = 0; i < bc.size(); ++i) db[i] += dy[i];
            }
        });
    }
    return y;
}

Tensor scalar_mul(Tape* tape, const Tensor& x, double c) {
    Tensor y = Tensor::zeros(x.shape());
    const double* xv = x.data();
    double* yv = y.data();
    for (int64_t i = 0; i < x.size(); ++i) yv[i] = c * xv[i];
    if (want_grad(tape, {&x})) {
        y.set_requires_grad(true);
        Tensor xc = x, yc = y;
        tape->record([xc, yc, c]() mutable {
            const std::vector<double>* gy = yc.grad_if();
            if (!gy || !xc.requires_grad()) return;
            const double* dy = gy->data();
            double* dx = xc.grad().data();
            for (int64_t i = 0; i < xc.size(); ++i) dx[i] += c * dy[i];
        });
    }
    return y;
}

Tensor concat_cols(Tape* tape, const std::vector<Tensor>& xs) {
    if (xs.empty()) fail(Status::invalid_argument, "concat_cols: no inputs");
    int64_t N = xs[0].dim(0), total = 0;
    for (const Tensor& t : xs) {
        check_rank(t, 2, "concat_cols", "input");
        if (t.dim(0) != N)
            fail(Status::invalid_argument, "concat_cols: row mismatch " + t.shape_str() + " vs " +
                                               xs[0].shape_str());
        total += t.dim(1);
    }
    Tensor y = Tensor::zeros({N, total});
    double* yv = y.data();
    int64_t off = 0;
    for (const Tensor& t : xs) {
        int64_t D = t.dim(1);
        const double* tv = t.data();
        for (int64_t n = 0; n < N; ++n)
            for (int64_t d = 0; d < D; ++d) yv[n * total + off + d] = tv[n * D + d];
        off += D;
    }
    bool any = false;
    for (const Tensor& t : xs) any = any || t.requires_grad();
    if (tape && any) {
        y.set_requires_grad(true);
        std::vector<Tensor> parts = xs;
        Tensor yc = y;
        tape->record([parts, yc, N, total]() mutable {
            const std::vector<double>* gy = yc.grad_if();
            if (!gy) return;
            const double* dy = gy->data();
            int64_t off = 0;
            for (Tensor& t : parts) {
                int64_t D = t.dim(1);
                if (t.requires_grad()) {
                    double* dt = t.grad().data();
                    for (int64_t n = 0; n < N; ++n)
                        for (int64_t d = 0; d < D; ++d) dt[n * D + d] += dy[n * total + off + d];
                }
                off += D;
            }
        });
    }
    return y;
}

Tensor scale_rows(Tape* tape, const Tensor& x, const Tensor& s) {
    check_rank(x, 2, "scale_rows", "input");
    check_rank(s, 1, "scale_rows", "scale");
    int64_t N = x.dim(0), D = x.dim(1);
    if (s.dim(0) != N)
        fail(Status::invalid_argument,
             "scale_rows: scale " + s.shape_str() + " does not match input " + x.shape_str());
    Tensor y = Tensor::zeros(x.shape());
    const double* xv = x.data();
    const double* sv = s.data();
    double* yv = y.data();
    for (int64_t n = 0; n < N; ++n)
        for (int64_t d = 0; d < D; ++d) yv[n * D + d] = xv[n * D + d] * sv[n];
    if (want_grad(tape, {&x, &s})) {
        y.set_requires_grad(true);
        Tensor xc = x, sc = s, yc = y;
        tape->record([xc, sc, yc, N, D]() mutable {
            const std::vector<double>* gy = yc.grad_if();
            if (!gy) return;
            const double* dy = gy->data();
            const double* xv = xc.data();
            const double* sv = sc.data();
            if (xc.requires_grad()) {
                double* dx = xc.grad().data();
                for (int64_t n = 0; n < N; ++n)
                    for (int64_t d = 0; d < D; ++d) dx[n * D + d] += dy[n * D + d] * sv[n];
            }
            if (sc.requires_grad()) {
                double* ds = sc.grad().data();
                for (int64_t n = 0; n < N; ++n) {
                    double acc = 0.0;
                    for (int64_t d = 0; d < D; ++d) acc += dy[n * D + d] * xv[n * D + d];
                    ds[n] += acc;
                }
            }
        });
    }
    return y;
}

Tensor scale_channels(Tape* tape, const Tensor& x, const Tensor& g) {
    check_rank(x, 3, "scale_channels", "input");
    check_rank(g, 2, "scale_channels", "gate");
    int64_t N = x.dim(0), C = x.dim(1), L = x.dim(2);
    if (g.dim(0) != N || g.dim(1) != C)
        fail(Status::invalid_argument,
             "scale_channels: gate " + g.shape_str() + " does not match input " + x.shape_str());
    Tensor y = Tensor::zeros(x.shape());
    const double* xv = x.data();
    const double* gv = g.data();
    double* yv = y.data();
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            double s = gv[n * C + c];
            const double* xr = xv + (n * C + c) * L;
            double* yr = yv + (n * C + c) * L;
            for (int64_t l = 0; l < L; ++l) yr[l] = xr[l] * s;
        }
    if (want_grad(tape, {&x, &g})) {
        y.set_requires_grad(true);
        Tensor xc = x, gc = g, yc = y;
        tape->record([xc, gc, yc, N, C, L]() mutable {
            const std::vector<double>* gy = yc.grad_if();
            if (!gy) return;
            const double* dy = gy->data();
            const double* xv = xc.data();
            const double* gv = gc.data();
            if (xc.requires_grad()) {
                double* dx = xc.grad().data();
                for (int64_t n = 0; n < N; ++n)
                    for (int64_t c = 0; c < C; ++c) {
                        double s = gv[n * C + c];
                        const double* dyr = dy + (n * C + c) * L;
                        double* dxr = dx + (n * C + c) * L;
                        for (int64_t l = 0; l < L; ++l) dxr[l] += dyr[l] * s;
                    }
            }
            if (gc.requires_grad()) {
                double* dg = gc.grad().data();
                for (int64_t n = 0; n < N; ++n)
                    for (int64_t c = 0; c < C; ++c) {
                        const double* dyr = dy + (n * C + c) * L;
                        const double* xr = xv + (n * C + c) * L;
                        double acc = 0.0;
                        for (int64_t l = 0; l < L; ++l) acc += dyr[l] * xr[l];
                        dg[n * C + c] += acc;
                    }
            }
        });
    }
    return y;
}

Tensor column(Tape* tape, const Tensor& x, int64_t col) {
    check_rank(x, 2, "column", "input");
    int64_t N = x.dim(0), C = x.dim(1);
    if (col < 0 || col >= C)
        fail(Status::invalid_argument,
             "column: index " + std::to_string(col) + " out of range for " + x.shape_str());
    Tensor y = Tensor::zeros({N});
    const double* xv = x.data();
    double* yv = y.data();
    for (int64_t n = 0; n < N; ++n) yv[n] = xv[n * C + col];
    if (want_grad(tape, {&x})) {
        y.set_requires_grad(true);
        Tensor xc = x, yc = y;
        tape->record([xc, yc, N, C, col]() mutable {
            const std::vector<double>* gy = yc.grad_if();
            if (!gy || !xc.requires_grad()) return;
            const double* dy = gy->data();
            double* dx = xc.grad().data();
            for (int64_t n = 0; n < N; ++n) dx[n * C + col] += dy[n];
        });
    }
    return y;
}

Tensor reshape(Tape* tape, const Tensor& x, std::vector<int64_t> new_shape) {
    Tensor y = Tensor::from(std::move(new_shape), x.values());
    if (y.size() != x.size())
        fail(Status::invalid_argument,
             "reshape: cannot view " + x.shape_str() + " as " + y.shape_str());
    if (want_grad(tape, {&x})) {
        y.set_requires_grad(true);
        Tensor xc = x, yc = y;
        tape->record([xc, yc]() mutable {
            const std::vector<double>* gy = yc.grad_if();
            if (!gy || !xc.requires_grad()) return;
            const double* dy = gy->data();
            double* dx = xc.grad().data();
            for (int64_t i = 0; i < xc.size(); ++i) dx[i] += dy[i];
        });
    }
    return y;
}

Tensor sum_all(Tape* tape, const Tensor& x) {
    double s = 0.0;
    const double* xv = x.data();
    for (int64_t i = 0; i < x.size(); ++i) s += xv[i];
    Tensor y = Tensor::scalar(s);
    if (want_grad(tape, {&x})) {
        y.set_requires_grad(true);
        Tensor xc = x, yc = y;
        tape->record([xc, yc]() mutable {
            const std::vector<double>* gy = yc.grad_if();
            if (!gy || !xc.requires_grad()) return;
            double g = (*gy)[0];
            double* dx = xc.grad().data();
            for (int64_t i = 0; i < xc.size(); ++i) dx[i] += g;
        });
    }
    return y;
}

// ---------------------------------------------------------------------------
// losses
// ---------------------------------------------------------------------------

Tensor cross_entropy(Tape* tape, const Tensor& logits, const std::vector<int64_t>& targets) {
    check_rank(logits, 2, "cross_entropy", "logits");
    int64_t N = logits.dim(0), C = logits.dim(1);
    if (static_cast<int64_t>(targets.size()) != N)
        fail(Status::invalid_argument, "cross_entropy: " + std::to_string(targets.size()) +
                                           " targets for logits " + logits.shape_str());
    for (int64_t t : targets)
        if (t < 0 || t >= C)
            fail(Status::invalid_argument, "cross_entropy: target " + std::to_string(t) +
                                               " out of range [0, " + std::to_string(C) + ")");

    const double* lv = logits.data();
    double loss = 0.0;
    for (int64_t n = 0; n < N; ++n) {
        const double* row = lv + n * C;
        double m = row[0];
        for (int64_t c = 1; c < C; ++c) m = std::max(m, row[c]);
        double sum = 0.0;
        for (int64_t c = 0; c < C; ++c) sum += std::exp(row[c] - m);
        double lse = m + std::log(sum);
        loss += lse - row[targets[static_cast<size_t>(n)]];
    }
    Tensor y = Tensor::scalar(loss / static_cast<double>(N));

    if (want_grad(tape, {&logits})) {
        y.set_requires_grad(true);
        Tensor lc = logits, yc = y;
        auto tgt = std::make_shared<std::vector<int64_t>>(targets);
        tape->record([lc, yc, tgt, N, C]() mutable {
            const std::vector<double>* gy = yc.grad_if();
            if (!gy || !lc.requires_grad()) return;
            double go = (*gy)[0] / static_cast<double>(N);
            const double* lv = lc.data();
            double* dl = lc.grad().data();
            for (int64_t n = 0; n < N; ++n) {
                const double* row = lv + n * C;
                double m = row[0];
                for (int64_t c = 1; c < C; ++c) m = std::max(m, row[c]);
                double sum = 0.0;
                for (int64_t c = 0; c < C; ++c) sum += std::exp(row[c] - m);
                for (int64_t c = 0; c < C; ++c) {
                    double p = std::exp(row[c] - m) / sum;
                    double ind = c == (*tgt)[static_cast<size_t>(n)] ? 1.0 : 0.0;
                    dl[n * C + c] += go * (p - ind);
                }
            }
        });
    }
    return y;
}

Tensor bce_with_logits(Tape* tape, const Tensor& logits, const Tensor& targets) {
    if (logits.shape() != targets.shape())
        fail(Status::invalid_argument, "bce_with_logits: shape mismatch " + logits.shape_str() +
                                           " vs " + targets.shape_str());
    int64_t n = logits.size();
    if (n == 0) fail(Status::invalid_argument, "bce_with_logits: empty input");
    const double* lv = logits.data();
    const double* tv = targets.data();
    double loss = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        double l = lv[i], t = tv[i];
        loss += std::max(l, 0.0) - l * t + std::log1p(std::exp(-std::abs(l)));
    }
    Tensor y = Tensor::scalar(loss / static_cast<double>(n));

    if (want_grad(tape, {&logits, &targets})) {
        y.set_requires_grad(true);
        Tensor lc = logits, tc = targets, yc = y;
        tape->record([lc, tc, yc, n]() mutable {
            const std::vector<double>* gy = yc.grad_if();
            if (!gy) return;
            double go = (*gy)[0] / static_cast<double>(n);
            const double* lv = lc.data();
            const double* tv = tc.data();
            if (lc.requires_grad()) {
                double* dl = lc.grad().data();
                for (int64_t i = 0; i < n; ++i) dl[i] += go * (stable_sigmoid(lv[i]) - tv[i]);
            }
            if (tc.requires_grad()) {
                double* dt = tc.grad().data();
                for (int64_t i = 0; i < n; ++i) dt[i] -= go * lv[i];
            }
        });
    }
    return y;
}

Tensor mae(Tape* tape, const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape())
        fail(Status::invalid_argument,
             "mae: shape mismatch " + pred.shape_str() + " vs " + target.shape_str());
    int64_t n = pred.size();
    if (n == 0) fail(Status::invalid_argument, "mae: empty input");
    const double* pv = pred.data();
    const double* tv = target.data();
    double loss = 0.0;
    for (int64_t i = 0; i < n; ++i) loss += std::abs(pv[i] - tv[i]);
    Tensor y = Tensor::scalar(loss / static_cast<double>(n));

    if (want_grad(tape, {&pred, &target})) {
        y.set_requires_grad(true);
        Tensor pc = pred, tc = target, yc = y;
        tape->record([pc, tc, yc, n]() mutable {
            const std::vector<double>* gy = yc.grad_if();
            if (!gy) return;
            double go = (*gy)[0] / static_cast<double>(n);
            const double* pv = pc.data();
            const double* tv = tc.data();
            double* dp = pc.requires_grad() ? pc.grad().data() : nullptr;
            double* dt = tc.requires_grad() ? tc.grad().data() : nullptr;
            for (int64_t i = 0; i < n; ++i) {
                double d = pv[i] - tv[i];
                double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
                if (dp) dp[i] += go * s;
                if (dt) dt[i] -= go * s;
            }
        });
    }
    return y;
}

}  // namespace x3ecg::nn
