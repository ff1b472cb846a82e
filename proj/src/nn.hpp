#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "common.hpp"

namespace x3ecg::nn {

enum class Mode { train, eval };

// Dense float64 tensor with value semantics over a shared payload.  Gradients
// live beside the values and are allocated lazily on first touch, so a tensor
// that never receives gradient carries no extra memory and backward nodes can
// cheaply skip branches nothing flowed through.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int64_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<int64_t> shape, double value, bool requires_grad = false);
    static Tensor from(std::vector<int64_t> shape, std::vector<double> values,
                       bool requires_grad = false);
    static Tensor scalar(double value);

    bool defined() const { return static_cast<bool>(d_); }
    const std::vector<int64_t>& shape() const;
    int rank() const { return static_cast<int>(shape().size()); }
    int64_t dim(int i) const;
    int64_t size() const;  // element count

    double* data();
    const double* data() const;
    std::vector<double>& values();
    const std::vector<double>& values() const;
    double item() const;  // value of a single-element tensor

    bool requires_grad() const;
    void set_requires_grad(bool b);
    std::vector<double>& grad();             // allocates zeros on first use
    const std::vector<double>* grad_if() const;  // nullptr when never allocated
    void drop_grad();

    Tensor clone_detached() const;
    void copy_values_from(const Tensor& other);  // shapes must match

    std::string shape_str() const;

private:
    struct Payload {
        std::vector<int64_t> shape;
        std::vector<double> v;
        std::vector<double> g;  // empty until touched
        bool requires_grad = false;
    };
    std::shared_ptr<Payload> d_;
    Payload& p();
    const Payload& p() const;
};

std::string shape_str(const std::vector<int64_t>& shape);

// Reverse-mode tape.  Ops append one closure each; backward seeds the loss
// gradient with 1 and replays the closures in reverse.  A closure whose
// output never received gradient returns immediately, so unused branches
// (e.g. an auxiliary head with zero loss weight) contribute nothing at all.
class Tape {
public:
    void record(std::function<void()> node);
    size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }
    void backward(Tensor& loss);

private:
    std::vector<std::function<void()>> nodes_;
};

// --------------------------------------------------------------------------
// Operations.  `tape` may be null for inference; gradient bookkeeping is then
// skipped entirely.  Every op validates shapes and reports both sides.
// --------------------------------------------------------------------------

// x [N,Cin,L], w [Cout,Cin,K], b [Cout] -> [N,Cout,Lout]; zero padding.
Tensor conv1d(Tape* tape, const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int padding);

// x [N,Din], w [Dout,Din], b [Dout] -> [N,Dout]
Tensor dense(Tape* tape, const Tensor& x, const Tensor& w, const Tensor& b);

Tensor relu(Tape* tape, const Tensor& x);
Tensor sigmoid(Tape* tape, const Tensor& x);
Tensor softmax(Tape* tape, const Tensor& x, int axis);

// Inverted dropout; eval mode returns the input unchanged.
Tensor dropout(Tape* tape, const Tensor& x, double p, Mode mode, Rng& rng);

struct BatchNormState {
    std::vector<double> running_mean;
    std::vector<double> running_var;
    void init(int64_t channels);
};

// x [N,C] or [N,C,L]; gamma/beta [C].  Train mode normalizes with batch
// statistics (N >= 2) and updates the running stats with momentum 0.1; eval
// mode uses the running stats.
Tensor batchnorm1d(Tape* tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   BatchNormState& state, Mode mode, double eps = 1e-5, double momentum = 0.1);

// x [N,C,L] -> [N,C,Lout]; windows never read the zero padding (pad acts as -inf).
Tensor max_pool1d(Tape* tape, const Tensor& x, int kernel, int stride, int padding);

// x [N,C,L] -> [N,C]
Tensor global_avg_pool1d(Tape* tape, const Tensor& x);

Tensor add(Tape* tape, const Tensor& a, const Tensor& b);  // same shape
Tensor scalar_mul(Tape* tape, const Tensor& x, double c);
Tensor concat_cols(Tape* tape, const std::vector<Tensor>& xs);      // [N,Di] -> [N,sum Di]
Tensor scale_rows(Tape* tape, const Tensor& x, const Tensor& s);    // [N,D] * [N]
Tensor scale_channels(Tape* tape, const Tensor& x, const Tensor& g);  // [N,C,L] * [N,C]
Tensor column(Tape* tape, const Tensor& x, int64_t col);            // [N,C] -> [N]
Tensor reshape(Tape* tape, const Tensor& x, std::vector<int64_t> new_shape);
Tensor sum_all(Tape* tape, const Tensor& x);  // -> rank-0 scalar

// Losses; all reduce to a rank-0 mean.
Tensor cross_entropy(Tape* tape, const Tensor& logits, const std::vector<int64_t>& targets);
Tensor bce_with_logits(Tape* tape, const Tensor& logits, const Tensor& targets);
Tensor mae(Tape* tape, const Tensor& pred, const Tensor& target);

// --------------------------------------------------------------------------
// Tensor container serialization: magic "X3E1", then per-tensor records
// { name_len u32, name bytes, rank u32, dims u64..., values f64... },
// everything little-endian.  Round-trips bit-exactly.
// --------------------------------------------------------------------------
void save_tensors(std::ostream& os,
                  const std::vector<std::pair<std::string, Tensor>>& tensors);
std::vector<std::pair<std::string, Tensor>> load_tensors(std::istream& is);

// --------------------------------------------------------------------------
// Central-finite-difference gradient checking.  The op is evaluated under a
// fixed random linear probe so every output element participates; inputs are
// perturbed elementwise (optionally on a sampled subset for large tensors).
// Returns the max relative error max|a-n| / max(|a|,|n|,1e-8).
// --------------------------------------------------------------------------
struct GradCheckOptions {
    double eps = 1e-4;
    size_t max_probes_per_input = SIZE_MAX;
    uint64_t seed = 17;
};

using GradCheckOp = std::function<Tensor(Tape*, std::vector<Tensor>&)>;
double grad_check(const GradCheckOp& op, std::vector<Tensor> inputs,
                  const GradCheckOptions& opts = {});

}  // namespace x3ecg::nn
