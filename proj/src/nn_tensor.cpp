#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>

#include "nn.hpp"

namespace x3ecg::nn {

namespace {

int64_t shape_numel(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
        if (d < 0) fail(Status::invalid_argument, "negative dimension in shape " + shape_str(shape));
        n *= d;
    }
    return n;
}

}  // namespace

std::string shape_str(const std::vector<int64_t>& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Payload& Tensor::p() {
    if (!d_) fail(Status::internal, "use of an undefined tensor");
    return *d_;
}

const Tensor::Payload& Tensor::p() const {
    if (!d_) fail(Status::internal, "use of an undefined tensor");
    return *d_;
}

Tensor Tensor::zeros(std::vector<int64_t> shape, bool requires_grad) {
    Tensor t;
    t.d_ = std::make_shared<Payload>();
    int64_t n = shape_numel(shape);
    t.d_->shape = std::move(shape);
    t.d_->v.assign(static_cast<size_t>(n), 0.0);
    t.d_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::full(std::vector<int64_t> shape, double value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.d_->v.begin(), t.d_->v.end(), value);
    return t;
}

Tensor Tensor::from(std::vector<int64_t> shape, std::vector<double> values, bool requires_grad) {
    int64_t n = shape_numel(shape);
    if (n != static_cast<int64_t>(values.size()))
        fail(Status::invalid_argument, "value count " + std::to_string(values.size()) +
                                           " does not match shape " + nn::shape_str(shape));
    Tensor t;
    t.d_ = std::make_shared<Payload>();
    t.d_->shape = std::move(shape);
    t.d_->v = std::move(values);
    t.d_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::scalar(double value) { return from({}, {value}); }

const std::vector<int64_t>& Tensor::shape() const { return p().shape; }

int64_t Tensor::dim(int i) const {
    const auto& s = shape();
    if (i < 0 || i >= static_cast<int>(s.size()))
        fail(Status::internal, "dim index " + std::to_string(i) + " out of range for " + nn::shape_str(s));
    return s[static_cast<size_t>(i)];
}

int64_t Tensor::size() const { return static_cast<int64_t>(p().v.size()); }

double* Tensor::data() { return p().v.data(); }
const double* Tensor::data() const { return p().v.data(); }
std::vector<double>& Tensor::values() { return p().v; }
const std::vector<double>& Tensor::values() const { return p().v; }

double Tensor::item() const {
    if (size() != 1) fail(Status::invalid_argument, "item() on tensor of shape " + shape_str());
    return p().v[0];
}

bool Tensor::requires_grad() const { return p().requires_grad; }
void Tensor::set_requires_grad(bool b) { p().requires_grad = b; }

std::vector<double>& Tensor::grad() {
    Payload& pl = p();
    if (pl.g.empty()) pl.g.assign(pl.v.size(), 0.0);
    return pl.g;
}

const std::vector<double>* Tensor::grad_if() const {
    const Payload& pl = p();
    return pl.g.empty() ? nullptr : &pl.g;
}

void Tensor::drop_grad() { p().g.clear(); }

Tensor Tensor::clone_detached() const {
    const Payload& pl = p();
    return Tensor::from(pl.shape, pl.v, false);
}

void Tensor::copy_values_from(const Tensor& other) {
    if (shape() != other.shape())
        fail(Status::invalid_argument,
             "copy between mismatched shapes " + shape_str() + " vs " + other.shape_str());
    p().v = other.p().v;
}

std::string Tensor::shape_str() const { return nn::shape_str(shape()); }

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

void Tape::record(std::function<void()> node) { nodes_.push_back(std::move(node)); }

void Tape::backward(Tensor& loss) {
    if (loss.rank() != 0)
        fail(Status::invalid_argument,
             "backward needs a scalar loss, got shape " + loss.shape_str());
    loss.grad()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'X', '3', 'E', '1'};

template <typename T>
void write_le(std::ostream& os, T v) {
    unsigned char buf[sizeof(T)];
    for (size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
bool read_le(std::istream& is, T& v) {
    unsigned char buf[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) return false;
    v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    return true;
}

void write_f64(std::ostream& os, double d) {
    uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    write_le(os, bits);
}

bool read_f64(std::istream& is, double& d) {
    uint64_t bits;
    if (!read_le(is, bits)) return false;
    std::memcpy(&d, &bits, sizeof d);
    return true;
}

}  // namespace

void save_tensors(std::ostream& os, const std::vector<std::pair<std::string, Tensor>>& tensors) {
    os.write(kMagic, 4);
    for (const auto& [name, t] : tensors) {
        write_le<uint32_t>(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_le<uint32_t>(os, static_cast<uint32_t>(t.rank()));
        for (int64_t d : t.shape()) write_le<uint64_t>(os, static_cast<uint64_t>(d));
        for (double v : t.values()) write_f64(os, v);
    }
    if (!os) fail(Status::io, "failed writing tensor container");
}

std::vector<std::pair<std::string, Tensor>> load_tensors(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        fail(Status::format, "bad tensor container magic (expected X3E1)");
    std::vector<std::pair<std::string, Tensor>> out;
    while (true) {
        uint32_t name_len;
        if (!read_le(is, name_len)) break;  // clean EOF
        if (name_len > 4096) fail(Status::format, "implausible tensor name length");
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len)) fail(Status::format, "truncated tensor name");
        uint32_t rank;
        if (!read_le(is, rank)) fail(Status::format, "truncated tensor record '" + name + "'");
        if (rank > 8) fail(Status::format, "implausible tensor rank for '" + name + "'");
        std::vector<int64_t> shape(rank);
        int64_t numel = 1;
        for (uint32_t i = 0; i < rank; ++i) {
            uint64_t d;
            if (!read_le(is, d)) fail(Status::format, "truncated dims for '" + name + "'");
            shape[i] = static_cast<int64_t>(d);
            numel *= shape[i];
        }
        std::vector<double> values(static_cast<size_t>(numel));
        for (double& v : values)
            if (!read_f64(is, v)) fail(Status::format, "truncated values for '" + name + "'");
        out.emplace_back(std::move(name), Tensor::from(std::move(shape), std::move(values)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// gradient checking
// ---------------------------------------------------------------------------

double grad_check(const GradCheckOp& op, std::vector<Tensor> inputs, const GradCheckOptions& opts) {
    for (Tensor& t : inputs) t.set_requires_grad(true);

    // Fixed random probe so every output element is exercised with a distinct
    // weight; evaluated once to learn the output shape.
    Tensor probe;
    auto weighted_eval = [&](std::vector<Tensor>& ins) {
        Tensor y = op(nullptr, ins);
        if (!probe.defined()) {
            Rng rng(opts.seed);
            std::vector<double> w(static_cast<size_t>(y.size()));
            for (double& v : w) v = rng.uniform(-1.0, 1.0);
            probe = Tensor::from(y.shape(), std::move(w));
        }
        double s = 0.0;
        const double* pv = probe.data();
        const double* yv = y.data();
        for (int64_t i = 0; i < y.size(); ++i) s += pv[i] * yv[i];
        return s;
    };
    weighted_eval(inputs);  // initialize probe

    // analytic gradients
    Tape tape;
    Tensor y = op(&tape, inputs);
    if (y.shape() != probe.shape())
        fail(Status::internal, "op changed output shape between evaluations");
    Tensor loss = Tensor::zeros({});
    {
        // weighted sum as a tape node so backward seeds the probe weights
        Tensor yc = y;
        Tensor pc = probe;
        double s = 0.0;
        for (int64_t i = 0; i < y.size(); ++i) s += pc.data()[i] * yc.data()[i];
        loss.values()[0] = s;
        tape.record([yc, pc, loss]() mutable {
            const std::vector<double>* g = loss.grad_if();
            if (!g) return;
            double go = (*g)[0];
            auto& yg = yc.grad();
            for (int64_t i = 0; i < yc.size(); ++i) yg[i] += go * pc.data()[i];
        });
    }
    tape.backward(loss);

    double max_rel = 0.0;
    Rng pick(opts.seed ^ 0x5eedULL);
    for (size_t ti = 0; ti < inputs.size(); ++ti) {
        Tensor& t = inputs[ti];
        const std::vector<double>* ag = t.grad_if();
        int64_t n = t.size();
        std::vector<int64_t> idx;
        if (static_cast<size_t>(n) <= opts.max_probes_per_input) {
            idx.resize(static_cast<size_t>(n));
            std::iota(idx.begin(), idx.end(), 0);
        } else {
            for (size_t k = 0; k < opts.max_probes_per_input; ++k)
                idx.push_back(pick.uniform_int(n));
        }
        for (int64_t i : idx) {
            double saved = t.data()[i];
            t.data()[i] = saved + opts.eps;
            double fp = weighted_eval(inputs);
            t.data()[i] = saved - opts.eps;
            double fm = weighted_eval(inputs);
            t.data()[i] = saved;
            double numeric = (fp - fm) / (2.0 * opts.eps);
            double analytic = ag ? (*ag)[static_cast<size_t>(i)] : 0.0;
            double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
        }
    }
    return max_rel;
}

}  // namespace x3ecg::nn
