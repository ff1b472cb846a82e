#include "model.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace x3ecg::model {

using nn::BatchNormState;

// ---------------------------------------------------------------------------
// configs
// ---------------------------------------------------------------------------

void BackboneConfig::validate() const {
    if (stage_channels.empty() || stage_channels.size() != blocks_per_stage.size())
        fail(Status::invalid_argument, "backbone: stage_channels and blocks_per_stage must be "
                                       "non-empty and the same length");
    for (int c : stage_channels)
        if (c < 1) fail(Status::invalid_argument, "backbone: stage width must be >= 1");
    for (int b : blocks_per_stage)
        if (b < 1) fail(Status::invalid_argument, "backbone: blocks per stage must be >= 1");
    if (stem_channels < 1) fail(Status::invalid_argument, "backbone: stem_channels must be >= 1");
    if (kernel_size < 1 || kernel_size % 2 == 0)
        fail(Status::invalid_argument, "backbone: kernel_size must be odd and >= 1, got " +
                                           std::to_string(kernel_size));
    if (stem_kernel < 1 || stem_kernel % 2 == 0)
        fail(Status::invalid_argument, "backbone: stem_kernel must be odd and >= 1");
    if (stem_stride < 1 || pool_stride < 1 || pool_kernel < 1)
        fail(Status::invalid_argument, "backbone: strides and pool kernel must be >= 1");
    if (se_reduction < 1) fail(Status::invalid_argument, "backbone: se_reduction must be >= 1");
    for (int c : stage_channels)
        if (c % se_reduction != 0)
            fail(Status::invalid_argument,
                 "backbone: se_reduction " + std::to_string(se_reduction) +
                     " must divide every stage width, got " + std::to_string(c));
}

BackboneConfig desk_backbone() {
    BackboneConfig c;
    c.stem_channels = 16;
    c.stem_kernel = 15;
    c.stem_stride = 4;
    c.pool_kernel = 3;
    c.pool_stride = 4;
    c.stage_channels = {16, 32, 64};
    c.blocks_per_stage = {1, 1, 1};
    c.kernel_size = 7;
    c.se_reduction = 4;
    return c;
}

BackboneConfig full_backbone() {
    BackboneConfig c;
    c.stem_channels = 64;
    c.stem_kernel = 15;
    c.stem_stride = 2;
    c.pool_kernel = 3;
    c.pool_stride = 2;
    c.stage_channels = {64, 128, 256, 512};
    c.blocks_per_stage = {2, 2, 2, 2};
    c.kernel_size = 7;
    c.se_reduction = 16;
    return c;
}

BackboneConfig tiny_backbone() {
    BackboneConfig c;
    c.stem_channels = 4;
    c.stem_kernel = 7;
    c.stem_stride = 4;
    c.pool_kernel = 3;
    c.pool_stride = 4;
    c.stage_channels = {4, 8};
    c.blocks_per_stage = {1, 1};
    c.kernel_size = 3;
    c.se_reduction = 2;
    return c;
}

BackboneConfig backbone_preset(const std::string& name) {
    if (name == "desk") return desk_backbone();
    if (name == "full") return full_backbone();
    if (name == "tiny") return tiny_backbone();
    fail(Status::invalid_argument, "unknown backbone preset '" + name +
                                       "' (valid: desk, full, tiny)");
}

void X3Config::validate() const {
    backbone.validate();
    if (attention_hidden < 0)
        fail(Status::invalid_argument, "attention_hidden must be >= 0 (0 = feature dim)");
    if (demog_dim != 11)
        fail(Status::invalid_argument, "demographic vector length is fixed at 11");
    if (demog_hidden < 1) fail(Status::invalid_argument, "demog_hidden must be >= 1");
    if (num_classes < 2) fail(Status::invalid_argument, "num_classes must be >= 2, got " +
                                                            std::to_string(num_classes));
    if (!(lambda >= 0.0)) fail(Status::invalid_argument, "lambda must be >= 0");
    if (!(dropout_p >= 0.0) || !(dropout_p < 1.0))
        fail(Status::invalid_argument, "dropout must be in [0, 1)");
}

// ---------------------------------------------------------------------------
// construction
// ---------------------------------------------------------------------------

namespace {

// Kaiming-uniform fan-in weights, zero biases.
Tensor init_weight(std::vector<int64_t> shape, int64_t fan_in, Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor t = Tensor::zeros(std::move(shape), true);
    for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-bound, bound);
    return t;
}

int se_hidden(int channels, int reduction) { return std::max(1, channels / reduction); }

// x [N,3,L] -> one lead as [N,1,L]
Tensor lead_slice(Tape* tape, const Tensor& x, int64_t lead) {
    int64_t N = x.dim(0), C = x.dim(1), L = x.dim(2);
    Tensor y = Tensor::zeros({N, 1, L});
    const double* xv = x.data();
    double* yv = y.data();
    for (int64_t n = 0; n < N; ++n)
        for (int64_t l = 0; l < L; ++l) yv[n * L + l] = xv[(n * C + lead) * L + l];
    if (tape && x.requires_grad()) {
        y.set_requires_grad(true);
        Tensor xc = x, yc = y;
        tape->record([xc, yc, N, C, L, lead]() mutable {
            const std::vector<double>* gy = yc.grad_if();
            if (!gy) return;
            const double* dy = gy->data();
            double* dx = xc.grad().data();
            for (int64_t n = 0; n < N; ++n)
                for (int64_t l = 0; l < L; ++l) dx[(n * C + lead) * L + l] += dy[n * L + l];
        });
    }
    return y;
}

}  // namespace

struct Builder {
    std::vector<Param>& params;
    Rng& rng;

    ConvParams conv(const std::string& name, int co, int ci, int k, int stride) {
        ConvParams p;
        p.w = init_weight({co, ci, k}, static_cast<int64_t>(ci) * k, rng);
        p.b = Tensor::zeros({co}, true);
        p.stride = stride;
        p.padding = k / 2;
        params.push_back({name + ".w", p.w});
        params.push_back({name + ".b", p.b});
        return p;
    }

    BNParams bn(const std::string& name, int c, double gamma_init = 1.0) {
        BNParams p;
        p.gamma = Tensor::full({c}, gamma_init, true);
        p.beta = Tensor::zeros({c}, true);
        p.state.init(c);
        params.push_back({name + ".gamma", p.gamma});
        params.push_back({name + ".beta", p.beta});
        return p;
    }

    DenseParams fc(const std::string& name, int dout, int din) {
        DenseParams p;
        p.w = init_weight({dout, din}, din, rng);
        p.b = Tensor::zeros({dout}, true);
        params.push_back({name + ".w", p.w});
        params.push_back({name + ".b", p.b});
        return p;
    }
};

X3Model::X3Model(X3Config config, uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    class_names.resize(static_cast<size_t>(config_.num_classes));
    for (int i = 0; i < config_.num_classes; ++i)
        class_names[static_cast<size_t>(i)] = "c" + std::to_string(i);
    build(seed);
}

void X3Model::build(uint64_t seed) {
    Rng rng(Rng::derive(seed, 0x30de1ULL));
    const BackboneConfig& bb = config_.backbone;
    Builder B{params_, rng};

    for (int lead = 0; lead < 3; ++lead) {
        BackboneParams bp;
        std::string base = "backbone" + std::to_string(lead);
        bp.stem = B.conv(base + ".stem", bb.stem_channels, 1, bb.stem_kernel, bb.stem_stride);
        bp.stem_bn = B.bn(base + ".stem_bn", bb.stem_channels);
        bp.pool_kernel = bb.pool_kernel;
        bp.pool_stride = bb.pool_stride;

        int in_ch = bb.stem_channels;
        for (size_t s = 0; s < bb.stage_channels.size(); ++s) {
            std::vector<BlockParams> blocks;
            int out_ch = bb.stage_channels[s];
            for (int blk = 0; blk < bb.blocks_per_stage[s]; ++blk) {
                std::string nb = base + ".s" + std::to_string(s) + "b" + std::to_string(blk);
                int stride = (s > 0 && blk == 0) ? 2 : 1;
                BlockParams p;
                p.conv1 = B.conv(nb + ".conv1", out_ch, in_ch, bb.kernel_size, stride);
                p.bn1 = B.bn(nb + ".bn1", out_ch);
                p.conv2 = B.conv(nb + ".conv2", out_ch, out_ch, bb.kernel_size, 1);
                // zero-init the residual branch's closing scale
                p.bn2 = B.bn(nb + ".bn2", out_ch, 0.0);
                int hidden = se_hidden(out_ch, bb.se_reduction);
                p.se.fc1 = B.fc(nb + ".se.fc1", hidden, out_ch);
                p.se.fc2 = B.fc(nb + ".se.fc2", out_ch, hidden);
                p.has_projection = stride != 1 || in_ch != out_ch;
                if (p.has_projection) {
                    p.proj = B.conv(nb + ".proj", out_ch, in_ch, 1, stride);
                    p.proj_bn = B.bn(nb + ".proj_bn", out_ch);
                }
                blocks.push_back(std::move(p));
                in_ch = out_ch;
            }
            bp.stages.push_back(std::move(blocks));
        }
        backbones_.push_back(std::move(bp));
    }

    int D = bb.feature_dim();
    int H = config_.attention_hidden_effective();
    attention_.fc1 = B.fc("attention.fc1", H, 3 * D);
    attention_.bn = B.bn("attention.bn", H);
    attention_.fc2 = B.fc("attention.fc2", 3, H);

    if (config_.use_heartbeat_head) hc_head_ = B.fc("hc_head", 1, D);

    int classifier_in = D;
    if (config_.use_demographics) {
        demog_mlp_.fc1 = B.fc("demog.fc1", config_.demog_hidden, config_.demog_dim);
        demog_mlp_.bn1 = B.bn("demog.bn1", config_.demog_hidden);
        demog_mlp_.fc2 = B.fc("demog.fc2", config_.demog_hidden, config_.demog_hidden);
        demog_mlp_.bn2 = B.bn("demog.bn2", config_.demog_hidden);
        classifier_in += config_.demog_hidden;
    }
    classifier_ = B.fc("classifier", config_.num_classes, classifier_in);
}

// Batchnorm running stats in a stable name order, for snapshots/checkpoints.
std::vector<std::pair<std::string, BatchNormState*>> X3Model::bn_entries() {
    std::vector<std::pair<std::string, BatchNormState*>> out;
    for (int lead = 0; lead < 3; ++lead) {
        BackboneParams& bp = backbones_[static_cast<size_t>(lead)];
        std::string base = "backbone" + std::to_string(lead);
        out.emplace_back(base + ".stem_bn", &bp.stem_bn.state);
        for (size_t s = 0; s < bp.stages.size(); ++s)
            for (size_t blk = 0; blk < bp.stages[s].size(); ++blk) {
                std::string nb = base + ".s" + std::to_string(s) + "b" + std::to_string(blk);
                out.emplace_back(nb + ".bn1", &bp.stages[s][blk].bn1.state);
                out.emplace_back(nb + ".bn2", &bp.stages[s][blk].bn2.state);
                if (bp.stages[s][blk].has_projection)
                    out.emplace_back(nb + ".proj_bn", &bp.stages[s][blk].proj_bn.state);
            }
    }
    out.emplace_back("attention.bn", &attention_.bn.state);
    if (config_.use_demographics) {
        out.emplace_back("demog.bn1", &demog_mlp_.bn1.state);
        out.emplace_back("demog.bn2", &demog_mlp_.bn2.state);
    }
    return out;
}

std::vector<std::pair<std::string, const BatchNormState*>> X3Model::bn_entries() const {
    auto mut = const_cast<X3Model*>(this)->bn_entries();
    std::vector<std::pair<std::string, const BatchNormState*>> out;
    out.reserve(mut.size());
    for (auto& [name, st] : mut) out.emplace_back(name, st);
    return out;
}

// ---------------------------------------------------------------------------
// forward pieces
// ---------------------------------------------------------------------------

namespace {

Tensor apply_conv(Tape* tape, const Tensor& x, ConvParams& p) {
    return nn::conv1d(tape, x, p.w, p.b, p.stride, p.padding);
}

Tensor apply_bn(Tape* tape, const Tensor& x, BNParams& p, Mode mode) {
    return nn::batchnorm1d(tape, x, p.gamma, p.beta, p.state, mode);
}

Tensor apply_fc(Tape* tape, const Tensor& x, DenseParams& p) {
    return nn::dense(tape, x, p.w, p.b);
}

Tensor se_gate(Tape* tape, const Tensor& branch, SEParams& p) {
    Tensor squeeze = nn::global_avg_pool1d(tape, branch);
    Tensor h = nn::relu(tape, apply_fc(tape, squeeze, p.fc1));
    Tensor g = nn::sigmoid(tape, apply_fc(tape, h, p.fc2));
    return nn::scale_channels(tape, branch, g);
}

}  // namespace

Tensor backbone_forward(Tape* tape, const Tensor& x, BackboneParams& p, Mode mode) {
    if (x.rank() != 3 || x.dim(1) != 1)
        fail(Status::invalid_argument, "backbone_forward expects [N,1,L], got " + x.shape_str());
    Tensor h = nn::relu(tape, apply_bn(tape, apply_conv(tape, x, p.stem), p.stem_bn, mode));
    h = nn::max_pool1d(tape, h, p.pool_kernel, p.pool_stride, p.pool_kernel / 2);
    for (auto& stage : p.stages) {
        for (BlockParams& blk : stage) {
            Tensor branch = nn::relu(tape, apply_bn(tape, apply_conv(tape, h, blk.conv1), blk.bn1, mode));
            branch = apply_bn(tape, apply_conv(tape, branch, blk.conv2), blk.bn2, mode);
            branch = se_gate(tape, branch, blk.se);
            Tensor shortcut =
                blk.has_projection
                    ? apply_bn(tape, apply_conv(tape, h, blk.proj), blk.proj_bn, mode)
                    : h;
            h = nn::relu(tape, nn::add(tape, branch, shortcut));
        }
    }
    return nn::global_avg_pool1d(tape, h);
}

AttentionOutput leadwise_attention(Tape* tape, const Tensor& f1, const Tensor& f2,
                                   const Tensor& f3, AttentionParams& p, Mode mode,
                                   double dropout_p, Rng* rng) {
    Tensor cat = nn::concat_cols(tape, {f1, f2, f3});
    Tensor h = nn::relu(tape, apply_bn(tape, apply_fc(tape, cat, p.fc1), p.bn, mode));
    if (mode == Mode::train && dropout_p > 0.0) {
        if (!rng) fail(Status::invalid_argument, "dropout in train mode needs an rng");
        h = nn::dropout(tape, h, dropout_p, mode, *rng);
    }
    // sigmoid scores: the three leads are gated independently, not competing
    Tensor alpha = nn::sigmoid(tape, apply_fc(tape, h, p.fc2));

    Tensor merged = nn::add(
        tape,
        nn::add(tape, nn::scale_rows(tape, f1, nn::column(tape, alpha, 0)),
                nn::scale_rows(tape, f2, nn::column(tape, alpha, 1))),
        nn::scale_rows(tape, f3, nn::column(tape, alpha, 2)));
    return {merged, alpha};
}

Tensor heartbeat_head(Tape* tape, const Tensor& f_merged, DenseParams& p) {
    Tensor out = apply_fc(tape, f_merged, p);
    return nn::reshape(tape, out, {f_merged.dim(0)});
}

Tensor demographic_mlp(Tape* tape, const Tensor& d, MLPParams& p, Mode mode, Rng* rng) {
    Tensor h = nn::relu(tape, apply_bn(tape, apply_fc(tape, d, p.fc1), p.bn1, mode));
    if (mode == Mode::train) {
        if (!rng) fail(Status::invalid_argument, "dropout in train mode needs an rng");
        h = nn::dropout(tape, h, 0.2, mode, *rng);
    }
    return nn::relu(tape, apply_bn(tape, apply_fc(tape, h, p.fc2), p.bn2, mode));
}

ModelOutput X3Model::forward(Tape* tape, const Tensor& x, const Tensor& demog, Mode mode,
                             Rng* rng, bool compute_n_pred) {
    if (x.rank() != 3 || x.dim(1) != 3)
        fail(Status::invalid_argument, "model input must be [N,3,L], got " + x.shape_str());
    if (config_.use_demographics) {
        if (!demog.defined() || demog.rank() != 2 || demog.dim(0) != x.dim(0) ||
            demog.dim(1) != config_.demog_dim)
            fail(Status::invalid_argument,
                 "demographic input must be [N," + std::to_string(config_.demog_dim) + "]" +
                     (demog.defined() ? ", got " + demog.shape_str() : ", got none"));
    }

    Tensor f[3];
    for (int i = 0; i < 3; ++i)
        f[i] = backbone_forward(tape, lead_slice(tape, x, i), backbones_[static_cast<size_t>(i)],
                                mode);

    ModelOutput out;
    AttentionOutput att =
        leadwise_attention(tape, f[0], f[1], f[2], attention_, mode, config_.dropout_p, rng);
    out.attention = att.alpha;
    out.f_merged = att.merged;

    Tensor f_final = att.merged;
    if (config_.use_demographics) {
        Tensor fd = demographic_mlp(tape, demog, demog_mlp_, mode, rng);
        f_final = nn::concat_cols(tape, {fd, att.merged});
    }
    out.logits = apply_fc(tape, f_final, classifier_);

    if (config_.use_heartbeat_head && compute_n_pred)
        out.n_pred = heartbeat_head(tape, att.merged, hc_head_);
    return out;
}

// ---------------------------------------------------------------------------
// bookkeeping
// ---------------------------------------------------------------------------

int64_t X3Model::parameter_count() const {
    int64_t n = 0;
    for (const Param& p : params_) n += p.t.size();
    return n;
}

int64_t X3Model::expected_parameter_count(const X3Config& config) {
    const BackboneConfig& bb = config.backbone;
    auto conv_n = [](int64_t co, int64_t ci, int64_t k) { return co * ci * k + co; };
    auto bn_n = [](int64_t c) { return 2 * c; };
    auto fc_n = [](int64_t dout, int64_t din) { return dout * din + dout; };

    int64_t per_backbone = conv_n(bb.stem_channels, 1, bb.stem_kernel) + bn_n(bb.stem_channels);
    int64_t in_ch = bb.stem_channels;
    for (size_t s = 0; s < bb.stage_channels.size(); ++s) {
        int64_t out_ch = bb.stage_channels[s];
        for (int blk = 0; blk < bb.blocks_per_stage[s]; ++blk) {
            int stride = (s > 0 && blk == 0) ? 2 : 1;
            per_backbone += conv_n(out_ch, in_ch, bb.kernel_size) + bn_n(out_ch);
            per_backbone += conv_n(out_ch, out_ch, bb.kernel_size) + bn_n(out_ch);
            int64_t hidden = se_hidden(static_cast<int>(out_ch), bb.se_reduction);
            per_backbone += fc_n(hidden, out_ch) + fc_n(out_ch, hidden);
            if (stride != 1 || in_ch != out_ch)
                per_backbone += conv_n(out_ch, in_ch, 1) + bn_n(out_ch);
            in_ch = out_ch;
        }
    }

    int64_t D = bb.feature_dim();
    int64_t H = config.attention_hidden_effective();
    int64_t total = 3 * per_backbone;
    total += fc_n(H, 3 * D) + bn_n(H) + fc_n(3, H);
    if (config.use_heartbeat_head) total += fc_n(1, D);
    int64_t classifier_in = D;
    if (config.use_demographics) {
        total += fc_n(config.demog_hidden, config.demog_dim) + bn_n(config.demog_hidden);
        total += fc_n(config.demog_hidden, config.demog_hidden) + bn_n(config.demog_hidden);
        classifier_in += config.demog_hidden;
    }
    total += fc_n(config.num_classes, classifier_in);
    return total;
}

X3Model::Snapshot X3Model::snapshot() const {
    Snapshot s;
    for (const Param& p : params_) s.values.push_back(p.t.values());
    for (auto& [name, st] : bn_entries()) {
        s.bn_stats.push_back(st->running_mean);
        s.bn_stats.push_back(st->running_var);
    }
    return s;
}

void X3Model::restore(const Snapshot& s) {
    auto entries = bn_entries();
    if (s.values.size() != params_.size() || s.bn_stats.size() != 2 * entries.size())
        fail(Status::internal, "snapshot does not match model layout");
    for (size_t i = 0; i < params_.size(); ++i) params_[i].t.values() = s.values[i];
    for (size_t i = 0; i < entries.size(); ++i) {
        entries[i].second->running_mean = s.bn_stats[2 * i];
        entries[i].second->running_var = s.bn_stats[2 * i + 1];
    }
}

// ---------------------------------------------------------------------------
// checkpoints: plain-text config header, then the tensor container
// ---------------------------------------------------------------------------

namespace {

std::string ints_joined(const std::vector<int>& v) {
    std::vector<std::string> parts;
    for (int x : v) parts.push_back(std::to_string(x));
    return join(parts, "|");
}

std::vector<int> ints_split(const std::string& s) {
    std::vector<int> out;
    for (const std::string& part : split(s, '|')) {
        auto v = parse_int(part);
        if (!v) fail(Status::format, "bad integer list entry '" + part + "' in checkpoint");
        out.push_back(static_cast<int>(*v));
    }
    return out;
}

}  // namespace

void X3Model::save(std::ostream& os) const {
    std::ostringstream head;
    head << "X3CKPT 1\n";
    head << "task = " << task_name(config_.task) << "\n";
    head << "classes = " << join(class_names, "|") << "\n";
    head << "num_classes = " << config_.num_classes << "\n";
    head << "lambda = " << format_double(config_.lambda) << "\n";
    head << "dropout = " << format_double(config_.dropout_p) << "\n";
    head << "attention_hidden = " << config_.attention_hidden << "\n";
    head << "demog_dim = " << config_.demog_dim << "\n";
    head << "demog_hidden = " << config_.demog_hidden << "\n";
    head << "use_demographics = " << (config_.use_demographics ? 1 : 0) << "\n";
    head << "use_hc = " << (config_.use_heartbeat_head ? 1 : 0) << "\n";
    const BackboneConfig& bb = config_.backbone;
    head << "backbone.stem_channels = " << bb.stem_channels << "\n";
    head << "backbone.stem_kernel = " << bb.stem_kernel << "\n";
    head << "backbone.stem_stride = " << bb.stem_stride << "\n";
    head << "backbone.pool_kernel = " << bb.pool_kernel << "\n";
    head << "backbone.pool_stride = " << bb.pool_stride << "\n";
    head << "backbone.stage_channels = " << ints_joined(bb.stage_channels) << "\n";
    head << "backbone.blocks_per_stage = " << ints_joined(bb.blocks_per_stage) << "\n";
    head << "backbone.kernel_size = " << bb.kernel_size << "\n";
    head << "backbone.se_reduction = " << bb.se_reduction << "\n";
    head << "END\n";
    os << head.str();

    std::vector<std::pair<std::string, Tensor>> tensors;
    for (const Param& p : params_) tensors.emplace_back(p.name, p.t);
    for (auto& [name, st] : bn_entries()) {
        tensors.emplace_back(name + ".running_mean",
                             Tensor::from({static_cast<int64_t>(st->running_mean.size())},
                                          st->running_mean));
        tensors.emplace_back(name + ".running_var",
                             Tensor::from({static_cast<int64_t>(st->running_var.size())},
                                          st->running_var));
    }
    nn::save_tensors(os, tensors);
}

void X3Model::save_file(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(Status::io, "cannot write checkpoint '" + path + "'");
    save(os);
    os.flush();
    if (!os) fail(Status::io, "failed writing checkpoint '" + path + "'");
}

X3Model X3Model::load(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || trim(line) != "X3CKPT 1")
        fail(Status::format, "not a model checkpoint (missing X3CKPT header)");
    std::map<std::string, std::string> kv;
    while (std::getline(is, line)) {
        std::string t = trim(line);
        if (t == "END") break;
        size_t eq = t.find('=');
        if (eq == std::string::npos) fail(Status::format, "malformed checkpoint header line: " + t);
        kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    auto need = [&](const std::string& key) -> std::string {
        auto it = kv.find(key);
        if (it == kv.end()) fail(Status::format, "checkpoint header missing key '" + key + "'");
        return it->second;
    };
    auto need_int = [&](const std::string& key) {
        auto v = parse_int(need(key));
        if (!v) fail(Status::format, "bad integer for checkpoint key '" + key + "'");
        return static_cast<int>(*v);
    };
    auto need_double = [&](const std::string& key) {
        auto v = parse_double(need(key));
        if (!v) fail(Status::format, "bad number for checkpoint key '" + key + "'");
        return *v;
    };

    X3Config cfg;
    cfg.task = parse_task(need("task"));
    cfg.num_classes = need_int("num_classes");
    cfg.lambda = need_double("lambda");
    cfg.dropout_p = need_double("dropout");
    cfg.attention_hidden = need_int("attention_hidden");
    cfg.demog_dim = need_int("demog_dim");
    cfg.demog_hidden = need_int("demog_hidden");
    cfg.use_demographics = need_int("use_demographics") != 0;
    cfg.use_heartbeat_head = need_int("use_hc") != 0;
    cfg.backbone.stem_channels = need_int("backbone.stem_channels");
    cfg.backbone.stem_kernel = need_int("backbone.stem_kernel");
    cfg.backbone.stem_stride = need_int("backbone.stem_stride");
    cfg.backbone.pool_kernel = need_int("backbone.pool_kernel");
    cfg.backbone.pool_stride = need_int("backbone.pool_stride");
    cfg.backbone.stage_channels = ints_split(need("backbone.stage_channels"));
    cfg.backbone.blocks_per_stage = ints_split(need("backbone.blocks_per_stage"));
    cfg.backbone.kernel_size = need_int("backbone.kernel_size");
    cfg.backbone.se_reduction = need_int("backbone.se_reduction");

    X3Model m(cfg, 0);
    std::vector<std::string> classes = split(need("classes"), '|');
    if (static_cast<int>(classes.size()) != cfg.num_classes)
        fail(Status::format, "checkpoint class list does not match num_classes");
    m.class_names = classes;

    std::vector<std::pair<std::string, Tensor>> tensors = nn::load_tensors(is);
    std::map<std::string, Tensor> by_name(tensors.begin(), tensors.end());
    if (by_name.size() != tensors.size())
        fail(Status::format, "duplicate tensor name in checkpoint");

    size_t used = 0;
    for (Param& p : m.params_) {
        auto it = by_name.find(p.name);
        if (it == by_name.end()) fail(Status::format, "checkpoint missing tensor '" + p.name + "'");
        if (it->second.shape() != p.t.shape())
            fail(Status::format, "checkpoint tensor '" + p.name + "' has shape " +
                                     it->second.shape_str() + ", expected " + p.t.shape_str());
        p.t.values() = it->second.values();
        ++used;
    }
    for (auto& [base, st] : m.bn_entries()) {
        for (bool mean : {true, false}) {
            std::string name = base + (mean ? ".running_mean" : ".running_var");
            auto it = by_name.find(name);
            if (it == by_name.end()) fail(Status::format, "checkpoint missing tensor '" + name + "'");
            std::vector<double>& dst = mean ? st->running_mean : st->running_var;
            if (it->second.size() != static_cast<int64_t>(dst.size()))
                fail(Status::format, "checkpoint tensor '" + name + "' has wrong size");
            dst = it->second.values();
            ++used;
        }
    }
    if (used != by_name.size())
        fail(Status::format, "checkpoint contains " + std::to_string(by_name.size() - used) +
                                 " unexpected tensor(s)");
    return m;
}

X3Model X3Model::load_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(Status::io, "cannot open checkpoint '" + path + "'");
    return load(is);
}

}  // namespace x3ecg::model
