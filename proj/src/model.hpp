#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "nn.hpp"

namespace x3ecg::model {

using nn::Mode;
using nn::Tape;
using nn::Tensor;

struct BackboneConfig {
    int stem_channels = 16;
    int stem_kernel = 15;
    int stem_stride = 4;
    int pool_kernel = 3;
    int pool_stride = 4;
    std::vector<int> stage_channels = {16, 32, 64};
    std::vector<int> blocks_per_stage = {1, 1, 1};
    int kernel_size = 7;
    int se_reduction = 4;

    int feature_dim() const { return stage_channels.back(); }
    void validate() const;
};

// Desk-scale config used by the test and synthetic-corpus pathways.
BackboneConfig desk_backbone();
// Full-scale config for real corpora: stem conv k15 s2 + maxpool 3 s2,
// widths 64/128/256/512 with two blocks each, SE reduction 16, D = 512.
BackboneConfig full_backbone();
// Minimal config for gradient checks and protocol tests.
BackboneConfig tiny_backbone();

BackboneConfig backbone_preset(const std::string& name);

struct X3Config {
    BackboneConfig backbone = desk_backbone();
    int attention_hidden = 0;  // 0 -> feature_dim
    int demog_dim = 11;
    int demog_hidden = 128;
    int num_classes = 4;
    Task task = Task::multi_class;
    double lambda = 0.02;
    double dropout_p = 0.2;
    bool use_demographics = true;
    bool use_heartbeat_head = true;

    int attention_hidden_effective() const {
        return attention_hidden > 0 ? attention_hidden : backbone.feature_dim();
    }
    void validate() const;
};

struct Param {
    std::string name;
    Tensor t;
};

// ---------------------------------------------------------------------------
// parameter containers
// ---------------------------------------------------------------------------

struct ConvParams {
    Tensor w, b;
    int stride = 1, padding = 0;
};

struct BNParams {
    Tensor gamma, beta;
    nn::BatchNormState state;
};

struct DenseParams {
    Tensor w, b;
};

struct SEParams {
    DenseParams fc1, fc2;
};

struct BlockParams {
    ConvParams conv1, conv2;
    BNParams bn1, bn2;
    SEParams se;
    bool has_projection = false;
    ConvParams proj;
    BNParams proj_bn;
};

struct BackboneParams {
    ConvParams stem;
    BNParams stem_bn;
    int pool_kernel = 3, pool_stride = 2;
    std::vector<std::vector<BlockParams>> stages;
};

struct AttentionParams {
    DenseParams fc1, fc2;
    BNParams bn;
};

struct MLPParams {
    DenseParams fc1, fc2;
    BNParams bn1, bn2;
};

// ---------------------------------------------------------------------------
// forward pieces (exposed for focused tests)
// ---------------------------------------------------------------------------

// x [N,1,L] -> features [N,D]
Tensor backbone_forward(Tape* tape, const Tensor& x, BackboneParams& p, Mode mode);

struct AttentionOutput {
    Tensor merged;  // [N,D]
    Tensor alpha;   // [N,3]
};
AttentionOutput leadwise_attention(Tape* tape, const Tensor& f1, const Tensor& f2,
                                   const Tensor& f3, AttentionParams& p, Mode mode,
                                   double dropout_p, Rng* rng);

// f_merged [N,D] -> predicted beat counts [N]
Tensor heartbeat_head(Tape* tape, const Tensor& f_merged, DenseParams& p);

// one-hot demographics [N,11] -> [N,demog_hidden]
Tensor demographic_mlp(Tape* tape, const Tensor& d, MLPParams& p, Mode mode, Rng* rng);

// ---------------------------------------------------------------------------
// full model
// ---------------------------------------------------------------------------

struct ModelOutput {
    Tensor logits;     // [N,C]
    Tensor n_pred;     // [N]; undefined when the head is off or skipped
    Tensor attention;  // [N,3]
    Tensor f_merged;   // [N,D]
};

class X3Model {
public:
    X3Model(X3Config config, uint64_t seed);

    // demog may be an undefined tensor when demographics are disabled.
    // rng drives dropout and may be null in eval mode.
    ModelOutput forward(Tape* tape, const Tensor& x, const Tensor& demog, Mode mode, Rng* rng,
                        bool compute_n_pred = true);

    const X3Config& config() const { return config_; }
    std::vector<Param>& parameters() { return params_; }
    int64_t parameter_count() const;
    static int64_t expected_parameter_count(const X3Config& config);

    std::vector<std::string> class_names;  // carried through checkpoints

    void save(std::ostream& os) const;
    void save_file(const std::string& path) const;
    static X3Model load(std::istream& is);
    static X3Model load_file(const std::string& path);

    // deep snapshots of parameters + batchnorm running stats
    struct Snapshot {
        std::vector<std::vector<double>> values;
        std::vector<std::vector<double>> bn_stats;
    };
    Snapshot snapshot() const;
    void restore(const Snapshot& s);

private:
    void build(uint64_t seed);
    // Walked on demand so the model stays safely movable.
    std::vector<std::pair<std::string, nn::BatchNormState*>> bn_entries();
    std::vector<std::pair<std::string, const nn::BatchNormState*>> bn_entries() const;

    X3Config config_;
    std::vector<BackboneParams> backbones_;
    AttentionParams attention_;
    DenseParams hc_head_;
    MLPParams demog_mlp_;
    DenseParams classifier_;
    std::vector<Param> params_;
};

}  // namespace x3ecg::model
