#pragma once

#include <functional>
#include <iosfwd>

#include "data.hpp"
#include "eval.hpp"
#include "model.hpp"

namespace x3ecg::train {

struct TrainConfig {
    double lr0 = 1e-3;
    double lr_min = 1e-4;
    double weight_decay = 5e-5;
    int epochs = 70;
    int cosine_epochs = 40;
    double lambda = 0.02;
    int batch_size = 32;
    uint64_t seed = 1;
    Task task = Task::multi_class;

    void validate() const;
};

// Cosine annealing from lr0 to lr_min over the first cosine_epochs epochs,
// constant lr_min afterwards.
double cosine_lr(int epoch, const TrainConfig& cfg);

struct AdamState {
    std::vector<std::vector<double>> m, v;  // one slot per parameter tensor
    int64_t t = 0;

    void init(const std::vector<model::Param>& params);
};

// Classic Adam with L2 weight decay folded into the gradient before the
// moment update: g += wd * p. beta1 0.9, beta2 0.999, eps 1e-8, bias-corrected
// moments, one shared step counter per call. A parameter whose gradient was
// never touched counts as zero gradient.
void adam_step(std::vector<model::Param>& params, AdamState& state, double lr,
               const TrainConfig& cfg);

struct LossParts {
    double cls = 0.0, hc = 0.0;  // hc is the raw MAE, not scaled by lambda
};

// L = L_cls + lambda * MAE(n_pred, n_gt), L_cls chosen by task (cross-entropy
// vs BCE-with-logits). With lambda == 0 or an undefined n_pred the returned
// tensor IS the classification loss — the auxiliary branch contributes no
// tape arithmetic at all, which keeps a lambda=0 step bitwise identical to a
// classification-only step. parts still reports the MAE for logging.
nn::Tensor combined_loss(nn::Tape* tape, Task task, const nn::Tensor& logits,
                         const std::vector<int64_t>& class_targets,
                         const nn::Tensor& label_targets, const nn::Tensor& n_pred,
                         const nn::Tensor& n_gt, double lambda, LossParts* parts);

// In-memory training rows.
struct Dataset {
    data::LabelSchema schema;
    std::vector<double> x;               // [n][3][5000]
    std::vector<double> demog;           // [n][11]
    std::vector<int64_t> class_targets;  // multi-class
    std::vector<uint8_t> label_bits;     // [n][C] multi-label
    std::vector<double> n_gt;            // [n]
    int64_t n = 0;

    static Dataset from_recordings(const data::LabelSchema& schema,
                                   const std::vector<data::Recording>& recs);
    Dataset subset(const std::vector<int>& indices) const;
};

struct Batch {
    nn::Tensor x;             // [B,3,5000]
    nn::Tensor demog;         // [B,11]
    std::vector<int64_t> class_targets;
    nn::Tensor label_bits;    // [B,C]
    nn::Tensor n_gt;          // [B]
    int64_t size = 0;
};

Batch gather_batch(const Dataset& d, const std::vector<int64_t>& order, int64_t from, int64_t to);

struct EpochLog {
    int epoch = 0;
    double lr = 0.0;
    double train_cls = 0.0, train_hc = 0.0;
    double val_cls = 0.0, val_hc = 0.0;
    double val_macro_f1 = 0.0;
    double train_acc = 0.0;  // train-mode diagnostic, not part of the history CSV
};

// Return false to stop after the current epoch (best-epoch restore still runs).
using EpochCallback = std::function<bool(const EpochLog&)>;

struct FitResult {
    std::vector<EpochLog> history;
    int best_epoch = -1;
    double best_val_macro_f1 = 0.0;
};

// Per epoch: seeded shuffle, train-mode batches (a trailing batch of one is
// dropped — batch norm needs two), combined loss, backward, adam_step at
// cosine_lr(epoch); then validation loss components and macro-F1 (multi-label
// selection uses 0.5 thresholds). Keeps a snapshot of the best validation
// macro-F1 epoch, ties resolved toward the later epoch, and restores it
// before returning. Aborts with a domain error if the loss goes non-finite.
FitResult fit(model::X3Model& m, const Dataset& train_set, const Dataset& val_set,
              const TrainConfig& cfg, const EpochCallback& callback = {});

// `epoch,lr,train_cls,train_hc,val_cls,val_hc,val_macro_f1`
void write_history_csv(std::ostream& os, const std::vector<EpochLog>& history);

// Eval-mode class probabilities, row-major [n][C]: softmax for multi-class,
// elementwise sigmoid for multi-label.
std::vector<double> predict_probs(model::X3Model& m, const Dataset& d, int batch_size = 32);
// Eval-mode beat-count predictions [n]; requires the heartbeat head.
std::vector<double> predict_counts(model::X3Model& m, const Dataset& d, int batch_size = 32);

}  // namespace x3ecg::train
