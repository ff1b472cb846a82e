#include "train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <ostream>

namespace x3ecg::train {

using nn::Tape;
using nn::Tensor;

void TrainConfig::validate() const {
    if (!(lr0 > 0.0) || !(lr_min > 0.0))
        fail(Status::invalid_argument, "learning rates must be positive");
    if (lr_min > lr0) fail(Status::invalid_argument, "lr_min must not exceed lr0");
    if (epochs < 1) fail(Status::invalid_argument, "epochs must be >= 1");
    if (cosine_epochs < 1 || cosine_epochs > epochs)
        fail(Status::invalid_argument, "cosine_epochs must be in [1, epochs]");
    if (lambda < 0.0) fail(Status::invalid_argument, "lambda must be >= 0");
    if (weight_decay < 0.0) fail(Status::invalid_argument, "weight_decay must be >= 0");
    if (batch_size < 2) fail(Status::invalid_argument, "batch_size must be >= 2");
}

double cosine_lr(int epoch, const TrainConfig& cfg) {
    if (epoch < 0 || epoch >= cfg.epochs)
        fail(Status::invalid_argument, "epoch " + std::to_string(epoch) + " outside [0, " +
                                           std::to_string(cfg.epochs) + ")");
    if (epoch >= cfg.cosine_epochs) return cfg.lr_min;
    double phase = M_PI * static_cast<double>(epoch) / static_cast<double>(cfg.cosine_epochs);
    return cfg.lr_min + 0.5 * (cfg.lr0 - cfg.lr_min) * (1.0 + std::cos(phase));
}

void AdamState::init(const std::vector<model::Param>& params) {
    m.clear();
    v.clear();
    t = 0;
    for (const model::Param& p : params) {
        m.emplace_back(static_cast<size_t>(p.t.size()), 0.0);
        v.emplace_back(static_cast<size_t>(p.t.size()), 0.0);
    }
}

void adam_step(std::vector<model::Param>& params, AdamState& state, double lr,
               const TrainConfig& cfg) {
    if (state.m.size() != params.size())
        fail(Status::invalid_argument, "Adam state tracks " + std::to_string(state.m.size()) +
                                           " tensors, model has " + std::to_string(params.size()));
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++state.t;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i].t;
        std::vector<double>& m = state.m[i];
        std::vector<double>& v = state.v[i];
        if (m.size() != static_cast<size_t>(p.size()))
            fail(Status::invalid_argument, "Adam slot shape mismatch for " + params[i].name);
        const std::vector<double>* g = p.grad_if();
        double* pv = p.data();
        for (size_t j = 0; j < m.size(); ++j) {
            double gj = (g ? (*g)[j] : 0.0) + cfg.weight_decay * pv[j];
            m[j] = beta1 * m[j] + (1.0 - beta1) * gj;
            v[j] = beta2 * v[j] + (1.0 - beta2) * gj * gj;
            double mhat = m[j] / bc1;
            double vhat = v[j] / bc2;
            pv[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

Tensor combined_loss(Tape* tape, Task task, const Tensor& logits,
                     const std::vector<int64_t>& class_targets, const Tensor& label_targets,
                     const Tensor& n_pred, const Tensor& n_gt, double lambda, LossParts* parts) {
    Tensor cls = task == Task::multi_class ? nn::cross_entropy(tape, logits, class_targets)
                                           : nn::bce_with_logits(tape, logits, label_targets);
    if (parts) {
        parts->cls = cls.item();
        parts->hc = 0.0;
    }
    if (!n_pred.defined()) return cls;

    if (n_pred.rank() != 1 || !n_gt.defined() || n_gt.shape() != n_pred.shape())
        fail(Status::invalid_argument, "combined_loss: n_pred/n_gt must both be [N]");
    if (parts) {
        const double* pv = n_pred.data();
        const double* tv = n_gt.data();
        double mae = 0.0;
        for (int64_t i = 0; i < n_pred.size(); ++i) mae += std::fabs(pv[i] - tv[i]);
        parts->hc = mae / static_cast<double>(n_pred.size());
    }
    if (lambda == 0.0) return cls;

    Tensor aux = nn::scalar_mul(tape, nn::mae(tape, n_pred, n_gt), lambda);
    return nn::add(tape, cls, aux);
}

Dataset Dataset::from_recordings(const data::LabelSchema& schema,
                                 const std::vector<data::Recording>& recs) {
    Dataset d;
    d.schema = schema;
    d.n = static_cast<int64_t>(recs.size());
    size_t row = data::kNumLeads * data::kTargetLen;
    size_t C = static_cast<size_t>(schema.num_classes());
    d.x.reserve(recs.size() * row);
    d.demog.reserve(recs.size() * demog::kVectorLen);
    d.n_gt.reserve(recs.size());
    for (const data::Recording& r : recs) {
        if (r.leads.size() != row)
            fail(Status::invalid_argument, "recording '" + r.id + "' is not 3 x 5000");
        d.x.insert(d.x.end(), r.leads.begin(), r.leads.end());
        std::array<double, demog::kVectorLen> enc = demog::encode(r.demographics);
        d.demog.insert(d.demog.end(), enc.begin(), enc.end());
        d.n_gt.push_back(static_cast<double>(r.n_gt));
        if (schema.task == Task::multi_class) {
            if (r.class_index < 0 || r.class_index >= schema.num_classes())
                fail(Status::invalid_argument, "recording '" + r.id + "' has no valid class");
            d.class_targets.push_back(r.class_index);
        } else {
            if (r.label_bits.size() != C)
                fail(Status::invalid_argument, "recording '" + r.id + "' has a bad label vector");
            d.label_bits.insert(d.label_bits.end(), r.label_bits.begin(), r.label_bits.end());
        }
    }
    return d;
}

Dataset Dataset::subset(const std::vector<int>& indices) const {
    Dataset d;
    d.schema = schema;
    d.n = static_cast<int64_t>(indices.size());
    size_t row = data::kNumLeads * data::kTargetLen;
    size_t C = static_cast<size_t>(schema.num_classes());
    for (int idx : indices) {
        if (idx < 0 || idx >= n)
            fail(Status::invalid_argument, "subset index " + std::to_string(idx) + " out of range");
        size_t i = static_cast<size_t>(idx);
        d.x.insert(d.x.end(), x.begin() + i * row, x.begin() + (i + 1) * row);
        d.demog.insert(d.demog.end(), demog.begin() + i * demog::kVectorLen,
                       demog.begin() + (i + 1) * demog::kVectorLen);
        d.n_gt.push_back(n_gt[i]);
        if (schema.task == Task::multi_class)
            d.class_targets.push_back(class_targets[i]);
        else
            d.label_bits.insert(d.label_bits.end(), label_bits.begin() + i * C,
                                label_bits.begin() + (i + 1) * C);
    }
    return d;
}

Batch gather_batch(const Dataset& d, const std::vector<int64_t>& order, int64_t from, int64_t to) {
    if (from < 0 || to > static_cast<int64_t>(order.size()) || from >= to)
        fail(Status::invalid_argument, "bad batch range");
    Batch b;
    b.size = to - from;
    size_t row = data::kNumLeads * data::kTargetLen;
    size_t C = static_cast<size_t>(d.schema.num_classes());
    std::vector<double> xs(static_cast<size_t>(b.size) * row);
    std::vector<double> ds(static_cast<size_t>(b.size) * demog::kVectorLen);
    std::vector<double> ns(static_cast<size_t>(b.size));
    std::vector<double> ls;
    if (d.schema.task == Task::multi_label) ls.resize(static_cast<size_t>(b.size) * C);
    for (int64_t j = from; j < to; ++j) {
        size_t i = static_cast<size_t>(order[static_cast<size_t>(j)]);
        size_t o = static_cast<size_t>(j - from);
        std::memcpy(xs.data() + o * row, d.x.data() + i * row, row * sizeof(double));
        std::memcpy(ds.data() + o * demog::kVectorLen, d.demog.data() + i * demog::kVectorLen,
                    demog::kVectorLen * sizeof(double));
        ns[o] = d.n_gt[i];
        if (d.schema.task == Task::multi_class)
            b.class_targets.push_back(d.class_targets[i]);
        else
            for (size_t k = 0; k < C; ++k) ls[o * C + k] = d.label_bits[i * C + k];
    }
    b.x = Tensor::from({b.size, data::kNumLeads, static_cast<int64_t>(data::kTargetLen)},
                       std::move(xs));
    b.demog = Tensor::from({b.size, demog::kVectorLen}, std::move(ds));
    b.n_gt = Tensor::from({b.size}, std::move(ns));
    if (d.schema.task == Task::multi_label)
        b.label_bits = Tensor::from({b.size, static_cast<int64_t>(C)}, std::move(ls));
    return b;
}

namespace {

// accuracy over one batch from raw logits
void tally_batch_accuracy(Task task, const Tensor& logits, const Batch& b, int64_t& hits,
                          int64_t& total) {
    int64_t N = logits.dim(0), C = logits.dim(1);
    const double* lv = logits.data();
    if (task == Task::multi_class) {
        for (int64_t i = 0; i < N; ++i) {
            const double* row = lv + i * C;
            int64_t best = 0;
            for (int64_t k = 1; k < C; ++k)
                if (row[k] > row[best]) best = k;
            hits += best == b.class_targets[static_cast<size_t>(i)];
            ++total;
        }
    } else {
        const double* tv = b.label_bits.data();
        for (int64_t i = 0; i < N * C; ++i) {
            hits += (lv[i] >= 0.0) == (tv[i] != 0.0);  // logit >= 0 <=> prob >= 0.5
            ++total;
        }
    }
}

struct EvalPass {
    double cls = 0.0, hc = 0.0, macro_f1 = 0.0;
};

EvalPass eval_split(model::X3Model& m, const Dataset& d, const TrainConfig& cfg) {
    EvalPass out;
    bool use_hc = m.config().use_heartbeat_head;
    int C = d.schema.num_classes();
    std::vector<int64_t> order(static_cast<size_t>(d.n));
    for (int64_t i = 0; i < d.n; ++i) order[static_cast<size_t>(i)] = i;

    std::vector<int64_t> mc_pred, mc_target;
    std::vector<uint8_t> ml_pred, ml_target;
    double wsum = 0.0;
    for (int64_t start = 0; start < d.n; start += cfg.batch_size) {
        int64_t stop = std::min(d.n, start + cfg.batch_size);
        Batch b = gather_batch(d, order, start, stop);
        Tensor demog_in = m.config().use_demographics ? b.demog : Tensor();
        model::ModelOutput o =
            m.forward(nullptr, b.x, demog_in, nn::Mode::eval, nullptr, use_hc);
        LossParts parts;
        combined_loss(nullptr, cfg.task, o.logits, b.class_targets, b.label_bits, o.n_pred,
                      b.n_gt, cfg.lambda, &parts);
        double w = static_cast<double>(b.size);
        out.cls += parts.cls * w;
        out.hc += parts.hc * w;
        wsum += w;
        const double* lv = o.logits.data();
        if (cfg.task == Task::multi_class) {
            for (int64_t i = 0; i < b.size; ++i) {
                const double* row = lv + i * C;
                int64_t best = 0;
                for (int64_t k = 1; k < C; ++k)
                    if (row[k] > row[best]) best = k;
                mc_pred.push_back(best);
                mc_target.push_back(b.class_targets[static_cast<size_t>(i)]);
            }
        } else {
            const double* tv = b.label_bits.data();
            for (int64_t i = 0; i < b.size * C; ++i) {
                ml_pred.push_back(lv[i] >= 0.0 ? 1 : 0);
                ml_target.push_back(tv[i] != 0.0 ? 1 : 0);
            }
        }
    }
    out.cls /= wsum;
    out.hc /= wsum;
    eval::ConfusionCounts counts =
        cfg.task == Task::multi_class ? eval::confusion_multi_class(mc_pred, mc_target, C)
                                      : eval::confusion_multi_label(ml_pred, ml_target, C);
    out.macro_f1 = eval::f1_scores(counts).macro;
    return out;
}

}  // namespace

FitResult fit(model::X3Model& m, const Dataset& train_set, const Dataset& val_set,
              const TrainConfig& cfg, const EpochCallback& callback) {
    cfg.validate();
    if (train_set.n < 2) fail(Status::invalid_argument, "training split needs at least 2 samples");
    if (val_set.n < 1) fail(Status::invalid_argument, "validation split is empty");
    if (m.config().task != cfg.task || train_set.schema.task != cfg.task)
        fail(Status::invalid_argument, "task mismatch between model, config, and dataset");
    if (m.config().num_classes != train_set.schema.num_classes())
        fail(Status::invalid_argument, "model and dataset class counts differ");
    for (auto& p : m.parameters())
        for (double v : p.t.values())
            if (!std::isfinite(v))
                fail(Status::domain, "model parameter '" + p.name + "' contains a non-finite value");

    Rng rng(Rng::derive(cfg.seed, 0xf17f17ULL));
    AdamState adam;
    adam.init(m.parameters());
    bool use_hc = m.config().use_heartbeat_head;

    FitResult result;
    model::X3Model::Snapshot best;
    std::vector<int64_t> order(static_cast<size_t>(train_set.n));
    for (int64_t i = 0; i < train_set.n; ++i) order[static_cast<size_t>(i)] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double lr = cosine_lr(epoch, cfg);
        rng.shuffle(order);

        double cls_sum = 0.0, hc_sum = 0.0, wsum = 0.0;
        int64_t acc_hits = 0, acc_total = 0;
        for (int64_t start = 0; start < train_set.n; start += cfg.batch_size) {
            int64_t stop = std::min(train_set.n, start + cfg.batch_size);
            if (stop - start < 2) break;  // batch norm needs at least two rows
            Batch b = gather_batch(train_set, order, start, stop);
            Tape tape;
            Tensor demog_in = m.config().use_demographics ? b.demog : Tensor();
            model::ModelOutput o = m.forward(&tape, b.x, demog_in, nn::Mode::train, &rng, use_hc);
            LossParts parts;
            Tensor loss = combined_loss(&tape, cfg.task, o.logits, b.class_targets, b.label_bits,
                                        o.n_pred, b.n_gt, cfg.lambda, &parts);
            double value = loss.item();
            if (!std::isfinite(value))
                fail(Status::domain,
                     "training diverged (non-finite loss) at epoch " + std::to_string(epoch));
            tally_batch_accuracy(cfg.task, o.logits, b, acc_hits, acc_total);
            tape.backward(loss);
            adam_step(m.parameters(), adam, lr, cfg);
            for (model::Param& p : m.parameters()) p.t.drop_grad();
            double w = static_cast<double>(b.size);
            cls_sum += parts.cls * w;
            hc_sum += parts.hc * w;
            wsum += w;
        }
        if (wsum == 0.0)
            fail(Status::invalid_argument, "no usable training batches (batch_size too large?)");

        EvalPass val = eval_split(m, val_set, cfg);
        EpochLog log;
        log.epoch = epoch;
        log.lr = lr;
        log.train_cls = cls_sum / wsum;
        log.train_hc = hc_sum / wsum;
        log.val_cls = val.cls;
        log.val_hc = val.hc;
        log.val_macro_f1 = val.macro_f1;
        log.train_acc = static_cast<double>(acc_hits) / static_cast<double>(acc_total);
        result.history.push_back(log);

        if (log.val_macro_f1 >= result.best_val_macro_f1 || result.best_epoch < 0) {
            result.best_val_macro_f1 = log.val_macro_f1;
            result.best_epoch = epoch;
            best = m.snapshot();
        }
        if (callback && !callback(log)) break;
    }

    m.restore(best);
    return result;
}

void write_history_csv(std::ostream& os, const std::vector<EpochLog>& history) {
    os << "epoch,lr,train_cls,train_hc,val_cls,val_hc,val_macro_f1\n";
    for (const EpochLog& h : history)
        os << h.epoch << "," << format_double(h.lr) << "," << format_double(h.train_cls) << ","
           << format_double(h.train_hc) << "," << format_double(h.val_cls) << ","
           << format_double(h.val_hc) << "," << format_double(h.val_macro_f1) << "\n";
}

std::vector<double> predict_probs(model::X3Model& m, const Dataset& d, int batch_size) {
    if (batch_size < 1) fail(Status::invalid_argument, "batch_size must be >= 1");
    int64_t C = m.config().num_classes;
    std::vector<double> probs;
    probs.reserve(static_cast<size_t>(d.n * C));
    std::vector<int64_t> order(static_cast<size_t>(d.n));
    for (int64_t i = 0; i < d.n; ++i) order[static_cast<size_t>(i)] = i;
    for (int64_t start = 0; start < d.n; start += batch_size) {
        int64_t stop = std::min(d.n, start + batch_size);
        Batch b = gather_batch(d, order, start, stop);
        Tensor demog_in = m.config().use_demographics ? b.demog : Tensor();
        model::ModelOutput o = m.forward(nullptr, b.x, demog_in, nn::Mode::eval, nullptr, false);
        Tensor p = m.config().task == Task::multi_class ? nn::softmax(nullptr, o.logits, 1)
                                                        : nn::sigmoid(nullptr, o.logits);
        const std::vector<double>& pv = p.values();
        probs.insert(probs.end(), pv.begin(), pv.end());
    }
    return probs;
}

std::vector<double> predict_counts(model::X3Model& m, const Dataset& d, int batch_size) {
    if (!m.config().use_heartbeat_head)
        fail(Status::invalid_argument, "model has no heartbeat head");
    if (batch_size < 1) fail(Status::invalid_argument, "batch_size must be >= 1");
    std::vector<double> counts;
    counts.reserve(static_cast<size_t>(d.n));
    std::vector<int64_t> order(static_cast<size_t>(d.n));
    for (int64_t i = 0; i < d.n; ++i) order[static_cast<size_t>(i)] = i;
    for (int64_t start = 0; start < d.n; start += batch_size) {
        int64_t stop = std::min(d.n, start + batch_size);
        Batch b = gather_batch(d, order, start, stop);
        Tensor demog_in = m.config().use_demographics ? b.demog : Tensor();
        model::ModelOutput o = m.forward(nullptr, b.x, demog_in, nn::Mode::eval, nullptr, true);
        const std::vector<double>& nv = o.n_pred.values();
        counts.insert(counts.end(), nv.begin(), nv.end());
    }
    return counts;
}

}  // namespace x3ecg::train
