#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <x3ecg/x3ecg.h>

namespace {

int status_exit(x3ecg_status s) {
    if (s == X3ECG_OK) return 0;
    if (s == X3ECG_EINVAL || s == X3ECG_EIO) return 2;
    return 1;
}

int report(x3ecg_status s) {
    if (s != X3ECG_OK) std::cerr << "error: " << x3ecg_last_error() << "\n";
    return status_exit(s);
}

struct OptionsHandle {
    x3ecg_options* ptr;
    OptionsHandle() : ptr(x3ecg_options_new()) {}
    ~OptionsHandle() { x3ecg_options_free(ptr); }
};

// Binds CLI flags to the library's key=value option store. A --config file
// loads first; explicit flags override it.
class SubArgs {
public:
    explicit SubArgs(CLI::App* cmd) : cmd_(cmd) {
        cmd->add_option("--config", config_, "config file with key=value lines");
    }

    void value(const std::string& flag, const std::string& key, const std::string& desc) {
        values_.push_back({nullptr, key, std::make_shared<std::string>()});
        values_.back().opt = cmd_->add_option(flag, *values_.back().store, desc);
    }

    void toggle(const std::string& flag, const std::string& key, const char* set_to,
                const std::string& desc) {
        toggles_.push_back({cmd_->add_flag(flag, desc), key, set_to});
    }

    // fills opts; nonzero return is the process exit code
    int apply(x3ecg_options* opts) const {
        if (!config_.empty()) {
            int rc = report(x3ecg_options_load_file(opts, config_.c_str()));
            if (rc != 0) return rc;
        }
        for (const ValueBinding& b : values_)
            if (b.opt->count() > 0) {
                int rc = report(x3ecg_options_set(opts, b.key.c_str(), b.store->c_str()));
                if (rc != 0) return rc;
            }
        for (const ToggleBinding& t : toggles_)
            if (t.opt->count() > 0) {
                int rc = report(x3ecg_options_set(opts, t.key.c_str(), t.value));
                if (rc != 0) return rc;
            }
        return 0;
    }

private:
    struct ValueBinding {
        CLI::Option* opt;
        std::string key;
        std::shared_ptr<std::string> store;
    };
    struct ToggleBinding {
        CLI::Option* opt;
        std::string key;
        const char* value;
    };
    CLI::App* cmd_;
    std::string config_;
    std::vector<ValueBinding> values_;
    std::vector<ToggleBinding> toggles_;
};

void add_model_train_flags(SubArgs& a) {
    a.value("--preset", "preset", "backbone preset: tiny, desk, or full");
    a.value("--lambda", "lambda", "heartbeat-loss weight (default 0.02)");
    a.value("--dropout", "dropout", "dropout probability (default 0.2)");
    a.value("--attention-hidden", "attention_hidden", "attention hidden width (0 = feature dim)");
    a.value("--demog-hidden", "demog_hidden", "demographic MLP width (default 128)");
    a.toggle("--no-demographics", "use_demographics", "false", "drop the demographic branch");
    a.toggle("--no-hc", "use_hc", "false", "drop the heartbeat-counting head");
    a.value("--lr0", "lr0", "initial learning rate (default 1e-3)");
    a.value("--lr-min", "lr_min", "floor learning rate (default 1e-4)");
    a.value("--weight-decay", "weight_decay", "L2 weight decay (default 5e-5)");
    a.value("--epochs", "epochs", "training epochs (default 70)");
    a.value("--cosine-epochs", "cosine_epochs", "cosine annealing span (default 40)");
    a.value("--batch-size", "batch_size", "batch size (default 32)");
    a.value("--seed", "seed", "experiment seed (default 1)");
    a.value("--run-dir", "run_dir", "exact run directory (default runs/<timestamp>-<tag>)");
    a.value("--tag", "tag", "run directory tag");
    a.value("--jobs", "jobs", "parallel CV rounds (default 1)");
    a.toggle("--force", "force", "true", "write into a non-empty directory");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"3-lead ECG classification toolkit"};
    app.require_subcommand(1);
    int exit_code = 0;

    CLI::App* synth = app.add_subcommand("synth", "generate a labeled synthetic ECG corpus");
    SubArgs synth_args(synth);
    synth_args.value("--out", "out", "output corpus directory");
    synth_args.value("--classes", "classes", "number of rhythm classes (default 4)");
    synth_args.value("--per-class", "per_class", "recordings per class (default 16)");
    synth_args.value("--seed", "seed", "corpus seed (default 1)");
    synth_args.value("--snr-db", "snr_db", "center SNR in dB (default 20)");
    synth_args.value("--leads", "leads", "leads per file, 3 or 12 (default 3)");
    synth_args.toggle("--force", "force", "true", "write into a non-empty directory");
    synth->callback([&] {
        OptionsHandle o;
        exit_code = synth_args.apply(o.ptr);
        if (exit_code == 0) exit_code = report(x3ecg_cmd_synth(o.ptr));
    });

    CLI::App* pre = app.add_subcommand("preprocess", "filter, fix length, and standardize a corpus");
    SubArgs pre_args(pre);
    pre_args.value("--manifest", "manifest", "input manifest CSV");
    pre_args.value("--out", "out", "output corpus directory");
    pre_args.toggle("--force", "force", "true", "write into a non-empty directory");
    pre->callback([&] {
        OptionsHandle o;
        exit_code = pre_args.apply(o.ptr);
        if (exit_code == 0) exit_code = report(x3ecg_cmd_preprocess(o.ptr));
    });

    CLI::App* tr = app.add_subcommand("train", "run one training fit with a held-out split");
    SubArgs tr_args(tr);
    tr_args.value("--manifest", "manifest", "preprocessed manifest CSV");
    tr_args.value("--val-fraction", "val_fraction", "validation fraction (default 0.2)");
    add_model_train_flags(tr_args);
    tr->callback([&] {
        OptionsHandle o;
        exit_code = tr_args.apply(o.ptr);
        if (exit_code == 0) exit_code = report(x3ecg_cmd_train(o.ptr));
    });

    CLI::App* cv = app.add_subcommand("cv", "10-round cross-validation protocol");
    SubArgs cv_args(cv);
    cv_args.value("--manifest", "manifest", "preprocessed manifest CSV");
    add_model_train_flags(cv_args);
    cv->callback([&] {
        OptionsHandle o;
        exit_code = cv_args.apply(o.ptr);
        if (exit_code == 0) exit_code = report(x3ecg_cmd_cv(o.ptr));
    });

    CLI::App* rp = app.add_subcommand("rpeaks", "detect R peaks in the first channel of a signal file");
    std::string rp_path;
    rp->add_option("file", rp_path, "ECG3/ECGC signal file")->required();
    rp->callback([&] { exit_code = report(x3ecg_cmd_rpeaks(rp_path.c_str())); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    return exit_code;
}
