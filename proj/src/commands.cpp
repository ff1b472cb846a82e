#include "commands.hpp"

#include <atomic>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <thread>

#include "data.hpp"
#include "dsp.hpp"
#include "eval.hpp"
#include "model.hpp"
#include "rpeak.hpp"
#include "train.hpp"

namespace x3ecg::cmd {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// options
// ---------------------------------------------------------------------------

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        // shared
        "manifest", "out", "run_dir", "tag", "seed", "force", "jobs",
        // model
        "preset", "lambda", "dropout", "attention_hidden", "demog_hidden", "use_demographics",
        "use_hc",
        // training
        "lr0", "lr_min", "weight_decay", "epochs", "cosine_epochs", "batch_size", "val_fraction",
        // synth
        "classes", "per_class", "snr_db", "leads",
    };
    return keys;
}

}  // namespace

bool Options::is_known(const std::string& key) { return known_keys().count(key) != 0; }

void Options::set(const std::string& key, const std::string& value) {
    if (!is_known(key)) fail(Status::invalid_argument, "unknown config key '" + key + "'");
    kv_[key] = value;
}

void Options::load_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail(Status::io, "cannot open config file '" + path + "'");
    std::string line;
    size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            fail(Status::format,
                 path + ":" + std::to_string(line_no) + ": expected key=value, got '" + t + "'");
        set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
}

std::string Options::get_str(const std::string& key, const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

std::string Options::require(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) fail(Status::invalid_argument, "missing required option '" + key + "'");
    return it->second;
}

int64_t Options::get_int(const std::string& key, int64_t fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    auto v = parse_int(it->second);
    if (!v) fail(Status::invalid_argument, "option '" + key + "' wants an integer, got '" +
                                               it->second + "'");
    return *v;
}

double Options::get_double(const std::string& key, double fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    auto v = parse_double(it->second);
    if (!v)
        fail(Status::invalid_argument, "option '" + key + "' wants a number, got '" + it->second + "'");
    return *v;
}

bool Options::get_bool(const std::string& key, bool fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    auto v = parse_bool(it->second);
    if (!v) fail(Status::invalid_argument, "option '" + key + "' wants true/false, got '" +
                                               it->second + "'");
    return *v;
}

// ---------------------------------------------------------------------------
// shared plumbing
// ---------------------------------------------------------------------------

namespace {

void require_writable_dir(const fs::path& dir, bool force, const char* what) {
    if (fs::exists(dir)) {
        if (!fs::is_directory(dir))
            fail(Status::invalid_argument, std::string(what) + " '" + dir.string() +
                                               "' exists and is not a directory");
        if (!fs::is_empty(dir) && !force)
            fail(Status::invalid_argument, std::string(what) + " '" + dir.string() +
                                               "' is not empty (use --force)");
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(Status::io, "cannot create '" + dir.string() + "': " + ec.message());
}

fs::path resolve_run_dir(const Options& o, const std::string& cmd_name) {
    bool force = o.get_bool("force", false);
    if (o.has("run_dir")) {
        fs::path dir = o.get_str("run_dir", "");
        require_writable_dir(dir, force, "run directory");
        return dir;
    }
    const char* env = std::getenv("X3ECG_RUN_DIR");
    fs::path root = env && *env ? fs::path(env) : fs::path("runs");
    std::string tag = o.get_str("tag", cmd_name);
    std::time_t now = std::time(nullptr);
    std::tm tmv{};
    gmtime_r(&now, &tmv);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tmv);
    fs::path dir = root / (std::string(stamp) + "-" + tag);
    for (int i = 2; fs::exists(dir); ++i)
        dir = root / (std::string(stamp) + "-" + tag + "-" + std::to_string(i));
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(Status::io, "cannot create '" + dir.string() + "': " + ec.message());
    return dir;
}

struct RunSetup {
    model::X3Config mc;
    train::TrainConfig tc;
    std::string preset;
    std::string manifest;
    int jobs = 1;
};

RunSetup make_setup(const Options& o, const data::LabelSchema& schema) {
    RunSetup s;
    s.manifest = o.require("manifest");
    s.preset = o.get_str("preset", "desk");
    s.mc.backbone = model::backbone_preset(s.preset);
    s.mc.num_classes = schema.num_classes();
    s.mc.task = schema.task;
    s.mc.lambda = o.get_double("lambda", 0.02);
    s.mc.dropout_p = o.get_double("dropout", 0.2);
    s.mc.attention_hidden = static_cast<int>(o.get_int("attention_hidden", 0));
    s.mc.demog_hidden = static_cast<int>(o.get_int("demog_hidden", 128));
    s.mc.use_demographics = o.get_bool("use_demographics", true);
    s.mc.use_heartbeat_head = o.get_bool("use_hc", true);
    s.mc.validate();

    s.tc.lr0 = o.get_double("lr0", 1e-3);
    s.tc.lr_min = o.get_double("lr_min", 1e-4);
    s.tc.weight_decay = o.get_double("weight_decay", 5e-5);
    s.tc.epochs = static_cast<int>(o.get_int("epochs", 70));
    s.tc.cosine_epochs = static_cast<int>(o.get_int("cosine_epochs", 40));
    s.tc.lambda = s.mc.lambda;
    s.tc.batch_size = static_cast<int>(o.get_int("batch_size", 32));
    s.tc.seed = static_cast<uint64_t>(o.get_int("seed", 1));
    s.tc.task = schema.task;
    s.tc.validate();

    s.jobs = static_cast<int>(o.get_int("jobs", 1));
    if (s.jobs < 1) fail(Status::invalid_argument, "jobs must be >= 1");
    return s;
}

void write_echo(const fs::path& dir, const RunSetup& s, const Options& o,
                const std::map<std::string, std::string>& extra) {
    std::map<std::string, std::string> eff;
    eff["manifest"] = s.manifest;
    eff["preset"] = s.preset;
    eff["lambda"] = format_double(s.mc.lambda);
    eff["dropout"] = format_double(s.mc.dropout_p);
    eff["attention_hidden"] = std::to_string(s.mc.attention_hidden);
    eff["demog_hidden"] = std::to_string(s.mc.demog_hidden);
    eff["use_demographics"] = s.mc.use_demographics ? "true" : "false";
    eff["use_hc"] = s.mc.use_heartbeat_head ? "true" : "false";
    eff["lr0"] = format_double(s.tc.lr0);
    eff["lr_min"] = format_double(s.tc.lr_min);
    eff["weight_decay"] = format_double(s.tc.weight_decay);
    eff["epochs"] = std::to_string(s.tc.epochs);
    eff["cosine_epochs"] = std::to_string(s.tc.cosine_epochs);
    eff["batch_size"] = std::to_string(s.tc.batch_size);
    eff["seed"] = std::to_string(s.tc.seed);
    eff["jobs"] = std::to_string(s.jobs);
    if (o.has("tag")) eff["tag"] = o.get_str("tag", "");
    for (const auto& [k, v] : extra) eff[k] = v;
    fs::path path = dir / "config.echo";
    std::ofstream os(path);
    if (!os) fail(Status::io, "cannot write '" + path.string() + "'");
    for (const auto& [k, v] : eff) os << k << "=" << v << "\n";
}

train::Dataset load_dataset(const data::Manifest& m) {
    std::vector<data::Recording> recs;
    recs.reserve(m.records.size());
    for (const data::RecordDescriptor& d : m.records)
        recs.push_back(data::load_recording(m, d, false));
    return train::Dataset::from_recordings(m.schema, recs);
}

struct RoundOutput {
    eval::RoundMetrics metrics;
    train::FitResult fitres;
};

void write_thresholds_csv(const fs::path& path, const std::vector<std::string>& classes,
                          const std::vector<double>& thresholds) {
    std::ofstream os(path);
    if (!os) fail(Status::io, "cannot write '" + path.string() + "'");
    os << "class,threshold\n";
    for (size_t k = 0; k < classes.size(); ++k)
        os << classes[k] << "," << format_double(thresholds[k]) << "\n";
}

RoundOutput run_round(const train::Dataset& full, const data::FoldRound& split,
                      const RunSetup& s, uint64_t round_seed, const fs::path& dir,
                      const std::vector<std::string>& class_names) {
    train::Dataset tr = full.subset(split.train);
    train::Dataset va = full.subset(split.val);
    train::Dataset te = full.subset(split.test);
    if (te.n == 0) fail(Status::invalid_argument, "empty test split");

    train::TrainConfig tc = s.tc;
    tc.seed = round_seed;
    model::X3Model m(s.mc, round_seed);
    m.class_names = class_names;

    RoundOutput out;
    out.fitres = train::fit(m, tr, va, tc);
    {
        std::ofstream os(dir / "history.csv");
        if (!os) fail(Status::io, "cannot write '" + (dir / "history.csv").string() + "'");
        train::write_history_csv(os, out.fitres.history);
    }
    m.save_file((dir / "checkpoint").string());

    int C = s.mc.num_classes;
    std::vector<double> test_probs = train::predict_probs(m, te, tc.batch_size);
    if (s.mc.task == Task::multi_class) {
        out.metrics = eval::evaluate_multi_class(test_probs, te.n, C, te.class_targets);
    } else {
        std::vector<double> val_probs = train::predict_probs(m, va, tc.batch_size);
        std::vector<double> thr = eval::threshold_search(val_probs, va.label_bits, va.n, C);
        write_thresholds_csv(dir / "thresholds.csv", class_names, thr);
        out.metrics = eval::evaluate_multi_label(test_probs, te.n, C, te.label_bits, thr);
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

namespace {

struct LeadShape {
    const char* name;
    double qrs, p, t;
};

// plausible relative wave amplitudes per 12-lead row (I II III aVR aVL aVF V1..V6)
const LeadShape k12Leads[12] = {
    {"I", 1.00, 1.00, 1.00},   {"II", 1.15, 1.20, 1.10},  {"III", 0.50, 0.60, 0.55},
    {"aVR", -0.90, -0.80, -0.85}, {"aVL", 0.40, 0.50, 0.45}, {"aVF", 0.80, 0.90, 0.85},
    {"V1", -0.60, 0.80, -0.50},   {"V2", 0.90, 0.90, 1.20},  {"V3", 1.30, 0.90, 1.30},
    {"V4", 1.50, 0.90, 1.20},     {"V5", 1.30, 0.90, 1.00},  {"V6", 1.10, 0.90, 0.90},
};

}  // namespace

void run_synth(const Options& o) {
    fs::path out = o.require("out");
    int64_t classes = o.get_int("classes", 4);
    int64_t per_class = o.get_int("per_class", 16);
    uint64_t seed = static_cast<uint64_t>(o.get_int("seed", 1));
    double snr_center = o.get_double("snr_db", 20.0);
    int64_t leads = o.get_int("leads", 3);
    bool force = o.get_bool("force", false);
    if (per_class < 1) fail(Status::invalid_argument, "per_class must be >= 1");
    if (classes < 2 || classes > 5)
        fail(Status::invalid_argument, "classes must be in [2, 5], got " + std::to_string(classes));
    if (leads != 3 && leads != 12)
        fail(Status::invalid_argument, "leads must be 3 or 12, got " + std::to_string(leads));

    require_writable_dir(out, force, "output directory");

    data::Manifest man;
    std::vector<std::string> names;
    std::vector<int> centers;
    for (int c = 0; c < classes; ++c) {
        centers.push_back(50 + 30 * c);
        names.push_back("BPM" + std::to_string(centers.back()));
    }
    man.schema = data::LabelSchema::custom(Task::multi_class, names);
    man.dir = out;

    // rows written per file: full 12-lead set, or just I / II / V1
    std::vector<int> rows;
    if (leads == 12)
        for (int i = 0; i < 12; ++i) rows.push_back(i);
    else
        rows = {0, 1, 6};

    std::vector<std::pair<std::string, int64_t>> counts;
    int index = 0;
    for (int c = 0; c < classes; ++c) {
        for (int j = 0; j < per_class; ++j, ++index) {
            Rng meta(Rng::derive(seed, 1000 + static_cast<uint64_t>(index)));
            rpeak::SynthSpec spec;
            spec.fs = data::kTargetFs;
            spec.duration_s = meta.uniform(8.6, 11.4);
            spec.bpm = static_cast<double>(centers[static_cast<size_t>(c)]) + meta.uniform(-8.0, 8.0);
            spec.first_peak_s = meta.uniform(0.25, 0.75);
            spec.beat_jitter = 0.04;
            spec.p_amp = 0.15 * meta.uniform(0.75, 1.25);
            spec.p_width_s = 0.025 * meta.uniform(0.85, 1.15);
            spec.qrs_amp = meta.uniform(0.9, 1.1);
            spec.qrs_width_s = 0.012 * meta.uniform(0.85, 1.15);
            spec.t_amp = 0.35 * meta.uniform(0.7, 1.3);
            spec.t_width_s = 0.045 * meta.uniform(0.85, 1.15);
            spec.noise_snr_db = snr_center + meta.uniform(-5.0, 5.0);
            spec.seed = Rng::derive(seed, 2000 + static_cast<uint64_t>(index));

            std::vector<std::vector<double>> signal;
            int64_t n_gt = 0;
            for (size_t r = 0; r < rows.size(); ++r) {
                const LeadShape& shape = k12Leads[static_cast<size_t>(rows[r])];
                rpeak::SynthSpec lead_spec = spec;
                lead_spec.qrs_amp *= shape.qrs;
                lead_spec.p_amp *= shape.p;
                lead_spec.t_amp *= shape.t;
                lead_spec.noise_stream = static_cast<uint64_t>(rows[r]);
                rpeak::SynthResult res = rpeak::synthesize_ecg(lead_spec);
                if (r == 0) {
                    // beats surviving the eventual fix to 5000 samples
                    for (int64_t p : res.true_peaks)
                        if (p < static_cast<int64_t>(data::kTargetLen)) ++n_gt;
                }
                signal.push_back(std::move(res.signal.samples));
            }

            char id[16];
            std::snprintf(id, sizeof id, "s%04d", index);
            std::string file = std::string(id) + ".ecg";
            data::write_signal(out / file, false, data::kTargetFs, signal);

            data::RecordDescriptor d;
            d.id = id;
            d.path = file;
            d.class_index = c;
            if (meta.uniform() >= 0.08) d.demographics.age = std::floor(meta.uniform(18.0, 92.0) * 2.0) / 2.0;
            double g = meta.uniform();
            if (g < 0.46)
                d.demographics.gender = demog::Gender::male;
            else if (g < 0.92)
                d.demographics.gender = demog::Gender::female;
            d.n_gt = n_gt;
            man.records.push_back(std::move(d));
            counts.emplace_back(id, n_gt);
        }
    }

    fs::path manifest_path = out / "manifest.csv";
    data::write_manifest(manifest_path, man);
    data::write_ngt_sidecar(manifest_path, counts);
    std::cout << "wrote " << man.records.size() << " recordings (" << classes << " classes x "
              << per_class << ", " << leads << " leads) -> " << out.string() << "\n";
}

// ---------------------------------------------------------------------------
// preprocess
// ---------------------------------------------------------------------------

void run_preprocess(const Options& o) {
    fs::path manifest_path = o.require("manifest");
    fs::path out = o.require("out");
    bool force = o.get_bool("force", false);
    data::Manifest in = data::load_manifest(manifest_path);
    require_writable_dir(out, force, "output directory");

    dsp::BiquadCascade filt =
        dsp::design_butterworth_bandpass(3, 1.0, 47.0, static_cast<double>(data::kTargetFs));

    data::Manifest outman;
    outman.schema = in.schema;
    outman.dir = out;
    std::vector<std::pair<std::string, int64_t>> counts;
    size_t skipped = 0;
    for (const data::RecordDescriptor& d : in.records) {
        try {
            fs::path src = in.resolve(d);
            data::SignalFile f = data::read_signal(src);
            if (f.preprocessed)
                fail(Status::domain, src.string() + ": already preprocessed (ECGC)");
            if (f.fs != data::kTargetFs)
                fail(Status::domain, src.string() + ": unsupported sampling rate " +
                                         std::to_string(f.fs) + " Hz");
            std::vector<std::vector<double>> three;
            if (f.leads.size() == 3)
                three = std::move(f.leads);
            else if (f.leads.size() == 12)
                three = dsp::select_leads(f.leads, {"I", "II", "V1"});
            else
                fail(Status::domain, src.string() + ": expected 3 or 12 leads, got " +
                                         std::to_string(f.leads.size()));

            size_t orig_len = three[0].size();
            const char* action = orig_len == data::kTargetLen
                                     ? "kept"
                                     : (orig_len < data::kTargetLen ? "padded" : "truncated");
            for (std::vector<double>& lead : three) {
                lead = dsp::fix_length(lead, data::kTargetLen);
                lead = dsp::filtfilt(filt, lead);
                lead = dsp::standardize(lead);
            }

            std::string file = d.id + ".ecg";
            data::write_signal(out / file, true, data::kTargetFs, three);

            int64_t n_gt;
            if (d.n_gt) {
                n_gt = *d.n_gt;
            } else {
                SignalBuffer lead1;
                lead1.fs = data::kTargetFs;
                lead1.samples = three[0];
                n_gt = rpeak::count_heartbeats(lead1);
            }

            data::RecordDescriptor nd = d;
            nd.path = file;
            nd.n_gt = n_gt;
            outman.records.push_back(std::move(nd));
            counts.emplace_back(d.id, n_gt);
            std::cout << d.id << ": ok (" << action << " " << orig_len << " -> "
                      << data::kTargetLen << ") beats=" << n_gt << "\n";
        } catch (const Error& e) {
            std::cerr << d.id << ": skipped: " << e.what() << "\n";
            ++skipped;
        }
    }

    fs::path outmanifest = out / "manifest.csv";
    data::write_manifest(outmanifest, outman);
    data::write_ngt_sidecar(outmanifest, counts);
    std::cout << "preprocessed " << outman.records.size() << " of " << in.records.size()
              << " recordings -> " << out.string() << "\n";
    if (skipped > 0)
        fail(Status::domain, std::to_string(skipped) + " file(s) skipped during preprocessing");
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

void run_train(const Options& o) {
    data::Manifest man = data::load_manifest(o.require("manifest"));
    RunSetup s = make_setup(o, man.schema);
    double vf = o.get_double("val_fraction", 0.2);
    if (!(vf > 0.0) || vf > 1.0 / 3.0)
        fail(Status::invalid_argument, "val_fraction must be in (0, 1/3]");
    fs::path dir = resolve_run_dir(o, "train");
    write_echo(dir, s, o, {{"val_fraction", format_double(vf)}});

    int k = std::max<int>(3, static_cast<int>(std::llround(1.0 / vf)));
    data::FoldPlan plan = data::make_folds(man, k, s.tc.seed);
    train::Dataset full = load_dataset(man);
    RoundOutput out = run_round(full, plan.rounds[0], s, s.tc.seed, dir, man.schema.classes);

    fs::path metrics_path = dir / "metrics.csv";
    std::ofstream os(metrics_path);
    if (!os) fail(Status::io, "cannot write '" + metrics_path.string() + "'");
    os << "class,f1,threshold\n";
    for (size_t c = 0; c < man.schema.classes.size(); ++c) {
        os << man.schema.classes[c] << "," << format_double(out.metrics.per_class_f1[c]) << ",";
        if (!out.metrics.thresholds.empty()) os << format_double(out.metrics.thresholds[c]);
        os << "\n";
    }
    os << "macro_f1," << format_double(out.metrics.macro_f1) << ",\n";
    os << "accuracy," << format_double(out.metrics.accuracy) << ",\n";

    std::cout << "best epoch " << out.fitres.best_epoch << " (val macro-F1 "
              << format_double(out.fitres.best_val_macro_f1) << "), test macro-F1 "
              << format_double(out.metrics.macro_f1) << ", accuracy "
              << format_double(out.metrics.accuracy) << "\n";
    std::cout << "run directory: " << dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// cross-validation
// ---------------------------------------------------------------------------

void run_cv(const Options& o) {
    data::Manifest man = data::load_manifest(o.require("manifest"));
    RunSetup s = make_setup(o, man.schema);
    fs::path dir = resolve_run_dir(o, "cv");
    write_echo(dir, s, o, {});

    constexpr int kRounds = 10;
    data::FoldPlan plan = data::make_folds(man, kRounds, s.tc.seed);
    train::Dataset full = load_dataset(man);

    std::vector<RoundOutput> outs(kRounds);
    std::vector<std::pair<Status, std::string>> errors(kRounds, {Status::ok, ""});
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            int r = next.fetch_add(1);
            if (r >= kRounds) return;
            try {
                fs::path rd = dir / ("round_" + std::to_string(r));
                std::error_code ec;
                fs::create_directories(rd, ec);
                if (ec) fail(Status::io, "cannot create '" + rd.string() + "': " + ec.message());
                outs[static_cast<size_t>(r)] =
                    run_round(full, plan.rounds[static_cast<size_t>(r)], s,
                              s.tc.seed + static_cast<uint64_t>(r), rd, man.schema.classes);
            } catch (const Error& e) {
                errors[static_cast<size_t>(r)] = {e.code(), e.what()};
            } catch (const std::exception& e) {
                errors[static_cast<size_t>(r)] = {Status::internal, e.what()};
            }
        }
    };
    int jobs = std::min(s.jobs, kRounds);
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    for (int r = 0; r < kRounds; ++r)
        if (errors[static_cast<size_t>(r)].first != Status::ok)
            fail(errors[static_cast<size_t>(r)].first,
                 "round " + std::to_string(r) + ": " + errors[static_cast<size_t>(r)].second);

    std::vector<eval::RoundMetrics> metrics;
    for (const RoundOutput& out : outs) metrics.push_back(out.metrics);
    eval::AggregateReport report = eval::aggregate(metrics, man.schema.classes);

    {
        std::ofstream os(dir / "report.csv");
        if (!os) fail(Status::io, "cannot write '" + (dir / "report.csv").string() + "'");
        eval::write_report_csv(os, report);
    }
    {
        std::ofstream os(dir / "curves.csv");
        if (!os) fail(Status::io, "cannot write '" + (dir / "curves.csv").string() + "'");
        os << "round,epoch,lr,train_cls,train_hc,val_cls,val_hc,val_macro_f1\n";
        for (int r = 0; r < kRounds; ++r)
            for (const train::EpochLog& h : outs[static_cast<size_t>(r)].fitres.history)
                os << r << "," << h.epoch << "," << format_double(h.lr) << ","
                   << format_double(h.train_cls) << "," << format_double(h.train_hc) << ","
                   << format_double(h.val_cls) << "," << format_double(h.val_hc) << ","
                   << format_double(h.val_macro_f1) << "\n";
    }

    for (int r = 0; r < kRounds; ++r)
        std::cout << "round " << r << ": best epoch " << outs[static_cast<size_t>(r)].fitres.best_epoch
                  << ", test macro-F1 "
                  << format_double(outs[static_cast<size_t>(r)].metrics.macro_f1) << "\n";
    std::cout << "macro_f1 mean=" << format_double(report.macro_f1_mean)
              << " std=" << format_double(report.macro_f1_std)
              << "; accuracy mean=" << format_double(report.accuracy_mean)
              << " std=" << format_double(report.accuracy_std) << "\n";
    std::cout << "run directory: " << dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// rpeaks
// ---------------------------------------------------------------------------

void run_rpeaks(const std::string& signal_path) {
    data::SignalFile f = data::read_signal(signal_path);
    SignalBuffer lead1;
    lead1.fs = f.fs;
    lead1.samples = std::move(f.leads[0]);
    rpeak::RPeakResult res = rpeak::detect_rpeaks(lead1);
    for (int64_t idx : res.peak_indices) std::cout << idx << "\n";
    std::cerr << "count=" << res.count << "\n";
}

}  // namespace x3ecg::cmd
