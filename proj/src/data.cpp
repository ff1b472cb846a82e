#include "data.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "dsp.hpp"
#include "rpeak.hpp"

namespace x3ecg::data {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// schemas
// ---------------------------------------------------------------------------

int LabelSchema::index_of(const std::string& cls) const {
    for (size_t i = 0; i < classes.size(); ++i)
        if (classes[i] == cls) return static_cast<int>(i);
    return -1;
}

LabelSchema LabelSchema::chapman() {
    return {"chapman", Task::multi_class, {"AFIB", "GSVT", "SB", "SR"}};
}

LabelSchema LabelSchema::cpsc2018() {
    return {"cpsc2018",
            Task::multi_label,
            {"SNR", "AF", "IAVB", "LBBB", "RBBB", "PAC", "PVC", "STD", "STE"}};
}

LabelSchema LabelSchema::custom(Task task, std::vector<std::string> classes) {
    if (classes.empty()) fail(Status::invalid_argument, "custom schema needs at least one class");
    return {"custom", task, std::move(classes)};
}

LabelSchema LabelSchema::by_name(const std::string& name) {
    if (name == "chapman") return chapman();
    if (name == "cpsc2018") return cpsc2018();
    fail(Status::format, "unknown label schema '" + name + "' (chapman, cpsc2018, or custom "
                         "with task= and classes=)");
}

// ---------------------------------------------------------------------------
// manifest
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kManifestTag = "# x3ecg-manifest";
constexpr const char* kHeader = "id,path,age,gender,labels";

[[noreturn]] void row_fail(const fs::path& path, size_t line_no, const std::string& msg) {
    fail(Status::format, path.string() + ":" + std::to_string(line_no) + ": " + msg);
}

}  // namespace

Manifest load_manifest(const fs::path& path) {
    std::ifstream is(path);
    if (!is) fail(Status::io, "cannot open manifest '" + path.string() + "'");

    std::string line;
    size_t line_no = 0;

    // line 1: schema declaration
    if (!std::getline(is, line)) fail(Status::format, path.string() + ": empty manifest");
    ++line_no;
    std::string decl = trim(line);
    if (decl.rfind(kManifestTag, 0) != 0)
        row_fail(path, line_no, "first line must start with '" + std::string(kManifestTag) + "'");
    std::string schema_name;
    std::optional<Task> task;
    std::vector<std::string> classes;
    for (const std::string& tok : split(decl.substr(std::strlen(kManifestTag)), ' ')) {
        std::string t = trim(tok);
        if (t.empty()) continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos) row_fail(path, line_no, "bad declaration token '" + t + "'");
        std::string key = t.substr(0, eq), value = t.substr(eq + 1);
        if (key == "schema")
            schema_name = value;
        else if (key == "task")
            task = parse_task(value);
        else if (key == "classes")
            classes = split(value, '|');
        else
            row_fail(path, line_no, "unknown declaration key '" + key + "'");
    }
    Manifest m;
    if (schema_name.empty()) row_fail(path, line_no, "missing schema=");
    if (schema_name == "custom") {
        if (!task || classes.empty())
            row_fail(path, line_no, "custom schema needs task= and classes=");
        m.schema = LabelSchema::custom(*task, classes);
    } else {
        m.schema = LabelSchema::by_name(schema_name);
        if (task && *task != m.schema.task)
            row_fail(path, line_no, "task= contradicts schema '" + schema_name + "'");
        if (!classes.empty() && classes != m.schema.classes)
            row_fail(path, line_no, "classes= contradicts schema '" + schema_name + "'");
    }

    // line 2: fixed header
    if (!std::getline(is, line)) fail(Status::format, path.string() + ": missing header row");
    ++line_no;
    if (trim(line) != kHeader)
        row_fail(path, line_no, "header must be exactly '" + std::string(kHeader) + "'");

    m.dir = path.has_parent_path() ? path.parent_path() : fs::path(".");

    std::map<std::string, size_t> seen;
    while (std::getline(is, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::vector<std::string> cols = split(line, ',');
        if (cols.size() != 5)
            row_fail(path, line_no,
                     "expected 5 columns, got " + std::to_string(cols.size()));
        RecordDescriptor d;
        d.id = trim(cols[0]);
        d.path = trim(cols[1]);
        if (d.id.empty() || d.path.empty()) row_fail(path, line_no, "empty id or path");
        if (seen.count(d.id))
            row_fail(path, line_no, "duplicate id '" + d.id + "' (first at line " +
                                        std::to_string(seen[d.id]) + ")");
        seen[d.id] = line_no;

        std::string age_tok = trim(cols[2]);
        if (!age_tok.empty()) {
            auto age = parse_double(age_tok);
            if (!age) row_fail(path, line_no, "bad age '" + age_tok + "'");
            d.demographics.age = *age;
        }
        d.demographics.gender = demog::parse_gender(cols[3]);

        std::vector<std::string> labels;
        for (const std::string& l : split(trim(cols[4]), '|'))
            if (!trim(l).empty()) labels.push_back(trim(l));
        if (m.schema.task == Task::multi_class) {
            if (labels.size() != 1)
                row_fail(path, line_no, "multi-class rows need exactly one label, got " +
                                            std::to_string(labels.size()));
            int idx = m.schema.index_of(labels[0]);
            if (idx < 0) row_fail(path, line_no, "unknown class '" + labels[0] + "'");
            d.class_index = idx;
        } else {
            d.label_bits.assign(static_cast<size_t>(m.schema.num_classes()), 0);
            if (labels.empty()) row_fail(path, line_no, "multi-label rows need at least one label");
            for (const std::string& l : labels) {
                int idx = m.schema.index_of(l);
                if (idx < 0) row_fail(path, line_no, "unknown class '" + l + "'");
                d.label_bits[static_cast<size_t>(idx)] = 1;
            }
        }
        m.records.push_back(std::move(d));
    }

    // attach cached beat counts when a sidecar exists
    std::map<std::string, int64_t> counts = read_ngt_sidecar(path);
    for (RecordDescriptor& d : m.records) {
        auto it = counts.find(d.id);
        if (it != counts.end()) d.n_gt = it->second;
    }
    return m;
}

void write_manifest(const fs::path& path, const Manifest& m) {
    std::ofstream os(path);
    if (!os) fail(Status::io, "cannot write manifest '" + path.string() + "'");
    os << kManifestTag << " schema=" << m.schema.name;
    if (m.schema.name == "custom")
        os << " task=" << task_name(m.schema.task) << " classes=" << join(m.schema.classes, "|");
    os << "\n" << kHeader << "\n";
    for (const RecordDescriptor& d : m.records) {
        os << d.id << "," << d.path << ",";
        if (d.demographics.age) os << format_double(*d.demographics.age);
        os << ",";
        if (d.demographics.gender)
            os << (*d.demographics.gender == demog::Gender::male ? "m" : "f");
        os << ",";
        if (m.schema.task == Task::multi_class) {
            os << m.schema.classes[static_cast<size_t>(d.class_index)];
        } else {
            std::vector<std::string> labels;
            for (size_t i = 0; i < d.label_bits.size(); ++i)
                if (d.label_bits[i]) labels.push_back(m.schema.classes[i]);
            os << join(labels, "|");
        }
        os << "\n";
    }
    if (!os) fail(Status::io, "failed writing manifest '" + path.string() + "'");
}

std::map<std::string, int64_t> read_ngt_sidecar(const fs::path& manifest_path) {
    fs::path side = manifest_path;
    side += ".ngt";
    std::map<std::string, int64_t> out;
    std::ifstream is(side);
    if (!is) return out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::vector<std::string> cols = split(t, ',');
        auto count = cols.size() == 2 ? parse_int(cols[1]) : std::nullopt;
        if (!count) row_fail(side, line_no, "expected 'id,count'");
        out[trim(cols[0])] = *count;
    }
    return out;
}

void write_ngt_sidecar(const fs::path& manifest_path,
                       const std::vector<std::pair<std::string, int64_t>>& counts) {
    fs::path side = manifest_path;
    side += ".ngt";
    std::ofstream os(side);
    if (!os) fail(Status::io, "cannot write sidecar '" + side.string() + "'");
    for (const auto& [id, count] : counts) os << id << "," << count << "\n";
    if (!os) fail(Status::io, "failed writing sidecar '" + side.string() + "'");
}

// ---------------------------------------------------------------------------
// binary signal files
// ---------------------------------------------------------------------------

namespace {

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

}  // namespace

SignalFile read_signal(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(Status::io, "cannot open signal file '" + path.string() + "'");
    char magic[4];
    if (!is.read(magic, 4)) fail(Status::format, path.string() + ": truncated header");
    SignalFile f;
    if (std::memcmp(magic, "ECG3", 4) == 0)
        f.preprocessed = false;
    else if (std::memcmp(magic, "ECGC", 4) == 0)
        f.preprocessed = true;
    else
        fail(Status::format, path.string() + ": bad magic (expected ECG3 or ECGC)");
    uint16_t n_leads;
    uint64_t n_samples;
    uint32_t fs;
    if (!read_le(is, n_leads) || !read_le(is, n_samples) || !read_le(is, fs))
        fail(Status::format, path.string() + ": truncated header");
    if (n_leads < 1 || n_leads > 64)
        fail(Status::format, path.string() + ": implausible lead count " + std::to_string(n_leads));
    if (n_samples > (1ULL << 32))
        fail(Status::format, path.string() + ": implausible sample count");
    f.fs = static_cast<int>(fs);
    f.leads.assign(n_leads, std::vector<double>(static_cast<size_t>(n_samples)));
    std::vector<unsigned char> row(static_cast<size_t>(n_samples) * 4);
    for (auto& lead : f.leads) {
        if (!is.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size())))
            fail(Status::format, path.string() + ": truncated sample data");
        for (size_t i = 0; i < lead.size(); ++i) {
            uint32_t bits = static_cast<uint32_t>(row[4 * i]) |
                            static_cast<uint32_t>(row[4 * i + 1]) << 8 |
                            static_cast<uint32_t>(row[4 * i + 2]) << 16 |
                            static_cast<uint32_t>(row[4 * i + 3]) << 24;
            float v;
            std::memcpy(&v, &bits, 4);
            lead[i] = static_cast<double>(v);
        }
    }
    return f;
}

void write_signal(const fs::path& path, bool preprocessed, int fs,
                  const std::vector<std::vector<double>>& leads) {
    if (leads.empty()) fail(Status::invalid_argument, "write_signal: no leads");
    size_t n = leads[0].size();
    for (const auto& l : leads)
        if (l.size() != n) fail(Status::invalid_argument, "write_signal: ragged leads");
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(Status::io, "cannot write signal file '" + path.string() + "'");
    os.write(preprocessed ? "ECGC" : "ECG3", 4);
    write_le<uint16_t>(os, static_cast<uint16_t>(leads.size()));
    write_le<uint64_t>(os, static_cast<uint64_t>(n));
    write_le<uint32_t>(os, static_cast<uint32_t>(fs));
    std::vector<unsigned char> row(n * 4);
    for (const auto& lead : leads) {
        for (size_t i = 0; i < n; ++i) {
            float v = static_cast<float>(lead[i]);
            uint32_t bits;
            std::memcpy(&bits, &v, 4);
            row[4 * i] = static_cast<unsigned char>(bits & 0xff);
            row[4 * i + 1] = static_cast<unsigned char>((bits >> 8) & 0xff);
            row[4 * i + 2] = static_cast<unsigned char>((bits >> 16) & 0xff);
            row[4 * i + 3] = static_cast<unsigned char>((bits >> 24) & 0xff);
        }
        os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    os.flush();
    if (!os) fail(Status::io, "failed writing signal file '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// recording pipeline
// ---------------------------------------------------------------------------

Recording load_recording(const Manifest& m, const RecordDescriptor& d, bool preprocess) {
    fs::path path = m.resolve(d);
    SignalFile f = read_signal(path);

    Recording r;
    r.id = d.id;
    r.demographics = d.demographics;
    r.class_index = d.class_index;
    r.label_bits = d.label_bits;

    if (preprocess) {
        if (f.preprocessed)
            fail(Status::domain, path.string() + ": already preprocessed (ECGC)");
        if (f.fs != kTargetFs)
            fail(Status::domain, path.string() + ": unsupported sampling rate " +
                                     std::to_string(f.fs) + " Hz (need " +
                                     std::to_string(kTargetFs) + ")");
        std::vector<std::vector<double>> three;
        if (f.leads.size() == 3)
            three = f.leads;
        else if (f.leads.size() == 12)
            three = dsp::select_leads(f.leads, {"I", "II", "V1"});
        else
            fail(Status::domain, path.string() + ": expected 3 or 12 leads, got " +
                                     std::to_string(f.leads.size()));

        dsp::BiquadCascade filt = dsp::design_butterworth_bandpass(3, 1.0, 47.0, kTargetFs);
        r.leads.reserve(kNumLeads * kTargetLen);
        for (auto& lead : three) {
            std::vector<double> y = dsp::fix_length(lead, kTargetLen);
            y = dsp::filtfilt(filt, y);
            y = dsp::standardize(y);
            r.leads.insert(r.leads.end(), y.begin(), y.end());
        }
    } else {
        if (!f.preprocessed)
            fail(Status::domain, path.string() + ": raw ECG3 file; run preprocess first");
        if (f.leads.size() != kNumLeads || f.leads[0].size() != kTargetLen)
            fail(Status::format, path.string() + ": preprocessed file must be 3 x 5000");
        if (f.fs != kTargetFs)
            fail(Status::format, path.string() + ": preprocessed file must be 500 Hz");
        r.leads.reserve(kNumLeads * kTargetLen);
        for (auto& lead : f.leads) r.leads.insert(r.leads.end(), lead.begin(), lead.end());
    }

    if (d.n_gt) {
        r.n_gt = *d.n_gt;
    } else {
        SignalBuffer lead1;
        lead1.fs = kTargetFs;
        lead1.samples.assign(r.leads.begin(), r.leads.begin() + kTargetLen);
        r.n_gt = rpeak::count_heartbeats(lead1);
    }
    return r;
}

// ---------------------------------------------------------------------------
// folds
// ---------------------------------------------------------------------------

FoldPlan make_folds(const Manifest& m, int k, uint64_t seed) {
    int n = static_cast<int>(m.records.size());
    if (k < 3) fail(Status::invalid_argument, "fold count must be >= 3, got " + std::to_string(k));
    if (n < k)
        fail(Status::domain, "need at least " + std::to_string(k) + " records for " +
                                 std::to_string(k) + "-fold CV, got " + std::to_string(n));
    int C = m.schema.num_classes();

    FoldPlan plan;
    plan.k = k;
    plan.fold_of.assign(static_cast<size_t>(n), -1);
    Rng rng(Rng::derive(seed, 0xf01d5ULL));

    if (m.schema.task == Task::multi_class) {
        std::vector<std::vector<int>> by_class(static_cast<size_t>(C));
        for (int i = 0; i < n; ++i)
            by_class[static_cast<size_t>(m.records[static_cast<size_t>(i)].class_index)].push_back(i);
        for (int c = 0; c < C; ++c)
            if (by_class[static_cast<size_t>(c)].empty())
                fail(Status::domain, "class '" + m.schema.classes[static_cast<size_t>(c)] +
                                         "' has no examples");
        // continue the fold cursor across classes so fold sizes stay balanced
        int cursor = 0;
        for (int c = 0; c < C; ++c) {
            std::vector<int>& ids = by_class[static_cast<size_t>(c)];
            rng.shuffle(ids);
            for (int idx : ids) {
                plan.fold_of[static_cast<size_t>(idx)] = cursor;
                cursor = (cursor + 1) % k;
            }
        }
    } else {
        // iterative stratification (Sechidis et al.): place examples of the
        // rarest remaining label first, into the fold with greatest demand.
        std::vector<int> order(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
        rng.shuffle(order);

        std::vector<int64_t> label_count(static_cast<size_t>(C), 0);
        for (const RecordDescriptor& d : m.records)
            for (int c = 0; c < C; ++c) label_count[static_cast<size_t>(c)] += d.label_bits[static_cast<size_t>(c)];
        for (int c = 0; c < C; ++c)
            if (label_count[static_cast<size_t>(c)] == 0)
                fail(Status::domain, "label '" + m.schema.classes[static_cast<size_t>(c)] +
                                         "' has no positive examples");

        double per_fold = static_cast<double>(n) / k;
        std::vector<double> fold_demand(static_cast<size_t>(k), per_fold);
        std::vector<std::vector<double>> label_demand(
            static_cast<size_t>(C), std::vector<double>(static_cast<size_t>(k)));
        for (int c = 0; c < C; ++c)
            for (int f = 0; f < k; ++f)
                label_demand[static_cast<size_t>(c)][static_cast<size_t>(f)] =
                    static_cast<double>(label_count[static_cast<size_t>(c)]) / k;

        std::vector<bool> assigned(static_cast<size_t>(n), false);
        std::vector<int64_t> remaining = label_count;
        int placed = 0;
        while (placed < n) {
            // rarest label still outstanding
            int target_label = -1;
            for (int c = 0; c < C; ++c)
                if (remaining[static_cast<size_t>(c)] > 0 &&
                    (target_label < 0 ||
                     remaining[static_cast<size_t>(c)] < remaining[static_cast<size_t>(target_label)]))
                    target_label = c;

            for (int idx : order) {
                if (assigned[static_cast<size_t>(idx)]) continue;
                const RecordDescriptor& d = m.records[static_cast<size_t>(idx)];
                bool eligible = target_label < 0 ||
                                d.label_bits[static_cast<size_t>(target_label)] != 0;
                if (!eligible) continue;

                int best = 0;
                for (int f = 1; f < k; ++f) {
                    if (target_label >= 0) {
                        double a = label_demand[static_cast<size_t>(target_label)][static_cast<size_t>(f)];
                        double b = label_demand[static_cast<size_t>(target_label)][static_cast<size_t>(best)];
                        if (a > b || (a == b && fold_demand[static_cast<size_t>(f)] >
                                                    fold_demand[static_cast<size_t>(best)]))
                            best = f;
                    } else if (fold_demand[static_cast<size_t>(f)] >
                               fold_demand[static_cast<size_t>(best)]) {
                        best = f;
                    }
                }
                plan.fold_of[static_cast<size_t>(idx)] = best;
                assigned[static_cast<size_t>(idx)] = true;
                ++placed;
                fold_demand[static_cast<size_t>(best)] -= 1.0;
                for (int c = 0; c < C; ++c)
                    if (d.label_bits[static_cast<size_t>(c)]) {
                        label_demand[static_cast<size_t>(c)][static_cast<size_t>(best)] -= 1.0;
                        --remaining[static_cast<size_t>(c)];
                    }
            }
        }
    }

    for (int f : plan.fold_of)
        if (f < 0) fail(Status::internal, "fold assignment left a record unplaced");

    plan.rounds.resize(static_cast<size_t>(k));
    for (int r = 0; r < k; ++r) {
        int val_fold = (r + k - 2) % k;
        int test_fold = (r + k - 1) % k;
        FoldRound& round = plan.rounds[static_cast<size_t>(r)];
        for (int i = 0; i < n; ++i) {
            int f = plan.fold_of[static_cast<size_t>(i)];
            if (f == val_fold)
                round.val.push_back(i);
            else if (f == test_fold)
                round.test.push_back(i);
            else
                round.train.push_back(i);
        }
    }
    return plan;
}

}  // namespace x3ecg::data
