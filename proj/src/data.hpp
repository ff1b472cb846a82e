#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"
#include "demographics.hpp"

namespace x3ecg::data {

constexpr int kTargetFs = 500;
constexpr size_t kTargetLen = 5000;
constexpr int kNumLeads = 3;

struct LabelSchema {
    std::string name;  // chapman | cpsc2018 | custom
    Task task = Task::multi_class;
    std::vector<std::string> classes;

    int num_classes() const { return static_cast<int>(classes.size()); }
    int index_of(const std::string& cls) const;  // -1 when unknown

    static LabelSchema chapman();
    static LabelSchema cpsc2018();
    static LabelSchema custom(Task task, std::vector<std::string> classes);
    static LabelSchema by_name(const std::string& name);
};

struct RecordDescriptor {
    std::string id;
    std::string path;  // relative to the manifest directory
    demog::Demographics demographics;
    int64_t class_index = -1;          // multi-class
    std::vector<uint8_t> label_bits;   // multi-label
    std::optional<int64_t> n_gt;       // beat count, filled from the sidecar
};

struct Manifest {
    LabelSchema schema;
    std::vector<RecordDescriptor> records;
    std::filesystem::path dir;  // directory the paths are relative to

    std::filesystem::path resolve(const RecordDescriptor& d) const { return dir / d.path; }
};

// Manifest CSV: a comment line `# x3ecg-manifest schema=... [task=... classes=...]`,
// a header `id,path,age,gender,labels`, then one row per recording with
// `|`-separated label names.  A sibling `<manifest>.ngt` sidecar caches beat
// counts as `id,count` lines.
Manifest load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& m);

std::map<std::string, int64_t> read_ngt_sidecar(const std::filesystem::path& manifest_path);
void write_ngt_sidecar(const std::filesystem::path& manifest_path,
                       const std::vector<std::pair<std::string, int64_t>>& counts);

// ---------------------------------------------------------------------------
// binary signal files: magic ECG3 (raw) / ECGC (preprocessed), n_leads u16,
// n_samples u64, fs u32, then float32 samples row-major — all little-endian.
// ---------------------------------------------------------------------------

struct SignalFile {
    bool preprocessed = false;
    int fs = 0;
    std::vector<std::vector<double>> leads;  // [n_leads][n_samples], widened from f32
};

SignalFile read_signal(const std::filesystem::path& path);
void write_signal(const std::filesystem::path& path, bool preprocessed, int fs,
                  const std::vector<std::vector<double>>& leads);

// ---------------------------------------------------------------------------
// recordings
// ---------------------------------------------------------------------------

struct Recording {
    std::string id;
    std::vector<double> leads;  // flat [3][5000]
    int fs = kTargetFs;
    demog::Demographics demographics;
    int64_t class_index = -1;
    std::vector<uint8_t> label_bits;
    int64_t n_gt = 0;

    const double* lead(int i) const { return leads.data() + static_cast<size_t>(i) * kTargetLen; }
};

// preprocess=true reads a raw ECG3 file (3 or 12 leads at 500 Hz), selects
// leads I/II/V1 when needed, fixes the length to 5000, applies the 1-47 Hz
// zero-phase bandpass and per-lead standardization.  preprocess=false expects
// an already-preprocessed ECGC file.  The beat count comes from the manifest
// sidecar when present, otherwise from the detector on processed lead I.
Recording load_recording(const Manifest& m, const RecordDescriptor& d, bool preprocess);

// ---------------------------------------------------------------------------
// cross-validation folds
// ---------------------------------------------------------------------------

struct FoldRound {
    std::vector<int> train, val, test;  // indices into Manifest::records
};

struct FoldPlan {
    int k = 10;
    std::vector<int> fold_of;  // per record
    std::vector<FoldRound> rounds;
};

// Stratified folds: multi-class deals each class round-robin across folds
// (continuing the fold cursor between classes so fold sizes stay balanced);
// multi-label uses iterative stratification, assigning examples of the rarest
// remaining label to the fold with the greatest remaining demand.  Round r
// uses fold (r+k-2) mod k for validation and (r+k-1) mod k for test.
FoldPlan make_folds(const Manifest& m, int k, uint64_t seed);

}  // namespace x3ecg::data
