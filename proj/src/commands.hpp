#pragma once

#include <map>
#include <string>

#include "common.hpp"

namespace x3ecg::cmd {

// Flat key=value configuration shared by all commands. Every key can come
// from a config file or a command-line flag of the same name; unknown keys
// are errors. The effective merged config is echoed into the run directory
// before any compute starts.
class Options {
public:
    static bool is_known(const std::string& key);

    void set(const std::string& key, const std::string& value);
    void load_file(const std::string& path);

    bool has(const std::string& key) const { return kv_.count(key) != 0; }
    std::string get_str(const std::string& key, const std::string& fallback) const;
    std::string require(const std::string& key) const;
    int64_t get_int(const std::string& key, int64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

void run_synth(const Options& o);
void run_preprocess(const Options& o);
void run_train(const Options& o);
void run_cv(const Options& o);
// prints peak indices to stdout, `count=<n>` to stderr
void run_rpeaks(const std::string& signal_path);

}  // namespace x3ecg::cmd
