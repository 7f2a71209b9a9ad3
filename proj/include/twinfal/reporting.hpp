#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "twinfal/testing.hpp"

namespace twinfal {

inline constexpr const char* kToolVersion = "0.1.0";

// results CSV: one row per hypothesis.
void save_results_csv(const std::vector<TestResult>& results, const std::string& path);
std::vector<TestResult> load_results_csv(const std::string& path);  // estimate partially filled

// estimate dump CSV: hypothesis id, n, n_match, mu_lo, mu_up, n_hat, mu_hat,
// width, match_fraction.
void save_estimates_csv(const std::vector<TestResult>& results, const std::string& path);

// per-outcome rejection counts.
void save_summary_json(const std::vector<TestResult>& results, const std::string& path);

void save_sensitivity_csv(const SensitivityResult& sweep, const std::string& path);

// per-outcome table plus -log10 p distribution summary.
std::string render_report_json(const std::vector<TestResult>& results);
void save_report(const std::vector<TestResult>& results, const std::string& json_path,
                 const std::string& csv_path);

// Run manifest: tool version, command, seeds, input/output content hashes and
// a timestamp (SOURCE_DATE_EPOCH wins over the wall clock so reruns can be
// byte-identical).
class ManifestBuilder {
  public:
    explicit ManifestBuilder(std::string command);
    void add_seed(const std::string& name, std::uint64_t value);
    void add_config(const std::string& name, const std::string& inline_json);
    void add_input(const std::string& path);
    void add_output(const std::string& path);
    void write(const std::string& path) const;

  private:
    std::string command_;
    std::map<std::string, std::uint64_t> seeds_;
    std::map<std::string, std::string> configs_;
    std::map<std::string, std::string> inputs_;   // path -> sha256
    std::map<std::string, std::string> outputs_;  // path -> sha256
};

std::string sha256_file(const std::string& path);

}  // namespace twinfal
