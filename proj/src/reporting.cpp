#include "twinfal/reporting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "twinfal/error.hpp"
#include "twinfal/numeric.hpp"

namespace twinfal {

using nlohmann::json;

namespace {

std::string csv_double(double x) { return std::isnan(x) ? "" : format_double(x); }

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            fields.push_back(field);
            field.clear();
        } else {
            field += c;
        }
    }
    fields.push_back(field);
    return fields;
}

}  // namespace

void save_results_csv(const std::vector<TestResult>& results, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write results file: " + path);
    out << "hypothesis_id,outcome_feature,t,direction,n,n_hat,mu_lo,mu_up,mu_hat,p,holm_reject,"
           "gate_reason\n";
    for (const auto& r : results) {
        out << r.hypothesis_id << ',' << r.outcome_feature << ',' << r.t << ','
            << direction_name(r.direction) << ',' << r.estimate.n << ',' << r.estimate.n_hat << ','
            << csv_double(r.estimate.mu_lo) << ',' << csv_double(r.estimate.mu_up) << ','
            << csv_double(r.estimate.mu_hat) << ',' << csv_double(r.p_value) << ','
            << (r.multiplicity_reject ? 1 : 0) << ",\"" << gate_reason_name(r.gate) << "\"\n";
    }
}

std::vector<TestResult> load_results_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open results file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("results file is empty: " + path);
    std::vector<TestResult> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 12) {
            throw ValidationError("results file line " + std::to_string(line_no) +
                                  ": expected 12 fields, got " + std::to_string(f.size()));
        }
        try {
            TestResult r;
            r.hypothesis_id = f[0];
            r.outcome_feature = std::stoi(f[1]);
            r.t = std::stoi(f[2]);
            r.direction = f[3] == "up" ? Direction::Up : Direction::Lo;
            r.estimate.n = static_cast<std::size_t>(std::stoull(f[4]));
            r.estimate.n_hat = static_cast<std::size_t>(std::stoull(f[5]));
            const double nan = std::numeric_limits<double>::quiet_NaN();
            r.estimate.mu_lo = f[6].empty() ? nan : std::stod(f[6]);
            r.estimate.mu_up = f[7].empty() ? nan : std::stod(f[7]);
            r.estimate.mu_hat = f[8].empty() ? nan : std::stod(f[8]);
            r.p_value = std::stod(f[9]);
            r.multiplicity_reject = f[10] == "1";
            for (GateReason g : {GateReason::None, GateReason::NoMatchingObs,
                                 GateReason::NoTwinInRegion, GateReason::BootstrapMinN}) {
                if (f[11] == gate_reason_name(g)) r.gate = g;
            }
            out.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw ValidationError("results file line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void save_estimates_csv(const std::vector<TestResult>& results, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write estimates file: " + path);
    out << "hypothesis_id,n,n_match,mu_lo,mu_up,n_hat,mu_hat,width,match_fraction\n";
    for (const auto& r : results) {
        const auto& e = r.estimate;
        out << r.hypothesis_id << ',' << e.n << ',' << e.n_match << ',' << csv_double(e.mu_lo)
            << ',' << csv_double(e.mu_up) << ',' << e.n_hat << ',' << csv_double(e.mu_hat) << ','
            << (e.n ? csv_double(e.width()) : "") << ','
            << (e.n ? csv_double(e.match_fraction()) : "") << '\n';
    }
}

namespace {

struct OutcomeRow {
    std::size_t hypotheses = 0;
    std::size_t gated = 0;
    std::size_t rejections = 0;
    std::vector<double> neg_log10_p;
};

std::map<int, OutcomeRow> collect_rows(const std::vector<TestResult>& results) {
    std::map<int, OutcomeRow> rows;
    for (const auto& r : results) {
        auto& row = rows[r.outcome_feature];
        ++row.hypotheses;
        if (r.gate != GateReason::None) ++row.gated;
        if (r.multiplicity_reject) ++row.rejections;
        const double neg_log = -std::log10(std::max(r.p_value, 1e-300));
        row.neg_log10_p.push_back(neg_log == 0.0 ? 0.0 : neg_log);  // never -0.0
    }
    for (auto& [f, row] : rows) std::sort(row.neg_log10_p.begin(), row.neg_log10_p.end());
    return rows;
}

json row_summary(const OutcomeRow& row) {
    const auto& v = row.neg_log10_p;
    json s;
    s["min"] = v.front();
    s["median"] = v[(v.size() - 1) / 2];
    s["max"] = v.back();
    return s;
}

}  // namespace

void save_summary_json(const std::vector<TestResult>& results, const std::string& path) {
    const auto rows = collect_rows(results);
    json j;
    j["outcomes"] = json::array();
    std::size_t total = 0, total_rej = 0;
    for (const auto& [feature, row] : rows) {
        j["outcomes"].push_back({{"feature", feature},
                                 {"hypotheses", row.hypotheses},
                                 {"gated", row.gated},
                                 {"rejections", row.rejections}});
        total += row.hypotheses;
        total_rej += row.rejections;
    }
    j["total_hypotheses"] = total;
    j["total_rejections"] = total_rej;
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write summary file: " + path);
    out << j.dump(2) << '\n';
}

void save_sensitivity_csv(const SensitivityResult& sweep, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write sensitivity file: " + path);
    out << "delta,outcome_feature,hypotheses,rejections,skipped\n";
    for (const auto& c : sweep.cells) {
        out << format_double(c.delta) << ',' << c.outcome_feature << ',' << c.hypotheses << ','
            << c.rejections << ',' << c.skipped << '\n';
    }
}

std::string render_report_json(const std::vector<TestResult>& results) {
    const auto rows = collect_rows(results);
    json j;
    j["outcomes"] = json::array();
    for (const auto& [feature, row] : rows) {
        json o;
        o["feature"] = feature;
        o["hypotheses"] = row.hypotheses;
        o["gated"] = row.gated;
        o["rejections"] = row.rejections;
        o["neg_log10_p"] = row.neg_log10_p;
        o["neg_log10_p_summary"] = row_summary(row);
        j["outcomes"].push_back(o);
    }
    return j.dump(2);
}

void save_report(const std::vector<TestResult>& results, const std::string& json_path,
                 const std::string& csv_path) {
    {
        std::ofstream out(json_path);
        if (!out) throw ValidationError("cannot write report file: " + json_path);
        out << render_report_json(results) << '\n';
    }
    const auto rows = collect_rows(results);
    std::ofstream out(csv_path);
    if (!out) throw ValidationError("cannot write report file: " + csv_path);
    out << "outcome_feature,hypotheses,gated,rejections,min_neg_log10_p,median_neg_log10_p,"
           "max_neg_log10_p\n";
    for (const auto& [feature, row] : rows) {
        const auto& v = row.neg_log10_p;
        out << feature << ',' << row.hypotheses << ',' << row.gated << ',' << row.rejections << ','
            << format_double(v.front()) << ',' << format_double(v[(v.size() - 1) / 2]) << ','
            << format_double(v.back()) << '\n';
    }
}

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot hash missing file: " + path);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

ManifestBuilder::ManifestBuilder(std::string command) : command_(std::move(command)) {}

void ManifestBuilder::add_seed(const std::string& name, std::uint64_t value) {
    seeds_[name] = value;
}

void ManifestBuilder::add_config(const std::string& name, const std::string& inline_json) {
    configs_[name] = inline_json;
}

void ManifestBuilder::add_input(const std::string& path) { inputs_[path] = sha256_file(path); }

void ManifestBuilder::add_output(const std::string& path) { outputs_[path] = sha256_file(path); }

namespace {

// Paths are recorded relative to the manifest so reruns into different
// directories stay byte-identical.
std::map<std::string, std::string> relativize(const std::map<std::string, std::string>& paths,
                                              const std::string& manifest_path) {
    namespace fs = std::filesystem;
    const fs::path base = fs::path(manifest_path).parent_path();
    std::map<std::string, std::string> out;
    for (const auto& [p, hash] : paths) {
        std::error_code ec;
        fs::path rel = fs::relative(p, base, ec);
        out[ec || rel.empty() ? fs::path(p).filename().string() : rel.string()] = hash;
    }
    return out;
}

}  // namespace

void ManifestBuilder::write(const std::string& path) const {
    json j;
    j["tool_version"] = kToolVersion;
    j["command"] = command_;
    j["seeds"] = seeds_;
    json cfgs = json::object();
    for (const auto& [name, text] : configs_) {
        try {
            cfgs[name] = json::parse(text);
        } catch (const json::exception&) {
            cfgs[name] = text;
        }
    }
    j["configs"] = cfgs;
    j["inputs"] = relativize(inputs_, path);
    j["outputs"] = relativize(outputs_, path);
    // SOURCE_DATE_EPOCH wins so reruns with identical inputs stay byte-identical.
    const char* sde = std::getenv("SOURCE_DATE_EPOCH");
    j["timestamp"] = sde ? static_cast<std::int64_t>(std::strtoll(sde, nullptr, 10))
                         : static_cast<std::int64_t>(std::time(nullptr));
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write manifest: " + path);
    out << j.dump(2) << '\n';
}

}  // namespace twinfal
