// twinfal: falsify digital-twin simulators against observational trajectories
// using assumption-free longitudinal causal bounds.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "twinfal/bounds.hpp"
#include "twinfal/error.hpp"
#include "twinfal/regions.hpp"
#include "twinfal/reporting.hpp"
#include "twinfal/rng.hpp"
#include "twinfal/synth.hpp"
#include "twinfal/testing.hpp"
#include "twinfal/trajectory.hpp"
#include "twinfal/twinproto.hpp"

namespace fs = std::filesystem;
using namespace twinfal;

namespace {

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stoi(tok));
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stod(tok));
    }
    return out;
}

std::vector<std::string> split_command(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

std::string join_actions(const std::vector<int>& actions) {
    std::string out;
    for (std::size_t i = 0; i < actions.size(); ++i) {
        if (i) out += '-';
        out += std::to_string(actions[i]);
    }
    return out;
}

std::uint64_t hash_actions(const std::vector<int>& actions) {
    std::uint64_t h = 0x9E3779B97F4A7C15ull;
    for (int a : actions) h = mix64(h ^ mix64(static_cast<std::uint64_t>(a) + 0x1234));
    return h;
}

IntervalBackend parse_backend(const std::string& name) {
    if (name == "hoeffding") return IntervalBackend::Hoeffding;
    if (name == "boot-revperc") return IntervalBackend::BootstrapReversePercentile;
    if (name == "boot-perc") return IntervalBackend::BootstrapPercentile;
    throw ValidationError("unknown backend '" + name + "' (hoeffding | boot-revperc | boot-perc)");
}

MultiplicityMethod parse_multiplicity(const std::string& name) {
    if (name == "holm") return MultiplicityMethod::HolmBonferroni;
    if (name == "by") return MultiplicityMethod::BenjaminiYekutieli;
    throw ValidationError("unknown multiplicity method '" + name + "' (holm | by)");
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ValidationError("cannot create output directory: " + dir);
}

// Twin JSONL files carry their action sequence in every record; peek at the
// first one so callers don't have to repeat it.
TwinDataset load_twin_auto(const std::string& path, const SchemaSpec& schema) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open twin file: " + path);
    std::string first;
    while (std::getline(in, first)) {
        if (!first.empty()) break;
    }
    std::vector<int> actions;
    if (!first.empty()) {
        try {
            auto j = nlohmann::json::parse(first);
            actions = j.at("actions").get<std::vector<int>>();
        } catch (const std::exception& e) {
            throw ValidationError(path + " line 1: malformed record: " + e.what());
        }
    }
    return load_twin(path, schema, actions);
}

struct TestInputs {
    std::string schema_path;
    std::string obs_path;
    std::vector<std::string> twin_paths;
    std::string twin_cmd;
    std::size_t twin_n = 1000;
    int twin_timeout_ms = 30000;
    std::string hypotheses_path;
    std::string backend = "hoeffding";
    double alpha = 0.05;
    std::string multiplicity = "holm";
    int resamples = 100;
    std::uint64_t seed = 1;
    int workers = 1;
    std::string out_dir;
    bool two_sided = false;
};

void add_test_inputs(CLI::App* cmd, TestInputs& in, bool with_out_dir = true) {
    cmd->add_option("--schema", in.schema_path, "schema JSON file")->required();
    cmd->add_option("--obs", in.obs_path, "observational JSONL file")->required();
    cmd->add_option("--twin", in.twin_paths, "twin JSONL file (repeatable, one per action sequence)");
    cmd->add_option("--twin-cmd", in.twin_cmd,
                    "external twin command speaking twinproto/1 (alternative to --twin)");
    cmd->add_option("--twin-n", in.twin_n, "twin trajectories per action sequence for --twin-cmd");
    cmd->add_option("--twin-timeout-ms", in.twin_timeout_ms, "per-read timeout for --twin-cmd");
    cmd->add_option("--hypotheses", in.hypotheses_path, "hypothesis JSON file")->required();
    cmd->add_option("--backend", in.backend, "hoeffding | boot-revperc | boot-perc");
    cmd->add_option("--alpha", in.alpha, "significance level (also the multiplicity level)");
    cmd->add_option("--multiplicity", in.multiplicity, "holm | by");
    cmd->add_option("--resamples", in.resamples, "bootstrap resamples");
    cmd->add_option("--seed", in.seed, "master seed");
    cmd->add_option("--workers", in.workers, "parallel workers for hypothesis testing");
    cmd->add_flag("--two-sided", in.two_sided,
                  "experimental: also run the closed-testing variant (alpha/2 per side)");
    if (with_out_dir) cmd->add_option("--out-dir", in.out_dir, "output directory")->required();
}

struct LoadedTestInputs {
    SchemaSpec schema;
    Dataset obs;
    std::vector<Hypothesis> hyps;
    TwinStore twins;
    TestOptions opts;
    MultiplicityMethod method;
};

LoadedTestInputs load_test_inputs(const TestInputs& in, ManifestBuilder& manifest) {
    LoadedTestInputs out;
    out.schema = load_schema(in.schema_path);
    out.obs = load_observational(in.obs_path, out.schema);
    out.hyps = load_hypotheses(in.hypotheses_path);
    for (const auto& h : out.hyps) h.validate(out.schema);

    manifest.add_input(in.schema_path);
    manifest.add_input(in.obs_path);
    manifest.add_input(in.hypotheses_path);
    manifest.add_seed("seed", in.seed);

    out.opts.backend = parse_backend(in.backend);
    out.opts.alpha = in.alpha;
    out.opts.resamples = in.resamples;
    out.opts.seed = in.seed;
    out.opts.workers = in.workers;
    out.method = parse_multiplicity(in.multiplicity);

    if (!in.twin_paths.empty() && !in.twin_cmd.empty()) {
        throw ValidationError("use either --twin or --twin-cmd, not both");
    }
    if (!in.twin_cmd.empty()) {
        // One dataset per distinct action sequence among the hypotheses.
        std::set<std::vector<int>> sequences;
        for (const auto& h : out.hyps) sequences.insert(h.actions);
        ExternalTwinOptions ext;
        ext.command = split_command(in.twin_cmd);
        ext.timeout_ms = in.twin_timeout_ms;
        for (const auto& actions : sequences) {
            const std::uint64_t pool_seed = derive_key({in.seed, hash_actions(actions), 0xF00Dull});
            const auto pool = sample_x0_pool(out.obs, in.twin_n, pool_seed);
            const std::uint64_t run_seed = derive_key({in.seed, hash_actions(actions), 0xCAFEull});
            out.twins.add(run_external_twin(ext, out.schema, pool, actions, in.twin_n, run_seed));
        }
    } else {
        for (const auto& path : in.twin_paths) {
            manifest.add_input(path);
            out.twins.add(load_twin_auto(path, out.schema));
        }
    }
    return out;
}

std::vector<TestResult> run_and_save(const LoadedTestInputs& loaded, const std::string& out_dir,
                                     ManifestBuilder& manifest) {
    auto results = run_tests(loaded.obs, loaded.twins, loaded.hyps, loaded.opts);
    apply_multiplicity(results, loaded.method, loaded.opts.alpha);

    const std::string results_path = out_dir + "/results.csv";
    const std::string estimates_path = out_dir + "/estimates.csv";
    const std::string summary_path = out_dir + "/summary.json";
    save_results_csv(results, results_path);
    save_estimates_csv(results, estimates_path);
    save_summary_json(results, summary_path);
    manifest.add_output(results_path);
    manifest.add_output(estimates_path);
    manifest.add_output(summary_path);
    return results;
}

// --- subcommand bodies -------------------------------------------------------

int cmd_synth(const std::string& config_path, const std::string& out_dir, std::size_t n,
              std::uint64_t seed, bool seed_given, std::size_t twin_n,
              const std::string& twin_actions, const std::string& twin_mode) {
    ensure_out_dir(out_dir);
    SynthConfig cfg = load_synth_config(config_path);
    if (seed_given) cfg.seed = seed;

    ManifestBuilder manifest("synth");
    manifest.add_input(config_path);
    manifest.add_seed("seed", cfg.seed);
    manifest.add_config("synth", cfg.to_json());

    const std::string schema_path = out_dir + "/schema.json";
    save_schema(cfg.schema(), schema_path);

    Dataset obs = generate_observational(cfg, n, cfg.seed);
    const std::string obs_path = out_dir + "/obs.jsonl";
    save_observational(obs, obs_path);
    manifest.add_output(schema_path);
    manifest.add_output(obs_path);

    if (twin_n > 0 || !twin_actions.empty()) {
        if (twin_actions.empty()) {
            throw ValidationError("--twin-actions is required when --twin-n > 0");
        }
        const auto actions = parse_int_list(twin_actions);
        const TwinMode mode = TwinMode::parse(twin_mode);
        const auto pool =
            sample_x0_pool(obs, twin_n, derive_key({cfg.seed, hash_actions(actions), 0xF00Dull}));
        TwinDataset twin = generate_twin(cfg, mode, pool, actions,
                                         derive_key({cfg.seed, hash_actions(actions), 0xCAFEull}));
        const std::string twin_path = out_dir + "/twin.jsonl";
        save_twin(twin, twin_path);
        manifest.add_output(twin_path);
    }
    manifest.write(out_dir + "/manifest.json");
    return 0;
}

int cmd_gen_hypotheses(const std::string& schema_path, const std::string& obs_path,
                       const std::string& config_path, double holdout_fraction,
                       std::uint64_t split_seed, const std::string& out_dir) {
    ensure_out_dir(out_dir);
    ManifestBuilder manifest("gen-hypotheses");
    manifest.add_input(schema_path);
    manifest.add_input(obs_path);
    manifest.add_input(config_path);
    manifest.add_seed("split_seed", split_seed);

    const SchemaSpec schema = load_schema(schema_path);
    Dataset data = load_observational(obs_path, schema);
    const GeneratorConfig config = load_generator_config(config_path);
    manifest.add_config("generator", config.to_json());

    Dataset holdout = std::move(data);
    if (holdout_fraction > 0.0) {
        auto [head, rest] = split_holdout(holdout, holdout_fraction, split_seed);
        const std::string holdout_path = out_dir + "/holdout.jsonl";
        const std::string rest_path = out_dir + "/rest.jsonl";
        save_observational(head, holdout_path);
        save_observational(rest, rest_path);
        manifest.add_output(holdout_path);
        manifest.add_output(rest_path);
        holdout = std::move(head);
    }

    const GeneratorResult result = generate_hypotheses(holdout, config);
    {
        // Cut-point provenance: which per-timestep quantile cuts produced the regions.
        nlohmann::json cuts = nlohmann::json::object();
        for (const auto& [key, values] : result.cut_points) cuts[key] = values;
        manifest.add_config("cut_points", cuts.dump());
    }
    const std::string hyp_path = out_dir + "/hypotheses.json";
    const std::string skip_path = out_dir + "/skip_log.csv";
    save_hypotheses(result.hypotheses, hyp_path);
    save_skip_log(result.skipped, skip_path);
    manifest.add_output(hyp_path);
    manifest.add_output(skip_path);
    manifest.write(out_dir + "/manifest.json");

    std::cout << "hypotheses: " << result.hypotheses.size() << ", skipped tuples: "
              << result.skipped.size() << "\n";
    return 0;
}

int cmd_test(const TestInputs& in) {
    ensure_out_dir(in.out_dir);
    ManifestBuilder manifest("test");
    const LoadedTestInputs loaded = load_test_inputs(in, manifest);
    const auto results = run_and_save(loaded, in.out_dir, manifest);
    if (in.two_sided) {
        const std::string path = in.out_dir + "/two_sided.csv";
        std::ofstream out(path);
        out << "hypothesis_id,inference\n";
        for (const auto& h : loaded.hyps) {
            const auto verdict =
                two_sided_inference(loaded.obs, loaded.twins.find(h.actions), h, loaded.opts);
            out << h.id << ',' << two_sided_name(verdict) << '\n';
        }
        out.close();
        manifest.add_output(path);
    }
    manifest.write(in.out_dir + "/manifest.json");

    std::size_t rejections = 0, gated = 0;
    for (const auto& r : results) {
        if (r.multiplicity_reject) ++rejections;
        if (r.gate != GateReason::None) ++gated;
    }
    std::cout << "hypotheses: " << results.size() << ", gated: " << gated
              << ", rejections: " << rejections << "\n";
    return 0;
}

int cmd_sensitivity(const TestInputs& in, const std::string& deltas_text) {
    ensure_out_dir(in.out_dir);
    ManifestBuilder manifest("sensitivity");
    const LoadedTestInputs loaded = load_test_inputs(in, manifest);
    const auto deltas = parse_double_list(deltas_text);
    if (deltas.empty()) throw ValidationError("--deltas must list at least one value");

    const SensitivityResult sweep = sensitivity_sweep(loaded.obs, loaded.twins, loaded.hyps, deltas,
                                                      loaded.opts, loaded.method, loaded.opts.alpha);
    const std::string path = in.out_dir + "/sensitivity.csv";
    save_sensitivity_csv(sweep, path);
    manifest.add_output(path);
    manifest.write(in.out_dir + "/manifest.json");
    return 0;
}

int cmd_report(const std::string& results_path, const std::string& out_dir) {
    ensure_out_dir(out_dir);
    ManifestBuilder manifest("report");
    manifest.add_input(results_path);
    const auto results = load_results_csv(results_path);
    const std::string json_path = out_dir + "/report.json";
    const std::string csv_path = out_dir + "/report.csv";
    if (results.empty()) {
        std::ofstream(json_path) << "{\"outcomes\":[]}\n";
        std::ofstream(csv_path) << "outcome_feature,hypotheses,gated,rejections,min_neg_log10_p,"
                                   "median_neg_log10_p,max_neg_log10_p\n";
    } else {
        save_report(results, json_path, csv_path);
    }
    manifest.add_output(json_path);
    manifest.add_output(csv_path);
    manifest.write(out_dir + "/manifest.json");
    return 0;
}

int cmd_demo(const std::string& out_dir, std::uint64_t seed) {
    ensure_out_dir(out_dir);
    ManifestBuilder manifest("demo");
    manifest.add_seed("seed", seed);

    SynthConfig cfg;
    cfg.horizon = 2;
    cfg.dims = {3, 3, 3};
    cfg.action_counts = {2, 2};
    cfg.p_u = 0.5;
    cfg.effect = 1.0;
    cfg.bias = 1.0;
    cfg.noise = 0.25;
    cfg.seed = seed;
    manifest.add_config("synth", cfg.to_json());

    const std::string schema_path = out_dir + "/schema.json";
    save_schema(cfg.schema(), schema_path);
    manifest.add_output(schema_path);

    Dataset all = generate_observational(cfg, 4000, seed);
    auto [holdout, test_data] = split_holdout(all, 0.05, derive_key({seed, 0x5411Dull}));
    save_observational(holdout, out_dir + "/holdout.jsonl");
    save_observational(test_data, out_dir + "/obs.jsonl");
    manifest.add_output(out_dir + "/holdout.jsonl");
    manifest.add_output(out_dir + "/obs.jsonl");

    GeneratorConfig gen;
    gen.bin_plan = {{BinSpec::kOutcomeFeature, BinSpec::Kind::Quantile, 2}};
    gen.outcome_features = {0};
    gen.timesteps = {1, 2};
    manifest.add_config("generator", gen.to_json());

    const GeneratorResult generated = generate_hypotheses(holdout, gen);
    save_hypotheses(generated.hypotheses, out_dir + "/hypotheses.json");
    save_skip_log(generated.skipped, out_dir + "/skip_log.csv");
    manifest.add_output(out_dir + "/hypotheses.json");
    manifest.add_output(out_dir + "/skip_log.csv");

    std::set<std::vector<int>> sequences;
    for (const auto& h : generated.hypotheses) sequences.insert(h.actions);

    // Moderate shift: large enough to falsify, small enough that the twin
    // still lands inside the data-driven regions instead of being gated out.
    const double biased_delta = 0.8;
    for (const char* variant : {"correct", "biased"}) {
        const TwinMode mode = std::string(variant) == "correct" ? TwinMode::correct()
                                                                : TwinMode::biased(biased_delta);
        TwinStore twins;
        for (const auto& actions : sequences) {
            const auto pool = sample_x0_pool(
                test_data, 3000, derive_key({seed, hash_actions(actions), 0xF00Dull}));
            twins.add(generate_twin(cfg, mode, pool, actions,
                                    derive_key({seed, hash_actions(actions), 0xCAFEull})));
        }
        const std::string variant_dir = out_dir + "/" + variant;
        ensure_out_dir(variant_dir);
        for (const auto& [actions, twin] : twins.all()) {
            const std::string path = variant_dir + "/twin_a" + join_actions(actions) + ".jsonl";
            save_twin(twin, path);
            manifest.add_output(path);
        }

        TestOptions opts;
        opts.backend = IntervalBackend::Hoeffding;
        opts.alpha = 0.05;
        opts.seed = seed;
        auto results = run_tests(test_data, twins, generated.hypotheses, opts);
        apply_multiplicity(results, MultiplicityMethod::HolmBonferroni, opts.alpha);
        save_results_csv(results, variant_dir + "/results.csv");
        save_estimates_csv(results, variant_dir + "/estimates.csv");
        save_summary_json(results, variant_dir + "/summary.json");
        save_report(results, variant_dir + "/report.json", variant_dir + "/report.csv");
        for (const char* f : {"results.csv", "estimates.csv", "summary.json", "report.json",
                              "report.csv"}) {
            manifest.add_output(variant_dir + "/" + f);
        }

        std::size_t rejections = 0;
        for (const auto& r : results) {
            if (r.multiplicity_reject) ++rejections;
        }
        std::cout << variant << " twin: " << results.size() << " hypotheses, " << rejections
                  << " Holm rejections\n";
    }
    manifest.write(out_dir + "/manifest.json");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Falsification of digital twins from observational trajectories via "
                 "longitudinal causal bounds"};
    app.require_subcommand(1);

    // synth
    std::string synth_config, synth_out, synth_twin_actions;
    std::string synth_twin_mode = "correct";
    std::size_t synth_n = 1000, synth_twin_n = 0;
    std::uint64_t synth_seed = 0;
    auto* synth = app.add_subcommand("synth", "generate synthetic observational (and twin) data");
    synth->add_option("--config", synth_config, "synth config JSON")->required();
    synth->add_option("--out-dir", synth_out, "output directory")->required();
    synth->add_option("--n", synth_n, "number of observational trajectories");
    auto* synth_seed_opt = synth->add_option("--seed", synth_seed, "override the config seed");
    synth->add_option("--twin-n", synth_twin_n, "also emit a twin dataset of this size");
    synth->add_option("--twin-actions", synth_twin_actions, "twin action sequence, e.g. 1,1");
    synth->add_option("--twin-mode", synth_twin_mode, "correct | biased:<d> | varinf:<k>");

    // gen-hypotheses
    std::string gen_schema, gen_obs, gen_config, gen_out;
    double gen_fraction = 0.0;
    std::uint64_t gen_split_seed = 1;
    auto* gen = app.add_subcommand("gen-hypotheses", "derive hypotheses from a holdout dataset");
    gen->add_option("--schema", gen_schema, "schema JSON")->required();
    gen->add_option("--obs", gen_obs, "holdout JSONL (or full data with --holdout-fraction)")
        ->required();
    gen->add_option("--config", gen_config, "generator config JSON")->required();
    gen->add_option("--holdout-fraction", gen_fraction,
                    "split off this fraction first and generate from it");
    gen->add_option("--split-seed", gen_split_seed, "seed for the holdout split");
    gen->add_option("--out-dir", gen_out, "output directory")->required();

    // test
    TestInputs test_in;
    auto* test = app.add_subcommand("test", "run the falsification tests");
    add_test_inputs(test, test_in);

    // sensitivity
    TestInputs sens_in;
    std::string sens_deltas;
    auto* sens = app.add_subcommand("sensitivity", "rerun the tests over rescaled clip intervals");
    add_test_inputs(sens, sens_in);
    sens->add_option("--deltas", sens_deltas, "comma-separated interval rescaling deltas")
        ->required();

    // report
    std::string report_results, report_out;
    auto* report = app.add_subcommand("report", "per-outcome tables from a results CSV");
    report->add_option("--results", report_results, "results.csv from `test`")->required();
    report->add_option("--out-dir", report_out, "output directory")->required();

    // demo
    std::string demo_out;
    std::uint64_t demo_seed = 7;
    auto* demo = app.add_subcommand("demo", "synth -> gen-hypotheses -> test -> report walkthrough");
    demo->add_option("--out-dir", demo_out, "output directory")->required();
    demo->add_option("--seed", demo_seed, "master seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            return cmd_synth(synth_config, synth_out, synth_n, synth_seed,
                             synth_seed_opt->count() > 0, synth_twin_n, synth_twin_actions,
                             synth_twin_mode);
        }
        if (gen->parsed()) {
            return cmd_gen_hypotheses(gen_schema, gen_obs, gen_config, gen_fraction, gen_split_seed,
                                      gen_out);
        }
        if (test->parsed()) return cmd_test(test_in);
        if (sens->parsed()) return cmd_sensitivity(sens_in, sens_deltas);
        if (report->parsed()) return cmd_report(report_results, report_out);
        if (demo->parsed()) return cmd_demo(demo_out, demo_seed);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ProtocolError& e) {
        std::cerr << "protocol error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
