#include "twinfal/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "twinfal/numeric.hpp"
#include "twinfal/rng.hpp"

namespace twinfal {

using nlohmann::json;

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw ValidationError(msg);
}

std::string at_line(std::size_t line_no, const std::string& msg) {
    return "line " + std::to_string(line_no) + ": " + msg;
}

std::vector<double> parse_vector(const json& j, std::size_t line_no, const std::string& field,
                                 std::size_t expected_dim) {
    require(j.is_array(), at_line(line_no, "field '" + field + "' must be an array"));
    require(j.size() == expected_dim,
            at_line(line_no, "field '" + field + "' has dimension " + std::to_string(j.size()) +
                                 ", expected " + std::to_string(expected_dim)));
    std::vector<double> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        require(j[i].is_number(),
                at_line(line_no, "field '" + field + "[" + std::to_string(i) + "]' is not a number"));
        const double v = j[i].get<double>();
        require(std::isfinite(v), at_line(line_no, "field '" + field + "[" + std::to_string(i) +
                                                       "]' is not finite"));
        out.push_back(v);
    }
    return out;
}

int parse_action(const json& j, std::size_t line_no, int step, int cardinality) {
    require(j.is_number_integer(),
            at_line(line_no, "action at step " + std::to_string(step) + " is not an integer"));
    const long long a = j.get<long long>();
    require(a >= 0 && a < cardinality,
            at_line(line_no, "action id out of range at step " + std::to_string(step) + ": " +
                                 std::to_string(a) + " (valid ids 0.." +
                                 std::to_string(cardinality - 1) + ")"));
    return static_cast<int>(a);
}

void append_vector(std::string& out, const std::vector<double>& v) {
    out += '[';
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_double(v[i]);
    }
    out += ']';
}

}  // namespace

void SchemaSpec::validate() const {
    require(horizon >= 1, "schema: T must be >= 1");
    require(static_cast<int>(dims.size()) == horizon + 1,
            "schema: dims must have length T+1 = " + std::to_string(horizon + 1));
    require(static_cast<int>(action_cardinalities.size()) == horizon,
            "schema: action_cardinalities must have length T = " + std::to_string(horizon));
    for (int d : dims) require(d >= 1, "schema: every dimension must be >= 1");
    for (int c : action_cardinalities) require(c >= 1, "schema: every action cardinality must be >= 1");
    if (!feature_names.empty()) {
        require(static_cast<int>(feature_names.size()) == horizon + 1,
                "schema: feature_names must have length T+1 when present");
        for (int t = 0; t <= horizon; ++t) {
            require(static_cast<int>(feature_names[t].size()) == dims[t],
                    "schema: feature_names[" + std::to_string(t) + "] must have length " +
                        std::to_string(dims[t]));
        }
    }
}

std::string SchemaSpec::to_json() const {
    json j;
    j["T"] = horizon;
    j["dims"] = dims;
    j["action_cardinalities"] = action_cardinalities;
    if (feature_names.empty()) {
        j["feature_names"] = nullptr;
    } else {
        j["feature_names"] = feature_names;
    }
    return j.dump();
}

SchemaSpec SchemaSpec::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("schema: invalid JSON: ") + e.what());
    }
    SchemaSpec s;
    try {
        s.horizon = j.at("T").get<int>();
        s.dims = j.at("dims").get<std::vector<int>>();
        s.action_cardinalities = j.at("action_cardinalities").get<std::vector<int>>();
        if (j.contains("feature_names") && !j["feature_names"].is_null()) {
            s.feature_names = j["feature_names"].get<std::vector<std::vector<std::string>>>();
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("schema: ") + e.what());
    }
    s.validate();
    return s;
}

SchemaSpec load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open schema file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return SchemaSpec::from_json(buf.str());
}

void save_schema(const SchemaSpec& schema, const std::string& path) {
    schema.validate();
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write schema file: " + path);
    out << schema.to_json() << '\n';
}

Dataset load_observational(const std::string& path, const SchemaSpec& schema) {
    schema.validate();
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open observational file: " + path);

    Dataset data;
    data.schema = schema;
    data.provenance.source = path;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ValidationError(at_line(line_no, std::string("malformed record: ") + e.what()));
        }
        ObservedTrajectory rec;
        require(j.contains("x0"), at_line(line_no, "missing field 'x0'"));
        rec.x0 = parse_vector(j["x0"], line_no, "x0", static_cast<std::size_t>(schema.dims[0]));
        require(j.contains("steps") && j["steps"].is_array(),
                at_line(line_no, "missing or non-array field 'steps'"));
        require(static_cast<int>(j["steps"].size()) == schema.horizon,
                at_line(line_no, "expected " + std::to_string(schema.horizon) + " steps, got " +
                                     std::to_string(j["steps"].size())));
        for (int t = 1; t <= schema.horizon; ++t) {
            const json& js = j["steps"][t - 1];
            require(js.is_object() && js.contains("a") && js.contains("x"),
                    at_line(line_no, "step " + std::to_string(t) + " must be {\"a\":...,\"x\":...}"));
            ObservedTrajectory::Step step;
            step.action = parse_action(js["a"], line_no, t, schema.action_cardinalities[t - 1]);
            step.obs = parse_vector(js["x"], line_no, "steps[" + std::to_string(t - 1) + "].x",
                                    static_cast<std::size_t>(schema.dims[t]));
            rec.steps.push_back(std::move(step));
        }
        data.records.push_back(std::move(rec));
    }
    return data;
}

TwinDataset load_twin(const std::string& path, const SchemaSpec& schema,
                      const std::vector<int>& expected_actions) {
    schema.validate();
    require(static_cast<int>(expected_actions.size()) <= schema.horizon,
            "expected action sequence longer than the schema horizon");
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open twin file: " + path);

    TwinDataset data;
    data.schema = schema;
    data.actions = expected_actions;
    data.provenance.source = path;

    std::string line;
    std::size_t line_no = 0;
    std::size_t record_idx = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ValidationError(at_line(line_no, std::string("malformed record: ") + e.what()));
        }
        TwinTrajectory rec;
        require(j.contains("x0"), at_line(line_no, "missing field 'x0'"));
        rec.x0 = parse_vector(j["x0"], line_no, "x0", static_cast<std::size_t>(schema.dims[0]));
        require(j.contains("actions") && j["actions"].is_array(),
                at_line(line_no, "missing or non-array field 'actions'"));
        for (std::size_t s = 0; s < j["actions"].size(); ++s) {
            rec.actions.push_back(parse_action(j["actions"][s], line_no, static_cast<int>(s + 1),
                                               schema.action_cardinalities[s]));
        }
        if (rec.actions != expected_actions) {
            throw ValidationError("record " + std::to_string(record_idx) + " (line " +
                                  std::to_string(line_no) +
                                  "): action sequence does not match the expected sequence");
        }
        require(j.contains("states") && j["states"].is_array(),
                at_line(line_no, "missing or non-array field 'states'"));
        require(j["states"].size() == rec.actions.size(),
                at_line(line_no, "states length " + std::to_string(j["states"].size()) +
                                     " does not match actions length " +
                                     std::to_string(rec.actions.size())));
        for (std::size_t s = 1; s <= j["states"].size(); ++s) {
            rec.states.push_back(parse_vector(j["states"][s - 1], line_no,
                                              "states[" + std::to_string(s - 1) + "]",
                                              static_cast<std::size_t>(schema.dims[s])));
        }
        data.records.push_back(std::move(rec));
        ++record_idx;
    }
    return data;
}

std::string observed_record_to_json(const ObservedTrajectory& rec) {
    std::string out = "{\"x0\":";
    append_vector(out, rec.x0);
    out += ",\"steps\":[";
    for (std::size_t t = 0; t < rec.steps.size(); ++t) {
        if (t) out += ',';
        out += "{\"a\":" + std::to_string(rec.steps[t].action) + ",\"x\":";
        append_vector(out, rec.steps[t].obs);
        out += '}';
    }
    out += "]}";
    return out;
}

std::string twin_record_to_json(const TwinTrajectory& rec) {
    std::string out = "{\"x0\":";
    append_vector(out, rec.x0);
    out += ",\"actions\":[";
    for (std::size_t s = 0; s < rec.actions.size(); ++s) {
        if (s) out += ',';
        out += std::to_string(rec.actions[s]);
    }
    out += "],\"states\":[";
    for (std::size_t s = 0; s < rec.states.size(); ++s) {
        if (s) out += ',';
        append_vector(out, rec.states[s]);
    }
    out += "]}";
    return out;
}

void save_observational(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write observational file: " + path);
    for (const auto& rec : data.records) out << observed_record_to_json(rec) << '\n';
}

void save_twin(const TwinDataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write twin file: " + path);
    for (const auto& rec : data.records) out << twin_record_to_json(rec) << '\n';
}

std::pair<Dataset, Dataset> split_holdout(const Dataset& data, double fraction,
                                          std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw ValidationError("split fraction must lie strictly inside (0, 1)");
    }
    if (data.records.empty()) throw ValidationError("cannot split an empty dataset");

    const std::size_t n = data.records.size();
    const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));

    // Partial Fisher-Yates over the index vector picks k without replacement.
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    CounterRng rng(derive_key({seed, 0x5B117ull}));
    for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
        const std::size_t j = i + rng.next_below(n - i);
        std::swap(idx[i], idx[j]);
    }
    std::vector<bool> in_holdout(n, false);
    for (std::size_t i = 0; i < k; ++i) in_holdout[idx[i]] = true;

    Dataset holdout, rest;
    holdout.schema = rest.schema = data.schema;
    holdout.provenance = rest.provenance = data.provenance;
    holdout.provenance.seed = rest.provenance.seed = seed;
    for (std::size_t i = 0; i < n; ++i) {
        (in_holdout[i] ? holdout : rest).records.push_back(data.records[i]);
    }
    return {std::move(holdout), std::move(rest)};
}

}  // namespace twinfal
