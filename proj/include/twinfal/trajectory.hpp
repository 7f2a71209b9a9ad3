#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "twinfal/error.hpp"

namespace twinfal {

// Shape of one longitudinal dataset: a fixed horizon T, per-timestep
// observation dimensions d_0..d_T and finite action-set sizes |A_1|..|A_T|.
struct SchemaSpec {
    int horizon = 0;                                    // T >= 1
    std::vector<int> dims;                              // size T+1
    std::vector<int> action_cardinalities;              // size T
    std::vector<std::vector<std::string>> feature_names;  // empty, or size T+1 with names per dim

    void validate() const;  // throws ValidationError

    std::string to_json() const;
    static SchemaSpec from_json(const std::string& text);
};

SchemaSpec load_schema(const std::string& path);
void save_schema(const SchemaSpec& schema, const std::string& path);

// One real-world episode: x0, then T (action, observation) steps.
struct ObservedTrajectory {
    struct Step {
        int action = 0;
        std::vector<double> obs;
    };
    std::vector<double> x0;
    std::vector<Step> steps;
};

// One simulator episode under a fixed action sequence (length t <= T).
struct TwinTrajectory {
    std::vector<double> x0;
    std::vector<int> actions;
    std::vector<std::vector<double>> states;
};

struct Provenance {
    std::string source;
    std::uint64_t seed = 0;
};

struct Dataset {
    SchemaSpec schema;
    std::vector<ObservedTrajectory> records;
    Provenance provenance;

    std::size_t size() const { return records.size(); }
};

struct TwinDataset {
    SchemaSpec schema;
    std::vector<int> actions;  // shared by every record
    std::vector<TwinTrajectory> records;
    Provenance provenance;

    std::size_t size() const { return records.size(); }
};

// JSONL ingestion. Errors carry the 1-based line number (and record index for
// twin action mismatches). Record order is preserved.
Dataset load_observational(const std::string& path, const SchemaSpec& schema);
TwinDataset load_twin(const std::string& path, const SchemaSpec& schema,
                      const std::vector<int>& expected_actions);

// Writers emit one record per line with doubles at 17 significant digits, so
// load(save(d)) == d bit-exactly.
void save_observational(const Dataset& data, const std::string& path);
void save_twin(const TwinDataset& data, const std::string& path);

std::string observed_record_to_json(const ObservedTrajectory& rec);
std::string twin_record_to_json(const TwinTrajectory& rec);

// Seeded partition into (holdout, rest): holdout gets round(fraction * N)
// records chosen uniformly without replacement; both halves keep the input
// record order. Deterministic given seed.
std::pair<Dataset, Dataset> split_holdout(const Dataset& data, double fraction, std::uint64_t seed);

}  // namespace twinfal
