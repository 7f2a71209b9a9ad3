#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "twinfal/trajectory.hpp"

namespace twinfal {

// Newline-delimited JSON over the child's stdin/stdout.
//
//   child -> handshake   {"protocol":"twinproto/1","dims":[d_1,...]}
//   parent -> request    {"id":0,"x0":[...],"actions":[...],"seed":123}
//   child -> response    {"id":0,"states":[[...],...]}
//   child -> error       {"id":0,"error":"..."}
//
// Responses may arrive out of order; pairing is by id. Per-request seeds are
// wire_seed(master_seed, id), so an external twin can honour reproducibility
// without sharing RNG state with the host.
inline constexpr const char* kProtocolName = "twinproto/1";

struct ExternalTwinOptions {
    std::vector<std::string> command;  // argv, first element is the executable
    int pipeline_window = 32;          // max requests in flight
    int timeout_ms = 30000;            // max wait for any child output while requests pend
};

// Issues n requests with distinct x0 values (caller guarantees the pool is
// drawn without replacement) and derived seeds, validates every response
// against the schema, and returns the trajectories in request order.
TwinDataset run_external_twin(const ExternalTwinOptions& opts, const SchemaSpec& schema,
                              const std::vector<std::vector<double>>& x0_pool,
                              const std::vector<int>& actions, std::size_t n,
                              std::uint64_t master_seed);

}  // namespace twinfal
