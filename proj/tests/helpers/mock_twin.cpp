// Misbehaving protocol child for twinproto tests: echoes deterministic states
// unless told to corrupt, reorder, duplicate or hang.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

using nlohmann::json;

int main(int argc, char** argv) {
    int dim = 1;
    int shuffle_window = 1;    // > 1: respond to buffered requests in reverse
    long long hang_after = -1;  // respond to this many requests, then block
    long long wrong_states_id = -1;
    long long duplicate_id = -1;
    long long unknown_id_for = -1;  // respond to this request with a bogus id
    long long error_id = -1;
    bool bad_handshake = false;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        auto next = [&] { return std::stoll(argv[++i]); };
        if (arg == "--dim") dim = static_cast<int>(next());
        else if (arg == "--shuffle-window") shuffle_window = static_cast<int>(next());
        else if (arg == "--hang-after") hang_after = next();
        else if (arg == "--wrong-states-id") wrong_states_id = next();
        else if (arg == "--duplicate-id") duplicate_id = next();
        else if (arg == "--unknown-id-for") unknown_id_for = next();
        else if (arg == "--error-id") error_id = next();
        else if (arg == "--bad-handshake") bad_handshake = true;
    }

    if (bad_handshake) {
        std::cout << "{\"protocol\":\"bogus/9\"}\n" << std::flush;
    } else {
        json handshake;
        handshake["protocol"] = "twinproto/1";
        handshake["dims"] = std::vector<int>(8, dim);
        std::cout << handshake.dump() << "\n" << std::flush;
    }

    auto respond = [&](const json& req) {
        const long long id = req.at("id").get<long long>();
        const auto actions = req.at("actions").get<std::vector<int>>();
        const auto x0 = req.at("x0").get<std::vector<double>>();
        if (id == error_id) {
            std::cout << json{{"id", id}, {"error", "mock failure"}}.dump() << "\n" << std::flush;
            return;
        }
        json states = json::array();
        const std::size_t n_states =
            id == wrong_states_id ? actions.size() + 1 : actions.size();
        for (std::size_t s = 0; s < n_states; ++s) {
            std::vector<double> state(dim);
            for (int j = 0; j < dim; ++j) {
                state[j] = x0[0] + static_cast<double>(id) + static_cast<double>(s + 1) * 0.5 + j;
            }
            states.push_back(state);
        }
        json resp;
        resp["id"] = id == unknown_id_for ? id + 1000000 : id;
        resp["states"] = states;
        std::cout << resp.dump() << "\n" << std::flush;
        if (id == duplicate_id) std::cout << resp.dump() << "\n" << std::flush;
    };

    std::vector<json> pending;
    long long handled = 0;
    std::string line;
    while (std::getline(std::cin, line)) {
        if (line.empty()) continue;
        if (hang_after >= 0 && handled >= hang_after) {
            // Swallow input forever without responding.
            while (std::getline(std::cin, line)) {
            }
            break;
        }
        pending.push_back(json::parse(line));
        ++handled;
        if (static_cast<int>(pending.size()) >= shuffle_window) {
            for (auto it = pending.rbegin(); it != pending.rend(); ++it) respond(*it);
            pending.clear();
        }
    }
    for (auto it = pending.rbegin(); it != pending.rend(); ++it) respond(*it);
    return 0;
}
