// Built-in synthetic twin exposed through the twinproto/1 wire protocol, so the
// protocol path can be exercised (and falsified) like any external simulator.
//
//   twinfal-synthetic-twin --config synth.json [--mode correct|biased:<d>|varinf:<k>]

#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "twinfal/synth.hpp"
#include "twinfal/twinproto.hpp"

using namespace twinfal;
using nlohmann::json;

int main(int argc, char** argv) {
    CLI::App app{"synthetic twin speaking twinproto/1 on stdin/stdout"};
    std::string config_path;
    std::string mode_text = "correct";
    app.add_option("--config", config_path, "synth config JSON")->required();
    app.add_option("--mode", mode_text, "correct | biased:<d> | varinf:<k>");
    CLI11_PARSE(app, argc, argv);

    SynthConfig cfg;
    TwinMode mode;
    try {
        cfg = load_synth_config(config_path);
        mode = TwinMode::parse(mode_text);
    } catch (const std::exception& e) {
        std::cerr << "twin startup error: " << e.what() << "\n";
        return 2;
    }

    json handshake;
    handshake["protocol"] = kProtocolName;
    handshake["dims"] = std::vector<int>(cfg.dims.begin() + 1, cfg.dims.end());
    std::cout << handshake.dump() << "\n" << std::flush;

    std::string line;
    while (std::getline(std::cin, line)) {
        if (line.empty()) continue;
        json req;
        long long id = -1;
        try {
            req = json::parse(line);
            id = req.at("id").get<long long>();
            const auto x0 = req.at("x0").get<std::vector<double>>();
            const auto actions = req.at("actions").get<std::vector<int>>();
            const auto seed = req.at("seed").get<std::uint64_t>();
            const auto states = simulate_twin_states(cfg, mode, x0, actions, seed);
            json resp;
            resp["id"] = id;
            resp["states"] = states;
            std::cout << resp.dump() << "\n" << std::flush;
        } catch (const std::exception& e) {
            json err;
            err["id"] = id;
            err["error"] = e.what();
            std::cout << err.dump() << "\n" << std::flush;
        }
    }
    return 0;
}
