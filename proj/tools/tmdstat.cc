// Copyright 2026 The tmdstat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: simulate, calibrate, reconstruct, metrics, fit, replicate.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "tmd/error.h"
#include "tmd/pipeline.h"

namespace {

int exit_code(tmd::ErrorCode code) {
    switch (code) {
        case tmd::ErrorCode::kConfig:
        case tmd::ErrorCode::kDomain:
            return 2;
        case tmd::ErrorCode::kData:
            return 3;
        default:
            return 4;
    }
}

void report_error(std::string_view code, std::string_view message) {
    tmd::Json err;
    err["error"] = code;
    err["message"] = message;
    std::cerr << err.dump() << "\n";
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Photon statistics of twin beams from time-multiplexed detector clicks."};
    app.require_subcommand(1);

    tmd::CommandOptions options;
    std::string config_path;
    std::string input_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    std::uint64_t shots = 0;

    auto add_common = [&](CLI::App *cmd) {
        cmd->add_option("--config", config_path, "JSON run configuration");
        cmd->add_option("--input", input_path, "shot CSV or distribution JSON to analyze");
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--seed", seed, "RNG seed (overrides config)");
        cmd->add_option("--shots", shots, "number of shots (overrides config)")->check(CLI::PositiveNumber);
        cmd->add_flag("--constrained", options.constrained, "non-negative reconstruction");
        cmd->add_option("--workers", options.workers, "simulation threads (0 = all cores)");
    };

    std::string setup_name;
    for (const char *name : {"simulate", "calibrate", "reconstruct", "metrics", "fit"}) {
        add_common(app.add_subcommand(name));
    }
    CLI::App *rep = app.add_subcommand("replicate", "reproduce setup A, B, C or D");
    rep->add_option("setup", setup_name, "A, B, C or D")->required();
    add_common(rep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);
        }
        report_error("config_error", e.what());
        return 2;
    }

    try {
        CLI::App *cmd = app.get_subcommands().front();
        if (!config_path.empty()) {
            options.config = config_path;
        }
        if (!input_path.empty()) {
            options.input = input_path;
        }
        if (cmd->count("--seed") > 0) {
            options.seed = seed;
        }
        if (cmd->count("--shots") > 0) {
            options.shots = shots;
        }
        options.out = out_dir;
        std::optional<tmd::Setup> target;
        if (cmd == rep) {
            target = tmd::setup_from_string(setup_name);
        }
        tmd::Json summary = tmd::run_command(cmd->get_name(), target, options);
        std::cout << tmd::dump(summary);
    } catch (const tmd::Error &e) {
        report_error(tmd::to_string(e.code()), e.message());
        return exit_code(e.code());
    } catch (const std::exception &e) {
        report_error("internal_error", e.what());
        return 1;
    }
    return 0;
}
