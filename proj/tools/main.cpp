// Copyright 2026 The cessm Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cessm/app/config.hpp"
#include "cessm/app/pipeline.hpp"
#include "cessm/errors.hpp"
#include "cessm/io/container.hpp"

namespace {

constexpr int kUsage = 1;
constexpr int kFailure = 2;

struct Invocation {
    std::string config_path;
    std::string out;
    std::vector<std::string> overrides;
    std::optional<double> lambda;
    std::string model = "native";
    bool quiet = false;
};

std::string default_root() {
    if (const char* env = std::getenv("CESSM_OUT"); env && *env) return env;
    return "cessm-out";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cause-aware latent state-space models for excitable-media reconstruction"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    Invocation inv;
    inv.out = default_root();
    app.add_option("-c,--config", inv.config_path, "Run configuration file (key = value)")->check(CLI::ExistingFile);
    app.add_option("-o,--out", inv.out, "Output root (default: $CESSM_OUT or ./cessm-out)");
    app.add_option("-s,--set", inv.overrides, "Override one configuration key, key=value (repeatable)")
        ->allow_extra_args(false);
    app.add_flag("-q,--quiet", inv.quiet, "Do not mirror log lines to stdout");

    auto describe = [](const std::string& name) -> std::string {
        if (name == "simulate") return "Generate native and intervention datasets and the forward operator";
        if (name == "lr-find") return "Learning-rate range test for one model";
        if (name == "train-native") return "Stage 1: train the native ODE-VAE";
        if (name == "train-intv") return "Stage 2: train the intervention model on a frozen native model";
        if (name == "train-gru-ablation") return "Train the GRU-update ablation baseline";
        if (name == "ecgi") return "Select the Tikhonov regularisation weight";
        if (name == "eval") return "Localisation report on held-out intervention episodes";
        if (name == "render") return "Write reconstruction panels as PGM images";
        return "Latent-norm curves around foci onset";
    };

    std::vector<std::pair<std::string, CLI::App*>> subs;
    for (const auto& name : cessm::app::stage_names()) {
        auto* sub = app.add_subcommand(name, describe(name));
        if (name == "ecgi" || name == "eval" || name == "render") {
            sub->add_option("--lambda", inv.lambda, "Tikhonov weight (skips the validation sweep)")
                ->check(CLI::PositiveNumber);
        }
        if (name == "lr-find") {
            sub->add_option("--model", inv.model, "native, intv or gru")
                ->check(CLI::IsMember({"native", "intv", "gru"}));
        }
        subs.emplace_back(name, sub);
    }
    auto* all = app.add_subcommand("pipeline", "simulate, train-native, train-intv, train-gru-ablation, ecgi, eval");
    all->add_option("--lambda", inv.lambda, "Tikhonov weight")->check(CLI::PositiveNumber);
    auto* show = app.add_subcommand("show-config", "Print the effective configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kUsage;
    }

    cessm::app::RunConfig config;
    try {
        if (!inv.config_path.empty()) config = cessm::app::parse_config(cessm::io::read_bytes(inv.config_path));
        for (const auto& o : inv.overrides) cessm::app::apply_override(config, o);
        config.validate();
    } catch (const cessm::Error& e) {
        std::cerr << "cessm: configuration: " << e.what() << '\n';
        return kUsage;
    }

    cessm::app::StageOptions options;
    options.lambda = inv.lambda;
    options.lr_model = inv.model;
    options.echo = inv.quiet ? nullptr : &std::cout;

    try {
        if (show->parsed()) {
            std::cout << cessm::app::serialize(config);
            return 0;
        }
        if (all->parsed()) {
            cessm::app::run_pipeline(config, inv.out, options);
            return 0;
        }
        for (const auto& [name, sub] : subs) {
            if (sub->parsed()) {
                cessm::app::run_stage(name, config, inv.out, options);
                return 0;
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "cessm: " << e.what() << '\n';
        return kFailure;
    }
    return kUsage;
}
