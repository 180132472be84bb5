#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "uoda/experiment.hpp"
#include "uoda/svg.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitDiverged = 4;

std::vector<double> parse_values(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stod(tok));
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semi-supervised domain adaptation experiment runner"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run_cmd = app.add_subcommand("run", "Run one experiment from a config or manifest file");
    run_cmd->add_option("config", config_path, "config (.ini) or manifest (.json) file")
        ->required();

    std::string sweep_config, sweep_param, sweep_values;
    auto* sweep_cmd = app.add_subcommand("sweep", "Run one experiment per parameter value");
    sweep_cmd->add_option("config", sweep_config, "base config file")->required();
    sweep_cmd->add_option("--param", sweep_param, "alpha | beta | lambda | k_shot")->required();
    sweep_cmd->add_option("--values", sweep_values, "comma-separated values")->required();

    std::string snapshot_path, svg_path;
    auto* plot_cmd = app.add_subcommand("plot", "Render a feature snapshot CSV as an SVG scatter");
    plot_cmd->add_option("snapshot", snapshot_path, "snapshot CSV")->required();
    plot_cmd->add_option("out", svg_path, "output SVG path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (run_cmd->parsed()) {
            if (!std::filesystem::exists(config_path)) {
                std::cerr << "error: no such config file: " << config_path << "\n";
                return kExitUsage;
            }
            uoda::ExperimentConfig config = uoda::load_run_input(config_path);
            uoda::RunOutputs outputs = uoda::run_experiment(config, &std::cout);
            std::cout << "wrote " << outputs.metrics_csv << "\n";
            std::cout << "final target_test_accuracy "
                      << outputs.final_metrics.target_test_accuracy << "\n";
            return kExitOk;
        }
        if (sweep_cmd->parsed()) {
            if (!std::filesystem::exists(sweep_config)) {
                std::cerr << "error: no such config file: " << sweep_config << "\n";
                return kExitUsage;
            }
            uoda::ExperimentConfig base = uoda::load_run_input(sweep_config);
            std::vector<double> values = parse_values(sweep_values);
            uoda::SweepResult result = uoda::sweep(base, sweep_param, values, &std::cout);
            std::cout << "wrote " << result.summary_csv << "\n";
            for (const uoda::SweepCell& cell : result.cells) {
                std::cout << sweep_param << "=" << cell.value << " ";
                if (cell.failed) {
                    std::cout << "FAILED: " << cell.error << "\n";
                } else {
                    std::cout << "unlabeled_acc=" << cell.final_metrics.unlabeled_accuracy << "\n";
                }
            }
            return kExitOk;
        }
        if (plot_cmd->parsed()) {
            if (!std::filesystem::exists(snapshot_path)) {
                std::cerr << "error: no such snapshot file: " << snapshot_path << "\n";
                return kExitUsage;
            }
            uoda::FeatureSnapshot snapshot = uoda::read_snapshot_csv(snapshot_path);
            uoda::emit_scatter_svg(snapshot, svg_path);
            std::cout << "wrote " << svg_path << "\n";
            return kExitOk;
        }
    } catch (const uoda::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const uoda::TrainingDiverged& e) {
        std::cerr << "training aborted: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitUsage;
}
