// loadfc command-line entry point.
//
// Exit codes: 0 success, 1 validation error (bad config, bad input, stale artifacts), 2 runtime failure.

#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "loadfc/pipeline.hpp"
#include "loadfc/synthetic.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

int run(CLI::App& app, int argc, char** argv) {
    std::string config_path;
    std::string models;

    auto add_config = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "Pipeline config (JSON)")->required()->check(CLI::ExistingFile);
    };
    auto* ingest = app.add_subcommand("ingest", "Resample the meter CSV to an hourly cache and report gaps");
    add_config(ingest);
    auto* impute = app.add_subcommand("impute-eval", "Masked-month trial of the linear and seasonal imputers");
    add_config(impute);
    auto* train = app.add_subcommand("train", "Fit every enabled model on the training split");
    add_config(train);
    train->add_option("--models", models, "Comma-separated subset of the roster");
    auto* evaluate = app.add_subcommand("evaluate", "Score trained models on the test split");
    add_config(evaluate);
    auto* report = app.add_subcommand("report", "Print the evaluation report");
    add_config(report);

    loadfc::RegimeSwitchingConfig synth_cfg;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "Write a synthetic regime-switching meter CSV");
    synth->add_option("--out", synth_out, "Output CSV path")->required();
    synth->add_option("--days", synth_cfg.days, "Length in days")->capture_default_str();
    synth->add_option("--seed", synth_cfg.seed, "RNG seed")->capture_default_str();
    synth->add_option("--readings-per-hour", synth_cfg.readings_per_hour)->capture_default_str();
    synth->add_option("--gap-start-day", synth_cfg.gap_start_day, "First day of a simulated outage");
    synth->add_option("--gap-days", synth_cfg.gap_days, "Outage length in days (0 = none)");
    app.require_subcommand(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (synth->parsed()) {
            loadfc::write_meter_csv(synth_out, loadfc::regime_switching_raw(synth_cfg));
            std::cout << "wrote " << synth_out << '\n';
            return 0;
        }
        const loadfc::PipelineConfig config = loadfc::load_config(config_path);
        if (ingest->parsed()) {
            const auto r = loadfc::cmd_ingest(config);
            std::cout << "hours: " << r.hours << "\nstructural gaps: " << r.gaps.gaps.size()
                      << "\nfingerprint: " << r.fingerprint << (r.rewritten ? "" : " (unchanged, cache kept)") << '\n';
        } else if (impute->parsed()) {
            const auto r = loadfc::cmd_impute_eval(config);
            for (const auto& s : r.trial.method_results) {
                std::cout << loadfc::to_string(s.method) << ": rmse " << s.rmse << ", distribution distance "
                          << s.distribution_distance << '\n';
            }
            std::cout << "chosen: " << loadfc::to_string(r.chosen) << '\n';
        } else if (train->parsed()) {
            const auto outcomes = loadfc::cmd_train(config, split_list(models));
            bool all_ok = true;
            for (const auto& o : outcomes) {
                std::cout << o.model << ": " << (o.ok ? "ok" : "FAILED: " + o.error) << '\n';
                all_ok = all_ok && o.ok;
            }
            if (!all_ok) return kExitRuntime;
        } else if (evaluate->parsed()) {
            std::cout << loadfc::report_to_text(loadfc::cmd_evaluate(config));
        } else if (report->parsed()) {
            std::cout << loadfc::cmd_report(config);
        }
        return 0;
    } catch (const loadfc::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const loadfc::IngestError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Probabilistic household load forecasting"};
    return run(app, argc, argv);
}
