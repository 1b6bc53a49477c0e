#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "loadfc/pipeline.hpp"
#include "loadfc/synthetic.hpp"
#include "test_util.hpp"

namespace testutil {

/// Small, fast model settings: every roster entry enabled.
inline nlohmann::json small_models() {
    return {
        {"seasonal_naive", {{"period", 24}}},
        {"sarimax", {{"train_hours", 240}, {"max_iterations", 60}}},
        {"gbdt", {{"n_estimators", 60}, {"learning_rate", 0.1}, {"max_depth", 4}}},
        {"gbdt_quantile", {{"n_estimators", 40}, {"learning_rate", 0.1}, {"max_depth", 3}}},
        {"lstm",
         {{"hidden1", 6}, {"hidden2", 4}, {"window", 12}, {"max_epochs", 2}, {"patience", 2}, {"batch_size", 64},
          {"learning_rate", 0.01}, {"channels", nlohmann::json::array({"Appliance1"})}}},
    };
}

/// Writes data.csv and config.json into `dir`; returns the config path.
inline std::filesystem::path write_project(const std::filesystem::path& dir, const loadfc::RawSeries& raw,
                                           nlohmann::json models = small_models(),
                                           nlohmann::json extra = nlohmann::json::object()) {
    std::filesystem::create_directories(dir);
    loadfc::CsvSchema schema;
    schema.appliance_columns.clear();
    for (std::size_t c = 1; c < raw.channel_names.size(); ++c) schema.appliance_columns.push_back(raw.channel_names[c]);
    loadfc::write_meter_csv(dir / "data.csv", raw, schema);
    nlohmann::json cfg = {
        {"input", "data.csv"},
        {"output_dir", "out"},
        {"seed", 7},
        {"schema", {{"timestamp", "Unix"}, {"aggregate", "Aggregate"}, {"appliances", schema.appliance_columns}}},
        {"impute", {{"trial_min_hours", 336}}},
        {"models", std::move(models)},
    };
    for (const auto& [k, v] : extra.items()) cfg[k] = v;
    write_file(dir / "config.json", cfg.dump(2));
    return dir / "config.json";
}

/// Nine weeks of two-channel regime-switching data, hourly readings.
inline loadfc::RegimeSwitchingConfig small_regime(std::size_t days = 63) {
    loadfc::RegimeSwitchingConfig rc;
    rc.days = days;
    rc.readings_per_hour = 2;
    rc.appliances = 2;
    return rc;
}

}  // namespace testutil
