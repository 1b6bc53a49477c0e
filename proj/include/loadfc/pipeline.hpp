#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "loadfc/boosted.hpp"
#include "loadfc/classical.hpp"
#include "loadfc/imputation.hpp"
#include "loadfc/metrics.hpp"
#include "loadfc/neural.hpp"
#include "loadfc/series.hpp"

namespace loadfc {

/// Bad configuration, inconsistent artifacts, or unusable input. Maps to exit code 1.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline const std::vector<std::string> kModelRoster = {"seasonal_naive", "sarimax", "gbdt", "gbdt_quantile", "lstm"};

/// Row label used in reports.
std::string display_name(const std::string& model);

struct SeasonalNaiveSettings {
    std::size_t period = 24;
};

struct SarimaxSettings {
    SarimaxOrder order{1, 1, 1, 1, 1, 0, 24};
    std::size_t train_hours = 720;
    std::vector<std::string> exog = {"hour", "dayofweek"};
    std::size_t max_iterations = 500;
};

struct GbdtSettings {
    GbdtParams params;
    double val_fraction = 0.1;
};

struct LstmSettings {
    LstmShape shape;  // n_features is derived from the feature set at train time
    TrainConfig train;
    double val_fraction = 0.1;
    /// Same-hour channel inputs; empty means every channel in the cache.
    std::vector<std::string> channels;
};

struct PipelineConfig {
    std::filesystem::path input;
    std::filesystem::path output_dir = "loadfc_out";
    CsvSchema schema;
    std::uint64_t seed = 42;
    double train_fraction = 0.8;
    std::vector<double> quantiles = kDefaultQuantiles;

    std::size_t structural_threshold = 24;
    std::size_t knn_k = 5;
    std::size_t knn_max_gap = 6;
    std::string impute_method = "auto";  // auto | linear | seasonal
    std::vector<std::string> impute_methods = {"linear", "seasonal"};
    std::size_t trial_window_hours = 90 * 24;
    std::size_t trial_min_hours = 28 * 24;

    std::vector<std::size_t> lags = {1, 24, 168};
    std::vector<std::string> calendar = {"hour", "dayofweek", "month", "is_weekend"};

    std::vector<std::string> models;  // enabled, in roster order
    SeasonalNaiveSettings seasonal_naive;
    SarimaxSettings sarimax;
    GbdtSettings gbdt;
    GbdtSettings gbdt_quantile;
    LstmSettings lstm;

    /// Report rows from externally produced forecasts (plot-CSV format), keyed by row label.
    std::map<std::string, std::filesystem::path> external_forecasts;

    bool enabled(const std::string& model) const;
};

/// Parses and validates a config document. Relative paths resolve against `base_dir`.
PipelineConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
/// Reads a JSON config file; LOADFC_OUTPUT_DIR, when set, overrides output_dir.
PipelineConfig load_config(const std::filesystem::path& path);
/// Canonical form with defaults filled in.
nlohmann::json config_to_json(const PipelineConfig& config);
/// Hash of the canonical form without the input path and output directory.
std::string config_hash(const PipelineConfig& config);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);
/// seed + stable hash of the model name.
std::uint64_t derived_seed(std::uint64_t seed, const std::string& model);

// ---------------------------------------------------------------------------
// Data preparation shared by train and evaluate
// ---------------------------------------------------------------------------

/// Drops leading and trailing hours whose aggregate is missing.
HourlySeries trim_to_target(const HourlySeries& series, std::size_t target_channel);

/// Long runs (> max_gap) get `method`, the rest kNN. A linear fill that would touch the
/// series boundary falls back to seasonal.
HourlySeries impute_series(const HourlySeries& series, ImputeMethod method, std::size_t knn_k,
                           std::size_t max_gap);

struct TrainData {
    HourlySeries raw;     // training segment as cached
    HourlySeries filled;  // imputed from the training segment alone
    HourlySeries scaled;
    ScalerParams scaler;
    std::size_t target = 0;
    ImputeMethod method = ImputeMethod::Seasonal;
    std::vector<std::string> dropped_channels;
    std::string fingerprint;  // of the raw training segment
};

struct EvalData {
    std::size_t n_train = 0;
    HourlySeries filled;  // full horizon, test part imputed with the full series
    HourlySeries scaled;
    Channel actual;       // raw test-segment target, missing where unobserved
    std::vector<Timestamp> test_timestamps;
};

/// `cache` is the trimmed hourly series; only rows before the split point are read.
TrainData prepare_train(const PipelineConfig& config, const HourlySeries& cache, ImputeMethod method);
EvalData prepare_eval(const PipelineConfig& config, const HourlySeries& cache, const TrainData& train);

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

/// JSON record of a run. Only the owning command's section is rewritten.
struct RunManifest {
    nlohmann::json doc = nlohmann::json::object();

    static RunManifest load(const std::filesystem::path& output_dir);
    /// Drops artifact references to missing files, recomputes run_hash, writes manifest.json.
    void save(const std::filesystem::path& output_dir);
};

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct IngestResult {
    std::string fingerprint;
    bool rewritten = false;
    std::size_t hours = 0;
    GapReport gaps;
};

struct ImputeEvalResult {
    IndexRange window;  // in hours of the trimmed cache
    ImputationTrial trial;
    ImputeMethod chosen = ImputeMethod::Seasonal;
};

struct ModelOutcome {
    std::string model;
    bool ok = false;
    std::string error;
    std::filesystem::path artifact;
};

IngestResult cmd_ingest(const PipelineConfig& config);
ImputeEvalResult cmd_impute_eval(const PipelineConfig& config);
/// `only` restricts training to a subset of the enabled roster.
std::vector<ModelOutcome> cmd_train(const PipelineConfig& config, const std::vector<std::string>& only = {});
EvalReport cmd_evaluate(const PipelineConfig& config);
/// Renders the stored report as a text table (also written to report.txt).
std::string cmd_report(const PipelineConfig& config);

/// Standard file locations under the output directory.
namespace paths {
std::filesystem::path hourly_cache(const PipelineConfig& c);
std::filesystem::path gap_report(const PipelineConfig& c);
std::filesystem::path trial(const PipelineConfig& c);
std::filesystem::path model_dir(const PipelineConfig& c);
std::filesystem::path artifact(const PipelineConfig& c, const std::string& model);
std::filesystem::path report_csv(const PipelineConfig& c);
std::filesystem::path report_txt(const PipelineConfig& c);
std::filesystem::path plot(const PipelineConfig& c, const std::string& label);
}  // namespace paths

}  // namespace loadfc
