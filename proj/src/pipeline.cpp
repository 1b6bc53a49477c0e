#include "loadfc/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <future>
#include <set>
#include <sstream>

#include "loadfc/calendar.hpp"
#include "loadfc/features.hpp"
#include "csv_util.hpp"

namespace loadfc {

using nlohmann::json;
namespace fs = std::filesystem;

std::string display_name(const std::string& model) {
    if (model == "seasonal_naive") return "Seasonal Naive";
    if (model == "sarimax") return "SARIMAX";
    if (model == "gbdt") return "GBDT";
    if (model == "gbdt_quantile") return "GBDT Quantile";
    if (model == "lstm") return "LSTM";
    return model;
}

bool PipelineConfig::enabled(const std::string& model) const {
    return std::find(models.begin(), models.end(), model) != models.end();
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
    std::uint64_t h = basis;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t derived_seed(std::uint64_t seed, const std::string& model) { return seed + fnv1a64(model); }

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

namespace {

/// Strict reader: every key must be consumed, types are checked.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ValidationError(where_ + ": expected a JSON object");
    }

    const json* find(const std::string& key) {
        auto it = j_.find(key);
        if (it == j_.end()) return nullptr;
        seen_.insert(key);
        return &*it;
    }

    void count(const std::string& key, std::size_t& out) {
        if (const json* v = find(key)) out = as_count(*v, key);
    }
    void number(const std::string& key, double& out) {
        if (const json* v = find(key)) {
            if (!v->is_number()) fail(key, "expected a number");
            out = v->get<double>();
        }
    }
    void boolean(const std::string& key, bool& out) {
        if (const json* v = find(key)) {
            if (!v->is_boolean()) fail(key, "expected true or false");
            out = v->get<bool>();
        }
    }
    void string(const std::string& key, std::string& out) {
        if (const json* v = find(key)) {
            if (!v->is_string()) fail(key, "expected a string");
            out = v->get<std::string>();
        }
    }
    void strings(const std::string& key, std::vector<std::string>& out) {
        if (const json* v = find(key)) {
            if (!v->is_array()) fail(key, "expected an array of strings");
            out.clear();
            for (const auto& e : *v) {
                if (!e.is_string()) fail(key, "expected an array of strings");
                out.push_back(e.get<std::string>());
            }
        }
    }
    void counts(const std::string& key, std::vector<std::size_t>& out) {
        if (const json* v = find(key)) {
            if (!v->is_array()) fail(key, "expected an array of non-negative integers");
            out.clear();
            for (const auto& e : *v) out.push_back(as_count(e, key));
        }
    }
    void numbers(const std::string& key, std::vector<double>& out) {
        if (const json* v = find(key)) {
            if (!v->is_array()) fail(key, "expected an array of numbers");
            out.clear();
            for (const auto& e : *v) {
                if (!e.is_number()) fail(key, "expected an array of numbers");
                out.push_back(e.get<double>());
            }
        }
    }

    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.count(k)) throw ValidationError(where_ + ": unknown key '" + k + "'");
        }
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw ValidationError(where_ + "." + key + ": " + what);
    }

private:
    std::size_t as_count(const json& v, const std::string& key) const {
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0) fail(key, "expected a non-negative integer");
        return v.get<std::size_t>();
    }

    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& message) {
    if (!ok) throw ValidationError(message);
}

void read_gbdt(ObjectReader& r, GbdtSettings& s) {
    r.count("n_estimators", s.params.n_estimators);
    r.number("learning_rate", s.params.learning_rate);
    r.count("max_depth", s.params.tree.max_depth);
    r.count("min_samples_leaf", s.params.tree.min_samples_leaf);
    r.count("early_stopping_rounds", s.params.early_stopping_rounds);
    r.number("val_fraction", s.val_fraction);
}

void check_gbdt(const GbdtSettings& s, const std::string& name) {
    require(s.params.n_estimators >= 1, name + ": n_estimators must be >= 1");
    require(s.params.learning_rate > 0.0, name + ": learning_rate must be > 0");
    require(s.params.tree.max_depth >= 1, name + ": max_depth must be >= 1");
    require(s.params.tree.min_samples_leaf >= 1, name + ": min_samples_leaf must be >= 1");
    require(s.val_fraction > 0.0 && s.val_fraction < 1.0, name + ": val_fraction must be in (0, 1)");
}

json gbdt_settings_json(const GbdtSettings& s) {
    return {{"n_estimators", s.params.n_estimators},
            {"learning_rate", s.params.learning_rate},
            {"max_depth", s.params.tree.max_depth},
            {"min_samples_leaf", s.params.tree.min_samples_leaf},
            {"early_stopping_rounds", s.params.early_stopping_rounds},
            {"val_fraction", s.val_fraction}};
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    if (path.is_relative() && !base.empty()) path = base / path;
    return path.lexically_normal();
}

}  // namespace

PipelineConfig parse_config(const json& doc, const fs::path& base_dir) {
    PipelineConfig c;
    ObjectReader top(doc, "config");

    std::string input, output;
    top.string("input", input);
    require(!input.empty(), "config: 'input' is required");
    c.input = resolve(base_dir, input);
    top.string("output_dir", output);
    if (!output.empty()) c.output_dir = resolve(base_dir, output);
    else c.output_dir = resolve(base_dir, c.output_dir.string());

    if (const json* v = top.find("seed")) {
        require(v->is_number_integer() && v->get<std::int64_t>() >= 0, "config.seed: expected a non-negative integer");
        c.seed = v->get<std::uint64_t>();
    }

    if (const json* v = top.find("schema")) {
        ObjectReader r(*v, "schema");
        r.string("timestamp", c.schema.timestamp_column);
        r.string("aggregate", c.schema.aggregate_column);
        r.strings("appliances", c.schema.appliance_columns);
        r.finish();
    }
    if (const json* v = top.find("split")) {
        ObjectReader r(*v, "split");
        r.number("train_fraction", c.train_fraction);
        r.finish();
    }
    top.numbers("quantiles", c.quantiles);
    if (const json* v = top.find("resample")) {
        ObjectReader r(*v, "resample");
        r.count("structural_threshold_hours", c.structural_threshold);
        r.finish();
    }
    if (const json* v = top.find("impute")) {
        ObjectReader r(*v, "impute");
        r.count("knn_k", c.knn_k);
        r.count("knn_max_gap", c.knn_max_gap);
        r.string("method", c.impute_method);
        r.strings("methods", c.impute_methods);
        r.count("trial_window_hours", c.trial_window_hours);
        r.count("trial_min_hours", c.trial_min_hours);
        r.finish();
    }
    if (const json* v = top.find("features")) {
        ObjectReader r(*v, "features");
        r.counts("lags", c.lags);
        r.strings("calendar", c.calendar);
        r.finish();
    }

    const json* models = top.find("models");
    require(models != nullptr, "config: 'models' is required");
    require(models->is_object(), "config.models: expected an object");
    for (const auto& [name, body] : models->items()) {
        require(std::find(kModelRoster.begin(), kModelRoster.end(), name) != kModelRoster.end(),
                "config.models: unknown model '" + name + "'");
    }
    for (const auto& name : kModelRoster) {
        auto it = models->find(name);
        if (it == models->end()) continue;
        ObjectReader r(*it, "models." + name);
        bool on = true;
        r.boolean("enabled", on);
        if (name == "seasonal_naive") {
            r.count("period", c.seasonal_naive.period);
        } else if (name == "sarimax") {
            auto& s = c.sarimax;
            std::vector<std::size_t> order, seasonal;
            r.counts("order", order);
            r.counts("seasonal_order", seasonal);
            if (!order.empty()) {
                require(order.size() == 3, "models.sarimax.order: expected [p, d, q]");
                s.order.p = order[0];
                s.order.d = order[1];
                s.order.q = order[2];
            }
            if (!seasonal.empty()) {
                require(seasonal.size() == 4, "models.sarimax.seasonal_order: expected [P, D, Q, s]");
                s.order.P = seasonal[0];
                s.order.D = seasonal[1];
                s.order.Q = seasonal[2];
                s.order.s = seasonal[3];
            }
            r.count("train_hours", s.train_hours);
            r.strings("exog", s.exog);
            r.count("max_iterations", s.max_iterations);
        } else if (name == "gbdt") {
            read_gbdt(r, c.gbdt);
        } else if (name == "gbdt_quantile") {
            read_gbdt(r, c.gbdt_quantile);
        } else if (name == "lstm") {
            auto& s = c.lstm;
            r.count("hidden1", s.shape.hidden1);
            r.count("hidden2", s.shape.hidden2);
            r.count("window", s.shape.window);
            r.number("dropout", s.shape.dropout_rate);
            r.boolean("relu_outputs", s.shape.relu_outputs);
            r.count("max_epochs", s.train.max_epochs);
            r.count("patience", s.train.patience);
            r.count("batch_size", s.train.batch_size);
            r.number("learning_rate", s.train.learning_rate);
            r.boolean("shuffle", s.train.shuffle);
            r.number("val_fraction", s.val_fraction);
            r.strings("channels", s.channels);
        }
        r.finish();
        if (on) c.models.push_back(name);
    }

    if (const json* v = top.find("external_forecasts")) {
        require(v->is_object(), "config.external_forecasts: expected an object of label -> path");
        for (const auto& [label, p] : v->items()) {
            require(p.is_string(), "config.external_forecasts." + label + ": expected a path");
            c.external_forecasts[label] = resolve(base_dir, p.get<std::string>());
        }
    }
    top.finish();

    // Cross-field validation.
    require(c.train_fraction > 0.0 && c.train_fraction < 1.0, "split.train_fraction must be in (0, 1)");
    require(!c.quantiles.empty(), "quantiles must not be empty");
    for (std::size_t k = 0; k < c.quantiles.size(); ++k) {
        require(c.quantiles[k] > 0.0 && c.quantiles[k] < 1.0, "quantiles must lie in (0, 1)");
        require(k == 0 || c.quantiles[k] > c.quantiles[k - 1], "quantiles must be strictly increasing");
    }
    require(!c.schema.timestamp_column.empty() && !c.schema.aggregate_column.empty(),
            "schema: timestamp and aggregate columns are required");
    require(c.knn_k >= 1, "impute.knn_k must be >= 1");
    require(c.impute_method == "auto" || c.impute_method == "linear" || c.impute_method == "seasonal",
            "impute.method must be auto, linear or seasonal");
    require(!c.impute_methods.empty(), "impute.methods must not be empty");
    for (const auto& m : c.impute_methods) {
        require(m == "linear" || m == "seasonal", "impute.methods: unknown method '" + m + "'");
    }
    require(c.trial_min_hours >= 3 && c.trial_window_hours >= c.trial_min_hours,
            "impute: need 3 <= trial_min_hours <= trial_window_hours");
    require(!c.lags.empty(), "features.lags must not be empty");
    for (std::size_t k : c.lags) require(k >= 1, "features.lags: lag 0 would leak the target");
    for (const auto& name : c.calendar) {
        require(std::find(kCalendarNames.begin(), kCalendarNames.end(), name) != kCalendarNames.end(),
                "features.calendar: unknown feature '" + name + "'");
    }
    require(!c.models.empty() || !c.external_forecasts.empty(), "config.models: no model enabled");

    require(c.seasonal_naive.period >= 1, "models.seasonal_naive.period must be >= 1");
    try {
        c.sarimax.order.validate();
    } catch (const std::invalid_argument& e) {
        throw ValidationError(std::string("models.sarimax: ") + e.what());
    }
    require(c.sarimax.train_hours > c.sarimax.order.differencing_span(), "models.sarimax.train_hours too short");
    for (const auto& name : c.sarimax.exog) {
        require(std::find(kCalendarNames.begin(), kCalendarNames.end(), name) != kCalendarNames.end(),
                "models.sarimax.exog: unknown column '" + name + "'");
    }
    require(c.sarimax.max_iterations >= 1, "models.sarimax.max_iterations must be >= 1");
    check_gbdt(c.gbdt, "models.gbdt");
    check_gbdt(c.gbdt_quantile, "models.gbdt_quantile");
    c.lstm.shape.quantiles = c.quantiles;
    try {
        c.lstm.shape.validate();
    } catch (const std::invalid_argument& e) {
        throw ValidationError(std::string("models.lstm: ") + e.what());
    }
    require(c.lstm.train.max_epochs >= 1, "models.lstm.max_epochs must be >= 1");
    require(c.lstm.train.batch_size >= 1, "models.lstm.batch_size must be >= 1");
    require(c.lstm.train.learning_rate > 0.0, "models.lstm.learning_rate must be > 0");
    require(c.lstm.val_fraction > 0.0 && c.lstm.val_fraction < 1.0, "models.lstm.val_fraction must be in (0, 1)");
    for (const auto& [label, p] : c.external_forecasts) {
        require(!label.empty(), "external_forecasts: empty label");
        for (const auto& m : c.models) {
            require(display_name(m) != label, "external_forecasts: label '" + label + "' clashes with a model");
        }
    }
    return c;
}

PipelineConfig load_config(const fs::path& path) {
    std::string text;
    try {
        text = detail::read_text_file(path);
    } catch (const std::exception&) {
        throw ValidationError("cannot read config file " + path.string());
    }
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError("config " + path.string() + ": " + e.what());
    }
    PipelineConfig c = parse_config(doc, path.parent_path());
    if (const char* env = std::getenv("LOADFC_OUTPUT_DIR"); env && *env) c.output_dir = fs::path(env).lexically_normal();
    return c;
}

json config_to_json(const PipelineConfig& c) {
    json doc;
    doc["input"] = c.input.string();
    doc["output_dir"] = c.output_dir.string();
    doc["seed"] = c.seed;
    doc["schema"] = {{"timestamp", c.schema.timestamp_column},
                     {"aggregate", c.schema.aggregate_column},
                     {"appliances", c.schema.appliance_columns}};
    doc["split"] = {{"train_fraction", c.train_fraction}};
    doc["quantiles"] = c.quantiles;
    doc["resample"] = {{"structural_threshold_hours", c.structural_threshold}};
    doc["impute"] = {{"knn_k", c.knn_k},
                     {"knn_max_gap", c.knn_max_gap},
                     {"method", c.impute_method},
                     {"methods", c.impute_methods},
                     {"trial_window_hours", c.trial_window_hours},
                     {"trial_min_hours", c.trial_min_hours}};
    doc["features"] = {{"lags", c.lags}, {"calendar", c.calendar}};
    json models = json::object();
    for (const auto& name : c.models) {
        if (name == "seasonal_naive") {
            models[name] = {{"period", c.seasonal_naive.period}};
        } else if (name == "sarimax") {
            const auto& o = c.sarimax.order;
            models[name] = {{"order", {o.p, o.d, o.q}},
                            {"seasonal_order", {o.P, o.D, o.Q, o.s}},
                            {"train_hours", c.sarimax.train_hours},
                            {"exog", c.sarimax.exog},
                            {"max_iterations", c.sarimax.max_iterations}};
        } else if (name == "gbdt") {
            models[name] = gbdt_settings_json(c.gbdt);
        } else if (name == "gbdt_quantile") {
            models[name] = gbdt_settings_json(c.gbdt_quantile);
        } else if (name == "lstm") {
            const auto& s = c.lstm;
            models[name] = {{"hidden1", s.shape.hidden1},     {"hidden2", s.shape.hidden2},
                            {"window", s.shape.window},       {"dropout", s.shape.dropout_rate},
                            {"relu_outputs", s.shape.relu_outputs}, {"max_epochs", s.train.max_epochs},
                            {"patience", s.train.patience},   {"batch_size", s.train.batch_size},
                            {"learning_rate", s.train.learning_rate}, {"shuffle", s.train.shuffle},
                            {"val_fraction", s.val_fraction}, {"channels", s.channels}};
        }
    }
    doc["models"] = models;
    json ext = json::object();
    for (const auto& [label, p] : c.external_forecasts) ext[label] = p.string();
    doc["external_forecasts"] = ext;
    return doc;
}

std::string config_hash(const PipelineConfig& config) {
    json doc = config_to_json(config);
    doc.erase("input");
    doc.erase("output_dir");
    return hex64(fnv1a64(doc.dump()));
}

// ---------------------------------------------------------------------------
// Paths
// ---------------------------------------------------------------------------

namespace paths {
fs::path hourly_cache(const PipelineConfig& c) { return c.output_dir / "hourly.csv"; }
fs::path gap_report(const PipelineConfig& c) { return c.output_dir / "gaps.json"; }
fs::path trial(const PipelineConfig& c) { return c.output_dir / "imputation" / "trial.json"; }
fs::path model_dir(const PipelineConfig& c) { return c.output_dir / "models"; }
fs::path artifact(const PipelineConfig& c, const std::string& model) { return model_dir(c) / (model + ".json"); }
fs::path report_csv(const PipelineConfig& c) { return c.output_dir / "report.csv"; }
fs::path report_txt(const PipelineConfig& c) { return c.output_dir / "report.txt"; }
fs::path plot(const PipelineConfig& c, const std::string& label) {
    std::string stem;
    for (char ch : label) {
        const bool alnum = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9');
        stem += alnum ? static_cast<char>(ch >= 'A' && ch <= 'Z' ? ch - 'A' + 'a' : ch) : '_';
    }
    return c.output_dir / "plots" / (stem + ".csv");
}
}  // namespace paths

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

namespace {

std::string now_iso() {
    using namespace std::chrono;
    const auto t = floor<seconds>(system_clock::now());
    const auto day = floor<days>(t);
    const year_month_day ymd{day};
    const hh_mm_ss hms{t - day};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

void write_json(const fs::path& path, const json& doc) { detail::write_text_file(path, doc.dump(2) + "\n"); }

json read_json(const fs::path& path) { return json::parse(detail::read_text_file(path)); }

std::string file_hash(const fs::path& path) { return hex64(fnv1a64(detail::read_text_file(path))); }

std::string relative_to(const fs::path& p, const fs::path& base) { return p.lexically_relative(base).generic_string(); }

void record_file(RunManifest& m, const PipelineConfig& c, const fs::path& p, const std::string& writer) {
    m.doc["files"][relative_to(p, c.output_dir)] = {{"written_by", writer}};
}

}  // namespace

RunManifest RunManifest::load(const fs::path& output_dir) {
    RunManifest m;
    const fs::path p = output_dir / "manifest.json";
    if (fs::exists(p)) m.doc = read_json(p);
    return m;
}

void RunManifest::save(const fs::path& output_dir) {
    json files = json::object();
    if (doc.contains("files")) {
        for (const auto& [rel, info] : doc["files"].items()) {
            const fs::path p = output_dir / rel;
            if (!fs::exists(p)) continue;
            json entry = info;
            entry["hash"] = file_hash(p);
            files[rel] = entry;
        }
    }
    doc["files"] = files;
    std::string basis = doc.value("config_hash", "") + "|" + doc.value("data_fingerprint", "");
    for (const auto& [rel, info] : files.items()) basis += "|" + rel + "=" + info["hash"].get<std::string>();
    doc["run_hash"] = hex64(fnv1a64(basis));
    write_json(output_dir / "manifest.json", doc);
}

// ---------------------------------------------------------------------------
// Data preparation
// ---------------------------------------------------------------------------

HourlySeries trim_to_target(const HourlySeries& series, std::size_t target_channel) {
    const Channel& t = series.channel(target_channel);
    std::size_t begin = 0, end = t.size();
    while (begin < end && !t[begin]) ++begin;
    while (end > begin && !t[end - 1]) --end;
    if (begin == end) throw ValidationError("target channel has no observed values");
    return series.slice({begin, end});
}

HourlySeries impute_series(const HourlySeries& series, ImputeMethod method, std::size_t knn_k, std::size_t max_gap) {
    HourlySeries out = series;
    for (std::size_t c = 0; c < series.channel_count(); ++c) {
        const std::vector<Gap> runs = missing_runs(series.channel(c));
        bool any_long = false;
        for (const Gap& g : runs) any_long = any_long || g.length > max_gap;
        if (!any_long) continue;
        const SeasonalProfile profile = build_seasonal_profile(series, {0, 0}, c);
        for (const Gap& g : runs) {
            if (g.length <= max_gap) continue;
            const IndexRange range{g.start, g.start + g.length};
            const bool boundary = g.start == 0 || range.end == series.size();
            if (method == ImputeMethod::Linear && !boundary) {
                out = linear_impute(out, range, c);
            } else {
                out = seasonal_impute(out, range, profile, c);
            }
        }
    }
    out = knn_impute(out, knn_k, max_gap);
    for (std::size_t c = 0; c < out.channel_count(); ++c) {
        for (const auto& v : out.channel(c)) {
            if (!v) throw ValidationError("imputation left missing values in '" + out.channel_names()[c] + "'");
        }
    }
    return out;
}

TrainData prepare_train(const PipelineConfig& config, const HourlySeries& cache, ImputeMethod method) {
    TrainData td;
    std::size_t n_train = 0;
    try {
        n_train = split_point(cache.size(), config.train_fraction);
    } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
    }
    if (n_train >= cache.size()) throw ValidationError("split leaves an empty test segment");
    const HourlySeries segment = cache.slice({0, n_train});
    td.fingerprint = hex64(fnv1a64(hourly_to_csv(segment)));
    td.method = method;

    const std::size_t target = segment.channel_index(config.schema.aggregate_column);
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < segment.channel_count(); ++c) {
        std::size_t present = 0;
        for (const auto& v : segment.channel(c)) present += v.has_value();
        if (present >= config.knn_k) {
            keep.push_back(c);
        } else if (c == target) {
            throw ValidationError("training segment has fewer than knn_k observed target values");
        } else {
            td.dropped_channels.push_back(segment.channel_names()[c]);
        }
    }
    td.raw = segment.select_channels(keep);
    td.target = td.raw.channel_index(config.schema.aggregate_column);
    td.filled = impute_series(td.raw, method, config.knn_k, config.knn_max_gap);
    td.scaler = minmax_fit(td.filled, {0, n_train});
    td.scaled = minmax_transform(td.filled, td.scaler);
    return td;
}

EvalData prepare_eval(const PipelineConfig& config, const HourlySeries& cache, const TrainData& train) {
    EvalData ed;
    ed.n_train = train.raw.size();
    std::vector<std::size_t> keep;
    for (const auto& name : train.raw.channel_names()) keep.push_back(cache.channel_index(name));
    const HourlySeries full = cache.select_channels(keep);
    if (full.size() <= ed.n_train) throw ValidationError("series has no test segment");

    std::vector<Channel> combined;
    for (std::size_t c = 0; c < full.channel_count(); ++c) {
        Channel ch = train.filled.channel(c);
        const Channel& src = full.channel(c);
        ch.insert(ch.end(), src.begin() + static_cast<std::ptrdiff_t>(ed.n_train), src.end());
        combined.push_back(std::move(ch));
    }
    const HourlySeries joined(full.start(), full.channel_names(), std::move(combined));
    ed.filled = impute_series(joined, train.method, config.knn_k, config.knn_max_gap);
    ed.scaled = minmax_transform(ed.filled, train.scaler);
    const Channel& target = full.channel(train.target);
    ed.actual.assign(target.begin() + static_cast<std::ptrdiff_t>(ed.n_train), target.end());
    for (std::size_t i = ed.n_train; i < full.size(); ++i) ed.test_timestamps.push_back(full.timestamp_at(i));
    return ed;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

namespace {

HourlySeries load_cache(const PipelineConfig& c) {
    const fs::path p = paths::hourly_cache(c);
    if (!fs::exists(p)) throw ValidationError("no hourly cache at " + p.string() + "; run ingest first");
    const HourlySeries series = read_hourly_csv(p);
    return trim_to_target(series, series.channel_index(c.schema.aggregate_column));
}

ImputeMethod resolve_method(const PipelineConfig& c) {
    if (c.impute_method != "auto") return parse_impute_method(c.impute_method);
    const fs::path p = paths::trial(c);
    if (!fs::exists(p)) throw ValidationError("impute.method is auto but no trial result exists; run impute-eval first");
    return parse_impute_method(read_json(p).at("chosen").get<std::string>());
}

json histogram_json(const Histogram& h) { return {{"lo", h.lo}, {"bin_width", h.bin_width}, {"counts", h.counts}}; }

void begin_section(RunManifest& m, const PipelineConfig& c) { m.doc["config_hash"] = config_hash(c); }

}  // namespace

IngestResult cmd_ingest(const PipelineConfig& config) {
    if (!fs::exists(config.input)) throw IngestError("cannot open " + config.input.string());
    std::string schema_key = config.schema.timestamp_column;
    for (const auto& n : config.schema.channel_names()) schema_key += "," + n;
    IngestResult result;
    result.fingerprint = hex64(fnv1a64(schema_key, fnv1a64(detail::read_text_file(config.input))));

    const fs::path cache = paths::hourly_cache(config);
    const fs::path gaps_path = paths::gap_report(config);
    if (fs::exists(cache) && fs::exists(gaps_path)) {
        const json prior = read_json(gaps_path);
        if (prior.value("fingerprint", "") == result.fingerprint &&
            prior.value("structural_threshold_hours", std::size_t{0}) == config.structural_threshold) {
            result.hours = prior.at("hours").get<std::size_t>();
            result.gaps.structural_threshold = config.structural_threshold;
            for (const auto& g : prior.at("gaps")) {
                result.gaps.gaps.push_back({g.at("start_index").get<std::size_t>(), g.at("length_hours").get<std::size_t>()});
            }
            return result;
        }
    }

    const RawSeries raw = ingest_csv(config.input, config.schema);
    const HourlySeries hourly = resample_hourly(raw);
    result.gaps = detect_gaps(hourly, config.structural_threshold, 0);
    result.hours = hourly.size();
    result.rewritten = true;
    write_hourly_csv(cache, hourly);

    json gj;
    gj["fingerprint"] = result.fingerprint;
    gj["structural_threshold_hours"] = config.structural_threshold;
    gj["start"] = format_iso_hour(hourly.start());
    gj["hours"] = hourly.size();
    gj["raw_rows"] = raw.size();
    gj["channels"] = hourly.channel_names();
    json missing = json::object();
    for (std::size_t c = 0; c < hourly.channel_count(); ++c) {
        std::size_t n = 0;
        for (const auto& v : hourly.channel(c)) n += !v.has_value();
        missing[hourly.channel_names()[c]] = n;
    }
    gj["missing_hours"] = missing;
    gj["gaps"] = json::array();
    for (const Gap& g : result.gaps.gaps) {
        gj["gaps"].push_back({{"start_index", g.start},
                              {"length_hours", g.length},
                              {"start_time", format_iso_hour(hourly.timestamp_at(g.start))}});
    }
    write_json(gaps_path, gj);

    RunManifest m = RunManifest::load(config.output_dir);
    begin_section(m, config);
    m.doc["data_fingerprint"] = result.fingerprint;
    m.doc["ingest"] = {{"hours", result.hours},
                       {"channels", hourly.channel_count()},
                       {"structural_gaps", result.gaps.gaps.size()},
                       {"completed_at", now_iso()}};
    record_file(m, config, cache, "ingest");
    record_file(m, config, gaps_path, "ingest");
    m.save(config.output_dir);
    return result;
}

ImputeEvalResult cmd_impute_eval(const PipelineConfig& config) {
    const HourlySeries cache = load_cache(config);
    std::size_t n_train = 0;
    try {
        n_train = split_point(cache.size(), config.train_fraction);
    } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
    }
    // The trial only looks at the training segment, so the choice cannot depend on test data.
    const HourlySeries train = cache.slice({0, n_train});
    const std::size_t target = train.channel_index(config.schema.aggregate_column);
    const Channel& y = train.channel(target);

    std::vector<IndexRange> runs;
    for (std::size_t i = 0; i < y.size();) {
        if (!y[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < y.size() && y[j]) ++j;
        runs.push_back({i, j});
        i = j;
    }
    std::optional<IndexRange> window;
    for (const auto& r : runs) {
        if (r.size() >= config.trial_window_hours) {
            window = IndexRange{r.begin, r.begin + config.trial_window_hours};
            break;
        }
    }
    if (!window) {
        for (const auto& r : runs) {
            if (r.size() >= config.trial_min_hours && (!window || r.size() > window->size())) window = r;
        }
    }
    if (!window) {
        throw ValidationError("no gapless window of at least " + std::to_string(config.trial_min_hours) +
                              " hours in the training segment");
    }

    ImputeEvalResult result;
    result.window = *window;
    const HourlySeries segment = train.slice(*window).select_channels({target});
    const std::size_t third = segment.size() / 3;
    const IndexRange mask{third, 2 * third};
    std::vector<ImputeMethod> methods;
    for (const auto& m : config.impute_methods) methods.push_back(parse_impute_method(m));
    result.trial = run_imputation_trial(segment, mask, methods, 0);
    result.chosen = choose_method(result.trial);

    json tj;
    tj["window_start"] = format_iso_hour(segment.start());
    tj["window_hours"] = segment.size();
    tj["mask_start"] = format_iso_hour(segment.timestamp_at(mask.begin));
    tj["mask_hours"] = mask.size();
    tj["histogram_bins"] = kTrialHistogramBins;
    tj["truth_histogram"] = histogram_json(result.trial.truth_histogram);
    tj["methods"] = json::array();
    for (const auto& s : result.trial.method_results) {
        tj["methods"].push_back({{"method", to_string(s.method)},
                                 {"rmse", s.rmse},
                                 {"mae", s.mae},
                                 {"distribution_distance", s.distribution_distance},
                                 {"histogram", histogram_json(s.histogram)}});
    }
    tj["chosen"] = to_string(result.chosen);
    const fs::path trial_path = paths::trial(config);
    write_json(trial_path, tj);

    // Plot data: the masked stretch with each method's fill, and the histograms.
    std::ostringstream series_csv;
    series_csv << "timestamp,actual";
    for (const auto& s : result.trial.method_results) series_csv << ',' << to_string(s.method);
    series_csv << '\n';
    for (std::size_t i = 0; i < mask.size(); ++i) {
        series_csv << format_iso_hour(segment.timestamp_at(mask.begin + i)) << ','
                   << format_double(result.trial.truth[i]);
        for (const auto& s : result.trial.method_results) series_csv << ',' << format_double(s.imputed[i]);
        series_csv << '\n';
    }
    const fs::path series_path = trial_path.parent_path() / "masked_series.csv";
    detail::write_text_file(series_path, series_csv.str());

    // Trial summary and one histogram per method (plus the held-out truth).
    std::ostringstream trial_csv;
    trial_csv << "method,rmse,mae,emd\n";
    for (const auto& s : result.trial.method_results) {
        trial_csv << to_string(s.method) << ',' << format_double(s.rmse) << ',' << format_double(s.mae) << ','
                  << format_double(s.distribution_distance) << '\n';
    }
    const fs::path trial_csv_path = trial_path.parent_path() / "trial.csv";
    detail::write_text_file(trial_csv_path, trial_csv.str());

    std::vector<fs::path> hist_paths;
    auto write_histogram = [&](const std::string& label, const Histogram& h) {
        std::ostringstream out;
        out << "bin_left,bin_right,count\n";
        for (std::size_t b = 0; b < h.counts.size(); ++b) {
            out << format_double(h.bin_left(b)) << ',' << format_double(h.bin_right(b)) << ',' << h.counts[b] << '\n';
        }
        hist_paths.push_back(trial_path.parent_path() / ("histogram_" + label + ".csv"));
        detail::write_text_file(hist_paths.back(), out.str());
    };
    write_histogram("actual", result.trial.truth_histogram);
    for (const auto& s : result.trial.method_results) write_histogram(to_string(s.method), s.histogram);

    RunManifest m = RunManifest::load(config.output_dir);
    begin_section(m, config);
    json scores = json::object();
    for (const auto& s : result.trial.method_results) {
        scores[to_string(s.method)] = {{"rmse", s.rmse}, {"distribution_distance", s.distribution_distance}};
    }
    m.doc["imputation"] = {{"chosen", to_string(result.chosen)},
                           {"window_start", tj["window_start"]},
                           {"window_hours", segment.size()},
                           {"mask_hours", mask.size()},
                           {"scores", scores},
                           {"completed_at", now_iso()}};
    record_file(m, config, trial_path, "impute-eval");
    record_file(m, config, series_path, "impute-eval");
    record_file(m, config, trial_csv_path, "impute-eval");
    for (const auto& p : hist_paths) record_file(m, config, p, "impute-eval");
    m.save(config.output_dir);
    return result;
}

// ---------------------------------------------------------------------------
// Per-model training and prediction
// ---------------------------------------------------------------------------

namespace {

FeatureConfig tabular_features(const PipelineConfig& c) {
    FeatureConfig fc;
    fc.target_channel = c.schema.aggregate_column;
    fc.calendar = c.calendar;
    fc.lags = c.lags;
    return fc;
}

FeatureConfig sequence_features(const PipelineConfig& c, const HourlySeries& series) {
    FeatureConfig fc = tabular_features(c);
    fc.channels = c.lstm.channels.empty() ? series.channel_names() : c.lstm.channels;
    for (const auto& name : fc.channels) {
        try {
            series.channel_index(name);
        } catch (const std::out_of_range&) {
            throw ValidationError("models.lstm.channels: no channel '" + name + "' in the prepared data");
        }
    }
    fc.normalize_calendar = true;
    return fc;
}

std::size_t validation_count(std::size_t rows, double fraction) {
    const auto n = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(rows)));
    return std::clamp<std::size_t>(n, 1, rows > 1 ? rows - 1 : 1);
}

json matrix_json(const DenseMatrix& m) { return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}}; }

DenseMatrix matrix_from_json(const json& j) {
    return DenseMatrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                       j.at("data").get<std::vector<double>>());
}

json sarimax_json(const SarimaxModel& m) {
    const auto& o = m.order;
    json j;
    j["order"] = {o.p, o.d, o.q};
    j["seasonal_order"] = {o.P, o.D, o.Q, o.s};
    j["ar"] = m.ar;
    j["ma"] = m.ma;
    j["sar"] = m.sar;
    j["sma"] = m.sma;
    j["beta"] = m.beta;
    j["intercept"] = m.intercept;
    j["sigma2"] = m.sigma2;
    j["css"] = m.css;
    j["n_effective"] = m.n_effective;
    j["endog_tail"] = m.endog_tail;
    j["exog_tail"] = matrix_json(m.exog_tail);
    j["noise_tail"] = m.noise_tail;
    j["shock_tail"] = m.shock_tail;
    j["diagnostics"] = {{"converged", m.diagnostics.converged},
                        {"iterations", m.diagnostics.iterations},
                        {"near_unit_root", m.diagnostics.near_unit_root},
                        {"warnings", m.diagnostics.warnings}};
    return j;
}

SarimaxModel sarimax_from_json(const json& j) {
    SarimaxModel m;
    const auto order = j.at("order").get<std::vector<std::size_t>>();
    const auto seasonal = j.at("seasonal_order").get<std::vector<std::size_t>>();
    m.order = {order.at(0), order.at(1), order.at(2), seasonal.at(0), seasonal.at(1), seasonal.at(2), seasonal.at(3)};
    m.ar = j.at("ar").get<std::vector<double>>();
    m.ma = j.at("ma").get<std::vector<double>>();
    m.sar = j.at("sar").get<std::vector<double>>();
    m.sma = j.at("sma").get<std::vector<double>>();
    m.beta = j.at("beta").get<std::vector<double>>();
    m.intercept = j.at("intercept").get<double>();
    m.sigma2 = j.at("sigma2").get<double>();
    m.css = j.at("css").get<double>();
    m.n_effective = j.at("n_effective").get<std::size_t>();
    m.endog_tail = j.at("endog_tail").get<std::vector<double>>();
    m.exog_tail = matrix_from_json(j.at("exog_tail"));
    m.noise_tail = j.at("noise_tail").get<std::vector<double>>();
    m.shock_tail = j.at("shock_tail").get<std::vector<double>>();
    return m;
}

DenseMatrix calendar_exog(const std::vector<Timestamp>& ts, const std::vector<std::string>& names) {
    const CalendarColumns cal = calendar_features(ts);
    DenseMatrix x(ts.size(), names.size());
    for (std::size_t c = 0; c < names.size(); ++c) {
        const auto& col = cal.by_name(names[c]);
        for (std::size_t r = 0; r < ts.size(); ++r) x(r, c) = col[r];
    }
    return x;
}

struct TrainedArtifact {
    json doc;
    std::vector<fs::path> extra_files;
    std::string note;
};

TrainedArtifact train_one(const std::string& name, const PipelineConfig& c, const TrainData& td,
                          std::uint64_t seed) {
    TrainedArtifact out;
    json& doc = out.doc;
    doc["format"] = "loadfc-artifact";
    doc["model"] = name;
    doc["config_hash"] = config_hash(c);
    doc["train_fingerprint"] = td.fingerprint;
    doc["derived_seed"] = seed;
    doc["impute_method"] = to_string(td.method);
    doc["channels"] = td.scaled.channel_names();

    if (name == "seasonal_naive") {
        doc["period"] = c.seasonal_naive.period;
    } else if (name == "sarimax") {
        const std::size_t n = td.scaled.size();
        const std::size_t len = std::min(c.sarimax.train_hours, n);
        const HourlySeries tail = td.scaled.slice({n - len, n});
        std::vector<double> endog;
        for (const auto& v : tail.channel(td.target)) endog.push_back(*v);
        const DenseMatrix exog = calendar_exog(tail.timestamps(), c.sarimax.exog);
        NelderMeadOptions opt;
        opt.max_iterations = c.sarimax.max_iterations;
        const SarimaxModel model = sarimax_fit(endog, exog, c.sarimax.order, opt);
        doc["exog"] = c.sarimax.exog;
        doc["train_hours"] = len;
        doc["train_start"] = format_iso_hour(tail.start());
        doc["sarimax"] = sarimax_json(model);
        out.note = "fit on the final " + std::to_string(len) + " hours of the training split";
        if (!model.diagnostics.converged) out.note += "; optimizer hit its iteration limit";
        if (model.diagnostics.near_unit_root) out.note += "; near-unit root";
    } else if (name == "gbdt" || name == "gbdt_quantile") {
        const GbdtSettings& s = name == "gbdt" ? c.gbdt : c.gbdt_quantile;
        const FeatureMatrix m = assemble_matrix(td.scaled, tabular_features(c));
        const std::size_t n_val = validation_count(m.rows(), s.val_fraction);
        const FeatureMatrix fit = m.slice_rows({0, m.rows() - n_val});
        const FeatureMatrix val = m.slice_rows({m.rows() - n_val, m.rows()});
        if (name == "gbdt") {
            const GbdtModel model = gbdt_fit(fit.features, fit.targets, val.features, val.targets, s.params,
                                             m.feature_order);
            doc["gbdt"] = gbdt_to_json(model);
            out.note = "best iteration " + std::to_string(model.best_iteration);
        } else {
            doc["quantiles"] = c.quantiles;
            doc["models"] = json::array();
            for (double tau : c.quantiles) {
                GbdtParams p = s.params;
                p.loss = BoostLoss::pinball(tau);
                const GbdtModel model = gbdt_fit(fit.features, fit.targets, val.features, val.targets, p,
                                                 m.feature_order);
                doc["models"].push_back(gbdt_to_json(model));
            }
        }
    } else if (name == "lstm") {
        const FeatureMatrix m = assemble_matrix(td.scaled, sequence_features(c, td.scaled));
        const WindowTensor all = windowize(m, c.lstm.shape.window);
        const std::size_t n_val = validation_count(all.samples, c.lstm.val_fraction);
        const WindowTensor fit = all.slice({0, all.samples - n_val});
        const WindowTensor val = all.slice({all.samples - n_val, all.samples});
        LstmShape shape = c.lstm.shape;
        shape.n_features = m.feature_order.size();
        shape.quantiles = c.quantiles;
        QuantileLstmModel model = QuantileLstmModel::initialized(shape, seed);
        model.feature_order = m.feature_order;
        model.target_scale = TargetScale{td.scaler.min[td.target], td.scaler.max[td.target]};
        TrainConfig tc = c.lstm.train;
        tc.seed = seed;
        const TrainResult r = train(std::move(model), fit, val, tc);
        const fs::path ckpt = paths::model_dir(c) / "lstm_checkpoint.json";
        save_checkpoint(r.model, ckpt);
        const fs::path hist = paths::model_dir(c) / "lstm_history.csv";
        detail::write_text_file(hist, history_to_csv(r.history));
        out.extra_files = {ckpt, fs::path(ckpt).replace_extension(".bin"), hist};
        doc["checkpoint"] = ckpt.filename().string();
        doc["history"] = hist.filename().string();
        doc["best_epoch"] = r.best_epoch;
        doc["epochs_run"] = r.history.size();
        out.note = "best epoch " + std::to_string(r.best_epoch) + " of " + std::to_string(r.history.size());
    } else {
        throw ValidationError("unknown model '" + name + "'");
    }
    return out;
}

struct Prediction {
    std::vector<double> point;
    std::optional<ForecastDistribution> dist;
};

/// Rows of the full-horizon matrix whose timestamp falls in the test segment.
FeatureMatrix test_rows(const FeatureMatrix& m, Timestamp split_ts, std::size_t n_test) {
    std::size_t first = 0;
    while (first < m.rows() && m.timestamps[first] < split_ts) ++first;
    if (m.rows() - first != n_test) throw std::runtime_error("feature matrix does not cover every test hour");
    return m.slice_rows({first, m.rows()});
}

Prediction predict_one(const std::string& name, const json& doc, const PipelineConfig& c, const TrainData& td,
                       const EvalData& ed) {
    Prediction p;
    const std::size_t n_test = ed.test_timestamps.size();
    const Timestamp split_ts = ed.test_timestamps.front();
    auto unscale = [&](double v) { return td.scaler.inverse(td.target, v); };

    if (name == "seasonal_naive") {
        const std::size_t period = doc.at("period").get<std::size_t>();
        if (period > ed.n_train) throw ValidationError("seasonal period longer than the training segment");
        const Channel& y = ed.filled.channel(td.target);
        for (std::size_t j = 0; j < n_test; ++j) p.point.push_back(*y[ed.n_train + j - period]);
    } else if (name == "sarimax") {
        const SarimaxModel model = sarimax_from_json(doc.at("sarimax"));
        const auto exog_names = doc.at("exog").get<std::vector<std::string>>();
        const DenseMatrix exog = calendar_exog(ed.test_timestamps, exog_names);
        for (double v : sarimax_forecast(model, n_test, exog)) p.point.push_back(unscale(v));
    } else if (name == "gbdt") {
        const GbdtModel model = gbdt_from_json(doc.at("gbdt"));
        const FeatureMatrix m = test_rows(assemble_matrix(ed.scaled, tabular_features(c)), split_ts, n_test);
        for (double v : gbdt_predict(model, m.features, m.feature_order)) p.point.push_back(unscale(v));
    } else if (name == "gbdt_quantile") {
        std::vector<GbdtModel> models;
        for (const auto& j : doc.at("models")) models.push_back(gbdt_from_json(j));
        const FeatureMatrix m = test_rows(assemble_matrix(ed.scaled, tabular_features(c)), split_ts, n_test);
        for (const auto& model : models) {
            if (model.feature_order != m.feature_order) throw ValidationError("gbdt_quantile: feature order changed");
        }
        ForecastDistribution d = gbdt_predict_quantiles(models, m.features, m.timestamps);
        for (auto& row : d.values) {
            for (double& v : row) v = unscale(v);
        }
        p.point = d.median();
        p.dist = std::move(d);
    } else if (name == "lstm") {
        const fs::path ckpt = paths::model_dir(c) / doc.at("checkpoint").get<std::string>();
        const QuantileLstmModel model = load_checkpoint(ckpt);
        const FeatureMatrix m = assemble_matrix(ed.scaled, sequence_features(c, ed.scaled));
        if (m.feature_order != model.feature_order) throw ValidationError("lstm: feature order changed");
        const WindowTensor all = windowize(m, model.shape().window);
        std::size_t first = 0;
        while (first < all.samples && all.target_timestamps[first] < split_ts) ++first;
        if (all.samples - first != n_test) throw std::runtime_error("LSTM windows do not cover every test hour");
        ForecastDistribution d = predict_quantiles(model, all.slice({first, all.samples}), td.scaler, td.target);
        p.point = d.median();
        p.dist = std::move(d);
    }
    return p;
}

Prediction read_external(const fs::path& path, const std::vector<Timestamp>& ts, const std::vector<double>& levels) {
    std::string text;
    try {
        text = detail::read_text_file(path);
    } catch (const std::exception&) {
        throw ValidationError("cannot read external forecast " + path.string());
    }
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    if (detail::trim(line) != "timestamp,actual,point_or_q50,q05,q95") {
        throw ValidationError(path.string() + ": expected header timestamp,actual,point_or_q50,q05,q95");
    }
    struct Row {
        double mid;
        std::optional<double> lo, hi;
    };
    std::map<Timestamp, Row> rows;
    std::vector<std::string_view> cells;
    auto opt = [](std::string_view s) -> std::optional<double> {
        s = detail::trim(s);
        if (s.empty()) return std::nullopt;
        return std::stod(std::string(s));
    };
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        detail::split_csv(line, cells);
        if (cells.size() != 5) throw ValidationError(path.string() + ": row with wrong field count");
        const auto mid = opt(cells[2]);
        if (!mid) throw ValidationError(path.string() + ": missing point_or_q50");
        rows[parse_iso_hour(detail::trim(cells[0]))] = {*mid, opt(cells[3]), opt(cells[4])};
    }
    Prediction p;
    bool has_interval = true;
    std::vector<double> lo, hi;
    for (Timestamp t : ts) {
        auto it = rows.find(t);
        if (it == rows.end()) throw ValidationError(path.string() + ": no forecast for " + format_iso_hour(t));
        p.point.push_back(it->second.mid);
        has_interval = has_interval && it->second.lo && it->second.hi;
        lo.push_back(it->second.lo.value_or(0.0));
        hi.push_back(it->second.hi.value_or(0.0));
    }
    if (has_interval) {
        ForecastDistribution d;
        d.timestamps = ts;
        d.levels = {levels.front(), 0.5, levels.back()};
        d.values = {lo, p.point, hi};
        sort_quantiles(d);
        p.dist = std::move(d);
    }
    return p;
}

std::string plot_csv(const std::vector<Timestamp>& ts, const Channel& actual, const Prediction& p) {
    std::ostringstream out;
    out << "timestamp,actual,point_or_q50,q05,q95\n";
    for (std::size_t i = 0; i < ts.size(); ++i) {
        out << format_iso_hour(ts[i]) << ',';
        if (actual[i]) out << format_double(*actual[i]);
        out << ',' << format_double(p.point[i]) << ',';
        if (p.dist) out << format_double(p.dist->lower()[i]) << ',' << format_double(p.dist->upper()[i]);
        else out << ',';
        out << '\n';
    }
    return out.str();
}

ReportEntry score(const std::string& label, const Prediction& p, const Channel& actual) {
    std::vector<double> y, point;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        if (!actual[i]) continue;
        idx.push_back(i);
        y.push_back(*actual[i]);
        point.push_back(p.point[i]);
    }
    if (y.empty()) throw ValidationError("test segment has no observed target values");
    if (!p.dist) return score_point(label, y, point);
    ForecastDistribution d;
    d.levels = p.dist->levels;
    d.values.assign(d.levels.size(), {});
    for (std::size_t k = 0; k < d.levels.size(); ++k) {
        for (std::size_t i : idx) d.values[k].push_back(p.dist->values[k][i]);
    }
    ReportEntry e = score_distribution(label, y, d);
    // Point metrics come from the forecast median either way.
    e.rmse = rmse(y, point);
    e.mae = mae(y, point);
    return e;
}

}  // namespace

std::vector<ModelOutcome> cmd_train(const PipelineConfig& config, const std::vector<std::string>& only) {
    std::vector<std::string> roster;
    for (const auto& name : only) {
        if (std::find(kModelRoster.begin(), kModelRoster.end(), name) == kModelRoster.end()) {
            throw ValidationError("--models: unknown model '" + name + "'");
        }
        if (!config.enabled(name)) throw ValidationError("--models: model '" + name + "' is not enabled in the config");
    }
    for (const auto& name : config.models) {
        if (only.empty() || std::find(only.begin(), only.end(), name) != only.end()) roster.push_back(name);
    }
    if (roster.empty()) throw ValidationError("no models to train");

    const ImputeMethod method = resolve_method(config);
    const HourlySeries cache = load_cache(config);
    const TrainData td = prepare_train(config, cache, method);
    fs::create_directories(paths::model_dir(config));

    // Models are independent: train them concurrently, collect in roster order.
    std::vector<std::future<TrainedArtifact>> jobs;
    for (const auto& name : roster) {
        const std::uint64_t seed = derived_seed(config.seed, name);
        jobs.push_back(std::async(std::launch::async, [&config, &td, name, seed] {
            return train_one(name, config, td, seed);
        }));
    }

    RunManifest m = RunManifest::load(config.output_dir);
    begin_section(m, config);
    std::vector<ModelOutcome> outcomes;
    for (std::size_t k = 0; k < roster.size(); ++k) {
        const std::string& name = roster[k];
        ModelOutcome o;
        o.model = name;
        o.artifact = paths::artifact(config, name);
        json entry = {{"derived_seed", derived_seed(config.seed, name)}};
        try {
            TrainedArtifact a = jobs[k].get();
            write_json(o.artifact, a.doc);
            record_file(m, config, o.artifact, "train");
            for (const auto& f : a.extra_files) record_file(m, config, f, "train");
            o.ok = true;
            entry["status"] = "ok";
            if (!a.note.empty()) entry["notes"] = a.note;
        } catch (const std::exception& e) {
            o.error = e.what();
            std::error_code ec;
            fs::remove(o.artifact, ec);
            entry["status"] = "failed";
            entry["error"] = o.error;
        }
        m.doc["models"][name] = entry;
        outcomes.push_back(std::move(o));
    }
    json scaler = json::object();
    for (std::size_t c = 0; c < td.scaler.channel_count(); ++c) {
        scaler[td.scaler.channel_names[c]] = {{"min", td.scaler.min[c]}, {"max", td.scaler.max[c]}};
    }
    m.doc["train"] = {{"train_fingerprint", td.fingerprint},
                      {"train_hours", td.raw.size()},
                      {"impute_method", to_string(method)},
                      {"dropped_channels", td.dropped_channels},
                      {"scaler", scaler},
                      {"completed_at", now_iso()}};
    m.save(config.output_dir);
    return outcomes;
}

EvalReport cmd_evaluate(const PipelineConfig& config) {
    const ImputeMethod method = resolve_method(config);
    const HourlySeries cache = load_cache(config);
    const TrainData td = prepare_train(config, cache, method);
    const EvalData ed = prepare_eval(config, cache, td);
    const std::string hash = config_hash(config);

    std::vector<ReportEntry> entries;
    std::vector<std::string> skipped;
    RunManifest m = RunManifest::load(config.output_dir);
    begin_section(m, config);
    json metrics = json::object();

    auto emit = [&](const std::string& key, const std::string& label, const Prediction& p) {
        const fs::path plot = paths::plot(config, key);
        detail::write_text_file(plot, plot_csv(ed.test_timestamps, ed.actual, p));
        record_file(m, config, plot, "evaluate");
        ReportEntry e = score(label, p, ed.actual);
        metrics[label] = {{"rmse", e.rmse}, {"mae", e.mae}};
        if (e.picp) metrics[label]["picp"] = *e.picp;
        if (e.aqs) metrics[label]["aqs"] = *e.aqs;
        entries.push_back(std::move(e));
    };

    for (const auto& name : config.models) {
        const fs::path path = paths::artifact(config, name);
        if (!fs::exists(path)) {
            skipped.push_back(name);
            continue;
        }
        const json doc = read_json(path);
        if (doc.value("config_hash", "") != hash) {
            throw ValidationError(path.string() + " was trained with a different config (hash mismatch); retrain");
        }
        if (doc.value("train_fingerprint", "") != td.fingerprint) {
            throw ValidationError(path.string() + " was trained on different data; retrain");
        }
        emit(name, display_name(name), predict_one(name, doc, config, td, ed));
    }
    for (const auto& [label, path] : config.external_forecasts) {
        emit(label, label, read_external(path, ed.test_timestamps, config.quantiles));
    }
    if (entries.empty()) throw ValidationError("no trained artifacts to evaluate; run train first");

    const EvalReport report = assemble_report(std::move(entries));
    detail::write_text_file(paths::report_csv(config), report_to_csv(report));
    detail::write_text_file(paths::report_txt(config), report_to_text(report));
    record_file(m, config, paths::report_csv(config), "evaluate");
    record_file(m, config, paths::report_txt(config), "evaluate");

    std::size_t scored = 0;
    for (const auto& v : ed.actual) scored += v.has_value();
    m.doc["evaluate"] = {{"metrics", metrics},
                         {"skipped_models", skipped},
                         {"test_hours", ed.test_timestamps.size()},
                         {"scored_hours", scored},
                         {"completed_at", now_iso()}};
    m.save(config.output_dir);
    return report;
}

std::string cmd_report(const PipelineConfig& config) {
    const fs::path p = paths::report_csv(config);
    if (!fs::exists(p)) throw ValidationError("no report at " + p.string() + "; run evaluate first");
    const std::string text = report_to_text(report_from_csv(detail::read_text_file(p)));
    detail::write_text_file(paths::report_txt(config), text);
    return text;
}

}  // namespace loadfc
