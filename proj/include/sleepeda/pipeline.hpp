#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sleepeda/actigraphy.hpp"
#include "sleepeda/dataset.hpp"
#include "sleepeda/eda_features.hpp"
#include "sleepeda/errors.hpp"
#include "sleepeda/factors.hpp"
#include "sleepeda/ingest.hpp"
#include "sleepeda/predictors.hpp"
#include "sleepeda/search.hpp"
#include "sleepeda/sem.hpp"
#include "sleepeda/synth.hpp"

namespace sleepeda {

inline constexpr std::string_view kVersion = "1.0.0";
inline constexpr int kReportSchemaVersion = 1;

using OrderedJson = nlohmann::ordered_json;

// A stage failure pins the failing stage and the process exit code the CLI
// should return: 2 config, 3 data, 4 numerical.
struct StageFailure : Error {
    std::string stage;
    int exit_code;
    StageFailure(std::string stage_name, int code, const std::string& message)
        : Error("[" + stage_name + "] " + message),
          stage(std::move(stage_name)),
          exit_code(code) {}
};

struct ActivityConfig {
    double epoch_len_s = 30.0;
    double count_gain = 100.0;
};

struct CvConfig {
    int folds = 10;
};

struct PipelineConfig {
    std::string traces_dir;
    std::string report_log;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    double utc_offset_s = 0.0;
    std::string search_over = "scores";  // "scores" or "features"
    FeatureConfig features;
    ActivityConfig activity;
    ColeWeights cole;
    ScoreConfig score;
    EfaOptions efa;
    CvConfig cv;
    SemOptions sem;
};

inline OrderedJson default_config_json() {
    OrderedJson j;
    j["traces"] = "";
    j["reports"] = "";
    j["out"] = "";
    j["seed"] = nullptr;
    j["utc_offset_s"] = 0.0;
    j["search_over"] = "scores";
    j["features"] = {{"smoothing_window_s", 2.0},
                     {"min_amplitude_us", 0.05},
                     {"min_rise_rate_us_per_s", 0.01},
                     {"epoch_len_s", 30.0},
                     {"storm_min_epochs", 2}};
    j["activity"] = {{"epoch_len_s", 30.0}, {"count_gain", 100.0}};
    j["cole"] = {{"scale", 1e-5},
                 {"weights", {404.0, 598.0, 326.0, 441.0, 1408.0, 508.0, 350.0}}};
    j["score"] = {{"penalty_discount", 1.0},
                  {"structure_prior", 1.0},
                  {"pooled_cell_fallback", false}};
    j["efa"] = {{"promax_power", 4}, {"tolerance", 1e-7}, {"max_iterations", 500}};
    j["cv"] = {{"folds", 10}};
    j["sem"] = {{"binary_latent_scale", true},
                {"gradient_tolerance", 1e-6},
                {"max_iterations", 1000}};
    return j;
}

namespace pipeline_detail {

inline void expect_keys(const OrderedJson& obj, const std::string& where,
                        const std::set<std::string>& allowed) {
    if (!obj.is_object())
        throw ConfigError("config section '" + where + "' must be an object");
    for (const auto& item : obj.items())
        if (!allowed.count(item.key()))
            throw ConfigError("unknown config key '" +
                              (where.empty() ? item.key() : where + "." + item.key()) + "'");
}

inline double number_field(const OrderedJson& obj, const std::string& where,
                           const std::string& key, double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj.at(key).is_number())
        throw ConfigError("config key '" + where + key + "' must be a number");
    return obj.at(key).get<double>();
}

inline int int_field(const OrderedJson& obj, const std::string& where,
                     const std::string& key, int fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj.at(key).is_number_integer())
        throw ConfigError("config key '" + where + key + "' must be an integer");
    return obj.at(key).get<int>();
}

inline bool bool_field(const OrderedJson& obj, const std::string& where,
                       const std::string& key, bool fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj.at(key).is_boolean())
        throw ConfigError("config key '" + where + key + "' must be true or false");
    return obj.at(key).get<bool>();
}

inline std::string string_field(const OrderedJson& obj, const std::string& where,
                                const std::string& key, const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj.at(key).is_string())
        throw ConfigError("config key '" + where + key + "' must be a string");
    return obj.at(key).get<std::string>();
}

}  // namespace pipeline_detail

// Strict parse: unknown keys are config errors so option typos fail loudly.
inline PipelineConfig parse_pipeline_config(const OrderedJson& j) {
    using namespace pipeline_detail;
    expect_keys(j, "",
                {"traces", "reports", "out", "seed", "utc_offset_s", "search_over",
                 "features", "activity", "cole", "score", "efa", "cv", "sem"});
    PipelineConfig c;
    c.traces_dir = string_field(j, "", "traces", "");
    c.report_log = string_field(j, "", "reports", "");
    c.out_dir = string_field(j, "", "out", "");
    if (j.contains("seed") && !j.at("seed").is_null()) {
        if (!j.at("seed").is_number_integer() ||
            (j.at("seed").is_number_integer() && j.at("seed").get<long long>() < 0))
            throw ConfigError("config key 'seed' must be a non-negative integer");
        c.seed = j.at("seed").get<std::uint64_t>();
        c.seed_set = true;
    }
    c.utc_offset_s = number_field(j, "", "utc_offset_s", 0.0);
    c.search_over = string_field(j, "", "search_over", "scores");

    if (j.contains("features")) {
        const auto& f = j.at("features");
        expect_keys(f, "features",
                    {"smoothing_window_s", "min_amplitude_us", "min_rise_rate_us_per_s",
                     "epoch_len_s", "storm_min_epochs"});
        c.features.smoothing_window_s =
            number_field(f, "features.", "smoothing_window_s", c.features.smoothing_window_s);
        c.features.min_amplitude_us =
            number_field(f, "features.", "min_amplitude_us", c.features.min_amplitude_us);
        c.features.min_rise_rate_us_per_s = number_field(
            f, "features.", "min_rise_rate_us_per_s", c.features.min_rise_rate_us_per_s);
        c.features.epoch_len_s =
            number_field(f, "features.", "epoch_len_s", c.features.epoch_len_s);
        c.features.storm_min_epochs =
            int_field(f, "features.", "storm_min_epochs", c.features.storm_min_epochs);
    }
    if (j.contains("activity")) {
        const auto& a = j.at("activity");
        expect_keys(a, "activity", {"epoch_len_s", "count_gain"});
        c.activity.epoch_len_s =
            number_field(a, "activity.", "epoch_len_s", c.activity.epoch_len_s);
        c.activity.count_gain =
            number_field(a, "activity.", "count_gain", c.activity.count_gain);
    }
    if (j.contains("cole")) {
        const auto& k = j.at("cole");
        expect_keys(k, "cole", {"scale", "weights"});
        c.cole.scale = number_field(k, "cole.", "scale", c.cole.scale);
        if (k.contains("weights")) {
            const auto& w = k.at("weights");
            if (!w.is_array() || w.size() != 7)
                throw ConfigError("config key 'cole.weights' must be an array of 7 numbers");
            for (std::size_t i = 0; i < 7; ++i) {
                if (!w[i].is_number())
                    throw ConfigError("config key 'cole.weights' must be an array of 7 numbers");
                c.cole.w[i] = w[i].get<double>();
            }
        }
    }
    if (j.contains("score")) {
        const auto& s = j.at("score");
        expect_keys(s, "score", {"penalty_discount", "structure_prior", "pooled_cell_fallback"});
        c.score.penalty_discount =
            number_field(s, "score.", "penalty_discount", c.score.penalty_discount);
        c.score.structure_prior =
            number_field(s, "score.", "structure_prior", c.score.structure_prior);
        c.score.pooled_cell_fallback =
            bool_field(s, "score.", "pooled_cell_fallback", c.score.pooled_cell_fallback);
    }
    if (j.contains("efa")) {
        const auto& e = j.at("efa");
        expect_keys(e, "efa", {"promax_power", "tolerance", "max_iterations"});
        c.efa.promax_power = int_field(e, "efa.", "promax_power", c.efa.promax_power);
        c.efa.tolerance = number_field(e, "efa.", "tolerance", c.efa.tolerance);
        c.efa.max_iterations = int_field(e, "efa.", "max_iterations", c.efa.max_iterations);
    }
    if (j.contains("cv")) {
        const auto& v = j.at("cv");
        expect_keys(v, "cv", {"folds"});
        c.cv.folds = int_field(v, "cv.", "folds", c.cv.folds);
    }
    if (j.contains("sem")) {
        const auto& s = j.at("sem");
        expect_keys(s, "sem", {"binary_latent_scale", "gradient_tolerance", "max_iterations"});
        c.sem.binary_latent_scale =
            bool_field(s, "sem.", "binary_latent_scale", c.sem.binary_latent_scale);
        c.sem.gradient_tolerance =
            number_field(s, "sem.", "gradient_tolerance", c.sem.gradient_tolerance);
        c.sem.max_iterations = int_field(s, "sem.", "max_iterations", c.sem.max_iterations);
    }
    return c;
}

// Recursive object merge; scalars and arrays in `overlay` replace outright.
inline void deep_merge(OrderedJson& base, const OrderedJson& overlay) {
    if (!base.is_object() || !overlay.is_object()) {
        base = overlay;
        return;
    }
    for (const auto& item : overlay.items()) {
        if (base.contains(item.key()) && base[item.key()].is_object() &&
            item.value().is_object())
            deep_merge(base[item.key()], item.value());
        else
            base[item.key()] = item.value();
    }
}

// `--set a.b.c=value`; the value is taken as a JSON literal when it parses as
// one and as a bare string otherwise.
inline void apply_config_override(OrderedJson& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("--set expects key=value, got '" + assignment + "'");
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    OrderedJson value = OrderedJson::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    OrderedJson* node = &config;
    std::size_t pos = 0;
    for (;;) {
        const auto dot = path.find('.', pos);
        const std::string key =
            path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (key.empty())
            throw ConfigError("--set key has an empty segment: '" + path + "'");
        if (dot == std::string::npos) {
            if (!node->is_object()) *node = OrderedJson::object();
            (*node)[key] = value;
            return;
        }
        if (!node->is_object()) *node = OrderedJson::object();
        node = &(*node)[key];
        pos = dot + 1;
    }
}

enum class Stage { Ingest = 0, Extract, Efa, Search, Sem, Predict };

inline bool stage_reached(Stage completed, Stage wanted) {
    return static_cast<int>(completed) >= static_cast<int>(wanted);
}

struct NightRow {
    std::string participant_id;
    Date night_date{};
    EdaFeatureVector features;
    double se_selfreport = 0.0;
    double se_sensor = 0.0;
    int sq_rating = 0;
    int sq_binary = 0;
};

struct EvalCell {
    std::string model;    // "ols" | "logistic" | "naive_bayes"
    std::string variant;  // "with_eda" | "se_only"
    std::string target;   // "se" | "sq"
    std::vector<std::string> regressors;
    EvalReport report;
};

struct RunReport {
    Stage completed = Stage::Ingest;
    std::vector<std::string> warnings;
    std::vector<NightRow> nights;
    std::vector<std::string> feature_names;
    FactorSolution efa;
    std::vector<std::string> factor_names;
    Eigen::MatrixXd scores;  // nights x k, Thomson regression scores
    MixedDataset search_data;
    FgsResult graph;
    std::map<std::string, std::vector<std::string>> blankets;
    PathModelSpec sem_spec;
    SemFit sem;
    std::vector<EvalCell> eval;
};

namespace pipeline_detail {

template <typename F>
auto run_stage(const std::string& stage, int exit_code, F&& body) {
    try {
        return body();
    } catch (const StageFailure&) {
        throw;
    } catch (const std::exception& e) {
        throw StageFailure(stage, exit_code, e.what());
    }
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

// Factors take the name of their dominant-loading feature's block: the storm
// counter marks the storm factor, anything else the magnitude factor.
inline std::vector<std::string> name_factors(const FactorSolution& efa) {
    std::vector<std::string> names;
    for (int j = 0; j < efa.k; ++j) {
        Eigen::Index best = 0;
        efa.loadings.col(j).cwiseAbs().maxCoeff(&best);
        const std::string base =
            efa.feature_names[static_cast<std::size_t>(best)] == "storm_count" ? "storms"
                                                                               : "magnitude";
        std::string name = base;
        for (int suffix = 2;
             std::find(names.begin(), names.end(), name) != names.end(); ++suffix)
            name = base + "_" + std::to_string(suffix);
        names.push_back(name);
    }
    return names;
}

inline std::vector<std::pair<std::string, std::string>> dag_edges(const Dag& dag) {
    std::vector<std::pair<std::string, std::string>> edges;
    for (std::size_t child = 0; child < dag.nodes.size(); ++child)
        for (int parent : dag.parents[child])
            edges.push_back({dag.nodes[static_cast<std::size_t>(parent)], dag.nodes[child]});
    std::sort(edges.begin(), edges.end());
    return edges;
}

// Rebuilds the searched structure as a fittable path model. Factor-score
// nodes become latents measured by their dominant-loading features; when the
// search ran over raw features everything stays observed.
inline PathModelSpec searched_path_spec(const RunReport& r, const std::string& search_over) {
    PathModelSpec spec;
    const auto edges = dag_edges(r.graph.dag);
    if (search_over == "features") {
        spec.edges = edges;
        spec.observed = r.graph.dag.nodes;
        return spec;
    }

    std::vector<std::vector<std::string>> indicators(static_cast<std::size_t>(r.efa.k));
    for (std::size_t i = 0; i < r.efa.feature_names.size(); ++i) {
        Eigen::Index best = 0;
        r.efa.loadings.row(static_cast<Eigen::Index>(i)).cwiseAbs().maxCoeff(&best);
        indicators[static_cast<std::size_t>(best)].push_back(r.efa.feature_names[i]);
    }
    std::set<std::string> kept;
    for (int j = 0; j < r.efa.k; ++j)
        if (!indicators[static_cast<std::size_t>(j)].empty()) {
            spec.latents.push_back(
                {r.factor_names[static_cast<std::size_t>(j)],
                 indicators[static_cast<std::size_t>(j)]});
            kept.insert(r.factor_names[static_cast<std::size_t>(j)]);
        }
    auto dropped = [&](const std::string& v) {
        return std::find(r.factor_names.begin(), r.factor_names.end(), v) !=
                   r.factor_names.end() &&
               kept.count(v) == 0;
    };
    for (const auto& e : edges)
        if (!dropped(e.first) && !dropped(e.second)) spec.edges.push_back(e);
    spec.observed = {"se", "sq"};
    return spec;
}

}  // namespace pipeline_detail

inline RunReport run_pipeline_stages(const PipelineConfig& config,
                                     Stage upto = Stage::Predict) {
    namespace fs = std::filesystem;
    using pipeline_detail::run_stage;
    RunReport out;

    run_stage("config", 2, [&] {
        if (!config.seed_set)
            throw ConfigError("a seed is required (--seed or config \"seed\")");
        if (config.traces_dir.empty())
            throw ConfigError("config needs \"traces\" (trace directory)");
        if (config.report_log.empty())
            throw ConfigError("config needs \"reports\" (report log path)");
        if (!fs::exists(config.traces_dir))
            throw ConfigError("input path does not exist: '" + config.traces_dir + "'");
        if (!fs::exists(config.report_log))
            throw ConfigError("input path does not exist: '" + config.report_log + "'");
        check_config(config.features);
        if (config.search_over != "scores" && config.search_over != "features")
            throw ConfigError("search_over must be \"scores\" or \"features\"");
        if (config.cv.folds < 2) throw ConfigError("cv.folds must be at least 2");
        return 0;
    });

    std::vector<NightSession> sessions;
    run_stage("ingest", 3, [&] {
        std::vector<std::string> rel_paths;
        for (const auto& entry : fs::recursive_directory_iterator(config.traces_dir)) {
            if (!entry.is_regular_file()) continue;
            const std::string name = entry.path().filename().string();
            if (name != "EDA.csv" && name != "ACC.csv") continue;
            rel_paths.push_back(
                fs::relative(entry.path(), config.traces_dir).generic_string());
        }
        std::sort(rel_paths.begin(), rel_paths.end());

        std::vector<KeyedTrace> traces;
        for (const auto& rel : rel_paths) {
            try {
                const TracePathInfo info = parse_trace_path(rel);
                const std::string bytes = pipeline_detail::read_text_file(
                    (fs::path(config.traces_dir) / rel).string());
                for (auto& trace : parse_channel_file(bytes, info.file_kind))
                    traces.push_back(
                        KeyedTrace{info.participant_id, info.night_date, std::move(trace)});
            } catch (const StageFailure&) {
                throw;
            } catch (const Error& e) {
                throw ParseError("'" + rel + "': " + e.what());
            }
        }
        const std::vector<NightReport> reports =
            parse_report_log(pipeline_detail::read_text_file(config.report_log));
        AssembleOptions opts;
        opts.utc_offset_s = config.utc_offset_s;
        AssembleResult assembled = assemble_sessions(traces, reports, opts);
        out.warnings = std::move(assembled.warnings);
        sessions = std::move(assembled.sessions);
        if (sessions.empty())
            throw ValidationError("no complete nights assembled from '" +
                                  config.traces_dir + "'");
        return 0;
    });
    out.completed = Stage::Ingest;
    if (upto == Stage::Ingest) return out;

    run_stage("extract", 3, [&] {
        for (const auto& s : sessions) {
            NightRow row;
            row.participant_id = s.participant_id;
            row.night_date = s.night_date;
            row.features = extract_night_features(s, config.features);
            const ActivityCounts counts =
                activity_counts(s.acc_x, s.acc_y, s.acc_z, config.activity.epoch_len_s,
                                config.activity.count_gain);
            row.se_sensor = sensor_sleep_efficiency(cole_sleep_wake(counts, config.cole));
            row.se_selfreport = sleep_efficiency(s.report);
            row.sq_rating = s.report.sq_rating;
            row.sq_binary = sq_binarize(s.report.sq_rating) == SqClass::Good ? 1 : 0;
            out.nights.push_back(std::move(row));
        }
        return 0;
    });
    out.completed = Stage::Extract;
    if (upto == Stage::Extract) return out;

    out.feature_names = feature_column_names();
    const auto n = static_cast<Eigen::Index>(out.nights.size());
    StandardizedMatrix z;
    run_stage("efa", 4, [&] {
        Eigen::MatrixXd features(n, 6);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& f = out.nights[static_cast<std::size_t>(i)].features;
            features(i, 0) = static_cast<double>(f.peak_epoch_count);
            features(i, 1) = static_cast<double>(f.storm_count);
            features(i, 2) = f.storm_mean;
            features(i, 3) = f.storm_sd;
            features(i, 4) = f.storm_max;
            features(i, 5) = static_cast<double>(f.peak_count);
        }
        z = standardize(out.feature_names, features);
        out.efa = efa_fit(z, config.efa);
        out.scores = factor_scores(z, out.efa);
        out.factor_names = pipeline_detail::name_factors(out.efa);
        return 0;
    });
    out.completed = Stage::Efa;
    if (upto == Stage::Efa) return out;

    std::vector<double> se_column, sq_column;
    for (const auto& row : out.nights) {
        se_column.push_back(row.se_selfreport);
        sq_column.push_back(static_cast<double>(row.sq_binary));
    }

    run_stage("search", 4, [&] {
        MixedDataset d;
        if (config.search_over == "scores") {
            for (int j = 0; j < out.efa.k; ++j) {
                std::vector<double> col(static_cast<std::size_t>(n));
                for (Eigen::Index i = 0; i < n; ++i)
                    col[static_cast<std::size_t>(i)] = out.scores(i, j);
                d.add_column(out.factor_names[static_cast<std::size_t>(j)],
                             ColumnKind::Continuous, std::move(col));
            }
        } else {
            for (std::size_t j = 0; j < out.feature_names.size(); ++j) {
                std::vector<double> col(static_cast<std::size_t>(n));
                for (Eigen::Index i = 0; i < n; ++i)
                    col[static_cast<std::size_t>(i)] = z.values(i, static_cast<Eigen::Index>(j));
                d.add_column(out.feature_names[j], ColumnKind::Continuous, std::move(col));
            }
        }
        d.add_column("se", ColumnKind::Continuous, se_column);
        d.add_column("sq", ColumnKind::Discrete, sq_column);
        check_dataset(d);
        out.search_data = d;
        out.graph = fgs_search(d, config.score);
        for (const char* node : {"se", "sq"}) {
            const auto blanket = fgs_markov_blanket(out.graph, node);
            out.blankets[node] = std::vector<std::string>(blanket.begin(), blanket.end());
        }
        return 0;
    });
    out.completed = Stage::Search;
    if (upto == Stage::Search) return out;

    run_stage("sem", 4, [&] {
        MixedDataset d;
        for (std::size_t j = 0; j < out.feature_names.size(); ++j) {
            std::vector<double> col(static_cast<std::size_t>(n));
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto& f = out.nights[static_cast<std::size_t>(i)].features;
                const double values[6] = {static_cast<double>(f.peak_epoch_count),
                                          static_cast<double>(f.storm_count),
                                          f.storm_mean,
                                          f.storm_sd,
                                          f.storm_max,
                                          static_cast<double>(f.peak_count)};
                col[static_cast<std::size_t>(i)] = values[j];
            }
            d.add_column(out.feature_names[j], ColumnKind::Continuous, std::move(col));
        }
        d.add_column("se", ColumnKind::Continuous, se_column);
        d.add_column("sq", ColumnKind::Discrete, sq_column);
        out.sem_spec = pipeline_detail::searched_path_spec(out, config.search_over);
        out.sem = fit_path_model(out.sem_spec, d, config.sem);
        return 0;
    });
    out.completed = Stage::Sem;
    if (upto == Stage::Sem) return out;

    run_stage("predict", 4, [&] {
        const auto rows = static_cast<std::size_t>(n);
        double mean = 0.0;
        for (double v : se_column) mean += v;
        mean /= static_cast<double>(rows);
        double var = 0.0;
        for (double v : se_column) var += (v - mean) * (v - mean);
        var /= static_cast<double>(rows - 1);
        if (!(var > 0.0)) throw DomainError("se column has zero variance");
        std::vector<double> se_std(rows);
        for (std::size_t i = 0; i < rows; ++i)
            se_std[i] = (se_column[i] - mean) / std::sqrt(var);

        std::map<std::string, std::vector<double>> columns;
        columns["se"] = se_std;
        columns["sq"] = sq_column;
        for (int j = 0; j < out.efa.k; ++j) {
            std::vector<double> col(rows);
            for (Eigen::Index i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = out.scores(i, j);
            columns[out.factor_names[static_cast<std::size_t>(j)]] = std::move(col);
        }
        for (std::size_t j = 0; j < out.feature_names.size(); ++j) {
            std::vector<double> col(rows);
            for (Eigen::Index i = 0; i < n; ++i)
                col[static_cast<std::size_t>(i)] = z.values(i, static_cast<Eigen::Index>(j));
            columns[out.feature_names[j]] = std::move(col);
        }

        auto with_eda = [&](const std::string& target) {
            std::vector<std::string> regs = out.blankets.at(target);
            for (const auto& f : out.factor_names)
                if (std::find(regs.begin(), regs.end(), f) == regs.end()) regs.push_back(f);
            return regs;
        };
        auto gather = [&](const std::vector<std::string>& names) {
            std::vector<std::vector<double>> cols;
            for (const auto& name : names) cols.push_back(columns.at(name));
            return cols;
        };

        struct Plan {
            ModelKind kind;
            const char* model;
            const char* target;
            const char* variant;
            std::vector<std::string> regressors;
        };
        const std::vector<Plan> plans = {
            {ModelKind::Ols, "ols", "se", "with_eda", with_eda("se")},
            {ModelKind::Ols, "ols", "se", "se_only", out.factor_names},
            {ModelKind::Logistic, "logistic", "sq", "with_eda", with_eda("sq")},
            {ModelKind::Logistic, "logistic", "sq", "se_only", {"se"}},
            {ModelKind::NaiveBayes, "naive_bayes", "sq", "with_eda", with_eda("sq")},
            {ModelKind::NaiveBayes, "naive_bayes", "sq", "se_only", {"se"}},
        };
        for (const auto& plan : plans) {
            EvalCell cell;
            cell.model = plan.model;
            cell.variant = plan.variant;
            cell.target = plan.target;
            cell.regressors = plan.regressors;
            const auto& y = std::string(plan.target) == "se" ? se_std : sq_column;
            cell.report = cross_validate(plan.kind, y, gather(plan.regressors),
                                         config.cv.folds, config.seed);
            out.eval.push_back(std::move(cell));
        }
        return 0;
    });
    out.completed = Stage::Predict;
    return out;
}

namespace pipeline_detail {

inline OrderedJson matrix_json(const Eigen::MatrixXd& m) {
    OrderedJson rows = OrderedJson::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        OrderedJson row = OrderedJson::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline OrderedJson vector_json(const Eigen::VectorXd& v) {
    OrderedJson out = OrderedJson::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

inline OrderedJson nights_json(const RunReport& r) {
    OrderedJson nights = OrderedJson::array();
    for (const auto& row : r.nights) {
        OrderedJson night;
        night["participant_id"] = row.participant_id;
        night["night_date"] = format_date(row.night_date);
        night["peak_epoch_count"] = row.features.peak_epoch_count;
        night["storm_count"] = row.features.storm_count;
        night["storm_mean"] = row.features.storm_mean;
        night["storm_sd"] = row.features.storm_sd;
        night["storm_max"] = row.features.storm_max;
        night["peak_count"] = row.features.peak_count;
        night["se_selfreport"] = row.se_selfreport;
        night["se_sensor"] = row.se_sensor;
        night["sq_rating"] = row.sq_rating;
        night["sq_binary"] = row.sq_binary;
        nights.push_back(std::move(night));
    }
    return nights;
}

inline OrderedJson efa_json(const RunReport& r) {
    OrderedJson j;
    j["k"] = r.efa.k;
    j["factor_names"] = r.factor_names;
    j["feature_names"] = r.efa.feature_names;
    j["eigenvalues"] = vector_json(r.efa.eigenvalues);
    j["loadings"] = matrix_json(r.efa.loadings);
    j["unrotated_loadings"] = matrix_json(r.efa.unrotated_loadings);
    j["uniquenesses"] = vector_json(r.efa.uniquenesses);
    j["factor_correlations"] = matrix_json(r.efa.factor_correlations);
    j["variance_explained"] = vector_json(r.efa.variance_explained);
    j["heywood"] = r.efa.heywood;
    j["converged"] = r.efa.converged;
    j["iterations"] = r.efa.iterations;
    return j;
}

inline OrderedJson graph_json(const RunReport& r) {
    OrderedJson j;
    j["nodes"] = r.graph.cpdag.nodes;
    OrderedJson edges = OrderedJson::array();
    const auto& g = r.graph.cpdag;
    const int p = static_cast<int>(g.size());
    for (int a = 0; a < p; ++a)
        for (int b = 0; b < p; ++b) {
            if (g.has_directed(a, b)) {
                OrderedJson e;
                e["from"] = g.nodes[static_cast<std::size_t>(a)];
                e["to"] = g.nodes[static_cast<std::size_t>(b)];
                e["directed"] = true;
                edges.push_back(std::move(e));
            }
            if (a < b && g.has_undirected(a, b)) {
                OrderedJson e;
                e["from"] = g.nodes[static_cast<std::size_t>(a)];
                e["to"] = g.nodes[static_cast<std::size_t>(b)];
                e["directed"] = false;
                edges.push_back(std::move(e));
            }
        }
    j["edges"] = std::move(edges);
    j["edge_list"] = to_edge_list(r.graph.cpdag);
    OrderedJson dag;
    OrderedJson dag_edge_array = OrderedJson::array();
    for (const auto& [from, to] : dag_edges(r.graph.dag)) {
        OrderedJson e;
        e["from"] = from;
        e["to"] = to;
        dag_edge_array.push_back(std::move(e));
    }
    dag["edges"] = std::move(dag_edge_array);
    dag["edge_list"] = to_edge_list(r.graph.dag);
    j["dag"] = std::move(dag);
    j["score"] = r.graph.score;
    j["insert_count"] = r.graph.insert_count;
    j["delete_count"] = r.graph.delete_count;
    j["used_pooled_fallback"] = r.graph.used_pooled_fallback;
    return j;
}

inline OrderedJson blankets_json(const RunReport& r) {
    OrderedJson j;
    for (const auto& [node, blanket] : r.blankets) j[node] = blanket;
    return j;
}

inline OrderedJson sem_json(const RunReport& r) {
    OrderedJson spec;
    OrderedJson latents = OrderedJson::array();
    for (const auto& [name, indicators] : r.sem_spec.latents) {
        OrderedJson l;
        l["name"] = name;
        l["indicators"] = indicators;
        latents.push_back(std::move(l));
    }
    spec["latents"] = std::move(latents);
    OrderedJson edges = OrderedJson::array();
    for (const auto& [from, to] : r.sem_spec.edges) {
        OrderedJson e;
        e["from"] = from;
        e["to"] = to;
        edges.push_back(std::move(e));
    }
    spec["edges"] = std::move(edges);
    spec["observed"] = r.sem_spec.observed;

    OrderedJson j;
    j["spec"] = std::move(spec);
    OrderedJson params = OrderedJson::array();
    for (const auto& p : r.sem.parameters) {
        OrderedJson e;
        e["kind"] = p.kind;
        e["from"] = p.from;
        e["to"] = p.to;
        e["estimate"] = p.estimate;
        e["standardized"] = p.standardized;
        e["std_error"] = p.std_error;
        e["z"] = p.z;
        e["p_value"] = p.p_value;
        e["fixed"] = p.fixed;
        params.push_back(std::move(e));
    }
    j["parameters"] = std::move(params);
    j["chi_square"] = r.sem.chi_square;
    j["df"] = r.sem.df;
    j["p_value"] = r.sem.p_value;
    j["rmsea"] = r.sem.rmsea;
    j["cfi"] = r.sem.cfi;
    j["chi_square_baseline"] = r.sem.chi_square_baseline;
    j["df_baseline"] = r.sem.df_baseline;
    j["discrepancy"] = r.sem.discrepancy;
    j["free_parameters"] = r.sem.free_parameter_count;
    j["converged"] = r.sem.converged;
    j["iterations"] = r.sem.iterations;
    j["latent_scale_applied"] = r.sem.latent_scale_applied;
    j["observed_names"] = r.sem.observed_names;
    return j;
}

inline OrderedJson eval_cell_json(const EvalCell& cell) {
    OrderedJson j;
    j["target"] = cell.target;
    j["regressors"] = cell.regressors;
    j["seed"] = cell.report.seed;
    j["rmse"] = cell.report.rmse;
    j["mae"] = cell.report.mae;
    j["auc"] = cell.report.auc;
    j["f1"] = cell.report.f1;
    j["precision"] = cell.report.precision;
    j["recall"] = cell.report.recall;
    OrderedJson folds = OrderedJson::array();
    for (const auto& fold : cell.report.folds) {
        OrderedJson f;
        f["fold"] = fold.fold;
        f["test_size"] = fold.test_size;
        f["rmse"] = fold.rmse;
        f["mae"] = fold.mae;
        f["auc"] = fold.auc;
        folds.push_back(std::move(f));
    }
    j["folds"] = std::move(folds);
    j["pooled_predictions"] = cell.report.pooled_predictions;
    return j;
}

inline OrderedJson eval_json(const RunReport& r) {
    OrderedJson j;
    for (const auto& cell : r.eval) {
        const std::string group = cell.model + "_" + cell.target;
        j[group][cell.variant] = eval_cell_json(cell);
    }
    return j;
}

}  // namespace pipeline_detail

inline OrderedJson build_report_json(const OrderedJson& config_echo, const RunReport& r) {
    using namespace pipeline_detail;
    OrderedJson j;
    j["schema_version"] = kReportSchemaVersion;
    j["software_version"] = std::string(kVersion);
    j["config"] = config_echo;
    j["warnings"] = r.warnings;
    if (stage_reached(r.completed, Stage::Extract)) j["nights"] = nights_json(r);
    if (stage_reached(r.completed, Stage::Efa)) j["efa"] = efa_json(r);
    if (stage_reached(r.completed, Stage::Search)) {
        j["graph"] = graph_json(r);
        j["markov_blankets"] = blankets_json(r);
    }
    if (stage_reached(r.completed, Stage::Sem)) j["sem"] = sem_json(r);
    if (stage_reached(r.completed, Stage::Predict)) j["eval"] = eval_json(r);
    return j;
}

namespace pipeline_detail {

inline std::string fmt(double v, const char* spec = "%.4f") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

}  // namespace pipeline_detail

inline std::string build_report_markdown(const RunReport& r) {
    using pipeline_detail::fmt;
    std::string md = "# Sleep analytics report\n\n";
    md += "- software version: " + std::string(kVersion) + "\n";
    md += "- nights analyzed: " + std::to_string(r.nights.size()) + "\n";
    md += "- warnings: " + std::to_string(r.warnings.size()) + "\n\n";
    for (const auto& w : r.warnings) md += "> warning: " + w + "\n";
    if (!r.warnings.empty()) md += "\n";

    if (stage_reached(r.completed, Stage::Efa)) {
        md += "## Factor analysis\n\n";
        md += "Retained " + std::to_string(r.efa.k) + " factor(s) by the eigenvalue-above-1 rule.\n\n";
        md += "| feature |";
        for (const auto& f : r.factor_names) md += " " + f + " |";
        md += " uniqueness |\n|---|";
        for (std::size_t j = 0; j < r.factor_names.size(); ++j) md += "---|";
        md += "---|\n";
        for (std::size_t i = 0; i < r.efa.feature_names.size(); ++i) {
            md += "| " + r.efa.feature_names[i] + " |";
            for (int j = 0; j < r.efa.k; ++j)
                md += " " + fmt(r.efa.loadings(static_cast<Eigen::Index>(i), j)) + " |";
            md += " " + fmt(r.efa.uniquenesses(static_cast<Eigen::Index>(i))) + " |\n";
        }
        md += "\nVariance explained:";
        for (int j = 0; j < r.efa.k; ++j)
            md += " " + fmt(100.0 * r.efa.variance_explained(j), "%.1f") + "%";
        md += "\n\n";
    }

    if (stage_reached(r.completed, Stage::Search)) {
        md += "## Causal structure search\n\n";
        md += "Score " + fmt(r.graph.score, "%.6f") + " after " +
              std::to_string(r.graph.insert_count) + " insertion(s) and " +
              std::to_string(r.graph.delete_count) + " deletion(s).\n\n```\n" +
              to_edge_list(r.graph.cpdag) + "```\n\n";
        md += "Markov blankets:\n\n";
        for (const auto& [node, blanket] : r.blankets) {
            md += "- " + node + ": {";
            for (std::size_t i = 0; i < blanket.size(); ++i)
                md += (i ? ", " : "") + blanket[i];
            md += "}\n";
        }
        md += "\n";
    }

    if (stage_reached(r.completed, Stage::Sem)) {
        md += "## Path model\n\n```\n" + sem_table(r.sem) + "```\n\n";
    }

    if (stage_reached(r.completed, Stage::Predict)) {
        md += "## Cross-validated prediction\n\n";
        md += "| model | variant | target | auc | f1 | precision | recall | rmse | mae |\n";
        md += "|---|---|---|---|---|---|---|---|---|\n";
        for (const auto& cell : r.eval) {
            md += "| " + cell.model + " | " + cell.variant + " | " + cell.target + " | " +
                  fmt(cell.report.auc) + " | " + fmt(cell.report.f1) + " | " +
                  fmt(cell.report.precision) + " | " + fmt(cell.report.recall) + " | " +
                  fmt(cell.report.rmse) + " | " + fmt(cell.report.mae) + " |\n";
        }
        md += "\n";
    }
    return md;
}

namespace pipeline_detail {

inline std::string features_csv(const RunReport& r) {
    std::string out = std::string(kFeatureCsvHeader) + "\n";
    for (const auto& row : r.nights)
        out += feature_csv_row(row.participant_id, row.night_date, row.features) + "\n";
    return out;
}

inline std::string targets_csv(const RunReport& r) {
    std::string out = std::string(kTargetCsvHeader) + "\n";
    for (const auto& row : r.nights)
        out += target_csv_row(row.participant_id, row.night_date, row.se_selfreport,
                              row.se_sensor,
                              row.sq_binary ? SqClass::Good : SqClass::Poor) +
               "\n";
    return out;
}

inline std::string metrics_csv(const RunReport& r) {
    std::string out = "model,variant,target,fold,test_size,rmse,mae,auc\n";
    for (const auto& cell : r.eval)
        for (const auto& fold : cell.report.folds)
            out += cell.model + "," + cell.variant + "," + cell.target + "," +
                   std::to_string(fold.fold) + "," + std::to_string(fold.test_size) + "," +
                   format_double(fold.rmse) + "," + format_double(fold.mae) + "," +
                   format_double(fold.auc) + "\n";
    return out;
}

inline std::string loadings_csv(const RunReport& r) {
    std::string out = "feature,factor,loading\n";
    for (std::size_t i = 0; i < r.efa.feature_names.size(); ++i)
        for (int j = 0; j < r.efa.k; ++j)
            out += r.efa.feature_names[i] + "," +
                   r.factor_names[static_cast<std::size_t>(j)] + "," +
                   format_double(r.efa.loadings(static_cast<Eigen::Index>(i), j)) + "\n";
    return out;
}

// Staircase of (false positive rate, true positive rate) points swept over
// descending score thresholds, tied scores grouped.
inline std::vector<std::pair<double, double>> roc_points(const std::vector<double>& scores,
                                                         const std::vector<double>& labels) {
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    double positives = 0.0, negatives = 0.0;
    for (double label : labels) (label == 1.0 ? positives : negatives) += 1.0;

    std::vector<std::pair<double, double>> points = {{0.0, 0.0}};
    double tp = 0.0, fp = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double threshold = scores[order[i]];
        for (; i < order.size() && scores[order[i]] == threshold; ++i)
            (labels[order[i]] == 1.0 ? tp : fp) += 1.0;
        points.push_back({negatives > 0.0 ? fp / negatives : 0.0,
                          positives > 0.0 ? tp / positives : 0.0});
    }
    return points;
}

inline std::string roc_csv(const RunReport& r) {
    std::string out = "model,variant,fpr,tpr\n";
    std::vector<double> labels;
    for (const auto& row : r.nights) labels.push_back(static_cast<double>(row.sq_binary));
    for (const auto& cell : r.eval) {
        if (cell.target != "sq") continue;
        for (const auto& [fpr, tpr] : roc_points(cell.report.pooled_predictions, labels))
            out += cell.model + "," + cell.variant + "," + format_double(fpr) + "," +
                   format_double(tpr) + "\n";
    }
    return out;
}

inline void write_text_file(const std::string& path, std::string_view content) {
    namespace fs = std::filesystem;
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw ConfigError("failed writing '" + path + "'");
}

inline std::string dump_json(const OrderedJson& j) { return j.dump(2) + "\n"; }

}  // namespace pipeline_detail

// One writer per CLI verb; `pipeline` writes the whole report, the slice
// verbs write exactly their section of it.
inline void write_slice_outputs(const std::string& verb, const std::string& out_dir,
                                const OrderedJson& config_echo, const RunReport& r) {
    namespace fs = std::filesystem;
    using namespace pipeline_detail;
    const OrderedJson full = build_report_json(config_echo, r);
    auto path = [&](const char* name) { return (fs::path(out_dir) / name).string(); };

    if (verb == "extract") {
        write_text_file(path("nights.json"), dump_json(full.at("nights")));
        write_text_file(path("features.csv"), features_csv(r));
        write_text_file(path("targets.csv"), targets_csv(r));
    } else if (verb == "efa") {
        write_text_file(path("efa.json"), dump_json(full.at("efa")));
        write_text_file(path("plots/loadings.csv"), loadings_csv(r));
    } else if (verb == "search") {
        write_text_file(path("graph.json"), dump_json(full.at("graph")));
        write_text_file(path("markov_blankets.json"), dump_json(full.at("markov_blankets")));
        write_text_file(path("graph.txt"), to_edge_list(r.graph.cpdag));
    } else if (verb == "sem") {
        write_text_file(path("sem.json"), dump_json(full.at("sem")));
        write_text_file(path("sem.txt"), sem_table(r.sem));
    } else if (verb == "predict") {
        write_text_file(path("eval.json"), dump_json(full.at("eval")));
        write_text_file(path("metrics.csv"), metrics_csv(r));
        write_text_file(path("plots/roc.csv"), roc_csv(r));
    } else if (verb == "pipeline") {
        write_text_file(path("report.json"), dump_json(full));
        write_text_file(path("report.md"), build_report_markdown(r));
        write_text_file(path("features.csv"), features_csv(r));
        write_text_file(path("targets.csv"), targets_csv(r));
        write_text_file(path("graph.txt"), to_edge_list(r.graph.cpdag));
        write_text_file(path("metrics.csv"), metrics_csv(r));
        write_text_file(path("plots/loadings.csv"), loadings_csv(r));
        write_text_file(path("plots/roc.csv"), roc_csv(r));
    } else {
        throw ConfigError("unknown output verb '" + verb + "'");
    }
}

inline Stage stage_for_verb(const std::string& verb) {
    if (verb == "extract") return Stage::Extract;
    if (verb == "efa") return Stage::Efa;
    if (verb == "search") return Stage::Search;
    if (verb == "sem") return Stage::Sem;
    if (verb == "predict" || verb == "pipeline") return Stage::Predict;
    throw ConfigError("unknown verb '" + verb + "'");
}

}  // namespace sleepeda
