// Command-line front end: the full pipeline, its single-stage slices, and
// synthetic data generation.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sleepeda/csv.hpp"
#include "sleepeda/errors.hpp"
#include "sleepeda/ingest.hpp"
#include "sleepeda/pipeline.hpp"
#include "sleepeda/study.hpp"
#include "sleepeda/synth.hpp"

namespace {

using sleepeda::OrderedJson;

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
};

void add_common_flags(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config file");
    cmd->add_option("--seed", args.seed, "random seed (overrides config)");
    cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
    cmd->add_option("--set", args.sets, "config override as key=value, repeatable")
        ->take_all();
}

OrderedJson load_config(const CommonArgs& args) {
    OrderedJson cfg = sleepeda::default_config_json();
    if (!args.config_path.empty()) {
        std::ifstream in(args.config_path, std::ios::binary);
        if (!in)
            throw sleepeda::ConfigError("cannot open config file '" + args.config_path + "'");
        std::ostringstream buffer;
        buffer << in.rdbuf();
        OrderedJson file = OrderedJson::parse(buffer.str(), nullptr, false);
        if (file.is_discarded())
            throw sleepeda::ConfigError("config file '" + args.config_path +
                                        "' is not valid JSON");
        sleepeda::deep_merge(cfg, file);
    }
    for (const auto& assignment : args.sets) sleepeda::apply_config_override(cfg, assignment);
    if (args.seed) cfg["seed"] = *args.seed;
    if (!args.out_dir.empty()) cfg["out"] = args.out_dir;
    return cfg;
}

int run_analysis(const std::string& verb, const CommonArgs& args) {
    const OrderedJson cfg = load_config(args);
    const sleepeda::PipelineConfig config = sleepeda::parse_pipeline_config(cfg);
    if (config.out_dir.empty())
        throw sleepeda::ConfigError("an output directory is required (--out or config \"out\")");
    const sleepeda::RunReport report =
        sleepeda::run_pipeline_stages(config, sleepeda::stage_for_verb(verb));
    sleepeda::write_slice_outputs(verb, config.out_dir, cfg, report);
    return 0;
}

std::uint64_t require_seed(const std::optional<std::uint64_t>& seed) {
    if (!seed) throw sleepeda::ConfigError("a seed is required (--seed)");
    return *seed;
}

std::string require_out(const std::string& out) {
    if (out.empty()) throw sleepeda::ConfigError("an output directory is required (--out)");
    return out;
}

int run_synth_tabular(std::size_t n, std::optional<std::uint64_t> seed,
                      const std::string& out_dir) {
    namespace fs = std::filesystem;
    const auto sample =
        sleepeda::generate_tabular(sleepeda::GroundTruthModel{}, n, require_seed(seed));
    const std::string dir = require_out(out_dir);

    std::string csv;
    for (std::size_t j = 0; j < sample.data.names.size(); ++j)
        csv += (j ? "," : "") + sample.data.names[j];
    csv += "\n";
    for (std::size_t i = 0; i < sample.data.n_rows(); ++i) {
        for (std::size_t j = 0; j < sample.data.names.size(); ++j)
            csv += (j ? "," : "") + sleepeda::format_double(sample.data.columns[j][i]);
        csv += "\n";
    }
    std::string truth = "magnitude,storms,sq_latent\n";
    for (std::size_t i = 0; i < sample.truth.magnitude.size(); ++i)
        truth += sleepeda::format_double(sample.truth.magnitude[i]) + "," +
                 sleepeda::format_double(sample.truth.storms[i]) + "," +
                 sleepeda::format_double(sample.truth.sq_latent[i]) + "\n";

    sleepeda::pipeline_detail::write_text_file((fs::path(dir) / "dataset.csv").string(), csv);
    sleepeda::pipeline_detail::write_text_file((fs::path(dir) / "truth.csv").string(), truth);
    return 0;
}

int run_synth_trace(const std::string& script_path, std::optional<std::uint64_t> seed,
                    const std::string& out_dir) {
    namespace fs = std::filesystem;
    sleepeda::TraceScript script;
    if (!script_path.empty()) {
        std::ifstream in(script_path, std::ios::binary);
        if (!in) throw sleepeda::ConfigError("cannot open script file '" + script_path + "'");
        std::ostringstream buffer;
        buffer << in.rdbuf();
        script = sleepeda::parse_trace_script(buffer.str());
    }
    const auto sample = sleepeda::generate_eda_trace(script, require_seed(seed));
    const std::string dir = require_out(out_dir);

    std::string truth = "time_s,amplitude_us\n";
    for (const auto& event : sample.truth.events)
        truth += sleepeda::format_double(event.time_s) + "," +
                 sleepeda::format_double(event.amplitude_us) + "\n";

    sleepeda::pipeline_detail::write_text_file((fs::path(dir) / "EDA.csv").string(),
                                               sleepeda::serialize_channel_file({sample.trace}));
    sleepeda::pipeline_detail::write_text_file((fs::path(dir) / "truth.csv").string(), truth);
    return 0;
}

int run_synth_nights(int nights, int participants, std::optional<std::uint64_t> seed,
                     const std::string& out_dir) {
    namespace fs = std::filesystem;
    sleepeda::StudyOptions opts;
    opts.nights = nights;
    opts.participants = participants;
    opts.seed = require_seed(seed);
    const std::string dir = require_out(out_dir);
    const sleepeda::StudyPaths paths = sleepeda::write_synthetic_study(dir, opts);

    // Ready-to-run config pointing at the generated study.
    OrderedJson cfg = sleepeda::default_config_json();
    cfg["traces"] = paths.traces_dir;
    cfg["reports"] = paths.report_log;
    cfg["seed"] = opts.seed;
    sleepeda::pipeline_detail::write_text_file((fs::path(dir) / "config.json").string(),
                                               cfg.dump(2) + "\n");
    return 0;
}

int classify_exit(const sleepeda::Error& e) {
    using namespace sleepeda;
    if (dynamic_cast<const StageFailure*>(&e)) return dynamic_cast<const StageFailure&>(e).exit_code;
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const TooLargeError*>(&e)) return 2;
    if (dynamic_cast<const NumericalError*>(&e) || dynamic_cast<const DomainError*>(&e) ||
        dynamic_cast<const SeparationError*>(&e) || dynamic_cast<const FoldError*>(&e) ||
        dynamic_cast<const DegenerateCellError*>(&e) ||
        dynamic_cast<const NoFactorsRetained*>(&e) || dynamic_cast<const ContractError*>(&e))
        return 4;
    // Parse, validation, alignment, and the other malformed-input families.
    return 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wearable sleep analytics: EDA features, factor analysis, causal structure "
                 "search, path models, and cross-validated prediction"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(sleepeda::kVersion));

    const std::vector<std::pair<std::string, std::string>> verbs = {
        {"pipeline", "run every stage and write the full report"},
        {"extract", "ingest traces and write per-night features and targets"},
        {"efa", "run feature extraction plus factor analysis"},
        {"search", "run through causal structure search"},
        {"sem", "run through path-model fitting"},
        {"predict", "run through cross-validated prediction"},
    };
    std::map<std::string, CommonArgs> verb_args;
    for (const auto& [verb, description] : verbs)
        add_common_flags(app.add_subcommand(verb, description), verb_args[verb]);

    CLI::App* synth = app.add_subcommand("synth", "generate synthetic data");
    synth->require_subcommand(1);

    std::size_t tabular_n = 1000;
    CommonArgs tabular_args;
    CLI::App* tabular = synth->add_subcommand(
        "tabular", "sample the latent feature model into a CSV dataset with a truth sidecar");
    tabular->add_option("--n", tabular_n, "number of rows")->default_val(1000);
    tabular->add_option("--seed", tabular_args.seed, "random seed");
    tabular->add_option("--out", tabular_args.out_dir, "output directory");

    std::string trace_script;
    CommonArgs trace_args;
    CLI::App* trace = synth->add_subcommand(
        "trace", "render a scripted EDA trace with planted events and a truth sidecar");
    trace->add_option("--script", trace_script, "key=value trace script file");
    trace->add_option("--seed", trace_args.seed, "random seed");
    trace->add_option("--out", trace_args.out_dir, "output directory");

    sleepeda::StudyOptions study_defaults;
    int nights_n = study_defaults.nights;
    int nights_participants = study_defaults.participants;
    CommonArgs nights_args;
    CLI::App* nights = synth->add_subcommand(
        "nights", "write a full synthetic raw study (traces, report log, truth, config)");
    nights->add_option("--nights", nights_n, "number of nights")
        ->default_val(study_defaults.nights);
    nights->add_option("--participants", nights_participants, "number of participants")
        ->default_val(study_defaults.participants);
    nights->add_option("--seed", nights_args.seed, "random seed");
    nights->add_option("--out", nights_args.out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);  // 0 for --help/--version, nonzero for usage errors
    }

    try {
        for (const auto& [verb, description] : verbs)
            if (app.got_subcommand(verb)) return run_analysis(verb, verb_args[verb]);
        if (synth->got_subcommand(tabular))
            return run_synth_tabular(tabular_n, tabular_args.seed, tabular_args.out_dir);
        if (synth->got_subcommand(trace))
            return run_synth_trace(trace_script, trace_args.seed, trace_args.out_dir);
        if (synth->got_subcommand(nights))
            return run_synth_nights(nights_n, nights_participants, nights_args.seed,
                                    nights_args.out_dir);
        std::cerr << "error: no subcommand selected\n";
        return 2;
    } catch (const sleepeda::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return classify_exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
