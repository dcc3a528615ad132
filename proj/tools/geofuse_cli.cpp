// Command-line front end: similarity, evaluate, complementarity,
// spatial-scale, and sample, each reading a JSON config file overridable by
// flags of the same names. Exit codes: 0 success, 1 input/validation error,
// 2 numerical failure.

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <string>
#include <vector>

#include "geofuse/commands.hpp"
#include "geofuse/errors.hpp"
#include "geofuse/run_config.hpp"
#include "geofuse/version.hpp"

namespace {

// Splits "name=path" (embeddings) or "name=path:kind" (tasks).
std::pair<std::string, std::string> split_once(const std::string& s, char sep,
                                               const std::string& what) {
    const std::size_t pos = s.find(sep);
    if (pos == std::string::npos || pos == 0 || pos + 1 >= s.size())
        throw geofuse::input_error("malformed " + what + " '" + s + "'");
    return {s.substr(0, pos), s.substr(pos + 1)};
}

struct CliState {
    std::string config_path;
    geofuse::RunConfig config;
    std::vector<std::string> embedding_args;
    std::vector<std::string> task_args;
};

// Registers the flags shared by every command. Flags override config-file
// values only when actually given on the command line.
void add_common_flags(CLI::App* cmd, CliState& state) {
    cmd->add_option("--config", state.config_path, "JSON config file (flags override it)");
    cmd->add_option("--locations", state.config.locations, "locations CSV (id,lon,lat)");
    cmd->add_option("--embedding", state.embedding_args,
                    "embedding table as name=path (repeatable)");
    cmd->add_option("--task", state.task_args,
                    "task table as name=path:kind, kind in {regression,multiclass}");
    cmd->add_option("--combos", state.config.combos,
                    "comma list of: singles, pairs, all, or explicit a+b names");
    cmd->add_option("--folds", state.config.folds, "cross-validation fold count");
    cmd->add_option("--seed", state.config.seed, "top-level random seed");
    cmd->add_option("--lambda", state.config.lambda, "probe L2 penalty strength");
    cmd->add_option("--zscore", state.config.zscore,
                    "standardization scope: fold (training rows only) or global");
    cmd->add_option("--fdr", state.config.fdr, "Benjamini-Hochberg false discovery rate");
    cmd->add_flag("--per-location", state.config.per_location,
                  "also write per-location error/complementarity tables");
    cmd->add_option("--out", state.config.out, "output root directory");
}

// Applies config-file values underneath any explicitly passed flags.
void merge_config_file(const CLI::App* cmd, CliState& state) {
    if (state.config_path.empty()) return;
    std::ifstream in(state.config_path);
    if (!in) throw geofuse::input_error("cannot open config file: " + state.config_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw geofuse::input_error("malformed config file " + state.config_path + ": " +
                                   e.what());
    }
    geofuse::RunConfig from_file;
    geofuse::from_json_into(j, from_file);
    // Start from the file, then re-apply everything given on the command line.
    geofuse::RunConfig merged = from_file;
    const geofuse::RunConfig& flags = state.config;
    const auto given = [&](const std::string& name) {
        const CLI::Option* opt = cmd->get_option_no_throw(name);
        return opt != nullptr && opt->count() > 0;
    };
    if (given("--locations")) merged.locations = flags.locations;
    if (given("--combos")) merged.combos = flags.combos;
    if (given("--folds")) merged.folds = flags.folds;
    if (given("--seed")) merged.seed = flags.seed;
    if (given("--lambda")) merged.lambda = flags.lambda;
    if (given("--zscore")) merged.zscore = flags.zscore;
    if (given("--fdr")) merged.fdr = flags.fdr;
    if (given("--per-location")) merged.per_location = flags.per_location;
    if (given("--out")) merged.out = flags.out;
    if (given("--evaluation")) merged.evaluation = flags.evaluation;
    if (given("--class-scores")) merged.class_scores = flags.class_scores;
    if (given("--strategy")) merged.strategy = flags.strategy;
    if (given("--n")) merged.sample_n = flags.sample_n;
    if (given("--min-lat")) merged.min_lat = flags.min_lat;
    if (given("--population")) merged.population = flags.population;
    if (given("--step-size")) merged.step_size = flags.step_size;
    if (given("--initial-ratio")) merged.initial_ratio = flags.initial_ratio;
    if (given("--sweep")) merged.sweep = flags.sweep;
    if (given("--sweep-steps")) merged.sweep_steps = flags.sweep_steps;
    if (given("--sweep-ratios")) merged.sweep_ratios = flags.sweep_ratios;
    state.config = merged;
}

void parse_table_args(CliState& state) {
    if (!state.embedding_args.empty()) {
        state.config.embeddings.clear();
        for (const auto& arg : state.embedding_args) {
            const auto [name, path] = split_once(arg, '=', "--embedding (want name=path)");
            state.config.embeddings.push_back({name, path});
        }
    }
    if (!state.task_args.empty()) {
        state.config.tasks.clear();
        for (const auto& arg : state.task_args) {
            const auto [name, rest] = split_once(arg, '=', "--task (want name=path:kind)");
            const auto [path, kind] = split_once(rest, ':', "--task (want name=path:kind)");
            state.config.tasks.push_back({name, path, kind});
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"evaluation toolkit for fused geospatial embeddings"};
    app.set_version_flag("--version", std::string(geofuse::version_string));
    app.require_subcommand(1);

    CliState state;

    CLI::App* similarity =
        app.add_subcommand("similarity", "pairwise CCA/CKA between embeddings");
    CLI::App* evaluate =
        app.add_subcommand("evaluate", "cross-validated probe scores per combo and task");
    CLI::App* complementarity = app.add_subcommand(
        "complementarity", "complementarity indices with significance stars");
    CLI::App* spatial =
        app.add_subcommand("spatial-scale", "entropy-decay spatial scales per class");
    CLI::App* sample =
        app.add_subcommand("sample", "uniform sphere or greedy stratified sampling");

    for (CLI::App* cmd : {similarity, evaluate, complementarity, spatial, sample})
        add_common_flags(cmd, state);

    complementarity->add_option("--evaluation", state.config.evaluation,
                                "completed evaluate output directory (or its "
                                "evaluation.json)");
    spatial->add_option("--class-scores", state.config.class_scores,
                        "per-class score table (class,<series>,...) to correlate "
                        "against fitted scales");
    sample->add_option("--strategy", state.config.strategy, "uniform or greedy-lc");
    sample->add_option("--n", state.config.sample_n, "sample size");
    sample->add_option("--min-lat", state.config.min_lat,
                       "reject uniform draws below this latitude (degrees)");
    sample->add_option("--population", state.config.population,
                       "population class-probability table (id,<class>,...)");
    sample->add_option("--step-size", state.config.step_size, "rows added per iteration");
    sample->add_option("--initial-ratio", state.config.initial_ratio,
                       "fraction of n seeded with highest-entropy rows");
    sample->add_flag("--sweep", state.config.sweep, "run the hyperparameter sweep grid");
    sample->add_option("--sweep-steps", state.config.sweep_steps,
                       "step sizes for --sweep (repeatable)");
    sample->add_option("--sweep-ratios", state.config.sweep_ratios,
                       "initial ratios for --sweep (repeatable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        CLI::App* active = app.get_subcommands().at(0);
        merge_config_file(active, state);
        parse_table_args(state);

        geofuse::CommandResult result;
        if (active == similarity)
            result = geofuse::cmd_similarity(state.config);
        else if (active == evaluate)
            result = geofuse::cmd_evaluate(state.config);
        else if (active == complementarity)
            result = geofuse::cmd_complementarity(state.config);
        else if (active == spatial)
            result = geofuse::cmd_spatial_scale(state.config);
        else
            result = geofuse::cmd_sample(state.config);

        std::cout << "wrote " << result.out_dir.string() << "\n";
        for (const auto& f : result.outputs) std::cout << "  " << f << "\n";
        return 0;
    } catch (const geofuse::input_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const geofuse::numeric_error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
