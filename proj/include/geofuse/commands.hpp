#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "geofuse/complementarity.hpp"
#include "geofuse/csv.hpp"
#include "geofuse/dataset.hpp"
#include "geofuse/errors.hpp"
#include "geofuse/probes.hpp"
#include "geofuse/run_config.hpp"
#include "geofuse/sampler.hpp"
#include "geofuse/similarity.hpp"
#include "geofuse/spatial.hpp"
#include "geofuse/stats.hpp"
#include "geofuse/version.hpp"

namespace geofuse {

// Command implementations behind the CLI front end. Each command loads its
// inputs, computes, and writes all outputs into out/<command>-<confighash>/,
// finishing with a machine-readable run manifest. All randomness derives from
// the configured seed via named sub-seeds, so outputs are reproducible and
// adding commands never perturbs existing ones.

struct CommandResult {
    std::filesystem::path out_dir;
    std::vector<std::string> outputs;  // file names inside out_dir
};

namespace detail {

inline std::filesystem::path prepare_out_dir(const RunConfig& config,
                                             const std::string& command) {
    std::filesystem::path dir =
        std::filesystem::path(config.out) / (command + "-" + config_hash(config));
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw input_error("cannot write file: " + path.string());
    out << text;
    out.flush();
    if (!out) throw input_error("write failed: " + path.string());
}

inline void write_manifest(const std::filesystem::path& dir, const std::string& command,
                           const RunConfig& config, const nlohmann::json& sub_seeds,
                           const std::vector<std::string>& outputs) {
    nlohmann::json m;
    m["command"] = command;
    m["version"] = version_string;
    m["config"] = to_json(config);
    m["config_hash"] = config_hash(config);
    m["sub_seeds"] = sub_seeds;
    m["outputs"] = outputs;
    write_text(dir / "manifest.json", m.dump(2) + "\n");
}

// Loads and aligns the standard inputs. A missing locations path is allowed
// when coordinates are not needed (similarity): alignment then runs on the id
// intersection of the embedding/task tables alone.
struct LoadedInputs {
    AlignedBundle bundle;
    std::vector<std::string> model_names;
};

inline LoadedInputs load_inputs(const RunConfig& config, bool need_locations,
                                bool need_tasks) {
    if (config.embeddings.empty()) throw input_error("no --embedding inputs given");
    std::vector<EmbeddingTable> embeddings;
    std::vector<std::string> names;
    for (const auto& spec : config.embeddings) {
        embeddings.push_back(load_embedding(spec.path, spec.name));
        names.push_back(spec.name);
    }
    std::vector<TaskTable> tasks;
    if (need_tasks) {
        if (config.tasks.empty()) throw input_error("no --task inputs given");
        for (const auto& spec : config.tasks) {
            if (spec.kind == "regression")
                tasks.push_back(load_regression_task(spec.path, spec.name));
            else if (spec.kind == "multiclass")
                tasks.push_back(load_classification_task(spec.path, spec.name));
            else
                throw input_error("task '" + spec.name + "': kind must be regression or "
                                  "multiclass, got '" + spec.kind + "'");
        }
    }
    LocationTable locations;
    if (!config.locations.empty()) {
        locations = load_locations(config.locations);
    } else if (need_locations) {
        throw input_error("--locations is required for this command");
    } else {
        // Coordinates unused: anchor alignment on the first embedding's ids.
        locations.ids = embeddings[0].location_ids;
        locations.lon.assign(locations.ids.size(), 0.0);
        locations.lat.assign(locations.ids.size(), 0.0);
    }
    LoadedInputs out{align(locations, embeddings, tasks), std::move(names)};
    return out;
}

inline std::string sanitize_filename(std::string s) {
    for (char& c : s)
        if (c == '/' || c == '\\' || c == ':' || c == ' ') c = '_';
    return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// similarity: pairwise CCA/CKA table plus the paired one-sided test that CKA
// exceeds CCA across pairs.
// ---------------------------------------------------------------------------

inline CommandResult cmd_similarity(const RunConfig& config) {
    if (config.embeddings.size() < 2)
        throw input_error("similarity needs at least 2 embeddings");
    const auto inputs = detail::load_inputs(config, /*need_locations=*/false,
                                            /*need_tasks=*/false);
    const std::vector<SimilarityReport> reports =
        pairwise_similarity(inputs.bundle.embeddings);

    const std::filesystem::path dir = detail::prepare_out_dir(config, "similarity");
    CommandResult result{dir, {}};

    {
        CsvWriter w((dir / "similarity.csv").string());
        w.write_row({"model_a", "model_b", "cca_mean", "cka"});
        for (const auto& r : reports)
            w.write_row({r.model_a, r.model_b, format_double(r.cca_mean),
                         format_double(r.cka)});
        w.close();
        result.outputs.push_back("similarity.csv");
    }

    nlohmann::json test;
    if (reports.size() >= 2) {
        std::vector<double> cka, cca;
        for (const auto& r : reports) {
            cka.push_back(r.cka);
            cca.push_back(r.cca_mean);
        }
        const TestResult t =
            t_test_one_sided(cka, cca, /*paired=*/true, Alternative::greater);
        test["comparison"] = "cka_greater_than_cca";
        test["n_pairs"] = reports.size();
        test["statistic"] = t.statistic;
        test["p_value"] = t.p_value;
        test["method"] = method_name(t.method);
    } else {
        test["comparison"] = "cka_greater_than_cca";
        test["skipped"] = "needs at least 2 embedding pairs";
    }
    detail::write_text(dir / "cka_vs_cca.json", test.dump(2) + "\n");
    result.outputs.push_back("cka_vs_cca.json");

    detail::write_manifest(dir, "similarity", config, nlohmann::json::object(),
                           result.outputs);
    return result;
}

// ---------------------------------------------------------------------------
// evaluate: the score grid over model combinations and tasks.
// ---------------------------------------------------------------------------

inline CommandResult cmd_evaluate(const RunConfig& config) {
    const auto inputs = detail::load_inputs(config, /*need_locations=*/true,
                                            /*need_tasks=*/true);
    const AlignedBundle& bundle = inputs.bundle;
    const std::size_t n = bundle.locations.size();

    const std::uint64_t folds_seed = derive_seed(config.seed, "evaluate", "folds");
    const FoldPlan plan = make_folds(n, config.folds, folds_seed);

    EvaluateOptions options;
    options.lambda = config.lambda;
    if (config.zscore == "fold")
        options.zscore = ZscoreMode::per_fold;
    else if (config.zscore == "global")
        options.zscore = ZscoreMode::global;
    else
        throw input_error("zscore must be 'fold' or 'global', got '" + config.zscore + "'");

    const auto combos = expand_combos(inputs.model_names, config.combos);

    std::map<std::string, const EmbeddingTable*> by_name;
    for (const auto& e : bundle.embeddings) by_name[e.model_name] = &e;

    std::vector<EvaluationReport> reports;
    std::vector<std::string> report_combo;  // combo name per report
    for (const auto& combo : combos) {
        std::vector<EmbeddingTable> parts;
        for (const auto& name : combo) parts.push_back(*by_name.at(name));
        const EmbeddingTable fused = fuse(parts);
        for (const auto& task : bundle.tasks) {
            reports.push_back(evaluate(fused, task, plan, options));
            report_combo.push_back(fused.model_name);
        }
    }

    const std::filesystem::path dir = detail::prepare_out_dir(config, "evaluate");
    CommandResult result{dir, {}};

    // Human-readable grid: rows = combos, columns = tasks, cells mean +/- sem.
    {
        std::string text;
        text += "scores (mean +/- SEM over " + std::to_string(config.folds) + " folds; " +
                std::to_string(n) + " locations, " + std::to_string(bundle.dropped) +
                " dropped in alignment)\n\n";
        std::size_t width = 12;
        for (const auto& combo : combos)
            width = std::max(width, combo_name(combo).size() + 2);
        char buf[64];
        text += std::string(width, ' ');
        for (const auto& task : bundle.tasks) {
            std::snprintf(buf, sizeof(buf), "%16s", task.task_name.c_str());
            text += buf;
        }
        text += "\n";
        std::size_t r = 0;
        for (const auto& combo : combos) {
            const std::string name = combo_name(combo);
            text += name + std::string(width - name.size(), ' ');
            for (std::size_t t = 0; t < bundle.tasks.size(); ++t) {
                const EvaluationReport& rep = reports[r * bundle.tasks.size() + t];
                std::snprintf(buf, sizeof(buf), "%9.1f ±%5.1f", rep.mean, rep.sem);
                text += buf;
            }
            text += "\n";
            ++r;
        }
        detail::write_text(dir / "scores.txt", text);
        result.outputs.push_back("scores.txt");
    }

    // Machine-readable companion with raw fold scores and per-location errors.
    {
        nlohmann::json j;
        j["n_locations"] = n;
        j["dropped"] = bundle.dropped;
        j["folds"] = {{"k", config.folds}, {"seed", folds_seed}};
        j["location_ids"] = bundle.locations.ids;
        j["lon"] = bundle.locations.lon;
        j["lat"] = bundle.locations.lat;
        nlohmann::json tasks = nlohmann::json::array();
        for (const auto& t : bundle.tasks)
            tasks.push_back({{"name", t.task_name},
                             {"kind", t.kind == TaskKind::regression ? "regression"
                                                                     : "multiclass"}});
        j["tasks"] = tasks;
        nlohmann::json reps = nlohmann::json::array();
        for (std::size_t i = 0; i < reports.size(); ++i) {
            nlohmann::json r;
            r["combo"] = report_combo[i];
            r["task"] = reports[i].task_name;
            r["fold_scores"] = reports[i].fold_scores;
            r["mean"] = reports[i].mean;
            r["sem"] = reports[i].sem;
            if (reports[i].has_per_location)
                r["per_location_mse"] = reports[i].per_location_error;
            reps.push_back(std::move(r));
        }
        j["reports"] = reps;
        detail::write_text(dir / "evaluation.json", j.dump() + "\n");
        result.outputs.push_back("evaluation.json");
    }

    // Optional per-location error tables, one per regression report.
    if (config.per_location) {
        for (std::size_t i = 0; i < reports.size(); ++i) {
            if (!reports[i].has_per_location) continue;
            const std::string fname = "errors_" +
                                      detail::sanitize_filename(report_combo[i]) + "__" +
                                      detail::sanitize_filename(reports[i].task_name) +
                                      ".csv";
            CsvWriter w((dir / fname).string());
            w.write_row({"id", "mse"});
            for (std::size_t l = 0; l < n; ++l)
                w.write_row({bundle.locations.ids[l],
                             format_double(reports[i].per_location_error[l])});
            w.close();
            result.outputs.push_back(fname);
        }
    }

    detail::write_manifest(dir, "evaluate", config,
                           {{"evaluate/folds", folds_seed}}, result.outputs);
    return result;
}

// ---------------------------------------------------------------------------
// complementarity: index table with Wilcoxon p-values, BH stars, and optional
// per-location maps, computed from a completed evaluation output.
// ---------------------------------------------------------------------------

namespace detail {

struct EvaluationArtifacts {
    LocationTable locations;
    std::vector<EvaluationReport> reports;
    std::vector<std::string> report_combo;
    std::map<std::string, std::string> task_kind;
};

inline EvaluationArtifacts load_evaluation_artifacts(const std::string& path_spec) {
    if (path_spec.empty())
        throw input_error("missing evaluation artifacts: pass the evaluate output "
                          "directory (or its evaluation.json)");
    std::filesystem::path path(path_spec);
    if (std::filesystem::is_directory(path)) path /= "evaluation.json";
    std::ifstream in(path);
    if (!in) throw input_error("missing evaluation artifacts: cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw input_error("malformed evaluation artifacts at " + path.string() + ": " +
                          e.what());
    }
    EvaluationArtifacts art;
    try {
        art.locations.ids = j.at("location_ids").get<std::vector<std::string>>();
        art.locations.lon = j.at("lon").get<std::vector<double>>();
        art.locations.lat = j.at("lat").get<std::vector<double>>();
        for (const auto& t : j.at("tasks"))
            art.task_kind[t.at("name").get<std::string>()] =
                t.at("kind").get<std::string>();
        for (const auto& r : j.at("reports")) {
            EvaluationReport rep;
            rep.embedding_name = r.at("combo").get<std::string>();
            rep.task_name = r.at("task").get<std::string>();
            rep.fold_scores = r.at("fold_scores").get<std::vector<double>>();
            rep.mean = r.at("mean").get<double>();
            rep.sem = r.at("sem").get<double>();
            if (r.contains("per_location_mse")) {
                rep.per_location_error =
                    r.at("per_location_mse").get<std::vector<double>>();
                rep.has_per_location = true;
            }
            art.reports.push_back(std::move(rep));
            art.report_combo.push_back(art.reports.back().embedding_name);
        }
    } catch (const nlohmann::json::exception& e) {
        throw input_error("malformed evaluation artifacts at " + path.string() + ": " +
                          e.what());
    }
    return art;
}

inline std::vector<std::string> split_plus(const std::string& name) {
    std::vector<std::string> parts;
    std::size_t p = 0;
    while (p <= name.size()) {
        const std::size_t q = name.find('+', p);
        parts.push_back(
            name.substr(p, q == std::string::npos ? std::string::npos : q - p));
        p = q == std::string::npos ? name.size() + 1 : q + 1;
    }
    return parts;
}

}  // namespace detail

inline CommandResult cmd_complementarity(const RunConfig& config) {
    const detail::EvaluationArtifacts art =
        detail::load_evaluation_artifacts(config.evaluation);

    // Index single-model reports by (model, task).
    std::map<std::pair<std::string, std::string>, const EvaluationReport*> singles;
    for (const auto& r : art.reports)
        if (r.embedding_name.find('+') == std::string::npos)
            singles[{r.embedding_name, r.task_name}] = &r;

    std::vector<ComplementarityCell> cells;
    std::vector<const EvaluationReport*> cell_fused;
    std::vector<std::vector<const EvaluationReport*>> cell_singles;
    for (const auto& r : art.reports) {
        if (r.embedding_name.find('+') == std::string::npos) continue;
        std::vector<EvaluationReport> parts;
        std::vector<const EvaluationReport*> part_ptrs;
        for (const auto& model : detail::split_plus(r.embedding_name)) {
            const auto it = singles.find({model, r.task_name});
            if (it == singles.end())
                throw input_error("missing evaluation artifacts: no single-model report "
                                  "for '" + model + "' on task '" + r.task_name + "'");
            parts.push_back(*it->second);
            part_ptrs.push_back(it->second);
        }
        cells.push_back(task_complementarity(r, parts));
        cell_fused.push_back(&r);
        cell_singles.push_back(std::move(part_ptrs));
    }
    if (cells.empty())
        throw input_error("evaluation output holds no fused (multi-model) reports");

    // One BH family per emitted table.
    std::vector<double> p_values;
    for (const auto& c : cells) p_values.push_back(c.p_value);
    const BhResult bh = benjamini_hochberg(p_values, config.fdr);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        cells[i].p_adjusted = bh.adjusted[i];
        cells[i].significance = stars(bh.adjusted[i]);
    }

    const std::filesystem::path dir = detail::prepare_out_dir(config, "complementarity");
    CommandResult result{dir, {}};
    {
        CsvWriter w((dir / "complementarity.csv").string());
        w.write_row({"combo", "task", "index", "fused_mean", "best_single_mean",
                     "p_value", "p_adjusted", "stars"});
        for (const auto& c : cells)
            w.write_row({c.combo_name, c.task_name, format_double(c.index),
                         format_double(c.fused_mean), format_double(c.best_single_mean),
                         format_double(c.p_value), format_double(c.p_adjusted),
                         c.significance});
        w.close();
        result.outputs.push_back("complementarity.csv");
    }

    if (config.per_location) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (!cell_fused[i]->has_per_location) continue;
            std::vector<EvaluationReport> parts;
            for (const auto* p : cell_singles[i]) parts.push_back(*p);
            const LocationComplementarityMap map =
                per_location_complementarity(*cell_fused[i], parts, art.locations);
            const std::vector<double> clipped = map.export_clipped();
            const std::string fname =
                "map_" + detail::sanitize_filename(cells[i].combo_name) + "__" +
                detail::sanitize_filename(cells[i].task_name) + ".csv";
            CsvWriter w((dir / fname).string());
            w.write_row({"id", "lon", "lat", "c"});
            for (std::size_t l = 0; l < map.ids.size(); ++l)
                w.write_row({map.ids[l], format_double(map.lon[l]),
                             format_double(map.lat[l]), format_double(clipped[l])});
            w.close();
            result.outputs.push_back(fname);
        }
    }

    detail::write_manifest(dir, "complementarity", config, nlohmann::json::object(),
                           result.outputs);
    return result;
}

// ---------------------------------------------------------------------------
// spatial-scale: per-class entropy curves and decay scales, plus optional
// scale-vs-score Spearman correlations.
// ---------------------------------------------------------------------------

inline CommandResult cmd_spatial_scale(const RunConfig& config) {
    if (config.locations.empty()) throw input_error("--locations is required");
    if (config.tasks.size() != 1)
        throw input_error("spatial-scale expects exactly one probability-valued task");
    const LocationTable locations_raw = load_locations(config.locations);
    TaskTable task = load_regression_task(config.tasks[0].path, config.tasks[0].name);
    AlignedBundle bundle = align(locations_raw, {}, {task});
    const LocationTable& locations = bundle.locations;
    const TaskTable& aligned = bundle.tasks[0];
    const std::size_t n = locations.size();

    // Rows must be discrete distributions over classes.
    for (Eigen::Index i = 0; i < aligned.targets.rows(); ++i) {
        double sum = 0.0;
        for (Eigen::Index c = 0; c < aligned.targets.cols(); ++c) {
            const double p = aligned.targets(i, c);
            if (!(p >= 0.0 && p <= 1.0))
                throw input_error("spatial-scale: probability outside [0, 1] at row " +
                                  std::to_string(i));
            sum += p;
        }
        if (std::fabs(sum - 1.0) > 1e-6)
            throw input_error("spatial-scale: row " + std::to_string(i) +
                              " of the class table sums to " + std::to_string(sum));
    }

    struct ClassFit {
        std::string name;
        EntropyCurve curve;
        SpatialScaleFit fit;
        bool usable = false;  // false when the class carried no pair weight
    };
    std::vector<ClassFit> fits;
    for (Eigen::Index c = 0; c < aligned.targets.cols(); ++c) {
        ClassFit cf;
        cf.name = aligned.target_names[static_cast<std::size_t>(c)];
        std::vector<double> values(n);
        for (std::size_t i = 0; i < n; ++i)
            values[i] = aligned.targets(static_cast<Eigen::Index>(i), c);
        try {
            const PairDensity density = weighted_pair_density(values, locations);
            cf.curve = entropy_curve(density);
            cf.fit = fit_spatial_scale(cf.curve);
            cf.usable = true;
        } catch (const input_error&) {
            // Zero-weight or too-sparse classes: flagged degenerate, not fatal.
            cf.fit.degenerate = true;
            cf.usable = false;
        }
        fits.push_back(std::move(cf));
    }

    const std::filesystem::path dir = detail::prepare_out_dir(config, "spatial-scale");
    CommandResult result{dir, {}};

    {
        CsvWriter w((dir / "scales.csv").string());
        w.write_row({"class", "h0", "h_max", "d_km", "rss", "degenerate"});
        for (const auto& cf : fits)
            w.write_row({cf.name, format_double(cf.fit.h0), format_double(cf.fit.h_max),
                         format_double(cf.fit.d), format_double(cf.fit.rss),
                         cf.fit.degenerate ? "1" : "0"});
        w.close();
        result.outputs.push_back("scales.csv");
    }
    {
        CsvWriter w((dir / "curves.csv").string());
        w.write_row({"class", "bin_center_km", "entropy", "valid"});
        for (const auto& cf : fits) {
            for (std::size_t b = 0; b < cf.curve.distance_bin_centers.size(); ++b)
                w.write_row({cf.name, format_double(cf.curve.distance_bin_centers[b]),
                             format_double(cf.curve.entropy[b]),
                             cf.curve.valid_mask[b] ? "1" : "0"});
        }
        w.close();
        result.outputs.push_back("curves.csv");
    }

    // Optional Spearman correlations of d against per-class score series.
    // The score file is `class,<series0>,...`; classes must cover every
    // non-degenerate fitted class. One BH family per emitted table; p-values
    // are one-sided (greater), testing that scores rise with spatial scale.
    if (!config.class_scores.empty()) {
        const CsvTable scores = read_csv(config.class_scores);
        if (scores.header.size() < 2 || scores.header[0] != "class")
            throw input_error(config.class_scores + ": header must be class,<series>,...");
        std::map<std::string, std::vector<double>> rows;
        for (std::size_t r = 0; r < scores.rows.size(); ++r) {
            std::vector<double> vals;
            for (std::size_t c = 1; c < scores.header.size(); ++c)
                vals.push_back(parse_numeric_cell(
                    scores.rows[r][c], config.class_scores + " row " + std::to_string(r + 2)));
            rows[scores.rows[r][0]] = std::move(vals);
        }
        std::vector<double> d_values;
        std::vector<std::vector<double>> series(scores.header.size() - 1);
        for (const auto& cf : fits) {
            if (!cf.usable || cf.fit.degenerate) continue;  // d not identified
            const auto it = rows.find(cf.name);
            if (it == rows.end())
                throw input_error(config.class_scores + ": missing class '" + cf.name + "'");
            d_values.push_back(cf.fit.d);
            for (std::size_t s = 0; s < series.size(); ++s)
                series[s].push_back(it->second[s]);
        }
        std::vector<TestResult> tests;
        for (const auto& s : series)
            tests.push_back(
                scale_score_correlation(d_values, s, SpearmanAlternative::greater));
        std::vector<double> ps;
        for (const auto& t : tests) ps.push_back(t.p_value);
        const BhResult bh = benjamini_hochberg(ps, config.fdr);

        CsvWriter w((dir / "correlation.csv").string());
        w.write_row({"series", "n", "rho", "p_value", "p_adjusted", "stars"});
        for (std::size_t s = 0; s < series.size(); ++s)
            w.write_row({scores.header[s + 1], std::to_string(d_values.size()),
                         format_double(tests[s].statistic), format_double(tests[s].p_value),
                         format_double(bh.adjusted[s]), stars(bh.adjusted[s])});
        w.close();
        result.outputs.push_back("correlation.csv");
    }

    detail::write_manifest(dir, "spatial-scale", config, nlohmann::json::object(),
                           result.outputs);
    return result;
}

// ---------------------------------------------------------------------------
// sample: uniform sphere draws or the greedy class-balancing sampler, with
// uniformity metrics and an optional hyperparameter sweep.
// ---------------------------------------------------------------------------

inline CommandResult cmd_sample(const RunConfig& config) {
    const std::filesystem::path dir = detail::prepare_out_dir(config, "sample");
    CommandResult result{dir, {}};
    nlohmann::json sub_seeds = nlohmann::json::object();

    if (config.strategy == "uniform") {
        if (config.sample_n < 1) throw input_error("sample: --n must be positive");
        const std::uint64_t s = derive_seed(config.seed, "sample", "uniform");
        sub_seeds["sample/uniform"] = s;
        const LocationTable t = sample_sphere_uniform(config.sample_n, config.min_lat, s);
        CsvWriter w((dir / "sampled_locations.csv").string());
        w.write_row({"id", "lon", "lat"});
        for (std::size_t i = 0; i < t.size(); ++i)
            w.write_row({t.ids[i], format_double(t.lon[i]), format_double(t.lat[i])});
        w.close();
        result.outputs.push_back("sampled_locations.csv");
    } else if (config.strategy == "greedy-lc") {
        if (config.population.empty())
            throw input_error("sample: --population is required for greedy-lc");
        if (config.sample_n < 1) throw input_error("sample: --n must be positive");
        const TaskTable table = load_regression_task(config.population, "population");

        LocationTable locations;
        bool have_coords = false;
        Eigen::MatrixXd probs;
        if (!config.locations.empty()) {
            const LocationTable raw = load_locations(config.locations);
            AlignedBundle bundle = align(raw, {}, {table});
            locations = std::move(bundle.locations);
            probs = std::move(bundle.tasks[0].targets);
            have_coords = true;
        } else {
            locations.ids = table.location_ids;
            locations.lon.assign(locations.ids.size(), 0.0);
            locations.lat.assign(locations.ids.size(), 0.0);
            probs = table.targets;
        }
        const PopulationDataset pop =
            PopulationDataset::validated(std::move(locations), std::move(probs));

        if (config.sweep) {
            if (config.sweep_steps.empty() || config.sweep_ratios.empty())
                throw input_error("sample: --sweep needs --sweep-steps and --sweep-ratios");
            const SweepResult sweep = sweep_sampler(pop, config.sample_n, config.sweep_steps,
                                                    config.sweep_ratios, config.seed);
            CsvWriter w((dir / "sweep.csv").string());
            w.write_row({"step_size", "initial_ratio", "c_eff", "entropy", "argmax"});
            for (std::size_t i = 0; i < sweep.cells.size(); ++i) {
                const SweepCell& cell = sweep.cells[i];
                w.write_row({std::to_string(cell.step_size),
                             format_double(cell.initial_ratio),
                             format_double(cell.metrics.c_eff),
                             format_double(cell.metrics.entropy),
                             i == sweep.argmax ? "1" : "0"});
            }
            w.close();
            result.outputs.push_back("sweep.csv");
        } else {
            SamplerConfig sc;
            sc.n = config.sample_n;
            sc.step_size = config.step_size;
            sc.initial_ratio = config.initial_ratio;
            sc.seed = derive_seed(config.seed, "sample", "greedy");
            sub_seeds["sample/greedy"] = sc.seed;
            const std::vector<std::size_t> idx = greedy_stratified_sample(pop, sc);

            Eigen::MatrixXd sub(static_cast<Eigen::Index>(idx.size()), pop.probs.cols());
            for (std::size_t i = 0; i < idx.size(); ++i)
                sub.row(static_cast<Eigen::Index>(i)) =
                    pop.probs.row(static_cast<Eigen::Index>(idx[i]));
            const UniformityMetrics sample_u = uniformity(sub);
            const UniformityMetrics pop_u = uniformity(pop.probs);

            {
                CsvWriter w((dir / "sample_indices.csv").string());
                w.write_row({"row", "id"});
                for (const std::size_t r : idx)
                    w.write_row({std::to_string(r), pop.locations.ids[r]});
                w.close();
                result.outputs.push_back("sample_indices.csv");
            }
            if (have_coords) {
                CsvWriter w((dir / "sampled_locations.csv").string());
                w.write_row({"id", "lon", "lat"});
                for (const std::size_t r : idx)
                    w.write_row({pop.locations.ids[r], format_double(pop.locations.lon[r]),
                                 format_double(pop.locations.lat[r])});
                w.close();
                result.outputs.push_back("sampled_locations.csv");
            }
            nlohmann::json u;
            u["population"] = {{"c_eff", pop_u.c_eff},
                               {"entropy", pop_u.entropy},
                               {"class_mass", pop_u.class_mass}};
            u["sample"] = {{"c_eff", sample_u.c_eff},
                           {"entropy", sample_u.entropy},
                           {"class_mass", sample_u.class_mass}};
            detail::write_text(dir / "uniformity.json", u.dump(2) + "\n");
            result.outputs.push_back("uniformity.json");
        }
    } else {
        throw input_error("sample: strategy must be 'uniform' or 'greedy-lc', got '" +
                          config.strategy + "'");
    }

    detail::write_manifest(dir, "sample", config, sub_seeds, result.outputs);
    return result;
}

}  // namespace geofuse
