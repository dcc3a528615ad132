#pragma once

#include <cstdint>
#include <cstdio>
#include <json.hpp>
#include <string>
#include <vector>

#include "geofuse/errors.hpp"
#include "geofuse/rng.hpp"

namespace geofuse {

// Configuration shared by all commands, loadable from a JSON file and
// overridable by command-line flags of the same names. Every run writes its
// outputs into a sub-directory named <command>-<hash> where <hash> digests
// the effective config, so identical invocations share a directory and
// differing ones never collide.

struct EmbeddingSpec {
    std::string name;
    std::string path;
};

struct TaskSpec {
    std::string name;
    std::string path;
    std::string kind;  // "regression" or "multiclass"
};

struct RunConfig {
    // Shared inputs
    std::string locations;
    std::vector<EmbeddingSpec> embeddings;
    std::vector<TaskSpec> tasks;
    std::string combos = "singles";  // comma list of: singles, pairs, all, a+b
    std::size_t folds = 20;
    std::uint64_t seed = 0;
    double lambda = 1.0;
    std::string zscore = "fold";  // "fold" or "global"
    double fdr = 0.05;
    bool per_location = false;
    std::string out = "runs";

    // complementarity: path to a completed evaluation output directory
    std::string evaluation;

    // spatial-scale: optional per-class score table for correlations
    std::string class_scores;

    // sample
    std::string strategy = "greedy-lc";  // "uniform" or "greedy-lc"
    std::size_t sample_n = 0;
    double min_lat = -56.0;
    std::string population;
    std::size_t step_size = 5;
    double initial_ratio = 0.15;
    bool sweep = false;
    std::vector<std::size_t> sweep_steps;
    std::vector<double> sweep_ratios;
};

inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j;
    j["locations"] = c.locations;
    nlohmann::json embs = nlohmann::json::array();
    for (const auto& e : c.embeddings) embs.push_back({{"name", e.name}, {"path", e.path}});
    j["embeddings"] = embs;
    nlohmann::json tasks = nlohmann::json::array();
    for (const auto& t : c.tasks)
        tasks.push_back({{"name", t.name}, {"path", t.path}, {"kind", t.kind}});
    j["tasks"] = tasks;
    j["combos"] = c.combos;
    j["folds"] = c.folds;
    j["seed"] = c.seed;
    j["lambda"] = c.lambda;
    j["zscore"] = c.zscore;
    j["fdr"] = c.fdr;
    j["per_location"] = c.per_location;
    j["out"] = c.out;
    j["evaluation"] = c.evaluation;
    j["class_scores"] = c.class_scores;
    j["strategy"] = c.strategy;
    j["sample_n"] = c.sample_n;
    j["min_lat"] = c.min_lat;
    j["population"] = c.population;
    j["step_size"] = c.step_size;
    j["initial_ratio"] = c.initial_ratio;
    j["sweep"] = c.sweep;
    j["sweep_steps"] = c.sweep_steps;
    j["sweep_ratios"] = c.sweep_ratios;
    return j;
}

inline void from_json_into(const nlohmann::json& j, RunConfig& c) {
    const auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("locations", c.locations);
    if (j.contains("embeddings")) {
        c.embeddings.clear();
        for (const auto& e : j.at("embeddings"))
            c.embeddings.push_back({e.at("name").get<std::string>(),
                                    e.at("path").get<std::string>()});
    }
    if (j.contains("tasks")) {
        c.tasks.clear();
        for (const auto& t : j.at("tasks"))
            c.tasks.push_back({t.at("name").get<std::string>(),
                               t.at("path").get<std::string>(),
                               t.at("kind").get<std::string>()});
    }
    get("combos", c.combos);
    get("folds", c.folds);
    get("seed", c.seed);
    get("lambda", c.lambda);
    get("zscore", c.zscore);
    get("fdr", c.fdr);
    get("per_location", c.per_location);
    get("out", c.out);
    get("evaluation", c.evaluation);
    get("class_scores", c.class_scores);
    get("strategy", c.strategy);
    get("sample_n", c.sample_n);
    get("min_lat", c.min_lat);
    get("population", c.population);
    get("step_size", c.step_size);
    get("initial_ratio", c.initial_ratio);
    get("sweep", c.sweep);
    get("sweep_steps", c.sweep_steps);
    get("sweep_ratios", c.sweep_ratios);
}

// 16-hex-digit digest of the canonical (sorted-key) JSON serialization.
inline std::string config_hash(const RunConfig& c) {
    const std::uint64_t h = fnv1a64(to_json(c).dump());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

// Expands the combination grammar against the loaded model names:
// comma-separated tokens, each one of `singles`, `pairs`, `all`, or an
// explicit "+"-joined name list. Duplicate combos collapse, first occurrence
// wins the ordering.
inline std::vector<std::vector<std::string>> expand_combos(
    const std::vector<std::string>& model_names, const std::string& spec) {
    if (model_names.empty()) throw input_error("combos: no models loaded");
    std::vector<std::vector<std::string>> combos;
    std::vector<std::string> seen;
    const auto add = [&](std::vector<std::string> combo) {
        std::string key;
        for (const auto& m : combo) key += m + "+";
        for (const auto& k : seen)
            if (k == key) return;
        seen.push_back(key);
        combos.push_back(std::move(combo));
    };
    std::size_t start = 0;
    const std::string s = spec.empty() ? std::string("singles") : spec;
    while (start <= s.size()) {
        const std::size_t pos = s.find(',', start);
        const std::string token =
            s.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
        start = pos == std::string::npos ? s.size() + 1 : pos + 1;
        if (token.empty()) continue;
        if (token == "singles") {
            for (const auto& m : model_names) add({m});
        } else if (token == "pairs") {
            for (std::size_t i = 0; i < model_names.size(); ++i)
                for (std::size_t j = i + 1; j < model_names.size(); ++j)
                    add({model_names[i], model_names[j]});
        } else if (token == "all") {
            add(model_names);
        } else {
            // Explicit "+"-joined model names.
            std::vector<std::string> combo;
            std::size_t p = 0;
            while (p <= token.size()) {
                const std::size_t q = token.find('+', p);
                const std::string name =
                    token.substr(p, q == std::string::npos ? std::string::npos : q - p);
                p = q == std::string::npos ? token.size() + 1 : q + 1;
                if (name.empty()) throw input_error("combos: malformed token '" + token + "'");
                bool known = false;
                for (const auto& m : model_names) known = known || m == name;
                if (!known)
                    throw input_error("combos: unknown model '" + name + "' in '" + token + "'");
                combo.push_back(name);
            }
            add(std::move(combo));
        }
    }
    if (combos.empty()) throw input_error("combos: empty list");
    return combos;
}

inline std::string combo_name(const std::vector<std::string>& combo) {
    std::string name;
    for (std::size_t i = 0; i < combo.size(); ++i) {
        if (i) name += "+";
        name += combo[i];
    }
    return name;
}

}  // namespace geofuse
