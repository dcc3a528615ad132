#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "geofuse/dataset.hpp"
#include "geofuse/errors.hpp"
#include "geofuse/probes.hpp"
#include "geofuse/stats.hpp"

namespace geofuse {

// The complementarity index: normalized gain of a fused embedding over its
// best constituent single model, relative to the headroom to the best
// possible score. Positive iff fusion strictly beats the best single model,
// and bounded above by 1.

enum class Direction { maximize, minimize };

struct ComplementarityCell {
    std::string combo_name;
    std::string task_name;
    double index = 0.0;            // <= 1
    double fused_mean = 0.0;       // percent
    double best_single_mean = 0.0; // percent
    double p_value = 1.0;          // one-sided Wilcoxon, fused vs best single
    double p_adjusted = 1.0;       // filled by the caller's BH family
    std::string significance;      // "", "*", "**", "***"
};

// Per-location index values; clipping below at -1 happens only at export so
// analysis keeps the raw values.
struct LocationComplementarityMap {
    std::vector<std::string> ids;
    std::vector<double> lon;
    std::vector<double> lat;
    std::vector<double> c_values;  // unclipped

    std::vector<double> export_clipped() const {
        std::vector<double> out(c_values.size());
        for (std::size_t i = 0; i < c_values.size(); ++i)
            out[i] = std::max(c_values[i], -1.0);
        return out;
    }
};

// (fused - best(singles)) / (best_possible - best(singles)), where best()
// selects max under maximize and min under minimize; the sign convention is
// therefore identical in both directions. A zero denominator (some single
// model already attains best_possible) returns 0: a perfect baseline cannot
// be complemented.
inline double complementarity_index(double fused_score, const std::vector<double>& single_scores,
                                    double best_possible, Direction direction) {
    if (single_scores.empty())
        throw input_error("complementarity_index: no single-model scores");
    const bool maximize = direction == Direction::maximize;
    const double best_single =
        maximize ? *std::max_element(single_scores.begin(), single_scores.end())
                 : *std::min_element(single_scores.begin(), single_scores.end());
    const double most_extreme = maximize ? std::max(best_single, fused_score)
                                         : std::min(best_single, fused_score);
    if (maximize ? best_possible < most_extreme : best_possible > most_extreme)
        throw input_error("complementarity_index: best_possible is worse than an input score");
    const double denom = best_possible - best_single;
    if (denom == 0.0) return 0.0;
    return (fused_score - best_single) / denom;
}

// Whole-task cell: index from mean scores with best_possible = 100 (percent
// metrics), p-value from a one-sided Wilcoxon signed-rank test of the fused
// fold scores against the best single model's fold scores. When the fused
// report duplicates the best single exactly (all paired differences zero) the
// Wilcoxon test is undefined; the cell then reports p = 1 (no evidence).
inline ComplementarityCell task_complementarity(const EvaluationReport& fused,
                                                const std::vector<EvaluationReport>& singles,
                                                double best_possible = 100.0) {
    if (singles.empty()) throw input_error("task_complementarity: no single-model reports");
    for (const auto& s : singles) {
        if (s.task_name != fused.task_name)
            throw input_error("task_complementarity: reports mix tasks");
        if (s.fold_scores.size() != fused.fold_scores.size())
            throw input_error("task_complementarity: mismatched fold counts");
    }
    const auto best = std::max_element(
        singles.begin(), singles.end(),
        [](const EvaluationReport& a, const EvaluationReport& b) { return a.mean < b.mean; });

    ComplementarityCell cell;
    cell.combo_name = fused.embedding_name;
    cell.task_name = fused.task_name;
    cell.fused_mean = fused.mean;
    cell.best_single_mean = best->mean;

    std::vector<double> single_means;
    single_means.reserve(singles.size());
    for (const auto& s : singles) single_means.push_back(s.mean);
    cell.index =
        complementarity_index(fused.mean, single_means, best_possible, Direction::maximize);

    bool all_zero = true;
    for (std::size_t i = 0; i < fused.fold_scores.size(); ++i)
        if (fused.fold_scores[i] != best->fold_scores[i]) all_zero = false;
    if (all_zero) {
        cell.p_value = 1.0;
    } else {
        cell.p_value =
            wilcoxon_one_sided(fused.fold_scores, best->fold_scores, Alternative::greater)
                .p_value;
    }
    cell.p_adjusted = cell.p_value;
    cell.significance = "";
    return cell;
}

// Per-location index from location-wise MSE (a minimized metric with best
// possible value 0): (min_single - fused) / min_single. Locations where the
// best single model already has zero error receive 0 by the denominator
// convention.
inline LocationComplementarityMap per_location_complementarity(
    const EvaluationReport& fused, const std::vector<EvaluationReport>& singles,
    const LocationTable& locations) {
    if (singles.empty())
        throw input_error("per_location_complementarity: no single-model reports");
    if (!fused.has_per_location)
        throw input_error("per_location_complementarity: fused report lacks per-location "
                          "errors (classification tasks have none)");
    for (const auto& s : singles)
        if (!s.has_per_location)
            throw input_error("per_location_complementarity: a single-model report lacks "
                              "per-location errors");
    const std::size_t n = locations.size();
    if (fused.per_location_error.size() != n)
        throw input_error("per_location_complementarity: location count mismatch");
    for (const auto& s : singles)
        if (s.per_location_error.size() != n)
            throw input_error("per_location_complementarity: location count mismatch");

    LocationComplementarityMap map;
    map.ids = locations.ids;
    map.lon = locations.lon;
    map.lat = locations.lat;
    map.c_values.resize(n);
    std::vector<double> single_mses(singles.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t s = 0; s < singles.size(); ++s)
            single_mses[s] = singles[s].per_location_error[i];
        map.c_values[i] = complementarity_index(fused.per_location_error[i], single_mses,
                                                0.0, Direction::minimize);
    }
    return map;
}

}  // namespace geofuse
