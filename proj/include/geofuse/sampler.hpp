#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "geofuse/csv.hpp"
#include "geofuse/dataset.hpp"
#include "geofuse/errors.hpp"
#include "geofuse/rng.hpp"

namespace geofuse {

// Spherical uniform location sampling and a greedy class-balancing sampler
// that builds a stratified subset of a population whose per-location class
// distributions are known.

// Per-location class probability rows; each row sums to 1.
struct PopulationDataset {
    LocationTable locations;
    Eigen::MatrixXd probs;  // N x C

    static PopulationDataset validated(LocationTable locations, Eigen::MatrixXd probs) {
        if (static_cast<std::size_t>(probs.rows()) != locations.size())
            throw input_error("population: row count mismatch");
        if (probs.cols() < 1) throw input_error("population: need at least one class");
        for (Eigen::Index i = 0; i < probs.rows(); ++i) {
            double sum = 0.0;
            for (Eigen::Index c = 0; c < probs.cols(); ++c) {
                const double p = probs(i, c);
                if (!(p >= 0.0 && p <= 1.0))
                    throw input_error("population: probability outside [0, 1] at row " +
                                      std::to_string(i));
                sum += p;
            }
            if (std::fabs(sum - 1.0) > 1e-6)
                throw input_error("population: row " + std::to_string(i) +
                                  " sums to " + std::to_string(sum) + ", expected 1");
        }
        return PopulationDataset{std::move(locations), std::move(probs)};
    }

    std::size_t size() const { return locations.size(); }
    Eigen::Index num_classes() const { return probs.cols(); }
};

struct SamplerConfig {
    std::size_t n = 0;            // target sample size
    std::size_t step_size = 5;    // rows added per greedy iteration
    double initial_ratio = 0.15;  // fraction of n seeded by entropy, in [0, 1)
    std::uint64_t seed = 0;
};

struct UniformityMetrics {
    double c_eff = 0.0;              // min(class_mass) / mean(class_mass), in [0, 1]
    double entropy = 0.0;            // nats, <= ln(C)
    std::vector<double> class_mass;  // aggregate p(c), sums to 1
};

// ---------------------------------------------------------------------------
// Uniform sphere sampling
// ---------------------------------------------------------------------------

// Uniform points on the sphere via uniform longitude and arcsine-distributed
// latitude; draws below min_lat are rejected and redrawn until n are
// accepted. Deterministic per seed; ids are zero-padded draw indices.
inline LocationTable sample_sphere_uniform(std::size_t n, double min_lat, std::uint64_t seed) {
    if (n < 1) throw input_error("sample_sphere_uniform: n must be positive");
    if (min_lat >= 90.0)
        throw input_error("sample_sphere_uniform: min_lat must be below 90");
    constexpr double rad_to_deg = 57.29577951308232;
    LocationTable t;
    t.ids.reserve(n);
    t.lon.reserve(n);
    t.lat.reserve(n);
    std::mt19937_64 gen(seed);
    std::size_t accepted = 0;
    while (accepted < n) {
        const double lon = -180.0 + 360.0 * uniform01(gen);
        const double lat = std::asin(2.0 * uniform01(gen) - 1.0) * rad_to_deg;
        if (lat < min_lat) continue;
        std::string id = std::to_string(accepted);
        t.ids.push_back(std::string(id.size() >= 7 ? 0 : 7 - id.size(), '0') + id);
        t.lon.push_back(lon);
        t.lat.push_back(lat);
        ++accepted;
    }
    return t;
}

// ---------------------------------------------------------------------------
// Uniformity metrics
// ---------------------------------------------------------------------------

// Column means of the probability rows: the sample's aggregate class mass.
inline std::vector<double> class_mass(const Eigen::MatrixXd& probs) {
    if (probs.rows() == 0) throw input_error("class_mass: empty input");
    const Eigen::VectorXd m = probs.colwise().mean();
    return std::vector<double>(m.data(), m.data() + m.size());
}

inline UniformityMetrics uniformity(const Eigen::MatrixXd& probs) {
    UniformityMetrics u;
    u.class_mass = class_mass(probs);
    const double total =
        std::accumulate(u.class_mass.begin(), u.class_mass.end(), 0.0);
    const double mean_mass = total / static_cast<double>(u.class_mass.size());
    const double min_mass = *std::min_element(u.class_mass.begin(), u.class_mass.end());
    u.c_eff = mean_mass > 0.0 ? min_mass / mean_mass : 0.0;
    u.entropy = 0.0;
    for (const double p : u.class_mass)
        if (p > 0.0) u.entropy -= p * std::log(p);
    return u;
}

// ---------------------------------------------------------------------------
// Greedy stratified sampling
// ---------------------------------------------------------------------------

namespace detail {

inline double row_entropy(const Eigen::MatrixXd& probs, std::size_t row) {
    double h = 0.0;
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
        const double p = probs(static_cast<Eigen::Index>(row), c);
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

}  // namespace detail

// Builds an n-row class-balanced sample without replacement:
//   1. seed with the floor(initial_ratio * n) highest-entropy rows;
//   2. until n rows are held: recompute the current sample's class mass, pick
//      one class c with probability proportional to max(mean - mass_c, 0)
//      (uniformly when every class sits at/above the mean, e.g. the empty
//      sample), and move the step_size remaining rows with the highest p_c
//      into the sample;
//   3. trim the final block's overshoot by dropping its lowest-p_c rows.
// Ties in entropy or p_c rank break by ascending location id. Deterministic
// per seed. Returned indices refer to population rows, in selection order.
inline std::vector<std::size_t> greedy_stratified_sample(const PopulationDataset& pop,
                                                         const SamplerConfig& config) {
    const std::size_t population_size = pop.size();
    if (config.n < 1) throw input_error("greedy sampler: n must be positive");
    if (config.n > population_size)
        throw input_error("greedy sampler: population exhausted before n (population " +
                          std::to_string(population_size) + ", n " +
                          std::to_string(config.n) + ")");
    if (config.step_size < 1) throw input_error("greedy sampler: step_size must be >= 1");
    if (!(config.initial_ratio >= 0.0 && config.initial_ratio < 1.0))
        throw input_error("greedy sampler: initial_ratio must lie in [0, 1)");
    const auto n_seed =
        static_cast<std::size_t>(std::floor(config.initial_ratio * static_cast<double>(config.n)));
    // floor(initial_ratio * n) < n holds for initial_ratio < 1

    const Eigen::Index num_classes = pop.num_classes();
    std::vector<std::size_t> selected;
    selected.reserve(config.n + config.step_size);
    std::vector<bool> taken(population_size, false);

    // Phase 1: highest-entropy seed rows (ties by ascending id).
    {
        std::vector<std::size_t> order(population_size);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::vector<double> ent(population_size);
        for (std::size_t i = 0; i < population_size; ++i)
            ent[i] = detail::row_entropy(pop.probs, i);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (ent[a] != ent[b]) return ent[a] > ent[b];
            return pop.locations.ids[a] < pop.locations.ids[b];
        });
        for (std::size_t i = 0; i < n_seed; ++i) {
            selected.push_back(order[i]);
            taken[order[i]] = true;
        }
    }

    // Phase 2: greedy class-driven additions.
    std::mt19937_64 gen(config.seed);
    Eigen::VectorXd mass_sum = Eigen::VectorXd::Zero(num_classes);
    for (const std::size_t r : selected)
        mass_sum += pop.probs.row(static_cast<Eigen::Index>(r)).transpose();

    while (selected.size() < config.n) {
        // Class weights from the current sample's class mass.
        Eigen::VectorXd weights(num_classes);
        if (selected.empty()) {
            weights.setOnes();
        } else {
            const Eigen::VectorXd mass = mass_sum / static_cast<double>(selected.size());
            const double mean_mass = mass.mean();
            for (Eigen::Index c = 0; c < num_classes; ++c)
                weights[c] = std::max(mean_mass - mass[c], 0.0);
            if (weights.sum() <= 0.0) weights.setOnes();  // all classes at/above mean
        }
        // Draw one class proportional to weight.
        const double u = uniform01(gen) * weights.sum();
        Eigen::Index chosen = num_classes - 1;
        double cum = 0.0;
        for (Eigen::Index c = 0; c < num_classes; ++c) {
            cum += weights[c];
            if (u < cum) {
                chosen = c;
                break;
            }
        }

        // The step_size remaining rows with the highest p_chosen, added in
        // descending-p order so overshoot trimming drops the weakest rows.
        std::vector<std::size_t> remaining;
        remaining.reserve(population_size - selected.size());
        for (std::size_t r = 0; r < population_size; ++r)
            if (!taken[r]) remaining.push_back(r);
        if (remaining.empty())
            throw input_error("greedy sampler: population exhausted before n");
        const std::size_t block = std::min(config.step_size, remaining.size());
        std::partial_sort(remaining.begin(),
                          remaining.begin() + static_cast<std::ptrdiff_t>(block),
                          remaining.end(), [&](std::size_t a, std::size_t b) {
                              const double pa = pop.probs(static_cast<Eigen::Index>(a), chosen);
                              const double pb = pop.probs(static_cast<Eigen::Index>(b), chosen);
                              if (pa != pb) return pa > pb;
                              return pop.locations.ids[a] < pop.locations.ids[b];
                          });
        for (std::size_t i = 0; i < block; ++i) {
            const std::size_t r = remaining[i];
            selected.push_back(r);
            taken[r] = true;
            mass_sum += pop.probs.row(static_cast<Eigen::Index>(r)).transpose();
        }
    }

    // Phase 3: drop the overshoot — the lowest-p_c rows of the final block
    // are exactly its last-added entries.
    while (selected.size() > config.n) {
        taken[selected.back()] = false;
        selected.pop_back();
    }
    return selected;
}

// One grid cell of the hyperparameter sweep.
struct SweepCell {
    std::size_t step_size = 0;
    double initial_ratio = 0.0;
    UniformityMetrics metrics;
};

struct SweepResult {
    std::vector<SweepCell> cells;  // row-major over (step_sizes x initial_ratios)
    std::size_t argmax = 0;        // index of the highest-c_eff cell
};

// Runs the greedy sampler per (step_size, initial_ratio) grid cell, each with
// an independently derived sub-seed, and reports c_eff per cell plus the
// argmax cell.
inline SweepResult sweep_sampler(const PopulationDataset& pop, std::size_t n,
                                 const std::vector<std::size_t>& step_sizes,
                                 const std::vector<double>& initial_ratios,
                                 std::uint64_t seed) {
    if (step_sizes.empty() || initial_ratios.empty())
        throw input_error("sweep_sampler: empty grid");
    SweepResult result;
    for (const std::size_t s : step_sizes) {
        for (const double r : initial_ratios) {
            SamplerConfig config;
            config.n = n;
            config.step_size = s;
            config.initial_ratio = r;
            config.seed = derive_seed(seed, "sweep",
                                      "step=" + std::to_string(s) +
                                          "/ratio=" + format_double(r));
            const std::vector<std::size_t> idx = greedy_stratified_sample(pop, config);
            Eigen::MatrixXd sub(static_cast<Eigen::Index>(idx.size()), pop.probs.cols());
            for (std::size_t i = 0; i < idx.size(); ++i)
                sub.row(static_cast<Eigen::Index>(i)) =
                    pop.probs.row(static_cast<Eigen::Index>(idx[i]));
            SweepCell cell;
            cell.step_size = s;
            cell.initial_ratio = r;
            cell.metrics = uniformity(sub);
            result.cells.push_back(std::move(cell));
        }
    }
    result.argmax = 0;
    for (std::size_t i = 1; i < result.cells.size(); ++i)
        if (result.cells[i].metrics.c_eff > result.cells[result.argmax].metrics.c_eff)
            result.argmax = i;
    return result;
}

}  // namespace geofuse
