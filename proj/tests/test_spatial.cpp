#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>
#include <vector>

#include "geofuse/errors.hpp"
#include "geofuse/spatial.hpp"

using namespace geofuse;
using Catch::Approx;

namespace {

constexpr double kPi = 3.141592653589793;

LocationTable grid_locations(const std::vector<double>& lon, const std::vector<double>& lat) {
    LocationTable loc;
    loc.lon = lon;
    loc.lat = lat;
    loc.ids.resize(lon.size());
    for (std::size_t i = 0; i < lon.size(); ++i) loc.ids[i] = "p" + std::to_string(i);
    return loc;
}

// Quadratic-time reference histogram built directly from haversine distances
// in the original row order, independent of the production implementation's
// latitude-window traversal and dot-product binning.
PairDensity brute_force_density(const std::vector<double>& values, const LocationTable& loc,
                                double max_dist, std::size_t bins) {
    PairDensity density;
    density.bins = bins;
    density.max_dist_km = max_dist;
    density.weights.assign(bins * bins, 0.0);
    const double width = max_dist / static_cast<double>(bins);
    for (std::size_t i = 0; i < loc.size(); ++i) {
        for (std::size_t j = i + 1; j < loc.size(); ++j) {
            const double dist =
                haversine_km(loc.lon[i], loc.lat[i], loc.lon[j], loc.lat[j]);
            if (dist > max_dist) continue;
            auto dist_bin = static_cast<std::size_t>(dist / width);
            if (dist_bin >= bins) dist_bin = bins - 1;
            const double d = values[i] - values[j];
            auto diff_bin = static_cast<std::size_t>(d * d * static_cast<double>(bins));
            if (diff_bin >= bins) diff_bin = bins - 1;
            density.at(dist_bin, diff_bin) += std::max(values[i], values[j]);
        }
    }
    return density;
}

EntropyCurve synthetic_curve(double h0, double h_max, double d, double noise_sigma,
                             unsigned seed) {
    EntropyCurve curve;
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> noise(0.0, noise_sigma);
    for (int b = 0; b < 100; ++b) {
        const double x = 10.0 * b + 5.0;
        curve.distance_bin_centers.push_back(x);
        double h = h_max - (h_max - h0) * std::exp(-x / d);
        if (noise_sigma > 0.0) h += noise(gen);
        curve.entropy.push_back(h);
        curve.valid_mask.push_back(true);
    }
    return curve;
}

}  // namespace

TEST_CASE("haversine distance basics") {
    REQUIRE(haversine_km(12.5, -33.0, 12.5, -33.0) == 0.0);
    // Antipodal points sit exactly half the circumference apart.
    REQUIRE(haversine_km(0, 0, 180, 0) == Approx(kPi * earth_radius_km).epsilon(1e-12));
    // A quarter turn along the equator or up to the pole.
    REQUIRE(haversine_km(0, 0, 90, 0) == Approx(0.5 * kPi * earth_radius_km).epsilon(1e-12));
    REQUIRE(haversine_km(0, 0, 0, 90) == Approx(0.5 * kPi * earth_radius_km).epsilon(1e-12));
    // One degree of latitude, anywhere on the globe.
    REQUIRE(haversine_km(7.0, 46.0, 7.0, 47.0) ==
            Approx(earth_radius_km * kPi / 180.0).epsilon(1e-12));
    // Symmetry in the argument order.
    REQUIRE(haversine_km(10, 50, 11, 51) == Approx(haversine_km(11, 51, 10, 50)));
}

TEST_CASE("pair density of a single close pair lands in one cell") {
    const auto loc = grid_locations({0.0, 0.0}, {0.0, 0.005});
    const auto density = weighted_pair_density({1.0, 0.0}, loc);
    REQUIRE(density.bins == 100);
    double total = 0.0;
    for (const double w : density.weights) total += w;
    REQUIRE(total == Approx(1.0));
    // Distance under 1 km -> first distance bin; squared difference 1 -> last
    // difference bin; weight is the larger value.
    REQUIRE(density.at(0, 99) == Approx(1.0));
}

TEST_CASE("pair density of equal values uses the first difference bin") {
    const auto loc = grid_locations({0.0, 0.0}, {0.0, 0.005});
    const auto density = weighted_pair_density({0.7, 0.7}, loc);
    REQUIRE(density.at(0, 0) == Approx(0.7));
}

TEST_CASE("pair density drops pairs beyond the distance cutoff") {
    // Twelve degrees of longitude at the equator is ~1334 km.
    const auto loc = grid_locations({0.0, 12.0}, {0.0, 0.0});
    const auto density = weighted_pair_density({1.0, 1.0}, loc);
    for (const double w : density.weights) REQUIRE(w == 0.0);
}

TEST_CASE("pair density with all-zero values carries no weight") {
    const auto loc = grid_locations({0.0, 0.0}, {0.0, 0.005});
    const auto density = weighted_pair_density({0.0, 0.0}, loc);
    double total = 0.0;
    for (const double w : density.weights) total += w;
    REQUIRE(total == 0.0);
    REQUIRE_THROWS_AS(entropy_curve(density), input_error);
}

TEST_CASE("pair density matches a quadratic-time reference on random data") {
    std::mt19937_64 gen(404);
    std::uniform_real_distribution<double> lat_dist(40.0, 50.0);
    std::uniform_real_distribution<double> lon_dist(10.0, 20.0);
    std::uniform_real_distribution<double> val_dist(0.0, 1.0);
    const std::size_t n = 500;
    std::vector<double> lon(n), lat(n), values(n);
    for (std::size_t i = 0; i < n; ++i) {
        lon[i] = lon_dist(gen);
        lat[i] = lat_dist(gen);
        values[i] = val_dist(gen);
    }
    const auto loc = grid_locations(lon, lat);

    const auto fast = weighted_pair_density(values, loc);
    const auto slow = brute_force_density(values, loc, 1000.0, 100);

    double max_diff = 0.0, fast_total = 0.0, slow_total = 0.0;
    for (std::size_t c = 0; c < fast.weights.size(); ++c) {
        max_diff = std::max(max_diff, std::abs(fast.weights[c] - slow.weights[c]));
        fast_total += fast.weights[c];
        slow_total += slow.weights[c];
    }
    REQUIRE(fast_total > 0.0);
    REQUIRE(fast_total == Approx(slow_total).margin(1e-9));
    REQUIRE(max_diff <= 1e-9);
}

TEST_CASE("pair density is invariant under input row order") {
    std::mt19937_64 gen(77);
    std::uniform_real_distribution<double> coord(0.0, 8.0);
    std::uniform_real_distribution<double> val_dist(0.0, 1.0);
    const std::size_t n = 120;
    std::vector<double> lon(n), lat(n), values(n);
    for (std::size_t i = 0; i < n; ++i) {
        lon[i] = coord(gen);
        lat[i] = coord(gen);
        values[i] = val_dist(gen);
    }
    const auto forward = weighted_pair_density(values, grid_locations(lon, lat));

    std::vector<double> rlon(lon.rbegin(), lon.rend());
    std::vector<double> rlat(lat.rbegin(), lat.rend());
    std::vector<double> rval(values.rbegin(), values.rend());
    const auto reversed = weighted_pair_density(rval, grid_locations(rlon, rlat));

    REQUIRE(forward.weights == reversed.weights);
}

TEST_CASE("pair density validates its inputs") {
    const auto loc = grid_locations({0.0, 0.0}, {0.0, 0.005});
    REQUIRE_THROWS_AS(weighted_pair_density({1.0}, loc), input_error);
    REQUIRE_THROWS_AS(weighted_pair_density({1.0, 1.5}, loc), input_error);
    REQUIRE_THROWS_AS(weighted_pair_density({-0.1, 0.5}, loc), input_error);
    REQUIRE_THROWS_AS(
        weighted_pair_density({std::nan(""), 0.5}, loc), input_error);
    REQUIRE_THROWS_AS(weighted_pair_density({1.0, 0.5}, loc, 1000.0, 0), input_error);
    REQUIRE_THROWS_AS(weighted_pair_density({1.0, 0.5}, loc, 0.0), input_error);
    REQUIRE_THROWS_AS(weighted_pair_density({1.0, 0.5}, loc, -5.0), input_error);
}

TEST_CASE("entropy per distance bin") {
    PairDensity density;
    density.bins = 4;
    density.max_dist_km = 100.0;
    density.weights.assign(16, 0.0);
    density.at(0, 2) = 3.0;                                      // single cell
    for (std::size_t c = 0; c < 4; ++c) density.at(1, c) = 0.5;  // uniform
    density.at(2, 0) = 0.5;                                      // two equal cells
    density.at(2, 3) = 0.5;
    // Row 3 stays empty -> masked.

    const auto curve = entropy_curve(density);
    REQUIRE(curve.distance_bin_centers ==
            std::vector<double>{12.5, 37.5, 62.5, 87.5});
    REQUIRE(curve.valid_mask[0]);
    REQUIRE(curve.entropy[0] == 0.0);
    REQUIRE(curve.valid_mask[1]);
    REQUIRE(curve.entropy[1] == Approx(std::log(4.0)).epsilon(1e-12));
    REQUIRE(curve.valid_mask[2]);
    REQUIRE(curve.entropy[2] == Approx(std::log(2.0)).epsilon(1e-12));
    REQUIRE_FALSE(curve.valid_mask[3]);
}

TEST_CASE("entropy masks distance bins holding almost no weight") {
    PairDensity density;
    density.bins = 3;
    density.max_dist_km = 30.0;
    density.weights.assign(9, 0.0);
    density.at(0, 0) = 1.0;
    density.at(1, 1) = 1e-12;  // relative share ~1e-12 < 1e-9
    const auto curve = entropy_curve(density);
    REQUIRE(curve.valid_mask[0]);
    REQUIRE_FALSE(curve.valid_mask[1]);
    REQUIRE_FALSE(curve.valid_mask[2]);
}

TEST_CASE("closed-form level fit recovers exact exponential coefficients") {
    std::vector<double> x, h;
    for (int i = 0; i < 12; ++i) {
        x.push_back(15.0 * i + 5.0);
        h.push_back(2.0 - 1.5 * std::exp(-x.back() / 80.0));
    }
    const auto fit = detail::exp_fit_at_scale(x, h, 80.0);
    REQUIRE(fit.a == Approx(2.0).margin(1e-9));
    REQUIRE(fit.b == Approx(-1.5).margin(1e-9));
    REQUIRE(fit.rss == Approx(0.0).margin(1e-18));
}

TEST_CASE("scale fit recovers a noise-free decay length") {
    const auto curve = synthetic_curve(1.0, 4.0, 120.0, 0.0, 0);
    const auto fit = fit_spatial_scale(curve);
    REQUIRE_FALSE(fit.degenerate);
    REQUIRE(fit.d == Approx(120.0).epsilon(1e-4));
    REQUIRE(fit.h0 == Approx(1.0).margin(1e-6));
    REQUIRE(fit.h_max == Approx(4.0).margin(1e-6));
    REQUIRE(fit.rss < 1e-12);
}

TEST_CASE("scale fit recovers the decay length under noise") {
    for (unsigned seed : {1u, 2u, 3u}) {
        const auto curve = synthetic_curve(1.0, 4.0, 120.0, 0.01, seed);
        const auto fit = fit_spatial_scale(curve);
        REQUIRE_FALSE(fit.degenerate);
        REQUIRE(fit.d == Approx(120.0).epsilon(0.05));
        REQUIRE(fit.h0 == Approx(1.0).margin(0.05));
        REQUIRE(fit.h_max == Approx(4.0).margin(0.05));

        // The returned d is a local minimum of the residual profile.
        std::vector<double> x = curve.distance_bin_centers;
        std::vector<double> h = curve.entropy;
        const double at_fit = detail::exp_fit_at_scale(x, h, fit.d).rss;
        REQUIRE(detail::exp_fit_at_scale(x, h, fit.d * 1.05).rss >= at_fit);
        REQUIRE(detail::exp_fit_at_scale(x, h, fit.d * 0.95).rss >= at_fit);
    }
}

TEST_CASE("scale fit flags flat and inverted curves as degenerate") {
    EntropyCurve flat;
    for (int b = 0; b < 10; ++b) {
        flat.distance_bin_centers.push_back(10.0 * b + 5.0);
        flat.entropy.push_back(2.0);
        flat.valid_mask.push_back(true);
    }
    const auto flat_fit = fit_spatial_scale(flat);
    REQUIRE(flat_fit.degenerate);
    REQUIRE(flat_fit.h0 == Approx(2.0).margin(1e-9));
    REQUIRE(flat_fit.h_max == Approx(2.0).margin(1e-9));
    REQUIRE(flat_fit.rss == Approx(0.0).margin(1e-12));

    // Entropy falling with distance is outside the saturating model.
    const auto inverted = synthetic_curve(4.0, 1.0, 120.0, 0.0, 0);
    REQUIRE(fit_spatial_scale(inverted).degenerate);
}

TEST_CASE("scale fit needs at least four valid bins") {
    EntropyCurve tiny;
    for (int b = 0; b < 3; ++b) {
        tiny.distance_bin_centers.push_back(10.0 * b + 5.0);
        tiny.entropy.push_back(1.0 + b);
        tiny.valid_mask.push_back(true);
    }
    REQUIRE_THROWS_AS(fit_spatial_scale(tiny), input_error);
}

TEST_CASE("scale fit ignores masked bins") {
    auto curve = synthetic_curve(1.0, 4.0, 120.0, 0.0, 0);
    // Corrupt a handful of bins but mask them out; the fit must not move.
    for (std::size_t b = 10; b < 15; ++b) {
        curve.entropy[b] = 40.0;
        curve.valid_mask[b] = false;
    }
    const auto fit = fit_spatial_scale(curve);
    REQUIRE(fit.d == Approx(120.0).epsilon(1e-3));
}

TEST_CASE("scale-score correlation is rank based") {
    const std::vector<double> d = {50.0, 120.0, 300.0, 800.0, 1500.0};
    const std::vector<double> rising = {10.0, 20.0, 25.0, 60.0, 90.0};
    const auto up = scale_score_correlation(d, rising);
    REQUIRE(up.statistic == Approx(1.0));

    std::vector<double> falling(rising.rbegin(), rising.rend());
    const auto down = scale_score_correlation(d, falling);
    REQUIRE(down.statistic == Approx(-1.0));

    REQUIRE_THROWS_AS(scale_score_correlation({1.0, 2.0}, {1.0}), input_error);
}
