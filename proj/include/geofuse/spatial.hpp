#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "geofuse/dataset.hpp"
#include "geofuse/errors.hpp"
#include "geofuse/stats.hpp"

namespace geofuse {

// Spherical geometry, pairwise distance binning, per-bin entropy curves, and
// exponential-decay fitting: estimates a spatial scale d (km) per variable as
// the decay length at which the entropy of pairwise value differences
// saturates with distance.

inline constexpr double earth_radius_km = 6371.0088;

// Great-circle distance between two lon/lat points in degrees.
inline double haversine_km(double lon1, double lat1, double lon2, double lat2) {
    constexpr double deg = 0.017453292519943295;  // pi / 180
    const double phi1 = lat1 * deg;
    const double phi2 = lat2 * deg;
    const double dphi = (lat2 - lat1) * deg;
    const double dlam = (lon2 - lon1) * deg;
    const double sp = std::sin(0.5 * dphi);
    const double sl = std::sin(0.5 * dlam);
    const double h = sp * sp + std::cos(phi1) * std::cos(phi2) * sl * sl;
    return 2.0 * earth_radius_km * std::asin(std::min(1.0, std::sqrt(h)));
}

// ---------------------------------------------------------------------------
// Weighted pair density
// ---------------------------------------------------------------------------

// B x B histogram over (distance bin, squared-difference bin), distance-major.
struct PairDensity {
    std::size_t bins = 0;
    double max_dist_km = 0.0;
    std::vector<double> weights;  // bins * bins, row = distance bin

    double& at(std::size_t dist_bin, std::size_t diff_bin) {
        return weights[dist_bin * bins + diff_bin];
    }
    double at(std::size_t dist_bin, std::size_t diff_bin) const {
        return weights[dist_bin * bins + diff_bin];
    }
};

// Accumulates, over all unordered location pairs with great-circle distance
// <= max_dist_km, the weight max(y1, y2) into the cell indexed by the
// distance bin (linear over [0, max_dist]) and the squared-difference bin
// ((y1-y2)^2, linear over [0, 1]). Values must lie in [0, 1].
//
// Performance: rows are processed in ascending-latitude order with a
// two-pointer window, so pairs whose latitude difference alone exceeds
// max_dist are never visited. Inside the window the central angle comes from
// the dot product of precomputed unit vectors — the chord form of the same
// great-circle distance, with distance-bin edges precomputed in dot space so
// the hot loop does no trigonometry. Accumulation order is a fixed function
// of the input, independent of any parallel scheduling.
inline PairDensity weighted_pair_density(const std::vector<double>& values,
                                         const LocationTable& locations,
                                         double max_dist_km = 1000.0, std::size_t bins = 100) {
    const std::size_t n = locations.size();
    if (values.size() != n)
        throw input_error("weighted_pair_density: values/location count mismatch");
    if (bins == 0) throw input_error("weighted_pair_density: bins must be positive");
    if (!(max_dist_km > 0.0))
        throw input_error("weighted_pair_density: max_dist must be positive");
    for (const double v : values)
        if (!(v >= 0.0 && v <= 1.0))
            throw input_error("weighted_pair_density: values must lie in [0, 1]");

    PairDensity density;
    density.bins = bins;
    density.max_dist_km = max_dist_km;
    density.weights.assign(bins * bins, 0.0);

    // Ascending-latitude processing order.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return locations.lat[a] < locations.lat[b];
    });

    constexpr double deg = 0.017453292519943295;
    std::vector<double> ux(n), uy(n), uz(n), lat_sorted(n), val_sorted(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = order[i];
        const double phi = locations.lat[r] * deg;
        const double lam = locations.lon[r] * deg;
        ux[i] = std::cos(phi) * std::cos(lam);
        uy[i] = std::cos(phi) * std::sin(lam);
        uz[i] = std::sin(phi);
        lat_sorted[i] = locations.lat[r];
        val_sorted[i] = values[r];
    }

    // Distance-bin edges expressed as dot-product thresholds: distance <= e
    // iff dot >= cos(e / R). dot_edges is descending in bin index.
    std::vector<double> dot_edges(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) {
        const double e_km = max_dist_km * static_cast<double>(b) / static_cast<double>(bins);
        dot_edges[b] = std::cos(e_km / earth_radius_km);
    }
    const double min_dot = dot_edges[bins];
    const double max_dlat_deg = max_dist_km / (earth_radius_km * deg);

    const auto diff_bins = static_cast<double>(bins);
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = ux[i], yi = uy[i], zi = uz[i], vi = val_sorted[i];
        const double lat_limit = lat_sorted[i] + max_dlat_deg;
        for (std::size_t j = i + 1; j < n && lat_sorted[j] <= lat_limit; ++j) {
            const double dot = xi * ux[j] + yi * uy[j] + zi * uz[j];
            if (dot < min_dot) continue;
            // Floor binning: the last edge index whose distance does not
            // exceed the pair's, i.e. the last b with dot_edges[b] >= dot
            // (edges descend in dot space).
            std::size_t lo = 0, hi = bins + 1;
            while (hi - lo > 1) {
                const std::size_t mid = (lo + hi) / 2;
                if (dot_edges[mid] >= dot)
                    lo = mid;
                else
                    hi = mid;
            }
            const std::size_t dist_bin = std::min(lo, bins - 1);
            const double vj = val_sorted[j];
            const double d = vi - vj;
            const double sq = d * d;
            auto diff_bin = static_cast<std::size_t>(sq * diff_bins);
            if (diff_bin >= bins) diff_bin = bins - 1;
            density.at(dist_bin, diff_bin) += std::max(vi, vj);
        }
    }
    return density;
}

// ---------------------------------------------------------------------------
// Entropy curve
// ---------------------------------------------------------------------------

struct EntropyCurve {
    std::vector<double> distance_bin_centers;  // km
    std::vector<double> entropy;               // nats; meaningful where valid
    std::vector<bool> valid_mask;              // sufficient weight per bin
};

// Shannon entropy (natural log) of the normalized squared-difference
// distribution per distance bin. Bins holding less than 1e-9 of the grand
// total weight are masked invalid rather than reported as zero entropy.
inline EntropyCurve entropy_curve(const PairDensity& density) {
    const std::size_t bins = density.bins;
    const double total =
        std::accumulate(density.weights.begin(), density.weights.end(), 0.0);
    if (!(total > 0.0)) throw input_error("entropy_curve: histogram holds no weight");

    EntropyCurve curve;
    curve.distance_bin_centers.resize(bins);
    curve.entropy.assign(bins, 0.0);
    curve.valid_mask.assign(bins, false);
    const double width = density.max_dist_km / static_cast<double>(bins);
    const double threshold = 1e-9 * total;
    for (std::size_t b = 0; b < bins; ++b) {
        curve.distance_bin_centers[b] = (static_cast<double>(b) + 0.5) * width;
        double s = 0.0;
        for (std::size_t c = 0; c < bins; ++c) s += density.at(b, c);
        if (s < threshold) continue;
        double h = 0.0;
        for (std::size_t c = 0; c < bins; ++c) {
            const double p = density.at(b, c) / s;
            if (p > 0.0) h -= p * std::log(p);
        }
        curve.entropy[b] = h;
        curve.valid_mask[b] = true;
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Exponential-decay fit
// ---------------------------------------------------------------------------

struct SpatialScaleFit {
    double h0 = 0.0;     // fitted entropy at distance 0
    double h_max = 0.0;  // fitted saturation entropy; h_max >= h0
    double d = 0.0;      // decay scale, km
    double rss = 0.0;    // residual sum of squares over valid bins
    bool degenerate = false;  // flat curve: d is not identified
};

namespace detail {

// Closed-form least squares of h ~ a + b * exp(-x/d) for fixed d.
// Returns false when the system is numerically singular (then use b = 0).
struct ExpFitAtScale {
    double a = 0.0, b = 0.0, rss = 0.0;
};

inline ExpFitAtScale exp_fit_at_scale(const std::vector<double>& x, const std::vector<double>& h,
                                      double d) {
    const std::size_t n = x.size();
    double se = 0.0, see = 0.0, sh = 0.0, she = 0.0;
    std::vector<double> e(n);
    for (std::size_t i = 0; i < n; ++i) {
        e[i] = std::exp(-x[i] / d);
        se += e[i];
        see += e[i] * e[i];
        sh += h[i];
        she += h[i] * e[i];
    }
    const auto nn = static_cast<double>(n);
    const double det = nn * see - se * se;
    ExpFitAtScale fit;
    if (det > 1e-12 * nn * see) {
        fit.b = (nn * she - se * sh) / det;
        fit.a = (sh - fit.b * se) / nn;
    } else {
        fit.b = 0.0;
        fit.a = sh / nn;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double r = h[i] - (fit.a + fit.b * e[i]);
        fit.rss += r * r;
    }
    return fit;
}

}  // namespace detail

// Fits H(x) = H_max - (H_max - H0) exp(-x/d) over valid bins: a logarithmic
// grid search over d in [1, 5000] km (200 points) with the closed-form linear
// solve for (H0, H_max) at each d, then golden-section refinement of d
// between the grid neighbors of the best point. A curve whose fitted rise
// (H_max - H0) is negligible gets the degenerate flag: d is then arbitrary.
inline SpatialScaleFit fit_spatial_scale(const EntropyCurve& curve) {
    std::vector<double> x, h;
    for (std::size_t b = 0; b < curve.valid_mask.size(); ++b) {
        if (!curve.valid_mask[b]) continue;
        x.push_back(curve.distance_bin_centers[b]);
        h.push_back(curve.entropy[b]);
    }
    if (x.size() < 4)
        throw input_error("fit_spatial_scale: need at least 4 valid bins, got " +
                          std::to_string(x.size()));

    constexpr double d_lo = 1.0, d_hi = 5000.0;
    constexpr int grid_points = 200;
    double best_d = d_lo;
    double best_rss = HUGE_VAL;
    int best_idx = 0;
    const double log_lo = std::log(d_lo);
    const double step = (std::log(d_hi) - log_lo) / (grid_points - 1);
    for (int g = 0; g < grid_points; ++g) {
        const double d = std::exp(log_lo + step * g);
        const double rss = detail::exp_fit_at_scale(x, h, d).rss;
        if (rss < best_rss) {
            best_rss = rss;
            best_d = d;
            best_idx = g;
        }
    }

    // Golden-section refinement between the neighbors of the best grid point.
    {
        double lo = std::exp(log_lo + step * std::max(best_idx - 1, 0));
        double hi = std::exp(log_lo + step * std::min(best_idx + 1, grid_points - 1));
        constexpr double inv_phi = 0.6180339887498949;
        double c = hi - inv_phi * (hi - lo);
        double dd = lo + inv_phi * (hi - lo);
        double fc = detail::exp_fit_at_scale(x, h, c).rss;
        double fd = detail::exp_fit_at_scale(x, h, dd).rss;
        for (int it = 0; it < 100 && hi - lo > 1e-10 * hi; ++it) {
            if (fc < fd) {
                hi = dd;
                dd = c;
                fd = fc;
                c = hi - inv_phi * (hi - lo);
                fc = detail::exp_fit_at_scale(x, h, c).rss;
            } else {
                lo = c;
                c = dd;
                fc = fd;
                dd = lo + inv_phi * (hi - lo);
                fd = detail::exp_fit_at_scale(x, h, dd).rss;
            }
        }
        const double refined = 0.5 * (lo + hi);
        if (detail::exp_fit_at_scale(x, h, refined).rss <= best_rss) best_d = refined;
    }

    const detail::ExpFitAtScale fit = detail::exp_fit_at_scale(x, h, best_d);
    SpatialScaleFit out;
    out.d = best_d;
    out.rss = fit.rss;
    // Model form: h = a + b e^{-x/d} with a = H_max, b = H0 - H_max <= 0.
    if (fit.b <= 0.0) {
        out.h_max = fit.a;
        out.h0 = fit.a + fit.b;
    } else {
        // Rising-with-proximity curves are outside the model: report the flat
        // fit and flag it.
        const double level =
            std::accumulate(h.begin(), h.end(), 0.0) / static_cast<double>(h.size());
        out.h_max = level;
        out.h0 = level;
        out.rss = 0.0;
        for (const double v : h) out.rss += (v - level) * (v - level);
        out.degenerate = true;
        return out;
    }
    const double span = out.h_max - out.h0;
    out.degenerate = span <= 1e-6 * std::max(1.0, std::fabs(out.h_max));
    return out;
}

// Spearman rank correlation between per-class spatial scales and per-class
// scores, delegating to the stats module. The caller applies its BH family.
inline TestResult scale_score_correlation(
    const std::vector<double>& d_values, const std::vector<double>& scores,
    SpearmanAlternative alternative = SpearmanAlternative::two_sided) {
    if (d_values.size() != scores.size())
        throw input_error("scale_score_correlation: length mismatch");
    return spearman(d_values, scores, alternative);
}

}  // namespace geofuse
