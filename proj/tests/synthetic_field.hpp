#pragma once

// Test-support generators: uniform locations on a spherical cap and smooth
// random fields with a planted exponential correlation length. Used by the
// acceptance checks and by calibration utilities; not part of the library.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "geofuse/dataset.hpp"
#include "geofuse/rng.hpp"
#include "geofuse/spatial.hpp"

namespace testsupport {

// Uniform draw over the spherical cap of the given geodesic radius centered
// on the north pole (area-uniform: cos(colatitude) uniform on its range).
inline geofuse::LocationTable cap_locations(std::size_t n, double cap_radius_km,
                                            std::uint64_t seed) {
    const double theta_max = cap_radius_km / geofuse::earth_radius_km;
    const double z_min = std::cos(theta_max);
    constexpr double rad_to_deg = 57.29577951308232;
    geofuse::LocationTable t;
    t.ids.reserve(n);
    t.lon.reserve(n);
    t.lat.reserve(n);
    std::mt19937_64 gen(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const double z = z_min + (1.0 - z_min) * geofuse::uniform01(gen);
        const double lon = -180.0 + 360.0 * geofuse::uniform01(gen);
        std::string id = std::to_string(i);
        t.ids.push_back(std::string(id.size() >= 7 ? 0 : 7 - id.size(), '0') + id);
        t.lon.push_back(lon);
        t.lat.push_back(std::asin(std::min(1.0, z)) * rad_to_deg);
    }
    return t;
}

// Gaussian layer with covariance approximately exp(-r/scale_km) in chord
// distance (random Fourier features with Cauchy-distributed frequencies),
// mixed with per-point white noise and pushed through the standard normal
// CDF, so values are uniform-ish on [0, 1] with spatial structure at the
// planted scale. rho is the smooth layer's variance share.
inline std::vector<double> smooth_unit_field(const geofuse::LocationTable& loc,
                                             double scale_km, double rho,
                                             std::size_t k_features, std::uint64_t seed) {
    const std::size_t n = loc.size();
    constexpr double deg = 0.017453292519943295;
    Eigen::MatrixXd points(static_cast<Eigen::Index>(n), 3);
    for (std::size_t i = 0; i < n; ++i) {
        const double phi = loc.lat[i] * deg;
        const double lam = loc.lon[i] * deg;
        points(static_cast<Eigen::Index>(i), 0) =
            geofuse::earth_radius_km * std::cos(phi) * std::cos(lam);
        points(static_cast<Eigen::Index>(i), 1) =
            geofuse::earth_radius_km * std::cos(phi) * std::sin(lam);
        points(static_cast<Eigen::Index>(i), 2) =
            geofuse::earth_radius_km * std::sin(phi);
    }

    std::mt19937_64 gen(seed);
    Eigen::VectorXd layer = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    constexpr double two_pi = 6.283185307179586;
    for (std::size_t k = 0; k < k_features; ++k) {
        // omega = z / |w| / scale, z three-variate standard normal and w
        // scalar standard normal, makes cos(omega . x + b) average to the
        // exponential kernel exp(-|x - y| / scale).
        Eigen::Vector3d z(geofuse::standard_normal(gen), geofuse::standard_normal(gen),
                          geofuse::standard_normal(gen));
        double w = geofuse::standard_normal(gen);
        if (w == 0.0) w = 1e-300;
        const Eigen::Vector3d omega = z / (std::fabs(w) * scale_km);
        const double b = two_pi * geofuse::uniform01(gen);
        layer += ((points * omega).array() + b).cos().matrix();
    }
    layer *= std::sqrt(2.0 / static_cast<double>(k_features));

    const double smooth_amp = std::sqrt(rho);
    const double noise_amp = std::sqrt(1.0 - rho);
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double g = smooth_amp * layer[static_cast<Eigen::Index>(i)] +
                         noise_amp * geofuse::standard_normal(gen);
        values[i] = 0.5 * std::erfc(-g * 0.7071067811865476);
    }
    return values;
}

}  // namespace testsupport
