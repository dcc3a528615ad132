#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "geofuse/csv.hpp"
#include "geofuse/errors.hpp"
#include "geofuse/rng.hpp"

namespace geofuse {

// ---------------------------------------------------------------------------
// Domain tables. All types are immutable after construction/validation and
// safe to share across threads; no operation below mutates shared state.
// ---------------------------------------------------------------------------

// Geographic anchor: one row per location id with lon/lat in degrees.
struct LocationTable {
    std::vector<std::string> ids;
    std::vector<double> lon;  // degrees, [-180, 180]
    std::vector<double> lat;  // degrees, [-90, 90]

    std::size_t size() const { return ids.size(); }
};

// One model's per-location embedding vectors; row i belongs to location_ids[i].
struct EmbeddingTable {
    std::string model_name;
    Eigen::MatrixXd matrix;  // N x D
    std::vector<std::string> location_ids;

    std::size_t size() const { return location_ids.size(); }
    Eigen::Index dim() const { return matrix.cols(); }
};

enum class TaskKind { multiclass, regression };

// Downstream prediction targets. For multiclass, targets is N x 1 holding
// integer class labels in [0, num_classes); for regression, N x T real values.
struct TaskTable {
    std::string task_name;
    TaskKind kind = TaskKind::regression;
    Eigen::MatrixXd targets;  // N x T (T = 1 for multiclass)
    std::vector<std::string> target_names;
    std::vector<std::string> location_ids;
    int num_classes = 0;  // multiclass only

    std::size_t size() const { return location_ids.size(); }
};

// Seeded disjoint partition of {0..N-1} into k test folds of near-equal size.
struct FoldPlan {
    std::uint64_t seed = 0;
    std::size_t k = 0;
    std::vector<std::vector<std::size_t>> test_index_sets;
};

// Per-column affine normalizer (x - mean) / stdev with population stdev.
// Zero-variance columns map to all-zero output rather than dividing by zero.
struct Standardizer {
    Eigen::VectorXd means;
    Eigen::VectorXd stdevs;  // each >= 0

    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
        if (x.cols() != means.size())
            throw input_error("standardizer: column count mismatch");
        Eigen::MatrixXd out = x.rowwise() - means.transpose();
        for (Eigen::Index j = 0; j < out.cols(); ++j) {
            if (stdevs[j] > 0.0)
                out.col(j) /= stdevs[j];
            else
                out.col(j).setZero();
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// Validation helpers
// ---------------------------------------------------------------------------

namespace detail {

inline void require_unique_ids(const std::vector<std::string>& ids, const std::string& context) {
    std::unordered_set<std::string> seen;
    seen.reserve(ids.size());
    for (const auto& id : ids) {
        if (id.empty()) throw input_error(context + ": empty id");
        if (!seen.insert(id).second)
            throw input_error(context + ": duplicate id '" + id + "'");
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Loading. File schemas (comma-separated, UTF-8, one header row):
//   locations:              id,lon,lat
//   embedding:              id,e0,e1,...,e{D-1}      (one file per model)
//   regression targets:     id,<name0>,...,<name{T-1}>
//   classification targets: id,label                  (integer labels)
// ---------------------------------------------------------------------------

inline LocationTable load_locations(const std::string& path) {
    const CsvTable csv = read_csv(path);
    if (csv.header.size() != 3 || csv.header[0] != "id" || csv.header[1] != "lon" ||
        csv.header[2] != "lat")
        throw input_error(path + ": locations header must be id,lon,lat");
    LocationTable t;
    t.ids.reserve(csv.rows.size());
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& row = csv.rows[r];
        const std::string ctx = path + " row " + std::to_string(r + 2);
        const double lon = parse_numeric_cell(row[1], ctx + " lon");
        const double lat = parse_numeric_cell(row[2], ctx + " lat");
        if (lon < -180.0 || lon > 180.0)
            throw input_error(ctx + ": lon " + row[1] + " outside [-180, 180]");
        if (lat < -90.0 || lat > 90.0)
            throw input_error(ctx + ": lat " + row[2] + " outside [-90, 90]");
        t.ids.push_back(row[0]);
        t.lon.push_back(lon);
        t.lat.push_back(lat);
    }
    detail::require_unique_ids(t.ids, path);
    return t;
}

inline EmbeddingTable load_embedding(const std::string& path, const std::string& model_name) {
    const CsvTable csv = read_csv(path);
    if (csv.header.size() < 2 || csv.header[0] != "id")
        throw input_error(path + ": embedding header must be id,e0,...");
    EmbeddingTable t;
    t.model_name = model_name;
    const std::size_t d = csv.header.size() - 1;
    t.matrix.resize(static_cast<Eigen::Index>(csv.rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& row = csv.rows[r];
        const std::string ctx = path + " row " + std::to_string(r + 2);
        t.location_ids.push_back(row[0]);
        for (std::size_t j = 0; j < d; ++j)
            t.matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
                parse_numeric_cell(row[j + 1], ctx + " col " + csv.header[j + 1]);
    }
    detail::require_unique_ids(t.location_ids, path);
    return t;
}

inline TaskTable load_regression_task(const std::string& path, const std::string& task_name) {
    const CsvTable csv = read_csv(path);
    if (csv.header.size() < 2 || csv.header[0] != "id")
        throw input_error(path + ": targets header must be id,<name0>,...");
    TaskTable t;
    t.task_name = task_name;
    t.kind = TaskKind::regression;
    t.target_names.assign(csv.header.begin() + 1, csv.header.end());
    const std::size_t d = t.target_names.size();
    t.targets.resize(static_cast<Eigen::Index>(csv.rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& row = csv.rows[r];
        const std::string ctx = path + " row " + std::to_string(r + 2);
        t.location_ids.push_back(row[0]);
        for (std::size_t j = 0; j < d; ++j)
            t.targets(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
                parse_numeric_cell(row[j + 1], ctx + " col " + csv.header[j + 1]);
    }
    detail::require_unique_ids(t.location_ids, path);
    return t;
}

inline TaskTable load_classification_task(const std::string& path, const std::string& task_name) {
    const CsvTable csv = read_csv(path);
    if (csv.header.size() != 2 || csv.header[0] != "id" || csv.header[1] != "label")
        throw input_error(path + ": classification header must be id,label");
    TaskTable t;
    t.task_name = task_name;
    t.kind = TaskKind::multiclass;
    t.target_names = {"label"};
    t.targets.resize(static_cast<Eigen::Index>(csv.rows.size()), 1);
    std::vector<bool> seen_class;
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& row = csv.rows[r];
        const std::string ctx = path + " row " + std::to_string(r + 2);
        const double v = parse_numeric_cell(row[1], ctx + " label");
        if (v != std::floor(v) || v < 0.0)
            throw input_error(ctx + ": label '" + row[1] + "' is not a non-negative integer");
        const auto label = static_cast<std::size_t>(v);
        if (label >= seen_class.size()) seen_class.resize(label + 1, false);
        seen_class[label] = true;
        t.location_ids.push_back(row[0]);
        t.targets(static_cast<Eigen::Index>(r), 0) = v;
    }
    detail::require_unique_ids(t.location_ids, path);
    // The class set must be exactly {0..C-1} with C >= 2.
    for (std::size_t c = 0; c < seen_class.size(); ++c)
        if (!seen_class[c])
            throw input_error(path + ": class " + std::to_string(c) +
                              " absent; labels must cover {0..C-1} contiguously");
    if (seen_class.size() < 2)
        throw input_error(path + ": classification needs at least 2 classes");
    t.num_classes = static_cast<int>(seen_class.size());
    return t;
}

// ---------------------------------------------------------------------------
// Alignment: restrict all tables to the shared id set, in one canonical row
// order (ascending id), so every downstream computation is order-deterministic
// regardless of input file order.
// ---------------------------------------------------------------------------

struct AlignedBundle {
    LocationTable locations;
    std::vector<EmbeddingTable> embeddings;
    std::vector<TaskTable> tasks;
    std::size_t dropped = 0;  // distinct ids that missed the intersection
};

inline AlignedBundle align(const LocationTable& locations,
                           const std::vector<EmbeddingTable>& embeddings,
                           const std::vector<TaskTable>& tasks) {
    // Count id occurrences across all tables; keep ids present everywhere.
    const std::size_t n_tables = 1 + embeddings.size() + tasks.size();
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& id : locations.ids) counts[id] += 1;
    for (const auto& e : embeddings)
        for (const auto& id : e.location_ids) counts[id] += 1;
    for (const auto& t : tasks)
        for (const auto& id : t.location_ids) counts[id] += 1;

    std::vector<std::string> shared;
    for (const auto& [id, c] : counts)
        if (c == n_tables) shared.push_back(id);
    if (shared.empty()) throw input_error("align: no location id common to all tables");
    std::sort(shared.begin(), shared.end());

    std::unordered_map<std::string, std::size_t> order;
    order.reserve(shared.size());
    for (std::size_t i = 0; i < shared.size(); ++i) order[shared[i]] = i;

    AlignedBundle out;
    const std::size_t n = shared.size();

    out.locations.ids = shared;
    out.locations.lon.resize(n);
    out.locations.lat.resize(n);
    for (std::size_t r = 0; r < locations.size(); ++r) {
        const auto it = order.find(locations.ids[r]);
        if (it == order.end()) continue;
        out.locations.lon[it->second] = locations.lon[r];
        out.locations.lat[it->second] = locations.lat[r];
    }

    for (const auto& e : embeddings) {
        EmbeddingTable a;
        a.model_name = e.model_name;
        a.location_ids = shared;
        a.matrix.resize(static_cast<Eigen::Index>(n), e.matrix.cols());
        for (std::size_t r = 0; r < e.size(); ++r) {
            const auto it = order.find(e.location_ids[r]);
            if (it == order.end()) continue;
            a.matrix.row(static_cast<Eigen::Index>(it->second)) =
                e.matrix.row(static_cast<Eigen::Index>(r));
        }
        out.embeddings.push_back(std::move(a));
    }

    for (const auto& t : tasks) {
        TaskTable a;
        a.task_name = t.task_name;
        a.kind = t.kind;
        a.target_names = t.target_names;
        a.num_classes = t.num_classes;
        a.location_ids = shared;
        a.targets.resize(static_cast<Eigen::Index>(n), t.targets.cols());
        for (std::size_t r = 0; r < t.size(); ++r) {
            const auto it = order.find(t.location_ids[r]);
            if (it == order.end()) continue;
            a.targets.row(static_cast<Eigen::Index>(it->second)) =
                t.targets.row(static_cast<Eigen::Index>(r));
        }
        out.tasks.push_back(std::move(a));
    }

    // Count of distinct ids seen in any table that missed the intersection.
    out.dropped = counts.size() - n;
    return out;
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

// Fits per-column mean and population stdev (divisor N) over row_subset only.
inline Standardizer fit_standardizer(const Eigen::MatrixXd& matrix,
                                     const std::vector<std::size_t>& row_subset) {
    if (row_subset.empty()) throw input_error("fit_standardizer: empty row subset");
    const auto m = static_cast<double>(row_subset.size());
    Standardizer s;
    s.means = Eigen::VectorXd::Zero(matrix.cols());
    s.stdevs = Eigen::VectorXd::Zero(matrix.cols());
    for (const std::size_t r : row_subset)
        s.means += matrix.row(static_cast<Eigen::Index>(r)).transpose();
    s.means /= m;
    for (const std::size_t r : row_subset) {
        const Eigen::VectorXd c =
            matrix.row(static_cast<Eigen::Index>(r)).transpose() - s.means;
        s.stdevs += c.cwiseProduct(c);
    }
    s.stdevs = (s.stdevs / m).cwiseSqrt();
    return s;
}

inline std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
}

// ---------------------------------------------------------------------------
// Fusion: concatenate aligned embedding tables column-wise.
// ---------------------------------------------------------------------------

inline EmbeddingTable fuse(const std::vector<EmbeddingTable>& parts) {
    if (parts.empty()) throw input_error("fuse: no embeddings given");
    EmbeddingTable out;
    out.location_ids = parts[0].location_ids;
    Eigen::Index total_d = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (parts[i].location_ids != out.location_ids)
            throw input_error("fuse: embeddings are not aligned (ids differ)");
        total_d += parts[i].matrix.cols();
        if (i) out.model_name += "+";
        out.model_name += parts[i].model_name;
    }
    out.matrix.resize(static_cast<Eigen::Index>(out.location_ids.size()), total_d);
    Eigen::Index col = 0;
    for (const auto& p : parts) {
        out.matrix.middleCols(col, p.matrix.cols()) = p.matrix;
        col += p.matrix.cols();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Fold assignment: a seeded Fisher-Yates permutation chopped into k contiguous
// blocks. The first (n mod k) folds receive the extra element, so fold sizes
// differ by at most 1 and every index is tested exactly once.
// ---------------------------------------------------------------------------

inline FoldPlan make_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw input_error("make_folds: fold count must be >= 2");
    if (k > n) throw input_error("make_folds: more folds than rows");
    const std::vector<std::size_t> perm = random_permutation(n, seed);
    FoldPlan plan;
    plan.seed = seed;
    plan.k = k;
    plan.test_index_sets.resize(k);
    const std::size_t base = n / k;
    const std::size_t extra = n % k;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t len = base + (f < extra ? 1 : 0);
        plan.test_index_sets[f].assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                                       perm.begin() + static_cast<std::ptrdiff_t>(pos + len));
        pos += len;
    }
    return plan;
}

// Training rows for one fold: the complement of its test set, ascending.
inline std::vector<std::size_t> training_rows(const FoldPlan& plan, std::size_t fold,
                                              std::size_t n) {
    std::vector<bool> is_test(n, false);
    for (const std::size_t i : plan.test_index_sets.at(fold)) is_test[i] = true;
    std::vector<std::size_t> rows;
    rows.reserve(n - plan.test_index_sets.at(fold).size());
    for (std::size_t i = 0; i < n; ++i)
        if (!is_test[i]) rows.push_back(i);
    return rows;
}

}  // namespace geofuse
