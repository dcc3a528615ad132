#include <catch2/catch_amalgamated.hpp>
#include <sys/wait.h>

#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "geofuse/commands.hpp"
#include "geofuse/csv.hpp"
#include "geofuse/errors.hpp"
#include "geofuse/rng.hpp"

using namespace geofuse;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

std::string fixture(const std::string& name) {
    return std::string(GEOFUSE_FIXTURE_DIR) + "/" + name;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("geofuse_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

RunConfig base_config(const TempDir& tmp) {
    RunConfig config;
    config.locations = fixture("locations.csv");
    config.embeddings = {{"modela", fixture("embedding_a.csv")},
                         {"modelb", fixture("embedding_b.csv")}};
    config.tasks = {{"reg", fixture("task_reg.csv"), "regression"},
                    {"cls", fixture("task_cls.csv"), "multiclass"}};
    config.combos = "singles,pairs";
    config.folds = 5;
    config.seed = 7;
    config.out = (tmp.path / "runs").string();
    return config;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::istringstream in(read_file(path));
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

int run_cli(const std::string& args) {
    const std::string cmd =
        std::string(GEOFUSE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

// Six probability classes in three complementary pairs. Each pair is driven
// by one smooth random field built from eight plane waves of a shared
// wavelength, and wavelengths triple from pair to pair, so the fitted decay
// lengths separate by pair while every row still sums to one exactly.
void write_spatial_fixture(const fs::path& dir, std::string& locations_path,
                           std::string& probs_path, std::string& scores_path) {
    constexpr int side = 40;
    constexpr double spacing_deg = 0.2;
    constexpr int n_waves = 8;
    constexpr double pi = 3.14159265358979323846;
    const double wavelengths_deg[3] = {1.0, 3.0, 9.0};

    struct Wave {
        double kx, ky, phase;
    };
    std::mt19937_64 gen(424242);
    std::array<std::array<Wave, n_waves>, 3> groups{};
    for (int g = 0; g < 3; ++g) {
        const double k = 2.0 * pi / wavelengths_deg[g];
        for (int w = 0; w < n_waves; ++w) {
            const double theta = 2.0 * pi * uniform01(gen);
            groups[g][w] = {k * std::cos(theta), k * std::sin(theta),
                            2.0 * pi * uniform01(gen)};
        }
    }

    std::ofstream loc(dir / "grid_locations.csv");
    std::ofstream prob(dir / "grid_probs.csv");
    loc << "id,lon,lat\n";
    prob << "id,s0,s1,s2,s3,s4,s5\n";
    for (int i = 0; i < side; ++i) {
        for (int j = 0; j < side; ++j) {
            const double lonv = spacing_deg * i;
            const double latv = spacing_deg * j;
            const std::string id = "g" + std::to_string(i * side + j);
            loc << id << "," << format_double(lonv) << ","
                << format_double(latv) << "\n";
            prob << id;
            for (int g = 0; g < 3; ++g) {
                double field = 0.0;
                for (const Wave& wave : groups[g])
                    field += std::cos(wave.kx * lonv + wave.ky * latv + wave.phase);
                const double a = 0.5 * (1.0 + std::tanh(field / 2.0));
                // The pair (a, 1 - a) shares one spatial structure and keeps
                // the six-column row sum at exactly one.
                prob << "," << format_double(a / 3.0) << ","
                     << format_double((1.0 - a) / 3.0);
            }
            prob << "\n";
        }
    }
    loc.close();
    prob.close();
    std::ofstream scores(dir / "grid_scores.csv");
    scores << "class,rising,falling\n";
    for (int c = 0; c < 6; ++c)
        scores << "s" << c << "," << 10 * (c + 1) << "," << 10 * (6 - c) << "\n";
    scores.close();
    locations_path = (dir / "grid_locations.csv").string();
    probs_path = (dir / "grid_probs.csv").string();
    scores_path = (dir / "grid_scores.csv").string();
}

}  // namespace

TEST_CASE("evaluate writes a manifest, score grid, and machine-readable report") {
    TempDir tmp;
    const RunConfig config = base_config(tmp);
    const CommandResult result = cmd_evaluate(config);

    REQUIRE(result.out_dir.filename().string().rfind("evaluate-", 0) == 0);
    REQUIRE(result.out_dir.filename().string().size() ==
            std::string("evaluate-").size() + 16);
    for (const auto& name : result.outputs) REQUIRE(fs::exists(result.out_dir / name));
    REQUIRE(fs::exists(result.out_dir / "manifest.json"));

    const auto manifest = nlohmann::json::parse(read_file(result.out_dir / "manifest.json"));
    REQUIRE(manifest.at("command") == "evaluate");
    REQUIRE(manifest.at("config_hash") == config_hash(config));
    REQUIRE(manifest.at("sub_seeds").at("evaluate/folds").get<std::uint64_t>() ==
            derive_seed(config.seed, "evaluate", "folds"));

    const auto report = nlohmann::json::parse(read_file(result.out_dir / "evaluation.json"));
    REQUIRE(report.at("n_locations") == 500);
    REQUIRE(report.at("reports").size() == 6);  // 3 combos x 2 tasks

    // Regression reports carry one squared error per location; classification
    // reports do not. The planted signal keeps every mean solidly positive.
    for (const auto& r : report.at("reports")) {
        const double mean_score = r.at("mean").get<double>();
        REQUIRE(std::isfinite(mean_score));
        REQUIRE(r.at("fold_scores").size() == 5);
        if (r.at("task") == "reg") {
            REQUIRE(r.at("per_location_mse").size() == 500);
            REQUIRE(mean_score > 10.0);
        } else {
            REQUIRE_FALSE(r.contains("per_location_mse"));
            REQUIRE(mean_score > 40.0);
        }
    }
}

TEST_CASE("evaluate is byte-identical across reruns and sensitive to the seed") {
    TempDir tmp;
    const RunConfig config = base_config(tmp);
    const CommandResult first = cmd_evaluate(config);
    const std::string bytes = read_file(first.out_dir / "evaluation.json");

    const CommandResult second = cmd_evaluate(config);
    REQUIRE(second.out_dir == first.out_dir);
    REQUIRE(read_file(second.out_dir / "evaluation.json") == bytes);

    RunConfig reseeded = config;
    reseeded.seed = 8;
    const CommandResult third = cmd_evaluate(reseeded);
    REQUIRE(third.out_dir != first.out_dir);  // config hash differs
    REQUIRE(read_file(third.out_dir / "evaluation.json") != bytes);
}

TEST_CASE("evaluate exports per-location error tables on request") {
    TempDir tmp;
    RunConfig config = base_config(tmp);
    config.combos = "modela+modelb";
    config.tasks = {{"reg", fixture("task_reg.csv"), "regression"}};
    config.per_location = true;
    const CommandResult result = cmd_evaluate(config);

    const fs::path errors = result.out_dir / "errors_modela+modelb__reg.csv";
    REQUIRE(fs::exists(errors));
    const auto lines = read_lines(errors);
    REQUIRE(lines.size() == 501);
    REQUIRE(lines[0] == "id,mse");
}

TEST_CASE("evaluate validates the zscore mode") {
    TempDir tmp;
    RunConfig config = base_config(tmp);
    config.zscore = "sometimes";
    REQUIRE_THROWS_AS(cmd_evaluate(config), input_error);
    config.zscore = "global";
    REQUIRE_NOTHROW(cmd_evaluate(config));
}

TEST_CASE("similarity reports every pair once with the paired test") {
    TempDir tmp;
    RunConfig config = base_config(tmp);
    config.tasks.clear();
    config.locations.clear();
    config.embeddings = {{"modela", fixture("embedding_a.csv")},
                         {"modelb", fixture("embedding_b.csv")},
                         {"acopy", fixture("embedding_a.csv")}};
    const CommandResult result = cmd_similarity(config);

    const auto lines = read_lines(result.out_dir / "similarity.csv");
    REQUIRE(lines.size() == 4);  // header + 3 pairs
    REQUIRE(lines[0] == "model_a,model_b,cca_mean,cka");

    // The duplicated table pair scores 1 on both measures.
    bool found_copy_pair = false;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        std::istringstream row(lines[i]);
        std::string a, b, cca_s, cka_s;
        std::getline(row, a, ',');
        std::getline(row, b, ',');
        std::getline(row, cca_s, ',');
        std::getline(row, cka_s, ',');
        const double cca_v = std::stod(cca_s);
        const double cka_v = std::stod(cka_s);
        REQUIRE(cca_v >= 0.0);
        REQUIRE(cca_v <= 1.0);
        REQUIRE(cka_v >= 0.0);
        REQUIRE(cka_v <= 1.0 + 1e-12);
        if (a == "modela" && b == "acopy") {
            found_copy_pair = true;
            REQUIRE(cca_v == Approx(1.0).margin(1e-6));
            REQUIRE(cka_v == Approx(1.0).margin(1e-9));
        }
    }
    REQUIRE(found_copy_pair);

    const auto test = nlohmann::json::parse(read_file(result.out_dir / "cka_vs_cca.json"));
    REQUIRE(test.at("comparison") == "cka_greater_than_cca");
    REQUIRE(test.at("n_pairs") == 3);
    REQUIRE(test.contains("p_value"));
}

TEST_CASE("similarity with a single pair skips the paired test") {
    TempDir tmp;
    RunConfig config = base_config(tmp);
    config.tasks.clear();
    config.locations.clear();
    const CommandResult result = cmd_similarity(config);
    const auto test = nlohmann::json::parse(read_file(result.out_dir / "cka_vs_cca.json"));
    REQUIRE(test.contains("skipped"));

    config.embeddings.resize(1);
    REQUIRE_THROWS_AS(cmd_similarity(config), input_error);
}

TEST_CASE("complementarity consumes a completed evaluation output") {
    TempDir tmp;
    RunConfig eval_config = base_config(tmp);
    const CommandResult eval_result = cmd_evaluate(eval_config);

    RunConfig config;
    config.out = (tmp.path / "runs").string();
    config.evaluation = eval_result.out_dir.string();
    config.per_location = true;
    const CommandResult result = cmd_complementarity(config);

    const auto lines = read_lines(result.out_dir / "complementarity.csv");
    REQUIRE(lines.size() == 3);  // header + modela+modelb on two tasks
    REQUIRE(lines[0] ==
            "combo,task,index,fused_mean,best_single_mean,p_value,p_adjusted,stars");
    for (std::size_t i = 1; i < lines.size(); ++i) {
        std::istringstream row(lines[i]);
        std::string combo, task, cell;
        std::getline(row, combo, ',');
        std::getline(row, task, ',');
        REQUIRE(combo == "modela+modelb");
        std::vector<double> numbers;
        for (int c = 0; c < 5; ++c) {
            std::getline(row, cell, ',');
            numbers.push_back(std::stod(cell));
        }
        REQUIRE(numbers[0] <= 1.0);               // index
        REQUIRE(numbers[3] > 0.0);                // p_value
        REQUIRE(numbers[3] <= 1.0);
        REQUIRE(numbers[4] >= numbers[3] - 1e-15);  // BH never lowers a p-value
    }

    // One per-location map, for the regression task only.
    const fs::path map = result.out_dir / "map_modela+modelb__reg.csv";
    REQUIRE(fs::exists(map));
    const auto map_lines = read_lines(map);
    REQUIRE(map_lines.size() == 501);
    REQUIRE(map_lines[0] == "id,lon,lat,c");
    for (std::size_t i = 1; i < map_lines.size(); ++i) {
        const std::size_t last_comma = map_lines[i].rfind(',');
        const double c = std::stod(map_lines[i].substr(last_comma + 1));
        REQUIRE(c >= -1.0);
        REQUIRE(c <= 1.0);
    }
    REQUIRE_FALSE(fs::exists(result.out_dir / "map_modela+modelb__cls.csv"));
}

TEST_CASE("complementarity rejects missing or malformed evaluation artifacts") {
    TempDir tmp;
    RunConfig config;
    config.out = (tmp.path / "runs").string();
    REQUIRE_THROWS_AS(cmd_complementarity(config), input_error);

    config.evaluation = (tmp.path / "nonexistent").string();
    REQUIRE_THROWS_AS(cmd_complementarity(config), input_error);

    const fs::path bad = tmp.path / "bad.json";
    std::ofstream(bad) << "{ not json";
    config.evaluation = bad.string();
    REQUIRE_THROWS_AS(cmd_complementarity(config), input_error);
}

TEST_CASE("complementarity requires at least one fused report") {
    TempDir tmp;
    RunConfig eval_config = base_config(tmp);
    eval_config.combos = "singles";
    const CommandResult eval_result = cmd_evaluate(eval_config);

    RunConfig config;
    config.out = (tmp.path / "runs").string();
    config.evaluation = eval_result.out_dir.string();
    REQUIRE_THROWS_AS(cmd_complementarity(config), input_error);
}

TEST_CASE("spatial-scale fits per-class decay lengths on a structured grid") {
    TempDir tmp;
    std::string locations_path, probs_path, scores_path;
    write_spatial_fixture(tmp.path, locations_path, probs_path, scores_path);

    RunConfig config;
    config.out = (tmp.path / "runs").string();
    config.locations = locations_path;
    config.tasks = {{"veg", probs_path, "regression"}};
    config.class_scores = scores_path;
    const CommandResult result = cmd_spatial_scale(config);

    const auto scale_lines = read_lines(result.out_dir / "scales.csv");
    REQUIRE(scale_lines.size() == 7);  // header + 6 classes
    REQUIRE(scale_lines[0] == "class,h0,h_max,d_km,rss,degenerate");
    std::vector<double> d_values;
    for (std::size_t i = 1; i < scale_lines.size(); ++i) {
        std::istringstream row(scale_lines[i]);
        std::string cls, h0, hmax, d, rss, degenerate;
        std::getline(row, cls, ',');
        std::getline(row, h0, ',');
        std::getline(row, hmax, ',');
        std::getline(row, d, ',');
        std::getline(row, rss, ',');
        std::getline(row, degenerate, ',');
        REQUIRE(cls == "s" + std::to_string(i - 1));
        REQUIRE(degenerate == "0");
        d_values.push_back(std::stod(d));
    }
    // Class pairs (0,1), (2,3), (4,5) share a wavelength that triples from
    // pair to pair, so fitted scales must separate cleanly by pair.
    for (int g = 0; g + 1 < 3; ++g) {
        const double group_max = std::max(d_values[2 * g], d_values[2 * g + 1]);
        const double next_min = std::min(d_values[2 * g + 2], d_values[2 * g + 3]);
        REQUIRE(group_max < next_min);
    }

    const auto curve_lines = read_lines(result.out_dir / "curves.csv");
    REQUIRE(curve_lines.size() == 1 + 6 * 100);

    const auto corr_lines = read_lines(result.out_dir / "correlation.csv");
    REQUIRE(corr_lines.size() == 3);  // header + rising + falling
    REQUIRE(corr_lines[0] == "series,n,rho,p_value,p_adjusted,stars");
    // Scores rise (fall) with class index while d rises by pair, so the rank
    // correlation is strongly positive (negative); only "rising" can be a
    // one-sided discovery.
    for (int row = 1; row <= 2; ++row) {
        std::istringstream cells(corr_lines[row]);
        std::string series, n, rho, p_value, p_adjusted, stars;
        std::getline(cells, series, ',');
        std::getline(cells, n, ',');
        std::getline(cells, rho, ',');
        std::getline(cells, p_value, ',');
        std::getline(cells, p_adjusted, ',');
        std::getline(cells, stars, ',');
        REQUIRE(n == "6");
        if (row == 1) {
            REQUIRE(series == "rising");
            REQUIRE(std::stod(rho) > 0.8);
            REQUIRE(std::stod(p_value) < 0.05);
        } else {
            REQUIRE(series == "falling");
            REQUIRE(std::stod(rho) < -0.8);
            REQUIRE(std::stod(p_value) > 0.5);
        }
    }
}

TEST_CASE("spatial-scale validates the class table") {
    TempDir tmp;
    RunConfig config;
    config.out = (tmp.path / "runs").string();
    config.locations = fixture("locations.csv");
    config.tasks = {{"reg", fixture("task_reg.csv"), "regression"}};
    // Regression targets are not probability rows.
    REQUIRE_THROWS_AS(cmd_spatial_scale(config), input_error);

    config.tasks = {{"veg", fixture("population.csv"), "regression"},
                    {"extra", fixture("population.csv"), "regression"}};
    REQUIRE_THROWS_AS(cmd_spatial_scale(config), input_error);

    config.tasks = {{"veg", fixture("population.csv"), "regression"}};
    config.locations.clear();
    REQUIRE_THROWS_AS(cmd_spatial_scale(config), input_error);
}

TEST_CASE("sample uniform writes deterministic locations") {
    TempDir tmp;
    RunConfig config;
    config.out = (tmp.path / "runs").string();
    config.strategy = "uniform";
    config.sample_n = 100;
    config.seed = 3;
    const CommandResult result = cmd_sample(config);

    const auto lines = read_lines(result.out_dir / "sampled_locations.csv");
    REQUIRE(lines.size() == 101);
    REQUIRE(lines[0] == "id,lon,lat");
    std::set<std::string> ids;
    for (std::size_t i = 1; i < lines.size(); ++i)
        ids.insert(lines[i].substr(0, lines[i].find(',')));
    REQUIRE(ids.size() == 100);

    const std::string bytes = read_file(result.out_dir / "sampled_locations.csv");
    const CommandResult rerun = cmd_sample(config);
    REQUIRE(read_file(rerun.out_dir / "sampled_locations.csv") == bytes);

    const auto manifest = nlohmann::json::parse(read_file(result.out_dir / "manifest.json"));
    REQUIRE(manifest.at("sub_seeds").contains("sample/uniform"));
}

TEST_CASE("sample greedy-lc reports uniformity metrics") {
    TempDir tmp;
    RunConfig config;
    config.out = (tmp.path / "runs").string();
    config.strategy = "greedy-lc";
    config.population = fixture("population.csv");
    config.sample_n = 100;
    config.seed = 5;
    const CommandResult result = cmd_sample(config);

    const auto lines = read_lines(result.out_dir / "sample_indices.csv");
    REQUIRE(lines.size() == 101);
    REQUIRE_FALSE(fs::exists(result.out_dir / "sampled_locations.csv"));

    const auto u = nlohmann::json::parse(read_file(result.out_dir / "uniformity.json"));
    const double pop_c_eff = u.at("population").at("c_eff").get<double>();
    const double sample_c_eff = u.at("sample").at("c_eff").get<double>();
    REQUIRE(sample_c_eff <= 1.0);
    REQUIRE(sample_c_eff > pop_c_eff);

    // With coordinates configured the sampled locations table appears too.
    config.locations = fixture("locations.csv");
    const CommandResult with_coords = cmd_sample(config);
    REQUIRE(fs::exists(with_coords.out_dir / "sampled_locations.csv"));
}

TEST_CASE("sample sweep emits one row per grid cell with a single argmax") {
    TempDir tmp;
    RunConfig config;
    config.out = (tmp.path / "runs").string();
    config.strategy = "greedy-lc";
    config.population = fixture("population.csv");
    config.sample_n = 100;
    config.sweep = true;
    config.sweep_steps = {2, 5};
    config.sweep_ratios = {0.0, 0.15};
    const CommandResult result = cmd_sample(config);

    const auto lines = read_lines(result.out_dir / "sweep.csv");
    REQUIRE(lines.size() == 5);
    REQUIRE(lines[0] == "step_size,initial_ratio,c_eff,entropy,argmax");
    int argmax_rows = 0;
    for (std::size_t i = 1; i < lines.size(); ++i)
        if (lines[i].back() == '1') ++argmax_rows;
    REQUIRE(argmax_rows == 1);

    config.sweep_steps.clear();
    REQUIRE_THROWS_AS(cmd_sample(config), input_error);
}

TEST_CASE("sample validates its strategy and inputs") {
    TempDir tmp;
    RunConfig config;
    config.out = (tmp.path / "runs").string();
    config.strategy = "psychic";
    config.sample_n = 10;
    REQUIRE_THROWS_AS(cmd_sample(config), input_error);

    config.strategy = "uniform";
    config.sample_n = 0;
    REQUIRE_THROWS_AS(cmd_sample(config), input_error);

    config.strategy = "greedy-lc";
    config.sample_n = 10;
    config.population.clear();
    REQUIRE_THROWS_AS(cmd_sample(config), input_error);
}

TEST_CASE("cli exits 0 on success") {
    TempDir tmp;
    const int code = run_cli("sample --strategy uniform --n 10 --seed 1 --out " +
                             (tmp.path / "runs").string());
    REQUIRE(code == 0);
    bool found = false;
    for (const auto& entry : fs::directory_iterator(tmp.path / "runs"))
        found = found || entry.path().filename().string().rfind("sample-", 0) == 0;
    REQUIRE(found);
}

TEST_CASE("cli exits 1 on bad input") {
    TempDir tmp;
    REQUIRE(run_cli("evaluate --out " + (tmp.path / "runs").string()) == 1);
    REQUIRE(run_cli("sample --strategy nonsense --n 5 --out " +
                    (tmp.path / "runs").string()) == 1);
    REQUIRE(run_cli("definitely-not-a-command") != 0);
}

TEST_CASE("cli exits 2 on numerical failure") {
    TempDir tmp;
    // An embedding column of huge magnitudes overflows the standardizer's
    // moment accumulation, which surfaces as a numerical (not input) error.
    const fs::path loc = tmp.path / "loc.csv";
    const fs::path emb = tmp.path / "emb.csv";
    const fs::path task = tmp.path / "task.csv";
    {
        std::ofstream l(loc), e(emb), t(task);
        l << "id,lon,lat\n";
        e << "id,e0,e1\n";
        t << "id,y\n";
        for (int i = 0; i < 12; ++i) {
            l << "p" << i << "," << i << "," << i << "\n";
            e << "p" << i << ",1e308," << (i % 2 ? 1.0 : -1.0) << "\n";
            t << "p" << i << "," << i << "\n";
        }
    }
    const int code = run_cli("evaluate --locations " + loc.string() +
                             " --embedding big=" + emb.string() +
                             " --task y=" + task.string() + ":regression" +
                             " --folds 2 --out " + (tmp.path / "runs").string());
    REQUIRE(code == 2);
}
