#pragma once

#include "stochdom/geometry.hpp"
#include "stochdom/problems.hpp"
#include "stochdom/sparse.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace stochdom {

enum class Mode { Solve, Estimate, Lions, McCdf, Adapt, Reference };

Mode parse_mode(const std::string& name);
std::string mode_name(Mode mode);

struct ExperimentConfig {
    std::string preset = "poisson-square";
    Mode mode = Mode::Solve;

    /// Empty means the unit square with four nodes per side.
    std::vector<Vec2> polygon;
    std::string partition = "grid";
    int cells_x = 4;
    int cells_y = 4;
    double ring_depth = 0.25;

    /// Only for preset "custom".
    Mat2 diffusion = Mat2::identity();
    Vec2 convection{};

    double half_width = 0.08;
    /// Per-node (x, y) half-widths; overrides half_width when nonempty.
    std::vector<Vec2> half_widths;
    double jacobian_lower = 0.25;
    double jacobian_upper = 4.0;
    int max_retries = 100;

    double h_tilde = 1.0;
    int degree = 1;
    long long samples = 100;
    /// Sample used by the single-sample modes (solve, estimate, lions).
    long long sample_index = 1;
    double epsilon = 0.05;
    double lambda = 5.0;
    int iterations = 33;
    int record_stride = 1;
    std::string lions_flux = "element";
    bool early_stop = false;
    double tol = 4e-4;
    double dorfler_fraction = 0.5;
    int max_rounds = 25;
    std::uint64_t seed = 0;
    int cdf_points = 512;

    std::string solver = "auto";
    double solver_tol = 1e-10;
    int solver_max_iterations = 0;

    /// Reference runs: uniform refinements of h_tilde and sample-count factor.
    int reference_refinements = 2;
    int reference_sample_factor = 4;
    /// Whether estimate mode also computes the refined P2 reference QoI.
    bool estimate_reference = true;
    std::string cache_dir = ".stochdom-cache";

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Strict parse: unknown keys, wrong types and out-of-range values throw
/// ConfigError whose key is the dotted path of the offending entry.
ExperimentConfig parse_config_string(const std::string& text);
ExperimentConfig parse_config(const std::filesystem::path& path);
/// Throws ConfigError for out-of-range values.
void validate(const ExperimentConfig& config);
/// Canonical JSON carrying every field.
std::string serialize(const ExperimentConfig& config);

ProblemSetup make_setup(const ExperimentConfig& config);
PerturbationModel make_model(const ExperimentConfig& config, int num_nodes);
SolverOptions make_solver_options(const ExperimentConfig& config);

} // namespace stochdom
