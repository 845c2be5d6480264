#pragma once

#include "stochdom/fem.hpp"
#include "stochdom/geometry.hpp"
#include "stochdom/mesh.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace stochdom {

struct SampleRecord {
    long long index = 0;
    double qoi = 0.0;
    /// ℰⁿ; zero when the estimator is off.
    double estimate = 0.0;
    bool has_estimate = false;
    int vertices = 0;
    int iterations = 0;
    int rejections = 0;
    double wall_time = 0.0;
};

struct SampleFailure {
    long long index = 0;
    std::string message;
};

struct McConfig {
    long long num_samples = 100;
    std::uint64_t seed = 0;
    /// Samples are indexed first_index, ..., first_index + num_samples - 1.
    long long first_index = 1;
    bool estimate = true;
    SolverOptions solver;
    /// Parallel runs samples concurrently; each sample is then solved serially.
    Exec exec = Exec::Parallel;
    double max_failure_fraction = 0.01;
};

struct McResult {
    /// Ordered by index.
    std::vector<SampleRecord> records;
    std::vector<SampleFailure> failures;

    std::vector<double> qois() const;
};

/// Throws Error when more than `max_failure_fraction` of the samples fail.
McResult run_mc(const McConfig& config, const PerturbationModel& model, std::shared_ptr<const Partition> partition,
                std::shared_ptr<const ProblemData> data, std::shared_ptr<const FeSpace> space);

class EmpiricalCdf {
public:
    /// Throws InputError for an empty or non-finite sample.
    explicit EmpiricalCdf(std::vector<double> values);

    /// #{Qⁿ ≤ t} / N.
    double operator()(double t) const;
    const std::vector<double>& sorted() const { return sorted_; }
    int size() const { return static_cast<int>(sorted_.size()); }

private:
    std::vector<double> sorted_;
};

EmpiricalCdf empirical_cdf(const std::vector<double>& values);

struct CdfBound {
    double epsilon = 0.0;
    int num_samples = 0;
    std::vector<double> ts;
    std::vector<double> p_hat;
    std::vector<double> sampling;
    std::vector<double> shift;
    std::vector<double> tail;
    std::vector<double> total;
};

/// 512 uniform points on [min Q - 2 max|ℰ|, max Q + 2 max|ℰ|].
std::vector<double> default_grid(const std::vector<SampleRecord>& records, int points = 512);

/// Throws InputError unless 0 < ε < 1 and records are nonempty.
CdfBound cdf_bound(const std::vector<SampleRecord>& records, const std::vector<double>& ts, double epsilon);

/// Trapezoidal integral of a per-t column over the grid.
double integrate(const std::vector<double>& ts, const std::vector<double>& values);

/// t,P_hat,sampling_term,shift_term,tail_term,total_bound[,P_ref,abs_error]
void write_cdf_csv(std::ostream& out, const CdfBound& bound, const EmpiricalCdf* reference = nullptr);
/// sample_index,qoi,estimate,vertices,iterations,rejections
void write_records_csv(std::ostream& out, const std::vector<SampleRecord>& records);

struct AdaptConfig {
    double tol = 4e-4;
    double dorfler_fraction = 0.5;
    int max_rounds = 25;
    long long num_samples = 1000;
    long long first_index = 1;
    std::uint64_t seed = 0;
    SolverOptions solver;
    Exec exec = Exec::Parallel;

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

struct AdaptHistoryRow {
    long long sample_index = 0;
    /// Vertex count after this sample's refinements.
    int vertices = 0;
    bool refined = false;
    int rounds = 0;
    /// Values on the final mesh of this sample.
    double qoi = 0.0;
    double estimate = 0.0;
    bool tolerance_met = true;
    bool failed = false;
};

struct AdaptResult {
    TriMesh mesh;
    int initial_vertices = 0;
    std::vector<AdaptHistoryRow> history;
    std::vector<std::string> warnings;

    /// 0 when no sample refined.
    long long last_refining_sample() const;
};

/// Greedy universal mesh: each sample inherits the current mesh and refines it by
/// Dörfler marking until |ℰⁿ| ≤ TOL or max_rounds is hit.
AdaptResult universal_mesh(const TriMesh& initial, const PerturbationModel& model,
                           std::shared_ptr<const Partition> partition, std::shared_ptr<const ProblemData> data,
                           const AdaptConfig& config);

/// sample_index,vertices,refined,qoi,estimate
void write_adapt_history_csv(std::ostream& out, const std::vector<AdaptHistoryRow>& history);

} // namespace stochdom
