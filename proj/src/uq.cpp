#include "stochdom/uq.hpp"

#include "stochdom/error.hpp"
#include "stochdom/estimate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace stochdom {

namespace {

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct Estimated {
    SampleSolution solution;
    std::optional<Field> adjoint;
    double estimate = 0.0;
};

Estimated solve_and_estimate(const BoundarySample& sample, const std::shared_ptr<const Partition>& partition,
                             const std::shared_ptr<const ProblemData>& data,
                             const std::shared_ptr<const FeSpace>& p1, const std::shared_ptr<const FeSpace>& p2,
                             const SolverOptions& opt, Exec exec)
{
    Estimated out{solve_sample(sample, partition, data, p1, opt, exec), std::nullopt};
    if (p2) {
        try {
            out.adjoint = solve_adjoint(p2, *out.solution.coeffs, data->has_convection, opt, nullptr, exec);
            out.estimate = error_estimate(out.solution.field, *out.adjoint, *out.solution.coeffs, data->has_convection,
                                          exec)
                               .total;
        } catch (const SampleError&) {
            throw;
        } catch (const Error& e) {
            throw SampleError(sample.index, e.what());
        }
    }
    return out;
}

} // namespace

std::vector<double> McResult::qois() const
{
    std::vector<double> q;
    q.reserve(records.size());
    for (const auto& r : records) q.push_back(r.qoi);
    return q;
}

McResult run_mc(const McConfig& config, const PerturbationModel& model, std::shared_ptr<const Partition> partition,
                std::shared_ptr<const ProblemData> data, std::shared_ptr<const FeSpace> space)
{
    if (config.num_samples < 1) {
        throw ConfigError("num_samples", "must be at least 1");
    }
    model.validate(partition->num_boundary_nodes);
    const auto p2 = config.estimate ? std::make_shared<const FeSpace>(space->mesh_ptr(), 2) : nullptr;
    const long long n = config.num_samples;
    std::vector<SampleRecord> slots(n);
    std::vector<std::string> errors(n);
    std::vector<char> ok(n, 0);

    auto work = [&](long long k) {
        const long long index = config.first_index + k;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const BoundarySample sample = sample_perturbation(model, *partition, config.seed, index);
            const Estimated res = solve_and_estimate(sample, partition, data, space, p2, config.solver, Exec::Serial);
            SampleRecord& r = slots[k];
            r.index = index;
            r.qoi = res.solution.qoi;
            r.estimate = res.estimate;
            r.has_estimate = config.estimate;
            r.vertices = space->mesh().num_vertices();
            r.iterations = res.solution.report.iterations;
            r.rejections = sample.rejections;
            if (!std::isfinite(r.qoi) || !std::isfinite(r.estimate)) {
                throw SampleError(index, "non-finite QoI or estimate");
            }
            r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            ok[k] = 1;
        } catch (const Error& e) {
            errors[k] = e.what();
        }
    };
    if (config.exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic)
        for (long long k = 0; k < n; ++k) work(k);
    } else {
        for (long long k = 0; k < n; ++k) work(k);
    }

    McResult result;
    for (long long k = 0; k < n; ++k) {
        if (ok[k]) {
            result.records.push_back(slots[k]);
        } else {
            result.failures.push_back({config.first_index + k, errors[k]});
        }
    }
    if (static_cast<double>(result.failures.size()) > config.max_failure_fraction * static_cast<double>(n)) {
        throw Error(std::to_string(result.failures.size()) + " of " + std::to_string(n)
                    + " samples failed; first: " + result.failures.front().message);
    }
    return result;
}

EmpiricalCdf::EmpiricalCdf(std::vector<double> values) : sorted_(std::move(values))
{
    if (sorted_.empty()) {
        throw InputError("empirical CDF of an empty sample");
    }
    for (double v : sorted_) {
        if (!std::isfinite(v)) throw InputError("empirical CDF of a non-finite value");
    }
    std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalCdf::operator()(double t) const
{
    const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), t);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

EmpiricalCdf empirical_cdf(const std::vector<double>& values) { return EmpiricalCdf(values); }

std::vector<double> default_grid(const std::vector<SampleRecord>& records, int points)
{
    if (records.empty() || points < 2) {
        throw InputError("default grid needs records and at least two points");
    }
    double lo = records.front().qoi, hi = lo, e = 0.0;
    for (const auto& r : records) {
        lo = std::min(lo, r.qoi);
        hi = std::max(hi, r.qoi);
        e = std::max(e, std::abs(r.estimate));
    }
    lo -= 2.0 * e;
    hi += 2.0 * e;
    std::vector<double> ts(points);
    for (int k = 0; k < points; ++k) {
        ts[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
    }
    return ts;
}

CdfBound cdf_bound(const std::vector<SampleRecord>& records, const std::vector<double>& ts, double epsilon)
{
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
        throw InputError("epsilon must lie in (0, 1)");
    }
    if (records.empty()) {
        throw InputError("CDF bound needs at least one record");
    }
    std::vector<double> q;
    q.reserve(records.size());
    for (const auto& r : records) q.push_back(r.qoi);
    const EmpiricalCdf cdf(q);
    const double n = static_cast<double>(records.size());

    CdfBound b;
    b.epsilon = epsilon;
    b.num_samples = static_cast<int>(records.size());
    b.ts = ts;
    const std::size_t m = ts.size();
    b.p_hat.resize(m);
    b.sampling.resize(m);
    b.shift.resize(m);
    b.tail.assign(m, 1.0 / (2.0 * n * epsilon));
    b.total.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
        const double t = ts[k];
        const double p = cdf(t);
        b.p_hat[k] = p;
        b.sampling[k] = std::sqrt(p * (1.0 - p) / (n * epsilon));
        int hits = 0;
        for (const auto& r : records) {
            if (std::abs(t - r.qoi) <= std::abs(r.estimate)) ++hits;
        }
        b.shift[k] = 2.0 * hits / n;
        b.total[k] = b.sampling[k] + b.shift[k] + b.tail[k];
    }
    return b;
}

double integrate(const std::vector<double>& ts, const std::vector<double>& values)
{
    if (ts.size() != values.size()) {
        throw InputError("grid and values differ in length");
    }
    long double s = 0.0L;
    for (std::size_t k = 1; k < ts.size(); ++k) {
        s += 0.5L * (ts[k] - ts[k - 1]) * (static_cast<long double>(values[k]) + values[k - 1]);
    }
    return static_cast<double>(s);
}

void write_cdf_csv(std::ostream& out, const CdfBound& bound, const EmpiricalCdf* reference)
{
    out << "t,P_hat,sampling_term,shift_term,tail_term,total_bound";
    if (reference) out << ",P_ref,abs_error";
    out << '\n';
    for (std::size_t k = 0; k < bound.ts.size(); ++k) {
        out << fmt(bound.ts[k]) << ',' << fmt(bound.p_hat[k]) << ',' << fmt(bound.sampling[k]) << ','
            << fmt(bound.shift[k]) << ',' << fmt(bound.tail[k]) << ',' << fmt(bound.total[k]);
        if (reference) {
            const double p = (*reference)(bound.ts[k]);
            out << ',' << fmt(p) << ',' << fmt(std::abs(p - bound.p_hat[k]));
        }
        out << '\n';
    }
}

void write_records_csv(std::ostream& out, const std::vector<SampleRecord>& records)
{
    out << "sample_index,qoi,estimate,vertices,iterations,rejections\n";
    for (const auto& r : records) {
        out << r.index << ',' << fmt(r.qoi) << ',' << (r.has_estimate ? fmt(r.estimate) : "") << ',' << r.vertices
            << ',' << r.iterations << ',' << r.rejections << '\n';
    }
}

void AdaptConfig::validate() const
{
    if (!(tol > 0.0)) throw ConfigError("tol", "must be positive");
    if (!(dorfler_fraction > 0.0 && dorfler_fraction <= 1.0)) {
        throw ConfigError("dorfler_fraction", "must lie in (0, 1]");
    }
    if (max_rounds < 0) throw ConfigError("max_rounds", "must be non-negative");
    if (num_samples < 1) throw ConfigError("num_samples", "must be at least 1");
}

long long AdaptResult::last_refining_sample() const
{
    long long last = 0;
    for (const auto& h : history) {
        if (h.refined) last = h.sample_index;
    }
    return last;
}

AdaptResult universal_mesh(const TriMesh& initial, const PerturbationModel& model,
                           std::shared_ptr<const Partition> partition, std::shared_ptr<const ProblemData> data,
                           const AdaptConfig& config)
{
    config.validate();
    model.validate(partition->num_boundary_nodes);
    AdaptResult result;
    result.initial_vertices = initial.num_vertices();
    auto p1 = make_space(initial, 1);
    auto p2 = std::make_shared<const FeSpace>(p1->mesh_ptr(), 2);

    for (long long k = 0; k < config.num_samples; ++k) {
        AdaptHistoryRow row;
        row.sample_index = config.first_index + k;
        try {
            const BoundarySample sample = sample_perturbation(model, *partition, config.seed, row.sample_index);
            while (true) {
                const Estimated res = solve_and_estimate(sample, partition, data, p1, p2, config.solver, config.exec);
                row.qoi = res.solution.qoi;
                row.estimate = res.estimate;
                if (std::abs(res.estimate) <= config.tol) break;
                if (row.rounds == config.max_rounds) {
                    row.tolerance_met = false;
                    result.warnings.push_back("sample " + std::to_string(row.sample_index) + ": tolerance not met after "
                                              + std::to_string(row.rounds) + " refinement rounds");
                    break;
                }
                const IndicatorField ind = element_indicators(res.solution.field, *res.adjoint, *res.solution.coeffs,
                                                              data->has_convection, config.exec);
                p1 = make_space(refine(p1->mesh(), dorfler_mark(ind, config.dorfler_fraction)), 1);
                p2 = std::make_shared<const FeSpace>(p1->mesh_ptr(), 2);
                ++row.rounds;
                row.refined = true;
            }
        } catch (const Error& e) {
            row.failed = true;
            row.tolerance_met = false;
            result.warnings.push_back(std::string("sample skipped: ") + e.what());
        }
        row.vertices = p1->mesh().num_vertices();
        result.history.push_back(row);
    }
    result.mesh = p1->mesh();
    return result;
}

void write_adapt_history_csv(std::ostream& out, const std::vector<AdaptHistoryRow>& history)
{
    out << "sample_index,vertices,refined,qoi,estimate\n";
    for (const auto& h : history) {
        out << h.sample_index << ',' << h.vertices << ',' << (h.refined ? 1 : 0) << ',' << fmt(h.qoi) << ','
            << fmt(h.estimate) << '\n';
    }
}

} // namespace stochdom
