#include "stochdom/app.hpp"

#include "stochdom/error.hpp"
#include "stochdom/estimate.hpp"
#include "stochdom/exec.hpp"
#include "stochdom/lions.hpp"
#include "stochdom/uq.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace stochdom {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "1.0.0";
/// Reference runs draw from a separate stream family so they are independent of the run they check.
constexpr std::uint64_t kReferenceSeedOffset = 0x9E3779B97F4A7C15ULL;

class Emitter {
public:
    explicit Emitter(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

    std::ofstream open(const std::string& name)
    {
        files_.push_back(name);
        std::ofstream out(dir_ / name, std::ios::binary);
        if (!out) throw InputError("cannot write " + (dir_ / name).string());
        return out;
    }

    void write_json(const std::string& name, const json& j) { open(name) << j.dump(2) << '\n'; }

    std::vector<std::string> files() const
    {
        auto f = files_;
        std::sort(f.begin(), f.end());
        return f;
    }

private:
    fs::path dir_;
    std::vector<std::string> files_;
};

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

struct Context {
    ExperimentConfig config;
    ProblemSetup setup;
    std::shared_ptr<const Partition> partition;
    PerturbationModel model;
    SolverOptions solver;
    std::vector<std::string> warnings;

    explicit Context(const ExperimentConfig& c)
        : config(c), setup(make_setup(c)),
          partition(std::make_shared<const Partition>(build_partition(setup.reference, setup.partition))),
          model(make_model(c, partition->num_boundary_nodes)), solver(make_solver_options(c))
    {
    }

    TriMesh mesh(double h_tilde)
    {
        std::string warning;
        TriMesh m = uniform_mesh(*partition, h_tilde, setup.base_levels, &warning);
        if (!warning.empty()) warnings.push_back(warning);
        return m;
    }

    BoundarySample sample() const
    {
        return sample_perturbation(model, *partition, config.seed, config.sample_index);
    }
};

void run_solve(Context& cx, Emitter& em)
{
    const auto space = make_space(cx.mesh(cx.config.h_tilde), cx.config.degree);
    const BoundarySample smp = cx.sample();
    const SampleSolution sol = solve_sample(smp, cx.partition, cx.setup.data, space, cx.solver);
    em.write_json("solution.json", {{"sample_index", smp.index},
                                    {"qoi", sol.qoi},
                                    {"degree", space->degree()},
                                    {"vertices", space->mesh().num_vertices()},
                                    {"triangles", space->mesh().num_triangles()},
                                    {"rejections", smp.rejections},
                                    {"solver_iterations", sol.report.iterations},
                                    {"relative_residual", sol.report.relative_residual}});
    auto f = em.open("field.txt");
    write_field(f, sol.field);
    auto m = em.open("mesh.txt");
    write_mesh(m, space->mesh());
}

void run_estimate(Context& cx, Emitter& em)
{
    const auto p1 = make_space(cx.mesh(cx.config.h_tilde), 1);
    const auto p2 = std::make_shared<const FeSpace>(p1->mesh_ptr(), 2);
    const bool conv = cx.setup.data->has_convection;
    const BoundarySample smp = cx.sample();
    const SampleSolution sol = solve_sample(smp, cx.partition, cx.setup.data, p1, cx.solver);
    const Field eta = solve_adjoint(p2, *sol.coeffs, conv, cx.solver);
    ErrorEstimate est = error_estimate(sol.field, eta, *sol.coeffs, conv);
    std::optional<double> qref;
    if (cx.config.estimate_reference) {
        qref = reference_qoi(p1->mesh(), *sol.coeffs, conv, 2, cx.solver);
        est.reference_error = *qref - sol.qoi;
        est.effectivity = effectivity(est.total, *qref, sol.qoi);
    }
    em.write_json("estimate.json", {{"sample_index", smp.index},
                                    {"qoi", sol.qoi},
                                    {"estimate", est.total},
                                    {"reference_qoi", optional_json(qref)},
                                    {"reference_error", optional_json(est.reference_error)},
                                    {"effectivity", optional_json(est.effectivity)},
                                    {"vertices", p1->mesh().num_vertices()}});
    auto f = em.open("indicators.txt");
    write_indicators(f, element_indicators(sol.field, eta, *sol.coeffs, conv));
}

void run_lions_mode(Context& cx, Emitter& em)
{
    const auto p1 = make_space(cx.mesh(cx.config.h_tilde), 1);
    const auto p2 = std::make_shared<const FeSpace>(p1->mesh_ptr(), 2);
    const BoundarySample smp = cx.sample();
    const SampleSolution mono = solve_sample(smp, cx.partition, cx.setup.data, p1, cx.solver);
    const Field eta = solve_adjoint(p2, *mono.coeffs, false, cx.solver);
    std::optional<double> qref;
    if (cx.config.estimate_reference) qref = reference_qoi(p1->mesh(), *mono.coeffs, false, 2, cx.solver);

    LionsConfig lc;
    lc.lambda = cx.config.lambda;
    lc.max_iterations = cx.config.iterations;
    lc.record_stride = cx.config.record_stride;
    lc.flux = cx.config.lions_flux == "variational" ? LionsFlux::Variational : LionsFlux::Element;
    lc.early_stop = cx.config.early_stop;
    const LionsSolver solver(p1->mesh_ptr(), mono.coeffs, lc);
    const LionsRun run = run_lions(solver, eta, qref);
    auto f = em.open("lions.csv");
    write_lions_csv(f, run.rows);
    const LionsBreakdown& last = run.rows.back();
    em.write_json("lions.json", {{"sample_index", smp.index},
                                 {"iterations", run.last.iteration},
                                 {"early_stopped", run.early_stopped},
                                 {"monolithic_qoi", mono.qoi},
                                 {"reference_qoi", optional_json(qref)},
                                 {"final_qoi", last.qoi},
                                 {"final_de", last.de},
                                 {"final_ie", last.ie},
                                 {"final_ce", last.ce},
                                 {"distance_to_monolithic", solver.broken_h1_distance(run.last, mono.field)}});
}

std::vector<double> read_reference_qois(const fs::path& path)
{
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    std::vector<double> q;
    while (std::getline(in, line)) {
        const auto a = line.find(','), b = line.find(',', a + 1);
        if (a == std::string::npos) continue;
        q.push_back(std::stod(line.substr(a + 1, b - a - 1)));
    }
    if (q.empty()) throw InputError("reference cache " + path.string() + " holds no samples");
    return q;
}

void run_mc_cdf(Context& cx, Emitter& em)
{
    const auto p1 = make_space(cx.mesh(cx.config.h_tilde), 1);
    McConfig mc;
    mc.num_samples = cx.config.samples;
    mc.seed = cx.config.seed;
    mc.solver = cx.solver;
    const McResult res = run_mc(mc, cx.model, cx.partition, cx.setup.data, p1);
    for (const auto& f : res.failures) cx.warnings.push_back("sample " + std::to_string(f.index) + " failed: " + f.message);
    auto s = em.open("samples.csv");
    write_records_csv(s, res.records);

    const CdfBound bound = cdf_bound(res.records, default_grid(res.records, cx.config.cdf_points), cx.config.epsilon);
    std::optional<EmpiricalCdf> reference;
    const fs::path cache = fs::path(cx.config.cache_dir) / (reference_cache_key(cx.config) + ".csv");
    if (fs::exists(cache)) reference.emplace(read_reference_qois(cache));
    auto c = em.open("cdf.csv");
    write_cdf_csv(c, bound, reference ? &*reference : nullptr);

    json summary = {{"samples", res.records.size()},
                    {"failures", res.failures.size()},
                    {"epsilon", bound.epsilon},
                    {"integrated_sampling", integrate(bound.ts, bound.sampling)},
                    {"integrated_shift", integrate(bound.ts, bound.shift)},
                    {"integrated_tail", integrate(bound.ts, bound.tail)},
                    {"reference_cache", reference ? json(cache.string()) : json(nullptr)}};
    if (reference) {
        double sup = 0.0;
        bool dominated = true;
        for (std::size_t k = 0; k < bound.ts.size(); ++k) {
            const double err = std::abs((*reference)(bound.ts[k]) - bound.p_hat[k]);
            sup = std::max(sup, err);
            dominated = dominated && err <= bound.total[k];
        }
        summary["sup_abs_error"] = sup;
        summary["bound_dominates"] = dominated;
    }
    em.write_json("cdf_summary.json", summary);
}

void run_reference(Context& cx, Emitter& em)
{
    const fs::path cache = fs::path(cx.config.cache_dir) / (reference_cache_key(cx.config) + ".csv");
    const bool hit = fs::exists(cache);
    if (!hit) {
        const double h = cx.config.h_tilde / std::pow(2.0, cx.config.reference_refinements);
        const auto p1 = make_space(cx.mesh(h), 1);
        McConfig mc;
        mc.num_samples = cx.config.samples * cx.config.reference_sample_factor;
        mc.seed = cx.config.seed + kReferenceSeedOffset;
        mc.estimate = false;
        mc.solver = cx.solver;
        const McResult res = run_mc(mc, cx.model, cx.partition, cx.setup.data, p1);
        fs::create_directories(cache.parent_path());
        std::ofstream out(cache, std::ios::binary);
        write_records_csv(out, res.records);
    }
    std::ifstream in(cache, std::ios::binary);
    em.open("reference_samples.csv") << in.rdbuf();
    em.write_json("reference.json", {{"cache", cache.string()},
                                     {"cache_hit", hit},
                                     {"samples", read_reference_qois(cache).size()}});
}

std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

void write_manifest(const fs::path& dir, const ExperimentConfig* config, const std::vector<std::string>& files,
                    const std::vector<std::string>& warnings, double seconds)
{
    json m;
    m["tool"] = "stochdom";
    m["version"] = kVersion;
    if (config) {
        m["mode"] = mode_name(config->mode);
        m["seed"] = config->seed;
        m["config"] = json::parse(serialize(*config));
    }
    m["threads"] = max_threads();
    m["timings"] = {{"total_seconds", seconds}};
    m["warnings"] = warnings;
    m["files"] = files;
    std::ofstream(dir / "manifest.json", std::ios::binary) << m.dump(2) << '\n';
}

} // namespace

std::string reference_cache_key(const ExperimentConfig& c)
{
    ExperimentConfig k = c;
    // Fields that do not change the reference sample set.
    k.mode = Mode::Reference;
    k.sample_index = 1;
    k.epsilon = 0.05;
    k.cdf_points = 512;
    k.lambda = 5.0;
    k.iterations = 33;
    k.record_stride = 1;
    k.lions_flux = "element";
    k.early_stop = false;
    k.tol = 4e-4;
    k.dorfler_fraction = 0.5;
    k.max_rounds = 25;
    k.estimate_reference = true;
    k.cache_dir = ".";
    k.degree = 1;
    char buf[40];
    std::snprintf(buf, sizeof buf, "ref-%016llx", static_cast<unsigned long long>(fnv1a(serialize(k))));
    return buf;
}

RunOutcome run_experiment(const ExperimentConfig& config, const fs::path& out_dir)
{
    validate(config);
    const auto t0 = std::chrono::steady_clock::now();
    Emitter em(out_dir);
    Context cx(config);
    switch (config.mode) {
    case Mode::Solve: run_solve(cx, em); break;
    case Mode::Estimate: run_estimate(cx, em); break;
    case Mode::Lions: run_lions_mode(cx, em); break;
    case Mode::McCdf: run_mc_cdf(cx, em); break;
    case Mode::Adapt: {
        AdaptConfig ac;
        ac.tol = config.tol;
        ac.dorfler_fraction = config.dorfler_fraction;
        ac.max_rounds = config.max_rounds;
        ac.num_samples = config.samples;
        ac.seed = config.seed;
        ac.solver = cx.solver;
        const AdaptResult res = universal_mesh(cx.mesh(config.h_tilde), cx.model, cx.partition, cx.setup.data, ac);
        cx.warnings.insert(cx.warnings.end(), res.warnings.begin(), res.warnings.end());
        auto h = em.open("adapt_history.csv");
        write_adapt_history_csv(h, res.history);
        auto m = em.open("universal_mesh.txt");
        write_mesh(m, res.mesh);
        int right = 0;
        for (int v = res.initial_vertices; v < res.mesh.num_vertices(); ++v) right += res.mesh.vertices[v].x >= 0.5;
        const int added = res.mesh.num_vertices() - res.initial_vertices;
        em.write_json("adapt.json", {{"samples", res.history.size()},
                                     {"last_refining_sample", res.last_refining_sample()},
                                     {"initial_vertices", res.initial_vertices},
                                     {"final_vertices", res.mesh.num_vertices()},
                                     {"added_vertices_right_fraction",
                                      added > 0 ? json(static_cast<double>(right) / added) : json(nullptr)}});
        break;
    }
    case Mode::Reference: run_reference(cx, em); break;
    }
    RunOutcome out{em.files(), cx.warnings};
    write_manifest(out_dir, &config, out.files, out.warnings,
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return out;
}

std::string error_json(const std::exception& e)
{
    json j;
    std::string kind = "Error";
    if (const auto* c = dynamic_cast<const ConfigError*>(&e)) {
        kind = "ConfigError";
        j["key"] = c->key;
    } else if (const auto* s = dynamic_cast<const SampleError*>(&e)) {
        kind = "SampleError";
        j["sample_index"] = s->index;
    } else if (const auto* s = dynamic_cast<const SamplingError*>(&e)) {
        kind = "SamplingError";
        j["sample_index"] = s->index;
    } else if (dynamic_cast<const InputError*>(&e)) {
        kind = "InputError";
    } else if (dynamic_cast<const SolverError*>(&e)) {
        kind = "SolverError";
    } else if (dynamic_cast<const AssemblyError*>(&e)) {
        kind = "AssemblyError";
    } else if (dynamic_cast<const DegeneracyError*>(&e)) {
        kind = "DegeneracyError";
    } else if (dynamic_cast<const RefinementError*>(&e)) {
        kind = "RefinementError";
    } else if (!dynamic_cast<const Error*>(&e)) {
        kind = "InternalError";
    }
    j["error"] = kind;
    j["message"] = e.what();
    return j.dump(2);
}

void write_error(const fs::path& out_dir, const std::exception& e)
{
    fs::create_directories(out_dir);
    std::ofstream(out_dir / "error.json", std::ios::binary) << error_json(e) << '\n';
    write_manifest(out_dir, nullptr, {"error.json"}, {}, 0.0);
}

} // namespace stochdom
