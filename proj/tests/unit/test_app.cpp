#include "stochdom/app.hpp"
#include "stochdom/error.hpp"

#include <json.hpp>

#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace stochdom;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("stochdom_app_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

std::string header(const fs::path& p)
{
    const std::string s = slurp(p);
    return s.substr(0, s.find('\n'));
}

} // namespace

TEST(App, SolveRerunIsByteIdentical)
{
    ExperimentConfig c;
    const fs::path a = scratch("solve_a"), b = scratch("solve_b");
    const RunOutcome ra = run_experiment(c, a);
    run_experiment(c, b);
    EXPECT_EQ(ra.files, (std::vector<std::string>{"field.txt", "mesh.txt", "solution.json"}));
    for (const auto& f : ra.files) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;

    const json m = read_json(a / "manifest.json");
    EXPECT_EQ(m["version"], "1.0.0");
    EXPECT_EQ(m["mode"], "solve");
    EXPECT_EQ(m["seed"], 0);
    EXPECT_EQ(m["files"], json(ra.files));
    EXPECT_TRUE(m.contains("threads"));
    EXPECT_TRUE(m["timings"].contains("total_seconds"));
    EXPECT_EQ(parse_config_string(m["config"].dump()), c);
    EXPECT_EQ(read_json(a / "solution.json")["vertices"], 289);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(App, EstimateAndLionsOutputs)
{
    ExperimentConfig c;
    c.mode = Mode::Estimate;
    const fs::path e = scratch("estimate");
    run_experiment(c, e);
    const json est = read_json(e / "estimate.json");
    EXPECT_TRUE(est["effectivity"].is_number());
    EXPECT_GT(std::abs(est["estimate"].get<double>()), 0.0);

    c.mode = Mode::Lions;
    c.iterations = 5;
    const fs::path l = scratch("lions");
    const RunOutcome r = run_experiment(c, l);
    EXPECT_EQ(r.files, (std::vector<std::string>{"lions.csv", "lions.json"}));
    EXPECT_EQ(header(l / "lions.csv"), "i,Q,DE,IE,CE,total,reference_error,effectivity");
    EXPECT_EQ(read_json(l / "lions.json")["iterations"], 5);
    fs::remove_all(e);
    fs::remove_all(l);
}

TEST(App, ReferenceCacheFeedsMcCdf)
{
    ExperimentConfig c;
    c.samples = 6;
    c.reference_refinements = 1;
    c.reference_sample_factor = 2;
    const fs::path cache = scratch("cache");
    c.cache_dir = cache.string();

    const fs::path before = scratch("mc_before");
    c.mode = Mode::McCdf;
    run_experiment(c, before);
    EXPECT_EQ(header(before / "cdf.csv"), "t,P_hat,sampling_term,shift_term,tail_term,total_bound");
    EXPECT_EQ(header(before / "samples.csv"), "sample_index,qoi,estimate,vertices,iterations,rejections");
    EXPECT_TRUE(read_json(before / "cdf_summary.json")["reference_cache"].is_null());

    c.mode = Mode::Reference;
    const fs::path r1 = scratch("ref1"), r2 = scratch("ref2");
    run_experiment(c, r1);
    EXPECT_FALSE(read_json(r1 / "reference.json")["cache_hit"].get<bool>());
    EXPECT_EQ(read_json(r1 / "reference.json")["samples"], 12);
    EXPECT_TRUE(fs::exists(cache / (reference_cache_key(c) + ".csv")));
    run_experiment(c, r2);
    EXPECT_TRUE(read_json(r2 / "reference.json")["cache_hit"].get<bool>());
    EXPECT_EQ(slurp(r1 / "reference_samples.csv"), slurp(r2 / "reference_samples.csv"));

    c.mode = Mode::McCdf;
    const fs::path after = scratch("mc_after");
    run_experiment(c, after);
    EXPECT_EQ(header(after / "cdf.csv"),
              "t,P_hat,sampling_term,shift_term,tail_term,total_bound,P_ref,abs_error");
    const json s = read_json(after / "cdf_summary.json");
    EXPECT_TRUE(s["sup_abs_error"].is_number());
    EXPECT_TRUE(s["bound_dominates"].is_boolean());
    for (const auto& p : {cache, before, r1, r2, after}) fs::remove_all(p);
}

TEST(App, CacheKeyIgnoresUnrelatedFields)
{
    ExperimentConfig a, b;
    b.mode = Mode::McCdf;
    b.epsilon = 0.1;
    b.lambda = 2.0;
    EXPECT_EQ(reference_cache_key(a), reference_cache_key(b));
    b.seed = 3;
    EXPECT_NE(reference_cache_key(a), reference_cache_key(b));
    b = a;
    b.h_tilde = 0.5;
    EXPECT_NE(reference_cache_key(a), reference_cache_key(b));
}

TEST(App, ErrorsAreStructured)
{
    const json cfg = json::parse(error_json(ConfigError("lions.lambda", "must be > 0")));
    EXPECT_EQ(cfg["error"], "ConfigError");
    EXPECT_EQ(cfg["key"], "lions.lambda");
    const json smp = json::parse(error_json(SampleError(42, "boom")));
    EXPECT_EQ(smp["error"], "SampleError");
    EXPECT_EQ(smp["sample_index"], 42);
    EXPECT_EQ(json::parse(error_json(std::runtime_error("x")))["error"], "InternalError");

    const fs::path d = scratch("error");
    write_error(d, InputError("bad mesh"));
    EXPECT_EQ(read_json(d / "error.json")["error"], "InputError");
    EXPECT_EQ(read_json(d / "manifest.json")["files"], json({"error.json"}));

    ExperimentConfig c;
    c.epsilon = 2.0;
    EXPECT_THROW(run_experiment(c, d), ConfigError);
    fs::remove_all(d);
}

TEST(App, AdaptWritesHistory)
{
    ExperimentConfig c;
    c.preset = "convection-diffusion-square";
    c.mode = Mode::Adapt;
    c.samples = 3;
    c.tol = 5e-3;
    const fs::path d = scratch("adapt");
    const RunOutcome r = run_experiment(c, d);
    EXPECT_EQ(r.files, (std::vector<std::string>{"adapt.json", "adapt_history.csv", "universal_mesh.txt"}));
    EXPECT_EQ(header(d / "adapt_history.csv"), "sample_index,vertices,refined,qoi,estimate");
    EXPECT_EQ(read_json(d / "adapt.json")["samples"], 3);
    fs::remove_all(d);
}
