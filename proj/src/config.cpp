#include "stochdom/config.hpp"

#include "stochdom/error.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace stochdom {

using nlohmann::json;

namespace {

const std::pair<Mode, const char*> kModes[] = {
    {Mode::Solve, "solve"}, {Mode::Estimate, "estimate"}, {Mode::Lions, "lions"},
    {Mode::McCdf, "mc-cdf"}, {Mode::Adapt, "adapt"},       {Mode::Reference, "reference"},
};

/// One JSON object with its dotted path; every key must be consumed.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    std::string key(const std::string& name) const { return path_.empty() ? name : path_ + "." + name; }

    const json* find(const std::string& name)
    {
        seen_.insert(name);
        const auto it = j_.find(name);
        return it == j_.end() ? nullptr : &*it;
    }

    template <class T>
    void get(const std::string& name, T& out)
    {
        const json* v = find(name);
        if (!v) return;
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v->is_boolean()) throw ConfigError(key(name), "expected a boolean");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v->is_string()) throw ConfigError(key(name), "expected a string");
            } else if constexpr (std::is_integral_v<T>) {
                if (!v->is_number_integer()) throw ConfigError(key(name), "expected an integer");
                if constexpr (std::is_unsigned_v<T>) {
                    if (v->is_number_integer() && !v->is_number_unsigned())
                        throw ConfigError(key(name), "expected a non-negative integer");
                }
            } else {
                if (!v->is_number()) throw ConfigError(key(name), "expected a number");
            }
            out = v->get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(key(name), e.what());
        }
    }

    std::optional<Section> sub(const std::string& name)
    {
        const json* v = find(name);
        if (!v) return std::nullopt;
        return Section(*v, key(name));
    }

    void finish() const
    {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) throw ConfigError(key(it.key()), "unknown key");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

Vec2 read_pair(const json& v, const std::string& key)
{
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        throw ConfigError(key, "expected a pair of numbers");
    }
    return {v[0].get<double>(), v[1].get<double>()};
}

std::vector<Vec2> read_pairs(const json* v, const std::string& key)
{
    std::vector<Vec2> out;
    if (!v) return out;
    if (!v->is_array()) throw ConfigError(key, "expected an array of pairs");
    for (std::size_t k = 0; k < v->size(); ++k) {
        out.push_back(read_pair((*v)[k], key + "[" + std::to_string(k) + "]"));
    }
    return out;
}

json pairs_json(const std::vector<Vec2>& v)
{
    json a = json::array();
    for (const auto& p : v) a.push_back({p.x, p.y});
    return a;
}

void require(bool ok, const std::string& key, const std::string& what)
{
    if (!ok) throw ConfigError(key, what);
}

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

} // namespace

Mode parse_mode(const std::string& name)
{
    for (const auto& [m, n] : kModes) {
        if (name == n) return m;
    }
    throw ConfigError("mode", "unknown mode '" + name + "'");
}

std::string mode_name(Mode mode)
{
    for (const auto& [m, n] : kModes) {
        if (m == mode) return n;
    }
    return "?";
}

ExperimentConfig parse_config_string(const std::string& text)
{
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("<file>", std::string("malformed JSON: ") + e.what());
    }
    ExperimentConfig c;
    Section s(root, "");
    s.get("preset", c.preset);
    std::string mode = mode_name(c.mode);
    s.get("mode", mode);
    c.mode = parse_mode(mode);

    if (auto d = s.sub("domain")) {
        c.polygon = read_pairs(d->find("polygon"), d->key("polygon"));
        d->get("partition", c.partition);
        d->get("cells_x", c.cells_x);
        d->get("cells_y", c.cells_y);
        d->get("ring_depth", c.ring_depth);
        d->finish();
    }
    if (auto d = s.sub("custom")) {
        if (const json* a = d->find("diffusion")) {
            const std::string key = d->key("diffusion");
            if (!a->is_array() || a->size() != 2) throw ConfigError(key, "expected a 2x2 matrix");
            const Vec2 r0 = read_pair((*a)[0], key + "[0]"), r1 = read_pair((*a)[1], key + "[1]");
            c.diffusion = {r0.x, r0.y, r1.x, r1.y};
        }
        if (const json* b = d->find("convection")) c.convection = read_pair(*b, d->key("convection"));
        d->finish();
    }
    if (auto d = s.sub("perturbation")) {
        d->get("half_width", c.half_width);
        c.half_widths = read_pairs(d->find("half_widths"), d->key("half_widths"));
        d->get("jacobian_lower", c.jacobian_lower);
        d->get("jacobian_upper", c.jacobian_upper);
        d->get("max_retries", c.max_retries);
        d->finish();
    }
    s.get("h_tilde", c.h_tilde);
    s.get("degree", c.degree);
    s.get("samples", c.samples);
    s.get("sample_index", c.sample_index);
    s.get("epsilon", c.epsilon);
    s.get("seed", c.seed);
    s.get("cdf_points", c.cdf_points);
    if (auto d = s.sub("lions")) {
        d->get("lambda", c.lambda);
        d->get("iterations", c.iterations);
        d->get("record_stride", c.record_stride);
        d->get("flux", c.lions_flux);
        d->get("early_stop", c.early_stop);
        d->finish();
    }
    if (auto d = s.sub("adapt")) {
        d->get("tol", c.tol);
        d->get("dorfler_fraction", c.dorfler_fraction);
        d->get("max_rounds", c.max_rounds);
        d->finish();
    }
    if (auto d = s.sub("solver")) {
        d->get("kind", c.solver);
        d->get("tol", c.solver_tol);
        d->get("max_iterations", c.solver_max_iterations);
        d->finish();
    }
    if (auto d = s.sub("reference")) {
        d->get("refinements", c.reference_refinements);
        d->get("sample_factor", c.reference_sample_factor);
        d->get("estimate_reference", c.estimate_reference);
        d->get("cache_dir", c.cache_dir);
        d->finish();
    }
    s.finish();
    validate(c);
    return c;
}

ExperimentConfig parse_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("<file>", "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_string(ss.str());
}

void validate(const ExperimentConfig& c)
{
    require(c.preset == "poisson-square" || c.preset == "convection-diffusion-square" || c.preset == "custom", "preset",
            "unknown preset '" + c.preset + "'");
    require(c.preset == "custom" || c.polygon.empty(), "domain.polygon", "only the custom preset takes a polygon");
    require(c.polygon.empty() || c.polygon.size() >= 3, "domain.polygon", "needs at least three nodes");
    require(c.partition == "grid" || c.partition == "ring", "domain.partition", "must be 'grid' or 'ring'");
    require(c.cells_x >= 1 && c.cells_y >= 1, "domain.cells_x", "grid cells must be positive");
    require(c.ring_depth > 0.0 && c.ring_depth < 1.0, "domain.ring_depth", "must lie in (0, 1)");
    require(std::isfinite(c.half_width) && c.half_width >= 0.0, "perturbation.half_width", "must be >= 0");
    require(c.jacobian_lower > 0.0 && c.jacobian_lower < c.jacobian_upper, "perturbation.jacobian_lower",
            "needs 0 < jacobian_lower < jacobian_upper");
    require(c.max_retries >= 0, "perturbation.max_retries", "must be >= 0");
    require(finite_positive(c.h_tilde) && c.h_tilde <= 1.0, "h_tilde", "must lie in (0, 1]");
    require(c.degree == 1 || c.degree == 2, "degree", "must be 1 or 2");
    require(c.degree == 1 || c.mode == Mode::Solve, "degree",
            "degree 2 is only available in solve mode (the estimator needs a richer adjoint space)");
    require(c.samples >= 1, "samples", "must be >= 1");
    require(c.sample_index >= 0, "sample_index", "must be >= 0");
    require(c.epsilon > 0.0 && c.epsilon < 1.0, "epsilon", "must lie in (0, 1)");
    require(c.cdf_points >= 2, "cdf_points", "must be >= 2");
    require(std::isfinite(c.lambda) && c.lambda > 0.0, "lions.lambda", "must be > 0");
    require(c.iterations >= 1, "lions.iterations", "must be >= 1");
    require(c.record_stride >= 1, "lions.record_stride", "must be >= 1");
    require(c.lions_flux == "element" || c.lions_flux == "variational", "lions.flux",
            "must be 'element' or 'variational'");
    require(finite_positive(c.tol), "adapt.tol", "must be > 0");
    require(c.dorfler_fraction > 0.0 && c.dorfler_fraction <= 1.0, "adapt.dorfler_fraction", "must lie in (0, 1]");
    require(c.max_rounds >= 0, "adapt.max_rounds", "must be >= 0");
    require(c.solver == "auto" || c.solver == "cg" || c.solver == "bicgstab" || c.solver == "direct", "solver.kind",
            "must be auto, cg, bicgstab or direct");
    require(finite_positive(c.solver_tol) && c.solver_tol < 1.0, "solver.tol", "must lie in (0, 1)");
    require(c.solver_max_iterations >= 0, "solver.max_iterations", "must be >= 0");
    require(c.reference_refinements >= 0, "reference.refinements", "must be >= 0");
    require(c.reference_sample_factor >= 1, "reference.sample_factor", "must be >= 1");
    require(!c.cache_dir.empty(), "reference.cache_dir", "must not be empty");
}

std::string serialize(const ExperimentConfig& c)
{
    json j;
    j["preset"] = c.preset;
    j["mode"] = mode_name(c.mode);
    j["domain"] = {{"polygon", pairs_json(c.polygon)},
                   {"partition", c.partition},
                   {"cells_x", c.cells_x},
                   {"cells_y", c.cells_y},
                   {"ring_depth", c.ring_depth}};
    j["custom"] = {{"diffusion", {{c.diffusion.a11, c.diffusion.a12}, {c.diffusion.a21, c.diffusion.a22}}},
                   {"convection", {c.convection.x, c.convection.y}}};
    j["perturbation"] = {{"half_width", c.half_width},
                         {"half_widths", pairs_json(c.half_widths)},
                         {"jacobian_lower", c.jacobian_lower},
                         {"jacobian_upper", c.jacobian_upper},
                         {"max_retries", c.max_retries}};
    j["h_tilde"] = c.h_tilde;
    j["degree"] = c.degree;
    j["samples"] = c.samples;
    j["sample_index"] = c.sample_index;
    j["epsilon"] = c.epsilon;
    j["seed"] = c.seed;
    j["cdf_points"] = c.cdf_points;
    j["lions"] = {{"lambda", c.lambda},
                  {"iterations", c.iterations},
                  {"record_stride", c.record_stride},
                  {"flux", c.lions_flux},
                  {"early_stop", c.early_stop}};
    j["adapt"] = {{"tol", c.tol}, {"dorfler_fraction", c.dorfler_fraction}, {"max_rounds", c.max_rounds}};
    j["solver"] = {{"kind", c.solver}, {"tol", c.solver_tol}, {"max_iterations", c.solver_max_iterations}};
    j["reference"] = {{"refinements", c.reference_refinements},
                      {"sample_factor", c.reference_sample_factor},
                      {"estimate_reference", c.estimate_reference},
                      {"cache_dir", c.cache_dir}};
    return j.dump(2);
}

ProblemSetup make_setup(const ExperimentConfig& c)
{
    if (c.preset != "custom") {
        return square_setup(c.preset);
    }
    ProblemSetup s{"custom", c.polygon.empty() ? ReferenceDomain::unit_square(4) : ReferenceDomain(c.polygon),
                   PartitionSpec{}, custom_data(c.diffusion, c.convection), c.half_width, 2};
    s.partition.kind = c.partition == "ring" ? PartitionSpec::Kind::Ring : PartitionSpec::Kind::Grid;
    s.partition.cells_x = c.cells_x;
    s.partition.cells_y = c.cells_y;
    s.partition.ring_depth = c.ring_depth;
    return s;
}

PerturbationModel make_model(const ExperimentConfig& c, int num_nodes)
{
    PerturbationModel m = PerturbationModel::uniform_box(num_nodes, c.half_width);
    if (!c.half_widths.empty()) {
        if (static_cast<int>(c.half_widths.size()) != num_nodes) {
            throw ConfigError("perturbation.half_widths",
                              "needs one entry per boundary node (" + std::to_string(num_nodes) + ")");
        }
        m.half_widths = c.half_widths;
    }
    m.jacobian_lower = c.jacobian_lower;
    m.jacobian_upper = c.jacobian_upper;
    m.max_retries = c.max_retries;
    m.validate(num_nodes);
    return m;
}

SolverOptions make_solver_options(const ExperimentConfig& c)
{
    SolverOptions o;
    if (c.solver == "cg") o.kind = SolverKind::CG;
    if (c.solver == "bicgstab") o.kind = SolverKind::BiCGStab;
    if (c.solver == "direct") o.kind = SolverKind::Direct;
    o.tol = c.solver_tol;
    o.max_iterations = c.solver_max_iterations;
    return o;
}

} // namespace stochdom
