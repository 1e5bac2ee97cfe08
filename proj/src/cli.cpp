#include "phcd/cli.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>

#include "json.hpp"

#include "phcd/analytic_inverter.hpp"
#include "phcd/defect_model.hpp"
#include "phcd/objective.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace phcd {

int levenshtein(const std::string& a, const std::string& b) {
    const int n = static_cast<int>(a.size()), m = static_cast<int>(b.size());
    std::vector<int> prev(m + 1), cur(m + 1);
    for (int j = 0; j <= m; ++j)
        prev[j] = j;
    for (int i = 1; i <= n; ++i) {
        cur[0] = i;
        for (int j = 1; j <= m; ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1,
                               prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return prev[m];
}

std::string fnv1a64_hex(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes)
        h = (h ^ c) * 1099511628211ull;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(h));
    return buf;
}

// ----------------------------------------------------------------- parsing

namespace {

const std::map<std::string, std::vector<std::string>>& schema() {
    static const std::map<std::string, std::vector<std::string>> s = {
        {"run", {"command", "seed"}},
        {"lattice",
         {"lattice_constant", "hole_radius", "bulk_index", "hole_index",
          "type"}},
        {"solver",
         {"n_g", "division", "n_bands", "path_resolution", "polarization"}},
        {"objective",
         {"beta_I", "beta_V", "omega_m", "weight_budget", "domain_side",
          "svd_tol", "inversion_bands", "selector"}},
        {"slab",
         {"thickness", "layers", "mesh", "padding", "incidence", "scan_min",
          "scan_max", "scan_points", "cavity_major", "cavity_minor"}},
        {"ga",
         {"population", "mutation_rate", "crossover_rate", "sigma", "budget",
          "seed", "resume"}},
        {"output", {"directory"}},
    };
    return s;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    for (char& c : s)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

struct Parser {
    RunConfig cfg;
    std::vector<std::string> errors;
    bool command_seen = false;

    void fail(const std::string& msg) { errors.push_back(msg); }

    double num(const std::string& where, const std::string& v, bool& ok) {
        char* end = nullptr;
        const double x = std::strtod(v.c_str(), &end);
        ok = end && *end == '\0' && !v.empty();
        if (!ok)
            fail(where + ": not a number: '" + v + "'");
        return x;
    }
    int integer(const std::string& where, const std::string& v, bool& ok) {
        bool okd = false;
        const double x = num(where, v, okd);
        ok = okd && x == std::floor(x);
        if (okd && !ok)
            fail(where + ": not an integer: '" + v + "'");
        return static_cast<int>(x);
    }

    void suggest_unknown(const std::string& sec, const std::string& key) {
        int best = 4;
        std::string hint;
        for (const std::string& k : schema().at(sec)) {
            const int d = levenshtein(key, k);
            if (d < best) {
                best = d;
                hint = k;
            }
        }
        std::string msg = "unknown key '" + key + "' in [" + sec + "]";
        if (!hint.empty())
            msg += "; did you mean '" + hint + "'?";
        fail(msg);
    }

    void set(const std::string& sec, const std::string& key,
             const std::string& val) {
        const std::string w = "[" + sec + "] " + key;
        bool ok = true;
        if (sec == "run") {
            if (key == "command") {
                command_seen = true;
                const std::string v = lower(val);
                if (v == "bands")
                    cfg.command = Command::Bands;
                else if (v == "invert2d")
                    cfg.command = Command::Invert2d;
                else if (v == "planar-scan")
                    cfg.command = Command::PlanarScan;
                else if (v == "ga-opt")
                    cfg.command = Command::GaOpt;
                else
                    fail(w + ": unknown command '" + val +
                         "' (bands, invert2d, planar-scan, ga-opt)");
            } else if (key == "seed") {
                const int s = integer(w, val, ok);
                if (ok && s < 0)
                    fail(w + ": must be >= 0");
                else if (ok)
                    cfg.seed_override = static_cast<std::uint64_t>(s);
            } else
                suggest_unknown(sec, key);
        } else if (sec == "lattice") {
            if (key == "lattice_constant")
                cfg.lattice.lattice_constant = num(w, val, ok);
            else if (key == "hole_radius")
                cfg.lattice.hole_radius = num(w, val, ok);
            else if (key == "bulk_index")
                cfg.lattice.bulk_index = num(w, val, ok);
            else if (key == "hole_index")
                cfg.lattice.hole_index = num(w, val, ok);
            else if (key == "type") {
                if (lower(val) != "hexagonal")
                    fail(w + ": only 'hexagonal' is supported");
            } else
                suggest_unknown(sec, key);
        } else if (sec == "solver") {
            if (key == "n_g")
                cfg.solver.n_g = integer(w, val, ok);
            else if (key == "division")
                cfg.solver.division = integer(w, val, ok);
            else if (key == "n_bands")
                cfg.solver.n_bands = integer(w, val, ok);
            else if (key == "path_resolution")
                cfg.solver.path_resolution = integer(w, val, ok);
            else if (key == "polarization") {
                const std::string v = lower(val);
                if (v == "te")
                    cfg.solver.polarization = Polarization::TE;
                else if (v == "tm")
                    cfg.solver.polarization = Polarization::TM;
                else
                    fail(w + ": expected 'te' or 'tm'");
            } else
                suggest_unknown(sec, key);
        } else if (sec == "objective") {
            if (key == "beta_I")
                cfg.objective.beta_I = num(w, val, ok);
            else if (key == "beta_V")
                cfg.objective.beta_V = num(w, val, ok);
            else if (key == "omega_m") {
                if (lower(val) == "midgap")
                    cfg.objective.omega_m.reset();
                else
                    cfg.objective.omega_m = num(w, val, ok);
            } else if (key == "weight_budget")
                cfg.objective.weight_budget = integer(w, val, ok);
            else if (key == "domain_side")
                cfg.objective.domain_side = num(w, val, ok);
            else if (key == "svd_tol")
                cfg.objective.svd_tol = num(w, val, ok);
            else if (key == "inversion_bands")
                cfg.objective.inversion_bands = integer(w, val, ok);
            else if (key == "selector") {
                const std::string v = lower(val);
                if (v == "smallest")
                    cfg.objective.selector = EigenSelector::SmallestEigenvalue;
                else if (v == "max-cost")
                    cfg.objective.selector = EigenSelector::MaxCost;
                else
                    fail(w + ": expected 'smallest' or 'max-cost'");
            } else
                suggest_unknown(sec, key);
        } else if (sec == "slab") {
            if (key == "thickness")
                cfg.slab.thickness = num(w, val, ok);
            else if (key == "layers")
                cfg.slab.layers = integer(w, val, ok);
            else if (key == "mesh")
                cfg.slab.mesh = integer(w, val, ok);
            else if (key == "padding")
                cfg.slab.padding = num(w, val, ok);
            else if (key == "incidence") {
                const std::string v = lower(val);
                if (v == "edge")
                    cfg.slab.incidence = Incidence::Edge;
                else if (v == "vertical")
                    cfg.slab.incidence = Incidence::Vertical;
                else
                    fail(w + ": expected 'edge' or 'vertical'");
            } else if (key == "scan_min")
                cfg.slab.scan_min = num(w, val, ok);
            else if (key == "scan_max")
                cfg.slab.scan_max = num(w, val, ok);
            else if (key == "scan_points")
                cfg.slab.scan_points = integer(w, val, ok);
            else if (key == "cavity_major")
                cfg.slab.cavity_major = num(w, val, ok);
            else if (key == "cavity_minor")
                cfg.slab.cavity_minor = num(w, val, ok);
            else
                suggest_unknown(sec, key);
        } else if (sec == "ga") {
            if (key == "population")
                cfg.ga.population = integer(w, val, ok);
            else if (key == "mutation_rate")
                cfg.ga.mutation_rate = num(w, val, ok);
            else if (key == "crossover_rate")
                cfg.ga.crossover_rate = num(w, val, ok);
            else if (key == "sigma")
                cfg.ga.sigma = num(w, val, ok);
            else if (key == "budget")
                cfg.ga.budget = integer(w, val, ok);
            else if (key == "seed") {
                const int s = integer(w, val, ok);
                if (ok && s >= 0)
                    cfg.ga.seed = static_cast<std::uint64_t>(s);
                else if (ok)
                    fail(w + ": must be >= 0");
            } else if (key == "resume")
                cfg.ga.resume = val;
            else
                suggest_unknown(sec, key);
        } else if (sec == "output") {
            if (key == "directory")
                cfg.output_directory = val;
            else
                suggest_unknown(sec, key);
        }
    }

    void validate_ranges() {
        auto require = [&](bool cond, const std::string& msg) {
            if (!cond)
                fail(msg);
        };
        require(cfg.lattice.lattice_constant > 0,
                "[lattice] lattice_constant: must be positive");
        require(cfg.lattice.hole_radius > 0 && cfg.lattice.hole_radius < 0.5,
                "[lattice] hole_radius: must lie in (0, 0.5)");
        require(cfg.lattice.bulk_index >= 1,
                "[lattice] bulk_index: must be >= 1");
        require(cfg.lattice.hole_index >= 1,
                "[lattice] hole_index: must be >= 1");
        require(cfg.solver.n_g >= 1, "[solver] n_g: must be >= 1");
        require(cfg.solver.division >= 1, "[solver] division: must be >= 1");
        require(cfg.solver.n_bands >= 1, "[solver] n_bands: must be >= 1");
        require(cfg.solver.path_resolution >= 2,
                "[solver] path_resolution: must be >= 2");
        require(cfg.objective.beta_I >= 0, "[objective] beta_I: must be >= 0");
        require(cfg.objective.beta_V >= 0, "[objective] beta_V: must be >= 0");
        require(!cfg.objective.omega_m || *cfg.objective.omega_m > 0,
                "[objective] omega_m: must be positive or 'midgap'");
        require(cfg.objective.weight_budget >= 1,
                "[objective] weight_budget: must be >= 1");
        require(cfg.objective.domain_side > 0,
                "[objective] domain_side: must be positive");
        require(cfg.objective.svd_tol > 0,
                "[objective] svd_tol: must be positive");
        require(cfg.objective.inversion_bands >= 0,
                "[objective] inversion_bands: must be >= 0");
        require(cfg.slab.thickness > 0, "[slab] thickness: must be positive");
        require(cfg.slab.layers >= -1, "[slab] layers: must be >= -1");
        require(cfg.slab.mesh >= 8, "[slab] mesh: must be >= 8");
        require(cfg.slab.padding >= 1, "[slab] padding: must be >= 1");
        require(cfg.slab.scan_points >= 2,
                "[slab] scan_points: must be >= 2");
        require(cfg.slab.scan_min >= 0, "[slab] scan_min: must be >= 0");
        require(cfg.slab.scan_max == 0.0 ||
                    cfg.slab.scan_max > cfg.slab.scan_min,
                "[slab] scan_max: must exceed scan_min");
        require(cfg.ga.population >= 2, "[ga] population: must be >= 2");
        require(cfg.ga.mutation_rate >= 0 && cfg.ga.mutation_rate <= 1,
                "[ga] mutation_rate: must lie in [0, 1]");
        require(cfg.ga.crossover_rate >= 0 && cfg.ga.crossover_rate <= 1,
                "[ga] crossover_rate: must lie in [0, 1]");
        require(cfg.ga.sigma > 0, "[ga] sigma: must be positive");
        require(cfg.ga.budget >= 0, "[ga] budget: must be >= 0");
        require(command_seen, "[run] command: required");
    }
};

} // namespace

RunConfig parse_config(const std::string& text) {
    Parser p;
    p.cfg.raw_text = text;
    std::string section;
    std::size_t pos = 0;
    int lineno = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string line = text.substr(
            pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        const std::size_t comment = line.find_first_of("#;");
        if (comment != std::string::npos)
            line = line.substr(0, comment);
        line = trim(line);
        if (line.empty())
            continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                p.fail("line " + std::to_string(lineno) +
                       ": malformed section header");
                continue;
            }
            section = trim(line.substr(1, line.size() - 2));
            if (!schema().count(section)) {
                int best = 4;
                std::string hint;
                for (const auto& [name, keys] : schema()) {
                    const int d = levenshtein(section, name);
                    if (d < best) {
                        best = d;
                        hint = name;
                    }
                }
                std::string msg = "unknown section [" + section + "]";
                if (!hint.empty())
                    msg += "; did you mean [" + hint + "]?";
                p.fail(msg);
                section.clear();
            }
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            p.fail("line " + std::to_string(lineno) +
                   ": expected 'key = value': '" + line + "'");
            continue;
        }
        if (section.empty()) {
            p.fail("line " + std::to_string(lineno) +
                   ": key outside of any section");
            continue;
        }
        p.set(section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    p.validate_ranges();
    if (!p.errors.empty()) {
        std::string msg = "configuration errors:";
        for (const std::string& e : p.errors)
            msg += "\n  - " + e;
        throw ConfigError(msg);
    }
    return p.cfg;
}

// --------------------------------------------------------------- artifacts

namespace {

struct Artifacts {
    fs::path dir;
    json inventory = json::array();

    void write(const std::string& name, const std::string& content) {
        const fs::path path = dir / name;
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw IoError("cannot open " + path.string() + " for writing");
        out.write(content.data(),
                  static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out)
            throw IoError("short write to " + path.string());
        inventory.push_back({{"name", name},
                             {"bytes", content.size()},
                             {"fnv1a64", fnv1a64_hex(content)}});
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         t0)
        .count();
}

std::pair<double, double> gap_or_throw(const RunConfig& cfg,
                                       const FourierDielectric& eta,
                                       const ReciprocalBasis& basis) {
    const BandStructure bs =
        band_structure(eta, basis, cfg.solver.path_resolution,
                       cfg.solver.polarization,
                       std::max(4, cfg.solver.n_bands));
    if (!bs.gap)
        throw NoInGapModeError(
            "bulk_solver: no band gap for this lattice; adjust [lattice] "
            "parameters or polarization");
    return *bs.gap;
}

SlabSpec slab_from_config(const RunConfig& cfg) {
    SlabSpec spec;
    spec.lattice = cfg.lattice;
    spec.thickness = cfg.slab.thickness;
    spec.layers = cfg.slab.layers;
    spec.mesh = cfg.slab.mesh;
    spec.padding = cfg.slab.padding;
    if (cfg.slab.cavity_major >= 0.0 || cfg.slab.cavity_minor >= 0.0) {
        HoleOverride o;
        o.major = std::max(cfg.slab.cavity_major, 0.0);
        o.minor = std::max(cfg.slab.cavity_minor >= 0.0 ? cfg.slab.cavity_minor
                                                        : cfg.slab.cavity_major,
                           0.0);
        spec.holes.push_back(o);
    }
    return spec;
}

std::pair<double, double> scan_range(const RunConfig& cfg) {
    if (cfg.slab.scan_max > 0.0)
        return {cfg.slab.scan_min, cfg.slab.scan_max};
    const ReciprocalBasis basis =
        build_reciprocal_basis(cfg.lattice, cfg.solver.n_g);
    const FourierDielectric eta = eta_fourier(cfg.lattice, basis);
    return gap_or_throw(cfg, eta, basis);
}

json run_bands(const RunConfig& cfg, Artifacts& art) {
    const ReciprocalBasis basis =
        build_reciprocal_basis(cfg.lattice, cfg.solver.n_g);
    const FourierDielectric eta = eta_fourier(cfg.lattice, basis);
    const BandStructure bs =
        band_structure(eta, basis, cfg.solver.path_resolution,
                       cfg.solver.polarization,
                       std::max(8, cfg.solver.n_bands));
    art.write("bands.csv", band_structure_csv(bs));
    json r;
    if (bs.gap)
        r["gap"] = {bs.gap->first, bs.gap->second};
    else
        r["gap"] = nullptr;
    return r;
}

json run_invert2d(const RunConfig& cfg, Artifacts& art) {
    const ReciprocalBasis basis =
        build_reciprocal_basis(cfg.lattice, cfg.solver.n_g);
    const FourierDielectric eta = eta_fourier(cfg.lattice, basis);
    const std::pair<double, double> gap = gap_or_throw(cfg, eta, basis);

    const BzSampling bz = monkhorst_pack(basis, cfg.solver.division);
    const int n_g = basis.size();
    const int full_bands = cfg.objective.inversion_bands == 0
                               ? n_g
                               : std::min(cfg.objective.inversion_bands, n_g);
    const ModeBasis modes_full = solve_mode_basis(
        eta, basis, bz, cfg.solver.polarization, full_bands);
    const ModeBasis modes_low =
        modes_full.truncated(std::min(cfg.solver.n_bands, full_bands));

    GramOptions gopt;
    gopt.domain_side = cfg.objective.domain_side;
    // The Gamma-region diagonal must repel whichever eigenvector the
    // selection rule picks, so its sign follows the selection direction.
    if (cfg.objective.selector == EigenSelector::MaxCost)
        gopt.gamma_penalty = -gopt.gamma_penalty;
    const ObjectiveGrams grams = build_grams(modes_low, gopt);
    const WeightSearchResult ws = optimize_weights(
        grams, modes_low, {cfg.objective.beta_I, cfg.objective.beta_V},
        cfg.objective.weight_budget, cfg.objective.selector);
    const Eigen::VectorXcd a_low = ws.best.coefficients.a;

    const double omega_m = cfg.objective.omega_m
                               ? *cfg.objective.omega_m
                               : 0.5 * (gap.first + gap.second);
    if (!(omega_m > gap.first && omega_m < gap.second))
        throw ConfigError("[objective] omega_m lies outside the band gap");

    CavityExpansion target;
    target.a = zero_extend(a_low, modes_low.n_bands, modes_full);
    target.omega = omega_m;
    const InversionSystem sys =
        build_inversion_system(target, modes_full, omega_m, gap);
    const DefectFourier defect = solve_defect(sys, cfg.objective.svd_tol);

    const double half_extent = 2.5; // five-layer window around the defect
    const Reconstruction rec =
        reconstruct_and_contour(defect, eta, basis, half_extent, 24);

    CavityExpansion low_exp;
    low_exp.a = a_low;
    low_exp.omega = omega_m;
    const FieldGrid2D field =
        synthesize_field(low_exp, modes_low, half_extent, 16).max_one();
    art.write("mode_field.csv", field.to_csv());
    art.write("eta_reconstructed.csv", rec.eta.to_csv());

    const double volume = mode_volume(a_low, grams, modes_low, 32);
    json r;
    r["gap"] = {gap.first, gap.second};
    r["omega_m"] = omega_m;
    r["J"] = ws.best.cost_value;
    r["V"] = volume;
    r["weights"] = {{"beta_I", ws.weights.beta_I},
                    {"beta_V", ws.weights.beta_V}};
    json holes = json::array();
    for (const HoleFit& h : rec.holes)
        holes.push_back({{"site", h.site},
                         {"x", h.center_x},
                         {"y", h.center_y},
                         {"major", h.major},
                         {"minor", h.minor},
                         {"eta_mean", h.eta_mean},
                         {"index", index_from_eta(h.eta_mean)}});
    r["contour"] = {{"level", rec.level},
                    {"eta_min", rec.eta_min},
                    {"eta_max", rec.eta_max},
                    {"holes", holes}};

    // Material recovered at the cavity site itself (the intensity design
    // point), read from the center of the reconstruction grid.
    {
        const FieldGrid2D& g = rec.eta;
        const double core_eta = g.values((g.nx - 1) / 2, (g.ny - 1) / 2).real();
        r["cavity_fill_eta"] = core_eta;
        r["cavity_fill_index"] = index_from_eta(std::max(core_eta, 1e-6));
    }
    return r;
}

json run_planar_scan(const RunConfig& cfg, Artifacts& art) {
    const SlabSpec spec = slab_from_config(cfg);
    SimulateOptions opt;
    opt.incidence = cfg.slab.incidence;
    const ReflectionSpectrum sp =
        scan_reflection(spec, scan_range(cfg), cfg.slab.scan_points, opt);
    art.write("spectrum.csv", sp.to_csv());
    json r;
    json res = json::array();
    for (const Resonance& x : find_resonances(sp))
        res.push_back({{"omega0", x.omega0},
                       {"Q", x.q},
                       {"fwhm", x.fwhm},
                       {"depth", x.depth}});
    r["resonances"] = res;
    return r;
}

json run_ga_opt(const RunConfig& cfg, Artifacts& art) {
    PlanarFitnessConfig fit;
    fit.base = slab_from_config(cfg);
    fit.base.holes.clear();
    fit.scan_range = scan_range(cfg);
    fit.scan_points = cfg.slab.scan_points;
    fit.weights = {cfg.objective.beta_I, cfg.objective.beta_V};
    fit.sim.incidence = cfg.slab.incidence;
    const FitnessFn fn = [&](const SlabGenome& g) {
        return planar_fitness(g, fit);
    };

    GaConfig gc;
    gc.population = cfg.ga.population;
    gc.mutation_rate = cfg.ga.mutation_rate;
    gc.crossover_rate = cfg.ga.crossover_rate;
    gc.mutation_sigma = cfg.ga.sigma;
    gc.seed = cfg.seed_override ? *cfg.seed_override : cfg.ga.seed;
    gc.budget = cfg.ga.budget;

    GaState state = cfg.ga.resume.empty() ? init_ga(gc, fn)
                                          : load_checkpoint(cfg.ga.resume);
    evolve(state, fn, gc.budget);
    save_checkpoint(state, (art.dir / "ga_checkpoint.bin").string());
    {
        std::ifstream in(art.dir / "ga_checkpoint.bin", std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
        art.inventory.push_back({{"name", "ga_checkpoint.bin"},
                                 {"bytes", bytes.size()},
                                 {"fnv1a64", fnv1a64_hex(bytes)}});
    }
    art.write("ga_log.csv", state.log.to_csv());

    const int b = best_index(state);
    json r;
    r["best_fitness"] = state.fitness[b];
    r["generations"] = state.generation;
    r["best_genome"] = state.population[b].genes;
    return r;
}

} // namespace

void run(const RunConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    Artifacts art;
    art.dir = cfg.output_directory;
    std::error_code ec;
    fs::create_directories(art.dir, ec);
    if (ec)
        throw IoError("cannot create output directory " + art.dir.string() +
                      ": " + ec.message());

    json results;
    std::string command;
    switch (cfg.command) {
    case Command::Bands:
        command = "bands";
        results = run_bands(cfg, art);
        break;
    case Command::Invert2d:
        command = "invert2d";
        results = run_invert2d(cfg, art);
        break;
    case Command::PlanarScan:
        command = "planar-scan";
        results = run_planar_scan(cfg, art);
        break;
    case Command::GaOpt:
        command = "ga-opt";
        results = run_ga_opt(cfg, art);
        break;
    }

    json manifest;
    manifest["command"] = command;
    manifest["version"] = "phcd 0.1.0";
    manifest["config"] = cfg.raw_text;
    manifest["wall_seconds"] = seconds_since(t0);
    manifest["results"] = results;
    manifest["files"] = art.inventory;

    const fs::path tmp = art.dir / "manifest.json.tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out)
            throw IoError("cannot open " + tmp.string() + " for writing");
        out << manifest.dump(2) << "\n";
        out.flush();
        if (!out)
            throw IoError("short write to " + tmp.string());
    }
    fs::rename(tmp, art.dir / "manifest.json", ec);
    if (ec)
        throw IoError("cannot finalize manifest: " + ec.message());
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e))
        return 2;
    if (dynamic_cast<const NoInGapModeError*>(&e))
        return 4;
    if (dynamic_cast<const IoError*>(&e))
        return 5;
    if (dynamic_cast<const std::ios_base::failure*>(&e))
        return 5;
    return 3; // solver and everything unexpected
}

} // namespace phcd
