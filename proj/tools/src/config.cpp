#include "smart_cli/config.hpp"

#include <smart/errors.hpp>
#include <smart/io.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace smart::cli {

namespace {

using nlohmann::json;

// Walks one JSON object, remembering which keys were read so that leftovers
// can be reported as unknown.
class Section {
public:
    Section(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
        if (!obj_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    [[nodiscard]] bool has(const std::string& key) {
        seen_.insert(key);
        return obj_.contains(key);
    }

    template <typename T>
    void get(const std::string& key, T& out) {
        if (!has(key)) return;
        try {
            out = obj_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(path(key) + ": wrong type (" + std::string(obj_.at(key).type_name()) + ")");
        }
    }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return obj_.at(key);
    }

    [[nodiscard]] std::string path(const std::string& key) const { return where_ + "." + key; }

    void finish() const {
        for (const auto& [key, value] : obj_.items()) {
            if (!seen_.contains(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
        }
    }

private:
    const json& obj_;
    std::string where_;
    std::set<std::string> seen_;
};

std::array<double, 3> triple(Section& s, const std::string& key, std::array<double, 3> fallback) {
    std::vector<double> v;
    s.get(key, v);
    if (v.empty()) return fallback;
    if (v.size() != 3) throw ConfigError(s.path(key) + ": expected three values");
    return {v[0], v[1], v[2]};
}

Grid parse_grid(Section& s, const std::string& key) {
    std::vector<int> dims;
    s.get(key, dims);
    if (dims.size() != 2 && dims.size() != 3) throw ConfigError(s.path(key) + ": expected [nx, ny] or [nx, ny, nz]");
    Grid g{dims[0], dims[1], dims.size() == 3 ? dims[2] : 1};
    if (g.nx < 1 || g.ny < 1 || g.nz < 1) throw ConfigError(s.path(key) + ": dimensions must be positive");
    return g;
}

void apply_recon(const json& obj, ReconConfig& cfg, const std::string& where) {
    Section s(obj, where);
    s.get("admm_iters", cfg.admm_iters);
    s.get("cg_iters", cfg.cg_iters);
    s.get("cg_tol", cfg.cg_tol);
    cfg.lambda1 = triple(s, "lambda1", cfg.lambda1);
    cfg.lambda2 = triple(s, "lambda2", cfg.lambda2);
    s.get("mu1", cfg.mu1);
    s.get("mu2", cfg.mu2);
    s.get("n_groups", cfg.n_groups);
    s.get("hankel_k", cfg.hankel_k);
    s.get("refit_period", cfg.refit_period);
    s.get("support_fraction", cfg.support_fraction);
    std::string text;
    if (s.has("mode")) {
        s.get("mode", text);
        if (text != "zero-filled") cfg.mode = parse_mode(text);
    }
    if (s.has("consensus")) {
        s.get("consensus", text);
        cfg.consensus = parse_consensus(text);
    }
    if (s.has("threshold_rule")) {
        s.get("threshold_rule", text);
        cfg.threshold_rule = parse_threshold_rule(text);
    }
    if (s.has("patch")) {
        Section p(s.raw("patch"), s.path("patch"));
        p.get("b", cfg.patch.b);
        p.get("stride", cfg.patch.stride);
        p.get("search_radius", cfg.patch.search_radius);
        p.get("lambda_m", cfg.patch.lambda_m);
        p.get("np_max", cfg.patch.np_max);
        p.finish();
    }
    s.finish();
}

} // namespace

DecayModel parse_model(const std::string& name) {
    if (name == "mono") return DecayModel::mono;
    if (name == "bi") return DecayModel::bi;
    throw ConfigError("unknown decay model '" + name + "' (expected mono or bi)");
}

std::string to_string(DecayModel model) { return model == DecayModel::bi ? "bi" : "mono"; }

PhantomSpec scaled_standard(const Grid& grid, const std::vector<double>& tsl_ms, DecayModel model) {
    PhantomSpec spec = PhantomSpec::standard(model);
    const PhantomSpec ref = spec;
    const double scale = std::min(grid.nx, grid.ny) / 192.0;
    spec.grid = grid;
    spec.tsl_ms = tsl_ms;
    for (auto& tube : spec.tubes) {
        tube.cx = (grid.nx - 1) / 2.0 + (tube.cx - (ref.grid.nx - 1) / 2.0) * scale;
        tube.cy = (grid.ny - 1) / 2.0 + (tube.cy - (ref.grid.ny - 1) / 2.0) * scale;
        tube.radius *= scale;
    }
    return spec;
}

ReconConfig RunConfig::recon_for(const Grid& grid) const {
    ReconConfig cfg = ReconConfig::defaults_for(grid);
    apply_recon(recon_overrides, cfg, "recon");
    return cfg;
}

std::uint64_t RunConfig::require_seed() const {
    if (!seed) throw ConfigError("a seed is required: set \"seed\" in the config or pass --seed");
    return *seed;
}

RunConfig parse_config(const json& doc) {
    RunConfig cfg;
    Section root(doc, "config");
    if (root.has("seed")) {
        const json& v = root.raw("seed");
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
            throw ConfigError("config.seed: expected a non-negative integer");
        }
        cfg.seed = v.get<std::uint64_t>();
    }
    root.get("threads", cfg.threads);
    if (cfg.threads < 0) throw ConfigError("config.threads: must be >= 0");
    root.get("out", cfg.out);
    root.get("amplify_error", cfg.amplify_error);
    if (!(cfg.amplify_error > 0.0)) throw ConfigError("config.amplify_error: must be positive");

    if (root.has("phantom")) {
        Section s(root.raw("phantom"), "phantom");
        Grid grid = cfg.phantom.grid;
        if (s.has("grid")) grid = parse_grid(s, "grid");
        std::vector<double> tsl = cfg.phantom.tsl_ms;
        s.get("tsl_ms", tsl);
        DecayModel model = DecayModel::mono;
        if (s.has("model")) {
            std::string m;
            s.get("model", m);
            model = parse_model(m);
        }
        cfg.phantom = scaled_standard(grid, tsl, model);
        if (s.has("tubes")) {
            const json& tubes = s.raw("tubes");
            if (!tubes.is_array()) throw ConfigError("phantom.tubes: expected an array");
            cfg.phantom.tubes.clear();
            cfg.tubes_given = true;
            for (std::size_t i = 0; i < tubes.size(); ++i) {
                Section t(tubes[i], "phantom.tubes[" + std::to_string(i) + "]");
                Tube tube;
                t.get("cx", tube.cx);
                t.get("cy", tube.cy);
                t.get("radius", tube.radius);
                t.get("m0", tube.params.m0);
                t.get("t1rho", tube.params.t1rho_long);
                t.get("t1rho_short", tube.params.t1rho_short);
                tube.params.alpha = model == DecayModel::bi ? 0.91 : 1.0;
                t.get("alpha", tube.params.alpha);
                t.finish();
                cfg.phantom.tubes.push_back(tube);
            }
        }
        s.finish();
    }

    if (root.has("mask")) {
        Section s(root.raw("mask"), "mask");
        s.get("pattern", cfg.mask.pattern);
        s.get("R", cfg.mask.r);
        s.get("center", cfg.mask.center);
        s.finish();
        if (cfg.mask.pattern != "1d" && cfg.mask.pattern != "poisson") {
            throw ConfigError("mask.pattern: expected 1d or poisson, got '" + cfg.mask.pattern + "'");
        }
    }

    if (root.has("acquisition")) {
        Section s(root.raw("acquisition"), "acquisition");
        s.get("snr", cfg.acquisition_snr);
        s.finish();
        if (!(cfg.acquisition_snr >= 0.0)) throw ConfigError("acquisition.snr: must be >= 0");
    }

    if (root.has("recon")) {
        cfg.recon_overrides = root.raw("recon");
        ReconConfig probe;
        apply_recon(cfg.recon_overrides, probe, "recon");
        cfg.zero_filled = cfg.recon_overrides.value("mode", std::string{}) == "zero-filled";
    }

    if (root.has("rank_experiment")) {
        Section s(root.raw("rank_experiment"), "rank_experiment");
        s.get("snr", cfg.rank.snr);
        s.get("runs", cfg.rank.runs);
        s.get("ratio", cfg.rank.ratio);
        s.get("undersampling", cfg.rank.undersampling);
        if (s.has("model")) {
            std::string m;
            s.get("model", m);
            cfg.rank_model = parse_model(m);
        }
        s.finish();
    }

    if (root.has("fit")) {
        Section s(root.raw("fit"), "fit");
        s.get("support_fraction", cfg.fit_support_fraction);
        s.finish();
        if (!(cfg.fit_support_fraction >= 0.0 && cfg.fit_support_fraction < 1.0)) {
            throw ConfigError("fit.support_fraction: must lie in [0, 1)");
        }
    }

    if (root.has("paths")) {
        Section s(root.raw("paths"), "paths");
        s.get("images", cfg.paths.images);
        s.get("reference", cfg.paths.reference);
        s.get("mask", cfg.paths.mask);
        s.get("kspace", cfg.paths.kspace);
        s.finish();
    }
    root.finish();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    const std::string text = read_text(path);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    try {
        return parse_config(doc);
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

json to_json(const RunConfig& cfg) {
    json j;
    if (cfg.seed) j["seed"] = *cfg.seed;
    j["threads"] = cfg.threads;
    j["out"] = cfg.out;
    j["amplify_error"] = cfg.amplify_error;
    json tubes = json::array();
    for (const auto& t : cfg.phantom.tubes) {
        tubes.push_back({{"cx", t.cx},
                         {"cy", t.cy},
                         {"radius", t.radius},
                         {"m0", t.params.m0},
                         {"t1rho", t.params.t1rho_long},
                         {"t1rho_short", t.params.t1rho_short},
                         {"alpha", t.params.alpha}});
    }
    j["phantom"] = {{"grid", {cfg.phantom.grid.nx, cfg.phantom.grid.ny, cfg.phantom.grid.nz}},
                    {"tsl_ms", cfg.phantom.tsl_ms},
                    {"model", to_string(cfg.phantom.model)},
                    {"tubes", tubes}};
    j["mask"] = {{"pattern", cfg.mask.pattern}, {"R", cfg.mask.r}, {"center", cfg.mask.center}};
    j["acquisition"] = {{"snr", cfg.acquisition_snr}};

    const ReconConfig r = cfg.recon_for(cfg.phantom.grid);
    j["recon"] = {{"admm_iters", r.admm_iters},
                  {"cg_iters", r.cg_iters},
                  {"cg_tol", r.cg_tol},
                  {"lambda1", r.lambda1},
                  {"lambda2", r.lambda2},
                  {"mu1", r.mu1},
                  {"mu2", r.mu2},
                  {"n_groups", r.n_groups},
                  {"hankel_k", r.hankel_k},
                  {"refit_period", r.refit_period},
                  {"support_fraction", r.support_fraction},
                  {"mode", cfg.zero_filled ? std::string("zero-filled") : to_string(r.mode)},
                  {"consensus", to_string(r.consensus)},
                  {"threshold_rule", to_string(r.threshold_rule)},
                  {"patch",
                   {{"b", r.patch.b},
                    {"stride", r.patch.stride},
                    {"search_radius", r.patch.search_radius},
                    {"lambda_m", r.patch.lambda_m},
                    {"np_max", r.patch.np_max}}}};
    j["rank_experiment"] = {{"snr", cfg.rank.snr},
                            {"runs", cfg.rank.runs},
                            {"ratio", cfg.rank.ratio},
                            {"undersampling", cfg.rank.undersampling},
                            {"model", to_string(cfg.rank_model)}};
    j["fit"] = {{"support_fraction", cfg.fit_support_fraction}};
    j["paths"] = {{"images", cfg.paths.images},
                  {"reference", cfg.paths.reference},
                  {"mask", cfg.paths.mask},
                  {"kspace", cfg.paths.kspace}};
    return j;
}

} // namespace smart::cli
