#include "npf/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace npf {

namespace {

using nlohmann::json;

// Tracks which keys a section consumed so leftovers can be reported
// with their full path.
class Section {
  public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw std::runtime_error(path_ + ": expected an object");
    }

    bool has(const std::string& key) {
        known_.insert(key);
        return j_.contains(key);
    }

    template <typename T>
    void read(const std::string& key, T& value) {
        known_.insert(key);
        if (!j_.contains(key)) return;
        try {
            value = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw std::runtime_error(path_ + "." + key + ": " + e.what());
        }
    }

    const json* object(const std::string& key) {
        known_.insert(key);
        if (!j_.contains(key)) return nullptr;
        return &j_.at(key);
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!known_.count(it.key()))
                throw std::runtime_error(path_ + "." + it.key() + ": unknown key");
        }
    }

  private:
    const json& j_;
    std::string path_;
    std::set<std::string> known_;
};

LrSchedule read_schedule(Section& s, const LrSchedule& defaults) {
    LrSchedule sched = defaults;
    std::string kind = sched.kind == LrSchedule::Kind::CosineDecay ? "cosine" : "constant";
    s.read("schedule", kind);
    double lr = sched.base_lr;
    s.read("learning_rate", lr);
    double alpha = sched.floor_fraction;
    s.read("alpha", alpha);
    long steps = sched.decay_steps;
    s.read("schedule_steps", steps);
    if (kind == "cosine") return LrSchedule::cosine(lr, alpha, steps);
    if (kind == "constant") return LrSchedule::constant(lr);
    throw std::runtime_error("schedule must be 'cosine' or 'constant', got '" + kind + "'");
}

std::string schedule_kind_name(const LrSchedule& s) {
    return s.kind == LrSchedule::Kind::CosineDecay ? "cosine" : "constant";
}

void parse_adam(Section& s, AdamConfig& adam) {
    adam.schedule = read_schedule(s, adam.schedule);
    s.read("beta1", adam.beta1);
    s.read("beta2", adam.beta2);
}

}  // namespace

RunConfig default_config(const std::string& profile) {
    RunConfig cfg;
    cfg.profile = profile;
    if (profile == "topography") {
        cfg.icnn.width = 64;
        cfg.icnn.depth = 4;
        cfg.npf.steps = 50000;
        cfg.npf.batch_size = 256;
        cfg.npf.theta_adam = AdamConfig{LrSchedule::cosine(1e-3, 0.1, 50000), 0.5, 0.5, 1e-8};
        cfg.npf.phi_adam = AdamConfig{LrSchedule::cosine(5e-4, 0.01, 50000), 0.9, 0.999, 1e-8};
        cfg.npf.amortizer_hidden = {512, 512};
        cfg.conjugate.max_iterations = 200;
        cfg.conjugate.gtol = 1e-3;
        cfg.bridge.sigma = 0.1;
        cfg.bridge.hidden = {256, 256, 256};
        cfg.bridge.train_steps = 50000;
        cfg.bridge.adam = AdamConfig{LrSchedule::cosine(1e-3, 0.01, 50000), 0.9, 0.999, 1e-8};
        cfg.explicit_map.hidden = {512, 512};
        cfg.explicit_map.steps = 50000;
        cfg.explicit_map.adam = AdamConfig{LrSchedule::cosine(5e-4, 0.01, 50000), 0.9, 0.999, 1e-8};
    } else if (profile == "highdim") {
        cfg.icnn.width = 128;
        cfg.icnn.depth = 4;
        cfg.npf.steps = 10000;
        cfg.npf.batch_size = 256;
        cfg.npf.theta_adam = AdamConfig{LrSchedule::cosine(1e-3, 0.01, 10000), 0.5, 0.5, 1e-8};
        cfg.npf.phi_adam = AdamConfig{LrSchedule::cosine(5e-4, 0.01, 10000), 0.9, 0.999, 1e-8};
        cfg.npf.amortizer_hidden = {512, 512};
        cfg.conjugate.max_iterations = 700;
        cfg.conjugate.gtol = 0.1;
        cfg.bridge.sigma = 1.0;
        cfg.bridge.hidden = {512, 512};
        cfg.bridge.train_steps = 50000;
        cfg.bridge.adam = AdamConfig{LrSchedule::cosine(5e-4, 0.01, 50000), 0.9, 0.999, 1e-8};
        cfg.explicit_map.hidden = {512, 512};
        cfg.explicit_map.steps = 10000;
        cfg.explicit_map.adam = AdamConfig{LrSchedule::cosine(5e-4, 0.01, 10000), 0.9, 0.999, 1e-8};
    } else {
        throw std::runtime_error("profile: expected 'topography' or 'highdim', got '" + profile +
                                 "'");
    }
    // particle defaults from the sampling experiment table
    cfg.sampler.config.tau_f = 1e-4;
    cfg.sampler.config.tau_u = 1e-4;
    cfg.sampler.config.mult_f = 1000.0;
    cfg.sampler.config.mult_u = 1000.0;
    cfg.sampler.config.period = 200;
    cfg.sampler.config.k_max = 60000;
    cfg.sampler.config.particles = 1024;
    cfg.sampler.config.warmup_steps = 30000;
    return cfg;
}

RunConfig parse_config(const std::string& json_text, const std::string& profile_override) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("config: ") + e.what());
    }

    std::string profile = "topography";
    if (j.is_object() && j.contains("profile")) {
        if (!j.at("profile").is_string())
            throw std::runtime_error("config.profile: expected a string");
        profile = j.at("profile").get<std::string>();
    }
    if (!profile_override.empty()) profile = profile_override;
    RunConfig cfg = default_config(profile);

    Section root(j, "config");
    root.read("seed", cfg.seed);
    root.read("out", cfg.out_dir);
    std::string ignored;
    root.read("profile", ignored);

    if (const json* f = root.object("field")) {
        Section s(*f, "config.field");
        s.read("kind", cfg.field.kind);
        s.read("grid_path", cfg.field.grid_path);
        s.read("dim", cfg.field.dim);
        s.read("diagonal", cfg.field.diagonal);
        s.read("objective", cfg.field.objective);
        s.read("dataset_size", cfg.field.dataset_size);
        if (const json* t = s.object("terrain")) {
            Section ts(*t, "config.field.terrain");
            ts.read("resolution", cfg.field.terrain.resolution);
            ts.read("bumps", cfg.field.terrain.bumps);
            ts.read("amplitude_min", cfg.field.terrain.amplitude_min);
            ts.read("amplitude_max", cfg.field.terrain.amplitude_max);
            ts.read("width_min", cfg.field.terrain.width_min);
            ts.read("width_max", cfg.field.terrain.width_max);
            ts.read("smooth_sigma", cfg.field.terrain.smooth_sigma);
            ts.read("dequantize", cfg.field.terrain.dequantize);
            ts.read("seed", cfg.field.terrain.seed);
            ts.finish();
        }
        s.finish();
    }

    if (const json* f = root.object("icnn")) {
        Section s(*f, "config.icnn");
        s.read("width", cfg.icnn.width);
        s.read("depth", cfg.icnn.depth);
        s.read("quad_rank", cfg.icnn.quad_rank);
        s.read("final_quad_rank", cfg.icnn.final_quad_rank);
        s.read("iso_quad", cfg.icnn.iso_quad);
        s.read("iso_quad_init", cfg.icnn.iso_quad_init);
        std::string act = activation_name(cfg.icnn.activation);
        s.read("activation", act);
        cfg.icnn.activation = activation_from_name(act);
        s.read("delta_min", cfg.icnn.delta_min);
        std::string init = cfg.icnn.init == IcnnInit::Identity ? "identity" : "small-random";
        s.read("init", init);
        if (init == "identity")
            cfg.icnn.init = IcnnInit::Identity;
        else if (init == "small-random")
            cfg.icnn.init = IcnnInit::SmallRandom;
        else
            throw std::runtime_error("config.icnn.init: expected 'identity' or 'small-random'");
        s.read("init_scale", cfg.icnn.init_scale);
        s.finish();
    }

    if (const json* f = root.object("conjugate")) {
        Section s(*f, "config.conjugate");
        s.read("max_iterations", cfg.conjugate.max_iterations);
        s.read("gtol", cfg.conjugate.gtol);
        s.read("lr", cfg.conjugate.lr);
        s.read("beta1", cfg.conjugate.beta1);
        s.read("beta2", cfg.conjugate.beta2);
        s.finish();
    }

    if (const json* f = root.object("npf")) {
        Section s(*f, "config.npf");
        s.read("steps", cfg.npf.steps);
        s.read("batch_size", cfg.npf.batch_size);
        s.read("amortizer_batch", cfg.npf.amortizer_batch);
        s.read("train_fraction", cfg.npf.train_fraction);
        s.read("log_every", cfg.npf.log_every);
        s.read("amortizer_hidden", cfg.npf.amortizer_hidden);
        s.read("train_explicit_map", cfg.train_explicit_map);
        if (const json* t = s.object("potential_adam")) {
            Section ts(*t, "config.npf.potential_adam");
            parse_adam(ts, cfg.npf.theta_adam);
            ts.finish();
        }
        if (const json* t = s.object("amortizer_adam")) {
            Section ts(*t, "config.npf.amortizer_adam");
            parse_adam(ts, cfg.npf.phi_adam);
            ts.finish();
        }
        s.finish();
    }

    if (const json* f = root.object("explicit_map")) {
        Section s(*f, "config.explicit_map");
        s.read("steps", cfg.explicit_map.steps);
        s.read("batch_size", cfg.explicit_map.batch_size);
        s.read("hidden", cfg.explicit_map.hidden);
        if (const json* t = s.object("adam")) {
            Section ts(*t, "config.explicit_map.adam");
            parse_adam(ts, cfg.explicit_map.adam);
            ts.finish();
        }
        s.finish();
    }

    if (const json* f = root.object("bridge")) {
        Section s(*f, "config.bridge");
        s.read("sigma", cfg.bridge.sigma);
        s.read("sde_steps", cfg.bridge.sde_steps);
        s.read("t_max", cfg.bridge.t_max);
        s.read("train_steps", cfg.bridge.train_steps);
        s.read("batch_size", cfg.bridge.batch_size);
        s.read("hidden", cfg.bridge.hidden);
        if (const json* t = s.object("adam")) {
            Section ts(*t, "config.bridge.adam");
            parse_adam(ts, cfg.bridge.adam);
            ts.finish();
        }
        s.finish();
    }

    if (const json* f = root.object("metrics")) {
        Section s(*f, "config.metrics");
        s.read("cloud_size", cfg.metrics.cloud_size);
        s.read("baseline_size", cfg.metrics.baseline_size);
        s.read("anchors", cfg.metrics.anchors);
        s.read("cardinality", cfg.metrics.cardinality);
        s.read("cosine_draws", cfg.metrics.cosine_draws);
        s.read("sinkhorn_max_iterations", cfg.metrics.sinkhorn_max_iterations);
        s.read("sinkhorn_tolerance", cfg.metrics.sinkhorn_tolerance);
        s.read("epsilon", cfg.metrics.epsilon);
        s.finish();
    }

    if (const json* f = root.object("sampler")) {
        Section s(*f, "config.sampler");
        s.read("tau_f", cfg.sampler.config.tau_f);
        s.read("tau_u", cfg.sampler.config.tau_u);
        s.read("mult_f", cfg.sampler.config.mult_f);
        s.read("mult_u", cfg.sampler.config.mult_u);
        s.read("period", cfg.sampler.config.period);
        s.read("k_max", cfg.sampler.config.k_max);
        s.read("particles", cfg.sampler.config.particles);
        s.read("warmup_steps", cfg.sampler.config.warmup_steps);
        s.read("warmup_step_size", cfg.sampler.config.warmup_step_size);
        s.read("trace_every", cfg.sampler.config.trace_every);
        s.read("objective", cfg.sampler.objective);
        s.read("stiffness", cfg.sampler.stiffness);
        s.finish();
    }

    if (const json* f = root.object("benchmark")) {
        Section s(*f, "config.benchmark");
        s.read("id", cfg.benchmark.spec.benchmark_id);
        s.read("dim", cfg.benchmark.spec.dim);
        std::string variant = variant_name(cfg.benchmark.spec.variant);
        s.read("variant", variant);
        cfg.benchmark.spec.variant = variant_from_name(variant);
        s.read("repeats", cfg.benchmark.repeats);
        s.read("steps", cfg.benchmark.steps);
        s.read("batch_size", cfg.benchmark.batch_size);
        s.read("eval_size", cfg.benchmark.eval_size);
        s.finish();
    }

    root.finish();
    return cfg;
}

RunConfig load_config_file(const std::string& path, const std::string& profile_override) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), profile_override);
}

namespace {

json adam_to_json(const AdamConfig& a) {
    json j{{"schedule", schedule_kind_name(a.schedule)},
           {"learning_rate", a.schedule.base_lr},
           {"beta1", a.beta1},
           {"beta2", a.beta2}};
    if (a.schedule.kind == LrSchedule::Kind::CosineDecay) {
        j["alpha"] = a.schedule.floor_fraction;
        j["schedule_steps"] = a.schedule.decay_steps;
    }
    return j;
}

}  // namespace

std::string config_to_json(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["out"] = cfg.out_dir;
    j["profile"] = cfg.profile;
    j["field"] = {{"kind", cfg.field.kind},
                  {"grid_path", cfg.field.grid_path},
                  {"dim", cfg.field.dim},
                  {"diagonal", cfg.field.diagonal},
                  {"objective", cfg.field.objective},
                  {"dataset_size", cfg.field.dataset_size},
                  {"terrain",
                   {{"resolution", cfg.field.terrain.resolution},
                    {"bumps", cfg.field.terrain.bumps},
                    {"amplitude_min", cfg.field.terrain.amplitude_min},
                    {"amplitude_max", cfg.field.terrain.amplitude_max},
                    {"width_min", cfg.field.terrain.width_min},
                    {"width_max", cfg.field.terrain.width_max},
                    {"smooth_sigma", cfg.field.terrain.smooth_sigma},
                    {"dequantize", cfg.field.terrain.dequantize},
                    {"seed", cfg.field.terrain.seed}}}};
    j["icnn"] = {{"width", cfg.icnn.width},
                 {"depth", cfg.icnn.depth},
                 {"quad_rank", cfg.icnn.quad_rank},
                 {"final_quad_rank", cfg.icnn.final_quad_rank},
                 {"iso_quad", cfg.icnn.iso_quad},
                 {"iso_quad_init", cfg.icnn.iso_quad_init},
                 {"activation", activation_name(cfg.icnn.activation)},
                 {"delta_min", cfg.icnn.delta_min},
                 {"init", cfg.icnn.init == IcnnInit::Identity ? "identity" : "small-random"},
                 {"init_scale", cfg.icnn.init_scale}};
    j["conjugate"] = {{"max_iterations", cfg.conjugate.max_iterations},
                      {"gtol", cfg.conjugate.gtol},
                      {"lr", cfg.conjugate.lr},
                      {"beta1", cfg.conjugate.beta1},
                      {"beta2", cfg.conjugate.beta2}};
    j["npf"] = {{"steps", cfg.npf.steps},
                {"batch_size", cfg.npf.batch_size},
                {"amortizer_batch", cfg.npf.amortizer_batch},
                {"train_fraction", cfg.npf.train_fraction},
                {"log_every", cfg.npf.log_every},
                {"amortizer_hidden", cfg.npf.amortizer_hidden},
                {"train_explicit_map", cfg.train_explicit_map},
                {"potential_adam", adam_to_json(cfg.npf.theta_adam)},
                {"amortizer_adam", adam_to_json(cfg.npf.phi_adam)}};
    j["explicit_map"] = {{"steps", cfg.explicit_map.steps},
                         {"batch_size", cfg.explicit_map.batch_size},
                         {"hidden", cfg.explicit_map.hidden},
                         {"adam", adam_to_json(cfg.explicit_map.adam)}};
    j["bridge"] = {{"sigma", cfg.bridge.sigma},
                   {"sde_steps", cfg.bridge.sde_steps},
                   {"t_max", cfg.bridge.t_max},
                   {"train_steps", cfg.bridge.train_steps},
                   {"batch_size", cfg.bridge.batch_size},
                   {"hidden", cfg.bridge.hidden},
                   {"adam", adam_to_json(cfg.bridge.adam)}};
    j["metrics"] = {{"cloud_size", cfg.metrics.cloud_size},
                    {"baseline_size", cfg.metrics.baseline_size},
                    {"anchors", cfg.metrics.anchors},
                    {"cardinality", cfg.metrics.cardinality},
                    {"cosine_draws", cfg.metrics.cosine_draws},
                    {"sinkhorn_max_iterations", cfg.metrics.sinkhorn_max_iterations},
                    {"sinkhorn_tolerance", cfg.metrics.sinkhorn_tolerance},
                    {"epsilon", cfg.metrics.epsilon}};
    j["sampler"] = {{"tau_f", cfg.sampler.config.tau_f},
                    {"tau_u", cfg.sampler.config.tau_u},
                    {"mult_f", cfg.sampler.config.mult_f},
                    {"mult_u", cfg.sampler.config.mult_u},
                    {"period", cfg.sampler.config.period},
                    {"k_max", cfg.sampler.config.k_max},
                    {"particles", cfg.sampler.config.particles},
                    {"warmup_steps", cfg.sampler.config.warmup_steps},
                    {"warmup_step_size", cfg.sampler.config.warmup_step_size},
                    {"trace_every", cfg.sampler.config.trace_every},
                    {"objective", cfg.sampler.objective},
                    {"stiffness", cfg.sampler.stiffness}};
    j["benchmark"] = {{"id", cfg.benchmark.spec.benchmark_id},
                      {"dim", cfg.benchmark.spec.dim},
                      {"variant", variant_name(cfg.benchmark.spec.variant)},
                      {"repeats", cfg.benchmark.repeats},
                      {"steps", cfg.benchmark.steps},
                      {"batch_size", cfg.benchmark.batch_size},
                      {"eval_size", cfg.benchmark.eval_size}};
    return j.dump(2) + "\n";
}

}  // namespace npf
