#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "npf/checkpoint.hpp"
#include "npf/csv.hpp"
#include "npf/metrics.hpp"
#include "npf/sampler.hpp"

namespace npf::cli {

namespace fs = std::filesystem;

namespace {

Objective objective_by_name(const std::string& name, double stiffness) {
    if (name == "quad-well") return make_quad_well(stiffness);
    if (name == "double-well-1d") return make_double_well_1d();
    throw UsageError("unknown objective: " + name);
}

struct FieldBundle {
    VectorFieldSource source;
    PairedData dataset;
};

FieldBundle build_field(const RunConfig& cfg, Rng& rng) {
    FieldBundle out;
    const FieldSection& f = cfg.field;
    if (f.kind == "terrain") {
        TerrainSpec spec = f.terrain;
        Rng terrain_rng(spec.seed ? spec.seed : cfg.seed);
        Grid grid = terrain_generate(spec, terrain_rng);
        out.source = field_from_grid(grid_gradient(grid));
        out.dataset = grid_field_dataset(*out.source.grid);
    } else if (f.kind == "grid") {
        if (f.grid_path.empty()) throw UsageError("config.field.grid_path: required for kind 'grid'");
        Grid grid;
        try {
            grid = grid_ingest(f.grid_path);
        } catch (const std::exception& e) {
            throw UsageError(e.what());
        }
        out.source = field_from_grid(grid_gradient(grid));
        out.dataset = grid_field_dataset(*out.source.grid);
    } else if (f.kind == "identity") {
        out.source = make_identity_field(f.dim);
        out.dataset = out.source.make_dataset(f.dataset_size, rng);
    } else if (f.kind == "diag") {
        out.source = make_diag_field(f.diagonal);
        out.dataset = out.source.make_dataset(f.dataset_size, rng);
    } else if (f.kind == "square1d") {
        out.source = make_square_1d_field();
        out.dataset = out.source.make_dataset(f.dataset_size, rng);
    } else if (f.kind == "objective-grad") {
        Objective g = objective_by_name(f.objective, cfg.sampler.stiffness);
        out.source = make_gradient_field(g.dim, g.grad, g.support);
        out.dataset = out.source.make_dataset(f.dataset_size, rng);
    } else {
        throw UsageError("config.field.kind: unknown kind '" + f.kind + "'");
    }
    return out;
}

fs::path ensure_outdir(const RunConfig& cfg) {
    fs::path dir(cfg.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw UsageError("cannot create output directory: " + cfg.out_dir);
    return dir;
}

void write_config_echo(const RunConfig& cfg, const fs::path& dir) {
    std::ofstream out(dir / "config.json");
    if (!out) throw std::runtime_error("cannot write config echo");
    out << config_to_json(cfg);
}

void write_training_log(const TrainLog& log, const fs::path& path) {
    CsvWriter csv(path.string(), "step,loss_monge,loss_dual,mean_cs_iterations,cs_failures");
    for (const TrainRow& r : log.rows)
        csv.row({std::to_string(r.step), fmt_double(r.loss_monge), fmt_double(r.loss_dual),
                 fmt_double(r.mean_cs_iterations), std::to_string(r.cs_failures)});
}

Mat gather(const Mat& src, int begin, int count) {
    Mat out(count, src.cols);
    for (int i = 0; i < count; ++i) out.set_row(i, src.row(begin + i));
    return out;
}

SinkhornConfig sinkhorn_with(const MetricsSection& m, double epsilon) {
    SinkhornConfig sk;
    sk.epsilon = epsilon;
    sk.max_iterations = m.sinkhorn_max_iterations;
    sk.tolerance = m.sinkhorn_tolerance;
    return sk;
}

// The three factorization criteria: pushforward match, measure
// preservation and pointwise reconstruction, each next to a same-size
// two-batch baseline.
void eval_factorization(CsvWriter& csv, const RunConfig& cfg, const NpfModel& model,
                        const MlpParams* explicit_map, const PairedData& test, Rng& rng) {
    const MetricsSection& mc = cfg.metrics;
    const int m = std::min(mc.cloud_size, test.size() / 2);
    if (m < 2) throw std::runtime_error("metrics: test split too small");

    const double eps_target =
        mc.epsilon > 0.0 ? mc.epsilon : epsilon_rule(test.fxs, rng).value;
    const double eps_source = mc.epsilon > 0.0 ? mc.epsilon : epsilon_rule(test.xs, rng).value;

    IcnnScratch scratch;
    Vec g(test.xs.cols, 0.0);

    // criterion 1: grad-potential pushforward vs the field pushforward
    Mat pushed(m, test.xs.cols);
    for (int i = 0; i < m; ++i) {
        icnn_grad_input(model.potential, test.xs.row(i), g, scratch);
        pushed.set_row(i, g);
    }
    Mat target_a = gather(test.fxs, 0, m);
    Mat target_b = gather(test.fxs, m, m);
    SinkhornConfig sk_t = sinkhorn_with(mc, eps_target);
    const double crit1 = sinkhorn_divergence(pushed, target_a, sk_t).value;
    const double base1 = sinkhorn_divergence(target_a, target_b, sk_t).value;
    csv.row({"pushforward_sinkhorn", fmt_double(crit1), fmt_double(base1), fmt_double(eps_target),
             std::to_string(m)});

    // criterion 2: measure preservation of the (explicit, else implicit) map
    MlpScratch ms;
    Vec mapped(test.xs.cols, 0.0);
    Mat mpoints(m, test.xs.cols);
    int cs_failures = 0;
    for (int i = 0; i < m; ++i) {
        if (explicit_map) {
            mlp_forward(*explicit_map, test.xs.row(i), mapped, ms);
        } else {
            ConjugateResult sol = implicit_map(model, test.fxs.row(i), cfg.conjugate);
            if (!sol.converged) ++cs_failures;
            std::copy(sol.x.begin(), sol.x.end(), mapped.begin());
        }
        mpoints.set_row(i, mapped);
    }
    Mat source_a = gather(test.xs, 0, m);
    Mat source_b = gather(test.xs, m, m);
    SinkhornConfig sk_s = sinkhorn_with(mc, eps_source);
    const double crit2 = sinkhorn_divergence(mpoints, source_a, sk_s).value;
    const double base2 = sinkhorn_divergence(source_a, source_b, sk_s).value;
    csv.row({"preservation_sinkhorn", fmt_double(crit2), fmt_double(base2), fmt_double(eps_source),
             std::to_string(m)});

    // criterion 3: reconstruction |F(x) - grad u(M(x))| on held-out points
    double recon = 0.0, field_norm = 0.0;
    for (int i = 0; i < m; ++i) {
        icnn_grad_input(model.potential, mpoints.row(i), g, scratch);
        Vec diff(g.size(), 0.0);
        for (size_t k = 0; k < g.size(); ++k) diff[k] = test.fxs(i, k) - g[k];
        recon += (norm2(diff) - recon) / static_cast<double>(i + 1);
        field_norm += (norm2(test.fxs.row(i)) - field_norm) / static_cast<double>(i + 1);
    }
    csv.row({"reconstruction_l2", fmt_double(recon), fmt_double(field_norm), "0",
             std::to_string(m)});
    if (cs_failures > 0)
        std::cerr << "warning: " << cs_failures << " conjugate solves did not converge\n";
}

void eval_inverse(CsvWriter& csv, const RunConfig& cfg, const NpfModel& model,
                  const DriftNet& drift, const VectorFieldSource& source, const PairedData& test,
                  Rng& rng) {
    const MetricsSection& mc = cfg.metrics;
    const int pool = std::min(test.size(), std::max(4 * mc.cardinality, 512));
    if (pool < mc.cardinality)
        throw std::runtime_error("metrics: test split smaller than the anchor cardinality");

    Mat points = gather(test.xs, 0, pool);
    Mat images(pool, test.xs.cols);
    for (int i = 0; i < pool; ++i) {
        ConjugateResult sol = implicit_map(model, test.fxs.row(i), cfg.conjugate);
        images.set_row(i, sol.x);
    }

    GeneratorFn generator = [&](std::span<const double> y, Rng& r) {
        return sde_sample(drift, y, cfg.bridge, r);
    };

    PosteriorMetricConfig pc;
    pc.anchors = mc.anchors;
    pc.cardinality = mc.cardinality;
    pc.baseline_size = mc.baseline_size;
    pc.sinkhorn = sinkhorn_with(mc, mc.epsilon);
    PosteriorMetricResult pr = posterior_metric(generator, points, images, pc, rng);
    csv.row({"posterior_sinkhorn", fmt_double(pr.value), fmt_double(pr.baseline),
             fmt_double(pr.epsilon), std::to_string(pc.cardinality)});

    const int cm = std::min(test.size(), 256);
    Mat cosine_points = gather(test.xs, 0, cm);
    ConjugateFn conj = [&](std::span<const double> v) {
        return implicit_map(model, v, cfg.conjugate).x;
    };
    CosineMetricResult cr =
        cosine_inversion_metric(source.eval, conj, generator, cosine_points, rng,
                                mc.cosine_draws);
    csv.row({"cosine_inversion", fmt_double(cr.value), "1", "0", std::to_string(cm)});
    if (cr.zero_vector_warnings > 0)
        std::cerr << "warning: " << cr.zero_vector_warnings << " zero-norm cosine terms\n";
}

struct LoadedModel {
    NpfModel model;
    MlpParams explicit_map;
    bool has_explicit_map = false;
    DriftNet drift;
    bool has_drift = false;
};

LoadedModel load_model(const std::string& path, int expected_dim) {
    Checkpoint ck;
    try {
        ck = Checkpoint::load(path);
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    const CheckpointComponent* pot = ck.find("potential");
    const CheckpointComponent* amo = ck.find("amortizer");
    if (!pot || !amo) throw UsageError("checkpoint lacks potential/amortizer components: " + path);
    LoadedModel out;
    out.model.potential = icnn_from_component(*pot);
    out.model.amortizer = mlp_from_component(*amo);
    if (out.model.potential.cfg.input_dim != expected_dim)
        throw UsageError("incompatible checkpoint dimension: potential has input_dim " +
                         std::to_string(out.model.potential.cfg.input_dim) + ", run needs " +
                         std::to_string(expected_dim));
    if (const CheckpointComponent* m = ck.find("explicit_map")) {
        out.explicit_map = mlp_from_component(*m);
        out.has_explicit_map = true;
    }
    if (const CheckpointComponent* d = ck.find("drift")) {
        out.drift = drift_from_component(*d);
        out.has_drift = true;
    }
    return out;
}

void write_trace(const std::vector<TraceRow>& trace, int basin_count, const fs::path& path) {
    std::string header = "step,mean_grad_norm,mean_value";
    for (int b = 0; b < basin_count; ++b) header += ",basin_" + std::to_string(b);
    CsvWriter csv(path.string(), header);
    for (const TraceRow& r : trace) {
        std::vector<std::string> cells{std::to_string(r.step), fmt_double(r.mean_grad_norm),
                                       fmt_double(r.mean_value)};
        for (long c : r.basin_histogram) cells.push_back(std::to_string(c));
        csv.row(cells);
    }
}

void write_particles(const Mat& positions, const fs::path& path) {
    std::string header;
    for (int k = 0; k < positions.cols; ++k) header += (k ? ",x" : "x") + std::to_string(k);
    CsvWriter csv(path.string(), header);
    for (int i = 0; i < positions.rows; ++i) {
        std::vector<std::string> cells;
        for (int k = 0; k < positions.cols; ++k) cells.push_back(fmt_double(positions(i, k)));
        csv.row(cells);
    }
}

}  // namespace

int cmd_factorize(const RunConfig& cfg) {
    fs::path dir = ensure_outdir(cfg);
    write_config_echo(cfg, dir);
    Rng rng(cfg.seed);
    Rng data_rng = rng.fork(1);
    Rng train_rng = rng.fork(2);
    Rng metric_rng = rng.fork(3);

    FieldBundle field = build_field(cfg, data_rng);
    SplitData split = split_data(field.dataset, cfg.npf.train_fraction, data_rng);

    IcnnConfig icnn = cfg.icnn;
    icnn.input_dim = field.source.dim;
    TrainPotentialResult trained = train_potential(split.train, icnn, cfg.npf, train_rng);
    write_training_log(trained.log, dir / "training_log.csv");
    if (trained.log.diverged)
        throw std::runtime_error("training diverged at step " +
                                 std::to_string(trained.log.diverged_at));

    Checkpoint ck;
    ck.components.push_back(
        component_from_icnn("potential", trained.model.potential, cfg.npf.steps));
    ck.components.push_back(
        component_from_mlp("amortizer", trained.model.amortizer, cfg.npf.steps));

    MlpParams explicit_map;
    bool has_map = false;
    if (cfg.train_explicit_map) {
        ExplicitMapResult em =
            train_explicit_map(trained.model, split.train, cfg.explicit_map, cfg.conjugate,
                               train_rng);
        explicit_map = std::move(em.map);
        has_map = true;
        ck.components.push_back(
            component_from_mlp("explicit_map", explicit_map, cfg.explicit_map.steps));
    }
    ck.save((dir / "checkpoint.npf").string());

    CsvWriter csv((dir / "metrics_factorize.csv").string(), "metric,value,baseline,epsilon,n");
    eval_factorization(csv, cfg, trained.model, has_map ? &explicit_map : nullptr, split.test,
                       metric_rng);
    std::cout << "factorize: wrote " << (dir / "checkpoint.npf").string() << "\n";
    return 0;
}

int cmd_invert(const RunConfig& cfg, const std::string& checkpoint_path) {
    fs::path dir = ensure_outdir(cfg);
    write_config_echo(cfg, dir);
    Rng rng(cfg.seed);
    Rng data_rng = rng.fork(1);
    Rng train_rng = rng.fork(4);
    Rng metric_rng = rng.fork(5);

    FieldBundle field = build_field(cfg, data_rng);
    SplitData split = split_data(field.dataset, cfg.npf.train_fraction, data_rng);
    LoadedModel loaded = load_model(checkpoint_path, field.source.dim);

    DriftTrainResult dt =
        train_drift(loaded.model, split.train, cfg.bridge, cfg.conjugate, train_rng);

    Checkpoint ck = Checkpoint::load(checkpoint_path);
    ck.components.push_back(
        component_from_drift("drift", dt.drift, cfg.bridge.train_steps));
    ck.save((dir / "bridge_checkpoint.npf").string());

    CsvWriter csv((dir / "metrics_invert.csv").string(), "metric,value,baseline,epsilon,n");
    eval_inverse(csv, cfg, loaded.model, dt.drift, field.source, split.test, metric_rng);
    std::cout << "invert: wrote " << (dir / "bridge_checkpoint.npf").string() << "\n";
    return 0;
}

int cmd_sample(const RunConfig& cfg, const std::string& checkpoint_path, bool plain) {
    fs::path dir = ensure_outdir(cfg);
    write_config_echo(cfg, dir);
    Objective g = objective_by_name(cfg.sampler.objective, cfg.sampler.stiffness);
    Rng rng(cfg.seed);

    LmcNpfResult result;
    if (plain) {
        result = run_lmc(g, cfg.sampler.config, rng);
    } else {
        if (checkpoint_path.empty())
            throw UsageError("sample: --checkpoint is required without --plain");
        LoadedModel loaded = load_model(checkpoint_path, g.dim);
        if (!loaded.has_drift)
            throw UsageError("sample: checkpoint has no drift component; run invert first");
        OnlineNpfConfig online;
        online.icnn = cfg.icnn;
        online.icnn.input_dim = g.dim;
        online.amortizer_hidden = cfg.npf.amortizer_hidden;
        online.drift_hidden = cfg.bridge.hidden;
        online.theta_adam = cfg.npf.theta_adam;
        online.phi_adam = cfg.npf.phi_adam;
        online.psi_adam = cfg.bridge.adam;
        online.cs = cfg.conjugate;
        online.bridge = cfg.bridge;
        result = lmc_npf(g, cfg.sampler.config, online, rng, {}, &loaded.model, &loaded.drift);
    }
    write_trace(result.trace, g.basin_count, dir / "trace.csv");
    write_particles(result.particles.positions, dir / "particles.csv");
    std::cout << "sample: wrote " << (dir / "trace.csv").string() << "\n";
    return 0;
}

int cmd_benchmark(const RunConfig& cfg) {
    fs::path dir = ensure_outdir(cfg);
    write_config_echo(cfg, dir);
    const BenchmarkSection& bench = cfg.benchmark;
    const int d = bench.spec.dim;
    IcnnConfig icnn = architecture_variant(bench.spec);

    NpfTrainConfig train_cfg = cfg.npf;
    train_cfg.steps = bench.steps;
    train_cfg.batch_size = bench.batch_size;
    train_cfg.theta_adam.schedule.decay_steps = bench.steps;
    train_cfg.phi_adam.schedule.decay_steps = bench.steps;

    Vec values;
    for (int rep = 0; rep < bench.repeats; ++rep) {
        Rng rng = Rng(cfg.seed).fork(100 + rep);
        const int pool = 16384;
        PairedData data;
        data.xs = Mat(pool, d);
        data.fxs = Mat(pool, d);

        if (bench.spec.benchmark_id == "gauss-diag") {
            GaussBenchmark gb = gauss_benchmark(d);
            gb.sample_source(data.xs, rng);
            gb.sample_target(data.fxs, rng);
            TrainPotentialResult trained = train_potential(data, icnn, train_cfg, rng);
            Mat eval(bench.eval_size, d);
            gb.sample_source(eval, rng);
            IcnnScratch scratch;
            auto t_hat = [&](std::span<const double> x) {
                Vec out(d, 0.0);
                icnn_grad_input(trained.model.potential, x, out, scratch);
                return out;
            };
            values.push_back(l2_uvp(t_hat, gb.reference_map, eval, gb.target_variance));
        } else if (bench.spec.benchmark_id == "mixture7") {
            MixtureBenchmark mb = mixture7_benchmark(d);
            mb.sample_source(data.xs, rng);
            mb.sample_target(data.fxs, rng);
            TrainPotentialResult trained = train_potential(data, icnn, train_cfg, rng);
            const int m = std::min(bench.eval_size, 2048);
            Mat source_eval(m, d), target_a(m, d), target_b(m, d);
            mb.sample_source(source_eval, rng);
            mb.sample_target(target_a, rng);
            mb.sample_target(target_b, rng);
            Mat pushed(m, d);
            IcnnScratch scratch;
            Vec g(d, 0.0);
            for (int i = 0; i < m; ++i) {
                icnn_grad_input(trained.model.potential, source_eval.row(i), g, scratch);
                pushed.set_row(i, g);
            }
            SinkhornConfig sk = sinkhorn_with(cfg.metrics, epsilon_rule(target_a, rng).value);
            values.push_back(sinkhorn_divergence(pushed, target_a, sk).value);
        } else {
            throw UsageError("unknown benchmark id: " + bench.spec.benchmark_id);
        }
    }

    double mean = 0.0;
    for (size_t i = 0; i < values.size(); ++i) mean += (values[i] - mean) / (i + 1.0);
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double stderr_ = values.size() > 1
                               ? std::sqrt(var / (values.size() - 1.0) / values.size())
                               : 0.0;

    CsvWriter csv((dir / "benchmark.csv").string(),
                  "variant,dim,benchmark,metric,value,stderr,repeats");
    csv.row({variant_name(bench.spec.variant), std::to_string(d), bench.spec.benchmark_id,
             bench.spec.benchmark_id == "gauss-diag" ? "l2_uvp" : "sinkhorn_divergence",
             fmt_double(mean), fmt_double(stderr_), std::to_string(bench.repeats)});
    std::cout << "benchmark: " << variant_name(bench.spec.variant) << " d=" << d << " -> "
              << fmt_double(mean) << " +- " << fmt_double(stderr_) << "\n";
    return 0;
}

int cmd_terrain(const RunConfig& cfg, const std::string& mode, const std::string& grid_path) {
    fs::path dir = ensure_outdir(cfg);
    write_config_echo(cfg, dir);
    Grid grid;
    if (mode == "generate") {
        TerrainSpec spec = cfg.field.terrain;
        Rng rng(spec.seed ? spec.seed : cfg.seed);
        grid = terrain_generate(spec, rng);
        grid_emit(grid, (dir / "terrain_grid.csv").string());
    } else if (mode == "ingest") {
        if (grid_path.empty()) throw UsageError("terrain ingest: --grid is required");
        try {
            grid = grid_ingest(grid_path);
        } catch (const std::exception& e) {
            throw UsageError(e.what());
        }
        grid_emit(grid, (dir / "grid_echo.csv").string());
    } else {
        throw UsageError("terrain: mode must be 'generate' or 'ingest'");
    }

    GridField field = grid_gradient(grid);
    PairedData data = grid_field_dataset(field);
    CsvWriter csv((dir / "field_dataset.csv").string(), "x,y,fx,fy");
    for (int i = 0; i < data.size(); ++i)
        csv.row({fmt_double(data.xs(i, 0)), fmt_double(data.xs(i, 1)), fmt_double(data.fxs(i, 0)),
                 fmt_double(data.fxs(i, 1))});
    std::cout << "terrain: " << grid.nx() << "x" << grid.ny() << " grid, wrote "
              << (dir / "field_dataset.csv").string() << "\n";
    return 0;
}

int cmd_metrics(const RunConfig& cfg, const std::string& checkpoint_path) {
    fs::path dir = ensure_outdir(cfg);
    write_config_echo(cfg, dir);
    Rng rng(cfg.seed);
    Rng data_rng = rng.fork(1);
    Rng metric_rng = rng.fork(6);

    FieldBundle field = build_field(cfg, data_rng);
    SplitData split = split_data(field.dataset, cfg.npf.train_fraction, data_rng);
    LoadedModel loaded = load_model(checkpoint_path, field.source.dim);

    CsvWriter csv((dir / "metrics.csv").string(), "metric,value,baseline,epsilon,n");
    eval_factorization(csv, cfg, loaded.model,
                       loaded.has_explicit_map ? &loaded.explicit_map : nullptr, split.test,
                       metric_rng);
    if (loaded.has_drift)
        eval_inverse(csv, cfg, loaded.model, loaded.drift, field.source, split.test, metric_rng);
    std::cout << "metrics: wrote " << (dir / "metrics.csv").string() << "\n";
    return 0;
}

}  // namespace npf::cli
