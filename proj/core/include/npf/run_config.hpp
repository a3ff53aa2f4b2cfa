#pragma once

// Run configuration: one human-readable JSON document per run, sections
// mirroring the module configs, profile-selected defaults, unknown keys
// rejected with path-qualified messages, and a deterministic echo of
// the resolved document.

#include <string>

#include "npf/bridge.hpp"
#include "npf/conjugate.hpp"
#include "npf/fields.hpp"
#include "npf/icnn.hpp"
#include "npf/metrics.hpp"
#include "npf/npf_train.hpp"
#include "npf/sampler.hpp"

namespace npf {

struct FieldSection {
    std::string kind = "terrain";  // terrain | grid | identity | diag | square1d | objective-grad
    TerrainSpec terrain;
    std::string grid_path;
    int dim = 2;
    Vec diagonal = {1.0, 2.0};
    std::string objective = "quad-well";
    int dataset_size = 8192;  // pool size for analytic fields
};

struct MetricsSection {
    int cloud_size = 1024;
    int baseline_size = 128;
    int anchors = 16;
    int cardinality = 128;
    int cosine_draws = 4;
    int sinkhorn_max_iterations = 2000;
    double sinkhorn_tolerance = 1e-7;
    double epsilon = 0.0;  // <= 0: use the 5%-of-mean-squared-distance rule
};

struct BenchmarkSection {
    BenchmarkSpec spec;
    int repeats = 3;
    int steps = 2500;
    int batch_size = 128;
    int eval_size = 4096;
};

struct SamplerSection {
    SamplerConfig config;
    std::string objective = "quad-well";
    double stiffness = 8.0;
};

struct RunConfig {
    uint64_t seed = 0;
    std::string out_dir = "npf-out";
    std::string profile = "topography";  // topography | highdim

    FieldSection field;
    IcnnConfig icnn;
    ConjugateConfig conjugate;
    NpfTrainConfig npf;
    bool train_explicit_map = true;
    ExplicitMapConfig explicit_map;
    BridgeConfig bridge;
    MetricsSection metrics;
    SamplerSection sampler;
    BenchmarkSection benchmark;
};

// Defaults for a profile (hyperparameter-table values).
RunConfig default_config(const std::string& profile);

// Parses a config document on top of its profile's defaults; a
// non-empty profile_override replaces the document's profile. Throws
// std::runtime_error with a path-qualified message on unknown keys or
// invalid values.
RunConfig parse_config(const std::string& json_text, const std::string& profile_override = "");
RunConfig load_config_file(const std::string& path, const std::string& profile_override = "");

// Deterministic resolved-config echo (sorted keys).
std::string config_to_json(const RunConfig& cfg);

}  // namespace npf
