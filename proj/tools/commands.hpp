#pragma once

// CLI command implementations. Usage / input-validation problems raise
// UsageError (exit code 2); training and numeric failures raise
// std::runtime_error (exit code 1).

#include <stdexcept>
#include <string>

#include "npf/run_config.hpp"

namespace npf::cli {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Trains the potential and amortizer (plus the explicit map unless
// disabled), writes checkpoint.npf, training_log.csv,
// metrics_factorize.csv and the config echo into the output directory.
int cmd_factorize(const RunConfig& cfg);

// Loads a factorization checkpoint, trains the inverse-generator drift
// and writes bridge_checkpoint.npf plus metrics_invert.csv.
int cmd_invert(const RunConfig& cfg, const std::string& checkpoint_path);

// Runs the alternating sampler warm-started from the checkpoint (or
// plain LMC with plain=true, which needs no checkpoint); writes
// trace.csv and particles.csv.
int cmd_sample(const RunConfig& cfg, const std::string& checkpoint_path, bool plain);

// Runs the configured architecture variant on the configured benchmark
// and writes benchmark.csv (metric mean and standard error over
// repeats).
int cmd_benchmark(const RunConfig& cfg);

// mode "generate": writes terrain_grid.csv and field_dataset.csv.
// mode "ingest": validates a grid file and writes grid_echo.csv and
// field_dataset.csv.
int cmd_terrain(const RunConfig& cfg, const std::string& mode, const std::string& grid_path);

// Re-evaluates the factorization (and inverse, if present) metrics of a
// checkpoint on a fresh split; writes metrics.csv.
int cmd_metrics(const RunConfig& cfg, const std::string& checkpoint_path);

}  // namespace npf::cli
