#pragma once

// Checkpoint container: versioned little-endian binary layout with a
// plain-text magic, per-component config echo and an FNV-1a content
// checksum. save -> load -> save is byte-identical.

#include <cstdint>
#include <string>
#include <vector>

#include "npf/bridge.hpp"
#include "npf/icnn.hpp"
#include "npf/mlp.hpp"
#include "npf/numcore.hpp"

namespace npf {

struct CheckpointComponent {
    std::string name;
    std::string config_json;
    uint64_t train_steps = 0;
    Vec params;
};

struct Checkpoint {
    static constexpr uint32_t kVersion = 1;
    std::vector<CheckpointComponent> components;

    const CheckpointComponent* find(const std::string& name) const;
    bool has(const std::string& name) const { return find(name) != nullptr; }

    void save(const std::string& path) const;
    // Refuses unknown versions and corrupted checksums.
    static Checkpoint load(const std::string& path);
};

CheckpointComponent component_from_icnn(const std::string& name, const IcnnParams& params,
                                        uint64_t train_steps);
IcnnParams icnn_from_component(const CheckpointComponent& c);

CheckpointComponent component_from_mlp(const std::string& name, const MlpParams& params,
                                       uint64_t train_steps);
MlpParams mlp_from_component(const CheckpointComponent& c);

CheckpointComponent component_from_drift(const std::string& name, const DriftNet& drift,
                                         uint64_t train_steps);
DriftNet drift_from_component(const CheckpointComponent& c);

}  // namespace npf
