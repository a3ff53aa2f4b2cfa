#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "npf/checkpoint.hpp"
#include "npf/run_config.hpp"
#include "oracles.hpp"

using namespace npf;

TEST_SUITE_BEGIN("persistence");

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

Checkpoint sample_checkpoint() {
    Rng rng(81);
    IcnnConfig icfg;
    icfg.input_dim = 2;
    icfg.width = 6;
    icfg.depth = 2;
    IcnnParams icnn = init_icnn(icfg, rng);
    MlpConfig mcfg;
    mcfg.input_dim = 2;
    mcfg.output_dim = 2;
    mcfg.hidden = {8};
    MlpParams mlp = init_mlp(mcfg, rng);
    DriftNet drift = init_drift(2, {8, 8}, rng);

    Checkpoint ck;
    ck.components.push_back(component_from_icnn("potential", icnn, 123));
    ck.components.push_back(component_from_mlp("amortizer", mlp, 456));
    ck.components.push_back(component_from_drift("drift", drift, 789));
    return ck;
}

}  // namespace

TEST_CASE("checkpoint round trip is byte-identical") {
    Checkpoint ck = sample_checkpoint();
    const std::string p1 = "ck_tmp_1.npf", p2 = "ck_tmp_2.npf";
    ck.save(p1);
    Checkpoint loaded = Checkpoint::load(p1);
    loaded.save(p2);
    CHECK(slurp(p1) == slurp(p2));

    IcnnParams icnn = icnn_from_component(*loaded.find("potential"));
    CHECK(icnn.cfg.width == 6);
    CHECK(icnn.theta == ck.components[0].params);
    MlpParams mlp = mlp_from_component(*loaded.find("amortizer"));
    CHECK(mlp.cfg.hidden == std::vector<int>{8});
    DriftNet drift = drift_from_component(*loaded.find("drift"));
    CHECK(drift.dim == 2);
    CHECK(loaded.find("missing") == nullptr);

    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("corrupted checkpoints are refused") {
    Checkpoint ck = sample_checkpoint();
    const std::string path = "ck_tmp_corrupt.npf";
    ck.save(path);
    std::string bytes = slurp(path);

    SUBCASE("flipped payload byte fails the checksum") {
        bytes[bytes.size() / 2] ^= 0x5a;
        std::ofstream out(path, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.close();
        CHECK_THROWS_WITH_AS(Checkpoint::load(path),
                             doctest::Contains("checksum mismatch"), std::runtime_error);
    }
    SUBCASE("unsupported version is refused") {
        // version is the first payload u32 after the 8-byte magic
        bytes[8] = 99;
        // rewrite the checksum so the version check itself is exercised
        // (recompute fnv over the altered payload)
        const std::string payload = bytes.substr(8, bytes.size() - 16);
        uint64_t h = 1469598103934665603ULL;
        for (unsigned char b : payload) {
            h ^= b;
            h *= 1099511628211ULL;
        }
        for (int i = 0; i < 8; ++i) bytes[bytes.size() - 8 + i] = static_cast<char>(h >> (8 * i));
        std::ofstream out(path, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.close();
        CHECK_THROWS_WITH_AS(Checkpoint::load(path), doctest::Contains("version"),
                             std::runtime_error);
    }
    SUBCASE("wrong magic is refused") {
        bytes[0] = 'X';
        std::ofstream out(path, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.close();
        CHECK_THROWS_AS(Checkpoint::load(path), std::runtime_error);
    }
    std::remove(path.c_str());
}

TEST_CASE("topography profile defaults match the reference tables") {
    RunConfig cfg = default_config("topography");
    CHECK(cfg.conjugate.max_iterations == 200);
    CHECK(cfg.conjugate.gtol == 1e-3);
    CHECK(cfg.icnn.width == 64);
    CHECK(cfg.icnn.depth == 4);
    CHECK(cfg.icnn.activation == Activation::Elu);
    CHECK(cfg.npf.steps == 50000);
    CHECK(cfg.npf.theta_adam.beta1 == 0.5);
    CHECK(cfg.npf.theta_adam.beta2 == 0.5);
    CHECK(cfg.npf.theta_adam.schedule.kind == LrSchedule::Kind::CosineDecay);
    CHECK(cfg.npf.theta_adam.schedule.base_lr == 1e-3);
    CHECK(cfg.npf.theta_adam.schedule.floor_fraction == 0.1);
    CHECK(cfg.npf.theta_adam.schedule.decay_steps == 50000);
    CHECK(cfg.npf.phi_adam.schedule.base_lr == 5e-4);
    CHECK(cfg.npf.phi_adam.beta1 == 0.9);
    CHECK(cfg.npf.phi_adam.beta2 == 0.999);
    CHECK(cfg.npf.phi_adam.schedule.floor_fraction == 0.01);
    CHECK(cfg.npf.amortizer_hidden == std::vector<int>{512, 512});
    CHECK(cfg.bridge.sigma == 0.1);
    CHECK(cfg.bridge.hidden == std::vector<int>{256, 256, 256});
    CHECK(cfg.bridge.adam.schedule.base_lr == 1e-3);
    CHECK(cfg.explicit_map.hidden == std::vector<int>{512, 512});
    // sampling-experiment defaults
    CHECK(cfg.sampler.config.period == 200);
    CHECK(cfg.sampler.config.particles == 1024);
    CHECK(cfg.sampler.config.tau_f == 1e-4);
    CHECK(cfg.sampler.config.mult_f == 1000.0);
}

TEST_CASE("highdim profile defaults match the reference tables") {
    RunConfig cfg = default_config("highdim");
    CHECK(cfg.conjugate.max_iterations == 700);
    CHECK(cfg.conjugate.gtol == 0.1);
    CHECK(cfg.icnn.width == 128);
    CHECK(cfg.npf.steps == 10000);
    CHECK(cfg.bridge.sigma == 1.0);
    CHECK(cfg.bridge.hidden == std::vector<int>{512, 512});
    CHECK(cfg.bridge.adam.schedule.base_lr == 5e-4);
}

TEST_CASE("config parsing") {
    SUBCASE("overrides apply on top of the profile") {
        RunConfig cfg = parse_config(R"({
            "profile": "topography",
            "seed": 7,
            "npf": {"steps": 123, "batch_size": 32},
            "conjugate": {"gtol": 0.01}
        })");
        CHECK(cfg.seed == 7);
        CHECK(cfg.npf.steps == 123);
        CHECK(cfg.npf.batch_size == 32);
        CHECK(cfg.conjugate.gtol == 0.01);
        CHECK(cfg.conjugate.max_iterations == 200);  // untouched default
    }
    SUBCASE("unknown keys are rejected with their path") {
        CHECK_THROWS_WITH_AS(parse_config(R"({"npf": {"batchsize": 9}})"),
                             doctest::Contains("config.npf.batchsize"), std::runtime_error);
        CHECK_THROWS_WITH_AS(parse_config(R"({"frobnicate": 1})"),
                             doctest::Contains("config.frobnicate"), std::runtime_error);
    }
    SUBCASE("bad profile is rejected") {
        CHECK_THROWS_WITH_AS(parse_config(R"({"profile": "exotic"})"),
                             doctest::Contains("profile"), std::runtime_error);
    }
    SUBCASE("echo is deterministic and re-parseable") {
        RunConfig cfg = default_config("topography");
        const std::string a = config_to_json(cfg);
        RunConfig reparsed = parse_config(a);
        const std::string b = config_to_json(reparsed);
        CHECK(a == b);
    }
    SUBCASE("adam subsections parse") {
        RunConfig cfg = parse_config(R"({
            "npf": {"potential_adam": {"schedule": "constant", "learning_rate": 0.5}}
        })");
        CHECK(cfg.npf.theta_adam.schedule.kind == LrSchedule::Kind::Constant);
        CHECK(cfg.npf.theta_adam.schedule.base_lr == 0.5);
    }
}

TEST_SUITE_END();
