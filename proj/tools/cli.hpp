#pragma once

// Subcommand implementations for the `spheres` tool. main.cpp owns argument
// parsing; everything here receives already-validated option structs.

#include "spheres/dataset.hpp"

#include "json.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace spheres::cli {

enum ExitCode : int {
    kOk = 0,
    kConfigError = 2,
    kNumericalAbort = 3,
    kAttackFailed = 4,
    kMnistMissing = 5,
};

/// Environment variable naming the default output root.
inline constexpr const char* kOutRootEnv = "SPHERES_OUT_ROOT";

/// 64-bit FNV-1a of `text`, as 16 lowercase hex digits.
std::string config_hash(const std::string& text);

/// One run directory plus the summary written into it on exit.
class Run {
public:
    /// Creates <root>/<command>-<hash>/ and writes run_config.toml there.
    Run(const std::string& command, const std::string& config_text, const std::filesystem::path& root);

    const std::filesystem::path& dir() const { return dir_; }
    std::filesystem::path artifact(const std::string& name);  ///< registers and returns dir/name
    nlohmann::ordered_json& metrics() { return metrics_; }
    void set_status(const std::string& status) { status_ = status; }

    /// Writes summary.json. Paths that do not exist are dropped from the list.
    void finish();

private:
    std::string command_;
    std::string hash_;
    std::filesystem::path dir_;
    std::vector<std::string> artifacts_;
    nlohmann::ordered_json metrics_ = nlohmann::ordered_json::object();
    std::string status_ = "ok";
    std::chrono::steady_clock::time_point start_;
};

struct SphereOptions {
    std::size_t n = 500;
    double radius = kDefaultOuterRadius;
};

struct TrainOptions {
    SphereOptions sphere;
    std::string family = "quadratic";
    std::vector<std::size_t> hidden;  ///< empty: 2n for quadratic, {1000, 1000} for mlp
    std::string init = "random";      ///< random | perfect (quadratic only)
    std::size_t steps = 100000;
    std::size_t batch = 50;
    double lr = 1e-4;
    std::size_t train_size = 0;  ///< 0 trains online
    std::uint64_t seed = 0;
    std::size_t repeat = 1;
    std::size_t metrics_every = 1000;
    std::size_t eval_samples = 2000;
    std::size_t probe_starts = 0;           ///< worst-case probe size, 0 disables
    std::size_t distance_probe_starts = 0;  ///< nearest-mode probe size, 0 disables
    bool stop_when_perfect = false;
    std::size_t final_eval_samples = 100000;
};

struct AttackOptions {
    std::vector<std::string> checkpoints;
    std::size_t steps = 1000;
    double step_size = 0.001;
    std::size_t starts = 100;
    std::string shell = "inner";
    std::size_t eval_samples = 1000000;
    std::size_t bins = 20;
    std::uint64_t seed = 0;
};

struct BoundOptions {
    std::size_t n = 500;
    std::vector<double> mus = {0.5, 0.1, 0.01, 0.001};
    std::size_t samples = 1000000;
    std::uint64_t seed = 0;
};

struct CapOptions {
    std::size_t n = 500;
    double mu = 0.01;
    std::size_t samples = 1000000;
    std::string formula = "both";
    std::uint64_t seed = 0;
};

struct CltOptions {
    std::string checkpoint;
    std::string alphas;  ///< "count x value" groups, e.g. "10x1.5,490x0.99"
    double radius = kDefaultOuterRadius;
    std::size_t mc_samples = 0;
    std::uint64_t seed = 0;
};

struct SubspaceOptions {
    std::size_t n = 2000;
    double radius = kDefaultOuterRadius;
    std::vector<double> targets = {1e-1, 1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12, 1e-14};
};

struct HalfspaceOptions {
    std::string train_images;
    std::string train_labels;
    std::string test_images;
    std::string test_labels;
    double tail = 0.01;
    std::size_t component = 0;
};

struct SliceOptions {
    std::string checkpoint;
    std::string basis = "adversarial";  ///< adversarial | random
    double extent = 2.5;
    std::size_t resolution = 201;
    std::uint64_t seed = 0;
};

int cmd_train(const TrainOptions& o, Run& run);
int cmd_attack(const AttackOptions& o, Run& run);
int cmd_distance_hist(const AttackOptions& o, Run& run);
int cmd_bound(const BoundOptions& o, Run& run);
int cmd_cap_oracle(const CapOptions& o, Run& run);
int cmd_clt(const CltOptions& o, Run& run);
int cmd_subspace(const SubspaceOptions& o, Run& run);
int cmd_halfspace(const HalfspaceOptions& o, Run& run);
int cmd_slice(const SliceOptions& o, Run& run);

/// Parses "10x1.5,490x0.99" (a bare value counts once).
std::vector<double> parse_alpha_groups(const std::string& text);

}  // namespace spheres::cli
