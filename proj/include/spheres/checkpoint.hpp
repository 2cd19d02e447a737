#pragma once

// Checkpoints are JSON documents:
//
//   {
//     "format": "spheres.checkpoint", "version": 1,
//     "family": "quadratic" | "mlp",
//     "config": {"n": 500, "radius": 1.3, "seed": 7},
//     "step": 200000,
//     "meta": {...},                      // free-form: creating command, train config
//     "quadratic": {"n", "hidden", "w1": [h·n row-major], "w", "b"}
//   | "mlp": {"n", "hidden": [..], "momentum", "epsilon",
//             "layers": [{"weight": [row-major], "gamma", "beta",
//                         "running_mean", "running_var"}],
//             "readout": {"weight": [...], "bias"}}
//   }
//
// Doubles are written in shortest round-trip form, so save/load is exact.

#include "spheres/dataset.hpp"
#include "spheres/models.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>

namespace spheres {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    std::unique_ptr<Model> model;
    SphereConfig config;
    std::uint64_t step = 0;
    nlohmann::json meta = nlohmann::json::object();
};

nlohmann::json checkpoint_to_json(const Model& model, const SphereConfig& config, std::uint64_t step,
                                  const nlohmann::json& meta = nlohmann::json::object());
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const std::filesystem::path& path, const Model& model, const SphereConfig& config,
                     std::uint64_t step, const nlohmann::json& meta = nlohmann::json::object());
/// Throws FormatError on unreadable or malformed files.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace spheres
