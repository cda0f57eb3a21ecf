#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "harvest/free_boundary.hpp"
#include "harvest/model.hpp"
#include "harvest/simulate.hpp"

namespace harvest {

// Parsed form of the JSON model configuration; regenerates the ModelSpec.
struct ModelConfig {
    std::string kind;  // "logistic" | "log-ou" | "mean-revert"
    CatalogParams params;
    PayoffSpec payoff;
    double price = 1.0;
    std::optional<double> level_at_infinity_override;

    nlohmann::json to_json() const;
};

// Throws std::invalid_argument with field diagnostics on a malformed config.
ModelConfig parse_model_config(const nlohmann::json& j);
ModelSpec make_model(const ModelConfig& cfg);

nlohmann::json to_json(const CriticalPoints&);
nlohmann::json to_json(const AssumptionReport&);
nlohmann::json to_json(const ThresholdSolution&);
nlohmann::json to_json(const HjbReport&);
nlohmann::json to_json(const SimResult&);
nlohmann::json to_json(const std::vector<SweepRow>&);

ThresholdSolution solution_from_json(const nlohmann::json& j);

// Fully determines a run's outputs; stored alongside the artifacts.
struct RunManifest {
    std::string tool_version;
    std::string timestamp;  // caller-supplied so identical manifests reproduce bytes
    std::string action;
    nlohmann::json model;
    nlohmann::json options;

    nlohmann::json to_json() const;
};

}  // namespace harvest
