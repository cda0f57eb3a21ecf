#include "harvest/serialization.hpp"

#include <cmath>
#include <stdexcept>

namespace harvest {

using nlohmann::json;

namespace {

// JSON has no literal for infinities; use string sentinels in artifacts.
json num(double v) {
    if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
    if (std::isnan(v)) return json("nan");
    return json(v);
}

double num_from(const json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        throw std::invalid_argument("expected a number, got string '" + s + "'");
    }
    return j.get<double>();
}

double require_number(const json& j, const char* field) {
    if (!j.contains(field))
        throw std::invalid_argument(std::string("missing field '") + field + "'");
    try {
        return num_from(j.at(field));
    } catch (const json::exception&) {
        throw std::invalid_argument(std::string("field '") + field +
                                    "' is not a number");
    }
}

}  // namespace

json ModelConfig::to_json() const {
    json p{{"kappa", params.kappa}, {"gamma", params.gamma}, {"sigma", params.sigma}};
    if (kind != "log-ou") p["ell"] = params.ell;
    json h;
    if (payoff.kind == PayoffSpec::Kind::zero)
        h = {{"kind", "zero"}};
    else
        h = {{"kind", "power"}, {"a", payoff.a}, {"c", payoff.c}};
    json j{{"kind", kind}, {"params", p}, {"payoff", h}, {"K", price}};
    if (level_at_infinity_override)
        j["limits"] = {{"level_at_infinity", num(*level_at_infinity_override)}};
    return j;
}

ModelConfig parse_model_config(const json& j) {
    ModelConfig cfg;
    if (!j.contains("kind") || !j.at("kind").is_string())
        throw std::invalid_argument("model config: missing or non-string field 'kind'");
    cfg.kind = j.at("kind").get<std::string>();
    if (cfg.kind != "logistic" && cfg.kind != "log-ou" && cfg.kind != "mean-revert")
        throw std::invalid_argument("model config: unknown kind '" + cfg.kind +
                                    "' (expected logistic | log-ou | mean-revert)");
    if (!j.contains("params") || !j.at("params").is_object())
        throw std::invalid_argument("model config: missing object field 'params'");
    const auto& p = j.at("params");
    cfg.params.kappa = require_number(p, "kappa");
    cfg.params.gamma = require_number(p, "gamma");
    cfg.params.sigma = require_number(p, "sigma");
    if (cfg.kind != "log-ou") cfg.params.ell = require_number(p, "ell");

    if (j.contains("payoff")) {
        const auto& h = j.at("payoff");
        const auto kind = h.value("kind", std::string("zero"));
        if (kind == "zero") {
            cfg.payoff.kind = PayoffSpec::Kind::zero;
        } else if (kind == "power") {
            cfg.payoff.kind = PayoffSpec::Kind::power;
            cfg.payoff.a = require_number(h, "a");
            cfg.payoff.c = require_number(h, "c");
        } else {
            throw std::invalid_argument("model config: unknown payoff kind '" + kind +
                                        "' (expected zero | power)");
        }
    }
    cfg.price = j.contains("K") ? require_number(j, "K") : 1.0;
    if (j.contains("limits") && j.at("limits").contains("level_at_infinity"))
        cfg.level_at_infinity_override = num_from(j.at("limits").at("level_at_infinity"));
    return cfg;
}

ModelSpec make_model(const ModelConfig& cfg) {
    CatalogKind kind = CatalogKind::logistic;
    if (cfg.kind == "log-ou") kind = CatalogKind::log_ou;
    if (cfg.kind == "mean-revert") kind = CatalogKind::mean_revert;
    auto model = build_catalog_model(kind, cfg.params, cfg.payoff, cfg.price);
    if (cfg.level_at_infinity_override)
        model.limits.level_at_infinity = *cfg.level_at_infinity_override;
    return model;
}

json to_json(const CriticalPoints& cp) {
    return {{"xi", num(cp.xi)},
            {"lambda_bar", num(cp.lambda_bar)},
            {"lambda_under", num(cp.lambda_under)},
            {"level_at_zero", num(cp.level_at_zero)}};
}

json to_json(const AssumptionReport& rep) {
    json checks = json::array();
    for (const auto& c : rep.checks)
        checks.push_back({{"name", c.name},
                          {"pass", c.pass},
                          {"applicable", c.applicable},
                          {"evidence", num(c.evidence)},
                          {"detail", c.detail}});
    return {{"checks", checks}, {"warnings", rep.warnings}, {"all_pass", rep.all_pass()}};
}

json to_json(const ThresholdSolution& sol) {
    json trace = json::array();
    for (const auto& [b, g] : sol.bracket_history) trace.push_back({num(b), num(g)});
    return {{"beta_star", num(sol.beta_star)},
            {"lambda_star", num(sol.lambda_star)},
            {"residual_theta", num(sol.residual_theta)},
            {"residual_boundary", num(sol.residual_boundary)},
            {"speed_mass", num(sol.speed_mass)},
            {"critical_points", to_json(sol.cp)},
            {"bracket_history", trace}};
}

ThresholdSolution solution_from_json(const json& j) {
    ThresholdSolution sol;
    sol.beta_star = require_number(j, "beta_star");
    sol.lambda_star = require_number(j, "lambda_star");
    sol.residual_theta = require_number(j, "residual_theta");
    sol.residual_boundary = require_number(j, "residual_boundary");
    sol.speed_mass = require_number(j, "speed_mass");
    const auto& cp = j.at("critical_points");
    sol.cp.xi = require_number(cp, "xi");
    sol.cp.lambda_bar = require_number(cp, "lambda_bar");
    sol.cp.lambda_under = require_number(cp, "lambda_under");
    sol.cp.level_at_zero = require_number(cp, "level_at_zero");
    if (j.contains("bracket_history"))
        for (const auto& e : j.at("bracket_history"))
            sol.bracket_history.emplace_back(num_from(e.at(0)), num_from(e.at(1)));
    return sol;
}

json to_json(const HjbReport& rep) {
    json checks = json::array();
    for (const auto& c : rep.checks)
        checks.push_back({{"name", c.name},
                          {"pass", c.pass},
                          {"applicable", c.applicable},
                          {"value", num(c.value)},
                          {"tolerance", num(c.tolerance)}});
    return {{"checks", checks},
            {"gradient_bound", num(rep.gradient_bound)},
            {"all_pass", rep.all_pass()}};
}

json to_json(const SimResult& res) {
    return {{"mean", num(res.mean)},
            {"stderr", num(res.stderr_mean)},
            {"paths", res.per_path.size()},
            {"harvest_rate", num(res.harvest_rate)},
            {"floor_events", res.floor_events},
            {"trace", res.trace},
            {"fluctuation_band", num(res.fluctuation_band)}};
}

json to_json(const std::vector<SweepRow>& rows) {
    json out = json::array();
    for (const auto& r : rows)
        out.push_back({{"beta", num(r.beta)},
                       {"estimate", num(r.estimate)},
                       {"stderr", num(r.stderr_mean)},
                       {"oracle", num(r.oracle)}});
    return out;
}

json RunManifest::to_json() const {
    return {{"tool_version", tool_version},
            {"timestamp", timestamp},
            {"action", action},
            {"model", model},
            {"options", options}};
}

}  // namespace harvest
