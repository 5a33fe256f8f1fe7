#ifndef DTUQ_APP_CONFIG_HPP
#define DTUQ_APP_CONFIG_HPP

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dtuq/app/io.hpp"
#include "dtuq/error.hpp"
#include "dtuq/inference.hpp"
#include "dtuq/loss.hpp"
#include "dtuq/model.hpp"

namespace dtuq::app {

using Json = nlohmann::json;

using PriorSpec = std::variant<ExpInvGamma, BernoulliBeta, NormalNIG, HierarchicalWeibullPrior>;

enum class SamplerChoice { automatic, conjugate, importance, metropolis };

enum class LossScale { natural, neg_log10 };

/// A loss together with the scale phi is expressed on before the loss applies.
/// With neg_log10 the decision is taken on -log10(phi) and mapped back.
struct LossEntry {
  LossSpec loss;
  LossScale scale = LossScale::natural;
};

struct MonteCarloSettings {
  std::size_t posterior_draws = 100000;
  std::size_t predictive_draws = 100000;
  SamplerChoice sampler = SamplerChoice::automatic;
};

struct StudyConfig {
  Model model;
  PriorSpec prior;
  ObservationSample data;
  QuantitySpec quantity = QuantitySpec::mean();
  std::vector<LossEntry> losses;
  std::vector<std::string> estimators;  // subset of {mle, hpe, bayes}
  MonteCarloSettings montecarlo;
  std::uint64_t seed = 0;
  std::optional<ParamPoint> truth;
  Json echo;  // the configuration as read
};

inline std::string to_string(SamplerChoice s) {
  switch (s) {
    case SamplerChoice::automatic: return "auto";
    case SamplerChoice::conjugate: return "conjugate";
    case SamplerChoice::importance: return "importance";
    case SamplerChoice::metropolis: return "metropolis";
  }
  return "?";
}

inline std::string describe(const LossEntry& e) {
  const std::string base = describe(e.loss);
  return e.scale == LossScale::neg_log10 ? base + " on -log10" : base;
}

inline bool is_conjugate(const PriorSpec& p) { return !std::holds_alternative<HierarchicalWeibullPrior>(p); }

inline ConjugateSpec as_conjugate(const PriorSpec& p) {
  return std::visit(overloaded{[](const ExpInvGamma& s) -> ConjugateSpec { return s; },
                               [](const BernoulliBeta& s) -> ConjugateSpec { return s; },
                               [](const NormalNIG& s) -> ConjugateSpec { return s; },
                               [](const HierarchicalWeibullPrior&) -> ConjugateSpec {
                                 throw std::logic_error("hierarchical prior is not conjugate");
                               }},
                    p);
}

inline ModelKind model_of(const PriorSpec& p) {
  if (std::holds_alternative<HierarchicalWeibullPrior>(p)) return ModelKind::weibull;
  return model_of(as_conjugate(p));
}

namespace detail {

inline const Json& field(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(where + ": missing key '" + key + "'");
  return *it;
}

inline double number(const Json& obj, const char* key, const std::string& where) {
  const Json& v = field(obj, key, where);
  if (!v.is_number()) throw ConfigError(where + "." + key + " must be a number");
  return v.get<double>();
}

inline double number_or(const Json& obj, const char* key, double fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  return number(obj, key, where);
}

inline std::string text(const Json& obj, const char* key, const std::string& where) {
  const Json& v = field(obj, key, where);
  if (!v.is_string()) throw ConfigError(where + "." + key + " must be a string");
  return v.get<std::string>();
}

inline std::size_t count_or(const Json& obj, const char* key, std::size_t fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    throw ConfigError(where + "." + key + " must be a nonnegative integer");
  return v.get<std::size_t>();
}

inline std::uint64_t parse_seed(const Json& v) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    std::size_t used = 0;
    try {
      const auto seed = std::stoull(s, &used, 0);
      if (used == s.size()) return seed;
    } catch (const std::exception&) {
    }
  }
  throw ConfigError("seed must be an unsigned 64-bit integer (number or decimal/hex string)");
}

inline PriorSpec parse_prior(const Json& j, ModelKind kind) {
  const std::string where = "prior";
  const std::string type = text(j, "type", where);
  PriorSpec prior;
  if (type == "inverse_gamma") {
    prior = ExpInvGamma{number(j, "n0", where), number(j, "s0", where)};
  } else if (type == "beta") {
    prior = BernoulliBeta{number(j, "a", where), number(j, "b", where)};
  } else if (type == "normal_inverse_gamma") {
    prior = NormalNIG{number(j, "mu0", where), number(j, "kappa0", where), number(j, "a0", where), number(j, "b0", where)};
  } else if (type == "hierarchical_weibull") {
    HierarchicalWeibullPrior h;
    h.m = number_or(j, "m", 1.0, where);
    h.beta0 = number_or(j, "beta0", 1.5, where);
    if (j.contains("t_e")) {
      h.t_e = number(j, "t_e", where);
    } else if (j.contains("eta0")) {
      h.t_e = HierarchicalWeibullPrior::weibull_median(number(j, "eta0", where), h.beta0);
    } else {
      throw ConfigError("prior: hierarchical_weibull needs 't_e' (prior median discharge) or 'eta0'");
    }
    h.beta_lower = number_or(j, "beta_lower", 1.0, where);
    try {
      h.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("prior: ") + e.what());
    }
    prior = h;
  } else {
    throw ConfigError("prior.type must be one of inverse_gamma, beta, normal_inverse_gamma, hierarchical_weibull (got '" +
                      type + "')");
  }
  if (model_of(prior) != kind)
    throw ConfigError("prior type '" + type + "' does not match model '" + std::string(dtuq::to_string(kind)) + "'");
  return prior;
}

inline OutputMap parse_output(const Json& j) {
  const std::string where = "quantity.output";
  const std::string type = text(j, "type", where);
  if (type == "identity") return IdentityMap{};
  if (type != "dyke") throw ConfigError(where + ".type must be 'identity' or 'dyke'");
  if (j.value("reference", false)) return reference_dyke();
  DykeGeometry g{number(j, "riverbed_level", where), 0.0, number(j, "dyke_height", where)};
  if (j.contains("rating_constant")) {
    g.rating_constant = number(j, "rating_constant", where);
  } else if (j.contains("calibrate")) {
    const Json& c = j.at("calibrate");
    g.rating_constant = calibrate_rating_constant(g.riverbed_level, g.dyke_height, number(c, "eta", where + ".calibrate"),
                                                  number(c, "beta", where + ".calibrate"), number(c, "p", where + ".calibrate"));
  } else {
    throw ConfigError(where + ": dyke needs 'rating_constant', 'calibrate' {eta, beta, p} or 'reference': true");
  }
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return g;
}

inline QuantitySpec parse_quantity(const Json& j, const OutputMap& output) {
  const std::string where = "quantity";
  const std::string type = text(j, "type", where);
  try {
    if (type == "mean") return QuantitySpec::mean();
    if (type == "exceedance") {
      if (j.contains("threshold")) return QuantitySpec::exceedance(number(j, "threshold", where));
      if (const auto* d = std::get_if<DykeGeometry>(&output)) return QuantitySpec::exceedance(d->dyke_height);
      throw ConfigError("quantity: exceedance needs 'threshold'");
    }
    if (type == "quantile") return QuantitySpec::quantile(number(j, "order", where));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("quantity: ") + e.what());
  }
  throw ConfigError("quantity.type must be one of mean, exceedance, quantile (got '" + type + "')");
}

inline LossEntry parse_loss(const Json& j, std::size_t index) {
  const std::string where = "losses[" + std::to_string(index) + "]";
  const std::string type = text(j, "type", where);
  LossEntry entry;
  if (type == "quadratic") {
    entry.loss = QuadraticLoss{number_or(j, "c0", 1.0, where)};
  } else if (type == "weighted_absolute") {
    entry.loss = WeightedAbsoluteLoss{number(j, "c1", where), number(j, "c2", where)};
  } else if (type == "log_quadratic") {
    entry.loss = LogQuadraticLoss{};
  } else {
    throw ConfigError(where + ".type must be one of quadratic, weighted_absolute, log_quadratic (got '" + type + "')");
  }
  if (j.contains("scale")) {
    const std::string scale = text(j, "scale", where);
    if (scale == "neg_log10") {
      entry.scale = LossScale::neg_log10;
    } else if (scale != "natural") {
      throw ConfigError(where + ".scale must be 'natural' or 'neg_log10'");
    }
  }
  try {
    validate(entry.loss);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return entry;
}

inline std::filesystem::path resolve(const std::filesystem::path& base_dir, const std::string& file) {
  std::filesystem::path p(file);
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

}  // namespace detail

/**
 * Parses a study configuration. Relative data paths resolve against
 * `base_dir` (normally the directory of the config file).
 */
inline StudyConfig parse_study(const Json& j, const std::filesystem::path& base_dir = {}) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const char* const known[] = {"model", "prior", "data", "quantity", "losses", "estimators", "montecarlo", "seed", "truth", "risk"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) throw ConfigError("unknown config key '" + key + "'");
  }

  StudyConfig cfg;
  cfg.echo = j;
  const Json& model = field(j, "model", "config");
  if (!model.is_string()) throw ConfigError("model must be a string");
  cfg.model.kind = parse_model_kind(model.get<std::string>());
  cfg.prior = parse_prior(field(j, "prior", "config"), cfg.model.kind);

  const Json& q = field(j, "quantity", "config");
  if (q.contains("output")) cfg.model.output = parse_output(q.at("output"));
  if (std::holds_alternative<DykeGeometry>(cfg.model.output) && cfg.model.kind != ModelKind::weibull &&
      cfg.model.kind != ModelKind::exponential)
    throw ConfigError("quantity.output dyke needs a nonnegative discharge model (weibull or exponential)");
  cfg.quantity = parse_quantity(q, cfg.model.output);

  if (j.contains("data")) {
    const Json& d = j.at("data");
    if (d.is_array()) {
      std::vector<double> values;
      for (const auto& v : d) {
        if (!v.is_number()) throw ConfigError("data entries must be numbers");
        values.push_back(v.get<double>());
      }
      cfg.data = ObservationSample(std::move(values));
    } else if (d.is_string()) {
      cfg.data = ObservationSample(read_numeric_column(resolve(base_dir, d.get<std::string>())));
    } else if (d.is_object() && d.contains("file")) {
      cfg.data = ObservationSample(read_numeric_column(resolve(base_dir, text(d, "file", "data"))));
    } else {
      throw ConfigError("data must be an array of numbers, a file path, or {\"file\": path}");
    }
  }

  const Json& losses = field(j, "losses", "config");
  if (!losses.is_array() || losses.empty()) throw ConfigError("losses must be a nonempty array");
  for (std::size_t i = 0; i < losses.size(); ++i) cfg.losses.push_back(parse_loss(losses[i], i));
  for (std::size_t i = 0; i < cfg.losses.size(); ++i) {
    const auto& e = cfg.losses[i];
    const std::string where = "losses[" + std::to_string(i) + "]";
    if (e.scale == LossScale::neg_log10 && !cfg.quantity.is_probability_valued())
      throw ConfigError(where + ": scale neg_log10 needs a probability-valued quantity (exceedance)");
    const bool signed_quantity = cfg.model.kind == ModelKind::normal && !cfg.quantity.is_probability_valued();
    if (std::holds_alternative<LogQuadraticLoss>(e.loss) && (signed_quantity || e.scale == LossScale::neg_log10))
      throw ConfigError(where + ": log_quadratic loss needs a positive quantity");
  }

  const Json& ests = field(j, "estimators", "config");
  if (!ests.is_array() || ests.empty()) throw ConfigError("estimators must be a nonempty array");
  for (const auto& e : ests) {
    if (!e.is_string()) throw ConfigError("estimators entries must be strings");
    const std::string name = e.get<std::string>();
    if (name != "mle" && name != "hpe" && name != "bayes") throw ConfigError("unknown estimator '" + name + "' (use mle, hpe, bayes)");
    if (std::find(cfg.estimators.begin(), cfg.estimators.end(), name) != cfg.estimators.end())
      throw ConfigError("estimator '" + name + "' listed twice");
    cfg.estimators.push_back(name);
  }

  if (j.contains("montecarlo")) {
    const Json& mc = j.at("montecarlo");
    cfg.montecarlo.posterior_draws = count_or(mc, "posterior_draws", cfg.montecarlo.posterior_draws, "montecarlo");
    cfg.montecarlo.predictive_draws = count_or(mc, "predictive_draws", cfg.montecarlo.predictive_draws, "montecarlo");
    if (mc.contains("sampler")) {
      const std::string s = text(mc, "sampler", "montecarlo");
      if (s == "auto") {
        cfg.montecarlo.sampler = SamplerChoice::automatic;
      } else if (s == "conjugate") {
        cfg.montecarlo.sampler = SamplerChoice::conjugate;
      } else if (s == "importance") {
        cfg.montecarlo.sampler = SamplerChoice::importance;
      } else if (s == "metropolis") {
        cfg.montecarlo.sampler = SamplerChoice::metropolis;
      } else {
        throw ConfigError("montecarlo.sampler must be one of auto, conjugate, importance, metropolis");
      }
    }
  }
  if (cfg.montecarlo.posterior_draws < 100 || cfg.montecarlo.predictive_draws < 100)
    throw ConfigError("montecarlo.posterior_draws and predictive_draws must be >= 100");
  if (cfg.montecarlo.sampler == SamplerChoice::conjugate && !is_conjugate(cfg.prior))
    throw ConfigError("montecarlo.sampler 'conjugate' needs a conjugate prior");

  if (j.contains("seed")) cfg.seed = parse_seed(j.at("seed"));

  if (j.contains("truth")) {
    const Json& t = j.at("truth");
    if (!t.is_array()) throw ConfigError("truth must be an array of parameter coordinates");
    std::vector<double> coords;
    for (const auto& v : t) {
      if (!v.is_number()) throw ConfigError("truth entries must be numbers");
      coords.push_back(v.get<double>());
    }
    if (coords.size() != dimension(cfg.model.kind))
      throw ConfigError("truth needs " + std::to_string(dimension(cfg.model.kind)) + " coordinates for model " +
                        std::string(dtuq::to_string(cfg.model.kind)));
    const ParamPoint p = ParamPoint::from_coords(cfg.model.kind, coords);
    if (!is_valid(cfg.model.kind, p)) throw ConfigError("truth lies outside the parameter space");
    cfg.truth = p;
  }
  return cfg;
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

inline StudyConfig load_study(const std::filesystem::path& path) {
  return parse_study(read_json_file(path), path.parent_path());
}

}  // namespace dtuq::app

#endif  // DTUQ_APP_CONFIG_HPP
