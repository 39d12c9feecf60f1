#include "cnemf/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "cnemf/rng.hpp"

namespace cnemf {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

/// Accumulates violations while pulling typed values out of the document, so
/// one pass reports every problem instead of stopping at the first.
struct Validator {
  std::vector<std::string> errs;

  void fail(const std::string& path, const std::string& what) { errs.push_back(path + ": " + what); }

  const json* section(const json& root, const std::string& key) {
    if (!root.contains(key)) return nullptr;
    if (!root.at(key).is_object()) {
      fail(key, "must be an object");
      return nullptr;
    }
    return &root.at(key);
  }

  void known_keys(const json& obj, const std::string& prefix,
                  std::initializer_list<const char*> known) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      bool ok = false;
      for (const char* k : known)
        if (it.key() == k) {
          ok = true;
          break;
        }
      if (!ok) fail(prefix.empty() ? it.key() : prefix + "." + it.key(), "unknown key");
    }
  }

  template <typename T>
  void number(const json& obj, const std::string& prefix, const char* key, T& out) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_number()) {
      fail(prefix + "." + key, "must be a number");
      return;
    }
    out = v.get<T>();
  }

  void integer(const json& obj, const std::string& prefix, const char* key, int& out) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned()) {
      fail(prefix + "." + key, "must be an integer");
      return;
    }
    out = v.get<int>();
  }

  void integer64(const json& obj, const std::string& prefix, const char* key, long long& out) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned()) {
      fail(prefix + "." + key, "must be an integer");
      return;
    }
    out = v.get<long long>();
  }

  void unsigned64(const json& obj, const std::string& prefix, const char* key,
                  std::uint64_t& out) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (v.is_number_unsigned()) {
      out = v.get<std::uint64_t>();
    } else if (v.is_number_integer() && v.get<long long>() >= 0) {
      out = static_cast<std::uint64_t>(v.get<long long>());
    } else {
      fail(prefix + "." + key, "must be a nonnegative integer");
    }
  }

  void text(const json& obj, const std::string& prefix, const char* key, std::string& out) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_string()) {
      fail(prefix + "." + key, "must be a string");
      return;
    }
    out = v.get<std::string>();
  }

  void opt_number(const json& obj, const std::string& prefix, const char* key,
                  std::optional<double>& out) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (v.is_null()) return;
    if (!v.is_number()) {
      fail(prefix + "." + key, "must be a number or null");
      return;
    }
    out = v.get<double>();
  }

  void int_list(const json& obj, const std::string& prefix, const char* key,
                std::vector<int>& out) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_array()) {
      fail(prefix + "." + key, "must be an array of integers");
      return;
    }
    std::vector<int> vals;
    for (const json& e : v) {
      if (!e.is_number_integer() && !e.is_number_unsigned()) {
        fail(prefix + "." + key, "must be an array of integers");
        return;
      }
      vals.push_back(e.get<int>());
    }
    out = std::move(vals);
  }

  void double_list(const json& obj, const std::string& prefix, const char* key,
                   std::vector<double>& out) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_array()) {
      fail(prefix + "." + key, "must be an array of numbers");
      return;
    }
    std::vector<double> vals;
    for (const json& e : v) {
      if (!e.is_number()) {
        fail(prefix + "." + key, "must be an array of numbers");
        return;
      }
      vals.push_back(e.get<double>());
    }
    out = std::move(vals);
  }

  void matrix(const json& obj, const std::string& prefix, const char* key,
              std::vector<std::vector<double>>& out) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_array()) {
      fail(prefix + "." + key, "must be an array of number arrays");
      return;
    }
    std::vector<std::vector<double>> rows;
    for (const json& r : v) {
      if (!r.is_array()) {
        fail(prefix + "." + key, "must be an array of number arrays");
        return;
      }
      std::vector<double> row;
      for (const json& e : r) {
        if (!e.is_number()) {
          fail(prefix + "." + key, "must be an array of number arrays");
          return;
        }
        row.push_back(e.get<double>());
      }
      rows.push_back(std::move(row));
    }
    out = std::move(rows);
  }
};

ExperimentConfig validate(const json& root, std::vector<std::string>& errs) {
  ExperimentConfig cfg;
  Validator v;
  if (!root.is_object()) {
    errs.push_back("config: top level must be a JSON object");
    return cfg;
  }
  v.known_keys(root, "", {"model", "solver", "nagent", "chaos", "transfer", "seed", "output"});
  v.unsigned64(root, "", "seed", cfg.seed);
  v.text(root, "", "output", cfg.output_dir);
  if (cfg.output_dir.empty()) v.fail("output", "must be a nonempty path");

  if (const json* m = v.section(root, "model")) {
    v.known_keys(*m, "model",
                 {"family", "blocks", "beta", "idio_levels", "common_shock_prob", "graphon",
                  "threshold", "gain", "base_rate", "push", "inertia", "common_damp",
                  "reward_weight", "reward_statistic", "action_cost", "susceptibility",
                  "recovery", "distancing_factor", "outbreak_factor", "infection_loss",
                  "distancing_cost", "reward_constant", "kernel_shift", "lip_F", "lip_f",
                  "nagent_variant"});
    v.text(*m, "model", "family", cfg.model.family);
    v.integer(*m, "model", "blocks", cfg.model.blocks);
    v.number(*m, "model", "beta", cfg.model.beta);
    v.integer(*m, "model", "idio_levels", cfg.model.idio_levels);
    v.number(*m, "model", "common_shock_prob", cfg.model.common_shock_prob);
    v.matrix(*m, "model", "graphon", cfg.model.graphon);
    v.number(*m, "model", "threshold", cfg.model.threshold);
    v.number(*m, "model", "gain", cfg.model.gain);
    v.number(*m, "model", "base_rate", cfg.model.base_rate);
    v.number(*m, "model", "push", cfg.model.push);
    v.number(*m, "model", "inertia", cfg.model.inertia);
    v.number(*m, "model", "common_damp", cfg.model.common_damp);
    v.double_list(*m, "model", "reward_weight", cfg.model.reward_weight);
    v.number(*m, "model", "reward_statistic", cfg.model.reward_statistic);
    v.number(*m, "model", "action_cost", cfg.model.action_cost);
    v.double_list(*m, "model", "susceptibility", cfg.model.susceptibility);
    v.number(*m, "model", "recovery", cfg.model.recovery);
    v.number(*m, "model", "distancing_factor", cfg.model.distancing_factor);
    v.number(*m, "model", "outbreak_factor", cfg.model.outbreak_factor);
    v.double_list(*m, "model", "infection_loss", cfg.model.infection_loss);
    v.number(*m, "model", "distancing_cost", cfg.model.distancing_cost);
    v.number(*m, "model", "reward_constant", cfg.model.reward_constant);
    v.number(*m, "model", "kernel_shift", cfg.model.kernel_shift);
    v.opt_number(*m, "model", "lip_F", cfg.lip_F);
    v.opt_number(*m, "model", "lip_f", cfg.lip_f);
    v.text(*m, "model", "nagent_variant", cfg.nagent_variant);
  }

  if (const json* s = v.section(root, "solver")) {
    v.known_keys(*s, "solver", {"q", "search_budget", "mf_tol", "n_tol"});
    v.integer(*s, "solver", "q", cfg.q);
    v.integer64(*s, "solver", "search_budget", cfg.search_budget);
    v.number(*s, "solver", "mf_tol", cfg.mf_tol);
    v.number(*s, "solver", "n_tol", cfg.n_tol);
  }

  if (const json* n = v.section(root, "nagent")) {
    v.known_keys(*n, "nagent", {"Ns", "budget", "mc_samples", "mc_tol"});
    v.int_list(*n, "nagent", "Ns", cfg.Ns);
    v.integer64(*n, "nagent", "budget", cfg.n_budget);
    v.integer(*n, "nagent", "mc_samples", cfg.mc_samples);
    v.number(*n, "nagent", "mc_tol", cfg.mc_tol);
  }

  if (const json* c = v.section(root, "chaos")) {
    v.known_keys(*c, "chaos",
                 {"x0_profile", "mn_samples", "gap_enum_cap", "gap_samples", "lipschitz_probes",
                  "denom_floor", "gamma_source"});
    v.int_list(*c, "chaos", "x0_profile", cfg.x0_profile);
    v.integer(*c, "chaos", "mn_samples", cfg.mn_samples);
    v.integer64(*c, "chaos", "gap_enum_cap", cfg.gap_enum_cap);
    v.integer(*c, "chaos", "gap_samples", cfg.gap_samples);
    v.integer(*c, "chaos", "lipschitz_probes", cfg.lipschitz_probes);
    v.number(*c, "chaos", "denom_floor", cfg.denom_floor);
    v.text(*c, "chaos", "gamma_source", cfg.gamma_source);
  }

  if (const json* t = v.section(root, "transfer")) {
    v.known_keys(*t, "transfer", {"mode", "N", "matching_budget", "descent_sweeps"});
    v.text(*t, "transfer", "mode", cfg.transfer_mode);
    v.integer(*t, "transfer", "N", cfg.transfer_N);
    v.integer64(*t, "transfer", "matching_budget", cfg.matching_budget);
    v.integer(*t, "transfer", "descent_sweeps", cfg.descent_sweeps);
  }

  // Constraint checks on the merged values.
  bool family_known = false;
  for (const std::string& f : builtin_model_families())
    if (f == cfg.model.family) family_known = true;
  if (!family_known)
    v.fail("model.family", "unknown family \"" + cfg.model.family +
                               "\"; available: " + join(builtin_model_families(), ", "));
  if (cfg.model.blocks < 1) v.fail("model.blocks", "must be >= 1");
  if (!(cfg.model.beta > 0.0 && cfg.model.beta < 1.0))
    v.fail("model.beta", "must lie in (0, 1), got " + std::to_string(cfg.model.beta));
  if (cfg.model.idio_levels < 1) v.fail("model.idio_levels", "must be >= 1");
  if (!(cfg.model.common_shock_prob >= 0.0 && cfg.model.common_shock_prob <= 1.0))
    v.fail("model.common_shock_prob", "must lie in [0, 1]");
  if (cfg.nagent_variant != "same" && cfg.nagent_variant != "perturbed-graphon")
    v.fail("model.nagent_variant", "must be \"same\" or \"perturbed-graphon\"");
  if (cfg.q < 1) v.fail("solver.q", "must be >= 1");
  if (cfg.search_budget < 1) v.fail("solver.search_budget", "must be >= 1");
  if (!(cfg.mf_tol > 0.0)) v.fail("solver.mf_tol", "must be positive");
  if (!(cfg.n_tol > 0.0)) v.fail("solver.n_tol", "must be positive");
  if (cfg.Ns.empty()) v.fail("nagent.Ns", "must list at least one population size");
  for (int N : cfg.Ns)
    if (N < 1) v.fail("nagent.Ns", "entries must be >= 1, got " + std::to_string(N));
  if (cfg.n_budget < 1) v.fail("nagent.budget", "must be >= 1");
  if (cfg.mc_samples < 2) v.fail("nagent.mc_samples", "must be >= 2");
  if (!(cfg.mc_tol > 0.0)) v.fail("nagent.mc_tol", "must be positive");
  if (cfg.mn_samples < 2) v.fail("chaos.mn_samples", "must be >= 2");
  if (cfg.gap_enum_cap < 1) v.fail("chaos.gap_enum_cap", "must be >= 1");
  if (cfg.gap_samples < 1) v.fail("chaos.gap_samples", "must be >= 1");
  if (cfg.lipschitz_probes < 1) v.fail("chaos.lipschitz_probes", "must be >= 1");
  if (!(cfg.denom_floor > 0.0)) v.fail("chaos.denom_floor", "must be positive");
  if (cfg.gamma_source != "dynamics" && cfg.gamma_source != "reward")
    v.fail("chaos.gamma_source", "must be \"dynamics\" or \"reward\"");
  if (cfg.transfer_mode != "direct" && cfg.transfer_mode != "matching" &&
      cfg.transfer_mode != "both")
    v.fail("transfer.mode", "must be \"direct\", \"matching\", or \"both\"");
  if (cfg.transfer_N < 1) v.fail("transfer.N", "must be >= 1");
  if (cfg.matching_budget < 1) v.fail("transfer.matching_budget", "must be >= 1");
  if (cfg.descent_sweeps < 1) v.fail("transfer.descent_sweeps", "must be >= 1");
  if (cfg.lip_F && !(*cfg.lip_F >= 0.0)) v.fail("model.lip_F", "must be nonnegative");
  if (cfg.lip_f && !(*cfg.lip_f >= 0.0)) v.fail("model.lip_f", "must be nonnegative");

  // Semantic validation and default materialization via the model builder.
  if (v.errs.empty()) {
    try {
      const ModelSpec model = model_from_config(cfg);
      const int X = model.state.size();
      if (cfg.model.graphon.empty())
        cfg.model.graphon.assign(static_cast<std::size_t>(cfg.model.blocks),
                                 std::vector<double>(static_cast<std::size_t>(cfg.model.blocks), 1.0));
      if (cfg.model.reward_weight.empty())
        cfg.model.reward_weight.assign(static_cast<std::size_t>(cfg.model.blocks), 1.0);
      if (cfg.model.susceptibility.empty())
        cfg.model.susceptibility.assign(static_cast<std::size_t>(cfg.model.blocks), 0.8);
      if (cfg.model.infection_loss.empty())
        cfg.model.infection_loss.assign(static_cast<std::size_t>(cfg.model.blocks), 1.0);
      if (cfg.x0_profile.empty()) {
        cfg.x0_profile.resize(static_cast<std::size_t>(cfg.model.blocks));
        for (int b = 0; b < cfg.model.blocks; ++b) cfg.x0_profile[static_cast<std::size_t>(b)] = b % X;
      }
      if (static_cast<int>(cfg.x0_profile.size()) != cfg.model.blocks)
        v.fail("chaos.x0_profile",
               "needs exactly one state per block (" + std::to_string(cfg.model.blocks) + " entries)");
      for (int s : cfg.x0_profile)
        if (s < 0 || s >= X)
          v.fail("chaos.x0_profile", "entry " + std::to_string(s) + " outside the state space [0, " +
                                         std::to_string(X) + ")");
    } catch (const std::exception& e) {
      v.fail("model", e.what());
    }
  }

  errs = std::move(v.errs);
  return cfg;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error("config validation failed:\n  - " + join(violations, "\n  - ")),
      violations_(std::move(violations)) {}

ExperimentConfig default_config() {
  std::vector<std::string> errs;
  ExperimentConfig cfg = validate(json::object(), errs);
  if (!errs.empty()) throw ConfigError(std::move(errs));
  cfg.config_hash = compute_config_hash(cfg);
  return cfg;
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError({origin + ": " + e.what()});
  }
  std::vector<std::string> errs;
  ExperimentConfig cfg = validate(root, errs);
  if (!errs.empty()) throw ConfigError(std::move(errs));
  cfg.config_hash = compute_config_hash(cfg);
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("config: cannot read file \"" + path + "\"");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

std::string canonical_config_json(const ExperimentConfig& cfg) {
  json m{{"family", cfg.model.family},
         {"blocks", cfg.model.blocks},
         {"beta", cfg.model.beta},
         {"idio_levels", cfg.model.idio_levels},
         {"common_shock_prob", cfg.model.common_shock_prob},
         {"graphon", cfg.model.graphon},
         {"threshold", cfg.model.threshold},
         {"gain", cfg.model.gain},
         {"base_rate", cfg.model.base_rate},
         {"push", cfg.model.push},
         {"inertia", cfg.model.inertia},
         {"common_damp", cfg.model.common_damp},
         {"reward_weight", cfg.model.reward_weight},
         {"reward_statistic", cfg.model.reward_statistic},
         {"action_cost", cfg.model.action_cost},
         {"susceptibility", cfg.model.susceptibility},
         {"recovery", cfg.model.recovery},
         {"distancing_factor", cfg.model.distancing_factor},
         {"outbreak_factor", cfg.model.outbreak_factor},
         {"infection_loss", cfg.model.infection_loss},
         {"distancing_cost", cfg.model.distancing_cost},
         {"reward_constant", cfg.model.reward_constant},
         {"kernel_shift", cfg.model.kernel_shift},
         {"nagent_variant", cfg.nagent_variant}};
  m["lip_F"] = cfg.lip_F ? json(*cfg.lip_F) : json(nullptr);
  m["lip_f"] = cfg.lip_f ? json(*cfg.lip_f) : json(nullptr);
  const json doc{
      {"model", m},
      {"solver",
       {{"q", cfg.q}, {"search_budget", cfg.search_budget}, {"mf_tol", cfg.mf_tol}, {"n_tol", cfg.n_tol}}},
      {"nagent",
       {{"Ns", cfg.Ns}, {"budget", cfg.n_budget}, {"mc_samples", cfg.mc_samples}, {"mc_tol", cfg.mc_tol}}},
      {"chaos",
       {{"x0_profile", cfg.x0_profile},
        {"mn_samples", cfg.mn_samples},
        {"gap_enum_cap", cfg.gap_enum_cap},
        {"gap_samples", cfg.gap_samples},
        {"lipschitz_probes", cfg.lipschitz_probes},
        {"denom_floor", cfg.denom_floor},
        {"gamma_source", cfg.gamma_source}}},
      {"transfer",
       {{"mode", cfg.transfer_mode},
        {"N", cfg.transfer_N},
        {"matching_budget", cfg.matching_budget},
        {"descent_sweeps", cfg.descent_sweeps}}},
      {"seed", cfg.seed}};
  return doc.dump(2);
}

std::string compute_config_hash(const ExperimentConfig& cfg) {
  const std::string canon = canonical_config_json(cfg);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canon)));
  return std::string(buf);
}

ModelSpec model_from_config(const ExperimentConfig& cfg) {
  ModelSpec model = make_builtin_model(cfg.model);
  if (cfg.lip_F) model.lip_F = cfg.lip_F;
  if (cfg.lip_f) model.lip_f = cfg.lip_f;
  return model;
}

std::vector<int> x0_profile_from_config(const ExperimentConfig& cfg) {
  if (!cfg.x0_profile.empty()) return cfg.x0_profile;
  const ModelSpec model = model_from_config(cfg);
  const int X = model.state.size();
  std::vector<int> profile(static_cast<std::size_t>(cfg.model.blocks));
  for (int b = 0; b < cfg.model.blocks; ++b) profile[static_cast<std::size_t>(b)] = b % X;
  return profile;
}

}  // namespace cnemf
