#include "covert_lab/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace covert {

using nlohmann::json;

namespace {

struct KindInfo {
  ExperimentKind kind;
  std::string_view name;
};

constexpr KindInfo kKinds[] = {
    {ExperimentKind::kPoissonAchievability, "poisson-achievability"},
    {ExperimentKind::kPoissonConverse, "poisson-converse"},
    {ExperimentKind::kBuffering, "buffering"},
    {ExperimentKind::kBufferingConverse, "buffering-converse"},
    {ExperimentKind::kTwoPhase, "two-phase"},
    {ExperimentKind::kOnePhase, "one-phase"},
    {ExperimentKind::kKlExpansion, "kl-expansion"},
    {ExperimentKind::kFisher, "fisher"},
};

const std::set<std::string> kCommonKeys = {"schema_version", "kind", "name", "seed", "output"};

// Keys accepted per kind, beyond the common ones.
const std::set<std::string>& kind_keys(ExperimentKind kind) {
  static const std::map<ExperimentKind, std::set<std::string>> table = {
      {ExperimentKind::kPoissonAchievability,
       {"trials", "lambda", "horizons", "epsilon", "detector", "alpha"}},
      {ExperimentKind::kPoissonConverse, {"trials", "lambda", "horizons", "gammas", "alpha"}},
      {ExperimentKind::kBuffering, {"trials", "channel", "sizes", "epsilon"}},
      {ExperimentKind::kBufferingConverse,
       {"trials", "channel", "sizes", "backlog_exponent", "alpha", "mode"}},
      {ExperimentKind::kTwoPhase, {"trials", "channel", "sizes", "psi", "epsilon"}},
      {ExperimentKind::kOnePhase, {"trials", "channel", "sizes", "epsilon"}},
      {ExperimentKind::kKlExpansion, {"channels", "rhos"}},
      {ExperimentKind::kFisher, {"channels"}},
  };
  return table.at(kind);
}

double parse_number(std::string_view text, std::string_view what) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("bad number '" + std::string(text) + "' for " + std::string(what));
  }
  return value;
}

IpdDistribution build_distribution(Family family, const std::map<std::string, double>& kv) {
  std::set<std::string> used;
  auto get = [&](const char* key, std::optional<double> fallback) {
    used.insert(key);
    const auto it = kv.find(key);
    if (it != kv.end()) return it->second;
    if (fallback) return *fallback;
    throw ConfigError(std::string(family_name(family)) + ": missing parameter '" + key + "'");
  };
  auto shape_as_int = [](double v) {
    if (v != std::floor(v) || v < 1.0 || v > 1e6) throw ConfigError("erlang: shape must be a positive integer");
    return static_cast<int>(v);
  };
  IpdDistribution dist = [&] {
    try {
      switch (family) {
        case Family::kExponential: return IpdDistribution::exponential(get("rate", 1.0));
        case Family::kGamma: return IpdDistribution::gamma(get("shape", {}), get("scale", 1.0));
        case Family::kWeibull: return IpdDistribution::weibull(get("shape", {}), get("scale", 1.0));
        case Family::kRayleigh: return IpdDistribution::rayleigh(get("sigma", 1.0));
        case Family::kErlang:
          return IpdDistribution::erlang(shape_as_int(get("shape", {})), get("rate", 1.0));
        case Family::kChiSquared: return IpdDistribution::chi_squared(get("dof", {}));
        case Family::kGeneralizedGamma:
          return IpdDistribution::generalized_gamma(get("scale", 1.0), get("d", {}), get("p", {}));
      }
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    throw ConfigError("unsupported family");
  }();
  for (const auto& [key, value] : kv) {
    if (!used.count(key)) {
      throw ConfigError(std::string(family_name(family)) + ": unknown parameter '" + key + "'");
    }
  }
  return dist;
}

Family family_or_throw(std::string_view name) {
  try {
    return parse_family(name);
  } catch (const std::invalid_argument&) {
    throw ConfigError("unknown distribution family '" + std::string(name) + "'");
  }
}

IpdDistribution distribution_from_json(const json& j) {
  if (j.is_string()) return parse_distribution_spec(j.get<std::string>());
  if (!j.is_object() || !j.contains("family") || !j["family"].is_string()) {
    throw ConfigError("channel must be a spec string or an object with a 'family' key");
  }
  std::map<std::string, double> kv;
  for (const auto& [key, value] : j.items()) {
    if (key == "family") continue;
    if (!value.is_number()) throw ConfigError("channel parameter '" + key + "' must be a number");
    kv[key] = value.get<double>();
  }
  return build_distribution(family_or_throw(j["family"].get<std::string>()), kv);
}

json distribution_to_json(const IpdDistribution& d) {
  json j;
  j["family"] = std::string(d.name());
  switch (d.family()) {
    case Family::kExponential: j["rate"] = d.param(0); break;
    case Family::kGamma:
    case Family::kWeibull: j["shape"] = d.param(0); j["scale"] = d.param(1); break;
    case Family::kRayleigh: j["sigma"] = d.param(0); break;
    case Family::kErlang: j["shape"] = d.param(0); j["rate"] = d.param(1); break;
    case Family::kChiSquared: j["dof"] = d.param(0); break;
    case Family::kGeneralizedGamma:
      j["scale"] = d.gg().scale;
      j["d"] = d.gg().d;
      j["p"] = d.gg().p;
      break;
  }
  return j;
}

template <typename T>
T number_field(const json& j, const char* key) {
  const auto& v = j.at(key);
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0 &&
                                   std::is_unsigned_v<T>)) {
      throw ConfigError(std::string("'") + key + "' must be a non-negative integer");
    }
    return v.get<T>();
  } else {
    if (!v.is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
    return v.get<T>();
  }
}

// Accepts a scalar or a nonempty array.
template <typename T>
std::vector<T> list_field(const json& j, const char* key) {
  const json& v = j.at(key);
  std::vector<T> out;
  auto one = [&](const json& item) {
    if constexpr (std::is_integral_v<T>) {
      if (item.is_number_integer() && item.get<long long>() > 0) {
        out.push_back(item.get<T>());
        return;
      }
      // Permit 1e5-style literals that are exact integers.
      if (item.is_number_float()) {
        const double d = item.get<double>();
        if (d > 0.0 && d == std::floor(d) && d < 1e12) {
          out.push_back(static_cast<T>(d));
          return;
        }
      }
      throw ConfigError(std::string("'") + key + "' entries must be positive integers");
    } else {
      if (!item.is_number()) throw ConfigError(std::string("'") + key + "' entries must be numbers");
      out.push_back(item.get<T>());
    }
  };
  if (v.is_array()) {
    for (const auto& item : v) one(item);
  } else {
    one(v);
  }
  if (out.empty()) throw ConfigError(std::string("'") + key + "' must not be empty");
  return out;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

std::string_view experiment_kind_name(ExperimentKind kind) noexcept {
  for (const auto& k : kKinds) {
    if (k.kind == kind) return k.name;
  }
  return "unknown";
}

ExperimentKind parse_experiment_kind(std::string_view name) {
  for (const auto& k : kKinds) {
    if (k.name == name) return k.kind;
  }
  throw ConfigError("unknown experiment kind '" + std::string(name) + "'");
}

IpdDistribution parse_distribution_spec(std::string_view spec) {
  const auto colon = spec.find(':');
  const Family family = family_or_throw(spec.substr(0, colon));
  std::map<std::string, double> kv;
  if (colon != std::string_view::npos) {
    std::string_view rest = spec.substr(colon + 1);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const std::string_view item = rest.substr(0, comma);
      const auto eq = item.find('=');
      if (eq == std::string_view::npos || eq == 0) {
        throw ConfigError("distribution parameter '" + std::string(item) + "' is not key=value");
      }
      const std::string key(item.substr(0, eq));
      if (kv.count(key)) throw ConfigError("duplicate distribution parameter '" + key + "'");
      kv[key] = parse_number(item.substr(eq + 1), key);
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
  }
  return build_distribution(family, kv);
}

void validate_config(const ExperimentConfig& c) {
  require(c.schema_version == kSchemaVersion,
          "unsupported schema_version " + std::to_string(c.schema_version));
  const auto kind = c.kind;
  const bool monte_carlo = kind != ExperimentKind::kKlExpansion && kind != ExperimentKind::kFisher;
  if (monte_carlo) require(c.trials >= 100, "trials must be at least 100");
  auto in_open_unit = [](double x) { return x > 0.0 && x < 1.0; };
  switch (kind) {
    case ExperimentKind::kPoissonAchievability:
      require(c.lambda > 0.0, "lambda must be positive");
      require(!c.horizons.empty(), "horizons must not be empty");
      for (double t : c.horizons) require(t > 0.0, "horizons must be positive");
      require(!c.epsilons.empty(), "epsilon must be given");
      for (double e : c.epsilons) require(e >= 0.0 && e < 1.0, "epsilon must lie in [0, 1)");
      require(c.detector == "lrt" || c.detector == "count-threshold",
              "detector must be 'lrt' or 'count-threshold'");
      require(in_open_unit(c.alpha), "alpha must lie in (0, 1)");
      break;
    case ExperimentKind::kPoissonConverse:
      require(c.lambda > 0.0, "lambda must be positive");
      require(!c.horizons.empty(), "horizons must not be empty");
      for (double t : c.horizons) require(t > 0.0, "horizons must be positive");
      require(!c.gammas.empty(), "gammas must not be empty");
      for (double g : c.gammas) require(g >= 0.0 && g < 1.0, "gammas must lie in [0, 1)");
      require(in_open_unit(c.alpha), "alpha must lie in (0, 1)");
      break;
    case ExperimentKind::kBuffering:
    case ExperimentKind::kTwoPhase:
    case ExperimentKind::kOnePhase:
      require(c.channels.size() == 1, "exactly one channel is required");
      require(!c.sizes.empty(), "sizes must not be empty");
      require(!c.epsilons.empty(), "epsilon must be given");
      require(in_open_unit(c.epsilon()), "epsilon must lie in (0, 1)");
      if (kind == ExperimentKind::kTwoPhase) require(in_open_unit(c.psi), "psi must lie in (0, 1)");
      break;
    case ExperimentKind::kBufferingConverse:
      require(c.channels.size() == 1, "exactly one channel is required");
      require(!c.sizes.empty(), "sizes must not be empty");
      require(c.backlog_exponent > 0.0 && c.backlog_exponent < 1.0,
              "backlog_exponent must lie in (0, 1)");
      require(in_open_unit(c.alpha), "alpha must lie in (0, 1)");
      break;
    case ExperimentKind::kKlExpansion:
      require(!c.channels.empty(), "channels must not be empty");
      require(!c.rhos.empty(), "rhos must not be empty");
      for (double r : c.rhos) require(in_open_unit(r), "rhos must lie in (0, 1)");
      break;
    case ExperimentKind::kFisher:
      require(!c.channels.empty(), "channels must not be empty");
      break;
  }
}

ExperimentConfig parse_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  require(j.is_object(), "config must be a JSON object");
  require(j.contains("schema_version"), "missing 'schema_version'");
  require(j.contains("kind") && j["kind"].is_string(), "missing 'kind'");
  require(j.contains("seed"), "missing 'seed'");

  ExperimentConfig c;
  try {
    c.schema_version = number_field<int>(j, "schema_version");
    require(c.schema_version == kSchemaVersion,
            "unsupported schema_version " + std::to_string(c.schema_version));
    c.kind = parse_experiment_kind(j["kind"].get<std::string>());
    const auto& allowed = kind_keys(c.kind);
    for (const auto& [key, value] : j.items()) {
      if (!kCommonKeys.count(key) && !allowed.count(key)) {
        throw ConfigError("unknown key '" + key + "' for experiment kind '" +
                          std::string(experiment_kind_name(c.kind)) + "'");
      }
    }
    c.name = j.value("name", std::string(experiment_kind_name(c.kind)));
    require(!c.name.empty() && c.name.find_first_of("/\\") == std::string::npos,
            "'name' must be a plain file stem");
    c.seed = number_field<std::uint64_t>(j, "seed");
    if (j.contains("trials")) c.trials = number_field<std::size_t>(j, "trials");
    if (j.contains("lambda")) c.lambda = number_field<double>(j, "lambda");
    if (j.contains("horizons")) c.horizons = list_field<double>(j, "horizons");
    if (j.contains("sizes")) c.sizes = list_field<std::size_t>(j, "sizes");
    if (j.contains("rhos")) c.rhos = list_field<double>(j, "rhos");
    if (j.contains("epsilon")) c.epsilons = list_field<double>(j, "epsilon");
    if (j.contains("gammas")) c.gammas = list_field<double>(j, "gammas");
    if (j.contains("psi")) c.psi = number_field<double>(j, "psi");
    if (j.contains("alpha")) c.alpha = number_field<double>(j, "alpha");
    if (j.contains("backlog_exponent")) {
      c.backlog_exponent = number_field<double>(j, "backlog_exponent");
    }
    c.detector = j.value("detector", std::string("lrt"));
    if (j.contains("mode")) {
      try {
        c.mean_ipd_mode = parse_mean_ipd_mode(j["mode"].get<std::string>());
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
    if (j.contains("channel")) c.channels.push_back(distribution_from_json(j["channel"]));
    if (j.contains("channels")) {
      require(j["channels"].is_array(), "'channels' must be an array");
      for (const auto& item : j["channels"]) c.channels.push_back(distribution_from_json(item));
    }

    c.csv_path = c.name + ".csv";
    c.svg_path = c.name + ".svg";
    c.metadata_path = c.name + ".meta.json";
    if (j.contains("output")) {
      const json& out = j["output"];
      require(out.is_object(), "'output' must be an object");
      for (const auto& [key, value] : out.items()) {
        require(key == "csv" || key == "svg" || key == "metadata",
                "unknown key 'output." + key + "'");
        require(value.is_string(), "'output." + key + "' must be a string");
        std::string& target =
            key == "csv" ? c.csv_path : key == "svg" ? c.svg_path : c.metadata_path;
        target = value.get<std::string>();
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config type error: ") + e.what());
  }
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string canonical_config_json(const ExperimentConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["kind"] = std::string(experiment_kind_name(c.kind));
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["trials"] = c.trials;
  json channels = json::array();
  for (const auto& d : c.channels) channels.push_back(distribution_to_json(d));
  j["channels"] = channels;
  j["lambda"] = c.lambda;
  j["horizons"] = c.horizons;
  j["sizes"] = c.sizes;
  j["rhos"] = c.rhos;
  j["epsilon"] = c.epsilons;
  j["gammas"] = c.gammas;
  j["psi"] = c.psi;
  j["alpha"] = c.alpha;
  j["backlog_exponent"] = c.backlog_exponent;
  j["detector"] = c.detector;
  j["mode"] = std::string(mean_ipd_mode_name(c.mean_ipd_mode));
  return j.dump();
}

}  // namespace covert
