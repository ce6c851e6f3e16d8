// SPDX-License-Identifier: Apache-2.0
#include "qkdsim/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <string>

#include <fmt/format.h>

#include "qkdsim/errors.hpp"

namespace qkdsim {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string join(const std::string& parent, std::string_view key) {
  return parent.empty() ? std::string(key) : fmt::format("{}.{}", parent, key);
}

std::string index(const std::string& parent, std::size_t i) {
  return fmt::format("{}[{}]", parent, i);
}

void reject_unknown(const json& obj, const std::string& path,
                    std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw ConfigError(join(path, key), "unknown key");
  }
}

const json& require(const json& obj, std::string_view key, const std::string& path) {
  const auto it = obj.find(std::string(key));
  if (it == obj.end()) throw ConfigError(join(path, key), "missing required field");
  return *it;
}

const json& require_object(const json& v, const std::string& path) {
  if (!v.is_object()) throw ConfigError(path, "expected an object");
  return v;
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(path, "must be finite");
  return d;
}

double probability(const json& v, const std::string& path) {
  const double p = number(v, path);
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(path, fmt::format("{} outside [0, 1]", p));
  return p;
}

std::uint64_t unsigned_integer(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    const auto i = v.get<std::int64_t>();
    if (i >= 0) return static_cast<std::uint64_t>(i);
    throw ConfigError(path, fmt::format("must be non-negative, got {}", i));
  }
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d >= 0.0 && d < 0x1.0p64 && std::floor(d) == d) return static_cast<std::uint64_t>(d);
  }
  throw ConfigError(path, "expected a non-negative integer");
}

const json& array_of(const json& v, const std::string& path, std::size_t size = 0) {
  if (!v.is_array()) throw ConfigError(path, "expected an array");
  if (size != 0 && v.size() != size) {
    throw ConfigError(path, fmt::format("expected {} entries, got {}", size, v.size()));
  }
  return v;
}

HiddenVariableMixture parse_mixture(const json& v, const std::string& path) {
  require_object(v, path);
  reject_unknown(v, path, {"weights", "offsets"});
  const auto wpath = join(path, "weights");
  const auto opath = join(path, "offsets");
  const json& weights = array_of(require(v, "weights", path), wpath);
  if (weights.empty()) throw ConfigError(wpath, "needs at least one component");
  std::vector<MixtureComponent> components;
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double w = number(weights[i], index(wpath, i));
    if (w < 0.0) throw ConfigError(index(wpath, i), "weight must be non-negative");
    components.push_back({w, 0.0});
    total += w;
  }
  if (std::abs(total - 1.0) > kProbabilityTolerance) {
    throw ConfigError(wpath, fmt::format("weights sum to {:.12g}, expected 1", total));
  }
  if (v.contains("offsets")) {
    const json& offsets = array_of(v.at("offsets"), opath, weights.size());
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      components[i].offset = number(offsets[i], index(opath, i));
    }
  } else if (weights.size() != 1) {
    throw ConfigError(opath, "required when there is more than one weight");
  }
  return HiddenVariableMixture(std::move(components));
}

Channel parse_channel(const json& v, const std::string& path) {
  require_object(v, path);
  const json& kind_v = require(v, "kind", path);
  if (!kind_v.is_string()) throw ConfigError(join(path, "kind"), "expected a string");
  const auto kind = kind_v.get<std::string>();
  if (kind == "identity") {
    reject_unknown(v, path, {"kind"});
    return Channel::identity();
  }
  if (kind == "depolarizing") {
    reject_unknown(v, path, {"kind", "p"});
    return Channel::depolarizing(probability(require(v, "p", path), join(path, "p")));
  }
  if (kind == "misalignment") {
    reject_unknown(v, path, {"kind", "delta"});
    return Channel::misalignment(number(require(v, "delta", path), join(path, "delta")));
  }
  if (kind == "loss") {
    reject_unknown(v, path, {"kind", "eta"});
    return Channel::loss(probability(require(v, "eta", path), join(path, "eta")));
  }
  throw ConfigError(join(path, "kind"), fmt::format("unknown channel kind '{}'", kind));
}

std::vector<Channel> parse_channel_chain(const json& v, const std::string& path) {
  if (v.is_array()) {
    std::vector<Channel> chain;
    for (std::size_t i = 0; i < v.size(); ++i) chain.push_back(parse_channel(v[i], index(path, i)));
    return chain;
  }
  return {parse_channel(v, path)};
}

Announcement parse_announcement(const json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path, "expected psi_plus, psi_minus or fail");
  try {
    return announcement_from_string(v.get<std::string>());
  } catch (const InvalidArgument& e) {
    throw ConfigError(path, e.what());
  }
}

EveStrategy parse_eve(const json& v, const std::string& path) {
  if (v.is_string()) {
    const auto kind = v.get<std::string>();
    if (kind == "ideal_bsm") return IdealBsm{};
    if (kind == "linear_optics_bsm") return LinearOpticsBsm{};
    throw ConfigError(path, fmt::format("unknown relay strategy '{}'", kind));
  }
  require_object(v, path);
  const json& kind_v = require(v, "kind", path);
  if (!kind_v.is_string()) throw ConfigError(join(path, "kind"), "expected a string");
  const auto kind = kind_v.get<std::string>();

  auto preset = [&](auto tag) -> EveStrategy {
    using T = decltype(tag);
    reject_unknown(v, path, {"kind", "preset"});
    const json& name = require(v, "preset", path);
    if (!name.is_string()) throw ConfigError(join(path, "preset"), "expected a string");
    EveStrategy s;
    try {
      s = bundled_classical_strategy(name.get<std::string>());
    } catch (const InvalidArgument& e) {
      throw ConfigError(join(path, "preset"), e.what());
    }
    if (!std::holds_alternative<T>(s)) {
      throw ConfigError(join(path, "preset"), fmt::format("preset is not a {}", kind));
    }
    return s;
  };

  if (kind == "ideal_bsm") {
    reject_unknown(v, path, {"kind"});
    return IdealBsm{};
  }
  if (kind == "linear_optics_bsm") {
    reject_unknown(v, path, {"kind", "efficiency"});
    LinearOpticsBsm s;
    if (v.contains("efficiency")) s.efficiency = probability(v.at("efficiency"), join(path, "efficiency"));
    return s;
  }
  if (kind == "classical_lhv") {
    if (v.contains("preset")) return preset(ClassicalLhv{});
    reject_unknown(v, path, {"kind", "name", "bases", "rule"});
    ClassicalLhv s;
    s.name = v.value("name", std::string("custom"));
    const auto bpath = join(path, "bases");
    const json& bases = array_of(require(v, "bases", path), bpath);
    double total = 0.0;
    for (std::size_t i = 0; i < bases.size(); ++i) {
      const auto ipath = index(bpath, i);
      const json& b = require_object(bases[i], ipath);
      reject_unknown(b, ipath, {"weight", "angle_a", "angle_b"});
      LocalBasisChoice c;
      c.weight = b.contains("weight") ? probability(b.at("weight"), join(ipath, "weight")) : 1.0;
      c.angle_a = number(require(b, "angle_a", ipath), join(ipath, "angle_a"));
      c.angle_b = number(require(b, "angle_b", ipath), join(ipath, "angle_b"));
      total += c.weight;
      s.bases.push_back(c);
    }
    if (s.bases.empty()) throw ConfigError(bpath, "needs at least one basis");
    if (std::abs(total - 1.0) > kProbabilityTolerance) {
      throw ConfigError(bpath, fmt::format("weights sum to {:.12g}, expected 1", total));
    }
    const auto rpath = join(path, "rule");
    const json& rule = array_of(require(v, "rule", path), rpath, 4);
    for (std::size_t i = 0; i < 4; ++i) s.rule[i] = parse_announcement(rule[i], index(rpath, i));
    return s;
  }
  if (kind == "dishonest_announce") {
    if (v.contains("preset")) return preset(DishonestAnnounce{});
    reject_unknown(v, path, {"kind", "name", "angle_a", "angle_b", "table"});
    DishonestAnnounce s;
    s.name = v.value("name", std::string("custom"));
    s.angle_a = number(require(v, "angle_a", path), join(path, "angle_a"));
    s.angle_b = number(require(v, "angle_b", path), join(path, "angle_b"));
    const auto tpath = join(path, "table");
    const json& table = array_of(require(v, "table", path), tpath, 4);
    for (std::size_t i = 0; i < 4; ++i) {
      const auto rpath = index(tpath, i);
      const json& row = array_of(table[i], rpath, 3);
      double total = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        s.table[i][k] = probability(row[k], index(rpath, k));
        total += s.table[i][k];
      }
      if (std::abs(total - 1.0) > kProbabilityTolerance) {
        throw ConfigError(rpath, fmt::format("row sums to {:.12g}, expected 1", total));
      }
    }
    return s;
  }
  throw ConfigError(join(path, "kind"), fmt::format("unknown relay strategy '{}'", kind));
}

ordered_json echo_channel(const Channel& c) {
  switch (c.kind()) {
    case Channel::Kind::identity: return {{"kind", "identity"}};
    case Channel::Kind::depolarizing: return {{"kind", "depolarizing"}, {"p", c.parameter()}};
    case Channel::Kind::misalignment: return {{"kind", "misalignment"}, {"delta", c.parameter()}};
    case Channel::Kind::loss: return {{"kind", "loss"}, {"eta", c.parameter()}};
  }
  return {};
}

ordered_json echo_chain(const std::vector<Channel>& chain) {
  ordered_json out = ordered_json::array();
  for (const auto& c : chain) out.push_back(echo_channel(c));
  return out;
}

ordered_json echo_mixture(const HiddenVariableMixture& m) {
  ordered_json weights = ordered_json::array();
  ordered_json offsets = ordered_json::array();
  for (const auto& c : m.components()) {
    weights.push_back(c.weight);
    offsets.push_back(c.offset);
  }
  return {{"weights", weights}, {"offsets", offsets}};
}

ordered_json echo_eve(const EveStrategy& eve) {
  return std::visit(
      [](const auto& s) -> ordered_json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, IdealBsm>) {
          return {{"kind", "ideal_bsm"}};
        } else if constexpr (std::is_same_v<T, LinearOpticsBsm>) {
          return {{"kind", "linear_optics_bsm"}, {"efficiency", s.efficiency}};
        } else if constexpr (std::is_same_v<T, ClassicalLhv>) {
          ordered_json bases = ordered_json::array();
          for (const auto& b : s.bases) {
            bases.push_back({{"weight", b.weight}, {"angle_a", b.angle_a}, {"angle_b", b.angle_b}});
          }
          ordered_json rule = ordered_json::array();
          for (auto a : s.rule) rule.push_back(std::string(to_string(a)));
          return {{"kind", "classical_lhv"}, {"name", s.name}, {"bases", bases}, {"rule", rule}};
        } else {
          return {{"kind", "dishonest_announce"}, {"name", s.name}, {"angle_a", s.angle_a},
                  {"angle_b", s.angle_b}, {"table", s.table}};
        }
      },
      eve);
}

}  // namespace

RunConfig parse_config_json(const json& doc) {
  require_object(doc, "config");
  reject_unknown(doc, "",
                 {"schema", "rounds", "seed", "eve", "alice_mixture", "bob_mixture", "channel_a",
                  "channel_b", "setting_probabilities", "min_cell_count",
                  "reconciliation_passes"});
  if (doc.contains("schema")) {
    const auto version = unsigned_integer(doc.at("schema"), "schema");
    if (version != kConfigSchemaVersion) {
      throw ConfigError("schema", fmt::format("unsupported schema version {}", version));
    }
  }

  RunConfig cfg;
  SessionConfig& s = cfg.session;
  s.rounds = unsigned_integer(require(doc, "rounds", ""), "rounds");
  if (s.rounds < 1) throw ConfigError("rounds", "must be at least 1");
  s.master_seed = unsigned_integer(require(doc, "seed", ""), "seed");
  s.eve = parse_eve(require(doc, "eve", ""), "eve");
  if (doc.contains("alice_mixture")) s.alice_mixture = parse_mixture(doc.at("alice_mixture"), "alice_mixture");
  if (doc.contains("bob_mixture")) s.bob_mixture = parse_mixture(doc.at("bob_mixture"), "bob_mixture");
  if (doc.contains("channel_a")) s.channel_a = parse_channel_chain(doc.at("channel_a"), "channel_a");
  if (doc.contains("channel_b")) s.channel_b = parse_channel_chain(doc.at("channel_b"), "channel_b");
  if (doc.contains("setting_probabilities")) {
    const std::string path = "setting_probabilities";
    const json& rows = array_of(doc.at(path), path, 2);
    double total = 0.0;
    for (std::size_t x = 0; x < 2; ++x) {
      const json& row = array_of(rows[x], index(path, x), 3);
      for (std::size_t y = 0; y < 3; ++y) {
        s.settings.joint[x][y] = probability(row[y], index(index(path, x), y));
        total += s.settings.joint[x][y];
      }
    }
    if (std::abs(total - 1.0) > kProbabilityTolerance) {
      throw ConfigError(path, fmt::format("probabilities sum to {:.12g}, expected 1", total));
    }
  }
  if (doc.contains("min_cell_count")) {
    cfg.min_cell_count = unsigned_integer(doc.at("min_cell_count"), "min_cell_count");
    if (cfg.min_cell_count < 1) throw ConfigError("min_cell_count", "must be at least 1");
  }
  if (doc.contains("reconciliation_passes")) {
    const auto passes = unsigned_integer(doc.at("reconciliation_passes"), "reconciliation_passes");
    if (passes < 1 || passes > 16) throw ConfigError("reconciliation_passes", "must be in [1, 16]");
    cfg.reconciliation_passes = static_cast<int>(passes);
  }

  try {
    s.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError("config", e.what());
  }

  cfg.echo = {{"schema", kConfigSchemaVersion},
              {"rounds", s.rounds},
              {"seed", s.master_seed},
              {"eve", echo_eve(s.eve)},
              {"alice_mixture", echo_mixture(s.alice_mixture)},
              {"bob_mixture", echo_mixture(s.bob_mixture)},
              {"channel_a", echo_chain(s.channel_a)},
              {"channel_b", echo_chain(s.channel_b)},
              {"setting_probabilities", s.settings.joint},
              {"min_cell_count", cfg.min_cell_count},
              {"reconciliation_passes", cfg.reconciliation_passes}};
  return cfg;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", fmt::format("cannot open '{}'", path.string()));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", fmt::format("'{}' is not valid JSON: {}", path.string(), e.what()));
  }
  return parse_config_json(doc);
}

void set_numeric_parameter(json& doc, std::string_view path, double value) {
  const std::string full(path);
  json* node = &doc;
  std::size_t pos = 0;
  while (pos < path.size()) {
    const std::size_t stop = path.find_first_of(".[", pos);
    const std::string_view key = path.substr(pos, stop == std::string_view::npos ? path.size() - pos : stop - pos);
    if (!key.empty()) {
      if (!node->is_object() || !node->contains(std::string(key))) {
        throw ConfigError(full, "unknown parameter path");
      }
      node = &(*node)[std::string(key)];
    }
    if (stop == std::string_view::npos) break;
    if (path[stop] == '.') {
      pos = stop + 1;
      continue;
    }
    const std::size_t close = path.find(']', stop);
    if (close == std::string_view::npos) throw ConfigError(full, "unbalanced '['");
    std::size_t i = 0;
    try {
      i = std::stoul(std::string(path.substr(stop + 1, close - stop - 1)));
    } catch (const std::exception&) {
      throw ConfigError(full, "array index must be a non-negative integer");
    }
    if (!node->is_array() || i >= node->size()) throw ConfigError(full, "unknown parameter path");
    node = &(*node)[i];
    pos = close + 1;
    if (pos < path.size() && path[pos] == '.') ++pos;
  }
  if (!node->is_number()) throw ConfigError(full, "does not name a numeric field");
  if (node->is_number_integer() && std::floor(value) == value && value >= 0) {
    *node = static_cast<std::uint64_t>(value);
  } else {
    *node = value;
  }
}

}  // namespace qkdsim
