#include "coalesce/chain_json.hpp"

#include <fstream>

#include "coalesce/errors.hpp"
#include "json_count.hpp"

namespace coalesce {

nlohmann::json generator_to_json(const RateGenerator& q) {
  nlohmann::json triplets = nlohmann::json::array();
  for (const auto& t : q.transitions()) triplets.push_back({t.from, t.to, t.rate});
  return {{"n", q.size()}, {"triplets", std::move(triplets)}};
}

RateGenerator generator_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("n") || !doc.contains("triplets")) {
    throw ConfigError("generator JSON must be an object with \"n\" and \"triplets\"");
  }
  for (const auto& [key, _] : doc.items()) {
    if (key != "n" && key != "triplets") throw ConfigError("generator JSON: unknown field \"" + key + "\"");
  }
  if (!detail::is_count(doc["n"])) throw ConfigError("generator JSON: \"n\" must be a positive integer");
  const auto n = doc["n"].get<std::size_t>();
  std::vector<Transition> trans;
  for (const auto& t : doc["triplets"]) {
    if (!t.is_array() || t.size() != 3 || !detail::is_count(t[0]) || !detail::is_count(t[1]) ||
        !t[2].is_number()) {
      throw ConfigError("generator JSON: each triplet must be [x, y, rate]");
    }
    trans.push_back({t[0].get<State>(), t[1].get<State>(), t[2].get<double>()});
  }
  try {
    return RateGenerator::from_transitions(n, trans);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("generator JSON: ") + e.what());
  }
}

RateGenerator load_generator(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open generator file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("generator file " + path.string() + ": " + e.what());
  }
  return generator_from_json(doc);
}

void save_generator(const RateGenerator& q, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << generator_to_json(q).dump(2) << '\n';
}

}  // namespace coalesce
