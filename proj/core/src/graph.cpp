#include "coalesce/graph.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>

#include "coalesce/errors.hpp"
#include "json_count.hpp"
#include "coalesce/rng.hpp"

namespace coalesce {

std::string to_string(GraphFamily f) {
  switch (f) {
    case GraphFamily::Complete: return "complete";
    case GraphFamily::Cycle: return "cycle";
    case GraphFamily::Path: return "path";
    case GraphFamily::Star: return "star";
    case GraphFamily::Torus: return "torus";
    case GraphFamily::RandomRegular: return "random_regular";
    case GraphFamily::ErdosRenyiGiant: return "erdos_renyi_giant";
  }
  return "unknown";
}

GraphFamily graph_family_from_string(const std::string& name) {
  for (auto f : {GraphFamily::Complete, GraphFamily::Cycle, GraphFamily::Path, GraphFamily::Star,
                 GraphFamily::Torus, GraphFamily::RandomRegular, GraphFamily::ErdosRenyiGiant}) {
    if (to_string(f) == name) return f;
  }
  throw ConfigError("unknown graph family \"" + name + "\"");
}

void GraphSpec::validate() const {
  auto fail = [this](const std::string& why) {
    throw std::invalid_argument("GraphSpec(" + to_string(family) + "): " + why);
  };
  switch (family) {
    case GraphFamily::Complete:
    case GraphFamily::Path:
    case GraphFamily::Star:
      if (n < 2) fail("n must be >= 2");
      break;
    case GraphFamily::Cycle:
      if (n < 3) fail("n must be >= 3 for a simple cycle");
      break;
    case GraphFamily::Torus:
      if (d < 1) fail("d must be >= 1");
      if (m < 2) fail("m must be >= 2");
      break;
    case GraphFamily::RandomRegular:
      if (n < 2) fail("n must be >= 2");
      if (d < 1 || d >= n) fail("degree must lie in [1, n)");
      if ((d * n) % 2 != 0) fail("d * n must be even");
      break;
    case GraphFamily::ErdosRenyiGiant:
      if (n < 2) fail("n must be >= 2");
      if (!(p > 0.0 && p <= 1.0)) fail("p must lie in (0, 1]");
      break;
  }
}

std::string GraphSpec::label() const {
  switch (family) {
    case GraphFamily::Torus: return "torus(" + std::to_string(d) + "," + std::to_string(m) + ")";
    case GraphFamily::RandomRegular:
      return "random_regular(" + std::to_string(n) + "," + std::to_string(d) + ")";
    case GraphFamily::ErdosRenyiGiant:
      return "erdos_renyi_giant(" + std::to_string(n) + "," + std::to_string(p) + ")";
    default: return to_string(family) + "(" + std::to_string(n) + ")";
  }
}

nlohmann::json graph_spec_to_json(const GraphSpec& spec) {
  nlohmann::json j{{"family", to_string(spec.family)}};
  switch (spec.family) {
    case GraphFamily::Torus:
      j["d"] = spec.d;
      j["m"] = spec.m;
      break;
    case GraphFamily::RandomRegular:
      j["n"] = spec.n;
      j["d"] = spec.d;
      j["seed"] = spec.seed;
      break;
    case GraphFamily::ErdosRenyiGiant:
      j["n"] = spec.n;
      j["p"] = spec.p;
      j["seed"] = spec.seed;
      break;
    default: j["n"] = spec.n;
  }
  return j;
}

GraphSpec graph_spec_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("family") || !doc["family"].is_string()) {
    throw ConfigError("graph spec must be an object with a string \"family\"");
  }
  GraphSpec spec;
  spec.family = graph_family_from_string(doc["family"].get<std::string>());
  for (const auto& [key, value] : doc.items()) {
    if (key == "family") continue;
    if (key == "n" || key == "d" || key == "m" || key == "seed") {
      if (!detail::is_count(value)) throw ConfigError("graph spec: \"" + key + "\" must be a nonnegative integer");
      if (key == "n") spec.n = value.get<std::size_t>();
      if (key == "d") spec.d = value.get<std::size_t>();
      if (key == "m") spec.m = value.get<std::size_t>();
      if (key == "seed") spec.seed = value.get<std::uint64_t>();
    } else if (key == "p") {
      if (!value.is_number()) throw ConfigError("graph spec: \"p\" must be a number");
      spec.p = value.get<double>();
    } else {
      throw ConfigError("graph spec: unknown field \"" + key + "\"");
    }
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return spec;
}

// ---------------------------------------------------------------------------

Graph::Graph(std::vector<std::vector<State>> adjacency) : adj_(std::move(adjacency)) {
  const std::size_t n = adj_.size();
  if (n < 2) throw std::invalid_argument("Graph: need at least two vertices");
  std::size_t half_edges = 0;
  for (State v = 0; v < n; ++v) {
    auto& nb = adj_[v];
    std::sort(nb.begin(), nb.end());
    if (std::adjacent_find(nb.begin(), nb.end()) != nb.end()) {
      throw std::invalid_argument("Graph: multi-edge at vertex " + std::to_string(v));
    }
    for (State u : nb) {
      if (u == v) throw std::invalid_argument("Graph: self-loop at vertex " + std::to_string(v));
      if (u >= n) throw std::invalid_argument("Graph: neighbour out of range");
    }
    half_edges += nb.size();
  }
  for (State v = 0; v < n; ++v) {
    for (State u : adj_[v]) {
      if (!std::binary_search(adj_[u].begin(), adj_[u].end(), v)) {
        throw std::invalid_argument("Graph: adjacency is not symmetric");
      }
    }
  }
  // Connectivity.
  std::vector<char> seen(n, 0);
  std::vector<State> stack{0};
  seen[0] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    const State v = stack.back();
    stack.pop_back();
    for (State u : adj_[v]) {
      if (!seen[u]) {
        seen[u] = 1;
        ++count;
        stack.push_back(u);
      }
    }
  }
  if (count != n) throw std::invalid_argument("Graph: not connected");
  edges_ = half_edges / 2;
}

bool Graph::is_regular() const noexcept {
  return std::all_of(adj_.begin(), adj_.end(),
                     [&](const auto& nb) { return nb.size() == adj_.front().size(); });
}

std::vector<std::pair<State, State>> Graph::edges() const {
  std::vector<std::pair<State, State>> out;
  out.reserve(edges_);
  for (State v = 0; v < adj_.size(); ++v) {
    for (State u : adj_[v]) {
      if (v < u) out.emplace_back(v, u);
    }
  }
  return out;
}

namespace {

using Adjacency = std::vector<std::vector<State>>;

void add_edge(Adjacency& adj, State u, State v) {
  adj[u].push_back(v);
  adj[v].push_back(u);
}

Adjacency torus_adjacency(std::size_t d, std::size_t m) {
  std::size_t n = 1;
  for (std::size_t i = 0; i < d; ++i) n *= m;
  Adjacency adj(n);
  std::size_t stride = 1;
  for (std::size_t axis = 0; axis < d; ++axis) {
    for (std::size_t v = 0; v < n; ++v) {
      const std::size_t coord = (v / stride) % m;
      const std::size_t next = coord + 1 == m ? v - coord * stride : v + stride;
      // For m == 2 the two directions coincide; keep a single edge.
      if (m == 2 && coord == 1) continue;
      add_edge(adj, static_cast<State>(v), static_cast<State>(next));
    }
    stride *= m;
  }
  return adj;
}

std::optional<Adjacency> try_pairing(std::size_t n, std::size_t d, Philox& rng) {
  std::vector<State> stubs;
  stubs.reserve(n * d);
  for (State v = 0; v < n; ++v) {
    for (std::size_t i = 0; i < d; ++i) stubs.push_back(v);
  }
  for (std::size_t i = stubs.size(); i > 1; --i) {
    std::swap(stubs[i - 1], stubs[rng.below(i)]);
  }
  Adjacency adj(n);
  std::set<std::pair<State, State>> seen;
  for (std::size_t i = 0; i < stubs.size(); i += 2) {
    State u = stubs[i], v = stubs[i + 1];
    if (u == v) return std::nullopt;
    if (u > v) std::swap(u, v);
    if (!seen.insert({u, v}).second) return std::nullopt;
    add_edge(adj, u, v);
  }
  return adj;
}

Adjacency largest_component(const Adjacency& adj) {
  const std::size_t n = adj.size();
  std::vector<int> comp(n, -1);
  std::vector<std::size_t> sizes;
  for (State s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    const int id = static_cast<int>(sizes.size());
    std::size_t count = 0;
    std::vector<State> stack{s};
    comp[s] = id;
    while (!stack.empty()) {
      const State v = stack.back();
      stack.pop_back();
      ++count;
      for (State u : adj[v]) {
        if (comp[u] < 0) {
          comp[u] = id;
          stack.push_back(u);
        }
      }
    }
    sizes.push_back(count);
  }
  // Ties go to the component containing the smallest vertex.
  const int best = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  std::vector<State> relabel(n, 0);
  State next = 0;
  for (State v = 0; v < n; ++v) {
    if (comp[v] == best) relabel[v] = next++;
  }
  Adjacency out(next);
  for (State v = 0; v < n; ++v) {
    if (comp[v] != best) continue;
    for (State u : adj[v]) out[relabel[v]].push_back(relabel[u]);
  }
  return out;
}

}  // namespace

Graph build_graph(const GraphSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n;
  Adjacency adj;
  switch (spec.family) {
    case GraphFamily::Complete:
      adj.resize(n);
      for (State u = 0; u < n; ++u) {
        for (State v = u + 1; v < n; ++v) add_edge(adj, u, v);
      }
      break;
    case GraphFamily::Cycle:
      adj.resize(n);
      for (State u = 0; u < n; ++u) add_edge(adj, u, static_cast<State>((u + 1) % n));
      break;
    case GraphFamily::Path:
      adj.resize(n);
      for (State u = 0; u + 1 < n; ++u) add_edge(adj, u, u + 1);
      break;
    case GraphFamily::Star:
      adj.resize(n);
      for (State u = 1; u < n; ++u) add_edge(adj, 0, u);
      break;
    case GraphFamily::Torus:
      adj = torus_adjacency(spec.d, spec.m);
      break;
    case GraphFamily::RandomRegular: {
      Philox rng(spec.seed, 0);
      std::optional<Adjacency> found;
      for (int attempt = 0; attempt < kRandomRegularRetries && !found; ++attempt) {
        found = try_pairing(n, spec.d, rng);
        if (found) {
          try {
            return Graph(*found);
          } catch (const std::invalid_argument&) {
            found.reset();  // disconnected draw; retry
          }
        }
      }
      throw BudgetError("random_regular: no simple connected pairing within " +
                        std::to_string(kRandomRegularRetries) + " attempts");
    }
    case GraphFamily::ErdosRenyiGiant: {
      Philox rng(spec.seed, 0);
      Adjacency full(n);
      for (State u = 0; u < n; ++u) {
        for (State v = u + 1; v < n; ++v) {
          if (rng.uniform() < spec.p) add_edge(full, u, v);
        }
      }
      adj = largest_component(full);
      if (adj.size() < 2) throw BudgetError("erdos_renyi_giant: giant component has fewer than two vertices");
      break;
    }
  }
  return Graph(std::move(adj));
}

RateGenerator walk_generator(const Graph& g) {
  std::vector<Transition> trans;
  trans.reserve(2 * g.edge_count());
  for (State v = 0; v < g.vertex_count(); ++v) {
    const double r = 1.0 / static_cast<double>(g.degree(v));
    for (State u : g.neighbors(v)) trans.push_back({v, u, r});
  }
  return RateGenerator::from_transitions(g.vertex_count(), trans);
}

double degree_ratio(const Graph& g) {
  std::size_t max_deg = 0, total = 0;
  for (State v = 0; v < g.vertex_count(); ++v) {
    max_deg = std::max(max_deg, g.degree(v));
    total += g.degree(v);
  }
  return static_cast<double>(max_deg) * static_cast<double>(g.vertex_count()) / static_cast<double>(total);
}

nlohmann::json graph_to_json(const Graph& g) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [u, v] : g.edges()) edges.push_back({u, v});
  return {{"vertices", g.vertex_count()}, {"edges", std::move(edges)}};
}

}  // namespace coalesce
