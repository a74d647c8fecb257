#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "coalesce/chain.hpp"

namespace coalesce {

enum class GraphFamily { Complete, Cycle, Path, Star, Torus, RandomRegular, ErdosRenyiGiant };

std::string to_string(GraphFamily f);
GraphFamily graph_family_from_string(const std::string& name);

struct GraphSpec {
  GraphFamily family = GraphFamily::Complete;
  std::size_t n = 2;    // vertex count (complete, cycle, path, star, random_regular, erdos_renyi)
  std::size_t d = 1;    // torus dimension or regular degree
  std::size_t m = 2;    // torus side length
  double p = 0.0;       // edge probability (erdos_renyi_giant)
  std::uint64_t seed = 0;

  static GraphSpec complete(std::size_t n) { return {GraphFamily::Complete, n}; }
  static GraphSpec cycle(std::size_t n) { return {GraphFamily::Cycle, n}; }
  static GraphSpec path(std::size_t n) { return {GraphFamily::Path, n}; }
  static GraphSpec star(std::size_t n) { return {GraphFamily::Star, n}; }
  static GraphSpec torus(std::size_t d, std::size_t m) { return {GraphFamily::Torus, 0, d, m}; }
  static GraphSpec random_regular(std::size_t n, std::size_t d, std::uint64_t seed) {
    return {GraphFamily::RandomRegular, n, d, 2, 0.0, seed};
  }
  static GraphSpec erdos_renyi_giant(std::size_t n, double p, std::uint64_t seed) {
    return {GraphFamily::ErdosRenyiGiant, n, 1, 2, p, seed};
  }

  /// Throws std::invalid_argument when parameters are out of range.
  void validate() const;
  std::string label() const;
};

nlohmann::json graph_spec_to_json(const GraphSpec& spec);
GraphSpec graph_spec_from_json(const nlohmann::json& doc);

/// Simple connected undirected graph with sorted adjacency lists.
class Graph {
 public:
  explicit Graph(std::vector<std::vector<State>> adjacency);

  std::size_t vertex_count() const noexcept { return adj_.size(); }
  std::size_t edge_count() const noexcept { return edges_; }
  std::size_t degree(State v) const noexcept { return adj_[v].size(); }
  const std::vector<State>& neighbors(State v) const noexcept { return adj_[v]; }
  bool is_regular() const noexcept;

  /// Edges (u, v) with u < v in lexicographic order.
  std::vector<std::pair<State, State>> edges() const;

 private:
  std::vector<std::vector<State>> adj_;
  std::size_t edges_ = 0;
};

inline constexpr int kRandomRegularRetries = 1000;

Graph build_graph(const GraphSpec& spec);

/// Rate-1 walk: q(x, y) = 1 / deg(x) for every neighbour y.
RateGenerator walk_generator(const Graph& g);

/// max degree / average degree.
double degree_ratio(const Graph& g);

/// {"vertices": n, "edges": [[u, v], ...]}
nlohmann::json graph_to_json(const Graph& g);

}  // namespace coalesce
