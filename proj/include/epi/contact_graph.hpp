#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "epi/rng.hpp"

namespace epi {

// Parameters of the Polya (generalized negative binomial) contact distribution:
// mean alpha, variance alpha + alpha^2/kappa. Small kappa means heavy tails,
// i.e. super-spreaders.
struct DegreeParams {
  double alpha = 10.0;
  double kappa = 1.0;
  int n_nodes = 0;

  void validate() const {
    if (!(alpha > 0.0)) throw std::invalid_argument("DegreeParams: alpha must be > 0");
    if (!(kappa > 0.0)) throw std::invalid_argument("DegreeParams: kappa must be > 0");
    if (n_nodes < 1) throw std::invalid_argument("DegreeParams: n_nodes must be >= 1");
  }
};

struct DegreeSample {
  std::vector<int> degrees;
  std::int64_t cap_events = 0;  // draws truncated to n_nodes - 1
};

// Gamma-Poisson mixture: rate ~ Gamma(shape=kappa, scale=alpha/kappa), then
// Poisson(rate). Exact for the Polya distribution and needs no special
// functions. Degrees are capped at n_nodes - 1 (simple-graph bound).
inline DegreeSample sample_degrees(const DegreeParams& params, Rng& rng) {
  params.validate();
  DegreeSample out;
  out.degrees.resize(params.n_nodes);
  std::gamma_distribution<double> gamma_dist(params.kappa, params.alpha / params.kappa);
  const int cap = params.n_nodes - 1;
  for (int j = 0; j < params.n_nodes; ++j) {
    const double rate = gamma_dist(rng);
    long draw = 0;
    if (rate > 0.0) {
      std::poisson_distribution<long> pois(rate);
      draw = pois(rng);
    }
    if (draw > cap) {
      draw = cap;
      ++out.cap_events;
    }
    out.degrees[j] = static_cast<int>(draw);
  }
  return out;
}

inline DegreeSample sample_degrees(const DegreeParams& params, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return sample_degrees(params, rng);
}

// Simple undirected contact graph. Invariants: adjacency is symmetric, has no
// self-loops and no duplicate edges, and realized_degrees[i] == adjacency[i].size().
struct ContactGraph {
  int n_nodes = 0;
  std::vector<std::vector<std::int32_t>> adjacency;
  std::vector<std::int32_t> realized_degrees;

  // Construction bookkeeping.
  std::int64_t erased_pairs = 0;   // self-loops + duplicate pairings dropped
  int odd_stub_added = 0;          // 1 if a stub was added to fix an odd sum
  std::int64_t cap_events = 0;     // degree draws truncated by the simple-graph bound
  std::uint64_t seed = 0;

  std::int64_t n_edges() const {
    std::int64_t twice = 0;
    for (auto d : realized_degrees) twice += d;
    return twice / 2;
  }

  // Exhaustive invariant check; test support.
  void check() const {
    if (static_cast<int>(adjacency.size()) != n_nodes ||
        static_cast<int>(realized_degrees.size()) != n_nodes)
      throw std::logic_error("ContactGraph: size mismatch");
    for (int u = 0; u < n_nodes; ++u) {
      if (realized_degrees[u] != static_cast<std::int32_t>(adjacency[u].size()))
        throw std::logic_error("ContactGraph: degree mismatch");
      for (std::size_t a = 0; a < adjacency[u].size(); ++a) {
        const std::int32_t v = adjacency[u][a];
        if (v < 0 || v >= n_nodes) throw std::logic_error("ContactGraph: neighbor out of range");
        if (v == u) throw std::logic_error("ContactGraph: self-loop");
        if (a > 0 && adjacency[u][a - 1] == v)
          throw std::logic_error("ContactGraph: duplicate edge");
        if (!std::binary_search(adjacency[v].begin(), adjacency[v].end(), u))
          throw std::logic_error("ContactGraph: asymmetric edge");
      }
    }
  }
};

// Configuration model (Molloy-Reed): one stub per unit of degree, stubs paired
// uniformly at random. An odd stub total is fixed by adding one stub to a
// uniformly chosen node. Self-loops and duplicate pairings are erased, not
// rewired; the loss is counted in erased_pairs.
inline ContactGraph build_graph(const std::vector<int>& degrees, Rng& rng) {
  ContactGraph g;
  g.n_nodes = static_cast<int>(degrees.size());
  g.adjacency.assign(g.n_nodes, {});
  g.realized_degrees.assign(g.n_nodes, 0);

  std::vector<std::int32_t> stubs;
  std::int64_t total = 0;
  for (int j = 0; j < g.n_nodes; ++j) {
    if (degrees[j] < 0) throw std::invalid_argument("build_graph: negative degree");
    total += degrees[j];
  }
  stubs.reserve(total + 1);
  for (int j = 0; j < g.n_nodes; ++j)
    stubs.insert(stubs.end(), degrees[j], static_cast<std::int32_t>(j));
  if (total % 2 == 1) {
    std::uniform_int_distribution<int> pick(0, g.n_nodes - 1);
    stubs.push_back(static_cast<std::int32_t>(pick(rng)));
    g.odd_stub_added = 1;
  }
  std::shuffle(stubs.begin(), stubs.end(), rng);

  std::unordered_set<std::uint64_t> seen;
  seen.reserve(stubs.size());
  for (std::size_t s = 0; s + 1 < stubs.size(); s += 2) {
    const std::int32_t u = stubs[s], v = stubs[s + 1];
    if (u == v) {
      ++g.erased_pairs;
      continue;
    }
    const std::uint64_t key =
        (static_cast<std::uint64_t>(std::min(u, v)) << 32) | static_cast<std::uint32_t>(std::max(u, v));
    if (!seen.insert(key).second) {
      ++g.erased_pairs;
      continue;
    }
    g.adjacency[u].push_back(v);
    g.adjacency[v].push_back(u);
  }
  for (int j = 0; j < g.n_nodes; ++j) {
    std::sort(g.adjacency[j].begin(), g.adjacency[j].end());
    g.realized_degrees[j] = static_cast<std::int32_t>(g.adjacency[j].size());
  }
  return g;
}

inline ContactGraph build_graph(const std::vector<int>& degrees, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  ContactGraph g = build_graph(degrees, rng);
  g.seed = seed;
  return g;
}

inline ContactGraph sample_graph(const DegreeParams& params, Rng& rng) {
  DegreeSample ds = sample_degrees(params, rng);
  ContactGraph g = build_graph(ds.degrees, rng);
  g.cap_events = ds.cap_events;
  return g;
}

inline ContactGraph sample_graph(const DegreeParams& params, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  ContactGraph g = sample_graph(params, rng);
  g.seed = seed;
  return g;
}

// Edge-list text format: header line "# n_nodes <N> seed <S>", then one
// "i j" pair per line with i < j.
inline void write_edge_list(const ContactGraph& g, std::ostream& os) {
  os << "# n_nodes " << g.n_nodes << " seed " << g.seed << '\n';
  for (int u = 0; u < g.n_nodes; ++u)
    for (std::int32_t v : g.adjacency[u])
      if (u < v) os << u << ' ' << v << '\n';
}

inline ContactGraph read_edge_list(std::istream& is) {
  std::string hash, key_n, key_seed;
  int n = 0;
  std::uint64_t seed = 0;
  if (!(is >> hash >> key_n >> n >> key_seed >> seed) || hash != "#" || key_n != "n_nodes")
    throw std::runtime_error("edge list: bad header");
  ContactGraph g;
  g.n_nodes = n;
  g.seed = seed;
  g.adjacency.assign(n, {});
  int u = 0, v = 0;
  while (is >> u >> v) {
    if (u < 0 || v < 0 || u >= n || v >= n || u == v)
      throw std::runtime_error("edge list: bad edge");
    g.adjacency[u].push_back(v);
    g.adjacency[v].push_back(u);
  }
  g.realized_degrees.assign(n, 0);
  for (int j = 0; j < n; ++j) {
    std::sort(g.adjacency[j].begin(), g.adjacency[j].end());
    g.realized_degrees[j] = static_cast<std::int32_t>(g.adjacency[j].size());
  }
  return g;
}

}  // namespace epi
