#pragma once

// Budgeted breadth-first closure of a step relation, shared by the
// combinator systems and the labelled development calculus.  Nodes are
// deduplicated by structural equality; self-loop edges are kept (they are
// cycle evidence, not progress).

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

namespace cklab {

struct SearchBudget {
  std::size_t max_nodes = 50000;
  int max_term_size = 200;
};

template <class T, class Info>
struct StepTo {
  T to;
  Info info;
  bool self_loop = false;
};

template <class T, class Info, class Hash, class Eq>
struct Graph {
  struct Edge {
    std::size_t src, dst;
    Info info;
    bool self_loop = false;
  };

  T root;
  std::vector<T> nodes;                       // BFS discovery order, root first
  std::unordered_map<T, std::size_t, Hash, Eq> index;
  std::vector<Edge> edges;
  std::vector<std::vector<std::size_t>> out;  // node -> edge indices
  std::vector<std::ptrdiff_t> parent_edge;    // discovery tree, -1 at root
  std::vector<char> expanded;                 // reduct set known for this node
  bool complete = true;                       // full reduct closure within budget

  explicit Graph(T r) : root(r) {
    nodes.push_back(r);
    index.emplace(r, 0);
    out.emplace_back();
    parent_edge.push_back(-1);
    expanded.push_back(0);
  }

  // Path of (edge, node) pairs from the root to node i.
  std::vector<std::size_t> path_edges(std::size_t i) const {
    std::vector<std::size_t> rev;
    while (parent_edge[i] >= 0) {
      std::size_t e = static_cast<std::size_t>(parent_edge[i]);
      rev.push_back(e);
      i = edges[e].src;
    }
    return {rev.rbegin(), rev.rend()};
  }
};

// Incremental BFS expansion; StepFn: const std::vector<StepTo<T,Info>>& (const T&).
template <class T, class Info, class Hash, class Eq, class StepFn, class SizeFn>
class GraphBuilder {
 public:
  using G = Graph<T, Info, Hash, Eq>;

  GraphBuilder(T root, StepFn steps, SizeFn size, SearchBudget budget)
      : g_(root), steps_(steps), size_(size), budget_(budget) {
    frontier_.push_back(0);
  }

  // Expands one node; returns the indices of newly discovered nodes.
  // Empty result with done()==false means the node had no new targets.
  std::vector<std::size_t> expand_one() {
    std::vector<std::size_t> fresh;
    if (frontier_.empty()) return fresh;
    std::size_t i = frontier_.front();
    frontier_.pop_front();
    g_.expanded[i] = 1;
    for (const auto& st : steps_(g_.nodes[i])) {
      if (size_(st.to) > budget_.max_term_size) {
        g_.complete = false;  // reduct dropped
        continue;
      }
      auto it = g_.index.find(st.to);
      std::size_t j;
      if (it != g_.index.end()) {
        j = it->second;
      } else {
        if (g_.nodes.size() >= budget_.max_nodes) {
          g_.complete = false;
          continue;
        }
        j = g_.nodes.size();
        g_.nodes.push_back(st.to);
        g_.index.emplace(st.to, j);
        g_.out.emplace_back();
        g_.parent_edge.push_back(-1);
        g_.expanded.push_back(0);
        frontier_.push_back(j);
        fresh.push_back(j);
      }
      std::size_t e = g_.edges.size();
      g_.edges.push_back({i, j, st.info, st.self_loop});
      g_.out[i].push_back(e);
      if (g_.parent_edge[j] < 0 && j != 0 && !st.self_loop)
        g_.parent_edge[j] = static_cast<std::ptrdiff_t>(e);
    }
    return fresh;
  }

  void run() {
    while (!done()) expand_one();
  }

  bool done() const { return frontier_.empty(); }
  G& graph() { return g_; }
  const G& graph() const { return g_; }

 private:
  G g_;
  StepFn steps_;
  SizeFn size_;
  SearchBudget budget_;
  std::deque<std::size_t> frontier_;
};

// Cycle detection over a (possibly partial) graph.  Returns a node sequence
// c0, c1, ..., c0 describing one cycle, or nullopt if the graph is acyclic.
template <class G>
inline std::optional<std::vector<std::size_t>> find_cycle(const G& g) {
  enum : std::uint8_t { White, Grey, Black };
  std::vector<std::uint8_t> color(g.nodes.size(), White);
  std::vector<std::size_t> stack;

  // iterative DFS keeping the grey path in `stack`
  struct Frame {
    std::size_t node;
    std::size_t next_edge = 0;
  };
  for (std::size_t s = 0; s < g.nodes.size(); ++s) {
    if (color[s] != White) continue;
    std::vector<Frame> frames{{s}};
    color[s] = Grey;
    stack.push_back(s);
    while (!frames.empty()) {
      Frame& f = frames.back();
      if (f.next_edge < g.out[f.node].size()) {
        const auto& e = g.edges[g.out[f.node][f.next_edge++]];
        if (e.self_loop || e.dst == f.node) return std::vector<std::size_t>{f.node, f.node};
        if (color[e.dst] == Grey) {
          std::vector<std::size_t> cyc;
          auto it = stack.begin();
          while (*it != e.dst) ++it;
          cyc.assign(it, stack.end());
          cyc.push_back(e.dst);
          return cyc;
        }
        if (color[e.dst] == White) {
          color[e.dst] = Grey;
          stack.push_back(e.dst);
          frames.push_back({e.dst});
        }
      } else {
        color[f.node] = Black;
        stack.pop_back();
        frames.pop_back();
      }
    }
  }
  return std::nullopt;
}

}  // namespace cklab
