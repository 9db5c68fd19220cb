#pragma once

#include <algorithm>
#include <deque>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace tnbp {

struct Edge {
    int id = 0;
    int u = 0;
    int v = 0;

    int other(int w) const { return w == u ? v : u; }
};

// Simple undirected graph on vertices 0..n-1 with edge ids 0..E-1.
class Graph {
public:
    Graph() = default;

    Graph(int n, const std::vector<std::pair<int, int>>& edges) : n_(n), adj_(n) {
        if (n < 0) throw Error(ErrorKind::InvalidNetwork, "negative vertex count");
        for (const auto& [a, b] : edges) add_edge(a, b);
    }

    int add_edge(int a, int b) {
        if (a < 0 || b < 0 || a >= n_ || b >= n_)
            throw Error(ErrorKind::InvalidNetwork, "edge (" + std::to_string(a) + "," + std::to_string(b) + ") out of range");
        if (a == b) throw Error(ErrorKind::InvalidNetwork, "self-loop at vertex " + std::to_string(a));
        if (edge_between(a, b) >= 0)
            throw Error(ErrorKind::InvalidNetwork, "parallel edge between " + std::to_string(a) + " and " + std::to_string(b));
        const int id = static_cast<int>(edges_.size());
        edges_.push_back({id, std::min(a, b), std::max(a, b)});
        adj_[a].push_back({b, id});
        adj_[b].push_back({a, id});
        return id;
    }

    int num_vertices() const { return n_; }
    int num_edges() const { return static_cast<int>(edges_.size()); }
    const std::vector<Edge>& edges() const { return edges_; }
    const Edge& edge(int e) const { return edges_.at(e); }

    // (neighbour, edge id) pairs in insertion order.
    const std::vector<std::pair<int, int>>& incident(int v) const { return adj_.at(v); }
    int degree(int v) const { return static_cast<int>(adj_.at(v).size()); }

    int max_degree() const {
        int d = 0;
        for (int v = 0; v < n_; ++v) d = std::max(d, degree(v));
        return d;
    }

    int edge_between(int a, int b) const {
        for (const auto& [w, e] : adj_.at(a))
            if (w == b) return e;
        return -1;
    }

    std::vector<int> neighbors(int v) const {
        std::vector<int> out;
        for (const auto& [w, e] : adj_.at(v)) out.push_back(w);
        return out;
    }

    friend bool operator==(const Graph& a, const Graph& b) {
        if (a.n_ != b.n_ || a.edges_.size() != b.edges_.size()) return false;
        for (std::size_t i = 0; i < a.edges_.size(); ++i)
            if (a.edges_[i].u != b.edges_[i].u || a.edges_[i].v != b.edges_[i].v) return false;
        return true;
    }

private:
    int n_ = 0;
    std::vector<Edge> edges_;
    std::vector<std::vector<std::pair<int, int>>> adj_;
};

inline constexpr int kUnreachable = std::numeric_limits<int>::max();

// Multi-source BFS distance between two vertex sets; kUnreachable when disconnected.
inline int graph_distance(const Graph& g, const std::vector<int>& a, const std::vector<int>& b) {
    if (a.empty() || b.empty()) throw Error(ErrorKind::InvalidInput, "graph_distance needs nonempty sets");
    std::vector<int> dist(g.num_vertices(), -1);
    std::deque<int> q;
    for (int v : a) {
        if (v < 0 || v >= g.num_vertices()) throw Error(ErrorKind::InvalidInput, "vertex out of range");
        if (dist[v] < 0) {
            dist[v] = 0;
            q.push_back(v);
        }
    }
    while (!q.empty()) {
        const int v = q.front();
        q.pop_front();
        for (const auto& [w, e] : g.incident(v))
            if (dist[w] < 0) {
                dist[w] = dist[v] + 1;
                q.push_back(w);
            }
    }
    int best = kUnreachable;
    for (int v : b) {
        if (v < 0 || v >= g.num_vertices()) throw Error(ErrorKind::InvalidInput, "vertex out of range");
        if (dist[v] >= 0) best = std::min(best, dist[v]);
    }
    return best;
}

// Connectivity of the subgraph formed by an edge subset.
inline bool edges_connected(const Graph& g, const std::vector<int>& edge_ids) {
    if (edge_ids.empty()) return true;
    std::vector<int> parent(g.num_vertices());
    for (int i = 0; i < g.num_vertices(); ++i) parent[i] = i;
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (int e : edge_ids) parent[find(g.edge(e).u)] = find(g.edge(e).v);
    const int root = find(g.edge(edge_ids[0]).u);
    for (int e : edge_ids)
        if (find(g.edge(e).u) != root) return false;
    return true;
}

// Connectivity of the vertex-induced subgraph on a sorted vertex set.
inline bool induced_connected(const Graph& g, const std::vector<int>& verts) {
    if (verts.empty()) return true;
    std::vector<char> in(g.num_vertices(), 0), seen(g.num_vertices(), 0);
    for (int v : verts) in[v] = 1;
    std::vector<int> stack{verts[0]};
    seen[verts[0]] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (const auto& [w, e] : g.incident(v))
            if (in[w] && !seen[w]) {
                seen[w] = 1;
                ++count;
                stack.push_back(w);
            }
    }
    return count == verts.size();
}

// Edge ids of the vertex-induced subgraph, ascending.
inline std::vector<int> induced_edges(const Graph& g, const std::vector<int>& verts) {
    std::vector<char> in(g.num_vertices(), 0);
    for (int v : verts) in[v] = 1;
    std::vector<int> out;
    for (const auto& e : g.edges())
        if (in[e.u] && in[e.v]) out.push_back(e.id);
    return out;
}

}  // namespace tnbp
