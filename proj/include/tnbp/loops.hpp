#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bp.hpp"
#include "csv.hpp"
#include "network.hpp"
#include "parallel.hpp"

namespace tnbp {

inline constexpr std::size_t kDefaultEnumerationCap = 10000000;

// Edge-induced connected subgraph; closed when every support vertex has degree
// >= 2 in it, otherwise a string whose degree-1 vertices lie in marked regions.
struct GeneralizedLoop {
    std::vector<int> edges;      // ascending edge ids
    std::vector<int> support;    // ascending vertex ids
    std::vector<int> terminals;  // indices of regions holding a degree-1 vertex
    bool closed = true;

    int weight() const { return static_cast<int>(edges.size()); }
    bool touches(const std::vector<int>& verts) const {
        for (int v : verts)
            if (std::binary_search(support.begin(), support.end(), v)) return true;
        return false;
    }
    bool contains_vertex(int v) const { return std::binary_search(support.begin(), support.end(), v); }
    friend bool operator==(const GeneralizedLoop& a, const GeneralizedLoop& b) { return a.edges == b.edges; }
};

inline GeneralizedLoop make_loop(const Graph& g, std::vector<int> edges, const std::vector<std::vector<int>>& regions = {}) {
    std::sort(edges.begin(), edges.end());
    GeneralizedLoop l;
    l.edges = edges;
    std::map<int, int> deg;
    for (int e : edges) {
        ++deg[g.edge(e).u];
        ++deg[g.edge(e).v];
    }
    for (const auto& [v, d] : deg) l.support.push_back(v);
    for (const auto& [v, d] : deg) {
        if (d >= 2) continue;
        l.closed = false;
        for (std::size_t r = 0; r < regions.size(); ++r)
            if (std::find(regions[r].begin(), regions[r].end(), v) != regions[r].end() &&
                std::find(l.terminals.begin(), l.terminals.end(), static_cast<int>(r)) == l.terminals.end())
                l.terminals.push_back(static_cast<int>(r));
    }
    std::sort(l.terminals.begin(), l.terminals.end());
    return l;
}

namespace detail {

// Connected edge subsets grown from their smallest edge (ESU on the line
// graph), pruned by the number of edges still needed to close dangling
// vertices outside the exempt set.
class LoopEnumerator {
public:
    LoopEnumerator(const Graph& g, int max_weight, std::vector<char> exempt, std::size_t cap)
        : g_(g), m_(max_weight), exempt_(std::move(exempt)), cap_(cap), mark_(g.num_edges(), 0),
          deg_(g.num_vertices(), 0), adj_(g.num_edges()) {
        for (const auto& e : g.edges()) {
            for (int x : {e.u, e.v})
                for (const auto& [w, f] : g.incident(x))
                    if (f != e.id) adj_[e.id].push_back(f);
            std::sort(adj_[e.id].begin(), adj_[e.id].end());
        }
    }

    std::vector<std::vector<int>> run() {
        if (m_ < 1) return {};
        for (int r = 0; r < g_.num_edges(); ++r) {
            root_ = r;
            std::vector<int> ext;
            for (int u : adj_[r])
                if (u > r) ext.push_back(u);
            add(r);
            extend(ext);
            remove(r);
        }
        return std::move(out_);
    }

private:
    void bump(int v, int delta) {
        const bool was_bad = deg_[v] == 1 && !exempt_[v];
        deg_[v] += delta;
        const bool is_bad = deg_[v] == 1 && !exempt_[v];
        bad_ += int(is_bad) - int(was_bad);
    }
    void add(int e) {
        sub_.push_back(e);
        ++mark_[e];
        for (int u : adj_[e]) ++mark_[u];
        bump(g_.edge(e).u, 1);
        bump(g_.edge(e).v, 1);
    }
    void remove(int e) {
        sub_.pop_back();
        --mark_[e];
        for (int u : adj_[e]) --mark_[u];
        bump(g_.edge(e).u, -1);
        bump(g_.edge(e).v, -1);
    }

    void extend(std::vector<int> ext) {
        const int k = static_cast<int>(sub_.size());
        if (bad_ == 0) {
            if (out_.size() >= cap_)
                throw Error(ErrorKind::CombinatorialBudgetExceeded, "more than " + std::to_string(cap_) + " excitations");
            out_.push_back(sub_);
        }
        if (k >= m_ || k + (bad_ + 1) / 2 > m_) return;
        while (!ext.empty()) {
            const int w = ext.back();
            ext.pop_back();
            std::vector<int> next = ext;
            for (int u : adj_[w])
                if (u > root_ && mark_[u] == 0) next.push_back(u);
            add(w);
            if (k + 1 + (bad_ + 1) / 2 <= m_) extend(std::move(next));
            remove(w);
        }
    }

    const Graph& g_;
    int m_;
    std::vector<char> exempt_;
    std::size_t cap_;
    std::vector<int> mark_;  // how many chosen edges equal or touch this edge
    std::vector<int> deg_;
    std::vector<std::vector<int>> adj_;
    std::vector<int> sub_;
    int root_ = 0;
    int bad_ = 0;
    std::vector<std::vector<int>> out_;
};

inline void sort_loops(std::vector<GeneralizedLoop>& loops) {
    std::sort(loops.begin(), loops.end(), [](const GeneralizedLoop& a, const GeneralizedLoop& b) {
        if (a.weight() != b.weight()) return a.weight() < b.weight();
        return a.edges < b.edges;
    });
}

}  // namespace detail

// Connected strings that are closed outside the union of `regions`; closed
// loops are included. Deterministic order: by weight, then edge list.
inline std::vector<GeneralizedLoop> enumerate_strings(const Graph& g, const std::vector<std::vector<int>>& regions,
                                                      int max_weight, std::size_t cap = kDefaultEnumerationCap) {
    std::vector<char> exempt(g.num_vertices(), 0);
    for (std::size_t i = 0; i < regions.size(); ++i)
        for (int v : regions[i]) {
            if (v < 0 || v >= g.num_vertices()) throw Error(ErrorKind::RegionMismatch, "region vertex out of range");
            if (exempt[v]) throw Error(ErrorKind::OverlappingRegions, "regions overlap at vertex " + std::to_string(v));
            exempt[v] = 1;
        }
    detail::LoopEnumerator en(g, max_weight, std::move(exempt), cap);
    std::vector<GeneralizedLoop> out;
    for (auto& edges : en.run()) out.push_back(make_loop(g, std::move(edges), regions));
    detail::sort_loops(out);
    return out;
}

inline std::vector<GeneralizedLoop> enumerate_loops(const Graph& g, int max_weight,
                                                    std::size_t cap = kDefaultEnumerationCap) {
    return enumerate_strings(g, {}, max_weight, cap);
}

// ---------------------------------------------------------------------------
// Weights

enum class Normalization {
    Own,   // divide by the local factors of the network the loop is evaluated on
    Base,  // divide by the undecorated local factors
};

// Evaluates normalized excitation weights against a fixed BP background.
class WeightEvaluator {
public:
    WeightEvaluator(const TensorNetwork& tn, const MessageSet& ms) : tn_(tn), ms_(ms) {
        z_.resize(tn.num_vertices());
        scale_.resize(tn.num_vertices());
        for (int v = 0; v < tn.num_vertices(); ++v) {
            z_[v] = local(v, nullptr);
            double s = tn.tensors[v].norm();
            for (const auto& [w, e] : tn.graph.incident(v)) s *= ms.incoming(tn.graph, v, e).norm() / std::abs(ms.sqrt_inner[e]);
            scale_[v] = s;
        }
    }

    const TensorNetwork& network() const { return tn_; }
    const MessageSet& messages() const { return ms_; }
    cplx z(int v) const { return z_[v]; }

    cplx local(int v, const Decoration* dec) const {
        const Tensor* site = dec ? dec->find(v) : nullptr;
        return bp_local_factor(tn_, ms_, v, site);
    }

    // Contraction of the loop support with P on loop edges and normalized
    // incoming messages on all other legs; no division by local factors.
    cplx raw(const GeneralizedLoop& l, const Decoration* dec = nullptr) const {
        std::vector<Tensor> parts;
        std::vector<char> in_loop(tn_.num_edges(), 0);
        for (int e : l.edges) in_loop[e] = 1;
        for (int v : l.support) {
            const Tensor* site = dec ? dec->find(v) : nullptr;
            Tensor t = site ? *site : tn_.tensors[v];
            for (const auto& [w, e] : tn_.graph.incident(v)) {
                if (in_loop[e]) {
                    if (tn_.graph.edge(e).u == v) t = t.relabel(e, kScratchLegBase + e);
                } else {
                    t = contract_pair(t, ms_.normalized_incoming(tn_.graph, v, e));
                }
            }
            parts.push_back(std::move(t));
        }
        for (int e : l.edges) parts.push_back(projector_tensor(tn_.graph, ms_, e, kScratchLegBase + e, e));
        auto [t, ls] = contract_all(std::move(parts));
        return t.value() * std::exp(ls);
    }

    cplx local_product(const GeneralizedLoop& l, const Decoration* dec, Normalization norm) const {
        cplx p = 1.0;
        for (int v : l.support) {
            const bool decorated = dec && dec->find(v) && norm == Normalization::Own;
            const cplx zv = decorated ? local(v, dec) : z_[v];
            if (std::abs(zv) <= 1e-14 * scale_[v])
                throw Error(ErrorKind::ZeroLocalFactor, "z_" + std::to_string(v) + " vanishes");
            p *= zv;
        }
        return p;
    }

    cplx weight(const GeneralizedLoop& l, const Decoration* dec = nullptr, Normalization norm = Normalization::Own) const {
        return raw(l, dec) / local_product(l, dec, norm);
    }

private:
    const TensorNetwork& tn_;
    const MessageSet& ms_;
    std::vector<cplx> z_;
    std::vector<double> scale_;
};

struct ExcitationWeight {
    GeneralizedLoop loop;
    cplx value = 0.0;
    std::string network_tag = "base";
};

inline ExcitationWeight excitation_weight(const TensorNetwork& tn, const MessageSet& ms, const GeneralizedLoop& l,
                                          const Decoration* dec = nullptr, const std::string& tag = "base") {
    WeightEvaluator ev(tn, ms);
    return {l, ev.weight(l, dec), tag};
}

inline std::vector<ExcitationWeight> excitation_weights(const TensorNetwork& tn, const MessageSet& ms,
                                                        const std::vector<GeneralizedLoop>& loops,
                                                        const Decoration* dec = nullptr,
                                                        const std::string& tag = "base") {
    WeightEvaluator ev(tn, ms);
    std::vector<ExcitationWeight> out(loops.size());
    parallel_for(loops.size(), [&](std::size_t i) { out[i] = {loops[i], ev.weight(loops[i], dec), tag}; });
    return out;
}

// ---------------------------------------------------------------------------
// Decay profile

struct DecayRow {
    int weight = 0;
    int count = 0;
    double max_abs = 0.0;
    double c = 0.0;         // -log(max |Z_l|) / |l|
    bool all_zero = false;  // class omitted from fits
};

// One row per loop weight present; even and odd weights are separate classes
// by construction. `zero_floor` decides when a class counts as all-zero.
inline std::vector<DecayRow> loop_decay_profile(const std::vector<ExcitationWeight>& ws, double zero_floor = 0.0) {
    std::map<int, DecayRow> rows;
    for (const auto& w : ws) {
        auto& r = rows[w.loop.weight()];
        r.weight = w.loop.weight();
        ++r.count;
        r.max_abs = std::max(r.max_abs, std::abs(w.value));
    }
    std::vector<DecayRow> out;
    for (auto& [k, r] : rows) {
        r.all_zero = r.max_abs <= zero_floor;
        r.c = r.all_zero ? std::numeric_limits<double>::infinity() : -std::log(r.max_abs) / r.weight;
        out.push_back(r);
    }
    return out;
}

// Smallest c over the classes of one parity with nonzero weight.
inline double decay_rate(const std::vector<DecayRow>& rows, int parity) {
    double c = std::numeric_limits<double>::infinity();
    for (const auto& r : rows)
        if (r.weight % 2 == parity && !r.all_zero) c = std::min(c, r.c);
    return c;
}

inline std::string terminals_field(const GeneralizedLoop& l) {
    std::string s;
    for (std::size_t i = 0; i < l.terminals.size(); ++i) s += (i ? ";" : "") + std::to_string(l.terminals[i]);
    return s;
}

inline void write_loops_csv(CsvWriter& csv, const std::vector<ExcitationWeight>& ws) {
    csv.header({"loop_id", "weight", "kind", "terminals", "re", "im", "abs", "c_estimate"});
    for (std::size_t i = 0; i < ws.size(); ++i) {
        const auto& w = ws[i];
        const double a = std::abs(w.value);
        csv.row({std::to_string(i), std::to_string(w.loop.weight()), w.loop.closed ? "closed" : "string",
                 terminals_field(w.loop), fmt(w.value.real()), fmt(w.value.imag()), fmt(a),
                 a > 0 ? fmt(-std::log(a) / w.loop.weight()) : "inf"});
    }
}

inline void write_decay_csv(CsvWriter& csv, const std::vector<DecayRow>& rows) {
    csv.header({"weight", "parity", "count", "max_abs", "c_estimate", "note"});
    for (const auto& r : rows)
        csv.row({std::to_string(r.weight), r.weight % 2 ? "odd" : "even", std::to_string(r.count), fmt(r.max_abs),
                 r.all_zero ? "" : fmt(r.c), r.all_zero ? "all-zero class omitted" : ""});
}

}  // namespace tnbp
