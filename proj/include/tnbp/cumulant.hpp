#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <vector>

#include "cluster.hpp"

namespace tnbp {

inline constexpr int kRestrictedPartitionCap = 20;

// Loop subsets are index lists into a loop table, kept sorted.
using LoopSubset = std::vector<int>;

inline bool subset_connected(const LoopSubset& b, const std::vector<GeneralizedLoop>& loops) {
    if (b.size() <= 1) return true;
    std::vector<char> seen(b.size(), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        for (std::size_t j = 0; j < b.size(); ++j)
            if (!seen[j] && incompatible(loops[b[i]], loops[b[j]])) {
                seen[j] = 1;
                ++count;
                stack.push_back(static_cast<int>(j));
            }
    }
    return count == b.size();
}

// Xi(B) = 1 + sum over nonempty pairwise-compatible families in B of prod Z_l.
inline cplx restricted_partition(const LoopSubset& b, const std::vector<GeneralizedLoop>& loops, const std::vector<cplx>& z) {
    const int n = static_cast<int>(b.size());
    if (n > kRestrictedPartitionCap)
        throw Error(ErrorKind::CapExceeded, "restricted partition over " + std::to_string(n) + " loops");
    std::vector<std::uint32_t> clash(n, 0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j && incompatible(loops[b[i]], loops[b[j]])) clash[i] |= 1u << j;
    // Independent sets by recursion on the lowest remaining element.
    cplx total = 0.0;
    auto rec = [&](auto& self, int start, std::uint32_t banned, cplx prod) -> void {
        total += prod;
        for (int i = start; i < n; ++i)
            if (!(banned >> i & 1)) self(self, i + 1, banned | clash[i], prod * z[b[i]]);
    };
    rec(rec, 0, 0, cplx(1.0));
    return total;
}

// Moebius function of the subset lattice; subsets as sorted index lists.
inline int mobius_subset(const LoopSubset& a, const LoopSubset& b) {
    if (!std::includes(b.begin(), b.end(), a.begin(), a.end())) return 0;
    return ((b.size() - a.size()) % 2) ? -1 : 1;
}

inline cplx checked_log(cplx x, const char* what) {
    if (std::abs(x.imag()) <= 1e-14 * std::abs(x) && x.real() <= 0.0)
        throw Error(ErrorKind::BranchCrossing, std::string(what) + " left the cut plane");
    return std::log(x);
}

// K(Gamma) = sum_{B subset Gamma} (-1)^{|Gamma|-|B|} log Xi(B); zero when
// Gamma is disconnected.
inline cplx cumulant(const LoopSubset& gamma, const std::vector<GeneralizedLoop>& loops, const std::vector<cplx>& z) {
    if (!subset_connected(gamma, loops)) return 0.0;
    const int n = static_cast<int>(gamma.size());
    if (n > kRestrictedPartitionCap) throw Error(ErrorKind::CapExceeded, "cumulant over too many loops");
    cplx k = 0.0;
    for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
        LoopSubset b;
        for (int i = 0; i < n; ++i)
            if (mask >> i & 1) b.push_back(gamma[i]);
        const cplx lx = checked_log(restricted_partition(b, loops, z), "Xi(B)");
        k += ((n - static_cast<int>(b.size())) % 2 ? -1.0 : 1.0) * lx;
    }
    return k;
}

// Top-down counting numbers over a family of distinct subsets: parentless
// entries get 1, others 1 - sum over strict supersets in the family.
inline std::vector<long long> counting_numbers(const std::vector<std::vector<int>>& family) {
    const std::size_t n = family.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return family[a].size() > family[b].size(); });
    std::vector<long long> b(n, 0);
    for (std::size_t oi = 0; oi < n; ++oi) {
        const std::size_t i = order[oi];
        long long s = 0;
        for (std::size_t oj = 0; oj < oi; ++oj) {
            const std::size_t j = order[oj];
            if (family[j].size() > family[i].size() &&
                std::includes(family[j].begin(), family[j].end(), family[i].begin(), family[i].end()))
                s += b[j];
        }
        b[i] = 1 - s;
    }
    return b;
}

inline std::vector<long long> counting_numbers_loops(const std::vector<LoopSubset>& subsets) {
    return counting_numbers(subsets);
}

struct CumulantFreeEnergy {
    cplx log_z = 0.0;
    std::vector<LoopSubset> subsets;
    std::vector<cplx> terms;  // K(Gamma) or b(B) log Xi(B) per subset

    double free_energy() const { return -log_z.real(); }
};

// log Z_BP + sum over connected Gamma with sum |l| <= m of K(Gamma).
inline CumulantFreeEnergy free_energy_cumulant(const BPFreeEnergy& bp, const std::vector<GeneralizedLoop>& loops,
                                               const std::vector<cplx>& z, int m) {
    CumulantFreeEnergy out;
    out.log_z = bp.log_z();
    out.subsets = enumerate_loop_subsets(loops, m);
    for (const auto& g : out.subsets) {
        out.terms.push_back(cumulant(g, loops, z));
        out.log_z += out.terms.back();
    }
    return out;
}

// Same truncation written as sum of b(B) log Xi(B).
inline CumulantFreeEnergy free_energy_counting(const BPFreeEnergy& bp, const std::vector<GeneralizedLoop>& loops,
                                               const std::vector<cplx>& z, int m) {
    CumulantFreeEnergy out;
    out.log_z = bp.log_z();
    out.subsets = enumerate_loop_subsets(loops, m);
    const auto b = counting_numbers_loops(out.subsets);
    for (std::size_t i = 0; i < out.subsets.size(); ++i) {
        out.terms.push_back(b[i] == 0 ? cplx(0.0)
                                      : double(b[i]) * checked_log(restricted_partition(out.subsets[i], loops, z), "Xi(B)"));
        out.log_z += out.terms.back();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Regions

enum class RegionKind { Bulk, Anchored };

struct Region {
    std::vector<int> vertices;  // ascending
    std::vector<int> edges;     // induced, ascending
    int level = 1;
    long long counting_number = 0;
};

struct RegionPoset {
    RegionKind kind = RegionKind::Bulk;
    int k = 0;
    int anchor = -1;
    std::vector<Region> regions;  // level by level, deterministic order within a level
};

inline constexpr std::size_t kDefaultRegionCap = 2000000;

namespace detail {

inline std::vector<int> induced_degrees(const Graph& g, const std::vector<int>& verts) {
    std::vector<char> in(g.num_vertices(), 0);
    for (int v : verts) in[v] = 1;
    std::vector<int> d;
    for (int v : verts) {
        int c = 0;
        for (const auto& [w, e] : g.incident(v)) c += in[w];
        d.push_back(c);
    }
    return d;
}

// Leafless means no vertex of induced degree <= 1 except `allowed`.
inline bool leafless(const Graph& g, const std::vector<int>& verts, int allowed = -1) {
    const auto d = induced_degrees(g, verts);
    for (std::size_t i = 0; i < verts.size(); ++i)
        if (d[i] <= 1 && verts[i] != allowed) return false;
    return true;
}

// Connected vertex sets of size <= k containing `must` (or any when -1),
// via ESU on the vertex graph; visit receives sorted vertex lists.
template <class F>
void connected_vertex_sets(const Graph& g, int k, int must, std::size_t cap, F&& visit) {
    const int n = g.num_vertices();
    std::vector<int> mark(n, 0), sub;
    std::size_t count = 0;
    int root = 0;
    auto add = [&](int v) {
        sub.push_back(v);
        ++mark[v];
        for (const auto& [w, e] : g.incident(v)) ++mark[w];
    };
    auto remove = [&](int v) {
        sub.pop_back();
        --mark[v];
        for (const auto& [w, e] : g.incident(v)) --mark[w];
    };
    auto extend = [&](auto& self, std::vector<int> ext) -> void {
        if (++count > cap) throw Error(ErrorKind::CombinatorialBudgetExceeded, "too many connected vertex sets");
        std::vector<int> s = sub;
        std::sort(s.begin(), s.end());
        if (must < 0 || std::binary_search(s.begin(), s.end(), must)) visit(s);
        if (static_cast<int>(sub.size()) >= k) return;
        while (!ext.empty()) {
            const int w = ext.back();
            ext.pop_back();
            std::vector<int> next = ext;
            for (const auto& [u, e] : g.incident(w))
                if (u > root && mark[u] == 0) next.push_back(u);
            add(w);
            self(self, std::move(next));
            remove(w);
        }
    };
    for (root = 0; root < n; ++root) {
        std::vector<int> ext;
        for (const auto& [u, e] : g.incident(root))
            if (u > root) ext.push_back(u);
        add(root);
        extend(extend, ext);
        remove(root);
    }
}

inline bool strict_subset(const std::vector<int>& a, const std::vector<int>& b) {
    return a.size() < b.size() && std::includes(b.begin(), b.end(), a.begin(), a.end());
}

inline std::vector<int> intersect(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

// Repeatedly removes vertices of induced degree <= 1 other than `keep`.
inline std::vector<int> prune_branches(const Graph& g, std::vector<int> verts, int keep) {
    while (true) {
        const auto d = induced_degrees(g, verts);
        std::vector<int> next;
        for (std::size_t i = 0; i < verts.size(); ++i)
            if (d[i] >= 2 || verts[i] == keep) next.push_back(verts[i]);
        if (next.size() == verts.size()) return verts;
        verts = std::move(next);
    }
}

inline std::vector<std::vector<int>> maximal_only(std::vector<std::vector<int>> m) {
    std::vector<std::vector<int>> out;
    for (std::size_t i = 0; i < m.size(); ++i) {
        bool maximal = true;
        for (std::size_t j = 0; j < m.size() && maximal; ++j)
            if (j != i && strict_subset(m[i], m[j])) maximal = false;
        if (maximal) out.push_back(m[i]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline void assign_counting_numbers(RegionPoset& p) {
    std::vector<std::vector<int>> fam;
    for (const auto& r : p.regions) fam.push_back(r.vertices);
    const auto b = counting_numbers(fam);
    for (std::size_t i = 0; i < p.regions.size(); ++i) p.regions[i].counting_number = b[i];
}

inline Region make_region(const Graph& g, std::vector<int> verts, int level) {
    Region r;
    r.vertices = std::move(verts);
    r.edges = induced_edges(g, r.vertices);
    r.level = level;
    return r;
}

}  // namespace detail

// Maximal connected leafless induced subgraphs with <= k vertices, closed
// under intersection. A region already present at any level is not added
// again.
inline RegionPoset find_regions(const Graph& g, int k, std::size_t cap = kDefaultRegionCap) {
    RegionPoset p;
    p.kind = RegionKind::Bulk;
    p.k = k;
    std::vector<std::vector<int>> m;
    if (k >= 3)
        detail::connected_vertex_sets(g, k, -1, cap, [&](const std::vector<int>& s) {
            if (s.size() >= 3 && detail::leafless(g, s)) m.push_back(s);
        });
    std::vector<std::vector<int>> level = detail::maximal_only(std::move(m));
    std::vector<std::vector<int>> all = level;
    std::vector<std::vector<int>> seen_sorted = all;
    std::sort(seen_sorted.begin(), seen_sorted.end());
    int lvl = 1;
    for (const auto& r : level) p.regions.push_back(detail::make_region(g, r, lvl));
    while (!level.empty()) {
        std::vector<std::vector<int>> next;
        for (const auto& r : level)
            for (const auto& r2 : all) {
                if (r == r2) continue;
                std::vector<int> q = detail::intersect(r, r2);
                if (q.empty() || !induced_connected(g, q) || !detail::leafless(g, q) || induced_edges(g, q).empty())
                    continue;
                if (std::binary_search(seen_sorted.begin(), seen_sorted.end(), q)) continue;
                if (std::find(next.begin(), next.end(), q) != next.end()) continue;
                next.push_back(q);
            }
        std::sort(next.begin(), next.end());
        ++lvl;
        for (const auto& r : next) {
            p.regions.push_back(detail::make_region(g, r, lvl));
            all.push_back(r);
            seen_sorted.insert(std::upper_bound(seen_sorted.begin(), seen_sorted.end(), r), r);
        }
        level = std::move(next);
    }
    detail::assign_counting_numbers(p);
    return p;
}

// Regions containing the anchor vertex, which is the only vertex allowed to be
// a leaf; intersections keep the anchor component shape after pruning
// branches that do not end on it.
inline RegionPoset find_regions_local(const Graph& g, int k, int anchor, std::size_t cap = kDefaultRegionCap) {
    if (anchor < 0 || anchor >= g.num_vertices()) throw Error(ErrorKind::RegionMismatch, "anchor out of range");
    RegionPoset p;
    p.kind = RegionKind::Anchored;
    p.k = k;
    p.anchor = anchor;
    std::vector<std::vector<int>> m;
    if (k >= 1)
        detail::connected_vertex_sets(g, k, anchor, cap, [&](const std::vector<int>& s) {
            if (detail::leafless(g, s, anchor)) m.push_back(s);
        });
    std::vector<std::vector<int>> level = detail::maximal_only(std::move(m));
    std::vector<std::vector<int>> all = level;
    std::vector<std::vector<int>> seen_sorted = all;
    std::sort(seen_sorted.begin(), seen_sorted.end());
    int lvl = 1;
    for (const auto& r : level) p.regions.push_back(detail::make_region(g, r, lvl));
    while (!level.empty()) {
        std::vector<std::vector<int>> next;
        for (const auto& r : level)
            for (const auto& r2 : all) {
                if (r == r2) continue;
                std::vector<int> q = detail::intersect(r, r2);
                if (q.empty() || !induced_connected(g, q) || !std::binary_search(q.begin(), q.end(), anchor)) continue;
                q = detail::prune_branches(g, q, anchor);
                if (std::binary_search(seen_sorted.begin(), seen_sorted.end(), q)) continue;
                if (std::find(next.begin(), next.end(), q) != next.end()) continue;
                next.push_back(q);
            }
        std::sort(next.begin(), next.end());
        ++lvl;
        for (const auto& r : next) {
            p.regions.push_back(detail::make_region(g, r, lvl));
            all.push_back(r);
            seen_sorted.insert(std::upper_bound(seen_sorted.begin(), seen_sorted.end(), r), r);
        }
        level = std::move(next);
    }
    detail::assign_counting_numbers(p);
    return p;
}

inline std::vector<long long> counting_numbers_regions(const RegionPoset& p) {
    std::vector<long long> out;
    for (const auto& r : p.regions) out.push_back(r.counting_number);
    return out;
}

struct RegionValue {
    cplx unnormalized = 0.0;  // contraction with normalized boundary messages
    cplx normalized = 0.0;    // divided by the product of local factors
};

// Contracts the site tensors of R with mu/sqrt(I) on every boundary edge.
inline RegionValue region_partition(const TensorNetwork& tn, const MessageSet& ms, const std::vector<int>& verts,
                                    const Decoration* dec = nullptr, double cap = kDefaultContractCap) {
    std::vector<char> in(tn.num_vertices(), 0);
    for (int v : verts) in[v] = 1;
    std::vector<Tensor> parts;
    cplx zprod = 1.0;
    for (int v : verts) {
        const Tensor* site = dec ? dec->find(v) : nullptr;
        Tensor t = site ? *site : tn.tensors[v];
        for (const auto& [w, e] : tn.graph.incident(v))
            if (!in[w]) t = contract_pair(t, ms.normalized_incoming(tn.graph, v, e));
        parts.push_back(std::move(t));
        zprod *= bp_local_factor(tn, ms, v);
    }
    auto [t, ls] = contract_all(std::move(parts), cap);
    RegionValue r;
    r.unnormalized = t.value() * std::exp(ls);
    r.normalized = r.unnormalized / zprod;
    return r;
}

struct RegionFreeEnergy {
    cplx log_z = 0.0;
    std::vector<cplx> log_xi;  // per region

    double free_energy() const { return -log_z.real(); }
};

inline RegionFreeEnergy free_energy_regions(const TensorNetwork& tn, const MessageSet& ms, const RegionPoset& p) {
    RegionFreeEnergy out;
    out.log_z = bp_free_energy(tn, ms).log_z();
    for (const auto& r : p.regions) {
        const cplx lx = checked_log(region_partition(tn, ms, r.vertices).normalized, "Xi(R)");
        out.log_xi.push_back(lx);
        out.log_z += double(r.counting_number) * lx;
    }
    return out;
}

inline std::string region_signature(const Region& r) {
    std::string s;
    for (std::size_t i = 0; i < r.vertices.size(); ++i) s += (i ? "-" : "") + std::to_string(r.vertices[i]);
    return s;
}

inline void write_regions_csv(CsvWriter& csv, const RegionPoset& p, const std::vector<cplx>* log_xi) {
    csv.header({"region", "size", "level", "counting_number", "re_log_xi", "im_log_xi"});
    for (std::size_t i = 0; i < p.regions.size(); ++i) {
        const auto& r = p.regions[i];
        csv.row({region_signature(r), std::to_string(r.vertices.size()), std::to_string(r.level),
                 std::to_string(r.counting_number), log_xi ? fmt((*log_xi)[i].real()) : "",
                 log_xi ? fmt((*log_xi)[i].imag()) : ""});
    }
}

}  // namespace tnbp
