#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <boost/rational.hpp>

#include "loops.hpp"

namespace tnbp {

using Rational = boost::rational<long long>;

// Loops are incompatible when their supports share a vertex.
inline bool incompatible(const GeneralizedLoop& a, const GeneralizedLoop& b) {
    auto i = a.support.begin(), j = b.support.begin();
    while (i != a.support.end() && j != b.support.end()) {
        if (*i == *j) return true;
        if (*i < *j)
            ++i;
        else
            ++j;
    }
    return false;
}

// Adjacency lists of the incompatibility graph over a loop list. Pairs whose
// combined weight exceeds `budget` can never share a cluster and are left out.
inline std::vector<std::vector<int>> incompatibility_graph(const std::vector<GeneralizedLoop>& loops,
                                                           int budget = std::numeric_limits<int>::max()) {
    std::map<int, std::vector<int>> by_vertex;
    for (int i = 0; i < static_cast<int>(loops.size()); ++i)
        for (int v : loops[i].support) by_vertex[v].push_back(i);
    for (auto& [v, ids] : by_vertex)
        std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) { return loops[a].weight() < loops[b].weight(); });
    std::vector<std::vector<int>> adj(loops.size());
    std::vector<int> stamp(loops.size(), -1);
    for (int a = 0; a < static_cast<int>(loops.size()); ++a) {
        const long long wa = loops[a].weight();
        for (int v : loops[a].support)
            for (int b : by_vertex[v]) {
                if (wa + loops[b].weight() > budget) break;
                if (b != a && stamp[b] != a) {
                    stamp[b] = a;
                    adj[a].push_back(b);
                }
            }
        std::sort(adj[a].begin(), adj[a].end());
    }
    return adj;
}

struct Cluster {
    std::vector<std::pair<int, int>> members;  // (loop index, multiplicity), ascending index
    int weight = 0;                            // sum of multiplicity * |l|
    int n_loops = 0;                           // sum of multiplicities
    std::vector<int> support;
    Rational phi{0};

    double phi_value() const { return boost::rational_cast<double>(phi); }
};

// ---------------------------------------------------------------------------
// Ursell coefficient

// Sum over connected spanning edge subsets of (-1)^{#edges}, for a graph on
// n <= 24 nodes given as neighbour bitmasks. Uses c(S) = f(S) - sum over
// T containing min(S), T != S, of c(T) f(S\T), with f(S) = [S independent].
inline long long connected_signed_count(int n, const std::vector<std::uint32_t>& nbr) {
    if (n == 0) return 0;
    if (n > 24) throw Error(ErrorKind::CapExceeded, "interaction graph too large");
    const std::uint32_t full = (1u << n) - 1;
    std::vector<char> indep(std::size_t(full) + 1, 0);
    indep[0] = 1;
    for (std::uint32_t s = 1; s <= full; ++s) {
        const int low = __builtin_ctz(s);
        const std::uint32_t rest = s & (s - 1);
        indep[s] = indep[rest] && !(nbr[low] & rest);
    }
    std::vector<long long> c(std::size_t(full) + 1, 0);
    for (std::uint32_t s = 1; s <= full; ++s) {
        const std::uint32_t low = s & (~s + 1);
        long long v = indep[s];
        const std::uint32_t others = s ^ low;
        // T = low | t for every t strictly inside `others`.
        for (std::uint32_t t = (others - 1) & others;; t = (t - 1) & others) {
            const std::uint32_t T = low | t;
            if (T != s) v -= c[T] * indep[s ^ T];
            if (t == 0) break;
        }
        c[s] = v;
    }
    return c[full];
}

inline long long factorial(int n) {
    long long f = 1;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

inline constexpr int kDefaultUrsellCap = 8;

class UrsellCache {
public:
    explicit UrsellCache(int cap = kDefaultUrsellCap) : cap_(cap) {}

    // members: (loop index, multiplicity); adjacency between distinct loops
    // read from `incompat`.
    Rational phi(const std::vector<std::pair<int, int>>& members,
                 const std::vector<std::vector<int>>& incompat) {
        int n = 0;
        for (const auto& m : members) n += m.second;
        if (n > cap_) throw Error(ErrorKind::CapExceeded, "cluster with " + std::to_string(n) + " loop copies exceeds cap " +
                                                              std::to_string(cap_));
        std::string key;
        const int k = static_cast<int>(members.size());
        for (int i = 0; i < k; ++i) {
            key += std::to_string(members[i].second) + ':';
            for (int j = i + 1; j < k; ++j)
                key += std::binary_search(incompat[members[i].first].begin(), incompat[members[i].first].end(),
                                          members[j].first)
                           ? '1'
                           : '0';
            key += '|';
        }
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;
        std::vector<int> owner;
        for (int i = 0; i < k; ++i)
            for (int c = 0; c < members[i].second; ++c) owner.push_back(i);
        std::vector<std::uint32_t> nbr(n, 0);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                if (a == b) continue;
                const int la = members[owner[a]].first, lb = members[owner[b]].first;
                if (la == lb || std::binary_search(incompat[la].begin(), incompat[la].end(), lb)) nbr[a] |= 1u << b;
            }
        long long denom = 1;
        for (const auto& m : members) denom *= factorial(m.second);
        const Rational r(connected_signed_count(n, nbr), denom);
        memo_[key] = r;
        return r;
    }

    int cap() const { return cap_; }

private:
    int cap_;
    std::map<std::string, Rational> memo_;
};

// Standalone Ursell coefficient of a cluster over `loops`.
inline Rational ursell(const Cluster& c, const std::vector<GeneralizedLoop>& loops, int cap = kDefaultUrsellCap) {
    std::vector<std::vector<int>> incompat(loops.size());
    for (const auto& [i, e1] : c.members)
        for (const auto& [j, e2] : c.members)
            if (i != j && incompatible(loops[i], loops[j])) incompat[i].push_back(j);
    for (auto& a : incompat) std::sort(a.begin(), a.end());
    UrsellCache cache(cap);
    return cache.phi(c.members, incompat);
}

// ---------------------------------------------------------------------------
// Cluster enumeration

struct ClusterOptions {
    int max_weight = 8;           // bound on sum of multiplicity * |l|
    int max_distinct_weight = -1; // bound on sum of |l| over distinct loops; < 0 means max_weight
    std::vector<int> anchor;      // when nonempty, keep clusters whose support meets it
    std::vector<std::vector<int>> require_all;  // each listed set must be met by the support
    int ursell_cap = kDefaultUrsellCap;
    std::size_t cap = kDefaultEnumerationCap;
};

namespace detail {

// Connected subsets of the incompatibility graph within a weight budget,
// smallest index as root (ESU).
class LoopSetEnumerator {
public:
    LoopSetEnumerator(const std::vector<GeneralizedLoop>& loops, const std::vector<std::vector<int>>& adj, int budget,
                      std::size_t cap)
        : loops_(loops), adj_(adj), budget_(budget), cap_(cap), mark_(loops.size(), 0) {}

    template <class F>
    void run(F&& visit) {
        for (int r = 0; r < static_cast<int>(loops_.size()); ++r) {
            if (loops_[r].weight() > budget_) continue;
            root_ = r;
            std::vector<int> ext;
            for (int u : adj_[r])
                if (u > r) ext.push_back(u);
            add(r);
            extend(ext, visit);
            remove(r);
        }
    }

private:
    void add(int i) {
        sub_.push_back(i);
        weight_ += loops_[i].weight();
        ++mark_[i];
        for (int u : adj_[i]) ++mark_[u];
    }
    void remove(int i) {
        sub_.pop_back();
        weight_ -= loops_[i].weight();
        --mark_[i];
        for (int u : adj_[i]) --mark_[u];
    }

    template <class F>
    void extend(std::vector<int> ext, F& visit) {
        if (++count_ > cap_) throw Error(ErrorKind::CombinatorialBudgetExceeded, "too many loop subsets");
        visit(sub_);
        while (!ext.empty()) {
            const int w = ext.back();
            ext.pop_back();
            if (weight_ + loops_[w].weight() > budget_) continue;
            std::vector<int> next = ext;
            for (int u : adj_[w])
                if (u > root_ && mark_[u] == 0) next.push_back(u);
            add(w);
            extend(std::move(next), visit);
            remove(w);
        }
    }

    const std::vector<GeneralizedLoop>& loops_;
    const std::vector<std::vector<int>>& adj_;
    int budget_;
    std::size_t cap_;
    std::vector<int> mark_;
    std::vector<int> sub_;
    int weight_ = 0;
    int root_ = 0;
    std::size_t count_ = 0;
};

inline std::vector<int> union_support(const std::vector<GeneralizedLoop>& loops, const std::vector<int>& ids) {
    std::vector<int> s;
    for (int i : ids) s.insert(s.end(), loops[i].support.begin(), loops[i].support.end());
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
}

inline bool meets(const std::vector<int>& sorted_support, const std::vector<int>& verts) {
    for (int v : verts)
        if (std::binary_search(sorted_support.begin(), sorted_support.end(), v)) return true;
    return false;
}

}  // namespace detail

// Connected loop subsets (distinct loops, each once) within a distinct-weight
// budget, optionally anchored. Sorted for determinism.
inline std::vector<std::vector<int>> enumerate_loop_subsets(const std::vector<GeneralizedLoop>& loops, int max_weight,
                                                            const std::vector<int>& anchor = {},
                                                            std::size_t cap = kDefaultEnumerationCap) {
    const auto adj = incompatibility_graph(loops, max_weight);
    std::vector<std::vector<int>> out;
    detail::LoopSetEnumerator en(loops, adj, max_weight, cap);
    en.run([&](const std::vector<int>& sub) {
        if (!anchor.empty() && !detail::meets(detail::union_support(loops, sub), anchor)) return;
        std::vector<int> s = sub;
        std::sort(s.begin(), s.end());
        out.push_back(std::move(s));
    });
    std::sort(out.begin(), out.end());
    return out;
}

// All connected clusters within the budgets, each once, with Ursell
// coefficients attached.
inline std::vector<Cluster> enumerate_clusters(const std::vector<GeneralizedLoop>& loops, const ClusterOptions& opt) {
    const int distinct = opt.max_distinct_weight < 0 ? opt.max_weight : std::min(opt.max_distinct_weight, opt.max_weight);
    const auto adj = incompatibility_graph(loops, distinct);
    UrsellCache cache(opt.ursell_cap);
    std::vector<Cluster> out;
    detail::LoopSetEnumerator en(loops, adj, distinct, opt.cap);
    en.run([&](const std::vector<int>& sub) {
        std::vector<int> ids = sub;
        std::sort(ids.begin(), ids.end());
        const std::vector<int> supp = detail::union_support(loops, ids);
        if (!opt.anchor.empty() && !detail::meets(supp, opt.anchor)) return;
        for (const auto& req : opt.require_all)
            if (!detail::meets(supp, req)) return;
        std::vector<int> eta(ids.size(), 1);
        // Odometer over multiplicities with sum eta*|l| <= max_weight.
        while (true) {
            int w = 0, n = 0;
            for (std::size_t i = 0; i < ids.size(); ++i) {
                w += eta[i] * loops[ids[i]].weight();
                n += eta[i];
            }
            if (w <= opt.max_weight) {
                Cluster c;
                for (std::size_t i = 0; i < ids.size(); ++i) c.members.push_back({ids[i], eta[i]});
                c.weight = w;
                c.n_loops = n;
                c.support = supp;
                c.phi = cache.phi(c.members, adj);
                if (out.size() >= opt.cap) throw Error(ErrorKind::CombinatorialBudgetExceeded, "too many clusters");
                out.push_back(std::move(c));
            }
            std::size_t k = 0;
            for (; k < ids.size(); ++k) {
                ++eta[k];
                int w2 = 0;
                for (std::size_t i = 0; i < ids.size(); ++i) w2 += eta[i] * loops[ids[i]].weight();
                if (w2 <= opt.max_weight) break;
                eta[k] = 1;
            }
            if (k == ids.size()) break;
        }
    });
    std::sort(out.begin(), out.end(), [](const Cluster& a, const Cluster& b) {
        if (a.weight != b.weight) return a.weight < b.weight;
        return a.members < b.members;
    });
    return out;
}

inline std::vector<Cluster> enumerate_clusters(const std::vector<GeneralizedLoop>& loops, int max_weight,
                                               const std::vector<int>& anchor = {}) {
    ClusterOptions opt;
    opt.max_weight = max_weight;
    opt.anchor = anchor;
    return enumerate_clusters(loops, opt);
}

// Z_W = prod Z_l^eta.
inline cplx cluster_product(const Cluster& c, const std::vector<cplx>& z) {
    cplx p = 1.0;
    for (const auto& [i, eta] : c.members)
        for (int k = 0; k < eta; ++k) p *= z[i];
    return p;
}

// ---------------------------------------------------------------------------
// Truncated free energy

struct OrderContribution {
    int order = 0;
    int n_clusters = 0;
    cplx sum = 0.0;        // sum of phi * Z_W at this order
    double abs_sum = 0.0;  // sum of |phi * Z_W|
};

struct TruncatedFreeEnergy {
    cplx log_z = 0.0;  // log Z_BP + correction (imaginary part is the phase)
    std::vector<OrderContribution> orders;

    double free_energy() const { return -log_z.real(); }
};

// log Z_m = log Z_BP + sum_{connected W, |W| <= m} phi(W) Z_W.
inline TruncatedFreeEnergy free_energy_from_clusters(const BPFreeEnergy& bp, const std::vector<Cluster>& clusters,
                                                     const std::vector<cplx>& z) {
    TruncatedFreeEnergy out;
    out.log_z = bp.log_z();
    std::map<int, OrderContribution> orders;
    for (const auto& c : clusters) {
        const cplx t = c.phi_value() * cluster_product(c, z);
        auto& o = orders[c.weight];
        o.order = c.weight;
        ++o.n_clusters;
        o.sum += t;
        o.abs_sum += std::abs(t);
    }
    // Smallest orders last so tiny terms are not swamped mid-sum.
    for (auto it = orders.rbegin(); it != orders.rend(); ++it) out.log_z += it->second.sum;
    for (auto& [k, o] : orders) out.orders.push_back(o);
    return out;
}

inline TruncatedFreeEnergy free_energy_truncated(const TensorNetwork& tn, const MessageSet& ms,
                                                 const std::vector<GeneralizedLoop>& loops, int m,
                                                 int ursell_cap = kDefaultUrsellCap) {
    const BPFreeEnergy bp = bp_free_energy(tn, ms);
    std::vector<GeneralizedLoop> used;
    for (const auto& l : loops)
        if (l.weight() <= m) used.push_back(l);
    WeightEvaluator ev(tn, ms);
    std::vector<cplx> z;
    for (const auto& l : used) z.push_back(ev.weight(l));
    ClusterOptions opt;
    opt.max_weight = m;
    opt.ursell_cap = ursell_cap;
    return free_energy_from_clusters(bp, enumerate_clusters(used, opt), z);
}

// ---------------------------------------------------------------------------
// Tail bound

inline double c0_explicit(int max_degree) { return std::log(2.0 * (max_degree - 1)) + 0.5; }
inline double c0_informal(int max_degree) { return std::log(static_cast<double>(max_degree)); }

struct TailBound {
    double c0 = 0.0;
    double c0_informal = 0.0;
    double bound = 0.0;
    bool vacuous = false;
};

// N e^{-(c - c0)(m + 1)}; vacuous when c <= c0.
inline TailBound tail_bound(double c, int m, int max_degree, double n_vertices) {
    TailBound t;
    t.c0 = c0_explicit(max_degree);
    t.c0_informal = c0_informal(max_degree);
    t.vacuous = !(c > t.c0);
    t.bound = t.vacuous ? n_vertices : n_vertices * std::exp(-(c - t.c0) * (m + 1));
    return t;
}

inline void write_free_energy_csv(CsvWriter& csv, const BPFreeEnergy& bp, const TruncatedFreeEnergy& fe,
                                  const double* reference) {
    csv.header({"order", "n_clusters", "sum_abs_phiZ", "F_m", "abs_error"});
    cplx log_z = bp.log_z();
    csv.row({"0", "0", "0", fmt(-log_z.real()), reference ? fmt(std::abs(-log_z.real() - *reference)) : ""});
    for (auto it = fe.orders.begin(); it != fe.orders.end(); ++it) {
        log_z += it->sum;
        csv.row({std::to_string(it->order), std::to_string(it->n_clusters), fmt(it->abs_sum), fmt(-log_z.real()),
                 reference ? fmt(std::abs(-log_z.real() - *reference)) : ""});
    }
}

}  // namespace tnbp
