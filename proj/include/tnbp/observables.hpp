#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "cumulant.hpp"

namespace tnbp {

struct ExpectationEstimate {
    cplx value = 0.0;
    std::string method;
    int truncation = 0;
    std::vector<double> order_magnitudes;  // per order, sum of |term|

    // Health check for Hermitian observables on a valid norm network.
    bool real_within(double rel = 1e-8) const { return std::abs(value.imag()) <= rel * std::abs(value); }
};

struct CorrelatorEstimate {
    cplx value = 0.0;
    std::string method;
    int truncation = 0;
    int distance = 0;
};

namespace detail {

inline std::vector<int> sorted_region(const Decoration& d) {
    std::vector<int> r = d.region;
    std::sort(r.begin(), r.end());
    return r;
}

inline int single_vertex(const Decoration& d, const char* who) {
    if (d.region.size() != 1)
        throw Error(ErrorKind::RegionMismatch, std::string(who) + " needs a single-vertex region; merge the region first");
    return d.region[0];
}

inline void check_disjoint(const std::vector<Decoration>& ds) {
    std::vector<int> all;
    for (const auto& d : ds) all.insert(all.end(), d.region.begin(), d.region.end());
    std::sort(all.begin(), all.end());
    if (std::adjacent_find(all.begin(), all.end()) != all.end())
        throw Error(ErrorKind::OverlappingRegions, "observable regions must be disjoint");
}

inline void add_order(std::map<int, double>& orders, int w, cplx t) { orders[w] += std::abs(t); }

inline std::vector<double> order_list(const std::map<int, double>& orders) {
    std::vector<double> out;
    for (const auto& [k, v] : orders) out.push_back(v);
    return out;
}

}  // namespace detail

// prod_{v in A} z_v^A / z_v.
inline ExpectationEstimate expval_bp(const TensorNetwork& tn, const MessageSet& ms, const Decoration& dec) {
    ExpectationEstimate e;
    e.method = "bp";
    e.value = 1.0;
    for (std::size_t i = 0; i < dec.region.size(); ++i) {
        const int v = dec.region[i];
        const cplx z = bp_local_factor(tn, ms, v);
        if (z == 0.0) throw Error(ErrorKind::ZeroLocalFactor, "z_" + std::to_string(v) + " = 0");
        e.value *= bp_local_factor(tn, ms, v, &dec.tensors[i]) / z;
    }
    return e;
}

// <O>_BP exp(sum_W phi(W) (Z^A_W - Z_W)) over connected clusters of strings
// touching A with |W| <= m.
inline ExpectationEstimate expval_ratio(const TensorNetwork& tn, const MessageSet& ms, const Decoration& dec, int m,
                                        int ursell_cap = kDefaultUrsellCap) {
    ExpectationEstimate e = expval_bp(tn, ms, dec);
    e.method = "ratio";
    e.truncation = m;
    const std::vector<int> a = detail::sorted_region(dec);
    const auto loops = enumerate_strings(tn.graph, {a}, m);
    ClusterOptions opt;
    opt.max_weight = m;
    opt.anchor = a;
    opt.ursell_cap = ursell_cap;
    const auto clusters = enumerate_clusters(loops, opt);
    WeightEvaluator ev(tn, ms);
    std::vector<cplx> z(loops.size()), za(loops.size());
    parallel_for(loops.size(), [&](std::size_t i) {
        z[i] = ev.weight(loops[i]);
        za[i] = loops[i].touches(a) ? ev.weight(loops[i], &dec) : z[i];
    });
    std::map<int, double> orders;
    cplx s = 0.0;
    for (const auto& c : clusters) {
        const cplx t = c.phi_value() * (cluster_product(c, za) - cluster_product(c, z));
        s += t;
        detail::add_order(orders, c.weight, t);
    }
    e.value *= std::exp(s);
    e.order_magnitudes = detail::order_list(orders);
    return e;
}

// d/dlambda of the truncated cluster free energy at lambda = 0, written in
// product form so vanishing Z_l never appears in a denominator.
inline ExpectationEstimate expval_derivative(const TensorNetwork& tn, const MessageSet& ms, const Decoration& dec, int m,
                                             int ursell_cap = kDefaultUrsellCap) {
    const int av = detail::single_vertex(dec, "expval_derivative");
    ExpectationEstimate e = expval_bp(tn, ms, dec);
    const cplx oa = e.value;
    e.method = "derivative";
    e.truncation = m;
    const auto loops = enumerate_strings(tn.graph, {{av}}, m);
    ClusterOptions opt;
    opt.max_weight = m;
    opt.anchor = {av};
    opt.ursell_cap = ursell_cap;
    const auto clusters = enumerate_clusters(loops, opt);
    WeightEvaluator ev(tn, ms);
    std::vector<cplx> z(loops.size()), ya(loops.size(), 0.0);
    parallel_for(loops.size(), [&](std::size_t i) {
        z[i] = ev.weight(loops[i]);
        if (loops[i].contains_vertex(av)) ya[i] = ev.weight(loops[i], &dec, Normalization::Base);
    });
    std::map<int, double> orders;
    cplx s = 0.0;
    for (const auto& c : clusters) {
        cplx d = 0.0;
        int n_a = 0;
        for (std::size_t i = 0; i < c.members.size(); ++i) {
            const auto [li, eta] = c.members[i];
            if (!loops[li].contains_vertex(av)) continue;
            n_a += eta;
            cplx t = double(eta) * ya[li] * std::pow(z[li], eta - 1);
            for (std::size_t j = 0; j < c.members.size(); ++j)
                if (j != i) t *= std::pow(z[c.members[j].first], c.members[j].second);
            d += t;
        }
        d -= double(n_a) * oa * cluster_product(c, z);
        const cplx t = c.phi_value() * d;
        s += t;
        detail::add_order(orders, c.weight, t);
    }
    e.value = oa + s;
    e.order_magnitudes = detail::order_list(orders);
    return e;
}

// <O>_BP exp(sum over connected loop sets Gamma touching A of K^A - K).
inline ExpectationEstimate expval_cumulant(const TensorNetwork& tn, const MessageSet& ms, const Decoration& dec, int m) {
    ExpectationEstimate e = expval_bp(tn, ms, dec);
    e.method = "cumulant";
    e.truncation = m;
    const std::vector<int> a = detail::sorted_region(dec);
    const auto loops = enumerate_strings(tn.graph, {a}, m);
    const auto subsets = enumerate_loop_subsets(loops, m, a);
    WeightEvaluator ev(tn, ms);
    std::vector<cplx> z(loops.size()), za(loops.size());
    parallel_for(loops.size(), [&](std::size_t i) {
        z[i] = ev.weight(loops[i]);
        za[i] = loops[i].touches(a) ? ev.weight(loops[i], &dec) : z[i];
    });
    std::map<int, double> orders;
    cplx s = 0.0;
    for (const auto& g : subsets) {
        const cplx t = cumulant(g, loops, za) - cumulant(g, loops, z);
        int w = 0;
        for (int i : g) w += loops[i].weight();
        s += t;
        detail::add_order(orders, w, t);
    }
    e.value *= std::exp(s);
    e.order_magnitudes = detail::order_list(orders);
    return e;
}

struct RegionObservable {
    RegionPoset poset;
    std::vector<cplx> local_values;  // <O>_R per region
};

inline RegionObservable region_observables(const TensorNetwork& tn, const MessageSet& ms, const Decoration& dec, int k) {
    const int av = detail::single_vertex(dec, "region estimators");
    RegionObservable r;
    r.poset = find_regions_local(tn.graph, k, av);
    r.local_values.resize(r.poset.regions.size());
    parallel_for(r.poset.regions.size(), [&](std::size_t i) {
        const auto& verts = r.poset.regions[i].vertices;
        const cplx num = region_partition(tn, ms, verts, &dec).unnormalized;
        const cplx den = region_partition(tn, ms, verts).unnormalized;
        if (den == 0.0) throw Error(ErrorKind::ZeroRegionValue, "region contraction vanishes");
        r.local_values[i] = num / den;
    });
    return r;
}

// sum_R b(R) <O>_R
inline ExpectationEstimate expval_region_sum(const TensorNetwork& tn, const MessageSet& ms, const Decoration& dec, int k) {
    const RegionObservable r = region_observables(tn, ms, dec, k);
    ExpectationEstimate e;
    e.method = "region_sum";
    e.truncation = k;
    for (std::size_t i = 0; i < r.local_values.size(); ++i)
        e.value += double(r.poset.regions[i].counting_number) * r.local_values[i];
    return e;
}

// prod_R <O>_R^{b(R)}; counting numbers are integers, so no branch is chosen.
inline ExpectationEstimate expval_region_product(const TensorNetwork& tn, const MessageSet& ms, const Decoration& dec,
                                                 int k) {
    const RegionObservable r = region_observables(tn, ms, dec, k);
    ExpectationEstimate e;
    e.method = "region_product";
    e.truncation = k;
    e.value = 1.0;
    for (std::size_t i = 0; i < r.local_values.size(); ++i) {
        const long long b = r.poset.regions[i].counting_number;
        if (b == 0) continue;
        if (std::abs(r.local_values[i]) == 0.0) throw Error(ErrorKind::ZeroRegionValue, "<O>_R = 0 with b != 0");
        cplx p = 1.0;
        for (long long j = 0; j < std::llabs(b); ++j) p *= r.local_values[i];
        e.value *= b > 0 ? p : 1.0 / p;
    }
    return e;
}

// ---------------------------------------------------------------------------
// Correlators

// <O_A><O_B> [exp(sum_W phi (Z^AB + Z - Z^A - Z^B)) - 1] over connected W
// touching both regions; prefactors from expval_ratio at the same m.
inline CorrelatorEstimate correlator_ratio(const TensorNetwork& tn, const MessageSet& ms, const Decoration& da,
                                           const Decoration& db, int m, int ursell_cap = kDefaultUrsellCap) {
    detail::check_disjoint({da, db});
    const std::vector<int> a = detail::sorted_region(da), b = detail::sorted_region(db);
    CorrelatorEstimate c;
    c.method = "ratio";
    c.truncation = m;
    c.distance = graph_distance(tn.graph, a, b);
    const auto loops = enumerate_strings(tn.graph, {a, b}, m);
    ClusterOptions opt;
    opt.max_weight = m;
    opt.require_all = {a, b};
    opt.ursell_cap = ursell_cap;
    const auto clusters = enumerate_clusters(loops, opt);
    WeightEvaluator ev(tn, ms);
    const Decoration dab = combine({da, db});
    std::vector<cplx> z(loops.size()), za(loops.size()), zb(loops.size()), zab(loops.size());
    parallel_for(loops.size(), [&](std::size_t i) {
        const auto& l = loops[i];
        z[i] = ev.weight(l);
        const bool ta = l.touches(a), tb = l.touches(b);
        za[i] = ta ? ev.weight(l, &da) : z[i];
        zb[i] = tb ? ev.weight(l, &db) : z[i];
        zab[i] = (ta || tb) ? ev.weight(l, &dab) : z[i];
    });
    cplx s = 0.0;
    for (const auto& w : clusters)
        s += w.phi_value() *
             (cluster_product(w, zab) + cluster_product(w, z) - cluster_product(w, za) - cluster_product(w, zb));
    const cplx pre = expval_ratio(tn, ms, da, m, ursell_cap).value * expval_ratio(tn, ms, db, m, ursell_cap).value;
    c.value = pre * (std::exp(s) - 1.0);
    return c;
}

// Mixed second derivative of the truncated cluster free energy, in product
// form: per loop the first-order pieces D^A, D^B and the mixed piece D^AB of
// Z_l(lambda), combined by the product rule over the cluster.
inline CorrelatorEstimate correlator_derivative(const TensorNetwork& tn, const MessageSet& ms, const Decoration& da,
                                                const Decoration& db, int m, int ursell_cap = kDefaultUrsellCap) {
    detail::check_disjoint({da, db});
    const int av = detail::single_vertex(da, "correlator_derivative");
    const int bv = detail::single_vertex(db, "correlator_derivative");
    CorrelatorEstimate c;
    c.method = "derivative";
    c.truncation = m;
    c.distance = graph_distance(tn.graph, {av}, {bv});
    const cplx oa = expval_bp(tn, ms, da).value, ob = expval_bp(tn, ms, db).value;
    const auto loops = enumerate_strings(tn.graph, {{av}, {bv}}, m);
    ClusterOptions opt;
    opt.max_weight = m;
    opt.require_all = {{av}, {bv}};
    opt.ursell_cap = ursell_cap;
    const auto clusters = enumerate_clusters(loops, opt);
    WeightEvaluator ev(tn, ms);
    const Decoration dab = combine({da, db});
    const std::size_t n = loops.size();
    std::vector<cplx> z(n), dA(n, 0.0), dB(n, 0.0), dAB(n, 0.0);
    parallel_for(n, [&](std::size_t i) {
        const auto& l = loops[i];
        z[i] = ev.weight(l);
        const bool ta = l.contains_vertex(av), tb = l.contains_vertex(bv);
        const cplx ya = ta ? ev.weight(l, &da, Normalization::Base) : 0.0;
        const cplx yb = tb ? ev.weight(l, &db, Normalization::Base) : 0.0;
        const cplx yab = (ta && tb) ? ev.weight(l, &dab, Normalization::Base) : 0.0;
        dA[i] = ya - (ta ? oa * z[i] : 0.0);
        dB[i] = yb - (tb ? ob * z[i] : 0.0);
        dAB[i] = yab - (ta ? oa * yb : 0.0) - (tb ? ob * ya : 0.0) + (ta && tb ? oa * ob * z[i] : 0.0);
    });
    auto zpow = [&](int li, int k) { return k <= 0 ? cplx(1.0) : std::pow(z[li], k); };
    cplx s = 0.0;
    for (const auto& w : clusters) {
        const auto& mem = w.members;
        cplx d = 0.0;
        for (std::size_t i = 0; i < mem.size(); ++i) {
            const auto [li, ei] = mem[i];
            cplx rest = 1.0;
            for (std::size_t k = 0; k < mem.size(); ++k)
                if (k != i) rest *= zpow(mem[k].first, mem[k].second);
            cplx own = double(ei) * dAB[li] * zpow(li, ei - 1);
            if (ei >= 2) own += double(ei) * (ei - 1) * dA[li] * dB[li] * zpow(li, ei - 2);
            d += own * rest;
            for (std::size_t j = 0; j < mem.size(); ++j) {
                if (j == i) continue;
                const auto [lj, ej] = mem[j];
                cplx rest2 = 1.0;
                for (std::size_t k = 0; k < mem.size(); ++k)
                    if (k != i && k != j) rest2 *= zpow(mem[k].first, mem[k].second);
                d += double(ei) * dA[li] * zpow(li, ei - 1) * double(ej) * dB[lj] * zpow(lj, ej - 1) * rest2;
            }
        }
        s += w.phi_value() * d;
    }
    c.value = s;
    return c;
}

// ---------------------------------------------------------------------------
// p-point correlators by multilinear jets

inline constexpr int kMaxCorrelatorPoints = 3;

// Truncated polynomial in p nilpotent variables (lambda_i^2 = 0), indexed by
// the subset mask of variables.
class Jet {
public:
    explicit Jet(int p, cplx c0 = 0.0) : p_(p), c_(std::size_t(1) << p, 0.0) { c_[0] = c0; }

    int vars() const { return p_; }
    cplx& operator[](std::size_t mask) { return c_[mask]; }
    cplx operator[](std::size_t mask) const { return c_[mask]; }

    friend Jet operator*(const Jet& a, const Jet& b) {
        Jet r(a.p_);
        const std::size_t full = a.c_.size();
        for (std::size_t s = 0; s < full; ++s)
            for (std::size_t t = s;; t = (t - 1) & s) {
                r.c_[s] += a.c_[t] * b.c_[s ^ t];
                if (t == 0) break;
            }
        return r;
    }
    friend Jet operator+(Jet a, const Jet& b) {
        for (std::size_t i = 0; i < a.c_.size(); ++i) a.c_[i] += b.c_[i];
        return a;
    }
    Jet scaled(cplx s) const {
        Jet r = *this;
        for (auto& x : r.c_) x *= s;
        return r;
    }

    Jet pow(int k) const {
        Jet r(p_, 1.0);
        for (int i = 0; i < k; ++i) r = r * *this;
        return r;
    }

    // 1/a = (1/a0) sum_k (-x)^k with x = (a - a0)/a0 nilpotent of order p+1.
    Jet inverse() const {
        if (c_[0] == 0.0) throw Error(ErrorKind::ZeroLocalFactor, "jet with zero constant term");
        Jet x = *this;
        x.c_[0] = 0.0;
        x = x.scaled(-1.0 / c_[0]);
        Jet term(p_, 1.0), sum(p_, 1.0);
        for (int k = 1; k <= p_; ++k) {
            term = term * x;
            sum = sum + term;
        }
        return sum.scaled(1.0 / c_[0]);
    }

    // log a = log a0 + sum_k (-1)^{k+1} x^k / k with x = (a - a0)/a0.
    Jet log() const {
        if (c_[0] == 0.0) throw Error(ErrorKind::ZeroLocalFactor, "log of jet with zero constant term");
        Jet x = *this;
        x.c_[0] = 0.0;
        x = x.scaled(1.0 / c_[0]);
        Jet term(p_, 1.0), sum(p_, std::log(c_[0]));
        for (int k = 1; k <= p_; ++k) {
            term = term * x;
            sum = sum + term.scaled((k % 2 ? 1.0 : -1.0) / k);
        }
        return sum;
    }

private:
    int p_;
    std::vector<cplx> c_;
};

// d^p/dlambda_1...dlambda_p of the truncated cluster free energy of the
// network with exp(lambda_i O_i) inserted, evaluated at 0.
inline CorrelatorEstimate correlator_ppoint(const TensorNetwork& tn, const MessageSet& ms,
                                            const std::vector<Decoration>& decs, int m,
                                            int ursell_cap = kDefaultUrsellCap) {
    const int p = static_cast<int>(decs.size());
    if (p < 1 || p > kMaxCorrelatorPoints)
        throw Error(ErrorKind::PCapExceeded, "p-point correlators need 1 <= p <= " + std::to_string(kMaxCorrelatorPoints));
    detail::check_disjoint(decs);
    std::vector<int> site;
    std::vector<std::vector<int>> regions;
    for (const auto& d : decs) {
        site.push_back(detail::single_vertex(d, "correlator_ppoint"));
        regions.push_back({site.back()});
    }
    CorrelatorEstimate c;
    c.method = "ppoint";
    c.truncation = m;
    c.distance = p >= 2 ? graph_distance(tn.graph, regions[0], regions[1]) : 0;

    const auto loops = enumerate_strings(tn.graph, regions, m);
    ClusterOptions opt;
    opt.max_weight = m;
    opt.require_all = regions;
    opt.ursell_cap = ursell_cap;
    const auto clusters = enumerate_clusters(loops, opt);
    WeightEvaluator ev(tn, ms);

    auto decoration_for = [&](std::size_t mask) {
        std::vector<Decoration> parts;
        for (int i = 0; i < p; ++i)
            if (mask >> i & 1) parts.push_back(decs[i]);
        return combine(parts);
    };
    // z_v(lambda) for every vertex: decorated vertices gain a first-order term.
    auto z_jet = [&](int v) {
        Jet j(p, ev.z(v));
        for (int i = 0; i < p; ++i)
            if (site[i] == v) j[std::size_t(1) << i] = ev.local(v, &decs[i]);
        return j;
    };

    Jet f(p);
    for (int i = 0; i < p; ++i) f = f + z_jet(site[i]).log();

    std::vector<Jet> zl(loops.size(), Jet(p));
    parallel_for(loops.size(), [&](std::size_t li) {
        const auto& l = loops[li];
        std::size_t present = 0;
        for (int i = 0; i < p; ++i)
            if (l.contains_vertex(site[i])) present |= std::size_t(1) << i;
        Jet num(p);
        for (std::size_t s = present;; s = (s - 1) & present) {
            const Decoration d = decoration_for(s);
            num[s] = ev.raw(l, s ? &d : nullptr);
            if (s == 0) break;
        }
        Jet den(p, 1.0);
        for (int v : l.support) den = den * z_jet(v);
        zl[li] = num * den.inverse();
    });
    for (const auto& w : clusters) {
        Jet t(p, 1.0);
        for (const auto& [li, eta] : w.members) t = t * zl[li].pow(eta);
        f = f + t.scaled(w.phi_value());
    }
    c.value = f[(std::size_t(1) << p) - 1];
    return c;
}

// ---------------------------------------------------------------------------
// Correlation length

struct CorrelationFit {
    double xi = 0.0;
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    bool non_decaying = false;
    int points = 0;
};

// Least squares of log|C| against d; xi = -1/slope.
inline CorrelationFit correlation_length(const std::vector<std::pair<double, cplx>>& points) {
    std::vector<double> xs, ys;
    for (const auto& [d, c] : points)
        if (std::abs(c) > 0.0) {
            xs.push_back(d);
            ys.push_back(std::log(std::abs(c)));
        }
    if (xs.size() < 3) throw Error(ErrorKind::InsufficientPoints, "correlation_length needs >= 3 nonzero points");
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    CorrelationFit f;
    f.points = static_cast<int>(xs.size());
    const double den = n * sxx - sx * sx;
    if (den == 0.0) throw Error(ErrorKind::InsufficientPoints, "all points at one distance");
    f.slope = (n * sxy - sx * sy) / den;
    f.intercept = (sy - f.slope * sx) / n;
    double ss_tot = 0, ss_res = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (f.intercept + f.slope * xs[i]);
        ss_res += r * r;
        ss_tot += (ys[i] - sy / n) * (ys[i] - sy / n);
    }
    f.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    f.non_decaying = f.slope >= 0.0;
    f.xi = f.non_decaying ? std::numeric_limits<double>::infinity() : -1.0 / f.slope;
    return f;
}

// ---------------------------------------------------------------------------
// PEPS front-ends

inline ExpectationEstimate expval_bp(const TensorNetwork& tn_norm, const TensorNetwork& peps, const MessageSet& ms,
                                     const OperatorInsertion& ins) {
    return expval_bp(tn_norm, ms, operator_decoration(peps, ins));
}

// Log Z of the truncated cluster series on a (possibly decorated) network with
// a fixed background; loops must include strings that end on the decoration.
inline cplx truncated_log_z(const TensorNetwork& tn, const MessageSet& ms, const std::vector<GeneralizedLoop>& loops,
                            int m, const Decoration* dec = nullptr, int ursell_cap = kDefaultUrsellCap) {
    WeightEvaluator ev(tn, ms);
    cplx lz = 0.0;
    for (int v = 0; v < tn.num_vertices(); ++v) lz += std::log(dec && dec->find(v) ? ev.local(v, dec) : ev.z(v));
    std::vector<GeneralizedLoop> used;
    for (const auto& l : loops)
        if (l.weight() <= m) used.push_back(l);
    std::vector<cplx> z(used.size());
    parallel_for(used.size(), [&](std::size_t i) { z[i] = ev.weight(used[i], dec); });
    ClusterOptions opt;
    opt.max_weight = m;
    opt.ursell_cap = ursell_cap;
    for (const auto& c : enumerate_clusters(used, opt)) lz += c.phi_value() * cluster_product(c, z);
    return lz;
}

struct MergedObservable {
    TensorNetwork peps;
    OperatorInsertion insertion;
    MergeResult merge;
};

// Merges a multi-site region into one vertex carrying the dense operator.
inline MergedObservable merge_observable(const TensorNetwork& peps, const OperatorInsertion& ins) {
    MergedObservable out;
    out.merge = merge_vertices(peps, ins.region);
    out.peps = out.merge.tn;
    out.insertion.region = {out.merge.super_vertex};
    if (ins.dense.size() > 0) {
        out.insertion.dense = ins.dense;
    } else {
        std::vector<int> order(ins.region.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) { return ins.region[a] < ins.region[b]; });
        Eigen::MatrixXcd op = Eigen::MatrixXcd::Identity(1, 1);
        for (int i : order) op = detail::kron(op, ins.site_ops[i]);
        out.insertion.dense = op;
    }
    return out;
}

inline void write_estimates_csv(CsvWriter& csv, const std::vector<ExpectationEstimate>& es, const cplx* reference) {
    csv.header({"method", "truncation", "re", "im", "reference", "abs_error", "rel_error"});
    for (const auto& e : es) {
        const double err = reference ? std::abs(e.value - *reference) : 0.0;
        csv.row({e.method, std::to_string(e.truncation), fmt(e.value.real()), fmt(e.value.imag()),
                 reference ? fmt(reference->real()) : "", reference ? fmt(err) : "",
                 reference && std::abs(*reference) > 0 ? fmt(err / std::abs(*reference)) : ""});
    }
}

}  // namespace tnbp
