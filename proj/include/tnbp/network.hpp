#pragma once

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "graph.hpp"
#include "tensor.hpp"

namespace tnbp {

// Leg-id namespaces. Edge legs use the edge id directly.
inline constexpr LegId kPhysicalLegBase = LegId(1) << 40;
inline constexpr LegId kBraLegBase = LegId(1) << 41;
inline constexpr LegId kScratchLegBase = LegId(1) << 42;

inline LegId phys_leg(int v) { return kPhysicalLegBase + v; }

struct TensorNetwork {
    Graph graph;
    std::vector<int> bond_dims;    // per edge
    std::vector<Tensor> tensors;   // per vertex
    std::vector<int> phys_dims;    // per vertex; 0 means no physical leg

    int num_vertices() const { return graph.num_vertices(); }
    int num_edges() const { return graph.num_edges(); }

    bool closed() const {
        for (int d : phys_dims)
            if (d > 0) return false;
        return true;
    }

    std::vector<Leg> expected_legs(int v) const {
        std::vector<Leg> legs;
        for (const auto& [w, e] : graph.incident(v)) legs.push_back({e, bond_dims[e]});
        if (phys_dims[v] > 0) legs.push_back({phys_leg(v), phys_dims[v]});
        std::sort(legs.begin(), legs.end(), [](const Leg& a, const Leg& b) { return a.id < b.id; });
        return legs;
    }

    void validate() const {
        const int n = graph.num_vertices();
        if (static_cast<int>(tensors.size()) != n || static_cast<int>(phys_dims.size()) != n)
            throw Error(ErrorKind::InvalidNetwork, "tensor/physical arrays do not match vertex count");
        if (static_cast<int>(bond_dims.size()) != graph.num_edges())
            throw Error(ErrorKind::InvalidNetwork, "bond_dims does not match edge count");
        for (int e = 0; e < graph.num_edges(); ++e)
            if (bond_dims[e] < 1) throw Error(ErrorKind::InvalidNetwork, "edge " + std::to_string(e) + " has dim < 1");
        for (int v = 0; v < n; ++v)
            if (tensors[v].legs() != expected_legs(v))
                throw Error(ErrorKind::InvalidNetwork, "tensor legs of vertex " + std::to_string(v) +
                                                           " do not match incident edges/physical leg");
    }

    friend bool operator==(const TensorNetwork& a, const TensorNetwork& b) {
        return a.graph == b.graph && a.bond_dims == b.bond_dims && a.tensors == b.tensors && a.phys_dims == b.phys_dims;
    }
};

inline TensorNetwork make_network(Graph g, std::vector<int> bond_dims, std::vector<Tensor> tensors,
                                  std::vector<int> phys_dims = {}) {
    TensorNetwork tn;
    tn.graph = std::move(g);
    tn.bond_dims = std::move(bond_dims);
    tn.tensors = std::move(tensors);
    tn.phys_dims = phys_dims.empty() ? std::vector<int>(tn.graph.num_vertices(), 0) : std::move(phys_dims);
    tn.validate();
    return tn;
}

// log|Z| and arg Z, so large networks do not overflow.
struct LogScalar {
    double log_abs = -std::numeric_limits<double>::infinity();
    double phase = 0.0;

    cplx value() const { return std::polar(std::exp(log_abs), phase); }
    bool is_zero() const { return std::isinf(log_abs) && log_abs < 0; }
};

inline double wrap_phase(double p) {
    p = std::remainder(p, 2.0 * M_PI);
    if (p <= -M_PI) p += 2.0 * M_PI;
    return p;
}

inline constexpr double kDefaultContractCap = 67108864.0;  // 2^26 entries

namespace detail {

inline double shared_volume(const Tensor& a, const Tensor& b) {
    double s = 1.0;
    for (const auto& l : a.legs())
        if (b.has_leg(l.id)) s *= l.dim;
    return s;
}

inline bool shares_leg(const Tensor& a, const Tensor& b) {
    for (const auto& l : a.legs())
        if (b.has_leg(l.id)) return true;
    return false;
}

}  // namespace detail

namespace detail {

using LegSet = std::vector<Leg>;

inline double legset_volume(const LegSet& a) {
    double v = 1.0;
    for (const auto& l : a) v *= l.dim;
    return v;
}

inline double legset_shared(const LegSet& a, const LegSet& b, bool& any) {
    double s = 1.0;
    any = false;
    for (const auto& l : a)
        for (const auto& m : b)
            if (l.id == m.id) {
                s *= l.dim;
                any = true;
            }
    return s;
}

inline LegSet legset_merge(const LegSet& a, const LegSet& b) {
    LegSet out;
    for (const auto& l : a)
        if (std::none_of(b.begin(), b.end(), [&](const Leg& m) { return m.id == l.id; })) out.push_back(l);
    for (const auto& l : b)
        if (std::none_of(a.begin(), a.end(), [&](const Leg& m) { return m.id == l.id; })) out.push_back(l);
    return out;
}

// Greedy order by smallest intermediate, computed on leg sets alone so an
// over-budget network is rejected before any arithmetic.
inline std::vector<std::pair<int, int>> greedy_plan(std::vector<LegSet> ls, double cap) {
    std::vector<std::pair<int, int>> plan;
    while (ls.size() > 1) {
        int bi = -1, bj = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < static_cast<int>(ls.size()); ++i)
            for (int j = i + 1; j < static_cast<int>(ls.size()); ++j) {
                bool any = false;
                const double sv = legset_shared(ls[i], ls[j], any);
                if (!any) continue;
                const double out = legset_volume(ls[i]) * legset_volume(ls[j]) / (sv * sv);
                if (out < best) {
                    best = out;
                    bi = i;
                    bj = j;
                }
            }
        if (bi < 0) {
            // Disconnected pieces: combine the two smallest.
            std::vector<int> idx(ls.size());
            std::iota(idx.begin(), idx.end(), 0);
            std::stable_sort(idx.begin(), idx.end(),
                             [&](int a, int b) { return legset_volume(ls[a]) < legset_volume(ls[b]); });
            bi = std::min(idx[0], idx[1]);
            bj = std::max(idx[0], idx[1]);
        }
        bool any = false;
        const double sv = legset_shared(ls[bi], ls[bj], any);
        const double out_size = legset_volume(ls[bi]) * legset_volume(ls[bj]) / (sv * sv);
        if (out_size > cap)
            throw Error(ErrorKind::TooLarge, "intermediate of " + std::to_string(out_size) + " entries exceeds cap");
        ls[bi] = legset_merge(ls[bi], ls[bj]);
        ls.erase(ls.begin() + bj);
        plan.push_back({bi, bj});
    }
    return plan;
}

}  // namespace detail

// Pairwise contraction of a list of tensors. Greedy by smallest intermediate
// unless an rng is supplied, in which case connected pairs are chosen at
// random. Each intermediate is rescaled to unit max-norm; the accumulated
// log-scale is returned alongside the final tensor.
inline std::pair<Tensor, double> contract_all(std::vector<Tensor> ts, double cap = kDefaultContractCap,
                                              std::mt19937_64* rng = nullptr) {
    double log_scale = 0.0;
    if (ts.empty()) return {Tensor::scalar(1.0), 0.0};
    auto rescale = [&](Tensor& t) {
        const double m = t.max_abs();
        if (m > 0.0 && std::isfinite(m)) {
            t = t.scaled(1.0 / m);
            log_scale += std::log(m);
        }
    };
    auto step = [&](int bi, int bj) {
        Tensor c = contract_pair(ts[bi], ts[bj]);
        rescale(c);
        ts[bi] = std::move(c);
        ts.erase(ts.begin() + bj);
    };
    for (auto& t : ts) rescale(t);
    if (!rng) {
        std::vector<detail::LegSet> ls;
        for (const auto& t : ts) ls.push_back(t.legs());
        for (const auto& [bi, bj] : detail::greedy_plan(std::move(ls), cap)) step(bi, bj);
        return {std::move(ts[0]), log_scale};
    }
    while (ts.size() > 1) {
        int bi = -1, bj = -1;
        std::vector<std::pair<int, int>> cands;
        for (int i = 0; i < static_cast<int>(ts.size()); ++i)
            for (int j = i + 1; j < static_cast<int>(ts.size()); ++j)
                if (detail::shares_leg(ts[i], ts[j])) cands.push_back({i, j});
        if (!cands.empty()) {
            std::uniform_int_distribution<std::size_t> pick(0, cands.size() - 1);
            std::tie(bi, bj) = cands[pick(*rng)];
        } else {
            std::vector<int> idx(ts.size());
            std::iota(idx.begin(), idx.end(), 0);
            std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return ts[a].size() < ts[b].size(); });
            bi = std::min(idx[0], idx[1]);
            bj = std::max(idx[0], idx[1]);
        }
        const double out_size =
            double(ts[bi].size()) * double(ts[bj].size()) / std::pow(detail::shared_volume(ts[bi], ts[bj]), 2);
        if (out_size > cap)
            throw Error(ErrorKind::TooLarge, "intermediate of " + std::to_string(out_size) + " entries exceeds cap");
        step(bi, bj);
    }
    return {std::move(ts[0]), log_scale};
}

inline LogScalar exact_contract_log(const TensorNetwork& tn, double cap = kDefaultContractCap,
                                    std::mt19937_64* rng = nullptr) {
    if (!tn.closed()) throw Error(ErrorKind::InvalidNetwork, "exact_contract needs a closed network");
    auto [t, ls] = contract_all(tn.tensors, cap, rng);
    const cplx v = t.value();
    LogScalar out;
    if (std::abs(v) == 0.0) return out;
    out.log_abs = std::log(std::abs(v)) + ls;
    out.phase = std::arg(v);
    return out;
}

inline cplx exact_contract(const TensorNetwork& tn, double cap = kDefaultContractCap) {
    return exact_contract_log(tn, cap).value();
}

// Same contraction with a random pair order; used to check order independence.
inline cplx exact_contract_random_order(const TensorNetwork& tn, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return exact_contract_log(tn, kDefaultContractCap, &rng).value();
}

// ---------------------------------------------------------------------------
// PEPS helpers

struct OperatorInsertion {
    std::vector<int> region;
    std::vector<Eigen::MatrixXcd> site_ops;  // one per region vertex, acting on its physical leg
    Eigen::MatrixXcd dense;                  // alternative: one matrix on the fused region space (ascending vertices)
};

// Replacement site tensors on a region of a closed network.
struct Decoration {
    std::vector<int> region;
    std::vector<Tensor> tensors;

    const Tensor* find(int v) const {
        for (std::size_t i = 0; i < region.size(); ++i)
            if (region[i] == v) return &tensors[i];
        return nullptr;
    }
};

namespace detail {

// Applies a matrix to the physical leg of a ket tensor.
inline Tensor apply_physical(const Tensor& t, int v, const Eigen::MatrixXcd& op) {
    const int d = t.dim(phys_leg(v));
    if (d == 0) throw Error(ErrorKind::MissingPhysicalLeg, "vertex " + std::to_string(v) + " has no physical leg");
    if (op.rows() != d || op.cols() != d)
        throw Error(ErrorKind::RegionMismatch, "operator on vertex " + std::to_string(v) + " has wrong dimension");
    const LegId p = phys_leg(v);
    const LegId q = kScratchLegBase;
    std::vector<cplx> od(static_cast<std::size_t>(d) * d);
    for (int a = 0; a < d; ++a)        // input index on leg p
        for (int b = 0; b < d; ++b)    // output index on leg q
            od[a * d + b] = op(b, a);
    Tensor o({{p, d}, {q, d}}, std::move(od));
    return contract_pair(t, o).relabel(q, p);
}

// Double-layer tensor conj(bra) * ket over the physical leg, bond legs fused
// pairwise as ket*D + bra.
inline Tensor double_layer(const Tensor& ket, const Tensor& bra, int v) {
    const LegId p = phys_leg(v);
    Tensor b = bra.conj();
    std::vector<LegId> edge_ids;
    for (const auto& l : ket.legs())
        if (l.id != p) edge_ids.push_back(l.id);
    for (LegId e : edge_ids) b = b.relabel(e, kBraLegBase + e);
    Tensor both = contract_pair(ket, b);
    std::vector<LegId> order;
    std::vector<Leg> legs;
    for (LegId e : edge_ids) {
        order.push_back(e);
        order.push_back(kBraLegBase + e);
        legs.push_back({e, ket.dim(e) * ket.dim(e)});
    }
    return Tensor(std::move(legs), both.data_in_order(order));
}

}  // namespace detail

inline TensorNetwork build_norm_network(const TensorNetwork& peps) {
    TensorNetwork out;
    out.graph = peps.graph;
    out.bond_dims.resize(peps.num_edges());
    for (int e = 0; e < peps.num_edges(); ++e) out.bond_dims[e] = peps.bond_dims[e] * peps.bond_dims[e];
    out.phys_dims.assign(peps.num_vertices(), 0);
    for (int v = 0; v < peps.num_vertices(); ++v) {
        if (peps.phys_dims[v] <= 0)
            throw Error(ErrorKind::MissingPhysicalLeg, "vertex " + std::to_string(v) + " has no physical leg");
        out.tensors.push_back(detail::double_layer(peps.tensors[v], peps.tensors[v], v));
    }
    out.validate();
    return out;
}

inline Decoration operator_decoration(const TensorNetwork& peps, const OperatorInsertion& ins) {
    Decoration dec;
    std::set<int> seen;
    for (std::size_t i = 0; i < ins.region.size(); ++i) {
        const int v = ins.region[i];
        if (v < 0 || v >= peps.num_vertices() || !seen.insert(v).second)
            throw Error(ErrorKind::RegionMismatch, "region vertex " + std::to_string(v) + " invalid or repeated");
    }
    if (ins.dense.size() > 0) {
        if (ins.region.size() != 1)
            throw Error(ErrorKind::RegionMismatch, "a dense multi-site operator needs its region merged first");
        const int v = ins.region[0];
        dec.region = {v};
        dec.tensors = {detail::double_layer(detail::apply_physical(peps.tensors[v], v, ins.dense), peps.tensors[v], v)};
        return dec;
    }
    if (ins.site_ops.size() != ins.region.size())
        throw Error(ErrorKind::RegionMismatch, "one site operator per region vertex required");
    for (std::size_t i = 0; i < ins.region.size(); ++i) {
        const int v = ins.region[i];
        dec.region.push_back(v);
        dec.tensors.push_back(
            detail::double_layer(detail::apply_physical(peps.tensors[v], v, ins.site_ops[i]), peps.tensors[v], v));
    }
    return dec;
}

// Decorations on several sites combined into one.
inline Decoration combine(const std::vector<Decoration>& parts) {
    Decoration out;
    for (const auto& d : parts)
        for (std::size_t i = 0; i < d.region.size(); ++i) {
            if (out.find(d.region[i])) throw Error(ErrorKind::OverlappingRegions, "decorations overlap");
            out.region.push_back(d.region[i]);
            out.tensors.push_back(d.tensors[i]);
        }
    return out;
}

inline TensorNetwork apply_decoration(TensorNetwork tn, const Decoration& dec) {
    for (std::size_t i = 0; i < dec.region.size(); ++i) {
        const int v = dec.region[i];
        if (v < 0 || v >= tn.num_vertices()) throw Error(ErrorKind::RegionMismatch, "decoration vertex out of range");
        if (dec.tensors[i].legs() != tn.tensors[v].legs())
            throw Error(ErrorKind::RegionMismatch, "decoration legs differ at vertex " + std::to_string(v));
        tn.tensors[v] = dec.tensors[i];
    }
    return tn;
}

inline TensorNetwork insert_operator(const TensorNetwork& tn_norm, const TensorNetwork& peps,
                                     const OperatorInsertion& ins) {
    if (tn_norm.graph != peps.graph) throw Error(ErrorKind::RegionMismatch, "norm network does not match the PEPS");
    return apply_decoration(tn_norm, operator_decoration(peps, ins));
}

// ---------------------------------------------------------------------------
// Vertex merging

struct MergeResult {
    TensorNetwork tn;
    std::vector<int> vertex_map;  // old vertex -> new vertex
    std::vector<int> edge_map;    // old edge -> new edge, -1 when internal to the region
    int super_vertex = -1;
};

// Contracts a region into one vertex. Parallel edges created by the merge are
// fused (ascending old edge id, row-major); physical legs of the region are
// fused in ascending vertex order.
inline MergeResult merge_vertices(const TensorNetwork& tn, std::vector<int> region) {
    std::sort(region.begin(), region.end());
    region.erase(std::unique(region.begin(), region.end()), region.end());
    if (region.empty()) throw Error(ErrorKind::RegionMismatch, "empty region");
    const int n = tn.num_vertices();
    std::vector<char> in(n, 0);
    for (int v : region) {
        if (v < 0 || v >= n) throw Error(ErrorKind::RegionMismatch, "region vertex out of range");
        in[v] = 1;
    }
    MergeResult res;
    res.vertex_map.assign(n, -1);
    int next = 0;
    for (int v = 0; v < n; ++v) {
        if (in[v]) {
            if (res.super_vertex < 0) res.super_vertex = next++;
            res.vertex_map[v] = res.super_vertex;
        } else {
            res.vertex_map[v] = next++;
        }
    }
    const int n2 = next;

    // Group surviving edges by new endpoint pair.
    std::map<std::pair<int, int>, std::vector<int>> groups;
    std::vector<std::pair<int, int>> group_order;
    res.edge_map.assign(tn.num_edges(), -1);
    for (const auto& e : tn.graph.edges()) {
        const int a = res.vertex_map[e.u], b = res.vertex_map[e.v];
        if (a == b) continue;
        const auto key = std::make_pair(std::min(a, b), std::max(a, b));
        auto it = groups.find(key);
        if (it == groups.end()) {
            groups[key] = {e.id};
            group_order.push_back(key);
        } else {
            it->second.push_back(e.id);
        }
    }
    Graph g2(n2, {});
    std::vector<int> dims2;
    for (const auto& key : group_order) {
        const int id = g2.add_edge(key.first, key.second);
        int d = 1;
        for (int e : groups[key]) {
            res.edge_map[e] = id;
            d *= tn.bond_dims[e];
        }
        dims2.push_back(d);
    }

    std::vector<Tensor> tensors2(n2);
    std::vector<int> phys2(n2, 0);
    const LegId fused_tag = kScratchLegBase + (LegId(1) << 38);
    auto scratch = [&](LegId final_id) {
        return final_id >= kPhysicalLegBase ? kScratchLegBase + (LegId(1) << 39) + (final_id - kPhysicalLegBase)
                                            : kScratchLegBase + final_id;
    };
    auto remap = [&](Tensor t) {
        for (const auto& key : group_order) {
            const auto& grp = groups[key];
            if (grp.size() < 2 || !t.has_leg(grp[0])) continue;
            t = fuse_legs(t, std::vector<LegId>(grp.begin(), grp.end()), fused_tag + res.edge_map[grp[0]]);
        }
        std::vector<std::pair<LegId, LegId>> moves;
        for (const auto& l : t.legs()) {
            LegId to;
            if (l.id >= fused_tag)
                to = l.id - fused_tag;
            else if (l.id >= kPhysicalLegBase)
                to = phys_leg(res.vertex_map[static_cast<int>(l.id - kPhysicalLegBase)]);
            else
                to = res.edge_map[l.id];
            moves.push_back({l.id, to});
        }
        for (const auto& [from, to] : moves) t = t.relabel(from, scratch(to));
        for (const auto& [from, to] : moves) t = t.relabel(scratch(to), to);
        return t;
    };

    for (int v = 0; v < n; ++v) {
        if (in[v]) continue;
        tensors2[res.vertex_map[v]] = remap(tn.tensors[v]);
        phys2[res.vertex_map[v]] = tn.phys_dims[v];
    }
    {
        std::vector<Tensor> parts;
        for (int v : region) parts.push_back(tn.tensors[v]);
        auto [t, ls] = contract_all(parts);
        t = t.scaled(std::exp(ls));
        std::vector<LegId> phys_ids;
        int pd = 1;
        for (int v : region)
            if (tn.phys_dims[v] > 0) {
                phys_ids.push_back(phys_leg(v));
                pd *= tn.phys_dims[v];
            }
        if (!phys_ids.empty()) {
            t = fuse_legs(t, phys_ids, phys_leg(region[0]));
            phys2[res.super_vertex] = pd;
        }
        tensors2[res.super_vertex] = remap(t);
    }
    res.tn = make_network(std::move(g2), std::move(dims2), std::move(tensors2), std::move(phys2));
    return res;
}

namespace detail {

inline Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// exp(lambda * op) by eigendecomposition.
inline Eigen::MatrixXcd exp_operator(const Eigen::MatrixXcd& op, cplx lambda) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(op);
    if (es.info() != Eigen::Success) throw Error(ErrorKind::NumericalCollapse, "eigendecomposition failed");
    const Eigen::MatrixXcd& V = es.eigenvectors();
    Eigen::VectorXcd d = (lambda * es.eigenvalues().array()).exp();
    return V * d.asDiagonal() * V.inverse();
}

}  // namespace detail

// Network for <psi| prod_i exp(lambda_i O_i) |psi>. Single-site regions keep the
// original graph; multi-site regions are merged into one vertex each, in which
// case the returned network lives on the merged graph.
inline TensorNetwork perturbed_network(const TensorNetwork& tn_norm, const TensorNetwork& peps,
                                       const std::vector<std::pair<OperatorInsertion, cplx>>& ins_list) {
    std::set<int> used;
    for (const auto& [ins, lam] : ins_list)
        for (int v : ins.region)
            if (!used.insert(v).second)
                throw Error(ErrorKind::OverlappingRegions, "vertex " + std::to_string(v) + " in two regions");

    auto region_operator = [&](const OperatorInsertion& ins) {
        if (ins.dense.size() > 0) return Eigen::MatrixXcd(ins.dense);
        if (ins.site_ops.size() != ins.region.size())
            throw Error(ErrorKind::RegionMismatch, "one site operator per region vertex required");
        std::vector<int> order(ins.region.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) { return ins.region[a] < ins.region[b]; });
        Eigen::MatrixXcd op = Eigen::MatrixXcd::Identity(1, 1);
        for (int i : order) op = detail::kron(op, ins.site_ops[i]);
        return op;
    };

    bool all_single = true;
    for (const auto& [ins, lam] : ins_list) all_single = all_single && ins.region.size() == 1;
    if (all_single) {
        TensorNetwork out = tn_norm;
        for (const auto& [ins, lam] : ins_list) {
            OperatorInsertion e;
            e.region = ins.region;
            e.dense = detail::exp_operator(region_operator(ins), lam);
            out = apply_decoration(out, operator_decoration(peps, e));
        }
        return out;
    }

    TensorNetwork cur = peps;
    std::vector<int> map(peps.num_vertices());
    std::iota(map.begin(), map.end(), 0);
    std::vector<std::pair<int, Eigen::MatrixXcd>> ops;
    for (const auto& [ins, lam] : ins_list) {
        std::vector<int> reg;
        for (int v : ins.region) reg.push_back(map[v]);
        ops.push_back({-1, detail::exp_operator(region_operator(ins), lam)});
        if (reg.size() > 1) {
            MergeResult mr = merge_vertices(cur, reg);
            for (auto& m : map) m = mr.vertex_map[m];
            for (auto& o : ops)
                if (o.first >= 0) o.first = mr.vertex_map[o.first];
            cur = std::move(mr.tn);
            ops.back().first = mr.super_vertex;
        } else {
            ops.back().first = reg[0];
        }
    }
    TensorNetwork out = build_norm_network(cur);
    for (const auto& [v, op] : ops) {
        OperatorInsertion e;
        e.region = {v};
        e.dense = op;
        out = apply_decoration(out, operator_decoration(cur, e));
    }
    return out;
}

}  // namespace tnbp
