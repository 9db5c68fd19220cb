#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "network.hpp"

namespace tnbp {

inline constexpr const char* kMessageConvention = "unit-2norm/max-component-real-positive";

// Directed edge index: 2e for edge.u -> edge.v, 2e+1 for edge.v -> edge.u.
inline int directed_index(const Graph& g, int e, int from) { return 2 * e + (from == g.edge(e).u ? 0 : 1); }

struct MessageSet {
    std::vector<Tensor> msg;          // per directed edge, one leg (the edge id)
    std::vector<cplx> inner_products; // per edge, bilinear pairing of the two messages
    std::vector<cplx> sqrt_inner;     // per edge, principal branch, recorded
    double floor = 1e-12;
    std::string convention = kMessageConvention;

    // Message arriving at v along edge e.
    const Tensor& incoming(const Graph& g, int v, int e) const { return msg[directed_index(g, e, g.edge(e).other(v))]; }
    // Message leaving v along edge e.
    const Tensor& outgoing(const Graph& g, int v, int e) const { return msg[directed_index(g, e, v)]; }

    void refresh(const Graph& g) {
        inner_products.assign(g.num_edges(), 0.0);
        sqrt_inner.assign(g.num_edges(), 0.0);
        for (int e = 0; e < g.num_edges(); ++e) {
            inner_products[e] = inner(msg[2 * e], msg[2 * e + 1]);
            sqrt_inner[e] = std::sqrt(inner_products[e]);
        }
    }

    void check_edge(int e) const {
        if (std::abs(inner_products.at(e)) <= floor)
            throw Error(ErrorKind::DegenerateInnerProduct,
                        "edge " + std::to_string(e) + ": |I| = " + std::to_string(std::abs(inner_products[e])));
    }

    // mu_{n->v} / sqrt(I_vn)
    Tensor normalized_incoming(const Graph& g, int v, int e) const {
        check_edge(e);
        return incoming(g, v, e).scaled(1.0 / sqrt_inner[e]);
    }
};

struct BPResult {
    MessageSet messages;
    double residual = 0.0;
    int iterations = 0;
    bool converged = false;
};

enum class SeedKind { Uniform, Random };

struct BPOptions {
    double damping = 0.2;
    double tol = 1e-10;
    int max_iters = 10000;
    SeedKind seed_kind = SeedKind::Uniform;
    std::uint64_t seed = 1;
    double collapse_floor = 1e-14;
};

namespace detail {

// Unit 2-norm; the first component of (numerically) maximal modulus is made
// real-positive.
inline void canonical_gauge(Tensor& t) {
    const double n = t.norm();
    if (n == 0.0) return;
    double m = t.max_abs();
    std::size_t k = 0;
    for (; k < t.size(); ++k)
        if (std::abs(t.data()[k]) >= m * (1.0 - 1e-9)) break;
    const cplx ph = t.data()[k] / std::abs(t.data()[k]);
    t = t.scaled(std::conj(ph) / n);
    t.data()[k] = std::abs(t.data()[k]);
}

// Phase-aligns `u` (unit norm) to `ref` (unit norm).
inline Tensor align_to(const Tensor& u, const Tensor& ref) {
    cplx ov = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) ov += std::conj(ref.data()[i]) * u.data()[i];
    if (std::abs(ov) == 0.0) return u;
    return u.scaled(std::conj(ov) / std::abs(ov));
}

inline double distance(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::norm(a.data()[i] - b.data()[i]);
    return std::sqrt(s);
}

// T_v contracted with incoming messages on every edge except `skip`.
inline Tensor contract_incoming(const TensorNetwork& tn, const MessageSet& ms, int v, int skip) {
    Tensor t = tn.tensors[v];
    for (const auto& [w, e] : tn.graph.incident(v)) {
        if (e == skip) continue;
        t = contract_pair(t, ms.incoming(tn.graph, v, e));
    }
    return t;
}

inline Tensor raw_update(const TensorNetwork& tn, const MessageSet& ms, int v, int e, double collapse_floor) {
    Tensor u = contract_incoming(tn, ms, v, e);
    const double n = u.norm();
    if (!(n >= collapse_floor * std::max(1.0, tn.tensors[v].norm())))
        throw Error(ErrorKind::NumericalCollapse,
                    "update " + std::to_string(v) + "->" + std::to_string(tn.graph.edge(e).other(v)) + " has norm " +
                        std::to_string(n));
    return u.scaled(1.0 / n);
}

}  // namespace detail

inline MessageSet initial_messages(const TensorNetwork& tn, SeedKind kind, std::uint64_t seed) {
    MessageSet ms;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    ms.msg.resize(2 * tn.num_edges());
    for (int e = 0; e < tn.num_edges(); ++e)
        for (int s = 0; s < 2; ++s) {
            const int d = tn.bond_dims[e];
            std::vector<cplx> v(d, cplx(1.0));
            if (kind == SeedKind::Random)
                for (auto& x : v) x = {g(rng), g(rng)};
            Tensor t = Tensor::vector(e, std::move(v));
            detail::canonical_gauge(t);
            ms.msg[2 * e + s] = std::move(t);
        }
    ms.refresh(tn.graph);
    return ms;
}

// Largest aligned distance between a message and the update produced from
// its incoming messages.
inline double bp_residual(const TensorNetwork& tn, const MessageSet& ms, double collapse_floor = 1e-14) {
    double r = 0.0;
    for (const auto& edge : tn.graph.edges())
        for (int from : {edge.u, edge.v}) {
            const Tensor& old = ms.outgoing(tn.graph, from, edge.id);
            Tensor u = detail::raw_update(tn, ms, from, edge.id, collapse_floor);
            r = std::max(r, detail::distance(detail::align_to(u, old), old));
        }
    return r;
}

// One synchronous damped sweep; returns the pre-sweep residual.
inline double bp_sweep(const TensorNetwork& tn, MessageSet& ms, double damping, double collapse_floor = 1e-14) {
    std::vector<Tensor> next(ms.msg.size());
    double r = 0.0;
    for (const auto& edge : tn.graph.edges())
        for (int from : {edge.u, edge.v}) {
            const int d = directed_index(tn.graph, edge.id, from);
            const Tensor& old = ms.msg[d];
            Tensor u = detail::align_to(detail::raw_update(tn, ms, from, edge.id, collapse_floor), old);
            r = std::max(r, detail::distance(u, old));
            Tensor mixed = u.scaled(1.0 - damping);
            for (std::size_t i = 0; i < mixed.size(); ++i) mixed.data()[i] += damping * old.data()[i];
            detail::canonical_gauge(mixed);
            next[d] = std::move(mixed);
        }
    ms.msg = std::move(next);
    return r;
}

inline BPResult bp_iterate(const TensorNetwork& tn, MessageSet init, const BPOptions& opt = {}) {
    if (!tn.closed()) throw Error(ErrorKind::InvalidNetwork, "bp_iterate needs a closed network");
    if (!(opt.damping >= 0.0 && opt.damping < 1.0)) throw Error(ErrorKind::InvalidInput, "damping must be in [0,1)");
    BPResult res;
    res.messages = std::move(init);
    for (auto& m : res.messages.msg) detail::canonical_gauge(m);
    for (res.iterations = 0; res.iterations < opt.max_iters;) {
        const double r = bp_sweep(tn, res.messages, opt.damping, opt.collapse_floor);
        ++res.iterations;
        if (r <= opt.tol) break;
    }
    res.residual = bp_residual(tn, res.messages, opt.collapse_floor);
    res.converged = res.residual <= opt.tol;
    res.messages.refresh(tn.graph);
    return res;
}

inline BPResult bp_iterate(const TensorNetwork& tn, const BPOptions& opt = {}) {
    return bp_iterate(tn, initial_messages(tn, opt.seed_kind, opt.seed), opt);
}

// z_v = [prod_n mu_{n->v}/sqrt(I_vn)] * T_v. `site` overrides T_v (decorated tensor).
inline cplx bp_local_factor(const TensorNetwork& tn, const MessageSet& ms, int v, const Tensor* site = nullptr) {
    Tensor t = site ? *site : tn.tensors[v];
    for (const auto& [w, e] : tn.graph.incident(v)) t = contract_pair(t, ms.normalized_incoming(tn.graph, v, e));
    return t.value();
}

struct BPFreeEnergy {
    double log_abs_z = 0.0;  // log|Z_BP|
    double phase = 0.0;      // arg Z_BP, wrapped to (-pi, pi]

    double free_energy() const { return -log_abs_z; }
    cplx log_z() const { return {log_abs_z, phase}; }
};

inline BPFreeEnergy bp_free_energy(const TensorNetwork& tn, const MessageSet& ms) {
    BPFreeEnergy f;
    double ph = 0.0;
    for (int v = 0; v < tn.num_vertices(); ++v) {
        const cplx z = bp_local_factor(tn, ms, v);
        if (z == 0.0) throw Error(ErrorKind::ZeroLocalFactor, "z_" + std::to_string(v) + " = 0");
        f.log_abs_z += std::log(std::abs(z));
        ph += std::arg(z);
    }
    f.phase = wrap_phase(ph);
    return f;
}

// P = 1 - mu_{v->u} mu_{u->v}^T / I on edge (u,v); rows index the u-side leg.
inline Eigen::MatrixXcd edge_projector(const Graph& g, const MessageSet& ms, int e) {
    ms.check_edge(e);
    const Tensor& a = ms.msg[2 * e];      // u -> v
    const Tensor& b = ms.msg[2 * e + 1];  // v -> u
    const int d = static_cast<int>(a.size());
    Eigen::MatrixXcd p = Eigen::MatrixXcd::Identity(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) p(i, j) -= b.data()[i] * a.data()[j] / ms.inner_products[e];
    (void)g;
    return p;
}

// Projector as a tensor with the u-side on leg `u_leg` and the v-side on `v_leg`.
inline Tensor projector_tensor(const Graph& g, const MessageSet& ms, int e, LegId u_leg, LegId v_leg) {
    const Eigen::MatrixXcd p = edge_projector(g, ms, e);
    const int d = static_cast<int>(p.rows());
    std::vector<cplx> data(static_cast<std::size_t>(d) * d);
    const bool u_first = u_leg < v_leg;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) data[u_first ? i * d + j : j * d + i] = p(i, j);
    std::vector<Leg> legs = u_first ? std::vector<Leg>{{u_leg, d}, {v_leg, d}} : std::vector<Leg>{{v_leg, d}, {u_leg, d}};
    return Tensor(std::move(legs), std::move(data));
}

// ---------------------------------------------------------------------------
// Damped Newton refinement

namespace detail {

struct NewtonLayout {
    std::vector<int> pinned;  // per directed edge, pinned component
    std::vector<int> offset;  // per directed edge, start in the real unknown vector
    int size = 0;
};

inline NewtonLayout newton_layout(const MessageSet& ms) {
    NewtonLayout lay;
    for (const auto& m : ms.msg) {
        int k = 0;
        for (std::size_t i = 1; i < m.size(); ++i)
            if (std::abs(m.data()[i]) > std::abs(m.data()[k]) * (1.0 + 1e-9)) k = static_cast<int>(i);
        lay.pinned.push_back(k);
        lay.offset.push_back(lay.size);
        lay.size += 2 * (static_cast<int>(m.size()) - 1);
    }
    return lay;
}

inline MessageSet unpack(const MessageSet& shape, const NewtonLayout& lay, const Eigen::VectorXd& x) {
    MessageSet ms = shape;
    for (std::size_t d = 0; d < ms.msg.size(); ++d) {
        Tensor& m = ms.msg[d];
        int o = lay.offset[d];
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (static_cast<int>(i) == lay.pinned[d]) {
                m.data()[i] = 1.0;
            } else {
                m.data()[i] = {x[o], x[o + 1]};
                o += 2;
            }
        }
    }
    return ms;
}

inline Eigen::VectorXd pack(const MessageSet& ms, const NewtonLayout& lay) {
    Eigen::VectorXd x(lay.size);
    for (std::size_t d = 0; d < ms.msg.size(); ++d) {
        const Tensor& m = ms.msg[d];
        const cplx piv = m.data()[lay.pinned[d]];
        int o = lay.offset[d];
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (static_cast<int>(i) == lay.pinned[d]) continue;
            const cplx c = m.data()[i] / piv;
            x[o] = c.real();
            x[o + 1] = c.imag();
            o += 2;
        }
    }
    return x;
}

inline Eigen::VectorXd newton_residual(const TensorNetwork& tn, const MessageSet& shape, const NewtonLayout& lay,
                                       const Eigen::VectorXd& x) {
    const MessageSet ms = unpack(shape, lay, x);
    Eigen::VectorXd r(lay.size);
    for (const auto& edge : tn.graph.edges())
        for (int from : {edge.u, edge.v}) {
            const int d = directed_index(tn.graph, edge.id, from);
            const Tensor u = contract_incoming(tn, ms, from, edge.id);
            const cplx piv = u.data()[lay.pinned[d]];
            if (std::abs(piv) < 1e-300) throw Error(ErrorKind::SingularJacobian, "pinned component vanished");
            int o = lay.offset[d];
            for (std::size_t i = 0; i < u.size(); ++i) {
                if (static_cast<int>(i) == lay.pinned[d]) continue;
                const cplx c = u.data()[i] / piv - ms.msg[d].data()[i];
                r[o] = c.real();
                r[o + 1] = c.imag();
                o += 2;
            }
        }
    return r;
}

}  // namespace detail

struct NewtonOptions {
    double damping = 1.0;  // initial step fraction; halved on failure to decrease the residual
    double tol = 1e-10;
    int max_iters = 50;
    double fd_step = 1e-7;
};

// Damped Newton on the fixed-point map with one pinned component per message.
// Can land on fixed points that plain iteration flows away from.
inline BPResult refine_fixed_point(const TensorNetwork& tn, const MessageSet& seed, const NewtonOptions& opt = {}) {
    MessageSet shape = seed;
    for (auto& m : shape.msg) detail::canonical_gauge(m);
    const detail::NewtonLayout lay = detail::newton_layout(shape);
    Eigen::VectorXd x = detail::pack(shape, lay);
    BPResult res;
    auto finish = [&](const Eigen::VectorXd& xv) {
        res.messages = detail::unpack(shape, lay, xv);
        for (auto& m : res.messages.msg) detail::canonical_gauge(m);
        res.residual = bp_residual(tn, res.messages);
        res.converged = res.residual <= opt.tol;
        res.messages.refresh(tn.graph);
    };
    finish(x);
    if (res.converged || lay.size == 0) return res;

    Eigen::VectorXd r = detail::newton_residual(tn, shape, lay, x);
    for (int it = 1; it <= opt.max_iters; ++it) {
        Eigen::MatrixXd jac(lay.size, lay.size);
        for (int j = 0; j < lay.size; ++j) {
            Eigen::VectorXd xp = x;
            const double h = opt.fd_step * std::max(1.0, std::abs(x[j]));
            xp[j] += h;
            jac.col(j) = (detail::newton_residual(tn, shape, lay, xp) - r) / h;
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
        lu.setThreshold(1e-13);
        if (lu.rank() < lay.size)
            throw Error(ErrorKind::SingularJacobian, "rank " + std::to_string(lu.rank()) + " < " + std::to_string(lay.size));
        const Eigen::VectorXd step = lu.solve(-r);
        double alpha = opt.damping;
        Eigen::VectorXd xn = x + alpha * step;
        Eigen::VectorXd rn = detail::newton_residual(tn, shape, lay, xn);
        for (int k = 0; k < 30 && rn.norm() >= r.norm(); ++k) {
            alpha *= 0.5;
            xn = x + alpha * step;
            rn = detail::newton_residual(tn, shape, lay, xn);
        }
        x = xn;
        r = rn;
        res.iterations = it;
        finish(x);
        if (res.converged) return res;
    }
    throw Error(ErrorKind::NotConverged, "Newton refinement stopped at residual " + std::to_string(res.residual));
}

// ---------------------------------------------------------------------------
// Stability probe

enum class Stability { Stable, Unstable, Inconclusive };

inline const char* stability_name(Stability s) {
    switch (s) {
        case Stability::Stable: return "stable";
        case Stability::Unstable: return "unstable";
        case Stability::Inconclusive: return "inconclusive";
    }
    return "?";
}

struct StabilityReport {
    Stability verdict = Stability::Inconclusive;
    double growth = 1.0;               // median growth factor of the deviation per sweep
    std::vector<double> growth_samples;
};

struct StabilityOptions {
    int n_perturbations = 3;
    double epsilon = 1e-7;
    int sweeps = 1500;
    double damping = 0.2;
    double band = 1e-7;        // |growth - 1| below this is inconclusive
    double saturation = 1e-3;  // deviation at which growth is measured before nonlinearity
    double noise_floor = 1e-12;  // deviation below which rounding dominates
    std::uint64_t seed = 7;
};

inline double message_deviation(const MessageSet& a, const MessageSet& b) {
    double r = 0.0;
    for (std::size_t d = 0; d < a.msg.size(); ++d)
        r = std::max(r, detail::distance(detail::align_to(a.msg[d], b.msg[d]), b.msg[d]));
    return r;
}

// Perturbs the fixed point and measures whether iteration pulls it back.
// The growth rate is read off between a quarter of the sweep budget (after
// transients) and either the end or the first sweep that saturates or drops
// into rounding noise.
inline StabilityReport stability_probe(const TensorNetwork& tn, const MessageSet& fixed,
                                       const StabilityOptions& opt = {}) {
    StabilityReport rep;
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> g;
    MessageSet base = fixed;
    for (auto& m : base.msg) detail::canonical_gauge(m);
    for (int p = 0; p < opt.n_perturbations; ++p) {
        MessageSet ms = base;
        for (auto& m : ms.msg) {
            for (auto& x : m.data()) x += opt.epsilon * cplx(g(rng), g(rng));
            detail::canonical_gauge(m);
        }
        std::vector<double> dev{message_deviation(ms, base)};
        int stop = opt.sweeps;
        for (int s = 1; s <= opt.sweeps; ++s) {
            bp_sweep(tn, ms, opt.damping);
            dev.push_back(message_deviation(ms, base));
            if (dev.back() > opt.saturation || dev.back() < opt.noise_floor) {
                stop = s;
                break;
            }
        }
        const int t1 = std::min(opt.sweeps / 4, stop / 2);
        double growth;
        if (stop <= t1 || dev[t1] == 0.0) {
            growth = std::numeric_limits<double>::infinity();
        } else if (dev[stop] == 0.0) {
            growth = 0.0;
        } else {
            growth = std::pow(dev[stop] / dev[t1], 1.0 / (stop - t1));
        }
        rep.growth_samples.push_back(growth);
    }
    std::vector<double> s = rep.growth_samples;
    std::sort(s.begin(), s.end());
    rep.growth = s[s.size() / 2];
    if (rep.growth > 1.0 + opt.band)
        rep.verdict = Stability::Unstable;
    else if (rep.growth < 1.0 - opt.band)
        rep.verdict = Stability::Stable;
    else
        rep.verdict = Stability::Inconclusive;
    return rep;
}

}  // namespace tnbp
