#pragma once

#include <array>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "bp.hpp"
#include "network.hpp"

namespace tnbp {

enum class Topology { Torus, Cylinder };

// Lattice of L rows by `cols` columns (cols = 0 means L). The cylinder is
// periodic along rows (the column index wraps) and open across them.
struct IsingParams {
    int L = 4;
    double beta = 0.2;
    double h = 0.0;
    Topology topology = Topology::Torus;
    int cols = 0;

    int rows() const { return L; }
    int columns() const { return cols > 0 ? cols : L; }
    int site(int r, int c) const { return r * columns() + c; }
};

namespace detail {

// Bonds of a periodic/open lattice with multiplicities; wrap-around on a
// length-2 direction produces repeated pairs, which are merged into one edge
// with summed coupling.
struct Bonds {
    int n = 0;
    std::vector<std::pair<int, int>> pairs;
    std::vector<int> multiplicity;
};

inline void add_bond(Bonds& b, std::map<std::pair<int, int>, int>& index, int x, int y) {
    if (x == y) return;
    const auto key = std::make_pair(std::min(x, y), std::max(x, y));
    auto it = index.find(key);
    if (it != index.end()) {
        ++b.multiplicity[it->second];
        return;
    }
    index[key] = static_cast<int>(b.pairs.size());
    b.pairs.push_back(key);
    b.multiplicity.push_back(1);
}

inline Bonds square_bonds(const IsingParams& p) {
    if (p.rows() < 2 || p.columns() < 2) throw Error(ErrorKind::InvalidInput, "Ising lattice needs L >= 2");
    Bonds b;
    b.n = p.rows() * p.columns();
    std::map<std::pair<int, int>, int> index;
    for (int r = 0; r < p.rows(); ++r)
        for (int c = 0; c < p.columns(); ++c) {
            add_bond(b, index, p.site(r, c), p.site(r, (c + 1) % p.columns()));
            if (p.topology == Topology::Torus)
                add_bond(b, index, p.site(r, c), p.site((r + 1) % p.rows(), c));
            else if (r + 1 < p.rows())
                add_bond(b, index, p.site(r, c), p.site(r + 1, c));
        }
    return b;
}

// sqrt of [[e^J, e^-J], [e^-J, e^J]] for J >= 0, symmetric.
inline std::array<double, 4> sqrt_bond(double J) {
    const double a = std::sqrt(2.0 * std::cosh(J));
    const double b = std::sqrt(2.0 * std::sinh(J));
    return {0.5 * (a + b), 0.5 * (a - b), 0.5 * (a - b), 0.5 * (a + b)};
}

// T_v[i...] = sum_s w[s] prod_e S_e[s][i_e]; spin index 0 is up.
inline Tensor ising_site(const Graph& g, const std::vector<double>& couplings, int v, std::array<double, 2> w) {
    std::vector<Leg> legs;
    for (const auto& [nb, e] : g.incident(v)) legs.push_back({e, 2});
    std::sort(legs.begin(), legs.end(), [](const Leg& a, const Leg& b) { return a.id < b.id; });
    std::vector<std::array<double, 4>> s;
    for (const auto& l : legs) s.push_back(sqrt_bond(couplings[l.id]));
    const std::size_t vol = std::size_t(1) << legs.size();
    std::vector<cplx> data(vol, 0.0);
    for (std::size_t k = 0; k < vol; ++k)
        for (int spin = 0; spin < 2; ++spin) {
            double prod = w[spin];
            for (std::size_t j = 0; j < legs.size(); ++j) {
                const int idx = (k >> (legs.size() - 1 - j)) & 1;
                prod *= s[j][spin * 2 + idx];
            }
            data[k] += prod;
        }
    return Tensor(std::move(legs), std::move(data));
}

inline TensorNetwork ising_from_bonds(const Bonds& b, double beta, double h) {
    if (!(beta > 0.0)) throw Error(ErrorKind::InvalidInput, "beta must be positive");
    Graph g(b.n, b.pairs);
    std::vector<double> couplings;
    for (int m : b.multiplicity) couplings.push_back(beta * m);
    std::vector<Tensor> ts;
    for (int v = 0; v < b.n; ++v) ts.push_back(ising_site(g, couplings, v, {std::exp(beta * h), std::exp(-beta * h)}));
    return make_network(std::move(g), std::vector<int>(b.pairs.size(), 2), std::move(ts));
}

}  // namespace detail

inline TensorNetwork ising_network(const IsingParams& p) {
    return detail::ising_from_bonds(detail::square_bonds(p), p.beta, p.h);
}

// Ising vertex tensor at v with the site weight multiplied by diag(o_up, o_down).
inline Decoration ising_observable(const IsingParams& p, int v, std::array<double, 2> diag) {
    const detail::Bonds b = detail::square_bonds(p);
    Graph g(b.n, b.pairs);
    std::vector<double> couplings;
    for (int m : b.multiplicity) couplings.push_back(p.beta * m);
    if (v < 0 || v >= b.n) throw Error(ErrorKind::RegionMismatch, "site out of range");
    Decoration d;
    d.region = {v};
    d.tensors = {detail::ising_site(g, couplings, v, {diag[0] * std::exp(p.beta * p.h), diag[1] * std::exp(-p.beta * p.h)})};
    return d;
}

// Uniform messages are the exact symmetric fixed point at h = 0.
inline MessageSet ising_paramagnetic_messages(const IsingParams& p) {
    if (p.h != 0.0) throw Error(ErrorKind::FieldNonzero, "paramagnetic messages need h = 0");
    return initial_messages(ising_network(p), SeedKind::Uniform, 0);
}

// Periodic Lx x Ly x Lz cubic Ising lattice (degree 6 when every side is >= 3).
inline TensorNetwork cubic_ising_network(int lx, int ly, int lz, double beta) {
    if (lx < 2 || ly < 2 || lz < 2) throw Error(ErrorKind::InvalidInput, "cubic lattice needs sides >= 2");
    detail::Bonds b;
    b.n = lx * ly * lz;
    std::map<std::pair<int, int>, int> index;
    auto id = [&](int x, int y, int z) { return (x * ly + y) * lz + z; };
    for (int x = 0; x < lx; ++x)
        for (int y = 0; y < ly; ++y)
            for (int z = 0; z < lz; ++z) {
                detail::add_bond(b, index, id(x, y, z), id((x + 1) % lx, y, z));
                detail::add_bond(b, index, id(x, y, z), id(x, (y + 1) % ly, z));
                detail::add_bond(b, index, id(x, y, z), id(x, y, (z + 1) % lz));
            }
    return detail::ising_from_bonds(b, beta, 0.0);
}

// Positive entries keep a spectral gap so BP from the uniform seed converges.
inline TensorNetwork single_loop_network(int n, std::uint64_t seed) {
    if (n < 3) throw Error(ErrorKind::InvalidInput, "a loop needs n >= 3");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.2, 1.2);
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i) edges.push_back({i, (i + 1) % n});
    Graph g(n, edges);
    std::vector<Tensor> ts;
    for (int v = 0; v < n; ++v) {
        std::vector<Leg> legs;
        for (const auto& [w, e] : g.incident(v)) legs.push_back({e, 2});
        std::sort(legs.begin(), legs.end(), [](const Leg& a, const Leg& b) { return a.id < b.id; });
        std::vector<cplx> d(4);
        for (auto& x : d) x = u(rng);
        ts.emplace_back(std::move(legs), std::move(d));
    }
    return make_network(std::move(g), std::vector<int>(n, 2), std::move(ts));
}

namespace detail {

inline Tensor random_tensor(std::vector<Leg> legs, std::mt19937_64& rng, double scale, cplx offset) {
    std::sort(legs.begin(), legs.end(), [](const Leg& a, const Leg& b) { return a.id < b.id; });
    std::normal_distribution<double> g;
    std::vector<cplx> d(legs_volume(legs));
    for (auto& x : d) x = offset + scale * cplx(g(rng), g(rng));
    return Tensor(std::move(legs), std::move(d));
}

}  // namespace detail

// Open-boundary rows x cols PEPS: a random real product state on bond index 0
// plus complex Gaussian noise of the given scale on every entry.
inline TensorNetwork random_peps(int rows, int cols, int D, int phys_dim, double perturbation, std::uint64_t seed) {
    if (rows < 1 || cols < 1 || D < 1 || phys_dim < 1) throw Error(ErrorKind::InvalidInput, "bad PEPS shape");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<std::pair<int, int>> edges;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            if (c + 1 < cols) edges.push_back({r * cols + c, r * cols + c + 1});
            if (r + 1 < rows) edges.push_back({r * cols + c, (r + 1) * cols + c});
        }
    Graph graph(rows * cols, edges);
    std::vector<Tensor> ts;
    for (int v = 0; v < rows * cols; ++v) {
        std::vector<Leg> legs;
        for (const auto& [w, e] : graph.incident(v)) legs.push_back({e, D});
        legs.push_back({phys_leg(v), phys_dim});
        Tensor t = detail::random_tensor(legs, rng, perturbation, 0.0);
        std::vector<double> state(phys_dim);
        double nrm = 0.0;
        for (auto& s : state) {
            s = 1.0 + 0.5 * g(rng);
            nrm += s * s;
        }
        // Entries with every bond index 0 sit at flat offset p (physical leg last).
        for (int p = 0; p < phys_dim; ++p) t.data()[p] += state[p] / std::sqrt(nrm);
        ts.push_back(std::move(t));
    }
    return make_network(std::move(graph), std::vector<int>(edges.size(), D),
                        std::move(ts), std::vector<int>(rows * cols, phys_dim));
}

// Random tree (degree <= 4) with bond dims in [1, D] and complex entries
// offset from zero.
inline TensorNetwork random_tree_network(int n, int D, std::uint64_t seed) {
    if (n < 1 || D < 1) throw Error(ErrorKind::InvalidInput, "bad tree shape");
    std::mt19937_64 rng(seed);
    std::vector<std::pair<int, int>> edges;
    std::vector<int> deg(n, 0);
    for (int v = 1; v < n; ++v) {
        std::vector<int> open;
        for (int w = 0; w < v; ++w)
            if (deg[w] < 4) open.push_back(w);
        std::uniform_int_distribution<std::size_t> pick(0, open.size() - 1);
        const int w = open[pick(rng)];
        edges.push_back({w, v});
        ++deg[w];
        ++deg[v];
    }
    Graph g(n, edges);
    std::uniform_int_distribution<int> dim(1, D);
    std::vector<int> dims;
    for (std::size_t e = 0; e < edges.size(); ++e) dims.push_back(dim(rng));
    std::vector<Tensor> ts;
    for (int v = 0; v < n; ++v) {
        std::vector<Leg> legs;
        for (const auto& [w, e] : g.incident(v)) legs.push_back({e, dims[e]});
        ts.push_back(detail::random_tensor(legs, rng, 0.5, 1.0));
    }
    return make_network(std::move(g), std::move(dims), std::move(ts));
}

}  // namespace tnbp
