#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"
#include "tnbp/loops.hpp"
#include "tnbp/models.hpp"

using namespace tnbp;

namespace {

IsingParams ising(double beta, int L = 4) {
    IsingParams p;
    p.L = L;
    p.beta = beta;
    return p;
}

std::vector<std::vector<int>> edge_sets(const std::vector<GeneralizedLoop>& loops) {
    std::vector<std::vector<int>> out;
    for (const auto& l : loops) out.push_back(l.edges);
    std::sort(out.begin(), out.end());
    return out;
}

Graph grid(int rows, int cols) {
    std::vector<std::pair<int, int>> e;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            if (c + 1 < cols) e.push_back({r * cols + c, r * cols + c + 1});
            if (r + 1 < rows) e.push_back({r * cols + c, (r + 1) * cols + c});
        }
    return Graph(rows * cols, e);
}

// Excitation weight from the full network: every edge carries either the
// projector (loop edges) or its rank-one complement, then exact contraction
// divided by the BP partition function.
cplx global_weight(const TensorNetwork& tn, const MessageSet& ms, const GeneralizedLoop& l) {
    TensorNetwork out = tn;
    std::vector<char> in(tn.num_edges(), 0);
    for (int e : l.edges) in[e] = 1;
    std::vector<Tensor> ts;
    for (int v = 0; v < tn.num_vertices(); ++v) {
        Tensor t = tn.tensors[v];
        for (const auto& [w, e] : tn.graph.incident(v))
            if (tn.graph.edge(e).u == v) t = t.relabel(e, kScratchLegBase + e);
        ts.push_back(t);
    }
    for (int e = 0; e < tn.num_edges(); ++e) {
        Eigen::MatrixXcd p = edge_projector(tn.graph, ms, e);
        if (!in[e]) p = Eigen::MatrixXcd::Identity(p.rows(), p.cols()) - p;
        const int d = static_cast<int>(p.rows());
        std::vector<cplx> data;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) data.push_back(p(i, j));
        ts.push_back(Tensor({{kScratchLegBase + e, d}, {static_cast<LegId>(e), d}}, data));
    }
    auto [t, ls] = contract_all(ts);
    cplx zbp = 1.0;
    for (int v = 0; v < tn.num_vertices(); ++v) zbp *= bp_local_factor(tn, ms, v);
    return t.value() * std::exp(ls) / zbp;
}

}  // namespace

TEST(EnumerateLoops, TreeHasNone) {
    const auto tn = random_tree_network(15, 2, 3);
    EXPECT_TRUE(enumerate_loops(tn.graph, 20).empty());
}

TEST(EnumerateLoops, SingleCycle) {
    const Graph g(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}});
    const auto loops = enumerate_loops(g, 4);
    ASSERT_EQ(loops.size(), 1u);
    EXPECT_EQ(loops[0].weight(), 4);
    EXPECT_TRUE(loops[0].closed);
    EXPECT_TRUE(enumerate_loops(g, 3).empty());
}

TEST(EnumerateLoops, TorusWeightFour) {
    const Graph g = ising_network(ising(0.2)).graph;
    const auto loops = enumerate_loops(g, 4);
    // 16 plaquettes plus 8 non-contractible loops of length 4.
    EXPECT_EQ(loops.size(), 24u);
    EXPECT_EQ(edge_sets(loops), oracle::scan_loops(g, 4));
}

TEST(EnumerateLoops, MatchesExhaustiveScan) {
    const Graph g33 = grid(3, 3);  // 12 edges
    EXPECT_EQ(edge_sets(enumerate_loops(g33, 12)), oracle::scan_loops(g33, 12));
    const Graph k4(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
    EXPECT_EQ(edge_sets(enumerate_loops(k4, 6)), oracle::scan_loops(k4, 6));
    const Graph torus = ising_network(ising(0.2)).graph;
    EXPECT_EQ(edge_sets(enumerate_loops(torus, 6)), oracle::scan_loops(torus, 6));
}

TEST(EnumerateLoops, DeterministicOrder) {
    const Graph g = ising_network(ising(0.2)).graph;
    const auto a = enumerate_loops(g, 6), b = enumerate_loops(g, 6);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].edges, b[i].edges);
    for (std::size_t i = 1; i < a.size(); ++i) EXPECT_LE(a[i - 1].weight(), a[i].weight());
}

TEST(EnumerateLoops, BudgetExceeded) {
    const Graph g = ising_network(ising(0.2)).graph;
    try {
        enumerate_loops(g, 8, 10);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::CombinatorialBudgetExceeded);
    }
}

TEST(EnumerateStrings, NoRegionsReducesToLoops) {
    const Graph g = ising_network(ising(0.2)).graph;
    EXPECT_EQ(edge_sets(enumerate_strings(g, {}, 6)), edge_sets(enumerate_loops(g, 6)));
}

TEST(EnumerateStrings, PathBetweenTwoRegions) {
    const Graph path(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
    const auto s = enumerate_strings(path, {{0}, {4}}, 4);
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s[0].weight(), 4);
    EXPECT_FALSE(s[0].closed);
    EXPECT_EQ(s[0].terminals, (std::vector<int>{0, 1}));
    EXPECT_TRUE(enumerate_strings(path, {{0}, {4}}, 3).empty());
}

TEST(EnumerateStrings, MatchesExhaustiveScan) {
    const Graph g = ising_network(ising(0.2)).graph;
    EXPECT_EQ(edge_sets(enumerate_strings(g, {{5}}, 5)), oracle::scan_loops(g, 5, {{5}}));
    EXPECT_EQ(edge_sets(enumerate_strings(g, {{0}, {10}}, 5)), oracle::scan_loops(g, 5, {{0}, {10}}));
    EXPECT_EQ(edge_sets(enumerate_strings(g, {{0, 1}}, 5)), oracle::scan_loops(g, 5, {{0, 1}}));
}

TEST(EnumerateStrings, RegionValidation) {
    const Graph g = ising_network(ising(0.2)).graph;
    EXPECT_THROW(enumerate_strings(g, {{0, 1}, {1}}, 4), Error);
    EXPECT_THROW(enumerate_strings(g, {{99}}, 4), Error);
}

TEST(ExcitationWeight, SingleLoopIdentity) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto tn = single_loop_network(5, seed);
        BPOptions opt;
        opt.tol = 1e-13;
        const auto r = bp_iterate(tn, opt);
        const auto loops = enumerate_loops(tn.graph, 10);
        ASSERT_EQ(loops.size(), 1u);
        const cplx zl = excitation_weight(tn, r.messages, loops[0]).value;
        const cplx ratio = std::exp(exact_contract_log(tn).log_abs - bp_free_energy(tn, r.messages).log_abs_z);
        EXPECT_LT(std::abs(ratio - 1.0 - zl), 1e-12);
    }
}

TEST(ExcitationWeight, IsingPlaquetteIsTanhPower) {
    const auto p = ising(0.2);
    const auto tn = ising_network(p);
    const auto ms = ising_paramagnetic_messages(p);
    for (const auto& l : enumerate_loops(tn.graph, 6)) {
        const double w = std::abs(excitation_weight(tn, ms, l).value);
        EXPECT_NEAR(w, std::pow(std::tanh(0.2), l.weight()), 1e-15);
    }
    EXPECT_NEAR(std::pow(std::tanh(0.2), 4), 1.5178e-3, 2e-7);
}

TEST(ExcitationWeight, OddDegreeLoopsVanish) {
    const auto p = ising(0.2);
    const auto tn = ising_network(p);
    const auto ms = ising_paramagnetic_messages(p);
    int odd = 0;
    for (const auto& l : enumerate_loops(tn.graph, 8)) {
        std::map<int, int> deg;
        for (int e : l.edges) {
            ++deg[tn.graph.edge(e).u];
            ++deg[tn.graph.edge(e).v];
        }
        bool has_odd = false;
        for (const auto& [v, d] : deg) has_odd = has_odd || d % 2;
        if (!has_odd) continue;
        ++odd;
        EXPECT_LE(std::abs(excitation_weight(tn, ms, l).value), 1e-12);
    }
    EXPECT_GT(odd, 0);
}

TEST(ExcitationWeight, LocalityAgainstGlobalContraction) {
    const auto tn = build_norm_network(random_peps(3, 3, 2, 2, 0.4, 21));
    BPOptions opt;
    opt.tol = 1e-13;
    const auto r = bp_iterate(tn, opt);
    const auto loops = enumerate_loops(tn.graph, 8);
    ASSERT_EQ(edge_sets(loops), oracle::scan_loops(tn.graph, 8));
    for (const auto& l : loops) {
        const cplx local = excitation_weight(tn, r.messages, l).value;
        const cplx global = global_weight(tn, r.messages, l);
        EXPECT_LT(std::abs(local - global), 1e-10 * std::max(1.0, std::abs(global)));
    }
}

TEST(ExcitationWeight, OpenStringsVanishOnUndecoratedNetwork) {
    const auto tn = build_norm_network(random_peps(3, 3, 2, 2, 0.3, 2));
    BPOptions opt;
    opt.tol = 1e-12;
    const auto r = bp_iterate(tn, opt);
    WeightEvaluator ev(tn, r.messages);
    int open = 0;
    for (const auto& l : enumerate_strings(tn.graph, {{0}}, 6)) {
        if (l.closed) continue;
        ++open;
        EXPECT_LE(std::abs(ev.weight(l)), std::max(1e-10, 10 * r.residual));
    }
    EXPECT_GT(open, 0);
}

TEST(ExcitationWeight, GaugeInvariance) {
    auto tn = build_norm_network(random_peps(2, 3, 2, 2, 0.4, 5));
    const auto r = bp_iterate(tn);
    const auto loops = enumerate_loops(tn.graph, 7);
    std::vector<cplx> base;
    for (const auto& l : loops) base.push_back(excitation_weight(tn, r.messages, l).value);

    auto scaled = tn;
    scaled.tensors[2] = scaled.tensors[2].scaled(cplx(3.0, -1.0));
    auto ms = r.messages;
    ms.msg[3] = ms.msg[3].scaled(cplx(0.5, 2.0));
    ms.refresh(tn.graph);
    for (std::size_t i = 0; i < loops.size(); ++i)
        EXPECT_LT(std::abs(excitation_weight(scaled, ms, loops[i]).value - base[i]), 1e-12);
}

TEST(ExcitationWeight, SquareRootBranchCancels) {
    const auto tn = build_norm_network(random_peps(2, 3, 2, 2, 0.4, 5));
    const auto r = bp_iterate(tn);
    auto flipped = r.messages;
    for (std::size_t e = 0; e < flipped.sqrt_inner.size(); e += 2) flipped.sqrt_inner[e] = -flipped.sqrt_inner[e];
    for (const auto& l : enumerate_loops(tn.graph, 7))
        EXPECT_LT(std::abs(excitation_weight(tn, flipped, l).value - excitation_weight(tn, r.messages, l).value), 1e-12);
}

TEST(ExcitationWeight, ZeroLocalFactor) {
    auto tn = build_norm_network(random_peps(2, 2, 2, 2, 0.4, 5));
    const auto r = bp_iterate(tn);
    Decoration d;
    d.region = {0};
    d.tensors = {tn.tensors[0].scaled(0.0)};
    const auto loops = enumerate_loops(tn.graph, 4);
    WeightEvaluator ev(tn, r.messages);
    try {
        ev.weight(loops[0], &d);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ZeroLocalFactor);
    }
}

TEST(DecayProfile, IsingEvenLoopsFollowTanh) {
    const auto p = ising(0.2);
    const auto tn = ising_network(p);
    const auto ms = ising_paramagnetic_messages(p);
    const auto ws = excitation_weights(tn, ms, enumerate_loops(tn.graph, 8));
    const auto rows = loop_decay_profile(ws, 1e-12);
    const double c = -std::log(std::tanh(0.2));
    for (const auto& r : rows) {
        if (r.weight % 2) {
            EXPECT_TRUE(r.all_zero);
        } else {
            EXPECT_NEAR(r.c, c, 0.02 * c);
        }
    }
    EXPECT_NEAR(decay_rate(rows, 0), c, 1e-9);
    EXPECT_TRUE(std::isinf(decay_rate(rows, 1)));
}

TEST(DecayProfile, CriticalCouplingRate) {
    const double bc = std::log(1 + std::sqrt(2.0)) / 2;
    EXPECT_NEAR(-std::log(std::tanh(bc)), std::asinh(1.0), 1e-12);
}

TEST(DecayProfile, CsvColumns) {
    const auto p = ising(0.2);
    const auto tn = ising_network(p);
    const auto ws = excitation_weights(tn, ising_paramagnetic_messages(p), enumerate_loops(tn.graph, 4));
    std::ostringstream os;
    CsvWriter csv(os);
    write_loops_csv(csv, ws);
    const std::string s = os.str();
    EXPECT_NE(s.find("loop_id,weight,kind,terminals,re,im,abs,c_estimate"), std::string::npos);
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 25);
}
