// tnbp: batch front-end for the BP contraction engine.

#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tnbp/tnbp.hpp"

using namespace tnbp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitBudget = 4;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string input;
    std::string generate;
    int max_weight = 8;
    int region_size = 4;
    double tol = 1e-10;
    double damping = 0.2;
    int max_iters = 10000;
    std::string init = "uniform";
    std::uint64_t seed = 1;
    int threads = 1;
    std::string out;
    std::string reference;
    int ursell_cap = kDefaultUrsellCap;

    // bp
    bool no_stability = false;
    bool refine = false;
    std::string write_messages;
    // loops
    bool per_loop = false;
    // expval / correlator
    std::string op = "z";
    int site = 0;
    int site2 = -1;
    std::string method = "both";
    // regions
    int anchor = -1;
    // scan
    std::string param;
    double from = 0.0;
    double to = 0.0;
    int steps = 10;
};

// ---------------------------------------------------------------------------
// Generator specs: name:key=value,key=value

struct GenSpec {
    std::string name;
    std::map<std::string, std::string> kv;
};

GenSpec parse_spec(const std::string& text) {
    GenSpec s;
    const auto colon = text.find(':');
    s.name = text.substr(0, colon);
    if (colon == std::string::npos) return s;
    std::stringstream ss(text.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("generate." + item + ": expected key=value");
        if (!s.kv.emplace(item.substr(0, eq), item.substr(eq + 1)).second)
            throw ConfigError("generate." + item.substr(0, eq) + ": given twice");
    }
    return s;
}

std::string format_spec(const GenSpec& s) {
    std::string out = s.name;
    char sep = ':';
    for (const auto& [k, v] : s.kv) {
        out += sep + k + "=" + v;
        sep = ',';
    }
    return out;
}

class SpecReader {
public:
    explicit SpecReader(const GenSpec& s) : s_(s) {}

    double real(const std::string& key, double def) {
        used_.push_back(key);
        const auto it = s_.kv.find(key);
        if (it == s_.kv.end()) return def;
        std::size_t n = 0;
        double v = 0.0;
        try {
            v = std::stod(it->second, &n);
        } catch (const std::exception&) {
            n = 0;
        }
        if (n == 0 || n != it->second.size()) throw ConfigError(path(key) + ": expected a number, got '" + it->second + "'");
        return v;
    }

    long long integer(const std::string& key, long long def) {
        const double v = real(key, static_cast<double>(def));
        if (v != std::floor(v)) throw ConfigError(path(key) + ": expected an integer");
        return static_cast<long long>(v);
    }

    std::string word(const std::string& key, const std::string& def) {
        used_.push_back(key);
        const auto it = s_.kv.find(key);
        return it == s_.kv.end() ? def : it->second;
    }

    void finish() const {
        for (const auto& [k, v] : s_.kv)
            if (std::find(used_.begin(), used_.end(), k) == used_.end())
                throw ConfigError(path(k) + ": unknown key for generator '" + s_.name + "'");
    }

    std::string path(const std::string& key) const { return "generate." + s_.name + "." + key; }

private:
    const GenSpec& s_;
    std::vector<std::string> used_;
};

// ---------------------------------------------------------------------------
// Problem: the closed network to contract plus what is needed for observables.

struct Problem {
    std::string source;
    TensorNetwork tn;                    // closed
    std::optional<TensorNetwork> peps;   // when tn is a norm network
    std::optional<IsingParams> ising;
    std::optional<MessageSet> messages;  // seed from file
};

Problem generate(const std::string& text, std::uint64_t default_seed) {
    const GenSpec s = parse_spec(text);
    SpecReader r(s);
    Problem p;
    p.source = "generate " + format_spec(s);
    auto check = [&](bool ok, const std::string& key, const std::string& what) {
        if (!ok) throw ConfigError(r.path(key) + ": " + what);
    };
    if (s.name == "ising") {
        IsingParams ip;
        ip.L = static_cast<int>(r.integer("L", 4));
        ip.cols = static_cast<int>(r.integer("cols", 0));
        ip.beta = r.real("beta", 0.2);
        ip.h = r.real("h", 0.0);
        const std::string topo = r.word("topology", "torus");
        check(topo == "torus" || topo == "cylinder", "topology", "expected torus or cylinder");
        ip.topology = topo == "torus" ? Topology::Torus : Topology::Cylinder;
        check(ip.L >= 2, "L", "must be >= 2");
        check(ip.cols == 0 || ip.cols >= 2, "cols", "must be 0 or >= 2");
        check(ip.beta >= 0, "beta", "must be >= 0");
        r.finish();
        p.tn = ising_network(ip);
        p.ising = ip;
    } else if (s.name == "cubic") {
        const int lx = static_cast<int>(r.integer("lx", 3)), ly = static_cast<int>(r.integer("ly", 3));
        const int lz = static_cast<int>(r.integer("lz", 3));
        const double beta = r.real("beta", 0.2);
        check(lx >= 2 && ly >= 2 && lz >= 2, "lx", "sides must be >= 2");
        r.finish();
        p.tn = cubic_ising_network(lx, ly, lz, beta);
    } else if (s.name == "peps") {
        const int rows = static_cast<int>(r.integer("rows", 2)), cols = static_cast<int>(r.integer("cols", 3));
        const int D = static_cast<int>(r.integer("D", 2)), d = static_cast<int>(r.integer("d", 2));
        const double pert = r.real("perturbation", 0.2);
        const auto seed = static_cast<std::uint64_t>(r.integer("seed", static_cast<long long>(default_seed)));
        check(rows >= 1 && cols >= 1, "rows", "shape must be positive");
        check(D >= 1, "D", "must be >= 1");
        check(d >= 1, "d", "must be >= 1");
        r.finish();
        p.peps = random_peps(rows, cols, D, d, pert, seed);
        p.tn = build_norm_network(*p.peps);
    } else if (s.name == "tree") {
        const int n = static_cast<int>(r.integer("n", 12)), D = static_cast<int>(r.integer("D", 3));
        const auto seed = static_cast<std::uint64_t>(r.integer("seed", static_cast<long long>(default_seed)));
        check(n >= 1, "n", "must be >= 1");
        check(D >= 1, "D", "must be >= 1");
        r.finish();
        p.tn = random_tree_network(n, D, seed);
    } else if (s.name == "loop") {
        const int n = static_cast<int>(r.integer("n", 6));
        const auto seed = static_cast<std::uint64_t>(r.integer("seed", static_cast<long long>(default_seed)));
        check(n >= 3, "n", "must be >= 3");
        r.finish();
        p.tn = single_loop_network(n, seed);
    } else {
        throw ConfigError("generate: unknown generator '" + s.name + "' (ising, cubic, peps, tree, loop)");
    }
    return p;
}

Problem load(const Options& o) {
    if (o.input.empty() == o.generate.empty()) throw ConfigError("input: give exactly one of --input and --generate");
    if (!o.generate.empty()) return generate(o.generate, o.seed);
    LoadedNetwork ln = load_network(o.input);
    Problem p;
    p.source = "input " + o.input;
    if (ln.tn.closed()) {
        p.tn = std::move(ln.tn);
        p.messages = std::move(ln.messages);
    } else {
        if (ln.messages) throw ConfigError("input: messages are only read for closed networks");
        p.peps = std::move(ln.tn);
        p.tn = build_norm_network(*p.peps);
    }
    return p;
}

// ---------------------------------------------------------------------------
// Output

std::string canonical(const Options& o, const std::string& sub) {
    std::ostringstream s;
    s << "sub=" << sub << ";input=" << o.input << ";generate=" << o.generate << ";m=" << o.max_weight
      << ";k=" << o.region_size << ";tol=" << fmt(o.tol) << ";damping=" << fmt(o.damping) << ";max_iters=" << o.max_iters
      << ";init=" << o.init << ";seed=" << o.seed << ";threads=" << o.threads << ";reference=" << o.reference
      << ";ursell_cap=" << o.ursell_cap;
    if (sub == "bp") s << ";no_stability=" << o.no_stability << ";refine=" << o.refine;
    if (sub == "loops") s << ";per_loop=" << o.per_loop;
    if (sub == "expval" || sub == "correlator") s << ";op=" << o.op << ";site=" << o.site;
    if (sub == "correlator") s << ";site2=" << o.site2 << ";method=" << o.method;
    if (sub == "regions") s << ";anchor=" << o.anchor;
    if (sub == "scan") s << ";param=" << o.param << ";from=" << fmt(o.from) << ";to=" << fmt(o.to) << ";steps=" << o.steps;
    return s.str();
}

std::string timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

class Output {
public:
    Output(const Options& o, const std::string& sub) {
        if (!o.out.empty()) {
            file_ = std::make_unique<std::ofstream>(o.out);
            if (!*file_) throw ConfigError("out: cannot write " + o.out);
        }
        csv_ = std::make_unique<CsvWriter>(os());
        csv_->comment(std::string("tnbp ") + kEngineVersion + " " + sub);
        const std::string c = canonical(o, sub);
        csv_->comment("config " + fingerprint(c) + " " + c);
        csv_->comment("generated " + timestamp());
    }

    std::ostream& os() { return file_ ? static_cast<std::ostream&>(*file_) : std::cout; }
    CsvWriter& csv() { return *csv_; }

private:
    std::unique_ptr<std::ofstream> file_;
    std::unique_ptr<CsvWriter> csv_;
};

std::string num(double x) { return std::isfinite(x) ? fmt(x) : (std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf")); }

// ---------------------------------------------------------------------------
// Shared steps

BPOptions bp_options(const Options& o) {
    if (o.init != "uniform" && o.init != "random") throw ConfigError("init: expected uniform or random");
    if (!(o.damping >= 0.0 && o.damping < 1.0)) throw ConfigError("damping: must lie in [0, 1)");
    if (!(o.tol > 0.0)) throw ConfigError("tol: must be > 0");
    if (o.max_iters < 1) throw ConfigError("max-iters: must be >= 1");
    BPOptions b;
    b.damping = o.damping;
    b.tol = o.tol;
    b.max_iters = o.max_iters;
    b.seed_kind = o.init == "uniform" ? SeedKind::Uniform : SeedKind::Random;
    b.seed = o.seed;
    return b;
}

BPResult run_bp(const Problem& p, const Options& o) {
    const BPOptions b = bp_options(o);
    return p.messages ? bp_iterate(p.tn, *p.messages, b) : bp_iterate(p.tn, b);
}

// Fixed point for the expansion subcommands; non-convergence is an error here.
MessageSet fixed_point(const Problem& p, const Options& o) {
    BPResult r = run_bp(p, o);
    if (!r.converged)
        throw Error(ErrorKind::NotConverged, "BP residual " + num(r.residual) + " after " + std::to_string(r.iterations) +
                                                 " sweeps (tol " + num(o.tol) + ")");
    return std::move(r.messages);
}

void check_truncation(const Options& o) {
    if (o.max_weight < 0) throw ConfigError("max-weight: must be >= 0");
    if (o.region_size < 1) throw ConfigError("region-size: must be >= 1");
}

std::optional<double> reference_free_energy(const Problem& p, const Options& o) {
    if (o.reference.empty()) return std::nullopt;
    if (o.reference == "exact") return -exact_contract_log(p.tn).log_abs;
    std::ifstream in(o.reference);
    if (!in) throw ConfigError("reference: cannot open " + o.reference);
    double v = 0.0;
    if (!(in >> v)) throw ConfigError("reference: " + o.reference + " does not start with a number");
    return v;
}

// ---------------------------------------------------------------------------
// Observables

Eigen::MatrixXcd pauli(const std::string& name, int d) {
    const cplx i(0.0, 1.0);
    if (name == "i") return Eigen::MatrixXcd::Identity(d, d);
    if (d != 2) throw ConfigError("op: '" + name + "' needs physical dimension 2");
    Eigen::MatrixXcd m(2, 2);
    if (name == "x") m << 0, 1, 1, 0;
    else if (name == "y") m << 0, -i, i, 0;
    else if (name == "z") m << 1, 0, 0, -1;
    else if (name == "n") m << 0, 0, 0, 1;
    else throw ConfigError("op: unknown operator '" + name + "' (i, x, y, z, n)");
    return m;
}

Decoration observable(const Problem& p, const std::string& op, int site) {
    if (site < 0 || site >= p.tn.num_vertices())
        throw ConfigError("site: " + std::to_string(site) + " outside 0.." + std::to_string(p.tn.num_vertices() - 1));
    if (p.peps) {
        OperatorInsertion ins;
        ins.region = {site};
        ins.site_ops = {pauli(op, p.peps->phys_dims[site])};
        return operator_decoration(*p.peps, ins);
    }
    if (p.ising) {
        if (op == "z") return ising_observable(*p.ising, site, {1.0, -1.0});
        if (op == "i") return ising_observable(*p.ising, site, {1.0, 1.0});
        throw ConfigError("op: Ising networks support z and i");
    }
    throw ConfigError("op: observables need a PEPS (file with physical legs or peps generator) or the ising generator");
}

cplx exact_ratio(const Problem& p, const Decoration& d) {
    const LogScalar num = exact_contract_log(apply_decoration(p.tn, d));
    const LogScalar den = exact_contract_log(p.tn);
    return std::polar(std::exp(num.log_abs - den.log_abs), num.phase - den.phase);
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_contract_exact(const Problem& p, const Options& o) {
    const LogScalar z = exact_contract_log(p.tn);
    Output out(o, "contract-exact");
    auto& csv = out.csv();
    csv.comment(p.source);
    csv.header({"quantity", "value"});
    csv.row({"n_vertices", std::to_string(p.tn.num_vertices())});
    csv.row({"n_edges", std::to_string(p.tn.num_edges())});
    csv.row({"log_abs_z", num(z.log_abs)});
    csv.row({"phase", num(z.phase)});
    csv.row({"free_energy", num(-z.log_abs)});
    csv.row({"free_energy_per_site", num(-z.log_abs / p.tn.num_vertices())});
}

void cmd_bp(const Problem& p, const Options& o) {
    BPResult r = run_bp(p, o);
    if (o.refine) {
        NewtonOptions n;
        n.tol = o.tol;
        r = refine_fixed_point(p.tn, r.messages, n);
    }
    Output out(o, "bp");
    auto& csv = out.csv();
    csv.comment(p.source);
    csv.comment(std::string("message convention ") + r.messages.convention);
    csv.header({"quantity", "value"});
    csv.row({"converged", r.converged ? "true" : "false"});
    csv.row({"iterations", std::to_string(r.iterations)});
    csv.row({"residual", num(r.residual)});
    if (r.converged) {
        const BPFreeEnergy f = bp_free_energy(p.tn, r.messages);
        csv.row({"log_abs_z_bp", num(f.log_abs_z)});
        csv.row({"phase_bp", num(f.phase)});
        csv.row({"free_energy_bp", num(f.free_energy())});
        double min_abs_i = std::numeric_limits<double>::infinity();
        for (const auto& x : r.messages.inner_products) min_abs_i = std::min(min_abs_i, std::abs(x));
        csv.row({"min_abs_inner_product", num(min_abs_i)});
        if (!o.no_stability) {
            StabilityOptions so;
            so.seed = o.seed;
            so.damping = o.damping;
            // The probe cannot resolve deviations below the base point's own error.
            MessageSet base = r.messages;
            if (!o.refine && o.tol > 1e-13) {
                BPOptions tight = bp_options(o);
                tight.tol = 1e-13;
                BPResult t = bp_iterate(p.tn, r.messages, tight);
                if (t.converged) base = std::move(t.messages);
            }
            const StabilityReport s = stability_probe(p.tn, base, so);
            csv.row({"stability", stability_name(s.verdict)});
            csv.row({"growth_per_sweep", num(s.growth)});
        }
    }
    if (!o.write_messages.empty()) save_network(o.write_messages, p.tn, &r.messages);
}

void cmd_loops(const Problem& p, const Options& o) {
    check_truncation(o);
    const MessageSet ms = fixed_point(p, o);
    const auto loops = enumerate_loops(p.tn.graph, o.max_weight);
    const auto ws = excitation_weights(p.tn, ms, loops);
    const auto rows = loop_decay_profile(ws, 1e-300);
    const double ce = decay_rate(rows, 0), co = decay_rate(rows, 1);
    const int deg = p.tn.graph.max_degree();
    Output out(o, "loops");
    auto& csv = out.csv();
    csv.comment(p.source);
    csv.comment("loops " + std::to_string(loops.size()) + " max_degree " + std::to_string(deg) + " c0 " +
                num(c0_explicit(deg)) + " c0_informal " + num(c0_informal(deg)));
    csv.comment("c_even " + num(ce) + " c_odd " + num(co));
    if (o.per_loop)
        write_loops_csv(csv, ws);
    else
        write_decay_csv(csv, rows);
}

void cmd_free_energy(const Problem& p, const Options& o) {
    check_truncation(o);
    const MessageSet ms = fixed_point(p, o);
    const BPFreeEnergy bp = bp_free_energy(p.tn, ms);
    const auto loops = enumerate_loops(p.tn.graph, o.max_weight);
    const auto fe = free_energy_truncated(p.tn, ms, loops, o.max_weight, o.ursell_cap);
    WeightEvaluator ev(p.tn, ms);
    std::vector<cplx> z(loops.size());
    parallel_for(loops.size(), [&](std::size_t i) { z[i] = ev.weight(loops[i]); });
    const auto cum = free_energy_cumulant(bp, loops, z, o.max_weight);
    const RegionPoset poset = find_regions(p.tn.graph, o.region_size);
    const auto reg = free_energy_regions(p.tn, ms, poset);
    const auto ref = reference_free_energy(p, o);

    Output out(o, "free-energy");
    auto& csv = out.csv();
    csv.comment(p.source);
    csv.header({"method", "truncation", "terms", "F", "F_per_site", "abs_error"});
    const double n = p.tn.num_vertices();
    auto row = [&](const std::string& method, int trunc, std::size_t terms, double f) {
        csv.row({method, std::to_string(trunc), std::to_string(terms), num(f), num(f / n),
                 ref ? num(std::abs(f - *ref)) : ""});
    };
    row("bp", 0, 0, bp.free_energy());
    cplx lz = bp.log_z();
    int upto = 0;
    std::size_t count = 0;
    for (const auto& ord : fe.orders) {
        // Orders with no clusters are skipped by construction; print each present order cumulatively.
        lz += ord.sum;
        count += ord.n_clusters;
        upto = ord.order;
        row("cluster", upto, count, -lz.real());
    }
    if (fe.orders.empty()) row("cluster", o.max_weight, 0, fe.free_energy());
    row("cumulant", o.max_weight, cum.subsets.size(), cum.free_energy());
    row("region", o.region_size, poset.regions.size(), reg.free_energy());
    if (ref) row("reference", 0, 0, *ref);
}

void cmd_expval(const Problem& p, const Options& o) {
    check_truncation(o);
    const MessageSet ms = fixed_point(p, o);
    const Decoration d = observable(p, o.op, o.site);
    std::vector<ExpectationEstimate> es;
    es.push_back(expval_bp(p.tn, ms, d));
    es.push_back(expval_ratio(p.tn, ms, d, o.max_weight, o.ursell_cap));
    es.push_back(expval_derivative(p.tn, ms, d, o.max_weight, o.ursell_cap));
    es.push_back(expval_cumulant(p.tn, ms, d, o.max_weight));
    es.push_back(expval_region_sum(p.tn, ms, d, o.region_size));
    es.push_back(expval_region_product(p.tn, ms, d, o.region_size));
    std::optional<cplx> ref;
    if (o.reference == "exact") ref = exact_ratio(p, d);
    else if (!o.reference.empty()) throw ConfigError("reference: expval supports only 'exact'");
    Output out(o, "expval");
    auto& csv = out.csv();
    csv.comment(p.source);
    csv.comment("observable " + o.op + " at site " + std::to_string(o.site));
    write_estimates_csv(csv, es, ref ? &*ref : nullptr);
}

// Numerical failures of one estimator are reported in its cell; budget errors abort.
std::string attempt(const std::function<cplx()>& f, std::optional<cplx>* keep = nullptr) {
    try {
        const cplx v = f();
        if (keep) *keep = v;
        return num(v.real());
    } catch (const Error& e) {
        if (error_class(e.kind()) != ErrorClass::Numerical) throw;
        return std::string("error:") + error_name(e.kind());
    }
}

void cmd_correlator(const Problem& p, const Options& o) {
    check_truncation(o);
    if (o.method != "both" && o.method != "ratio" && o.method != "derivative")
        throw ConfigError("method: expected ratio, derivative or both");
    const MessageSet ms = fixed_point(p, o);
    const Decoration da = observable(p, o.op, o.site);
    const bool do_ratio = o.method != "derivative", do_deriv = o.method != "ratio";
    const bool exact = o.reference == "exact";
    if (!o.reference.empty() && !exact) throw ConfigError("reference: correlator supports only 'exact'");

    std::vector<int> partners;
    if (o.site2 >= 0) {
        if (o.site2 == o.site) throw ConfigError("site2: must differ from site");
        partners = {o.site2};
    } else {
        for (int v = 0; v < p.tn.num_vertices(); ++v)
            if (v != o.site) partners.push_back(v);
    }
    std::optional<cplx> ea;
    if (exact) ea = exact_ratio(p, da);

    Output out(o, "correlator");
    auto& csv = out.csv();
    csv.comment(p.source);
    csv.comment("observable " + o.op + " at site " + std::to_string(o.site) + ", truncation " + std::to_string(o.max_weight));
    csv.header({"site_a", "site_b", "distance", "ratio", "derivative", "exact"});
    std::vector<std::pair<double, cplx>> points;
    for (int b : partners) {
        const Decoration db = observable(p, o.op, b);
        const int dist = graph_distance(p.tn.graph, {o.site}, {b});
        std::optional<cplx> dv;
        const std::string r = do_ratio ? attempt([&] { return correlator_ratio(p.tn, ms, da, db, o.max_weight, o.ursell_cap).value; }) : "";
        const std::string dd =
            do_deriv ? attempt([&] { return correlator_derivative(p.tn, ms, da, db, o.max_weight, o.ursell_cap).value; }, &dv)
                     : "";
        std::string ex;
        if (exact) ex = num((exact_ratio(p, combine({da, db})) - *ea * exact_ratio(p, db)).real());
        if (dv) points.push_back({double(dist), *dv});
        csv.row({std::to_string(o.site), std::to_string(b), std::to_string(dist), r, dd, ex});
    }
    if (partners.size() > 1 && do_deriv) {
        try {
            const CorrelationFit f = correlation_length(points);
            csv.comment("fit derivative xi " + num(f.xi) + " slope " + num(f.slope) + " r2 " + num(f.r2) + " points " +
                        std::to_string(f.points) + (f.non_decaying ? " non-decaying" : ""));
        } catch (const Error& e) {
            csv.comment(std::string("fit unavailable: ") + e.what());
        }
    }
}

void cmd_regions(const Problem& p, const Options& o) {
    check_truncation(o);
    if (o.anchor >= p.tn.num_vertices()) throw ConfigError("anchor: outside the network");
    const RegionPoset poset = o.anchor >= 0 ? find_regions_local(p.tn.graph, o.region_size, o.anchor)
                                            : find_regions(p.tn.graph, o.region_size);
    std::optional<std::vector<cplx>> log_xi;
    const BPResult r = run_bp(p, o);
    if (r.converged && o.anchor < 0) log_xi = free_energy_regions(p.tn, r.messages, poset).log_xi;
    Output out(o, "regions");
    auto& csv = out.csv();
    csv.comment(p.source);
    csv.comment("regions " + std::to_string(poset.regions.size()) + " k " + std::to_string(poset.k) +
                (o.anchor >= 0 ? " anchor " + std::to_string(o.anchor) : "") +
                (r.converged ? "" : " (BP not converged; log Xi omitted)"));
    write_regions_csv(csv, poset, log_xi ? &*log_xi : nullptr);
}

void cmd_scan(const Options& o) {
    check_truncation(o);
    if (o.generate.empty()) throw ConfigError("scan: needs --generate (the swept parameter is a generator key)");
    if (o.param.empty()) throw ConfigError("param: required");
    if (o.steps < 1) throw ConfigError("steps: must be >= 1");
    if (o.reference != "" && o.reference != "exact") throw ConfigError("reference: scan supports only 'exact'");
    GenSpec base = parse_spec(o.generate);

    Output out(o, "scan");
    auto& csv = out.csv();
    csv.header({o.param, "converged", "iterations", "residual", "c_even", "c_odd", "F_bp", "F_m", "F_exact",
                "err_bp", "err_m"});
    for (int i = 0; i < o.steps; ++i) {
        const double x = o.steps == 1 ? o.from : o.from + (o.to - o.from) * i / (o.steps - 1);
        GenSpec s = base;
        s.kv[o.param] = fmt(x);
        Problem p = generate(format_spec(s), o.seed);
        const BPResult r = run_bp(p, o);
        std::vector<std::string> row{fmt(x), r.converged ? "true" : "false", std::to_string(r.iterations), num(r.residual)};
        std::optional<double> fex;
        if (o.reference == "exact") fex = -exact_contract_log(p.tn).log_abs;
        if (!r.converged) {
            row.insert(row.end(), {"", "", "", "", fex ? num(*fex) : "", "", ""});
            csv.row(row);
            continue;
        }
        const auto loops = enumerate_loops(p.tn.graph, o.max_weight);
        const auto rows = loop_decay_profile(excitation_weights(p.tn, r.messages, loops), 1e-300);
        const double fbp = bp_free_energy(p.tn, r.messages).free_energy();
        const double fm = free_energy_truncated(p.tn, r.messages, loops, o.max_weight, o.ursell_cap).free_energy();
        row.insert(row.end(), {num(decay_rate(rows, 0)), num(decay_rate(rows, 1)), num(fbp), num(fm),
                               fex ? num(*fex) : "", fex ? num(std::abs(fbp - *fex)) : "",
                               fex ? num(std::abs(fm - *fex)) : ""});
        csv.row(row);
    }
}

void cmd_export(const Problem& p, const Options& o) {
    if (o.out.empty()) throw ConfigError("out: export needs --out");
    if (p.peps) {
        save_network(o.out, *p.peps);
    } else {
        save_network(o.out, p.tn, p.messages ? &*p.messages : nullptr);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Belief-propagation tensor-network contraction with loop, cluster and region corrections"};
    app.set_version_flag("--version", std::string("tnbp ") + kEngineVersion);
    app.set_config("--config", "", "TOML/INI config file; command-line flags take precedence");
    app.require_subcommand(1);
    app.fallthrough();
    Options o;

    app.add_option("--input", o.input, "TN interchange file (JSON)");
    app.add_option("--generate", o.generate, "Generator spec, e.g. ising:L=4,beta=0.2 | peps:rows=2,cols=3,D=2 | tree:n=12 | loop:n=6 | cubic:lx=3");
    app.add_option("-m,--max-weight", o.max_weight, "Loop/cluster truncation m")->capture_default_str();
    app.add_option("-k,--region-size", o.region_size, "Region size k")->capture_default_str();
    app.add_option("--tol", o.tol, "BP tolerance")->capture_default_str();
    app.add_option("--damping", o.damping, "BP damping in [0,1)")->capture_default_str();
    app.add_option("--max-iters", o.max_iters, "BP sweep budget")->capture_default_str();
    app.add_option("--init", o.init, "BP seed: uniform or random")->capture_default_str();
    app.add_option("--seed", o.seed, "Seed for generators, random BP init and stability probes")->capture_default_str();
    app.add_option("--threads", o.threads, "Worker cap")->capture_default_str();
    app.add_option("--out", o.out, "Output path (default stdout)");
    app.add_option("--reference", o.reference, "'exact' or a file holding the reference value");
    app.add_option("--ursell-cap", o.ursell_cap, "Largest cluster size for Ursell coefficients")->capture_default_str();

    auto* c_exact = app.add_subcommand("contract-exact", "Exact contraction (greedy order)");
    auto* c_bp = app.add_subcommand("bp", "BP fixed point, residual and stability");
    c_bp->add_flag("--no-stability", o.no_stability, "Skip the stability probe");
    c_bp->add_flag("--refine", o.refine, "Polish the fixed point with damped Newton");
    c_bp->add_option("--write-messages", o.write_messages, "Write the network with its messages to this file");
    auto* c_loops = app.add_subcommand("loops", "Loop weights and decay profile");
    c_loops->add_flag("--per-loop", o.per_loop, "One row per loop instead of per weight");
    auto* c_fe = app.add_subcommand("free-energy", "Cluster, cumulant and region free energies");
    auto* c_ev = app.add_subcommand("expval", "Single-site expectation value, all estimators");
    auto* c_corr = app.add_subcommand("correlator", "Connected two-point correlators and correlation length");
    for (auto* c : {c_ev, c_corr}) {
        c->add_option("--op", o.op, "Operator: i, x, y, z, n (Ising: z, i)")->capture_default_str();
        c->add_option("--site", o.site, "Vertex carrying the operator")->capture_default_str();
    }
    c_corr->add_option("--site2", o.site2, "Second vertex; omitted scans every other vertex");
    c_corr->add_option("--method", o.method, "ratio, derivative or both")->capture_default_str();
    auto* c_reg = app.add_subcommand("regions", "Region poset and counting numbers");
    c_reg->add_option("--anchor", o.anchor, "Anchor vertex for the local poset");
    auto* c_scan = app.add_subcommand("scan", "Sweep one generator parameter");
    c_scan->add_option("--param", o.param, "Generator key to sweep, e.g. beta");
    c_scan->add_option("--from", o.from, "First value");
    c_scan->add_option("--to", o.to, "Last value");
    c_scan->add_option("--steps", o.steps, "Number of points")->capture_default_str();
    auto* c_export = app.add_subcommand("export", "Write the input network in the interchange format");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (o.threads < 1) throw ConfigError("threads: must be >= 1");
        set_thread_cap(o.threads);
        if (c_scan->parsed()) {
            cmd_scan(o);
            return kExitOk;
        }
        const Problem p = load(o);
        if (c_exact->parsed()) cmd_contract_exact(p, o);
        else if (c_bp->parsed()) cmd_bp(p, o);
        else if (c_loops->parsed()) cmd_loops(p, o);
        else if (c_fe->parsed()) cmd_free_energy(p, o);
        else if (c_ev->parsed()) cmd_expval(p, o);
        else if (c_corr->parsed()) cmd_correlator(p, o);
        else if (c_reg->parsed()) cmd_regions(p, o);
        else if (c_export->parsed()) cmd_export(p, o);
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "tnbp: config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const Error& e) {
        std::cerr << "tnbp: " << e.what() << '\n';
        switch (error_class(e.kind())) {
            case ErrorClass::Config: return kExitConfig;
            case ErrorClass::Budget: return kExitBudget;
            case ErrorClass::Numerical: return kExitNumerical;
        }
        return kExitNumerical;
    } catch (const std::bad_alloc&) {
        std::cerr << "tnbp: out of memory\n";
        return kExitBudget;
    } catch (const std::exception& e) {
        std::cerr << "tnbp: " << e.what() << '\n';
        return kExitNumerical;
    }
}
