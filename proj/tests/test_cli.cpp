#include <gtest/gtest.h>

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct Result {
    int code = -1;
    std::string out;
    double seconds = 0.0;
};

std::string env(const char* name) {
    const char* v = std::getenv(name);
    return v ? v : "";
}

Result run(const std::string& args) {
    const std::string cmd = env("TNBP_CLI") + " " + args + " 2>/dev/null";
    const auto t0 = std::chrono::steady_clock::now();
    Result r;
    FILE* f = popen(cmd.c_str(), "r");
    if (!f) return r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, f)) > 0) r.out.append(buf, n);
    const int status = pclose(f);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

std::string stderr_of(const std::string& args) {
    const std::string cmd = env("TNBP_CLI") + " " + args + " 2>&1 >/dev/null";
    FILE* f = popen(cmd.c_str(), "r");
    std::string s;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, f)) > 0) s.append(buf, n);
    pclose(f);
    return s;
}

using Row = std::map<std::string, std::string>;

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

std::vector<Row> table(const std::string& text) {
    std::stringstream ss(text);
    std::string line;
    std::vector<std::string> header;
    std::vector<Row> rows;
    while (std::getline(ss, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto cells = split(line);
        if (header.empty()) {
            header = cells;
            continue;
        }
        Row r;
        for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) r[header[i]] = cells[i];
        rows.push_back(r);
    }
    return rows;
}

std::string value(const std::vector<Row>& rows, const std::string& key) {
    for (const auto& r : rows)
        if (r.at("quantity") == key) return r.at("value");
    return "";
}

std::string without_timestamp(const std::string& text) {
    std::stringstream ss(text);
    std::string line, out;
    while (std::getline(ss, line))
        if (line.rfind("# generated ", 0) != 0) out += line + "\n";
    return out;
}

std::string sample(const std::string& name) { return env("TNBP_SAMPLES") + "/" + name; }

}  // namespace

TEST(Cli, Environment) {
    ASSERT_FALSE(env("TNBP_CLI").empty());
    ASSERT_TRUE(std::filesystem::exists(sample("ising_4x4.json")));
}

TEST(Cli, BpOnTreeConverges) {
    const Result r = run("bp --generate tree:n=12,D=3 --tol 1e-13");
    ASSERT_EQ(r.code, 0);
    const auto rows = table(r.out);
    EXPECT_EQ(value(rows, "converged"), "true");
    EXPECT_LE(std::stod(value(rows, "residual")), 1e-12);
    EXPECT_EQ(value(rows, "stability"), "stable");
}

TEST(Cli, IsingStabilityAcrossTransition) {
    EXPECT_EQ(value(table(run("bp --generate ising:L=4,beta=0.3").out), "stability"), "stable");
    EXPECT_EQ(value(table(run("bp --generate ising:L=4,beta=0.4").out), "stability"), "unstable");
}

TEST(Cli, LoopProfileIsFlat) {
    const Result r = run("loops --generate ising:L=4,beta=0.2 --max-weight 8");
    ASSERT_EQ(r.code, 0);
    const double c = -std::log(std::tanh(0.2));
    int even = 0;
    for (const auto& row : table(r.out)) {
        if (row.at("parity") != "even") continue;
        ++even;
        EXPECT_NEAR(std::stod(row.at("c_estimate")), c, 1e-9) << row.at("weight");
    }
    EXPECT_EQ(even, 3);
    EXPECT_NE(r.out.find("c_even 1.62264818"), std::string::npos);
}

TEST(Cli, ScanErrorRisesTowardCriticality) {
    const Result r = run("scan --generate ising:L=4 --param beta --from 0.1 --to 0.44 --steps 18 -m 8 --reference exact");
    ASSERT_EQ(r.code, 0);
    const auto rows = table(r.out);
    ASSERT_EQ(rows.size(), 18u);
    // The truncation error changes sign at weak coupling, so strict growth is
    // asked of the BP error everywhere and of err_m only from beta = 0.2 on.
    double prev_bp = 0.0, prev_m = 0.0;
    for (const auto& row : rows) {
        const double b = std::stod(row.at("beta")), ebp = std::stod(row.at("err_bp")), em = std::stod(row.at("err_m"));
        EXPECT_GT(ebp, prev_bp) << b;
        if (b > 0.199) {
            EXPECT_GT(em, prev_m) << b;
        }
        EXPECT_LT(em, ebp) << b;
        prev_bp = ebp;
        prev_m = em;
    }
}

TEST(Cli, FreeEnergyAgainstReference) {
    const Result r = run("free-energy --input " + sample("ising_4x4.json") + " -m 8 -k 4 --reference exact");
    ASSERT_EQ(r.code, 0);
    const auto rows = table(r.out);
    double bp = 0, cluster = 0;
    for (const auto& row : rows) {
        if (row.at("method") == "bp") bp = std::stod(row.at("abs_error"));
        if (row.at("method") == "cluster" && row.at("truncation") == "8") cluster = std::stod(row.at("abs_error"));
    }
    EXPECT_GT(bp, 0.04);
    EXPECT_LT(cluster, 1e-5);
}

TEST(Cli, ExpvalListsEveryEstimator) {
    const Result r = run("expval --input " + sample("peps_2x3.json") + " --site 0 --op z -m 8 -k 6 --reference exact");
    ASSERT_EQ(r.code, 0);
    std::vector<std::string> methods;
    for (const auto& row : table(r.out)) {
        methods.push_back(row.at("method"));
        EXPECT_LT(std::stod(row.at("rel_error")), 2e-4) << row.at("method");
    }
    EXPECT_EQ(methods, (std::vector<std::string>{"bp", "ratio", "derivative", "cumulant", "region_sum", "region_product"}));
}

TEST(Cli, CorrelatorScanAndFit) {
    const Result r = run("correlator --generate ising:L=4,beta=0.2 --site 0 -m 8 --method derivative --reference exact");
    ASSERT_EQ(r.code, 0);
    const auto rows = table(r.out);
    ASSERT_EQ(rows.size(), 15u);
    for (const auto& row : rows) {
        const double ex = std::stod(row.at("exact")), d = std::stod(row.at("derivative"));
        EXPECT_LT(std::abs(d - ex) / ex, 1e-2) << row.at("site_b");
        EXPECT_TRUE(row.at("ratio").empty());
    }
    EXPECT_NE(r.out.find("# fit derivative xi "), std::string::npos);
}

TEST(Cli, RatioFailureIsReportedInItsCell) {
    // <sigma> vanishes at h = 0, so the ratio form has no finite value.
    const Result r = run("correlator --generate ising:L=4,beta=0.2 --site 0 --site2 5 -m 6");
    ASSERT_EQ(r.code, 0);
    const auto rows = table(r.out);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].at("ratio").rfind("error:", 0), 0u);
    EXPECT_EQ(rows[0].at("distance"), "2");
}

TEST(Cli, RegionsDump) {
    const Result r = run("regions --input " + sample("ising_4x4.json") + " -k 4");
    ASSERT_EQ(r.code, 0);
    const auto rows = table(r.out);
    EXPECT_EQ(rows.size(), 24u);
    for (const auto& row : rows) EXPECT_EQ(row.at("counting_number"), "1");
    const Result a = run("regions --input " + sample("ising_4x4.json") + " -k 6 --anchor 5");
    ASSERT_EQ(a.code, 0);
    for (const auto& row : table(a.out)) EXPECT_NE(("-" + row.at("region") + "-").find("-5-"), std::string::npos);
}

TEST(Cli, DeterministicModuloTimestamp) {
    for (const std::string args : {"free-energy --generate ising:L=4,beta=0.23 -m 6 -k 4",
                                   "expval --generate peps:seed=3 --site 2 --op x -m 6",
                                   "bp --generate loop:n=5 --init random --seed 4"}) {
        const Result a = run(args), b = run(args);
        ASSERT_EQ(a.code, 0) << args;
        EXPECT_NE(a.out.find("# generated "), std::string::npos);
        EXPECT_EQ(without_timestamp(a.out), without_timestamp(b.out)) << args;
    }
}

TEST(Cli, ThreadsDoNotChangeResults) {
    const std::string args = "expval --generate peps --site 1 -m 8 -k 4";
    const Result a = run(args + " --threads 1"), b = run(args + " --threads 3");
    auto body = [](const std::string& s) {
        const auto pos = s.find("\nmethod,");
        return s.substr(pos);
    };
    EXPECT_EQ(body(a.out), body(b.out));
}

TEST(Cli, HeaderCarriesVersionAndFingerprint) {
    const Result a = run("contract-exact --generate tree:n=5"), b = run("contract-exact --generate tree:n=6");
    EXPECT_EQ(a.out.rfind("# tnbp 0.1.0 contract-exact\n# config ", 0), 0u);
    const auto fp = [](const std::string& s) { return s.substr(s.find("# config ") + 9, 16); };
    EXPECT_NE(fp(a.out), fp(b.out));
    EXPECT_EQ(fp(a.out), fp(run("contract-exact --generate tree:n=5").out));
}

TEST(Cli, ConfigFileAndOverrides) {
    const auto dir = std::filesystem::temp_directory_path();
    const auto cfg = (dir / "tnbp_cli_test.toml").string();
    std::ofstream(cfg) << "generate = \"ising:L=4,beta=0.25\"\nmax-weight = 4\n";
    const Result a = run("free-energy --config " + cfg);
    ASSERT_EQ(a.code, 0);
    EXPECT_NE(a.out.find(";m=4;"), std::string::npos);
    const Result b = run("free-energy --config " + cfg + " -m 6");
    EXPECT_NE(b.out.find(";m=6;"), std::string::npos);
    EXPECT_NE(b.out.find("beta=0.25"), std::string::npos);
    const Result c = run("free-energy --config " + sample("free_energy.toml"));
    EXPECT_EQ(c.code, 0);
    std::remove(cfg.c_str());
}

TEST(Cli, ExportRoundTrip) {
    const auto path = (std::filesystem::temp_directory_path() / "tnbp_cli_export.json").string();
    ASSERT_EQ(run("export --generate peps:rows=2,cols=2,seed=5 --out " + path).code, 0);
    const auto body = [](const std::string& s) { return s.substr(s.find("\nquantity,")); };
    EXPECT_EQ(body(run("contract-exact --input " + path).out),
              body(run("contract-exact --generate peps:rows=2,cols=2,seed=5").out));
    std::remove(path.c_str());
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(run("--help").code, 0);
    EXPECT_EQ(run("bp").code, 2);
    EXPECT_EQ(run("bp --generate tree --input x.json").code, 2);
    EXPECT_EQ(run("bp --generate ising:L=4,bogus=1").code, 2);
    EXPECT_EQ(run("bp --generate ising:L=four").code, 2);
    EXPECT_EQ(run("bp --generate tree --damping 1.5").code, 2);
    EXPECT_EQ(run("bp --input /nonexistent.json").code, 2);
    EXPECT_EQ(run("expval --generate tree --site 0").code, 2);
    EXPECT_EQ(run("nosuchcommand").code, 2);
    // Fixed point required but the sweep budget is one sweep from a random seed.
    EXPECT_EQ(run("free-energy --generate peps --init random --max-iters 1").code, 3);
    EXPECT_EQ(run("free-energy --generate ising:L=4 -m 8 --ursell-cap 1").code, 4);
    EXPECT_EQ(run("contract-exact --generate ising:L=30").code, 4);
}

TEST(Cli, ErrorsArePathQualified) {
    EXPECT_NE(stderr_of("bp --generate ising:L=4,bogus=1").find("generate.ising.bogus"), std::string::npos);
    EXPECT_NE(stderr_of("bp --generate ising:beta=x").find("generate.ising.beta"), std::string::npos);
    const auto path = (std::filesystem::temp_directory_path() / "tnbp_cli_bad.json").string();
    std::ofstream(path) << R"({"vertices":[0,1],"edges":[{"id":0,"u":0,"v":1,"dim":0}],"tensors":{}})";
    const std::string err = stderr_of("bp --input " + path);
    EXPECT_NE(err.find("/edges/0/dim"), std::string::npos) << err;
    std::remove(path.c_str());
}

TEST(Cli, EverySubcommandOnSamplesIsFast) {
    const std::vector<std::string> cmds = {
        "contract-exact --input " + sample("ising_4x4.json"),
        "bp --input " + sample("tree_12.json"),
        "bp --input " + sample("peps_2x3.json"),
        "loops --input " + sample("loop_6.json"),
        "loops --input " + sample("ising_4x4.json") + " -m 8",
        "free-energy --input " + sample("ising_4x4.json") + " -m 8 --reference exact",
        "free-energy --input " + sample("peps_2x3.json") + " -m 8 -k 6 --reference exact",
        "expval --input " + sample("peps_2x3.json") + " --site 3 --op x -m 8 -k 6 --reference exact",
        "correlator --input " + sample("peps_2x3.json") + " --site 0 -m 7 --reference exact",
        "regions --input " + sample("ising_4x4.json") + " -k 6",
        "scan --generate ising:L=4 --param beta --from 0.1 --to 0.44 --steps 18 --reference exact",
        "export --input " + sample("tree_12.json") + " --out /dev/null",
    };
    for (const auto& c : cmds) {
        const Result r = run(c);
        EXPECT_EQ(r.code, 0) << c;
        EXPECT_LT(r.seconds, 60.0) << c;
    }
}
