#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "qcbvp/cli.hpp"

using namespace qcbvp;
namespace fs = std::filesystem;
using cli::json;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("qcbvp_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run_cli(const std::string& args, std::string* out = nullptr) {
    const auto log = scratch("log") / "stdout.txt";
    const std::string cmd = std::string(QCBVP_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    if (out) {
        std::ifstream f(log);
        std::stringstream ss;
        ss << f.rdbuf();
        *out = ss.str();
    }
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path write(const fs::path& dir, const std::string& name, const std::string& text) {
    std::ofstream(dir / name) << text;
    return dir / name;
}

const char* minimal = R"J({
  "kind": "dirichlet",
  "domain": {"type": "unit-disk"},
  "phi": "cos(t)"
})J";

int error_line(const std::string& text) {
    try {
        cli::parse_problem_text(text);
    } catch (const cli::SpecError& e) {
        return e.line;
    }
    return -1;
}

}  // namespace

// ---------------------------------------------------------------------------
// parsing

TEST(Parse, MinimalDiskDirichlet) {
    const auto p = cli::parse_problem_text(minimal);
    EXPECT_EQ(p.kind, "dirichlet");
    EXPECT_EQ(p.schema, 1);
}

TEST(Parse, MissingNumericsGivesDefaults) {
    const auto n = cli::parse_problem_text(minimal).numerics;
    EXPECT_EQ(n.fourier_modes, 1024);
    EXPECT_EQ(n.grid_size, 1024);
    EXPECT_EQ(n.grid_extent, 8);
    EXPECT_EQ(n.tol, 1e-8);
    EXPECT_EQ(n.max_iter, 200);
    EXPECT_DOUBLE_EQ(n.aperture, pi / 3);
    const auto d = n.distances();
    ASSERT_EQ(d.size(), 11u);
    for (int j = 4; j <= 14; ++j) EXPECT_DOUBLE_EQ(d[j - 4], std::ldexp(1.0, -j));
    EXPECT_FALSE(n.residual_tol.has_value());
}

TEST(Parse, RadiiConvertedToDistances) {
    const auto p = cli::parse_problem_text(R"J({"kind":"dirichlet","domain":{"type":"unit-disk"},"phi":1,
      "numerics":{"radii":[0.9,0.99,0.999]}})J");
    const auto d = p.numerics.distances();
    ASSERT_EQ(d.size(), 3u);
    EXPECT_NEAR(d[2], 1e-3, 1e-15);
}

TEST(Parse, UnknownKindRejected) {
    EXPECT_THROW(cli::parse_problem_text(R"J({"kind":"laplace","domain":{"type":"unit-disk"}})J"), InputError);
    EXPECT_EQ(error_line("{\n  \"domain\": {\"type\": \"unit-disk\"},\n  \"kind\": \"laplace\"\n}"), 3);
}

TEST(Parse, KindMustMatchSubcommand) {
    EXPECT_THROW(cli::parse_problem_text(minimal, "neumann"), InputError);
    const auto p = cli::parse_problem_text(R"J({"domain":{"type":"unit-disk"},"phi":"sin(t)"})J", "neumann");
    EXPECT_EQ(p.kind, "neumann");
}

TEST(Parse, InvalidJsonIsLineAnchored) {
    EXPECT_EQ(error_line("{\n  \"kind\": \"dirichlet\",\n  \"phi\": cos\n}"), 3);
}

TEST(Parse, NumericsRangesChecked) {
    const std::string head = "{\"kind\":\"dirichlet\",\"domain\":{\"type\":\"unit-disk\"},\"phi\":1,\n\"numerics\":{\n";
    EXPECT_EQ(error_line(head + "\"fourier_modes\": 1000}}"), 3);
    EXPECT_EQ(error_line(head + "\"grid_size\": 300}}"), 3);
    EXPECT_GT(error_line(head + "\"tol\": 0}}"), 0);
    EXPECT_GT(error_line(head + "\"radii\": [0.5, 1.5]}}"), 0);
    EXPECT_GT(error_line(head + "\"modes\": 64}}"), 0);
    EXPECT_GT(error_line(head + "\"aperture\": 2}}"), 0);
}

TEST(Parse, SchemaVersion) {
    EXPECT_THROW(cli::parse_problem_text(R"J({"schema":2,"kind":"dirichlet","domain":{"type":"unit-disk"},"phi":1})J"),
                 InputError);
}

TEST(Parse, RequiredBlocks) {
    EXPECT_THROW(cli::parse_problem_text(R"J({"kind":"dirichlet","domain":{"type":"unit-disk"}})J"), InputError);
    EXPECT_THROW(cli::parse_problem_text(R"J({"kind":"hilbert","domain":{"type":"unit-disk"},"phi":1})J"), InputError);
    EXPECT_THROW(cli::parse_problem_text(R"J({"kind":"capacity"})J"), InputError);
}

TEST(Parse, DomainDescriptors) {
    const std::string tail = R"J(,"phi":"x"})J";
    for (const char* d : {R"J({"type":"circle","center":[1,2],"radius":0.5})J", R"J({"type":"ellipse","a":2,"b":1})J",
                          R"J({"type":"square","half_side":1})J", R"J({"type":"polar","r":"1+0.2*cos(3*t)"})J",
                          R"J({"type":"polygon","points":[[0,0],[2,0],[1,1]]})J"})
        EXPECT_NO_THROW(cli::parse_problem_text(std::string(R"J({"kind":"dirichlet","domain":)J") + d + tail)) << d;
    for (const char* d : {R"J({"type":"annulus"})J", R"J({"type":"circle","radius":-1})J",
                          R"J({"type":"polygon","points":[[0,0],[1,1],[1,0],[0,1]]})J",
                          R"J({"type":"polar","r":"1+x"})J", R"J({"type":"circle","basepoint":[3,0]})J",
                          R"J({"type":"three-disks","circles":[{"center":[0,0]},{"center":[1,1]},{"center":[2,0]}]})J"})
        EXPECT_THROW(cli::parse_problem_text(std::string(R"J({"kind":"dirichlet","domain":)J") + d + tail), InputError) << d;
}

TEST(Parse, BoundaryDataAndCoefficients) {
    const std::string head = R"J({"kind":"dirichlet","domain":{"type":"unit-disk"},)J";
    EXPECT_NO_THROW(cli::parse_problem_text(head + R"J("phi":{"expr":"re(z^2)"}})J"));
    EXPECT_NO_THROW(cli::parse_problem_text(head + R"J("phi":"cos(t)","coefficient":{"type":"constant","mu":[0.1,0.2]}})J"));
    EXPECT_NO_THROW(
        cli::parse_problem_text(head + R"J("phi":"cos(t)","coefficient":{"type":"matrix","a11":"2","a12":0,"a22":"1/2"}})J"));
    EXPECT_THROW(cli::parse_problem_text(head + R"J("phi":"cos(q)"})J"), InputError);
    EXPECT_THROW(cli::parse_problem_text(head + R"J("phi":"cos(t"})J"), InputError);
    EXPECT_THROW(cli::parse_problem_text(head + R"J("phi":1,"coefficient":{"type":"constant","mu":1.2}})J"), InputError);
    EXPECT_THROW(cli::parse_problem_text(head + R"J("phi":1,"coefficient":{"type":"matrix","a11":1,"a12":0,"a22":-1}})J"),
                 InputError);
    EXPECT_THROW(cli::parse_problem_text(head + R"J("phi":1,"breaks":[0.5,1.5]})J"), InputError);
}

// ---------------------------------------------------------------------------
// fixtures

TEST(Fixtures, ThreeDisksDomain) {
    const auto f = cli::make_fixture("three-disks");
    const auto& d = f.at("domain.json");
    EXPECT_EQ(d["type"], "three-disks");
    ASSERT_EQ(d["circles"].size(), 3u);
    const std::vector<Complex> want{0.0, {1, 1}, {1, -1}};
    for (std::size_t k = 0; k < 3; ++k) {
        const auto& c = d["circles"][k];
        EXPECT_EQ(Complex(c["center"][0].get<double>(), c["center"][1].get<double>()), want[k]);
        EXPECT_EQ(c["radius"].get<double>(), 1.0);
    }
}

TEST(Fixtures, UnitDiskDomain) {
    const auto d = cli::make_fixture("unit-disk").at("domain.json");
    EXPECT_EQ(d["type"], "circle");
    EXPECT_EQ(d["radius"].get<double>(), 1.0);
}

TEST(Fixtures, UnknownName) { EXPECT_THROW(cli::make_fixture("torus"), InputError); }

TEST(Fixtures, AllProblemFilesParse) {
    for (const auto& name : cli::fixture_names())
        for (const auto& [file, doc] : cli::make_fixture(name)) {
            if (!doc.contains("kind")) continue;
            EXPECT_NO_THROW(cli::parse_problem_text(doc.dump(2))) << name << "/" << file;
        }
}

// ---------------------------------------------------------------------------
// runs

TEST(Run, DiskDirichletFixturePasses) {
    const auto doc = cli::make_fixture("unit-disk").at("dirichlet_cos.json");
    const auto R = cli::run(cli::parse_problem_text(doc.dump()));
    EXPECT_TRUE(R.pass);
    EXPECT_EQ(R.report["verdict"], "pass");
    double e = 0;
    for (const auto& s : R.field) e = std::max(e, std::abs(s.u - s.x));
    EXPECT_FALSE(R.field.empty());
    EXPECT_LT(e, 1e-6);
    EXPECT_FALSE(R.report.contains("timings"));
}

TEST(Run, CapacityOfCircle) {
    const auto R = cli::run(cli::parse_problem_text(cli::make_fixture("unit-disk").at("capacity_circle.json").dump()));
    EXPECT_TRUE(R.pass);
    const double tau = R.report["extrapolated_tau"];
    EXPECT_GE(tau, 1.98);
    EXPECT_LE(tau, 2.02);
}

TEST(Run, ThreeDiskQhb) {
    const auto R = cli::run(cli::parse_problem_text(cli::make_fixture("three-disks").at("qhb.json").dump()));
    EXPECT_TRUE(R.pass);
    EXPECT_TRUE(std::isfinite(R.report["a"].get<double>()));
    EXPECT_TRUE(std::isfinite(R.report["b"].get<double>()));
    EXPECT_EQ(R.report["violations"].get<std::size_t>(), 0u);
}

TEST(Run, ThreeDiskACondition) {
    const auto R = cli::run(cli::parse_problem_text(cli::make_fixture("three-disks").at("a_condition.json").dump()));
    EXPECT_TRUE(R.pass);
    EXPECT_EQ(R.report["degenerate_side"], "complement");
    EXPECT_TRUE(R.report["monotone_to_degenerate"].get<bool>());
}

TEST(Run, UnsupportedPoincareSurfaces) {
    auto doc = cli::make_fixture("unit-disk").at("poincare_b2.json");
    doc["a"] = 1;
    EXPECT_THROW(cli::run(cli::parse_problem_text(doc.dump())), UnsupportedError);
}

// ---------------------------------------------------------------------------
// executable

TEST(Executable, FixturesWritten) {
    const auto dir = scratch("fixtures");
    EXPECT_EQ(run_cli("fixtures three-disks --out " + dir.string()), 0);
    const auto d = json::parse(slurp(dir / "domain.json"));
    EXPECT_EQ(d["circles"].size(), 3u);
    EXPECT_EQ(run_cli("fixtures torus --out " + dir.string()), 2);
}

TEST(Executable, ExitCodes) {
    const auto dir = scratch("codes");
    run_cli("fixtures unit-disk --out " + dir.string());
    const auto dc = (dir / "dirichlet_cos.json").string();
    EXPECT_EQ(run_cli("solve-dirichlet --input " + dc), 0);
    EXPECT_EQ(run_cli("solve-dirichlet --input " + dc + " --tol 1e-30"), 3);
    EXPECT_EQ(run_cli("solve-dirichlet --input " + dc + " --modes 1000"), 2);
    EXPECT_EQ(run_cli("solve-neumann --input " + dc), 2);
    EXPECT_EQ(run_cli("solve-dirichlet"), 2);
    EXPECT_EQ(run_cli("solve-dirichlet --input " + (dir / "missing.json").string()), 2);
    EXPECT_EQ(run_cli("integrate --input " + dc), 2);
    const auto bad = write(dir, "bad.json", "{\n\"kind\": \"dirichlet\",\n\"domain\": {\"type\": \"unit-disk\"},\n\"phi\": 1,\n\"numerics\": {\"grid_size\": 100}\n}");
    std::string out;
    EXPECT_EQ(run_cli("solve-dirichlet --input " + bad.string(), &out), 2);
    EXPECT_NE(out.find("line 5"), std::string::npos) << out;
    auto pc = json::parse(slurp(dir / "poincare_b2.json"));
    pc["a"] = 1;
    const auto unsup = write(dir, "unsup.json", pc.dump());
    EXPECT_EQ(run_cli("solve-poincare --input " + unsup.string(), &out), 3);
    EXPECT_NE(out.find("[solve_poincare]"), std::string::npos) << out;
}

TEST(Executable, JsonReportOnStdout) {
    const auto dir = scratch("stdout");
    run_cli("fixtures unit-disk --out " + dir.string());
    std::string out;
    EXPECT_EQ(run_cli("capacity --report json --input " + (dir / "capacity_segment.json").string(), &out), 0);
    const auto r = json::parse(out);
    EXPECT_NEAR(r["extrapolated_tau"].get<double>(), 1.0, 0.02);
}

TEST(Executable, OutputsAreByteIdentical) {
    const auto dir = scratch("determinism");
    run_cli("fixtures unit-disk --out " + dir.string());
    for (const char* run : {"a", "b"})
        ASSERT_EQ(run_cli("solve-neumann --input " + (dir / "neumann_cos.json").string() + " --out " + (dir / run).string()),
                  0);
    for (const char* f : {"report.json", "field.csv", "tables.csv"}) {
        const auto a = slurp(dir / "a" / f);
        EXPECT_FALSE(a.empty()) << f;
        EXPECT_EQ(a, slurp(dir / "b" / f)) << f;
    }
    EXPECT_TRUE(fs::exists(dir / "a" / "timings.json"));
    const auto head = slurp(dir / "a" / "field.csv").substr(0, 6);
    EXPECT_EQ(head, "x,y,u\n");
}
