#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"

namespace fs = std::filesystem;
using sparseport::cli::run;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "sparseport");
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch() {
    const fs::path dir = fs::temp_directory_path() / "sparseport_cli_test";
    fs::create_directories(dir);
    return dir;
}

fs::path toy_file(int id) {
    const fs::path p = scratch() / ("toy" + std::to_string(id) + ".csv");
    REQUIRE(invoke({"toy", std::to_string(id), "--returns-out", p.string()}).code == 0);
    return p;
}

}  // namespace

TEST_CASE("lambda grids") {
    const auto a = sparseport::cli::parse_lambdas("0,0.1,1");
    CHECK(a == std::vector<double>{0.0, 0.1, 1.0});
    const auto b = sparseport::cli::parse_lambdas("logspace:-2:0:3");
    REQUIRE(b.size() == 3);
    CHECK(b[0] == doctest::Approx(0.01));
    CHECK(b[1] == doctest::Approx(0.1));
    CHECK(b[2] == doctest::Approx(1.0));
}

TEST_CASE("toy tables") {
    const Run one = invoke({"toy", "1"});
    CHECK(one.code == 0);
    CHECK(one.out.find("0.666667") != std::string::npos);
    const Run three = invoke({"toy", "3"});
    CHECK(three.out.find("droppable") != std::string::npos);
    const Run four = invoke({"toy", "4"});
    CHECK(four.out.find("0.392") != std::string::npos);
    CHECK(four.out.find("2.773") != std::string::npos);
    CHECK(invoke({"toy", "5"}).code == sparseport::cli::kUsage);
}

TEST_CASE("solve writes weights and round-trips through diagnose") {
    const fs::path data = toy_file(1);
    const fs::path port = scratch() / "toy1_port.csv";
    fs::remove(port);
    const Run s = invoke({"solve", "--returns", data.string(), "--model", "markowitz", "--phi", "0.01",
                          "--eps", "1e-8", "--out", port.string()});
    CHECK(s.code == 0);
    const std::string text = slurp(port);
    CHECK(text.rfind("asset,weight\n", 0) == 0);
    CHECK(text.find("s1,0.3233") != std::string::npos);
    const Run d = invoke({"diagnose", "--returns", data.string(), "--portfolio", port.string(), "--phi", "0.01"});
    CHECK(d.code == 0);
    CHECK(d.err.empty());
}

TEST_CASE("zero penalty equals the plain model bitwise") {
    const fs::path data = toy_file(3);
    const fs::path a = scratch() / "lp0.csv", b = scratch() / "mk.csv";
    CHECK(invoke({"solve", "--returns", data.string(), "--model", "lp", "--lambda", "0", "--phi", "0.01",
                  "--out", a.string()}).code == 0);
    CHECK(invoke({"solve", "--returns", data.string(), "--model", "markowitz", "--phi", "0.01", "--out",
                  b.string()}).code == 0);
    CHECK(slurp(a) == slurp(b));
}

TEST_CASE("usage and data errors") {
    const fs::path data = toy_file(1);
    const fs::path never = scratch() / "never.csv";
    fs::remove(never);
    CHECK(invoke({"solve", "--returns", data.string(), "--model", "l1lp", "--lambda", "0.1", "--delta", "0.9",
                  "--phi", "0.01", "--out", never.string()}).code == sparseport::cli::kUsage);
    CHECK(invoke({"solve", "--returns", data.string(), "--model", "lp", "--lambda", "0.1", "--phi", "0.01",
                  "--m0", "2", "--out", never.string()}).code == sparseport::cli::kUsage);
    CHECK_FALSE(fs::exists(never));
    CHECK(invoke({"solve", "--returns", (scratch() / "missing.csv").string(), "--model", "lp", "--lambda",
                  "0.1", "--phi", "0.1"}).code == sparseport::cli::kData);
    CHECK(invoke({"frobnicate"}).code == sparseport::cli::kUsage);

    const fs::path shortf = scratch() / "short.csv";
    {
        std::ofstream out(shortf);
        out << "a,b\n";
        for (int t = 0; t < 12; ++t) out << 0.01 * (t % 3) << "," << 0.02 * (t % 2) << "\n";
    }
    CHECK(invoke({"backtest", "--returns", shortf.string(), "--model", "markowitz", "--phi", "0.01", "--train",
                  "10", "--rebalance", "5"}).code == sparseport::cli::kUsage);
}

TEST_CASE("unattainable target return") {
    const fs::path data = toy_file(1);
    CHECK(invoke({"solve", "--returns", data.string(), "--model", "lp", "--lambda", "0.1", "--m0", "10"}).code ==
          sparseport::cli::kInfeasible);
}

TEST_CASE("oracle support on the fourth toy instance") {
    const fs::path data = toy_file(4);
    const Run r = invoke({"oracle", "--returns", data.string(), "--phi", "0.01", "--k", "2"});
    CHECK(r.code == 0);
    CHECK(r.out.find("support s3,s4") != std::string::npos);
}

TEST_CASE("sweep at zero penalty matches the plain backtest") {
    const fs::path data = scratch() / "sweep.csv";
    {
        std::ofstream out(data);
        out << "a,b,c\n";
        for (int t = 0; t < 60; ++t)
            out << 0.01 + 0.03 * std::sin(t) << "," << 0.012 + 0.02 * std::cos(1.3 * t) << ","
                << 0.008 + 0.04 * std::sin(0.7 * t + 1) << "\n";
    }
    const fs::path fr = scratch() / "frontier.csv", bt = scratch() / "bt.csv";
    CHECK(invoke({"sweep", "--returns", data.string(), "--model", "lp", "--phi", "0.05", "--lambdas", "0",
                  "--train", "30", "--rebalance", "10", "--out", fr.string()}).code == 0);
    CHECK(invoke({"backtest", "--returns", data.string(), "--model", "markowitz", "--phi", "0.05", "--train",
                  "30", "--rebalance", "10", "--out", bt.string()}).code == 0);
    std::istringstream fin(slurp(fr));
    std::string header, row;
    std::getline(fin, header);
    std::getline(fin, row);
    std::string extra;
    CHECK_FALSE(std::getline(fin, extra));
    const std::string b = slurp(bt);
    const std::string agg = b.substr(b.rfind("avg_leverage\n") + 13);
    // frontier row: lambda,avg_sparsity,oos_mean,oos_var,sharpe,avg_leverage
    // aggregate row: oos_mean,oos_var,sharpe,avg_sparsity,avg_leverage
    std::vector<std::string> f, a;
    std::stringstream fs1(row), fs2(agg.substr(0, agg.find('\n')));
    for (std::string c; std::getline(fs1, c, ',');) f.push_back(c);
    for (std::string c; std::getline(fs2, c, ',');) a.push_back(c);
    REQUIRE(f.size() == 6);
    REQUIRE(a.size() == 5);
    CHECK(f[1] == a[3]);
    CHECK(f[2] == a[0]);
    CHECK(f[3] == a[1]);
    CHECK(f[4] == a[2]);
    CHECK(f[5] == a[4]);
}
