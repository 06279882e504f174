#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace {

const std::string exe = TEMPERFIELD_EXE;
const std::string spec = BUNDLED_SPEC;

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// Runs the CLI with stdout to out_path and stderr to out_path.err; returns the exit code.
int run(const std::string& args, const std::string& out_path) {
    const std::string cmd = exe + " " + args + " > " + out_path + " 2> " + out_path + ".err";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

void write(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

// The bundled spec with one substring replaced.
std::string patched(const std::string& from, const std::string& to) {
    std::string s = slurp(spec);
    const auto at = s.find(from);
    REQUIRE(at != std::string::npos);
    return s.replace(at, from.size(), to);
}

}  // namespace

TEST_CASE("gfun shows both limits") {
    REQUIRE(run("gfun --alpha 0.5 --zmin 1e-8 --zmax 1e8 --points 9", "gfun.csv") == 0);
    const auto rows = csv_rows(slurp("gfun.csv"));
    REQUIRE(rows.size() == 10);
    CHECK(rows[0][1] == "g");
    // z^alpha g -> 1/(2 - alpha) + 1/alpha, z^2 g -> Gamma(2 - alpha).
    CHECK(std::stod(rows[1][2]) == doctest::Approx(2.0 / 3.0 + 2.0).epsilon(1e-3));
    CHECK(std::stod(rows[9][3]) == doctest::Approx(std::tgamma(1.5)).epsilon(1e-6));
    CHECK(std::stod(rows[5][1]) == doctest::Approx(0.5570924034).epsilon(1e-9));
}

TEST_CASE("field-lcf on the bundled spec") {
    REQUIRE(run("field-lcf --spec " + spec, "lcf.csv") == 0);
    const auto rows = csv_rows(slurp("lcf.csv"));
    REQUIRE(rows.size() == 2);
    CHECK(std::stod(rows[1][2]) == doctest::Approx(-20.543425647503021).epsilon(1e-9));
    CHECK(rows[1][4] == "converged");
}

TEST_CASE("check scaling") {
    REQUIRE(run("check scaling --spec " + spec + " --c 0.5 2 4", "scaling.csv") == 0);
    const auto rows = csv_rows(slurp("scaling.csv"));
    REQUIRE(rows.size() == 4);
    CHECK(rows[0][3] == "residual");
    for (int i = 1; i < 4; ++i) CHECK(std::stod(rows[i][3]) <= 1e-6);
}

TEST_CASE("simulate is reproducible") {
    REQUIRE(run("simulate --spec " + spec + " --out sim_a.csv", "sim_a.log") == 0);
    REQUIRE(run("simulate --spec " + spec + " --out sim_b.csv --threads 3", "sim_b.log") == 0);
    REQUIRE(run("simulate --spec " + spec + " --out sim_c.csv --seed 7", "sim_c.log") == 0);
    const std::string a = slurp("sim_a.csv");
    CHECK(a.size() > 1000);
    CHECK(a == slurp("sim_b.csv"));
    CHECK(a != slurp("sim_c.csv"));
    // 1000 replicates on a three-point grid plus the header.
    CHECK(csv_rows(a).size() == 3001);
    const std::string side = slurp("sim_a.csv.json");
    CHECK(side.find("\"sample_hash\"") != std::string::npos);
    CHECK(side.find("\"exit_code\": 0") != std::string::npos);
}

TEST_CASE("exit codes") {
    CHECK(run("", "none.out") == 1);
    CHECK(run("field-lcf", "nospec.out") == 1);
    CHECK(run("field-lcf --spec /nonexistent.json", "missing.out") == 1);

    write("unknown_key.json", patched("\"beta\": 1.0,", "\"beta\": 1.0, \"oops\": 1,"));
    CHECK(run("field-lcf --spec unknown_key.json", "unknown_key.out") == 1);
    CHECK(slurp("unknown_key.out.err").find("unknown key") != std::string::npos);

    write("gate.json", patched("\"D\": [[0.6]]", "\"D\": [[3.0]]"));
    CHECK(run("field-lcf --spec gate.json", "gate.out") == 2);
    CHECK(slurp("gate.out.err").find("gate violation") != std::string::npos);

    write("budget.json", patched("\"beta\": 1.0,", "\"beta\": 1.0, \"quadrature\": {\"max_evals\": 30},"));
    CHECK(run("field-lcf --spec budget.json", "budget.out") == 3);
}
