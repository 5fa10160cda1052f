#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "cmpvc_cli_test";

int run(const std::string& args) {
    const std::string cmd = std::string(CMPVC_CLI) + " " + args + " >" + (kWork / "stdout.txt").string() + " 2>" +
                            (kWork / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

struct Workdir {
    Workdir() {
        fs::remove_all(kWork);
        fs::create_directories(kWork);
    }
};

const char* kFormula =
    "\"lambda = vc(x1, x2 | z1, z2, z3, z4) + s(x3); nu = vc(w1 | z1, z2, z3, z4) + s(w2)\"";

}  // namespace

TEST_CASE("simulate twice gives byte-identical CSVs") {
    Workdir w;
    const std::string base = "simulate --study sim1 --n 1000 --reps 3 --seed 7 --methods cp_exact,cp_top10 --out ";
    REQUIRE(run(base + (kWork / "a").string()) == 0);
    REQUIRE(run(base + (kWork / "b").string()) == 0);
    int files = 0;
    for (const auto& e : fs::directory_iterator(kWork / "a")) {
        const std::string name = e.path().filename().string();
        if (name.find("_timing") != std::string::npos) continue;
        CHECK(slurp(e.path()) == slurp(kWork / "b" / name));
        ++files;
    }
    CHECK(files == 3);
    CHECK(fs::exists(kWork / "a" / "sim1_same_moderators_n1000_aggregate.csv"));
}

TEST_CASE("usage errors exit with status 1") {
    Workdir w;
    CHECK(run("simulate --study sim3") == 1);
    CHECK(run("") == 1);
    CHECK(run("fit glm --data nothing.csv") == 1);
    REQUIRE(run("simulate --study sim2 --n 200 --seed 1 --emit-data " + (kWork / "d.csv").string()) == 0);
    CHECK(run("fit boost --data " + (kWork / "d.csv").string() +
              " --response y --formula \"lambda = vc(x | z1)\" --xi 1.5 --out " + (kWork / "o").string()) == 1);
    CHECK_FALSE(fs::exists(kWork / "o" / "model.json"));
    CHECK(slurp(kWork / "stderr.txt").find("xi") != std::string::npos);
    CHECK(run("fit glm --data " + (kWork / "d.csv").string() + " --response y --formula \"lambda = x +\"") == 1);
}

TEST_CASE("data errors exit with status 2") {
    Workdir w;
    std::ofstream(kWork / "bad.csv") << "y,x\n1,0.5\n1.5,0.2\n";
    CHECK(run("fit glm --data " + (kWork / "bad.csv").string() + " --response y --formula \"lambda = x\" --out " +
              kWork.string()) == 2);
    CHECK(slurp(kWork / "stderr.txt").find("column 'y'") != std::string::npos);
    CHECK(run("fit glm --data " + (kWork / "bad.csv").string() + " --response y --formula \"lambda = q\"") == 2);
}

TEST_CASE("fit failures exit with status 3") {
    Workdir w;
    std::ofstream f(kWork / "tiny.csv");
    f << "y,x\n1,0.1\n2,0.2\n";
    f.close();
    CHECK(run("fit glm --data " + (kWork / "tiny.csv").string() +
              " --response y --formula \"lambda = x; nu = x\" --out " + kWork.string()) == 3);
}

TEST_CASE("mob on a sim1 CSV reports two leaves split at z1 near 0.65, and predict round-trips") {
    Workdir w;
    const std::string data = (kWork / "sim1.csv").string();
    REQUIRE(run("simulate --study sim1 --n 2000 --seed 3 --emit-data " + data) == 0);
    REQUIRE(run("fit mob --data " + data + " --response y --split-method cp_exact --formula " + kFormula +
                " --out " + (kWork / "mob").string()) == 0);
    const std::string summary = slurp(kWork / "stdout.txt");
    CHECK(summary.find("leaves=2") != std::string::npos);
    CHECK(summary.find("AIC=") != std::string::npos);
    const std::string report = slurp(kWork / "mob" / "report.txt");
    CHECK(report.find("z1 <= 0.6") != std::string::npos);
    CHECK(report.find("z1 > 0.6") != std::string::npos);
    REQUIRE(run("predict --model " + (kWork / "mob" / "model.json").string() + " --data " + data + " --out " +
                (kWork / "pred.csv").string()) == 0);
    const std::string fitted = summary.substr(summary.find("-2logLik="), 25);
    CHECK(slurp(kWork / "stdout.txt").find(fitted) != std::string::npos);
    CHECK(slurp(kWork / "pred.csv").rfind("row,eta1,eta2,lambda,nu,mean,leaf,unseen_level\n", 0) == 0);
}

TEST_CASE("glm reports CMP and Poisson likelihoods; boost writes importance and partial dependence") {
    Workdir w;
    const std::string data = (kWork / "sim2.csv").string();
    REQUIRE(run("simulate --study sim2 --n 400 --seed 2 --emit-data " + data) == 0);
    REQUIRE(run("fit glm --data " + data + " --response y --formula \"lambda = x + z1; nu = w\" --compare-poisson --out " +
                (kWork / "glm").string()) == 0);
    const std::string s = slurp(kWork / "stdout.txt");
    CHECK(s.find("cmp: n=400") != std::string::npos);
    CHECK(s.find("poisson: n=400") != std::string::npos);
    REQUIRE(run("fit boost --data " + data +
                " --response y --formula \"lambda = vc(x | z1, z2); nu = vc(w | z5, z6)\" --M 3 --B-max 20 --pd "
                "lambda:x:z1 --pd nu:0:z5 --out " +
                (kWork / "boost").string()) == 0);
    const std::string imp = slurp(kWork / "boost" / "importance.csv");
    CHECK(imp.find("lambda,z1,") != std::string::npos);
    CHECK(imp.find("nu,z6,") != std::string::npos);
    const std::string pd = slurp(kWork / "boost" / "partial_dependence.csv");
    int lines = 0;
    for (char c : pd) lines += c == '\n';
    CHECK(lines == 201);
}

TEST_CASE("simulate sim2 emits the per-M selection table") {
    Workdir w;
    REQUIRE(run("simulate --study sim2 --n 300 --reps 1 --seed 4 --M 2,3 --B-max 10 --out " + kWork.string()) == 0);
    const std::string sel = slurp(kWork / "sim2_vc_both_n300_selection.csv");
    CHECK(sel.rfind("M,mean_test_neg2ll,mean_B\n2,", 0) == 0);
    CHECK(sel.find("\n3,") != std::string::npos);
}
