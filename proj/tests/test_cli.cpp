#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "cg/attribution.hpp"
#include "cg/dataset.hpp"
#include "cg/network.hpp"

using namespace cg;
namespace fs = std::filesystem;

namespace {

const char* cli_path() { return CG_CLI_PATH; }

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "cg_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(cli_path()) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("datagen sine writes the expected shape deterministically") {
    const fs::path d1 = fresh_dir("sine1");
    const fs::path d2 = fresh_dir("sine2");
    CHECK(run_cli("datagen sine --n 2500 --seed 7 --out " + d1.string()) == 0);
    CHECK(run_cli("datagen sine --n 2500 --seed 7 --out " + d2.string()) == 0);

    const Dataset data = read_csv(d1 / "sine.csv");
    CHECK(data.size() == 2500);
    CHECK(data.input_dim() == 2);
    CHECK(data.concept_dim() == 2);
    CHECK(data.target_dim() == 1);

    CHECK(slurp(d1 / "sine.csv") == slurp(d2 / "sine.csv"));
    CHECK(fs::exists(d1 / "sine_meta.json"));
    CHECK(fs::exists(d1 / "datagen_sine.config.json"));

    const fs::path d3 = fresh_dir("sine3");
    CHECK(run_cli("datagen sine --n 2500 --seed 8 --out " + d3.string()) == 0);
    CHECK(slurp(d1 / "sine.csv") != slurp(d3 / "sine.csv"));
}

TEST_CASE("datagen multilabel emits binary concept columns") {
    const fs::path dir = fresh_dir("ml");
    CHECK(run_cli("datagen multilabel --n 300 --m 16 --d 32 --seed 3 --out " + dir.string()) ==
          0);
    const Dataset data = read_csv(dir / "multilabel.csv");
    CHECK(data.size() == 300);
    CHECK(data.concept_dim() == 16);
    CHECK(data.all_concepts_binary());
}

TEST_CASE("attribute on the scaling fixture prints the known relevances") {
    const fs::path dir = fresh_dir("fixture");
    REQUIRE(run_cli("fixture --kind scaling --out " + dir.string()) == 0);
    REQUIRE(fs::exists(dir / "f.json"));
    REQUIRE(fs::exists(dir / "g.json"));

    const fs::path out = dir / "attr.csv";
    CHECK(run_cli("attribute --model " + (dir / "f.json").string() + " --concept-model " +
                  (dir / "g.json").string() + " --data " + (dir / "fixture.csv").string() +
                  " --method cg_individual --norm pinv --layer 0 --out " + out.string()) == 0);

    const auto results = read_attributions_csv(out);
    REQUIRE(!results.empty());
    for (const auto& r : results) {
        CHECK(r.relevance(0, 0) == doctest::Approx(0.1).epsilon(1e-9));
        CHECK(r.relevance(1, 0) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("eval recall reports non-decreasing values over k") {
    const fs::path dir = fresh_dir("recall");

    // Tiny hand-written dataset: 2 instances, 3 concepts, scalar target.
    {
        std::ofstream csv(dir / "data.csv");
        csv << "x0,c0,c1,c2,y0,split\n";
        csv << "0.5,1,1,0,0,test\n";
        csv << "-0.5,0,0,1,0,test\n";
    }
    std::vector<AttributionResult> results;
    results.push_back({Matrix{{0.9}, {0.5}, {0.1}}, 0, {}});
    results.push_back({Matrix{{0.9}, {0.5}, {0.1}}, 1, {}});
    write_attributions_csv(results, dir / "attr.csv");

    CHECK(run_cli("eval recall --attributions " + (dir / "attr.csv").string() + " --data " +
                  (dir / "data.csv").string() + " --k 1,2,3 --target-output 0 --out " +
                  (dir / "recall.json").string()) == 0);

    const std::string report = slurp(dir / "recall.json");
    // Instance 0 positives {0,1}: 1/2, 2/2, 2/2. Instance 1 positives {2}:
    // 0, 0, 1. Means: 0.25, 0.5, 1.0.
    CHECK(report.find("\"1\": 0.25") != std::string::npos);
    CHECK(report.find("\"2\": 0.5") != std::string::npos);
    CHECK(report.find("\"3\": 1.0") != std::string::npos);
}

TEST_CASE("eval mse against a truth vector") {
    const fs::path dir = fresh_dir("mse");
    std::vector<AttributionResult> results;
    results.push_back({Matrix{{0.4633}, {0.2271}}, 0, {}});
    write_attributions_csv(results, dir / "attr.csv");

    CHECK(run_cli("eval mse --attributions " + (dir / "attr.csv").string() +
                  " --truth 0.3633,0.2271 --out " + (dir / "mse.json").string()) == 0);
    const std::string report = slurp(dir / "mse.json");
    const std::size_t colon = report.find(":");
    REQUIRE(colon != std::string::npos);
    CHECK(std::stod(report.substr(colon + 1)) == doctest::Approx(0.005).epsilon(1e-9));
}

TEST_CASE("train command is deterministic and writes a config snapshot") {
    const fs::path dir = fresh_dir("train");
    REQUIRE(run_cli("datagen sine --n 200 --seed 5 --out " + dir.string()) == 0);

    const std::string common = "train --data " + (dir / "sine.csv").string() +
                               " --hidden 8 --depth 2 --epochs 5 --seed 11 --out ";
    CHECK(run_cli(common + (dir / "f1.json").string()) == 0);
    CHECK(run_cli(common + (dir / "f2.json").string()) == 0);
    CHECK(slurp(dir / "f1.json") == slurp(dir / "f2.json"));
    CHECK(fs::exists(dir / "train.config.json"));
    CHECK(fs::exists(dir / "f1.loss.csv"));
}

TEST_CASE("config file supplies defaults that flags override") {
    const fs::path dir = fresh_dir("config");
    {
        std::ofstream cfg(dir / "run.json");
        cfg << "{\"n\": 50, \"seed\": 9, \"out\": \"" << (dir / "from_config").string()
            << "\"}\n";
    }
    CHECK(run_cli("--config " + (dir / "run.json").string() + " datagen sine") == 0);
    CHECK(read_csv(dir / "from_config" / "sine.csv").size() == 50);

    CHECK(run_cli("--config " + (dir / "run.json").string() + " datagen sine --n 20 --out " +
                  (dir / "overridden").string()) == 0);
    CHECK(read_csv(dir / "overridden" / "sine.csv").size() == 20);
}

TEST_CASE("input errors exit with code 2") {
    CHECK(run_cli("train --data /nonexistent.csv --out /tmp/x.json --epochs 1") == 2);
    CHECK(run_cli("datagen multilabel --n 10 --m 3 --d 8 --out /tmp/cg_bad") == 2);
    CHECK(run_cli("attribute --model /nope.json --concept-model /nope.json --data /nope.csv") ==
          2);
    CHECK(run_cli("definitely-not-a-command") == 2);
}

TEST_CASE("diverging training exits with code 4") {
    const fs::path dir = fresh_dir("diverge");
    REQUIRE(run_cli("datagen sine --n 100 --seed 2 --out " + dir.string()) == 0);
    CHECK(run_cli("train --data " + (dir / "sine.csv").string() + " --optimizer sgd --lr 1e10" +
                  " --epochs 40 --hidden 8 --depth 1 --out " + (dir / "f.json").string()) == 4);
}

TEST_CASE("degenerate gradients above the threshold exit with code 3") {
    const fs::path dir = fresh_dir("degenerate");

    // Concept model with a relu head: zero gradient for negative inputs.
    const Network f(1, {Layer{LinearLayer{Matrix{{1.0}}, {0.0}}, false}});
    const Network g(1, {Layer{LinearLayer{Matrix{{1.0}}, {0.0}}, false},
                        Layer{Activation::Relu, false}});
    save_network(f, dir / "f.json");
    save_network(g, dir / "g.json");
    {
        std::ofstream csv(dir / "data.csv");
        csv << "x0,c0,y0,split\n1.0,1,1,test\n-1.0,0,0,test\n";
    }

    const std::string base = "attribute --model " + (dir / "f.json").string() +
                             " --concept-model " + (dir / "g.json").string() + " --data " +
                             (dir / "data.csv").string() + " --method cg_individual --out " +
                             (dir / "attr.csv").string();
    CHECK(run_cli(base) == 3);  // default threshold 0, one degenerate instance
    CHECK(run_cli(base + " --degenerate-threshold 1") == 0);
}
