#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "medfuse/data.hpp"

using nlohmann::json;

namespace {

const std::string cli = MEDFUSE_CLI_PATH;

struct RunResult {
    int exit_code;
    std::string out;
};

RunResult run(const std::string& args) {
    const std::string cmd = cli + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    char buf[4096];
    while (std::size_t n = fread(buf, 1, sizeof(buf), pipe)) out.append(buf, n);
    const int status = pclose(pipe);
    return {WEXITSTATUS(status), out};
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

struct Workdir {
    std::string path;
    Workdir() {
        char tmpl[] = "/tmp/medfuse_cli_XXXXXX";
        path = mkdtemp(tmpl);
    }
    ~Workdir() { std::system(("rm -rf " + path).c_str()); }
};

void write_config(const std::string& path, const json& j) {
    std::ofstream f(path);
    f << j.dump();
}

json small_config(const std::string& family) {
    return json{{"family", family},       {"data.t_enc", 24},      {"data.t_dec", 12},
                {"model.hidden", 10},     {"model.att_hidden", 5}, {"train.max_epochs", 8},
                {"train.patience", 8}};
}

}  // namespace

TEST_CASE("synth is deterministic and rejects bad station counts") {
    Workdir wd;
    RunResult r1 = run("synth --out " + wd.path + "/a --stations 4 --steps 800 --seed 3");
    RunResult r2 = run("synth --out " + wd.path + "/b --stations 4 --steps 800 --seed 3");
    CHECK(r1.exit_code == 0);
    CHECK(slurp(wd.path + "/a/data.csv") == slurp(wd.path + "/b/data.csv"));

    // row count = stations * steps + header
    std::ifstream f(wd.path + "/a/data.csv");
    std::size_t lines = 0;
    std::string line;
    while (std::getline(f, line)) ++lines;
    CHECK(lines == 4 * 800 + 1);

    RunResult bad = run("synth --out " + wd.path + "/c --stations 2 --steps 800");
    CHECK(bad.exit_code != 0);
}

TEST_CASE("train writes checkpoint and report; reruns are byte-identical") {
    Workdir wd;
    run("synth --out " + wd.path + " --stations 3 --steps 900 --seed 5");
    write_config(wd.path + "/cfg.json", small_config("attention"));

    const std::string base = " --data " + wd.path + "/data.csv --config " + wd.path +
                             "/cfg.json --seed 2";
    RunResult r1 = run("train" + base + " --out " + wd.path + "/m1.ckpt");
    RunResult r2 = run("train" + base + " --out " + wd.path + "/m2.ckpt");
    REQUIRE(r1.exit_code == 0);
    CHECK(slurp(wd.path + "/m1.ckpt") == slurp(wd.path + "/m2.ckpt"));

    json report = json::parse(slurp(wd.path + "/m1.ckpt.report.json"));
    CHECK(report.at("family") == "attention");
    CHECK(report.at("test_mse_percent").get<double>() > 0.0);
    CHECK(report.at("effective_config").at("train.learning_rate").get<double>() == 0.05);

    // eval reproduces the report's stored test value exactly (2-decimal print)
    RunResult ev = run("eval --model " + wd.path + "/m1.ckpt --data " + wd.path + "/data.csv");
    CHECK(ev.exit_code == 0);
    char expected[32];
    std::snprintf(expected, sizeof(expected), "%.2f\n",
                  report.at("test_mse_percent").get<double>());
    CHECK(ev.out == expected);
}

TEST_CASE("last-observed family trains nothing but still reports test MSE") {
    Workdir wd;
    run("synth --out " + wd.path + " --stations 3 --steps 800 --seed 6");
    write_config(wd.path + "/cfg.json", small_config("last-observed"));
    RunResult r = run("train --data " + wd.path + "/data.csv --config " + wd.path +
                      "/cfg.json --out " + wd.path + "/lo.ckpt");
    REQUIRE(r.exit_code == 0);
    json report = json::parse(slurp(wd.path + "/lo.ckpt.report.json"));
    CHECK(report.at("test_mse_percent").get<double>() > 0.0);
    RunResult ev = run("eval --model " + wd.path + "/lo.ckpt --data " + wd.path + "/data.csv");
    CHECK(ev.exit_code == 0);
}

TEST_CASE("config validation lists offending keys") {
    Workdir wd;
    run("synth --out " + wd.path + " --stations 3 --steps 800 --seed 6");
    json cfg = small_config("attention");
    cfg["model.hiden"] = 4;
    cfg["bogus"] = true;
    write_config(wd.path + "/cfg.json", cfg);
    const std::string cmd = cli + " train --data " + wd.path + "/data.csv --config " + wd.path +
                            "/cfg.json --out " + wd.path + "/x.ckpt 2>" + wd.path + "/err.txt";
    const int status = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(status) != 0);
    const std::string err = slurp(wd.path + "/err.txt");
    CHECK(err.find("model.hiden") != std::string::npos);
    CHECK(err.find("bogus") != std::string::npos);
}

TEST_CASE("attention export rows sum to one; predict round-trips through load_csv") {
    Workdir wd;
    run("synth --out " + wd.path + " --stations 3 --steps 900 --seed 7");
    write_config(wd.path + "/cfg.json", small_config("attention"));
    run("train --data " + wd.path + "/data.csv --config " + wd.path + "/cfg.json --out " +
        wd.path + "/m.ckpt --seed 4");

    RunResult att = run("attention --model " + wd.path + "/m.ckpt --data " + wd.path +
                        "/data.csv --out " + wd.path + "/att.csv");
    REQUIRE(att.exit_code == 0);
    std::ifstream f(wd.path + "/att.csv");
    std::string line;
    std::getline(f, line);
    CHECK(line == "sample,decoder,encoder,weight");
    std::map<std::pair<int, int>, double> sums;
    while (std::getline(f, line)) {
        int sample, decoder, encoder;
        double weight;
        REQUIRE(std::sscanf(line.c_str(), "%d,%d,%d,%lf", &sample, &decoder, &encoder, &weight) ==
                4);
        sums[{sample, decoder}] += weight;
    }
    REQUIRE(!sums.empty());
    for (const auto& [key, sum] : sums) CHECK(std::abs(sum - 1.0) < 1e-9);

    RunResult pr = run("predict --model " + wd.path + "/m.ckpt --data " + wd.path +
                       "/data.csv --out " + wd.path + "/pred.csv");
    REQUIRE(pr.exit_code == 0);
    medfuse::RawSeries back = medfuse::load_csv(wd.path + "/pred.csv");
    CHECK(back.station_count() == 3);
    CHECK(back.values.all_finite());
}

TEST_CASE("all baseline families run end to end") {
    Workdir wd;
    run("synth --out " + wd.path + " --stations 3 --steps 900 --seed 8");
    for (const std::string family :
         {"rnn-joint", "rnn-per-station", "linreg-joint", "linreg-per-station"}) {
        write_config(wd.path + "/cfg.json", small_config(family));
        RunResult r = run("train --data " + wd.path + "/data.csv --config " + wd.path +
                          "/cfg.json --out " + wd.path + "/" + family + ".ckpt");
        REQUIRE(r.exit_code == 0);
        RunResult ev = run("eval --model " + wd.path + "/" + family + ".ckpt --data " + wd.path +
                           "/data.csv");
        CHECK(ev.exit_code == 0);
        json report = json::parse(slurp(wd.path + "/" + family + ".ckpt.report.json"));
        char expected[32];
        std::snprintf(expected, sizeof(expected), "%.2f\n",
                      report.at("test_mse_percent").get<double>());
        CHECK(ev.out == expected);
    }
}
