#include <cstdio>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "doctest.h"
#include "support.hpp"

#include "json.hpp"

namespace fs = std::filesystem;
using namespace testing;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

Run run(const std::string& args, const std::string& env = "")
{
    const std::string cmd = env + " \"" + std::string(INRSTRAIN_CLI_PATH) + "\" " + args + " 2>&1";
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::string small_phantom_flags =
    "--dims 32,32,6 --spacing 2,2,8 --r-in 8 --r-out 13 --c-max 25 --taper-radius 20 --phases 4";

const std::string quick_pipeline_flags =
    "--align-iterations 20 --iterations 10 --chain-iterations 5 --hidden-width 16 --hidden-layers 2 "
    "--batch-sax 200 --batch-4ch 100 --upsample-factor 2";

} // namespace

TEST_SUITE("cli")
{
    TEST_CASE("phantom generation writes the view set and a manifest")
    {
        const auto dir = temp_dir("cli_phantom");
        const auto r = run("phantom --out " + (dir / "ph").string() + " --seed 7 " + small_phantom_flags);
        INFO(r.out);
        REQUIRE(r.code == 0);
        CHECK(fs::exists(dir / "ph" / "viewset.json"));
        CHECK(fs::exists(dir / "ph" / "ground_truth.json"));
        CHECK(fs::exists(dir / "ph" / "sax_img_00.mha"));
        CHECK(fs::exists(dir / "ph" / "ch4_seg_03.mha"));
        const auto m = nlohmann::json::parse(slurp(dir / "ph" / "run_manifest.json"));
        CHECK(m.at("subcommand") == "phantom");
        CHECK(m.at("exit_status") == 0);
        CHECK(m.at("seed") == 7);
    }

    TEST_CASE("output directory from the environment")
    {
        const auto dir = temp_dir("cli_env");
        const auto r = run("phantom " + small_phantom_flags, "INRSTRAIN_OUT=" + (dir / "e").string());
        INFO(r.out);
        CHECK(r.code == 0);
        CHECK(fs::exists(dir / "e" / "viewset.json"));
    }

    TEST_CASE("stats on two groups")
    {
        const auto dir = temp_dir("cli_stats");
        {
            std::ofstream a(dir / "a.csv"), b(dir / "b.csv");
            a << "name,peak\nx,1\ny,2\nz,3\n";
            b << "name,peak\nx,4\ny,5\nz,6\n";
        }
        const auto r = run("stats --groups " + (dir / "a.csv").string() + " " + (dir / "b.csv").string() +
                           " --column peak --out " + (dir / "kw.json").string());
        INFO(r.out);
        REQUIRE(r.code == 0);
        CHECK(r.out.find("H = 3.857") != std::string::npos);
        const auto j = nlohmann::json::parse(slurp(dir / "kw.json"));
        CHECK(std::abs(j.at("H").get<double>() - 3.857) < 1e-3);
        CHECK(std::abs(j.at("p").get<double>() - 0.0495) < 1e-3);
        CHECK(run("stats --groups " + (dir / "a.csv").string() + " " + (dir / "b.csv").string() + " --column nope")
                  .code == 2);
    }

    TEST_CASE("exit codes")
    {
        const auto dir = temp_dir("cli_codes");
        CHECK(run("").code == 1);
        CHECK(run("frobnicate").code == 1);
        CHECK(run("phantom --out " + dir.string() + " --no-such-flag").code == 1);
        CHECK(run("register --in " + dir.string() + " --out " + dir.string() + " --iterations many").code == 1);
        CHECK(run("register --in " + (dir / "missing").string() + " --out " + (dir / "o").string()).code == 2);
        {
            std::ofstream cfg(dir / "bad.json");
            cfg << "{\"iterationz\": 5}";
        }
        CHECK(run("register --in " + dir.string() + " --out " + (dir / "o").string() + " --config " +
                  (dir / "bad.json").string())
                  .code == 2);
        CHECK(run("phantom --out " + (dir / "p").string() + " --r-in 40").code == 2);
        CHECK(run("pipeline --help").code == 0);
    }

    TEST_CASE("help lists the documented defaults")
    {
        const auto r = run("pipeline --help");
        for (const char* s : {"--align-iterations", "2000", "--align-lr", "0.01", "--lr", "0.0001", "--batch-sax",
                              "10000", "--alpha-fg", "0.05", "--alpha-bg", "--upsample-factor", "--seed",
                              "--deterministic", "--jobs", "--config"}) {
            INFO(s);
            CHECK(r.out.find(s) != std::string::npos);
        }
    }

    TEST_CASE("small pipeline end to end, reproducible")
    {
        const auto dir = temp_dir("cli_pipeline");
        REQUIRE(run("phantom --out " + (dir / "ph").string() + " --misalign 2 --misalign-seed 3 " +
                    small_phantom_flags)
                    .code == 0);
        std::string csv[2];
        for (int rep = 0; rep < 2; ++rep) {
            const fs::path out = dir / ("run" + std::to_string(rep));
            const auto r = run("pipeline --in " + (dir / "ph").string() + " --out " + out.string() + " " +
                               quick_pipeline_flags + " --seed 7 --deterministic");
            INFO(r.out);
            REQUIRE(r.code == 0);
            for (const char* f : {"shifts.csv", "strain_curves.csv", "peak_strain.csv", "metrics.csv",
                                  "metrics_baseline.csv", "loss_trace.csv", "run_manifest.json",
                                  "strain_LV_radial.svg", "loss_trace.svg"}) {
                INFO(f);
                CHECK(fs::exists(out / f));
            }
            csv[rep] = slurp(out / "strain_curves.csv") + slurp(out / "metrics.csv") + slurp(out / "shifts.csv");
        }
        CHECK(csv[0] == csv[1]);
        CHECK(csv[0].rfind("time_index,", 0) == 0);
    }

    TEST_CASE("staged subcommands")
    {
        const auto dir = temp_dir("cli_stages");
        const std::string ph = (dir / "ph").string();
        REQUIRE(run("phantom --out " + ph + " " + small_phantom_flags).code == 0);
        const auto reg = run("register --in " + ph + " --out " + (dir / "reg").string() +
                             " --iterations 5 --hidden-width 16 --hidden-layers 1 --batch-sax 100 --batch-4ch 50");
        INFO(reg.out);
        REQUIRE(reg.code == 0);
        CHECK(fs::exists(dir / "reg" / "pair_00.params"));
        const auto st = run("strain --in " + ph + " --out " + (dir / "st").string() + " --params " +
                            (dir / "reg").string());
        INFO(st.out);
        CHECK(st.code == 0);
        CHECK(fs::exists(dir / "st" / "peak_strain.csv"));
        const auto ev = run("evaluate --in " + ph + " --out " + (dir / "ev").string() + " --params " +
                            (dir / "reg").string());
        INFO(ev.out);
        CHECK(ev.code == 0);
        CHECK(fs::exists(dir / "ev" / "metrics.csv"));
        const auto up = run("upsample --in " + ph + " --out " + (dir / "up").string() + " --upsample-factor 3");
        CHECK(up.code == 0);
        const auto al = run("align --in " + ph + " --out " + (dir / "al").string() + " --align-iterations 5");
        CHECK(al.code == 0);
        CHECK(fs::exists(dir / "al" / "shifts.csv"));
    }
}
