#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace fs = std::filesystem;
using eigentrack::fixtures::config_path;
using eigentrack::fixtures::scratch;

namespace {

struct Outcome {
    int code = -1;
    std::string out;
};

/// Runs the CLI with stderr discarded and the shared test cache.
Outcome run(const std::string& args)
{
    std::string cmd = "EIGENTRACK_CACHE='" + (scratch("cache") / "paper_1d").string() + "' '" +
                      EIGENTRACK_CLI + "' " + args + " 2>/dev/null";
    Outcome o;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) {
        return o;
    }
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) {
        o.out.append(buf, n);
    }
    int status = pclose(pipe);
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return o;
}

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string config_1d() { return "--config '" + config_path("paper_1d.cfg").string() + "'"; }

fs::path variant(const std::string& name, const std::string& from, const std::string& to)
{
    std::string text = slurp(config_path("paper_1d.cfg"));
    text.replace(text.find(from), from.size(), to);
    fs::path p = scratch("cli") / name;
    std::ofstream(p) << text;
    return p;
}

} // namespace

TEST(Cli, UsageErrors)
{
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("frobnicate").code, 2);
    EXPECT_EQ(run("refine").code, 2);
    EXPECT_EQ(run("refine --config /nonexistent.cfg").code, 2);
    EXPECT_EQ(run("snapshot " + config_1d()).code, 2);
    EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, Snapshot)
{
    Outcome o = run("snapshot " + config_1d() + " --at 0.7");
    EXPECT_EQ(o.code, 0);
    EXPECT_NE(o.out.find("eigenvalues (9)"), std::string::npos) << o.out;
    EXPECT_EQ(run("snapshot " + config_1d() + " --at 0.3").code, 1);
    EXPECT_EQ(run("snapshot " + config_1d() + " --at 0.7 0.8").code, 1);
}

TEST(Cli, MatchAndVerify)
{
    Outcome m = run("match " + config_1d() + " --first 0.4 --second 0.7");
    EXPECT_EQ(m.code, 0);
    EXPECT_NE(m.out.find("sigma (first->second): 1 2 5 8"), std::string::npos) << m.out;
    Outcome v = run("verify " + config_1d() + " --first 0.4 --second 0.7");
    EXPECT_EQ(v.code, 0);
    EXPECT_NE(v.out.find("j=2 r1={ 2 5 } r2={ 2 4 }"), std::string::npos) << v.out;
    EXPECT_NE(v.out.find("verdict: refine"), std::string::npos);
}

TEST(Cli, RefineIsDeterministic)
{
    fs::path a = scratch("cli") / "run_a", b = scratch("cli") / "run_b";
    fs::remove_all(a);
    fs::remove_all(b);
    Outcome first = run("refine " + config_1d() + " --jobs 1 --out '" + a.string() + "'");
    Outcome second = run("refine " + config_1d() + " --jobs 2 --out '" + b.string() + "'");
    ASSERT_EQ(first.code, 0) << first.out;
    ASSERT_EQ(second.code, 0);
    EXPECT_NE(first.out.find("termination: converged"), std::string::npos);
    int compared = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        fs::path other = b / entry.path().filename();
        ASSERT_TRUE(fs::exists(other)) << other;
        EXPECT_EQ(slurp(entry.path()), slurp(other)) << entry.path().filename();
        ++compared;
    }
    EXPECT_EQ(compared, 12);
}

TEST(Cli, LevelCapExitCode)
{
    fs::path cfg = variant("capped.cfg", "max_level = 10", "max_level = 0");
    Outcome o = run("refine --config '" + cfg.string() + "' --out '" + (scratch("cli") / "capped").string() + "'");
    EXPECT_EQ(o.code, 3);
    EXPECT_NE(o.out.find("termination: max_level"), std::string::npos);
}

TEST(Cli, InvalidConfig)
{
    fs::path cfg = variant("invalid.cfg", "window = 0 270", "window = 5 5");
    EXPECT_EQ(run("refine --config '" + cfg.string() + "'").code, 1);
}

TEST(Cli, Surrogate)
{
    fs::path out = scratch("cli") / "surrogate";
    fs::remove_all(out);
    std::string base = config_1d() + " --out '" + out.string() + "'";
    EXPECT_EQ(run("surrogate eval " + base + " --surface 1 --at 0.55").code, 1);
    ASSERT_EQ(run("surrogate build " + base).code, 0);
    Outcome v = run("surrogate eval " + base + " --surface 1 --at 0.55");
    EXPECT_EQ(v.code, 0);
    std::string surfaces = slurp(out / "surfaces.csv");
    std::string value = v.out.substr(0, v.out.find('\n'));
    EXPECT_NE(surfaces.find("," + value + "\n"), std::string::npos) << value;
    EXPECT_EQ(run("surrogate eval " + base + " --surface 999 --at 0.55").code, 1);
    EXPECT_EQ(run("surrogate eval " + base + " --surface 1 --at 1.5").code, 1);
    EXPECT_EQ(run("surrogate " + base).code, 2);
}

TEST(Cli, CacheOverride)
{
    fs::path cache = scratch("cli") / "env_cache";
    fs::remove_all(cache);
    std::string cmd = "EIGENTRACK_CACHE='" + cache.string() + "' '" + EIGENTRACK_CLI + "' snapshot " +
                      config_1d() + " --at 0.4 >/dev/null 2>&1";
    EXPECT_EQ(std::system(cmd.c_str()), 0);
    EXPECT_TRUE(fs::exists(cache / "snap_n-1d0.bin"));
}
