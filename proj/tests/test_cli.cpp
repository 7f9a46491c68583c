#include "mdae/motion.hpp"
#include "mdae/pose_repr.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

using namespace mdae;
namespace fs = std::filesystem;

namespace {

const std::string cli = MDAE_CLI_PATH;

int run(const std::string& args) {
    const int status = std::system((cli + " " + args + " 2>/dev/null").c_str());
    return WEXITSTATUS(status);
}

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / "mdae_cli_test") {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    std::string operator/(const std::string& name) const {
        return (path / name).string();
    }
};

void write_chain(const std::string& path) {
    std::ofstream(path) << R"({"root":"ROOT","links":[
        {"parent":"ROOT","child":"HIP"},{"parent":"HIP","child":"KNEE"},
        {"parent":"KNEE","child":"ANK"},{"parent":"ANK","child":"TOE"}]})";
}

bool same_bytes(const std::string& a, const std::string& b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    const std::string ca((std::istreambuf_iterator<char>(fa)),
                         std::istreambuf_iterator<char>());
    const std::string cb((std::istreambuf_iterator<char>(fb)),
                         std::istreambuf_iterator<char>());
    return !ca.empty() && ca == cb;
}

} // namespace

TEST_CASE("usage errors exit with code 2") {
    CHECK(run("definitely-not-a-command") == 2);
    CHECK(run("") == 2);
    CHECK(run("features --nope") == 2);
}

TEST_CASE("module errors exit with code 1") {
    TempDir dir;
    write_chain(dir / "chain.json");
    CHECK(run("features --in " + (dir / "missing.mdae") + " --chain " +
              (dir / "chain.json") + " --out " + (dir / "f.mdaf")) == 1);
}

TEST_CASE("synth is deterministic under a fixed seed") {
    TempDir dir;
    REQUIRE(run("synth --seed 7 --per-cell 2 --out " + (dir / "a")) == 0);
    REQUIRE(run("synth --seed 7 --per-cell 2 --out " + (dir / "b")) == 0);
    REQUIRE(run("synth --seed 8 --per-cell 2 --out " + (dir / "c")) == 0);
    CHECK(same_bytes(dir / "a/sample_0000.mdae", dir / "b/sample_0000.mdae"));
    CHECK_FALSE(same_bytes(dir / "a/sample_0000.mdae", dir / "c/sample_0000.mdae"));
    CHECK(same_bytes(dir / "a/manifest.json", dir / "b/manifest.json"));
}

TEST_CASE("features then coords round trips below 1e-6 m") {
    TempDir dir;
    write_chain(dir / "chain.json");
    REQUIRE(run("synth --seed 3 --per-cell 1 --out " + (dir / "d")) == 0);
    REQUIRE(run("features --in " + (dir / "d/sample_0000.mdae") + " --chain " +
                (dir / "chain.json") + " --out " + (dir / "f.mdaf")) == 0);
    REQUIRE(run("coords --in " + (dir / "f.mdaf") + " --out " + (dir / "back.mdae")) ==
            0);
    const MotionSequence orig =
        load_sequence(dir / "d/sample_0000.mdae", FileFormat::Binary);
    const MotionSequence back = load_sequence(dir / "back.mdae", FileFormat::Binary);
    REQUIRE(back.markers == orig.markers);
    CHECK((back.coords - orig.coords).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("prep applies centering and facing normalization") {
    TempDir dir;
    REQUIRE(run("synth --seed 5 --per-cell 1 --out " + (dir / "d")) == 0);
    REQUIRE(run("prep --manifest " + (dir / "d/manifest.json") + " --out " +
                (dir / "p") + " --root-marker ROOT --report " +
                (dir / "outliers.json")) == 0);
    const MotionSequence p =
        load_sequence(dir / "p/sample_0000.mdae", FileFormat::Binary);
    CHECK(p.pos(0, p.marker_index("ROOT")).x() == 0.0);
    CHECK(p.pos(0, p.marker_index("ROOT")).y() == 0.0);
    CHECK(fs::exists(dir / "outliers.json"));
    CHECK(fs::exists(dir / "p/manifest.json"));
}

TEST_CASE("render writes the marker csv and svg frames") {
    TempDir dir;
    write_chain(dir / "chain.json");
    REQUIRE(run("synth --seed 6 --per-cell 1 --frames 12 --out " + (dir / "d")) == 0);
    REQUIRE(run("render --in " + (dir / "d/sample_0000.mdae") + " --chain " +
                (dir / "chain.json") + " --out " + (dir / "r") + " --stride 4") == 0);
    CHECK(fs::exists(dir / "r/markers.csv"));
    CHECK(fs::exists(dir / "r/frame_0000.svg"));
    CHECK(fs::exists(dir / "r/frame_0008.svg"));
    std::ifstream svg(dir / "r/frame_0000.svg");
    const std::string content((std::istreambuf_iterator<char>(svg)),
                              std::istreambuf_iterator<char>());
    CHECK(content.find("<svg") != std::string::npos);
    CHECK(content.find("<line") != std::string::npos);
}

TEST_CASE("config file supplies flags, command line overrides") {
    TempDir dir;
    std::ofstream(dir / "cfg.toml") << "[synth]\nper-cell=1\nframes=16\n";
    REQUIRE(run("synth --config " + (dir / "cfg.toml") + " --seed 2 --out " +
                (dir / "a")) == 0);
    const MotionSequence a =
        load_sequence(dir / "a/sample_0000.mdae", FileFormat::Binary);
    CHECK(a.frames() == 16);
    REQUIRE(run("synth --config " + (dir / "cfg.toml") + " --seed 2 --frames 8 --out " +
                (dir / "b")) == 0);
    const MotionSequence b =
        load_sequence(dir / "b/sample_0000.mdae", FileFormat::Binary);
    CHECK(b.frames() == 8);
}
