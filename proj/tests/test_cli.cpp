#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

// SSLKIT_PATH is injected by the build as the absolute path of the tool.

namespace {

int run_tool(const std::string& args, const std::string& stdout_path = "cli_out.txt") {
    for (const char* name : {"SSL_PRECISION", "SSL_PATH", "SSL_THREADS", "SSL_WINDOW_FRAMES",
                             "SSL_NUM_SOURCES", "SSL_SEED", "SSL_NOISE_MODEL", "SSL_STEERING"})
        unsetenv(name);
    const std::string cmd =
        std::string(SSLKIT_PATH) + " " + args + " > " + stdout_path + " 2> cli_err.txt";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

const char* kSceneConfig = R"({
  "window_frames": 10,
  "seed": 404,
  "grid_step_deg": 10.0,
  "geometry": {"kind": "circular", "count": 4, "radius": 0.05},
  "scene": {
    "duration_s": 0.6,
    "diffuse_level_db": -25,
    "sources": [
      {"azimuth_deg": 40, "kind": "white", "level_db": 0},
      {"azimuth_deg": 150, "kind": "white", "level_db": -5, "noise_role": true}
    ]
  }
})";

} // namespace

TEST_CASE("usage errors exit with the argument failure code") {
    CHECK(run_tool("") == 2);            // a subcommand is required
    CHECK(run_tool("frobnicate") == 2);  // unknown subcommand
    CHECK(run_tool("--help") == 0);
    CHECK(read_file("cli_out.txt").find("locate") != std::string::npos);
}

TEST_CASE("verify distinguishes missing files from bad content") {
    CHECK(run_tool("verify --config does_not_exist.json") == 4);

    write_file("cli_bad.json", "{broken");
    CHECK(run_tool("verify --config cli_bad.json") == 2);
    std::remove("cli_bad.json");

    CHECK(run_tool("verify") == 0); // defaults alone are a valid config
    const std::string out = read_file("cli_out.txt");
    CHECK(out.find("config: ok") != std::string::npos);
    CHECK(out.find("verify: all inputs ok") != std::string::npos);
}

TEST_CASE("config value errors exit with the validation code") {
    write_file("cli_scene.json", kSceneConfig);
    CHECK(run_tool("locate --config cli_scene.json --precision half") == 2);
    CHECK(run_tool("synth --config cli_scene.json") == 2); // no outputs requested
    CHECK(run_tool("bench --config cli_scene.json --mode nonsense") == 2);
}

TEST_CASE("synth, verify and locate round trip") {
    write_file("cli_scene.json", kSceneConfig);
    CHECK(run_tool("synth --config cli_scene.json --out cli_scene.wav "
                   "--noise-out cli_k.bin --steering-out cli_steer.bin") == 0);

    // a config referencing every produced file passes verification
    std::string full(kSceneConfig);
    full.insert(1, "\"input\": \"cli_scene.wav\", \"noise_model\": \"cli_k.bin\", "
                   "\"steering\": \"cli_steer.bin\",");
    write_file("cli_full.json", full);
    CHECK(run_tool("verify --config cli_full.json") == 0);
    const std::string report = read_file("cli_out.txt");
    CHECK(report.find("4 channels") != std::string::npos);
    CHECK(report.find("positive definite") != std::string::npos);

    CHECK(run_tool("locate --config cli_full.json --out cli_est1.jsonl") == 0);
    CHECK(run_tool("locate --config cli_full.json --out cli_est2.jsonl") == 0);
    const std::string est1 = read_file("cli_est1.jsonl");
    const std::string est2 = read_file("cli_est2.jsonl");
    REQUIRE(!est1.empty());
    CHECK(est1 == est2); // identical inputs, identical bytes
    // 57 analysis frames, 9 fill the correlation window
    std::size_t lines = 0;
    for (char c : est1)
        if (c == '\n') ++lines;
    CHECK(lines == 48);
    CHECK(est1.find("\"frame\":") != std::string::npos);
    CHECK(est1.find("\"azimuth_deg\":") != std::string::npos);

    // the exact path consumes the same inputs
    CHECK(run_tool("locate --config cli_full.json --precision double --out cli_est3.jsonl") == 0);
    REQUIRE(!read_file("cli_est3.jsonl").empty());

    for (const char* f : {"cli_scene.json", "cli_full.json", "cli_scene.wav", "cli_k.bin",
                          "cli_steer.bin", "cli_est1.jsonl", "cli_est2.jsonl", "cli_est3.jsonl"})
        std::remove(f);
}

TEST_CASE("factorization bench reports json") {
    CHECK(run_tool("bench --mode factorization --m 4 --bins 6 --repeats 1 --out cli_bench.json") ==
          0);
    const std::string rep = read_file("cli_bench.json");
    CHECK(rep.find("\"speedup\"") != std::string::npos);
    CHECK(rep.find("\"naive_s\"") != std::string::npos);
    CHECK(rep.find("\"m\": 4") != std::string::npos);
    std::remove("cli_bench.json");
}
