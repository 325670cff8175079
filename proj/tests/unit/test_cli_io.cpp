#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "cli.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "vehdet/detect.hpp"
#include "vehdet/eval.hpp"
#include "vehdet/weights.hpp"

using namespace vehdet;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("vehdet_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  [[nodiscard]] fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

NetworkConfig small_config() {
  NetworkConfig cfg;
  cfg.input_size = 64;
  return cfg;
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

RgbImage pattern_image(int w, int h) {
  RgbImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.at(x, y, 0) = static_cast<std::uint8_t>(x * 3 + y);
      img.at(x, y, 1) = static_cast<std::uint8_t>(y * 5);
      img.at(x, y, 2) = static_cast<std::uint8_t>((x ^ y) & 0xff);
    }
  }
  return img;
}

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "vehdet");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

WeightsError::Kind load_error_kind(const fs::path& manifest, const fs::path& blob,
                                   const NetworkConfig& cfg) {
  try {
    (void)build_network(cfg, load_weights(manifest, blob));
  } catch (const WeightsError& e) {
    return e.kind();
  }
  FAIL("expected a weights error");
  return WeightsError::Kind::Manifest;
}

}  // namespace

TEST_SUITE("cli-io") {
  TEST_CASE("weights round-trip bitwise") {
    TempDir dir;
    const NetworkConfig cfg = small_config();
    ParamStore params = random_params(plan_network(cfg), 17);
    // Exercise BN statistics and signed zeros too.
    params.at("stage1.bn.mean").data()[0] = -0.0f;
    params.at("stage1.bn.var").data()[1] = 3.25f;
    const Network net = build_network(cfg, params);
    save_weights(net, dir / "w.json", dir / "w.bin");

    const WeightStore store = load_weights(dir / "w.json", dir / "w.bin");
    std::uint64_t expected_bytes = 0;
    for (const auto& [_, t] : params) expected_bytes += t.size() * 4;
    CHECK(store.blob.size() == expected_bytes);
    const Network back = build_network(cfg, store);
    REQUIRE(back.params().size() == params.size());
    for (const auto& [name, t] : params) {
      const Tensor& r = back.params().at(name);
      REQUIRE(r.shape() == t.shape());
      CHECK(std::memcmp(r.data().data(), t.data().data(), t.size() * 4) == 0);
    }
    CHECK(blob_path_for(dir / "w.json") == dir / "w.bin");
  }

  TEST_CASE("manifest order does not matter") {
    TempDir dir;
    const NetworkConfig cfg = small_config();
    save_weights(build_network(cfg, 5), dir / "w.json", dir / "w.bin");
    nlohmann::json j = nlohmann::json::parse(read_file(dir / "w.json"));
    // Write the tensors object by hand in reverse key order.
    std::string text = R"({"format": "vehdet-weights", "version": 1, "blob_bytes": )" +
                       j["blob_bytes"].dump() + R"(, "tensors": {)";
    const auto& tensors = j["tensors"];
    bool first = true;
    std::vector<std::string> keys;
    for (const auto& [k, _] : tensors.items()) keys.push_back(k);
    for (auto k = keys.rbegin(); k != keys.rend(); ++k) {
      text += (first ? "" : ", ") + nlohmann::json(*k).dump() + ": " + tensors[*k].dump();
      first = false;
    }
    text += "}}";
    std::ofstream(dir / "r.json") << text;
    CHECK(load_weights(dir / "r.json", dir / "w.bin").tensors() ==
          load_weights(dir / "w.json", dir / "w.bin").tensors());
  }

  TEST_CASE("weight file errors are distinct") {
    TempDir dir;
    const NetworkConfig cfg = small_config();
    save_weights(build_network(cfg, 5), dir / "w.json", dir / "w.bin");
    const nlohmann::json manifest = nlohmann::json::parse(read_file(dir / "w.json"));
    const std::string blob = read_file(dir / "w.bin");

    SUBCASE("truncated blob names the layer") {
      std::ofstream(dir / "t.bin", std::ios::binary) << blob.substr(0, blob.size() - 4);
      std::string last;
      std::uint64_t last_offset = 0;
      for (const auto& [name, e] : manifest["tensors"].items()) {
        if (e["offset"].get<std::uint64_t>() >= last_offset) {
          last_offset = e["offset"].get<std::uint64_t>();
          last = name;
        }
      }
      try {
        (void)load_weights(dir / "w.json", dir / "t.bin");
        FAIL("truncation not detected");
      } catch (const WeightsError& e) {
        CHECK(e.kind() == WeightsError::Kind::Truncated);
        CHECK(std::string(e.what()).find(last) != std::string::npos);
      }
    }
    SUBCASE("offset past the declared size") {
      nlohmann::json m = manifest;
      m["tensors"]["stage1.conv.weight"]["offset"] = m["blob_bytes"].get<std::uint64_t>();
      std::ofstream(dir / "o.json") << m.dump();
      CHECK(load_error_kind(dir / "o.json", dir / "w.bin", cfg) == WeightsError::Kind::OffsetOverflow);
    }
    SUBCASE("unknown layer") {
      nlohmann::json m = manifest;
      m["tensors"]["bogus.weight"] = {{"shape", {1, 1, 1, 1}}, {"offset", 0}};
      std::ofstream(dir / "u.json") << m.dump();
      CHECK(load_error_kind(dir / "u.json", dir / "w.bin", cfg) == WeightsError::Kind::UnknownLayer);
    }
    SUBCASE("shape mismatch against the config") {
      NetworkConfig other = cfg;
      other.stage_widths[0] = 12;
      CHECK(load_error_kind(dir / "w.json", dir / "w.bin", other) == WeightsError::Kind::ShapeMismatch);
    }
    SUBCASE("missing tensor") {
      nlohmann::json m = manifest;
      m["tensors"].erase("stage1.conv.weight");
      std::ofstream(dir / "m.json") << m.dump();
      CHECK(load_error_kind(dir / "m.json", dir / "w.bin", cfg) == WeightsError::Kind::Missing);
    }
    SUBCASE("malformed manifest") {
      std::ofstream(dir / "bad.json") << "{\"format\": 3";
      CHECK_THROWS_AS(load_weights(dir / "bad.json", dir / "w.bin"), WeightsError);
    }
  }

  TEST_CASE("count metrics") {
    using Counts = std::map<std::string, std::size_t>;
    const auto perfect = evaluate_counts(Counts{{"a", 3}, {"b", 0}}, Counts{{"a", 3}, {"b", 0}});
    CHECK(perfect.mae == 0.0);
    CHECK(perfect.rmse == 0.0);
    const auto one = evaluate_counts(Counts{{"a", 3}, {"b", 5}}, Counts{{"a", 4}, {"b", 4}});
    CHECK(one.mae == 1.0);
    CHECK(one.rmse == 1.0);
    const auto two = evaluate_counts(Counts{{"a", 2}, {"b", 6}}, Counts{{"a", 4}, {"b", 4}});
    CHECK(two.mae == 2.0);
    CHECK(two.rmse == 2.0);
    CHECK_THROWS(evaluate_counts(Counts{{"a", 1}}, Counts{{"b", 1}}));

    std::mt19937 rng(50);
    for (int i = 0; i < 100; ++i) {
      Counts p, g;
      for (int k = 0; k < 20; ++k) {
        p[std::to_string(k)] = rng() % 60;
        g[std::to_string(k)] = rng() % 60;
      }
      const auto s = evaluate_counts(p, g);
      CHECK(s.mae <= s.rmse);
    }
  }

  TEST_CASE("average precision") {
    const AnnotationsByImage gts{{"img", {{1, {0, 0, 10, 10}}, {1, {20, 20, 30, 30}}}}};
    const DetectionsByImage exact{
        {"img", {{1, 0.9, {0, 0, 10, 10}}, {1, 0.8, {20, 20, 30, 30}}}}};
    CHECK(evaluate_ap(exact, gts) == 1.0);
    CHECK(evaluate_ap({{"img", {}}}, gts) == 0.0);

    const DetectionsByImage tp_fp{{"img", {{1, 0.9, {0, 0, 10, 10}}, {1, 0.8, {50, 50, 60, 60}}}}};
    std::vector<PrPoint> curve;
    CHECK(evaluate_ap(tp_fp, gts, 0.5, &curve) == 0.5);
    REQUIRE(curve.size() == 2);
    CHECK(curve[0].precision == 1.0);
    CHECK(curve[0].recall == 0.5);
    CHECK(curve[1].precision == 0.5);
    CHECK(curve[1].recall == 0.5);

    // A duplicate of a matched box is a false positive.
    const DetectionsByImage dup{{"img", {{1, 0.9, {0, 0, 10, 10}}, {1, 0.8, {0, 0, 10, 10}}}}};
    CHECK(evaluate_ap(dup, gts) == 0.5);
    CHECK_THROWS(evaluate_ap({{"other", {}}}, gts));
  }

  TEST_CASE("annotations CSV") {
    const auto a = parse_annotations_csv(
        "image_id,xmin,ymin,xmax,ymax,class\n"
        "img1, 1, 2, 30, 40, 1\n"
        "img1,5,5,9,9,1\n"
        "\n"
        "img2,0,0,4.5,4,1\n");
    REQUIRE(a.size() == 2);
    CHECK(a.at("img1").size() == 2);
    CHECK(a.at("img1")[0].box == Box{1, 2, 30, 40});
    CHECK(a.at("img2")[0].box.xmax == 4.5);
    CHECK_THROWS_AS(parse_annotations_csv("img,1,2,3\n"), IoError);
    CHECK_THROWS_AS(parse_annotations_csv("img,1,2,x,4,1\n"), IoError);
    CHECK_THROWS_AS(parse_annotations_csv("img,5,5,1,1,1\n"), IoError);
  }

  TEST_CASE("PNG round-trip") {
    TempDir dir;
    const RgbImage img = pattern_image(37, 23);
    save_png(img, dir / "p.png");
    const RgbImage back = load_png(dir / "p.png");
    CHECK(back.width == 37);
    CHECK(back.height == 23);
    CHECK(back.pixels == img.pixels);
    CHECK_THROWS_AS(load_png(dir / "missing.png"), IoError);
  }

  TEST_CASE("tiled detection of a small image equals untiled detection") {
    const NetworkConfig cfg = small_config();
    const Network net = build_network(cfg, 3);
    const PriorSet priors = generate_priors(cfg);
    for (auto [w, h] : {std::pair{64, 64}, {300, 200}, {512, 512}}) {
      const RgbImage img = pattern_image(w, h);
      CHECK(detect(net, priors, img, {true, 512, 100}) == detect(net, priors, img));
    }
  }

  TEST_CASE("cli priors and flops") {
    const CliRun priors = run_cli({"priors"});
    CHECK(priors.code == 0);
    CHECK(priors.out.find("total priors: 24532") != std::string::npos);
    CHECK(priors.out.find("stage2") != std::string::npos);
    CHECK(priors.out.find("28642") != std::string::npos);

    const CliRun flops = run_cli({"flops"});
    CHECK(flops.code == 0);
    CHECK(flops.out.find("baseline") != std::string::npos);
    CHECK(flops.out.find("delta") != std::string::npos);

    const CliRun grid = run_cli({"flops", "--ablation-grid", "--json"});
    CHECK(grid.code == 0);
    const auto j = nlohmann::json::parse(grid.out);
    CHECK(j["dab_grid"].size() == 7);
  }

  TEST_CASE("cli exit codes") {
    CHECK(run_cli({}).code == 2);
    CHECK(run_cli({"flops", "--bogus"}).code == 2);
    CHECK(run_cli({"nonsense"}).code == 2);
    CHECK(run_cli({"detect", "--image", "x.png", "--out", "y.json"}).code == 2);
    CHECK(run_cli({"--help"}).code == 0);

    TempDir dir;
    std::ofstream(dir / "cfg.json") << R"({"groups": 7})";
    CHECK(run_cli({"priors", "--config", (dir / "cfg.json").string()}).code == 1);
  }

  TEST_CASE("cli detect, weights and eval") {
    TempDir dir;
    std::ofstream(dir / "cfg.json") << config_to_json(small_config()).dump();
    save_png(pattern_image(512, 512), dir / "scene.png");
    const std::string cfg = (dir / "cfg.json").string(), img = (dir / "scene.png").string();

    const CliRun a = run_cli({"detect", "--config", cfg, "--seed", "4", "--image", img, "--out",
                              (dir / "a.json").string()});
    REQUIRE(a.code == 0);
    const auto dets = nlohmann::json::parse(read_file(dir / "a.json"));
    REQUIRE(dets.is_array());
    for (const auto& d : dets) {
      CHECK(d["image_id"] == "scene");
      CHECK(d["xmin"].get<double>() <= d["xmax"].get<double>());
      CHECK(d["score"].get<double>() >= 0.5);
    }

    CHECK(run_cli({"detect", "--config", cfg, "--seed", "4", "--image", img, "--tile", "--out",
                   (dir / "b.json").string()})
              .code == 0);
    CHECK(read_file(dir / "a.json") == read_file(dir / "b.json"));

    REQUIRE(run_cli({"init-weights", "--config", cfg, "--seed", "4", "--out",
                     (dir / "w.json").string()})
                .code == 0);
    CHECK(run_cli({"detect", "--config", cfg, "--weights", (dir / "w.json").string(), "--image",
                   img, "--out", (dir / "c.json").string()})
              .code == 0);
    CHECK(read_file(dir / "a.json") == read_file(dir / "c.json"));

    std::ofstream(dir / "gt.csv") << "image_id,xmin,ymin,xmax,ymax,class\nscene,10,10,60,40,1\n";
    const CliRun ev = run_cli({"eval", "--dets", (dir / "a.json").string(), "--gt",
                               (dir / "gt.csv").string(), "--ap", "--json"});
    REQUIRE(ev.code == 0);
    const auto summary = nlohmann::json::parse(ev.out);
    CHECK(summary["images"][0]["ground_truth"] == 1);
    CHECK(summary["mae"].get<double>() <= summary["rmse"].get<double>());
    CHECK(summary.contains("ap"));
  }
}
