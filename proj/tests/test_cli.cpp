// Copyright 2026 The Nigra Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <json.hpp>
#include <optional>

#include "cli_harness.hpp"
#include "oracles.hpp"
#include "nigra/io.hpp"
#include "test_util.hpp"

using namespace nigra;

namespace {

const std::string kCli = NIGRA_CLI_PATH;

int nigra_cli(const std::string& args, const std::filesystem::path& log) {
  return testing::run_command(kCli + " " + args, log);
}

}  // namespace

TEST_CASE("exit codes") {
  const auto dir = testing::scratch_dir("cli_exit");
  const auto log = dir / "log.txt";
  CHECK(nigra_cli("--help", log) == 0);
  CHECK(nigra_cli("frobnicate", log) == 1);
  CHECK(nigra_cli("generate --set train.nonsense=1 --out " + (dir / "a").string(), log) == 1);
  CHECK(nigra_cli("generate --size 8 --out " + (dir / "b").string(), log) == 1);
  // Missing inputs are configuration errors; unreadable data is a runtime error.
  CHECK(nigra_cli("eval --checkpoint " + (dir / "none").string() + " --out " + (dir / "c").string(), log) == 1);
  io::write_text(dir / "broken.png", "not a png");
  io::write_text(dir / "m.json", R"([{"sample_id":"x","image_path":"broken.png","mask_path":"broken.png","split":"test"}])");
  CHECK(nigra_cli("quantify --manifest " + (dir / "m.json").string() + " --out " + (dir / "d").string(), log) == 2);
  CHECK(io::read_text(log).find("nonsense") != std::string::npos);
}

TEST_CASE("run.json records the resolved config") {
  const auto dir = testing::scratch_dir("cli_runjson");
  REQUIRE(nigra_cli("generate --n 2 --size 32 --seed 5 --out " + dir.string(), dir / "log.txt") == 0);
  const auto j = nlohmann::json::parse(io::read_text(dir / "run.json"));
  CHECK(j["command"] == "generate");
  CHECK(j["seed"] == 5);
  CHECK(j["config"]["generate"]["size"] == 32);
}

TEST_CASE("--no-elastic sets the elastic probability to zero") {
  const auto dir = testing::scratch_dir("cli_noet");
  const auto log = dir / "log.txt";
  REQUIRE(nigra_cli("generate --n 10 --size 32 --out " + (dir / "gen").string(), log) == 0);
  REQUIRE(nigra_cli("train --manifest " + (dir / "gen" / "manifest.json").string() +
                        " --backbone tiny-test --input-size 32 --epochs 1 --no-elastic --set "
                        "'model.decoder_channel_widths=[8,8,8,8,8]' --out " + (dir / "t").string(),
                    log) == 0);
  const auto j = nlohmann::json::parse(io::read_text(dir / "t" / "run.json"));
  CHECK(j["config"]["augment"]["elastic_p"] == 0);
}

TEST_CASE("every subcommand reruns byte-identically") {
  const auto work = std::filesystem::temp_directory_path() / "nigra_test_cli_rerun";
  for (const auto& r : testing::rerun_all_subcommands(kCli, work)) {
    CAPTURE(r.subcommand);
    CHECK(r.exit_code == 0);
    CHECK(r.identical);
  }
}

TEST_CASE("help lists the config keys a subcommand reads") {
  const auto dir = testing::scratch_dir("cli_help");
  REQUIRE(nigra_cli("train --help", dir / "help.txt") == 0);
  const auto help = io::read_text(dir / "help.txt");
  for (const char* key : {"train.learning_rate", "train.plateau_patience", "model.backbone", "augment.elastic_p"}) {
    CHECK(help.find(key) != std::string::npos);
  }
}

TEST_CASE("empty validation split exits 1 naming the split") {
  const auto dir = testing::scratch_dir("cli_noval");
  const auto log = dir / "log.txt";
  REQUIRE(nigra_cli("generate --n 4 --size 32 --set 'generate.split=[1.0,0.0,0.0]' --out " + (dir / "gen").string(),
                    log) == 0);
  io::write_text(dir / "cfg.json",
                 "{\"data\": {\"manifest\": \"" + (dir / "gen" / "manifest.json").string() +
                     "\"}, \"model\": {\"backbone\": \"tiny-test\", \"input_size\": 32}}");
  CHECK(nigra_cli("train --config " + (dir / "cfg.json").string() + " --out " + (dir / "t").string(), log) == 1);
  CHECK(io::read_text(log).find("'val' split") != std::string::npos);
}

TEST_CASE("eval mean dice matches a brute-force recomputation") {
  const auto dir = testing::scratch_dir("cli_eval");
  const auto log = dir / "log.txt";
  const std::string m = (dir / "gen" / "manifest.json").string();
  const std::string ck = (dir / "train" / "best").string();
  REQUIRE(nigra_cli("generate --n 20 --size 64 --out " + (dir / "gen").string(), log) == 0);
  REQUIRE(nigra_cli("train --manifest " + m +
                        " --backbone tiny-test --input-size 64 --epochs 2 --set "
                        "'model.decoder_channel_widths=[32,16,16,8,8]' --out " + (dir / "train").string(),
                    log) == 0);
  REQUIRE(nigra_cli("eval --checkpoint " + ck + " --manifest " + m + " --split test --out " + (dir / "eval").string(),
                    log) == 0);
  REQUIRE(nigra_cli("predict --checkpoint " + ck + " --manifest " + m + " --split test --out " +
                        (dir / "pred").string(),
                    log) == 0);
  double total = 0.0;
  int images = 0;
  for (const auto& s : io::select_split(io::read_manifest(m), Split::kTest)) {
    const auto pred = io::read_mask(dir / "pred" / "masks" / (s.sample_id + ".png"));
    const auto truth = io::read_mask(s.mask_path);
    double sum = 0.0;
    int defined = 0;
    for (ClassId k = 1; k < 3; ++k) {
      const auto c = testing::brute_counts(pred, truth, k);
      if (c.tp + c.fp + c.fn == 0) continue;
      sum += 2.0 * c.tp / (2.0 * c.tp + c.fp + c.fn);
      ++defined;
    }
    if (defined) {
      total += sum / defined;
      ++images;
    }
  }
  REQUIRE(images > 0);
  const auto table = io::read_csv(dir / "eval" / "metrics.csv");
  std::optional<double> mean_dice;
  for (const auto& row : table.rows) {
    if (row[0] == "mean") mean_dice = std::stod(row[2]);
  }
  REQUIRE(mean_dice.has_value());
  CHECK(*mean_dice == doctest::Approx(total / images).epsilon(1e-12));
}
