#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "colang/config.hpp"

using namespace colang;

namespace {

std::size_t error_line(const std::string& text) {
  try {
    parse_config_string(text);
  } catch (const ConfigParseError& e) {
    return e.line();
  }
  return 0;
}

std::string error_message(const std::string& text) {
  try {
    parse_config_string(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("full config") {
  const RunConfig c = parse_config_string(R"(
# comment line
[experiment]
kind = curvature-study

[data]
dataset = spiral4
train_size = 1000   # trailing comment
test_size = 1000
batch_fraction = 0.05

[model]
hidden = 64, 32
activation = relu
init = standard

[optimizer]
name = c-colud
h = 0.05
gamma = 2.5
tau = 1e-4
split = OBA
radius = 2
r0 = 0.5

[run]
epochs = 30
eval_every = 5
seed = 7
seeds = 3
threads = 2
output = results/x
export_grids = true
)");
  CHECK(c.experiment == Experiment::CurvatureStudy);
  CHECK(c.data.dataset == "spiral4");
  CHECK(c.data.train_size == 1000);
  CHECK(c.data.noise() == 0.02);
  CHECK(c.data.batch_fraction == 0.05);
  CHECK(c.model.hidden == std::vector<std::size_t>{64, 32});
  CHECK(c.optimizer.method == Method::CColud);
  CHECK(c.optimizer.hyper.h == 0.05);
  CHECK(c.optimizer.hyper.gamma == 2.5);
  CHECK(c.optimizer.hyper.tau == 1e-4);
  CHECK(c.optimizer.hyper.split == "OBA");
  const auto cons = c.optimizer.constraints(3);
  CHECK(cons[0].radius == 0.5);
  CHECK(cons[1].radius == 2.0);
  CHECK(cons[2].kind == ConstraintKind::Circle);
  CHECK(c.run.epochs == 30);
  CHECK(c.run.seeds() == std::vector<std::uint64_t>{7, 8, 9});
  CHECK(c.run.output == "results/x");
  CHECK(c.run.export_grids);
  CHECK(c.effective_variants().size() == 1);
  CHECK(c.effective_variants()[0].name.empty());
}

TEST_CASE("defaults") {
  const RunConfig c = parse_config_string("[optimizer]\nname = sgd\n");
  CHECK(c.experiment == Experiment::Train);
  CHECK(c.data.dataset == "spiral2");
  CHECK(c.data.train_size == 100);
  CHECK(c.data.test_size == 2000);
  CHECK(c.data.noise() == 0.05);
  CHECK(c.data.batch_fraction == 0.02);
  CHECK(c.model.hidden == std::vector<std::size_t>{500});
  CHECK(c.optimizer.hyper.qn_iterations == 5);
  CHECK(c.optimizer.hyper.qn_tol == 1e-8);
  CHECK(c.run.seeds() == std::vector<std::uint64_t>{0});
}

TEST_CASE("variants copy the base optimizer") {
  const RunConfig c = parse_config_string(R"(
[optimizer]
h = 0.1
r0 = 1
r1 = 5

[variant sgd]
name = sgd

[variant csgld]
name = c-colod
tau = 5e-5
)");
  REQUIRE(c.variants.size() == 2);
  CHECK(c.variants[0].name == "sgd");
  CHECK(c.variants[1].optimizer.method == Method::CColod);
  CHECK(c.variants[1].optimizer.hyper.h == 0.1);
  CHECK(c.variants[1].optimizer.hyper.tau == 5e-5);
  CHECK(c.variants[0].optimizer.hyper.tau == 0.0);
  CHECK(c.variants[1].optimizer.constraints(2)[1].radius == 5.0);
}

TEST_CASE("orthogonal constraint layers") {
  const RunConfig all = parse_config_string("[optimizer]\nname = o-colod\n");
  const auto a = all.optimizer.constraints(4);
  for (const auto& lc : a) CHECK(lc.kind == ConstraintKind::Orthogonal);
  const RunConfig hidden = parse_config_string("[optimizer]\nname = o-colud\north_layers = hidden\n");
  const auto h = hidden.optimizer.constraints(4);
  CHECK(h[0].kind == ConstraintKind::None);
  CHECK(h[1].kind == ConstraintKind::Orthogonal);
  CHECK(h[2].kind == ConstraintKind::Orthogonal);
  CHECK(h[3].kind == ConstraintKind::None);
}

TEST_CASE("errors carry line numbers") {
  CHECK(error_line("[run]\nepochs = 3\nbogus = 1\n") == 3);
  CHECK(error_message("[run]\nbogus = 1\n").find("unknown key 'bogus'") != std::string::npos);
  CHECK(error_line("[run]\n\n[nonsense]\n") == 3);
  CHECK(error_line("epochs = 3\n") == 1);
  CHECK(error_line("[run]\nepochs = many\n") == 2);
  CHECK(error_line("[run]\nepochs\n") == 2);
  CHECK(error_line("[optimizer]\nname = adam\n") == 2);
  CHECK(error_line("[data]\ndataset = moons\n") == 2);
  CHECK(error_line("[run]\nexport_grids = maybe\n") == 2);
  CHECK(error_line("[variant]\nname = sgd\n") == 1);
  CHECK(error_line("[variant a]\n[variant a]\n") == 2);
}

TEST_CASE("circle methods require radii") {
  const std::string missing = "[data]\ntrain_size = 100\n\n[optimizer]\nname = c-colod\nh = 0.1\n";
  CHECK(error_message(missing).find("circle constraint requires radii") != std::string::npos);
  CHECK(error_line(missing) == 4);
  // A single missing layer radius is still an error.
  CHECK(error_line("[model]\nhidden = 10\n[optimizer]\nname = c-colud\nr0 = 1\n") == 3);
  CHECK(error_line("[optimizer]\nh = 0.1\n[variant c]\nname = c-colod\n") == 3);
  CHECK(error_line("[optimizer]\nname = c-colod\nradius = 0\n") == 1);
  CHECK_NOTHROW(parse_config_string("[model]\nhidden = 10\n[optimizer]\nname = c-colud\nr0 = 1\nr1 = 2\n"));
}

TEST_CASE("cross-field validation") {
  CHECK(error_message("[optimizer]\nh = 0\n").find("step size") != std::string::npos);
  CHECK(error_message("[optimizer]\nname = c-colud\nradius = 1\nsplit = ABX\n").find("split") != std::string::npos);
  CHECK(error_message("[optimizer]\nname = sgd-m\nmomentum = 1.0\n").find("momentum") != std::string::npos);
  CHECK(error_message("[data]\ntrain_size = 7\n").find("even") != std::string::npos);
  CHECK(error_message("[data]\nbatch_fraction = 0\n").find("batch_fraction") != std::string::npos);
  CHECK(error_message("[experiment]\nkind = gradcheck\n[gradcheck]\nwidths = 2\n").find("widths") != std::string::npos);
}

TEST_CASE("config file round trip") {
  const auto path = std::filesystem::temp_directory_path() / "colang_config_test.ini";
  {
    std::ofstream out(path);
    out << "[experiment]\nkind = sample-verify\n[sampler]\nbeta = 2\nsamples = 500\n";
  }
  const RunConfig c = parse_config(path);
  CHECK(c.experiment == Experiment::SampleVerify);
  CHECK(c.sampler.beta == 2.0);
  CHECK(c.sampler.samples == 500);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(parse_config(path), ConfigParseError);
}

TEST_CASE("experiment names") {
  for (auto e : {Experiment::Train, Experiment::CurvatureStudy, Experiment::OrthoDepthStudy,
                 Experiment::SampleVerify, Experiment::Gradcheck}) {
    CHECK(parse_experiment(to_string(e)) == e);
  }
  CHECK_THROWS_AS(parse_experiment("nope"), ConfigError);
  for (auto m : {Method::Sgd, Method::SgdMomentum, Method::Sgld, Method::CColod, Method::OColod,
                 Method::CColud, Method::OColud}) {
    CHECK(parse_method(to_string(m)) == m);
  }
}

TEST_CASE("shipped configs parse") {
  std::size_t count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(COLANG_CONFIG_DIR)) {
    if (entry.path().extension() != ".ini") continue;
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(parse_config(entry.path()));
    ++count;
  }
  CHECK(count >= 5);
}
