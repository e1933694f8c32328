#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "msle/experiment.hpp"

using namespace msle;
using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

json bpz_doc() {
  return json{{"check", "bpz"}, {"mode", "backward"}, {"kappa", 4.0}, {"points", {0.0, 1.0, 3.0}}};
}

std::string field_of(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.field;
  }
  return "";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path write(const std::string& file, const json& doc) const {
    std::ofstream(path / file) << doc.dump(2);
    return path / file;
  }
};

}  // namespace

TEST_CASE("parse a valid config") {
  const auto c = parse_config(bpz_doc());
  CHECK(c.check == CheckKind::bpz);
  CHECK(c.mode == Mode::backward);
  CHECK(*c.kappa == 4.0);
  CHECK(c.points == std::vector<double>{0.0, 1.0, 3.0});
  CHECK(c.out_path == "out");
}

TEST_CASE("config errors name the field") {
  auto d = bpz_doc();
  d.erase("kappa");
  CHECK(field_of(d) == "kappa");

  d = bpz_doc();
  d["kappa"] = "four";
  CHECK(field_of(d) == "kappa");

  d = bpz_doc();
  d["kappa"] = -1.0;
  CHECK(field_of(d) == "kappa");

  d = bpz_doc();
  d["colour"] = 1;
  CHECK(field_of(d) == "colour");

  d = bpz_doc();
  d["points"] = {0.0, 0.0};
  CHECK(field_of(d) == "points");

  d = bpz_doc();
  d["check"] = "nonsense";
  CHECK(field_of(d) == "check");

  d = bpz_doc();
  d["mode"] = "sideways";
  CHECK(field_of(d) == "mode");

  json m = {{"check", "martingale"}, {"mode", "backward"}, {"kappa", 4.0}, {"points", {0.0, 1.0}},
            {"i_index", 1}, {"t_final", 0.1}, {"dt", 0.1}, {"n_paths", 10}, {"seed", 1}};
  CHECK(field_of(m) == "dt");
  m["dt"] = 1e-3;
  CHECK(field_of(m) == "");
  m["i_index"] = 3;
  CHECK(field_of(m) == "i_index");
  m["i_index"] = 0;
  CHECK(field_of(m) == "i_index");
  m["i_index"] = 1;
  m["seed"] = -4;
  CHECK(field_of(m) == "seed");
  m.erase("seed");
  CHECK(field_of(m) == "seed");
  m["seed"] = 1;
  m["n_paths"] = 2.5;
  CHECK(field_of(m) == "n_paths");

  json cp = {{"check", "coupling_pde"}, {"mode", "backward"}, {"kappa", 4.0}, {"points", {0.0, 1.0}},
             {"bulk_points", {{1.0, 2.0}}}};
  CHECK(field_of(cp) == "gamma");
  cp["gamma"] = 2.0;
  cp["bulk_points"] = {{1.0, -2.0}};
  CHECK(field_of(cp) == "bulk_points");

  json sc = {{"check", "schemes"}, {"mode", "forward"}, {"kappa", 4.0}, {"points", {0.0, 1.0}},
             {"i_index", 1}, {"j_index", 2}, {"eps_tilde", 0.01}, {"dt", 1e-3}, {"n_paths", 10},
             {"seed", 0}};
  CHECK(field_of(sc) == "mode");
  sc["mode"] = "backward";
  sc["j_index"] = 1;
  CHECK(field_of(sc) == "j_index");
}

TEST_CASE("bpz report") {
  const auto r = run_check(parse_config(bpz_doc()));
  CHECK(r.check == "bpz");
  REQUIRE(r.rows.size() == 3);
  for (const auto& row : r.rows) CHECK(row.estimate < 1e-5);
  CHECK(all_pass(r));
  const std::string csv = report_csv(r);
  CHECK(csv.rfind("check,name,estimate,std_error,reference,tolerance,n_samples,pass\n", 0) == 0);
  CHECK(csv.find("bpz,i=1,") != std::string::npos);
  CHECK(csv.find(",true\n") != std::string::npos);

  const auto j = report_json(r, parse_config(bpz_doc()));
  CHECK(j["header"]["config"]["kappa"] == 4.0);
  CHECK(j["header"].contains("version"));
  CHECK(j["rows"].size() == 3);
}

TEST_CASE("csv escapes and failing rows") {
  CheckReport r;
  r.check = "x";
  r.rows.push_back(make_report("a,b", 1.0, 0.0, 0.0, 0.5, 1));
  CHECK(report_csv(r) ==
        "check,name,estimate,std_error,reference,tolerance,n_samples,pass\n"
        "x,\"a,b\",1,0,0,0.5,1,false\n");
  CHECK_FALSE(all_pass(r));
}

TEST_CASE("deterministic checks") {
  json zip = {{"check", "zip"}, {"mode", "backward"}, {"t_final", 0.5}, {"dt", 0.05}};
  CHECK(all_pass(run_check(parse_config(zip))));
  zip["mode"] = "forward";
  CHECK(all_pass(run_check(parse_config(zip))));

  json kz = {{"check", "kz"}, {"mode", "forward"}, {"kappa", 6.0}, {"points", {0.0, 1.0, 2.0, 5.0}}};
  CHECK(all_pass(run_check(parse_config(kz))));

  json cm = {{"check", "commutator"}, {"mode", "backward"}, {"kappa", 4.0}, {"points", {0.0, 1.0, 3.0}},
             {"i_index", 1}, {"j_index", 2}};
  const auto r = run_check(parse_config(cm));
  CHECK(r.rows.size() == 2);
  CHECK(all_pass(r));

  json cp = {{"check", "coupling_pde"}, {"mode", "forward"}, {"kappa", 2.0}, {"points", {0.0, 1.0}},
             {"bulk_points", {{1.0, 2.0}, {-0.5, 0.7}}}};
  CHECK(all_pass(run_check(parse_config(cp))));
  cp["mode"] = "backward";
  cp["kappa"] = 4.0;
  cp["gamma"] = 2.0;
  CHECK(all_pass(run_check(parse_config(cp))));
  cp["epsilon_signs"] = {1, -1};
  CHECK_FALSE(all_pass(run_check(parse_config(cp))));

  json hc = {{"check", "hcap"}, {"mode", "backward"}, {"kappa", 4.0}, {"t_final", 0.1}, {"dt", 1e-3},
             {"seed", 3}, {"n_paths", 2}};
  CHECK(all_pass(run_check(parse_config(hc))));
}

TEST_CASE("stochastic checks are reproducible") {
  json m = {{"check", "martingale"}, {"mode", "backward"}, {"kappa", 4.0}, {"points", {0.0, 1.0}},
            {"i_index", 1}, {"t_final", 0.05}, {"dt", 1e-3}, {"n_paths", 200}, {"seed", 5}};
  const auto a = report_csv(run_check(parse_config(m)));
  m["workers"] = 1;
  const auto b = report_csv(run_check(parse_config(m)));
  CHECK(a == b);
  m["seed"] = 6;
  CHECK(report_csv(run_check(parse_config(m))) != a);
}

TEST_CASE("exit codes") {
  TempDir tmp("msle_test_experiment");
  std::ostringstream err;

  CHECK(run_config_file(tmp.write("bpz.json", bpz_doc()), tmp.path / "o", err) == exit_pass);
  CHECK(fs::exists(tmp.path / "o" / "bpz.csv"));
  CHECK(fs::exists(tmp.path / "o" / "bpz.json"));

  auto missing = bpz_doc();
  missing.erase("kappa");
  err.str("");
  CHECK(run_config_file(tmp.write("missing.json", missing), tmp.path / "o", err) == exit_config);
  CHECK(err.str().find("kappa") != std::string::npos);

  std::ofstream(tmp.path / "broken.json") << "{ not json";
  CHECK(run_config_file(tmp.path / "broken.json", tmp.path / "o", err) == exit_config);
  CHECK(run_config_file(tmp.path / "absent.json", tmp.path / "o", err) == exit_config);

  json flipped = {{"check", "coupling_pde"}, {"mode", "backward"}, {"kappa", 4.0}, {"gamma", 2.0},
                  {"points", {0.0, 1.0}}, {"bulk_points", {{1.0, 2.0}}}, {"epsilon_signs", {1, 1}}};
  CHECK(run_config_file(tmp.write("flipped.json", flipped), tmp.path / "o", err) == exit_failed_row);

  // Without a stopping bound a few paths carry almost all the importance weight.
  json ess = {{"check", "girsanov"}, {"mode", "backward"}, {"kappa", 0.25}, {"points", {0.0, 0.2, 0.5}},
              {"i_index", 2}, {"t_final", 0.5}, {"dt", 0.01}, {"n_paths", 400}, {"seed", 1},
              {"bound_n", 1e300}};
  err.str("");
  CHECK(run_config_file(tmp.write("ess.json", ess), tmp.path / "o", err) == exit_numerical);
  CHECK(err.str().find("numerical failure") != std::string::npos);

  json bad_gamma = {{"check", "coupling_pde"}, {"mode", "backward"}, {"kappa", 3.0}, {"gamma", 1.0},
                    {"points", {0.0, 1.0}}, {"bulk_points", {{1.0, 2.0}}}};
  CHECK(run_config_file(tmp.write("gamma.json", bad_gamma), tmp.path / "o", err) == exit_config);
}

TEST_CASE("out_path from the config") {
  TempDir tmp("msle_test_outpath");
  auto d = bpz_doc();
  d["out_path"] = (tmp.path / "here").string();
  std::ostringstream err;
  CHECK(run_config_file(tmp.write("c.json", d), std::nullopt, err) == exit_pass);
  CHECK(fs::exists(tmp.path / "here" / "bpz.csv"));
}

TEST_CASE("sweeps") {
  TempDir tmp("msle_test_sweep");
  std::ostringstream err;
  auto d = bpz_doc();
  d["kappa"] = {2.0, 8.0 / 3.0, 4.0, 6.0};
  CHECK(run_sweep_file(tmp.write("k.json", d), tmp.path / "k", err) == exit_pass);
  for (int n = 0; n < 4; ++n) {
    const std::string stem = "cell_00" + std::to_string(n);
    CHECK(fs::exists(tmp.path / "k" / (stem + ".csv")));
    CHECK(fs::exists(tmp.path / "k" / (stem + ".json")));
  }
  const std::string summary = slurp(tmp.path / "k" / "summary.csv");
  CHECK(summary.rfind("cell,check,kappa,points,eps_tilde,rows,passed,max_abs_diff,exit_code\n", 0) == 0);
  std::size_t lines = 0;
  for (char c : summary) lines += c == '\n';
  CHECK(lines == 5);

  auto p = bpz_doc();
  p["points"] = {{0.0, 1.0}, {0.0, 1.0, 3.0}};
  p["kappa"] = {2.0, 4.0};
  CHECK(run_sweep_file(tmp.write("p.json", p), tmp.path / "p", err) == exit_pass);
  CHECK(fs::exists(tmp.path / "p" / "cell_003.csv"));

  auto empty = bpz_doc();
  empty["kappa"] = json::array();
  CHECK(run_sweep_file(tmp.write("e.json", empty), tmp.path / "e", err) == exit_config);
  CHECK(run_sweep_file(tmp.write("none.json", bpz_doc()), tmp.path / "n", err) == exit_config);

  auto mixed = bpz_doc();
  mixed["kappa"] = {4.0, -1.0};
  CHECK(run_sweep_file(tmp.write("m.json", mixed), tmp.path / "m", err) == exit_config);
}
