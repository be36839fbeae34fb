#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "lljump/scenario.hpp"

using namespace lljump;
using nlohmann::json;
using scenario::Variant;

namespace {

const std::string kDir = LLJUMP_SCENARIO_DIR;

json read_json(const std::string& name) {
  std::ifstream in(kDir + "/" + name + ".json");
  return json::parse(in);
}

}  // namespace

TEST_CASE("every bundled scenario parses and validates") {
  int count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(kDir)) {
    if (entry.path().extension() != ".json") continue;
    CAPTURE(entry.path().string());
    const auto s = scenario::load(entry.path().string());
    CHECK(s.name == entry.path().stem().string());
    CHECK_NOTHROW(s.model().validate());
    ++count;
  }
  CHECK(count >= 9);
}

TEST_CASE("single-body twins carry the full mass and no leg mass") {
  const auto s = scenario::load(kDir + "/quad_twist90_srbm.json");
  CHECK(s.variant == Variant::Srbm);
  const auto ll = s.model(Variant::LlSrbm);
  const auto srb = s.model(Variant::Srbm);
  CHECK(srb.leg_mass() == 0.0);
  CHECK(srb.total_mass() == doctest::Approx(ll.total_mass()).epsilon(1e-15));
  // The lumps add inertia, so the equivalent body is heavier about every axis.
  for (int i = 0; i < 3; ++i) CHECK(srb.body_inertia(i, i) > ll.body_inertia(i, i));
}

TEST_CASE("unknown keys are rejected with their path") {
  json doc = read_json("quad_twist90");
  doc["weights"]["w_tme"] = 1.0;
  try {
    scenario::parse(doc);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("w_tme") != std::string::npos);
  }
  doc = read_json("quad_twist90");
  doc["extra"] = true;
  CHECK_THROWS_AS(scenario::parse(doc), SchemaError);
}

TEST_CASE("structural errors are schema errors") {
  const json base = read_json("quad_twist90");
  json doc = base;
  doc["schema_version"] = 2;
  CHECK_THROWS_AS(scenario::parse(doc), SchemaError);
  doc = base;
  doc["drop"] = read_json("quad_drop")["drop"];
  CHECK_THROWS_AS(scenario::parse(doc), SchemaError);
  doc = base;
  doc.erase("task");
  CHECK_THROWS_AS(scenario::parse(doc), SchemaError);
  doc = base;
  doc["task"]["feet_ini"].erase(0);
  CHECK_THROWS_AS(scenario::parse(doc), SchemaError);
  doc = base;
  doc["robot"]["body_mass"] = "heavy";
  CHECK_THROWS_AS(scenario::parse(doc), SchemaError);
  doc = base;
  doc["sim"]["ground"]["platforms"] = json::array({json{{"x_min", 0.0}}});
  CHECK_THROWS_AS(scenario::parse(doc), SchemaError);
}

TEST_CASE("missing files are IO errors") {
  CHECK_THROWS_AS(scenario::load(kDir + "/no_such_scenario.json"), IoError);
}

TEST_CASE("body inertia accepts scalar, diagonal and full forms") {
  json doc = read_json("quad_twist90");
  doc["robot"]["body_inertia"] = 0.7;
  CHECK(scenario::parse(doc).robot.body_inertia.isApprox(0.7 * model::Mat3::Identity()));
  doc["robot"]["body_inertia"] = json::array({0.4, 1.0, 1.1});
  const auto diag = scenario::parse(doc).robot.body_inertia;
  doc["robot"]["body_inertia"] = json::array({json::array({0.4, 0, 0}), json::array({0, 1.0, 0}), json::array({0, 0, 1.1})});
  CHECK(scenario::parse(doc).robot.body_inertia == diag);
}

TEST_CASE("yaw_deg sets the orientation") {
  const auto s = scenario::load(kDir + "/quad_twist90.json");
  CHECK(model::yaw_of(s.task.x_fin.q) == doctest::Approx(M_PI / 2).epsilon(1e-12));
  CHECK(model::yaw_of(s.task.x_ini.q) == doctest::Approx(0.0));
}

TEST_CASE("plan hash follows the planning inputs only") {
  const json base = read_json("quad_twist90");
  const auto s = scenario::parse(base);
  const std::string h = s.plan_hash(Variant::LlSrbm);
  CHECK(h.size() == 16);
  CHECK(h != s.plan_hash(Variant::Srbm));

  json doc = base;
  doc["sim"]["seed"] = 99;
  doc["controller"]["gains"]["kp_pos"] = 50.0;
  doc["description"] = "changed";
  CHECK(scenario::parse(doc).plan_hash(Variant::LlSrbm) == h);

  doc = base;
  doc["weights"]["w_time"] = 10.0;
  CHECK(scenario::parse(doc).plan_hash(Variant::LlSrbm) != h);
  doc = base;
  doc["task"]["N"] = 42;
  CHECK(scenario::parse(doc).plan_hash(Variant::LlSrbm) != h);
}

TEST_CASE("drop scenarios plan without the optimizer") {
  const auto s = scenario::load(kDir + "/quad_drop.json");
  CHECK(s.plan_kind == scenario::PlanKind::Drop);
  const auto r = scenario::make_plan(s, s.variant);
  CHECK(r.report.converged());
  CHECK(r.report.iterations == 0);
  CHECK(r.trajectory.duration() > s.drop.hold_time);
}

TEST_CASE("variant names round trip") {
  for (Variant v : {Variant::LlSrbm, Variant::Srbm}) CHECK(scenario::variant_from_string(scenario::to_string(v)) == v);
  CHECK_THROWS_AS(scenario::variant_from_string("full"), SchemaError);
}
