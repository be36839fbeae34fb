#pragma once

// Scenario files: one JSON document holding the robot, the task and every
// planner, controller, detector and simulator setting. See docs/scenarios.md.

#include <array>
#include <optional>
#include <string>

#include <json.hpp>

#include "lljump/sim.hpp"
#include "lljump/transcription.hpp"

namespace lljump::scenario {

inline constexpr int kSchemaVersion = 1;

enum class Variant { LlSrbm, Srbm };
std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

enum class PlanKind { Optimize, Drop };

struct Scenario {
  std::string name;
  std::string description;
  model::RobotModel robot;
  /// Model the scenario plans with unless overridden.
  Variant variant{Variant::LlSrbm};
  PlanKind plan_kind{PlanKind::Optimize};
  transcription::JumpTask task;
  std::optional<std::array<int, 3>> segments;
  sim::DropSpec drop;
  transcription::CostWeights weights;
  transcription::TranscriptionOptions transcription;
  solver::NlpSolverConfig solver;
  sim::ControllerConfig controller;
  detection::DetectorConfig detector;
  sim::SimConfig sim;
  sim::GroundModel ground;
  /// The parsed document, kept for hashing.
  nlohmann::json source;

  transcription::PhaseSchedule schedule() const;
  /// The lump-leg robot, or its single-body equivalent at the initial stance.
  model::RobotModel model(Variant v) const;
  model::RobotModel model() const { return model(variant); }
  /// Hex digest of everything that determines the plan for `v`.
  std::string plan_hash(Variant v) const;
};

/// Throws SchemaError naming the offending key.
Scenario parse(const nlohmann::json& doc);
/// Throws IoError when unreadable and SchemaError on bad content.
Scenario load(const std::string& path);

/// Plans the scenario: the optimizer for jump tasks, the analytic profile
/// for drops (reported as converged with zero iterations).
transcription::PlanResult make_plan(const Scenario& s, Variant v);

}  // namespace lljump::scenario
