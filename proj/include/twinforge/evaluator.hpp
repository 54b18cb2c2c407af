#pragma once

// Outcome checking: the evaluator interface, geometric placement predicates,
// and batch labeling of simulated samples.

#include <string>
#include <vector>

#include "twinforge/simulator.hpp"

namespace twinforge {

/// One of inside(A,B), on_top(A,B), upright(A), upside_down(A),
/// bridges(A,B,C), in_gap(A,B,C); args are object names.
struct PlacementPredicate {
  std::string name;
  std::vector<std::string> args;

  /// Throws InvalidInput on an unknown name or the wrong arity.
  void validate() const;
  std::string to_string() const;
};

/// Satisfied when every predicate holds.
struct Goal {
  std::vector<PlacementPredicate> all_of;
};

/// Stand-in for a vision-language checker: judges an outcome against the
/// instruction.
class OutcomeEvaluator {
 public:
  virtual ~OutcomeEvaluator() = default;
  virtual bool evaluate(const SceneTwin& scene, const SimOutcome& outcome,
                        const std::string& instruction) const = 0;
};

struct PredicateTolerances {
  double inside_fraction = 0.9;
  double contact = 2e-3;
  double axis_deg = 20.0;
  std::size_t surface_samples = 400;
};

/// Evaluates a predicate on the settled poses. Every predicate is false for
/// unstable or penetrating outcomes.
bool evaluate_predicate(const SceneTwin& scene, const SimOutcome& outcome,
                        const PlacementPredicate& predicate, const PredicateTolerances& tol = {});

class GeometricEvaluator : public OutcomeEvaluator {
 public:
  explicit GeometricEvaluator(Goal goal, PredicateTolerances tol = {});
  /// Ignores the instruction text; the goal encodes it.
  bool evaluate(const SceneTwin& scene, const SimOutcome& outcome,
                const std::string& instruction) const override;

 private:
  Goal goal_;
  PredicateTolerances tol_;
};

/// Simulates and labels every sample independently (in parallel). A
/// penetrating start pose is labeled false with reason "penetration" before
/// the evaluator is asked; simulator errors become false labels with reason
/// "simulation-error: ...".
void label_samples(const SceneTwin& scene, std::vector<StrategySample>& samples, const Simulator& simulator,
                   const OutcomeEvaluator& evaluator, const std::string& instruction);

}  // namespace twinforge
