#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "fbsvie/bsvie.hpp"
#include "fbsvie/model.hpp"
#include "fbsvie/report.hpp"

namespace fbsvie {

struct AcceptanceOptions {
  // Scenario for the Monte Carlo criteria; the reference scenario by default.
  ScenarioSpec scenario = reference_scenario();
  std::size_t n_paths = 100000;
  std::uint64_t seed = 42;
  std::size_t n_blocks = 8;
  std::size_t duality_paths = 200000;
  std::size_t bsvie_paths = 20000;
  std::size_t resolvent_paths = 1000;
};

inline constexpr int kCriterionCount = 10;

// The acceptance criteria, one CheckResult each. Solutions shared between
// criteria are computed once.
class AcceptanceSuite {
 public:
  explicit AcceptanceSuite(AcceptanceOptions options);

  const AcceptanceOptions& options() const { return options_; }

  CheckResult closed_form_optimum();
  CheckResult value_function_oracle();
  CheckResult optimality_ranking();
  CheckResult maximum_principle();
  CheckResult bsvie_solver();
  CheckResult contraction();
  CheckResult duality();
  CheckResult forward_solver();
  CheckResult adjoint_reduction();
  CheckResult z_regularity();

  // Criterion `id` in 1..kCriterionCount.
  CheckResult run(int id);
  // Every criterion (or the listed ones), reporting each result as it lands.
  std::vector<CheckResult> run_all(const std::vector<int>& only = {},
                                   const std::function<void(const CheckResult&)>& on_result = {});

 private:
  AcceptanceOptions options_;
  std::unique_ptr<BsvieSolution> martingale_;

  ScenarioSpec mc_scenario() const;
  const BsvieSolution& martingale_solution();
};

}  // namespace fbsvie
