#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "clinctx/decimal.hpp"

namespace clinctx::value {

enum class Category { kCostSavings, kTimeSavings, kRevenueGrowth };
enum class Stage { kIntake, kImplementation, kMonitoring };
std::string_view to_string(Category c);
std::string_view to_string(Stage s);

inline constexpr double kDefaultFirstYearAdoption = 0.5;
inline constexpr double kDefaultSteadyStateAdoption = 1.0;

// users * queries_per_day * minutes_per_query / 60 * hourly_rate * days_per_year,
// divided once at the end. Throws Error(kNegativeInput) on any negative input.
Decimal time_savings(Decimal users, Decimal queries_per_day, Decimal minutes_per_query,
                     Decimal hourly_rate, Decimal days_per_year);

// Hours per day: (before - after) * minutes_per_chart / 60.
// Throws Error(kInvalidCounts) when after > before or any input is negative.
Decimal chart_review_savings(Decimal charts_before, Decimal charts_after, Decimal minutes_per_chart);

// beds_per_day * revenue_per_bed_day * days_per_year.
Decimal bed_day_revenue(Decimal beds_per_day, Decimal revenue_per_bed_day, Decimal days_per_year);

struct FormulaInfo {
  std::string_view name;
  std::vector<std::string_view> inputs;
  std::string_view expression;
  bool scales_with_adoption;
};
// time_savings, chart_review, bed_day_revenue, flat_saving.
const std::vector<FormulaInfo>& formulas();

struct ValueScenario {
  std::string name;
  std::string automation;
  Category category = Category::kTimeSavings;
  Stage stage = Stage::kIntake;
  std::string formula;
  std::map<std::string, Decimal> inputs;
  Decimal first_year_adoption = Decimal::parse("0.5");
  Decimal steady_state_adoption = Decimal::from_int(1);
  std::vector<std::string> notes;

  // Throws Error(kInvalidParams) for adoption outside (0, 1] or first > steady.
  void validate() const;
};

// Numbers may be JSON numbers or decimal strings. Throws Error(kConfigError).
ValueScenario parse_scenario(std::string_view json_text);
ValueScenario load_scenario(const std::filesystem::path& path);

struct Projection {
  std::string scenario;
  std::string formula;
  Decimal annual_value;  // at full adoption
  Decimal first_year;
  Decimal steady_state;
  // Hours per day for the time-based formulas.
  std::optional<Decimal> hours_per_day;
  std::vector<std::string> assumptions;
};

// Throws Error(kUnknownFormula) or the formula's own input errors.
Projection project(const ValueScenario& scenario);

// $2,190,000.00
std::string format_currency(Decimal v);
// $2.2M / $75K / $950, rounded half-up to `significant` figures.
std::string format_compact(Decimal v, int significant = 2);

std::string projection_to_json(const Projection& p);
std::string render_projection(const Projection& p, std::string_view stage = "both");

}  // namespace clinctx::value
