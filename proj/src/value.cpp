#include "clinctx/value.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "clinctx/error.hpp"

namespace clinctx::value {
namespace {

using nlohmann::json;

const Decimal kSixty = Decimal::from_int(60);

void require_non_negative(std::initializer_list<std::pair<std::string_view, Decimal>> inputs) {
  for (auto [name, v] : inputs) {
    if (v < Decimal{}) throw Error(ErrorCode::kNegativeInput, fmt::format("{} is negative ({})", name, v.to_canonical()));
  }
}

Decimal input(const ValueScenario& s, std::string_view name) {
  auto it = s.inputs.find(std::string(name));
  if (it == s.inputs.end()) {
    throw Error(ErrorCode::kInvalidParams, fmt::format("scenario {} lacks input {}", s.name, name));
  }
  return it->second;
}

Decimal to_decimal(const json& v, const std::string& what) {
  if (v.is_number_integer()) return Decimal::from_int(v.get<std::int64_t>());
  if (v.is_number()) return Decimal::from_double(v.get<double>());
  if (v.is_string()) {
    try {
      return Decimal::parse(v.get<std::string>());
    } catch (const Error&) {
    }
  }
  throw Error(ErrorCode::kConfigError, what + " must be a number");
}

template <typename E>
E enum_from(const json& j, const char* key, std::initializer_list<E> values) {
  if (!j.contains(key) || !j[key].is_string()) throw Error(ErrorCode::kConfigError, fmt::format("{} must be a string", key));
  auto s = j[key].get<std::string>();
  for (auto v : values) {
    if (to_string(v) == s) return v;
  }
  throw Error(ErrorCode::kConfigError, fmt::format("unknown {} {}", key, s));
}

}  // namespace

std::string_view to_string(Category c) {
  switch (c) {
    case Category::kCostSavings: return "cost_savings";
    case Category::kTimeSavings: return "time_savings";
    case Category::kRevenueGrowth: return "revenue_growth";
  }
  return "?";
}

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::kIntake: return "intake";
    case Stage::kImplementation: return "implementation";
    case Stage::kMonitoring: return "monitoring";
  }
  return "?";
}

Decimal time_savings(Decimal users, Decimal queries_per_day, Decimal minutes_per_query, Decimal hourly_rate,
                     Decimal days_per_year) {
  require_non_negative({{"users", users},
                        {"queries_per_day", queries_per_day},
                        {"minutes_per_query", minutes_per_query},
                        {"hourly_rate", hourly_rate},
                        {"days_per_year", days_per_year}});
  return users * queries_per_day * minutes_per_query * hourly_rate * days_per_year / kSixty;
}

Decimal chart_review_savings(Decimal charts_before, Decimal charts_after, Decimal minutes_per_chart) {
  if (charts_before < Decimal{} || charts_after < Decimal{} || minutes_per_chart < Decimal{}) {
    throw Error(ErrorCode::kInvalidCounts, "chart counts and minutes must be non-negative");
  }
  if (charts_after > charts_before) {
    throw Error(ErrorCode::kInvalidCounts, fmt::format("charts_after {} exceeds charts_before {}",
                                                       charts_after.to_canonical(), charts_before.to_canonical()));
  }
  return (charts_before - charts_after) * minutes_per_chart / kSixty;
}

Decimal bed_day_revenue(Decimal beds_per_day, Decimal revenue_per_bed_day, Decimal days_per_year) {
  require_non_negative({{"beds_per_day", beds_per_day},
                        {"revenue_per_bed_day", revenue_per_bed_day},
                        {"days_per_year", days_per_year}});
  return beds_per_day * revenue_per_bed_day * days_per_year;
}

const std::vector<FormulaInfo>& formulas() {
  static const std::vector<FormulaInfo> kFormulas = {
      {"time_savings",
       {"users", "queries_per_day", "minutes_per_query", "hourly_rate", "days_per_year"},
       "users * queries_per_day * minutes_per_query / 60 * hourly_rate * days_per_year",
       true},
      {"chart_review",
       {"charts_before", "charts_after", "minutes_per_chart", "hourly_rate", "days_per_year"},
       "(charts_before - charts_after) * minutes_per_chart / 60 * hourly_rate * days_per_year",
       true},
      {"bed_day_revenue",
       {"beds_per_day", "revenue_per_bed_day", "days_per_year"},
       "beds_per_day * revenue_per_bed_day * days_per_year",
       true},
      {"flat_saving", {"amount"}, "amount", false},
  };
  return kFormulas;
}

void ValueScenario::validate() const {
  const Decimal zero{}, one = Decimal::from_int(1);
  for (auto [label, a] : {std::pair{"first_year_adoption", first_year_adoption},
                          std::pair{"steady_state_adoption", steady_state_adoption}}) {
    if (a <= zero || a > one) {
      throw Error(ErrorCode::kInvalidParams, fmt::format("{} {} outside (0, 1]", label, a.to_canonical()));
    }
  }
  if (first_year_adoption > steady_state_adoption) {
    throw Error(ErrorCode::kInvalidParams, "first_year_adoption exceeds steady_state_adoption");
  }
}

ValueScenario parse_scenario(std::string_view json_text) {
  json j = json::parse(json_text.begin(), json_text.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::kConfigError, "scenario is not a JSON object");
  ValueScenario s;
  auto get_str = [&](const char* key, bool required) -> std::string {
    if (!j.contains(key)) {
      if (required) throw Error(ErrorCode::kConfigError, fmt::format("scenario lacks {}", key));
      return {};
    }
    if (!j[key].is_string()) throw Error(ErrorCode::kConfigError, fmt::format("{} must be a string", key));
    return j[key].get<std::string>();
  };
  s.name = get_str("name", true);
  s.automation = get_str("automation", false);
  s.formula = get_str("formula", true);
  s.category = enum_from(j, "category", {Category::kCostSavings, Category::kTimeSavings, Category::kRevenueGrowth});
  s.stage = enum_from(j, "stage", {Stage::kIntake, Stage::kImplementation, Stage::kMonitoring});
  if (!j.contains("inputs") || !j["inputs"].is_object()) throw Error(ErrorCode::kConfigError, "inputs must be an object");
  for (const auto& [k, v] : j["inputs"].items()) s.inputs[k] = to_decimal(v, "input " + k);
  if (j.contains("first_year_adoption")) s.first_year_adoption = to_decimal(j["first_year_adoption"], "first_year_adoption");
  if (j.contains("steady_state_adoption")) s.steady_state_adoption = to_decimal(j["steady_state_adoption"], "steady_state_adoption");
  if (j.contains("notes")) {
    if (!j["notes"].is_array()) throw Error(ErrorCode::kConfigError, "notes must be a list");
    for (const auto& n : j["notes"]) {
      if (!n.is_string()) throw Error(ErrorCode::kConfigError, "notes must be strings");
      s.notes.push_back(n.get<std::string>());
    }
  }
  return s;
}

ValueScenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_scenario(ss.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.filename().string() + ": " + e.detail());
  }
}

Projection project(const ValueScenario& s) {
  s.validate();
  const FormulaInfo* info = nullptr;
  for (const auto& f : formulas()) {
    if (f.name == s.formula) info = &f;
  }
  if (!info) throw Error(ErrorCode::kUnknownFormula, fmt::format("scenario {} uses unknown formula {}", s.name, s.formula));
  for (const auto& [k, _] : s.inputs) {
    if (std::find(info->inputs.begin(), info->inputs.end(), k) == info->inputs.end()) {
      throw Error(ErrorCode::kInvalidParams, fmt::format("input {} is not used by formula {}", k, s.formula));
    }
  }

  Projection p;
  p.scenario = s.name;
  p.formula = s.formula;
  if (s.formula == "time_savings") {
    auto users = input(s, "users"), qpd = input(s, "queries_per_day"), mins = input(s, "minutes_per_query");
    p.annual_value = time_savings(users, qpd, mins, input(s, "hourly_rate"), input(s, "days_per_year"));
    p.hours_per_day = users * qpd * mins / kSixty;
  } else if (s.formula == "chart_review") {
    auto before = input(s, "charts_before"), after = input(s, "charts_after"), mins = input(s, "minutes_per_chart");
    p.hours_per_day = chart_review_savings(before, after, mins);
    auto rate = input(s, "hourly_rate"), days = input(s, "days_per_year");
    require_non_negative({{"hourly_rate", rate}, {"days_per_year", days}});
    p.annual_value = (before - after) * mins * rate * days / kSixty;
  } else if (s.formula == "bed_day_revenue") {
    p.annual_value = bed_day_revenue(input(s, "beds_per_day"), input(s, "revenue_per_bed_day"), input(s, "days_per_year"));
  } else {
    p.annual_value = input(s, "amount");
    require_non_negative({{"amount", p.annual_value}});
  }

  if (info->scales_with_adoption) {
    p.first_year = p.annual_value * s.first_year_adoption;
    p.steady_state = p.annual_value * s.steady_state_adoption;
  } else {
    p.first_year = p.steady_state = p.annual_value;
  }

  p.assumptions.push_back(fmt::format("category: {}; stage: {}", to_string(s.category), to_string(s.stage)));
  p.assumptions.push_back(fmt::format("formula: {}", info->expression));
  for (auto name : info->inputs) p.assumptions.push_back(fmt::format("{} = {}", name, input(s, name).to_canonical()));
  if (info->scales_with_adoption) {
    p.assumptions.push_back(fmt::format("first-year adoption = {}", s.first_year_adoption.to_canonical()));
    p.assumptions.push_back(fmt::format("steady-state adoption = {}", s.steady_state_adoption.to_canonical()));
  } else {
    p.assumptions.push_back("fixed amount, independent of adoption");
  }
  if (s.category == Category::kTimeSavings) {
    p.assumptions.push_back("soft savings: hours are redeployed to other work, valued without a discount");
  }
  for (const auto& n : s.notes) p.assumptions.push_back(n);
  return p;
}

std::string format_currency(Decimal v) {
  if (v < Decimal{}) return "-$" + (-v).to_grouped(2);
  return "$" + v.to_grouped(2);
}

std::string format_compact(Decimal v, int significant) {
  if (significant < 1) throw Error(ErrorCode::kInvalidParams, "significant figures must be positive");
  if (v < Decimal{}) return "-" + format_compact(-v, significant);
  struct Unit {
    std::int64_t divisor;
    const char* suffix;
  };
  static constexpr Unit kUnits[] = {{1'000'000'000, "B"}, {1'000'000, "M"}, {1'000, "K"}, {1, ""}};
  for (std::size_t u = 0; u < std::size(kUnits); ++u) {
    Decimal div = Decimal::from_int(kUnits[u].divisor);
    if (v < div && kUnits[u].divisor != 1) continue;
    Decimal scaled = v / div;
    int digits = 1;
    for (std::int64_t x = scaled.raw() / Decimal::kOne; x >= 10; x /= 10) ++digits;
    int places = kUnits[u].divisor == 1 ? 0 : std::max(0, significant - digits);
    Decimal rounded = scaled.round_to(places);
    if (u > 0 && rounded >= Decimal::from_int(1000)) {
      // Rounding carried into the next unit (e.g. 999,999 -> 1.0M).
      return format_compact(Decimal::from_int(kUnits[u - 1].divisor), significant);
    }
    return fmt::format("${}{}", rounded.to_string(places), kUnits[u].suffix);
  }
  return "$0";
}

std::string projection_to_json(const Projection& p) {
  nlohmann::ordered_json j;
  j["scenario"] = p.scenario;
  j["formula"] = p.formula;
  j["annual_value"] = p.annual_value.to_string(2);
  j["first_year"] = p.first_year.to_string(2);
  j["steady_state"] = p.steady_state.to_string(2);
  j["hours_per_day"] = p.hours_per_day ? nlohmann::ordered_json(p.hours_per_day->to_string(2)) : nlohmann::ordered_json(nullptr);
  j["assumptions"] = p.assumptions;
  return j.dump(2) + "\n";
}

std::string render_projection(const Projection& p, std::string_view stage) {
  std::string out = fmt::format("{} ({})\n", p.scenario, p.formula);
  if (p.hours_per_day) out += fmt::format("  hours saved per day: {}\n", p.hours_per_day->to_string(2));
  if (stage == "first_year" || stage == "both") {
    out += fmt::format("  first year:   {} ({})\n", format_currency(p.first_year), format_compact(p.first_year));
  }
  if (stage == "steady_state" || stage == "both") {
    out += fmt::format("  steady state: {} ({})\n", format_currency(p.steady_state), format_compact(p.steady_state));
  }
  out += "  assumptions:\n";
  for (const auto& a : p.assumptions) out += "    - " + a + "\n";
  return out;
}

}  // namespace clinctx::value
