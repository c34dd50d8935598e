#pragma once

#include <array>
#include <string>
#include <string_view>

namespace dtnarrate {

// The five patient scenarios every participant sees.
enum class Scenario { kLocalShap, kLocalEasy, kLocalHard, kGlobalEasy, kGlobalHard };

inline constexpr std::array<Scenario, 5> kAllScenarios = {
    Scenario::kLocalShap, Scenario::kLocalEasy, Scenario::kLocalHard,
    Scenario::kGlobalEasy, Scenario::kGlobalHard};

// Wire id: "local-SHAP", "local-easy", ...
std::string_view scenario_id(Scenario s);
// Table heading: "Local SHAP", "Local Easy", ...
std::string_view scenario_title(Scenario s);
Scenario parse_scenario(std::string_view id);

}  // namespace dtnarrate
