#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace clifs {

enum class FusionLabel : int { low = 0, medium = 1, high = 2 };

enum class RiskLabel : int {
    violent_self_sacrificial = 0,
    ideologically_extreme = 1,
    moderate = 2,
};

inline constexpr std::size_t kNumClasses = 3;

inline constexpr std::array<FusionLabel, kNumClasses> kFusionLabels{
    FusionLabel::low, FusionLabel::medium, FusionLabel::high};

inline constexpr std::array<RiskLabel, kNumClasses> kRiskLabels{
    RiskLabel::violent_self_sacrificial, RiskLabel::ideologically_extreme,
    RiskLabel::moderate};

constexpr int to_index(FusionLabel l) { return static_cast<int>(l); }
constexpr int to_index(RiskLabel l) { return static_cast<int>(l); }

std::string_view to_string(FusionLabel l);
std::string_view to_string(RiskLabel l);

// Both parsers accept exact lowercase names only; anything else is nullopt.
std::optional<FusionLabel> parse_fusion_label(std::string_view s);
std::optional<RiskLabel> parse_risk_label(std::string_view s);

// Throws UsageError for indices outside [0, 3).
FusionLabel fusion_label_from_index(int i);
RiskLabel risk_label_from_index(int i);

}  // namespace clifs
