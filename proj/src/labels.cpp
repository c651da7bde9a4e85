#include "clifs/labels.hpp"

#include <string>

#include "clifs/errors.hpp"

namespace clifs {

std::string_view to_string(FusionLabel l) {
    switch (l) {
        case FusionLabel::low: return "low";
        case FusionLabel::medium: return "medium";
        case FusionLabel::high: return "high";
    }
    return "?";
}

std::string_view to_string(RiskLabel l) {
    switch (l) {
        case RiskLabel::violent_self_sacrificial: return "violent_self_sacrificial";
        case RiskLabel::ideologically_extreme: return "ideologically_extreme";
        case RiskLabel::moderate: return "moderate";
    }
    return "?";
}

std::optional<FusionLabel> parse_fusion_label(std::string_view s) {
    for (auto l : kFusionLabels)
        if (to_string(l) == s) return l;
    return std::nullopt;
}

std::optional<RiskLabel> parse_risk_label(std::string_view s) {
    for (auto l : kRiskLabels)
        if (to_string(l) == s) return l;
    return std::nullopt;
}

FusionLabel fusion_label_from_index(int i) {
    if (i < 0 || i >= static_cast<int>(kNumClasses))
        throw UsageError("fusion label index out of range: " + std::to_string(i));
    return static_cast<FusionLabel>(i);
}

RiskLabel risk_label_from_index(int i) {
    if (i < 0 || i >= static_cast<int>(kNumClasses))
        throw UsageError("risk label index out of range: " + std::to_string(i));
    return static_cast<RiskLabel>(i);
}

}  // namespace clifs
