#include "pathfinder/diagnosis_class.hpp"

namespace pathfinder {

std::string_view roman(DiagnosisClass c) {
  switch (c) {
    case DiagnosisClass::I: return "I";
    case DiagnosisClass::II: return "II";
    case DiagnosisClass::III: return "III";
    case DiagnosisClass::IV: return "IV";
  }
  return "?";
}

std::optional<DiagnosisClass> class_from_roman(std::string_view s) {
  for (auto c : kAllClasses) {
    if (roman(c) == s) return c;
  }
  return std::nullopt;
}

std::string_view display_name(DiagnosisClass c) {
  switch (c) {
    case DiagnosisClass::I: return "mildly dysplastic nevi, moderately dysplastic nevi";
    case DiagnosisClass::II: return "melanoma in situ and severely dysplastic nevi";
    case DiagnosisClass::III: return "invasive melanoma stage pT1a";
    case DiagnosisClass::IV: return "advanced invasive melanoma stage ≥ pT1b";
  }
  return "?";
}

std::string option_text(DiagnosisClass c) {
  std::string s = "diagnosis: (";
  s += roman(c);
  s += ") ";
  s += display_name(c);
  return s;
}

std::optional<DiagnosisClass> class_from_option_text(std::string_view answer) {
  const auto first = answer.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return std::nullopt;
  const auto last = answer.find_last_not_of(" \t\r\n");
  answer = answer.substr(first, last - first + 1);
  if (answer.size() >= 2 && answer.front() == '"' && answer.back() == '"') {
    answer = answer.substr(1, answer.size() - 2);
  }
  for (auto c : kAllClasses) {
    if (option_text(c) == answer) return c;
  }
  return std::nullopt;
}

}  // namespace pathfinder
