#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace pathfinder {

/// Ordered by severity.
enum class DiagnosisClass { I = 1, II = 2, III = 3, IV = 4 };

inline constexpr std::array<DiagnosisClass, 4> kAllClasses{
    DiagnosisClass::I, DiagnosisClass::II, DiagnosisClass::III,
    DiagnosisClass::IV};

/// "I", "II", "III", "IV".
std::string_view roman(DiagnosisClass c);
std::optional<DiagnosisClass> class_from_roman(std::string_view s);
std::string_view display_name(DiagnosisClass c);
/// Full answer text the diagnoser is asked to emit, e.g.
/// "diagnosis: (III) invasive melanoma stage pT1a".
std::string option_text(DiagnosisClass c);
/// Maps a backend answer back to a class: whitespace and one layer of
/// surrounding double quotes are ignored; everything else must match.
std::optional<DiagnosisClass> class_from_option_text(std::string_view answer);

inline int index_of(DiagnosisClass c) { return static_cast<int>(c) - 1; }

}  // namespace pathfinder
