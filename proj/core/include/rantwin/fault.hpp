#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace rantwin {

// Codes are part of the dataset and message formats; never renumber.
enum class AnomalyClass : int {
  Normal = 0,
  RsrpError = 1,
  RsrqError = 2,
  SinrError = 3,
};

inline constexpr int kNumClasses = 4;

inline constexpr std::array<AnomalyClass, kNumClasses> kAllClasses = {
    AnomalyClass::Normal, AnomalyClass::RsrpError, AnomalyClass::RsrqError, AnomalyClass::SinrError};

constexpr int code(AnomalyClass c) { return static_cast<int>(c); }

// Throws DomainError for codes outside 0..3.
AnomalyClass class_from_code(long long code);

std::string_view class_name(AnomalyClass c);
// Accepts the names produced by class_name and their snake_case keys
// ("rsrp_error"); returns nullopt otherwise.
std::optional<AnomalyClass> class_from_name(std::string_view name);
std::string_view class_key(AnomalyClass c);

// A corruption pattern applied to one UE's measurement reports.
struct FaultSpec {
  AnomalyClass cls = AnomalyClass::RsrpError;
  double offset_db = 0.0;
  double jitter_db = 0.0;
  int duration_ticks = 1;

  // Throws DomainError: Normal class, negative jitter, non-positive duration.
  void validate() const;

  friend bool operator==(const FaultSpec&, const FaultSpec&) = default;
};

// RSRP -20 +/- 3 dB, RSRQ -10 +/- 2 dB, SINR -15 +/- 3 dB, 50 ticks each.
FaultSpec default_fault(AnomalyClass cls);

}  // namespace rantwin
