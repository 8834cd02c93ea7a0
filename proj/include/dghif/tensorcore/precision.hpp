#pragma once

#include <span>
#include <string_view>

namespace dghif::tc {

/// Storage precision for tensor values. Values are held as doubles; in f32
/// mode every op result and parameter update is rounded to single precision.
enum class Precision { f32, f64 };

Precision precision() noexcept;
void set_precision(Precision p) noexcept;

/// Parses "f32"/"f64"; throws ConfigError otherwise.
Precision parse_precision(std::string_view text);
std::string_view to_string(Precision p) noexcept;

/// Reads DGHIF_PRECISION; returns `fallback` when unset.
Precision precision_from_env(Precision fallback = Precision::f32);

inline double quantize(double x) noexcept {
  return precision() == Precision::f32 ? static_cast<double>(static_cast<float>(x)) : x;
}

void quantize(std::span<double> values) noexcept;

/// Restores the previous precision on scope exit.
class PrecisionScope {
 public:
  explicit PrecisionScope(Precision p) noexcept : saved_(precision()) { set_precision(p); }
  ~PrecisionScope() { set_precision(saved_); }
  PrecisionScope(const PrecisionScope&) = delete;
  PrecisionScope& operator=(const PrecisionScope&) = delete;

 private:
  Precision saved_;
};

}  // namespace dghif::tc
