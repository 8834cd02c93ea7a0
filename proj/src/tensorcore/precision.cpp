#include "dghif/tensorcore/precision.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#include "dghif/common/errors.hpp"

namespace dghif::tc {

namespace {
std::atomic<Precision> g_precision{Precision::f64};
}

Precision precision() noexcept { return g_precision.load(std::memory_order_relaxed); }

void set_precision(Precision p) noexcept { g_precision.store(p, std::memory_order_relaxed); }

Precision parse_precision(std::string_view text) {
  if (text == "f32") return Precision::f32;
  if (text == "f64") return Precision::f64;
  throw ConfigError("precision must be f32 or f64, got '" + std::string(text) + "'");
}

std::string_view to_string(Precision p) noexcept { return p == Precision::f32 ? "f32" : "f64"; }

Precision precision_from_env(Precision fallback) {
  const char* env = std::getenv("DGHIF_PRECISION");
  if (env == nullptr || *env == '\0') return fallback;
  return parse_precision(env);
}

void quantize(std::span<double> values) noexcept {
  if (precision() != Precision::f32) return;
  for (double& v : values) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace dghif::tc
