#include "bpe/io.hpp"

#include <cmath>
#include <cstdio>

namespace bpe {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_experiment_csv(std::ostream& os, const std::vector<ExperimentRow>& rows) {
  os << kExperimentCsvHeader << '\n';
  for (const auto& r : rows) {
    const auto& e = r.estimate;
    os << format_double(r.param) << ',' << format_double(e.point) << ',' << format_double(e.stderr_) << ','
       << format_double(e.ci_low) << ',' << format_double(e.ci_high) << ',' << e.trials << ',' << e.censored << ','
       << format_double(r.reference) << '\n';
  }
}

std::string config_hash(const nlohmann::json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json make_manifest(const std::string& command, const nlohmann::json& config, std::uint64_t seed,
                             double wall_time_seconds) {
  return {{"command", command},
          {"config_hash", config_hash(config)},
          {"seed", seed},
          {"wall_time", wall_time_seconds},
          {"tool_version", kToolVersion},
          {"config", config}};
}

}  // namespace bpe
