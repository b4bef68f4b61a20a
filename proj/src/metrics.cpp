#include "gatnet/metrics.hpp"

#include <cmath>

#include <json.hpp>

namespace gatnet {

MetricReport aggregate_runs(const std::string& metric, const std::vector<double>& per_run) {
  if (per_run.empty()) throw ValidationError("aggregate_runs: no runs");
  MetricReport r;
  r.metric = metric;
  r.per_run = per_run;
  r.count = uint32_t(per_run.size());
  double sum = 0.0;
  for (double v : per_run) sum += v;
  r.mean = sum / double(per_run.size());
  r.value = r.mean;
  if (per_run.size() > 1) {
    double ss = 0.0;
    for (double v : per_run) ss += (v - r.mean) * (v - r.mean);
    r.stddev = std::sqrt(ss / double(per_run.size() - 1));
  }
  return r;
}

std::string metric_report_json(const MetricReport& r) {
  nlohmann::json j;
  j["metric"] = r.metric;
  j["mean"] = r.per_run.empty() ? r.value : r.mean;
  j["std"] = r.stddev;
  j["runs"] = r.per_run.empty() ? 1u : uint32_t(r.per_run.size());
  j["per_run"] = r.per_run.empty() ? std::vector<double>{r.value} : r.per_run;
  return j.dump(2);
}

}  // namespace gatnet
