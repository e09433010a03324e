#include "certattack/report.hpp"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "certattack/tensor_io.hpp"

namespace certattack {

namespace {

using nlohmann::json;

// NaN has no JSON spelling; absent values become null.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json vector_json(const Vec& v) {
  json out = json::array();
  for (double x : v) out.push_back(number(x));
  return out;
}

json ledger_json(const ConfidenceLedger& ledger) {
  return json{{"alpha", ledger.alpha},
              {"n_m", ledger.n_m},
              {"cdf_samples", ledger.cdf_samples},
              {"cdf_error", ledger.cdf_error},
              {"factors", ledger.factors},
              {"confidence", ledger.product()}};
}

json step_json(const ShiftStep& s) {
  return json{{"direction", vector_json(s.direction)},
              {"delta", vector_json(s.delta)},
              {"pre_p_lower", s.pre_p_lower},
              {"post_p_lower", s.post_p_lower},
              {"certified_bound", s.certified_bound},
              {"certified", s.certified},
              {"toward_clean", s.toward_clean}};
}

std::string status(const AttackEntry& e) { return e.certified ? "certified" : "abstain"; }

}  // namespace

std::string metrics_csv(const BatchResult& batch) {
  std::ostringstream out;
  out << "index,status,mean_dist_l2,dist_l2,rpq_count,query_count\n";
  for (std::size_t i = 0; i < batch.entries.size(); ++i) {
    const auto& e = batch.entries[i];
    out << i << ',' << status(e) << ',' << format_double(e.mean_dist_l2) << ','
        << format_double(e.dist_l2) << ',' << e.rpq_count << ',' << e.query_count << '\n';
  }
  return out.str();
}

std::string report_json(const BatchResult& batch) {
  const ReportAggregates& a = batch.aggregates;
  json report;
  report["schema_version"] = 1;
  report["config"] = serialize_config(batch.config);
  report["model"] = batch.model_text;
  report["conventions"] = {
      {"sample_clipping", "noisy samples are clipped to the input box before querying"},
      {"mean_clipping", "distribution means are not clipped"},
      {"noise_scale", "gaussian a is the standard deviation"}};
  report["aggregates"] = {{"inputs", a.inputs},
                          {"certified", a.certified},
                          {"certified_accuracy", a.certified_accuracy},
                          {"mean_dist_l2", number(a.mean_dist_l2)},
                          {"dist_l2", number(a.dist_l2)},
                          {"rpq_count", a.rpq_count},
                          {"query_count", a.query_count}};
  json entries = json::array();
  for (std::size_t i = 0; i < batch.entries.size(); ++i) {
    const auto& e = batch.entries[i];
    json entry{{"index", i},
               {"status", status(e)},
               {"label", e.label},
               {"clean", vector_json(e.clean)},
               {"dist_l2", number(e.dist_l2)},
               {"mean_dist_l2", number(e.mean_dist_l2)},
               {"rpq_count", e.rpq_count},
               {"localization_rpq", e.localization_rpq},
               {"query_count", e.query_count},
               {"samples_per_rpq", e.samples_per_rpq},
               {"rpq_p_lower", e.rpq_p_lower},
               {"shift_steps", e.steps.size()},
               {"stop_reason", e.stop_reason},
               {"detections", i < batch.detections.size() ? batch.detections[i] : 0}};
    if (e.distribution) {
      const auto& d = *e.distribution;
      entry["mean"] = vector_json(d.mean());
      entry["noise"] = {{"family", to_string(d.spec().family)},
                        {"a", d.spec().a},
                        {"b", d.spec().b},
                        {"dim", d.spec().dim}};
      entry["p"] = d.p();
      entry["certified_bound"] = d.p_lower();
      entry["ledger"] = ledger_json(d.ledger());
    }
    entries.push_back(std::move(entry));
  }
  report["entries"] = std::move(entries);
  return report.dump(2) + "\n";
}

std::string transcript_json(const AttackEntry& entry, std::size_t index) {
  json steps = json::array();
  for (const auto& s : entry.steps) steps.push_back(step_json(s));
  json out{{"index", index},
           {"status", status(entry)},
           {"localization_rpq", entry.localization_rpq},
           {"stop_reason", entry.stop_reason},
           {"steps", std::move(steps)}};
  return out.dump(2) + "\n";
}

}  // namespace certattack
