#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "certattack/config.hpp"
#include "certattack/pipeline.hpp"

namespace certattack {

/// Everything one batch run produced, in dataset order.
struct BatchResult {
  RunConfig config;
  std::string model_text;
  std::vector<AttackEntry> entries;
  std::vector<std::size_t> detections;  // detector hits per input (0 without a detector)
  ReportAggregates aggregates;
};

/// metrics.csv: `index,status,mean_dist_l2,dist_l2,rpq_count,query_count`.
std::string metrics_csv(const BatchResult& batch);

std::string report_json(const BatchResult& batch);

/// Per-input step log.
std::string transcript_json(const AttackEntry& entry, std::size_t index);

}  // namespace certattack
