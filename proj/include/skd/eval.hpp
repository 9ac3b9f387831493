#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "skd/lattice.hpp"

namespace skd {

struct EntitySpan {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  std::string label;
  bool operator==(const EntitySpan&) const = default;
};

// conlleval chunking of a BIO tag sequence: B-X opens a span, I-X extends a
// span of the same type, and an I-X after O or another type opens a new one.
// Throws InvalidInput on a tag that is neither O nor B-/I- prefixed.
std::vector<EntitySpan> extract_spans(const std::vector<std::string>& tags);

struct Prf1 {
  double precision = 0.0;  // percent
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t correct = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
};

using TagNameSequence = std::vector<std::string>;

// Span-level precision, recall and F1 in percent. A predicted span counts
// only if start, end and label all match a gold span.
Prf1 prf1(const std::vector<TagNameSequence>& gold, const std::vector<TagNameSequence>& pred);

// Percentage of positions where the tags agree.
double token_accuracy(const std::vector<TagSequence>& gold, const std::vector<TagSequence>& pred);
double token_accuracy(const std::vector<TagNameSequence>& gold, const std::vector<TagNameSequence>& pred);

struct Metrics {
  double token_accuracy = 0.0;
  bool has_spans = false;
  Prf1 spans;
};

// Human-readable table, values to two decimals.
std::string format_metrics_table(const Metrics& m);
// One "key=value" line per metric.
std::string format_metrics_kv(const Metrics& m);

}  // namespace skd
