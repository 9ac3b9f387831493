#include "skd/eval.hpp"

#include <fmt/format.h>

#include "skd/error.hpp"

namespace skd {

namespace {

struct ParsedTag {
  char prefix;  // 'O', 'B' or 'I'
  std::string type;
};

ParsedTag parse_tag(const std::string& tag) {
  if (tag == "O") return {'O', ""};
  if (tag.size() >= 3 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') return {tag[0], tag.substr(2)};
  throw InvalidInput("malformed BIO tag '" + tag + "'");
}

}  // namespace

std::vector<EntitySpan> extract_spans(const std::vector<std::string>& tags) {
  std::vector<EntitySpan> spans;
  bool open = false;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const ParsedTag t = parse_tag(tags[i]);
    const bool continues = open && t.prefix == 'I' && spans.back().label == t.type;
    if (continues) {
      spans.back().end = i + 1;
      continue;
    }
    open = false;
    if (t.prefix != 'O') {
      spans.push_back({i, i + 1, t.type});
      open = true;
    }
  }
  return spans;
}

Prf1 prf1(const std::vector<TagNameSequence>& gold, const std::vector<TagNameSequence>& pred) {
  if (gold.size() != pred.size()) throw InvalidInput("gold and predicted sentence counts differ");
  Prf1 out;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (gold[s].size() != pred[s].size()) throw InvalidInput("gold and predicted sentence lengths differ");
    const auto g = extract_spans(gold[s]);
    const auto p = extract_spans(pred[s]);
    out.gold += g.size();
    out.predicted += p.size();
    for (const auto& span : p) {
      for (const auto& ref : g) {
        if (span == ref) {
          ++out.correct;
          break;
        }
      }
    }
  }
  out.precision = out.predicted == 0 ? 0.0 : 100.0 * static_cast<double>(out.correct) / static_cast<double>(out.predicted);
  out.recall = out.gold == 0 ? 0.0 : 100.0 * static_cast<double>(out.correct) / static_cast<double>(out.gold);
  out.f1 = out.precision + out.recall == 0.0 ? 0.0 : 2.0 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

namespace {

template <class Seq>
double accuracy_impl(const std::vector<Seq>& gold, const std::vector<Seq>& pred) {
  if (gold.size() != pred.size()) throw InvalidInput("gold and predicted sentence counts differ");
  std::size_t total = 0, match = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (gold[s].size() != pred[s].size()) throw InvalidInput("gold and predicted sentence lengths differ");
    for (std::size_t i = 0; i < gold[s].size(); ++i) match += gold[s][i] == pred[s][i];
    total += gold[s].size();
  }
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(match) / static_cast<double>(total);
}

}  // namespace

double token_accuracy(const std::vector<TagSequence>& gold, const std::vector<TagSequence>& pred) {
  return accuracy_impl(gold, pred);
}

double token_accuracy(const std::vector<TagNameSequence>& gold, const std::vector<TagNameSequence>& pred) {
  return accuracy_impl(gold, pred);
}

std::string format_metrics_table(const Metrics& m) {
  std::string out = fmt::format("{:<16}{:>10}\n", "metric", "value");
  out += fmt::format("{:<16}{:>10.2f}\n", "accuracy", m.token_accuracy);
  if (m.has_spans) {
    out += fmt::format("{:<16}{:>10.2f}\n", "precision", m.spans.precision);
    out += fmt::format("{:<16}{:>10.2f}\n", "recall", m.spans.recall);
    out += fmt::format("{:<16}{:>10.2f}\n", "f1", m.spans.f1);
  }
  return out;
}

std::string format_metrics_kv(const Metrics& m) {
  std::string out = fmt::format("accuracy={:.2f}\n", m.token_accuracy);
  if (m.has_spans) {
    out += fmt::format("precision={:.2f}\nrecall={:.2f}\nf1={:.2f}\n", m.spans.precision, m.spans.recall, m.spans.f1);
    out += fmt::format("correct={}\npredicted={}\ngold={}\n", m.spans.correct, m.spans.predicted, m.spans.gold);
  }
  return out;
}

}  // namespace skd
