// SPDX-License-Identifier: Apache-2.0
#include "chexpo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "chexpo/error.hpp"
#include "chexpo/numeric.hpp"
#include "chexpo/text.hpp"

namespace chexpo::metrics {

double strict_accuracy(const std::vector<AnswerItem>& items) {
  if (items.empty()) throw_data("empty-input", "no items to score");
  std::size_t correct = 0;
  for (const auto& item : items) correct += answer_matches(item.predicted, item.gold) ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(items.size());
}

std::set<std::string> answer_set(const std::vector<std::string>& answers) {
  std::set<std::string> out;
  for (const auto& a : answers) out.insert(normalize_text(a));
  return out;
}

std::set<std::string> answer_set(std::string_view predicted) {
  std::set<std::string> out;
  for (auto& part : split_on(normalize_text(predicted), " and ")) {
    if (!part.empty()) out.insert(std::move(part));
  }
  return out;
}

PrecisionRecall micro_f1(const std::vector<AnswerSets>& items) {
  if (items.empty()) throw_data("empty-input", "no items to score");
  PrecisionRecall r;
  for (const auto& item : items) {
    for (const auto& p : item.predicted) {
      if (item.gold.count(p)) ++r.tp;
      else ++r.fp;
    }
    for (const auto& g : item.gold) {
      if (!item.predicted.count(g)) ++r.fn;
    }
  }
  auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  r.precision = ratio(r.tp, r.tp + r.fp);
  r.recall = ratio(r.tp, r.tp + r.fn);
  r.f1 = (r.precision + r.recall) == 0.0
             ? 0.0
             : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

std::vector<std::string> bleu_tokens(std::string_view text) {
  return split_whitespace(normalize_text(text));
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const std::vector<std::string>& tokens, std::size_t k) {
  NgramCounts counts;
  if (tokens.size() < k) return counts;
  for (std::size_t i = 0; i + k <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + k)];
  }
  return counts;
}

}  // namespace

double bleu_n(const std::vector<std::string>& prediction,
              const std::vector<std::vector<std::string>>& references, int n) {
  if (n < 1 || n > 4) throw_data("invalid-order", "BLEU order must be 1..4");
  if (prediction.empty()) throw_data("empty-prediction");
  if (references.empty()) throw_data("empty-references");

  double log_sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    const auto pred_counts = count_ngrams(prediction, static_cast<std::size_t>(k));
    std::size_t total = 0;
    std::size_t clipped = 0;
    std::vector<NgramCounts> ref_counts;
    ref_counts.reserve(references.size());
    for (const auto& ref : references) ref_counts.push_back(count_ngrams(ref, static_cast<std::size_t>(k)));
    for (const auto& [gram, count] : pred_counts) {
      std::size_t max_ref = 0;
      for (const auto& rc : ref_counts) {
        if (const auto it = rc.find(gram); it != rc.end()) max_ref = std::max(max_ref, it->second);
      }
      clipped += std::min(count, max_ref);
      total += count;
    }
    if (clipped == 0 || total == 0) return 0.0;
    log_sum += std::log(static_cast<double>(clipped) / static_cast<double>(total));
  }

  const double c = static_cast<double>(prediction.size());
  std::size_t closest = references.front().size();
  for (const auto& ref : references) {
    const auto d = [&](std::size_t len) { return std::fabs(static_cast<double>(len) - c); };
    if (d(ref.size()) < d(closest) || (d(ref.size()) == d(closest) && ref.size() < closest)) {
      closest = ref.size();
    }
  }
  const double bp = std::exp(std::min(0.0, 1.0 - static_cast<double>(closest) / c));
  return bp * std::exp(log_sum / n);
}

WinRate win_rate(const std::vector<bool>& a, const std::vector<bool>& b) {
  if (a.size() != b.size()) {
    throw_data("length-mismatch", std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  WinRate w;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] && !b[i]) ++w.a_wins;
    else if (!a[i] && b[i]) ++w.b_wins;
    else ++w.ties;
  }
  const std::size_t decisive = w.a_wins + w.b_wins;
  w.decisive = decisive == 0 ? 0.5 : static_cast<double>(w.a_wins) / static_cast<double>(decisive);
  w.raw = a.empty() ? 0.0 : static_cast<double>(w.a_wins) / static_cast<double>(a.size());
  return w;
}

double ErrorDistribution::combined_share(std::initializer_list<QuestionType> types) const {
  double s = 0.0;
  for (QuestionType q : types) {
    if (const auto it = by_type.find(q); it != by_type.end()) s += it->second.fail_share;
  }
  return s;
}

ErrorDistribution error_distribution(const std::vector<TriagedItem>& items) {
  ErrorDistribution d;
  std::map<QuestionType, CompensatedSum> logprob_sums;
  for (const auto& item : items) {
    auto& stats = d.by_type[item.question_type];
    ++stats.items;
    logprob_sums[item.question_type] += item.logprob;
    if (item.triage_class == TriageClass::Fail) {
      ++stats.fails;
      ++d.total_fails;
    }
  }
  for (auto& [type, stats] : d.by_type) {
    stats.mean_logprob = logprob_sums[type].value() / static_cast<double>(stats.items);
    stats.fail_share = d.total_fails == 0
                           ? 0.0
                           : static_cast<double>(stats.fails) / static_cast<double>(d.total_fails);
  }
  return d;
}

EvalReport evaluate(const SampleSet& samples, const std::vector<PredictionRecord>& predictions,
                    bool with_bleu, const std::vector<PredictionRecord>* baseline) {
  EvalReport report;
  std::vector<AnswerSets> sets;
  std::array<CompensatedSum, 4> bleu_sums;
  std::unordered_map<std::string, bool> correct_by_id;

  for (const auto& pred : predictions) {
    const Sample* s = samples.find(pred.sample_id);
    if (!s) throw_data("unknown-sample-id", pred.sample_id);
    const bool ok = answer_matches(pred.predicted_answer, s->answer);
    correct_by_id[pred.sample_id] = ok;
    for (GroupAccuracy* g : {&report.overall, &report.by_question_type[s->question_type],
                             &report.by_answer_type[s->answer_type]}) {
      ++g->total;
      g->correct += ok ? 1 : 0;
    }
    sets.push_back({answer_set(s->answer), answer_set(pred.predicted_answer)});
    if (with_bleu) {
      const auto tokens = bleu_tokens(pred.predicted_answer);
      const std::vector<std::vector<std::string>> refs{bleu_tokens(s->answer_text())};
      for (int n = 1; n <= 4; ++n) {
        bleu_sums[n - 1] += tokens.empty() ? 0.0 : bleu_n(tokens, refs, n);
      }
    }
  }
  if (predictions.empty()) throw_data("empty-input", "no predictions to evaluate");
  report.micro = micro_f1(sets);
  if (with_bleu) {
    std::array<double, 4> bleu{};
    for (std::size_t i = 0; i < 4; ++i) bleu[i] = bleu_sums[i].value() / double(predictions.size());
    report.bleu = bleu;
  }
  if (baseline) {
    std::vector<bool> a, b;
    for (const auto& base : *baseline) {
      const auto it = correct_by_id.find(base.sample_id);
      if (it == correct_by_id.end()) continue;
      const Sample* s = samples.find(base.sample_id);
      a.push_back(it->second);
      b.push_back(answer_matches(base.predicted_answer, s->answer));
    }
    report.win_rate = win_rate(a, b);
  }
  return report;
}

std::string report_to_json(const EvalReport& r) {
  using json = nlohmann::ordered_json;
  auto group = [](const GroupAccuracy& g) {
    return json{{"accuracy", g.accuracy()}, {"correct", g.correct}, {"total", g.total}};
  };
  json j;
  j["overall"] = group(r.overall);
  j["question_type"] = json::object();
  for (QuestionType q : kQuestionTypes) {
    if (const auto it = r.by_question_type.find(q); it != r.by_question_type.end()) {
      j["question_type"][std::string(to_string(q))] = group(it->second);
    }
  }
  j["answer_type"] = json::object();
  for (AnswerType a : {AnswerType::Open, AnswerType::Closed}) {
    if (const auto it = r.by_answer_type.find(a); it != r.by_answer_type.end()) {
      j["answer_type"][std::string(to_string(a))] = group(it->second);
    }
  }
  j["micro"] = {{"precision", r.micro.precision}, {"recall", r.micro.recall}, {"f1", r.micro.f1},
                {"tp", r.micro.tp},               {"fp", r.micro.fp},         {"fn", r.micro.fn}};
  if (r.bleu) j["bleu"] = *r.bleu;
  if (r.win_rate) {
    j["win_rate"] = {{"decisive", r.win_rate->decisive}, {"raw", r.win_rate->raw},
                     {"wins", r.win_rate->a_wins},       {"losses", r.win_rate->b_wins},
                     {"ties", r.win_rate->ties}};
  }
  return j.dump(2);
}

std::string report_to_table(const EvalReport& r, std::string_view model_name) {
  std::vector<std::string> headers{"Model"};
  std::vector<std::string> cells{std::string(model_name)};
  auto pct = [](const GroupAccuracy& g) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(2) << 100.0 * g.accuracy();
    return ss.str();
  };
  for (QuestionType q : kQuestionTypes) {
    headers.emplace_back(to_string(q));
    const auto it = r.by_question_type.find(q);
    cells.push_back(it == r.by_question_type.end() ? "-" : pct(it->second));
  }
  for (auto [a, name] : {std::pair{AnswerType::Open, "Open"}, std::pair{AnswerType::Closed, "Closed"}}) {
    headers.emplace_back(name);
    const auto it = r.by_answer_type.find(a);
    cells.push_back(it == r.by_answer_type.end() ? "-" : pct(it->second));
  }
  headers.emplace_back("Overall");
  cells.push_back(pct(r.overall));

  std::ostringstream out;
  for (int row = 0; row < 2; ++row) {
    const auto& v = row == 0 ? headers : cells;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::size_t width = std::max(headers[i].size(), cells[i].size());
      if (i) out << "  ";
      if (i == 0) out << std::left << std::setw(static_cast<int>(width)) << v[i];
      else out << std::right << std::setw(static_cast<int>(width)) << v[i];
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace chexpo::metrics
