#include "xlprime/langid.hpp"

#include <cmath>

#include "xlprime/error.hpp"
#include "xlprime/io.hpp"
#include "xlprime/utf8.hpp"

namespace xlp {

std::vector<std::string> LangIdModel::ngrams(std::string_view text) const {
  std::vector<std::string_view> chars;
  const std::string pad(order_ > 1 ? order_ - 1 : 0, ' ');
  for (std::size_t i = 0; i < pad.size(); ++i) chars.emplace_back(" ");
  for (auto c : utf8::characters(text)) chars.push_back(c);
  for (std::size_t i = 0; i < pad.size(); ++i) chars.emplace_back(" ");
  std::vector<std::string> out;
  if (chars.size() < order_) return out;
  out.reserve(chars.size() - order_ + 1);
  for (std::size_t i = 0; i + order_ <= chars.size(); ++i) {
    std::string g;
    for (std::size_t k = 0; k < order_; ++k) g += chars[i + k];
    out.push_back(std::move(g));
  }
  return out;
}

LangIdModel LangIdModel::train(const CorpusShard& l1, const CorpusShard& l2, std::size_t order,
                               double smoothing) {
  if (l1.language != Language::l1 || l2.language != Language::l2) {
    throw ConfigError("langid: expected one L1 shard and one L2 shard");
  }
  if (l1.documents.empty() || l2.documents.empty()) throw DataError("langid: missing language sample");
  if (order < 1) throw ConfigError("langid: order must be at least 1");
  if (!(smoothing > 0.0)) throw ConfigError("langid: smoothing must be positive");

  LangIdModel m;
  m.order_ = order;
  m.smoothing_ = smoothing;
  std::vector<double> counts[2];
  double totals[2] = {0.0, 0.0};
  const CorpusShard* shards[2] = {&l1, &l2};
  for (int lang = 0; lang < 2; ++lang) {
    for (const auto& doc : shards[lang]->documents) {
      for (auto& g : m.ngrams(doc)) {
        auto [it, inserted] = m.index_.emplace(std::move(g), m.index_.size());
        if (inserted) {
          counts[0].push_back(0.0);
          counts[1].push_back(0.0);
        }
        counts[lang][it->second] += 1.0;
        totals[lang] += 1.0;
      }
    }
  }
  const double v = static_cast<double>(m.index_.size());
  for (int lang = 0; lang < 2; ++lang) {
    const double denom = std::log(totals[lang] + smoothing * (v + 1.0));
    m.logp_[lang].resize(counts[lang].size());
    for (std::size_t i = 0; i < counts[lang].size(); ++i) {
      m.logp_[lang][i] = std::log(counts[lang][i] + smoothing) - denom;
    }
    m.unknown_logp_[lang] = std::log(smoothing) - denom;
  }
  return m;
}

double LangIdModel::log_prob(std::string_view text, Language lang) const {
  const int l = lang == Language::l1 ? 0 : 1;
  double total = 0.0;
  for (const auto& g : ngrams(text)) {
    auto it = index_.find(g);
    total += it == index_.end() ? unknown_logp_[l] : logp_[l][it->second];
  }
  return total;
}

double LangIdModel::log_odds(std::string_view text, Language lang) const {
  return log_prob(text, lang) - log_prob(text, other(lang));
}

std::vector<double> LangIdModel::table(Language lang) const {
  const int l = lang == Language::l1 ? 0 : 1;
  auto out = logp_[l];
  out.push_back(unknown_logp_[l]);
  return out;
}

ContaminationReport scan_contamination(const CorpusShard& shard, const LangIdModel& model,
                                       double threshold) {
  ContaminationReport report;
  report.scanned_lines = shard.documents.size();
  report.per_line_scores.reserve(shard.documents.size());
  const Language foreign = other(shard.language);
  for (std::size_t i = 0; i < shard.documents.size(); ++i) {
    LineScore s;
    s.line_index = i;
    s.log_odds = model.log_odds(shard.documents[i], foreign);
    s.flagged = s.log_odds > threshold;
    if (s.flagged) ++report.flagged_lines;
    report.per_line_scores.push_back(s);
  }
  report.flagged_fraction = report.scanned_lines == 0
                                ? 0.0
                                : static_cast<double>(report.flagged_lines) /
                                      static_cast<double>(report.scanned_lines);
  return report;
}

std::string ContaminationReport::to_csv() const {
  std::string out = "line_index,log_odds,flagged\n";
  for (const auto& s : per_line_scores) {
    out += std::to_string(s.line_index);
    out += ',';
    out += format_double(s.log_odds);
    out += s.flagged ? ",1\n" : ",0\n";
  }
  return out;
}

}  // namespace xlp
