#include "xlprime/stimuli.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include "xlprime/csv.hpp"
#include "xlprime/error.hpp"
#include "xlprime/io.hpp"

namespace xlp {

const char* to_string(PrimeType type) noexcept { return type == PrimeType::po ? "PO" : "DO"; }

PrimeType parse_prime_type(std::string_view text) {
  if (text == "PO") return PrimeType::po;
  if (text == "DO") return PrimeType::do_;
  throw DataError("unknown prime type '" + std::string(text) + "' (expected PO or DO)");
}

const std::vector<std::string>& default_stoplist() {
  static const std::vector<std::string> words{
      // English
      "a", "an", "the", "to", "for", "of", "in", "on", "at", "with", "by", "from", "and", "his", "her",
      "their", "its", "is", "was",
      // Dutch
      "de", "het", "een", "aan", "voor", "van", "op", "met", "door", "naar", "en", "zijn", "haar", "hun"};
  return words;
}

std::vector<std::string> content_words(std::string_view sentence, const std::vector<std::string>& stoplist) {
  const std::set<std::string> stop(stoplist.begin(), stoplist.end());
  auto is_alpha = [](unsigned char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80; };
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < sentence.size()) {
    while (i < sentence.size() && !is_alpha(static_cast<unsigned char>(sentence[i]))) ++i;
    std::string w;
    while (i < sentence.size() && is_alpha(static_cast<unsigned char>(sentence[i]))) {
      const auto c = static_cast<unsigned char>(sentence[i++]);
      w.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    }
    if (!w.empty() && stop.count(w) == 0) words.push_back(std::move(w));
  }
  std::sort(words.begin(), words.end());
  return words;
}

void validate_item(const StimulusItem& item, const StimulusOptions& options, std::vector<std::string>& warnings) {
  const std::string id = std::to_string(item.item_id);
  const std::pair<const std::string*, const char*> fields[] = {{&item.prime_po, "prime_po"},
                                                               {&item.prime_do, "prime_do"},
                                                               {&item.target_po, "target_po"},
                                                               {&item.target_do, "target_do"}};
  for (const auto& [text, name] : fields) {
    if (text->find_first_not_of(" \t\r\n") == std::string::npos) {
      throw DataError("stimuli: item " + id + " has an empty " + name);
    }
  }
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = a + 1; b < 4; ++b) {
      if (*fields[a].first == *fields[b].first) {
        throw DataError("stimuli: item " + id + " has identical " + fields[a].second + " and " + fields[b].second);
      }
    }
  }
  auto check = [&](const std::string& po, const std::string& do_, const char* side) {
    if (content_words(po, options.stoplist) != content_words(do_, options.stoplist)) {
      const std::string msg = "stimuli: item " + id + " " + side + " PO/DO sentences differ in content words";
      if (options.strict) throw DataError(msg);
      warnings.push_back(msg);
    }
  };
  check(item.prime_po, item.prime_do, "prime");
  check(item.target_po, item.target_do, "target");
}

StimulusSet parse_stimuli(std::string_view csv_text, const StimulusOptions& options, std::string_view origin) {
  const auto rows = csv::parse(csv_text);
  const std::string where(origin);
  if (rows.empty()) throw DataError(where + ": empty stimulus file");
  static const char* kColumns[] = {"item_id", "prime_language", "target_language", "prime_po",
                                   "prime_do", "target_po", "target_do"};
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < rows[0].size(); ++i) col.emplace(rows[0][i], i);
  std::size_t idx[7];
  for (std::size_t k = 0; k < 7; ++k) {
    auto it = col.find(kColumns[k]);
    if (it == col.end()) throw DataError(where + ": missing column '" + kColumns[k] + "'");
    idx[k] = it->second;
  }

  StimulusSet set;
  std::set<std::int64_t> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != rows[0].size()) {
      throw DataError(where + ": row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                      " fields, header has " + std::to_string(rows[0].size()));
    }
    StimulusItem item;
    try {
      std::size_t used = 0;
      item.item_id = std::stoll(row[idx[0]], &used);
      if (used != row[idx[0]].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw DataError(where + ": row " + std::to_string(r + 1) + " has a non-integer item_id '" + row[idx[0]] + "'");
    }
    if (!seen.insert(item.item_id).second) {
      throw DataError(where + ": duplicate item_id " + std::to_string(item.item_id));
    }
    try {
      item.prime_language = parse_language(row[idx[1]]);
      item.target_language = parse_language(row[idx[2]]);
    } catch (const ConfigError& e) {
      throw DataError(where + ": row " + std::to_string(r + 1) + ": " + e.what());
    }
    item.prime_po = row[idx[3]];
    item.prime_do = row[idx[4]];
    item.target_po = row[idx[5]];
    item.target_do = row[idx[6]];
    validate_item(item, options, set.warnings);
    set.items.push_back(std::move(item));
  }
  if (set.items.empty()) throw DataError(where + ": no stimulus items");
  return set;
}

StimulusSet load_stimuli(const std::filesystem::path& path, const StimulusOptions& options) {
  return parse_stimuli(read_file(path), options, path.string());
}

std::string stimuli_to_csv(const std::vector<StimulusItem>& items) {
  std::string out(kStimulusHeader);
  out += '\n';
  for (const auto& it : items) {
    out += csv::join({std::to_string(it.item_id), to_string(it.prime_language), to_string(it.target_language),
                      it.prime_po, it.prime_do, it.target_po, it.target_do});
    out += '\n';
  }
  return out;
}

}  // namespace xlp
