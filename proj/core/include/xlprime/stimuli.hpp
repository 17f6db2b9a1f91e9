#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "xlprime/corpus.hpp"

namespace xlp {

enum class PrimeType { po, do_ };

const char* to_string(PrimeType type) noexcept;
PrimeType parse_prime_type(std::string_view text);

/// One crosslingual item: PO/DO primes in the prime language, PO/DO targets in the target language.
struct StimulusItem {
  std::int64_t item_id = 0;
  Language prime_language = Language::l1;
  Language target_language = Language::l2;
  std::string prime_po;
  std::string prime_do;
  std::string target_po;
  std::string target_do;
};

/// Dutch and English function words ignored by the content-word check.
const std::vector<std::string>& default_stoplist();

struct StimulusOptions {
  /// Content-word mismatches become errors instead of warnings.
  bool strict = false;
  std::vector<std::string> stoplist = default_stoplist();
};

struct StimulusSet {
  std::vector<StimulusItem> items;
  std::vector<std::string> warnings;
};

/// Lower-cased alphabetic words of `sentence` not in `stoplist`, sorted (a multiset).
std::vector<std::string> content_words(std::string_view sentence, const std::vector<std::string>& stoplist);

/// Checks sentence non-emptiness and distinctness (DataError) and PO/DO content-word
/// agreement (warning, or DataError when strict). Warnings are appended to `warnings`.
void validate_item(const StimulusItem& item, const StimulusOptions& options, std::vector<std::string>& warnings);

inline constexpr std::string_view kStimulusHeader =
    "item_id,prime_language,target_language,prime_po,prime_do,target_po,target_do";

StimulusSet parse_stimuli(std::string_view csv_text, const StimulusOptions& options = {},
                          std::string_view origin = "<memory>");
StimulusSet load_stimuli(const std::filesystem::path& path, const StimulusOptions& options = {});
std::string stimuli_to_csv(const std::vector<StimulusItem>& items);

}  // namespace xlp
