#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "trinv/core.hpp"

namespace trinv {

inline constexpr std::size_t kMaxDatasetSize = 3500;

struct DatasetFile {
  std::string name;
  DomainGroup domain_group = DomainGroup::Other;
  std::vector<QuerySample> samples;
};

/// Kept indices floor(i * n / cap) for i in [0, cap); identity when n <= cap.
std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t cap = kMaxDatasetSize);

template <class T>
std::vector<T> subsample(const std::vector<T>& items, std::size_t cap = kMaxDatasetSize) {
  std::vector<T> out;
  for (auto i : subsample_indices(items.size(), cap)) out.push_back(items[i]);
  return out;
}

QuerySample sample_from_json(const nlohmann::json& j);
nlohmann::json sample_to_json(const QuerySample& s);

/// Reads a JSONL dataset (one QuerySample per line), validates every line
/// and caps the result with subsample(). Schema errors name the line.
DatasetFile load_dataset(const std::filesystem::path& path, std::size_t cap = kMaxDatasetSize);
void write_dataset(const DatasetFile& dataset, const std::filesystem::path& path);

enum class SourceFormat { MmluCsv, McJsonl };

SourceFormat source_format_from_string(std::string_view s);

/// Converts a raw benchmark export into QuerySamples.
///   MmluCsv: question, option columns..., answer letter (no header).
///   McJsonl: {"question", "context"?, "choices": [...], "answer": index|letter|null,
///             "answerable"?, "scenario"?}; a null answer marks the row unanswerable.
DatasetFile convert_dataset(const std::filesystem::path& input, SourceFormat format,
                            const std::string& name);

}  // namespace trinv
