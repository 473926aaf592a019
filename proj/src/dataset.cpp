#include "trinv/dataset.hpp"

#include <fstream>
#include <sstream>

namespace trinv {

using nlohmann::json;

std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t cap) {
  if (cap == 0) throw Error(ErrorKind::Input, "subsample cap must be positive");
  std::vector<std::size_t> idx;
  if (n <= cap) {
    idx.resize(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
  }
  idx.reserve(cap);
  for (std::size_t i = 0; i < cap; ++i) idx.push_back(i * n / cap);
  return idx;
}

QuerySample sample_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::Schema, "sample must be a JSON object");
  QuerySample s;
  auto req = [&](const char* key) -> const json& {
    auto it = j.find(key);
    if (it == j.end()) throw Error(ErrorKind::Schema, std::string("missing field '") + key + "'");
    return *it;
  };
  try {
    s.id = req("id").is_string() ? req("id").get<std::string>() : req("id").dump();
    s.prompt = req("prompt").get<std::string>();
    const auto& flag = req("answerable");
    if (!flag.is_boolean()) throw Error(ErrorKind::Schema, "'answerable' must be a boolean");
    s.answerable = flag.get<bool>();
    s.references = j.value("references", std::vector<std::string>{});
    s.options = j.value("options", std::vector<std::string>{});
    s.dataset = j.value("dataset", std::string("custom"));
    s.domain_group = j.contains("domain_group")
                         ? domain_group_from_string(j.at("domain_group").get<std::string>())
                         : default_domain(s.dataset);
    if (auto it = j.find("scenario"); it != j.end() && !it->is_null()) {
      s.scenario = scenario_from_string(it->get<std::string>());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Schema, e.what());
  } catch (const Error& e) {
    throw Error(ErrorKind::Schema, e.what());
  }
  try {
    s.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Schema, e.what());
  }
  return s;
}

json sample_to_json(const QuerySample& s) {
  json j = {{"id", s.id},
            {"prompt", s.prompt},
            {"answerable", s.answerable},
            {"references", s.references},
            {"dataset", s.dataset},
            {"domain_group", to_string(s.domain_group)}};
  if (!s.options.empty()) j["options"] = s.options;
  if (s.scenario) j["scenario"] = to_string(*s.scenario);
  return j;
}

DatasetFile load_dataset(const std::filesystem::path& path, std::size_t cap) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open dataset " + path.string());
  DatasetFile ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      ds.samples.push_back(sample_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Schema, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorKind::Schema, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  ds.name = ds.samples.empty() ? path.stem().string() : ds.samples.front().dataset;
  if (ds.name == "custom") ds.name = path.stem().string();
  ds.domain_group = ds.samples.empty() ? default_domain(ds.name) : ds.samples.front().domain_group;
  ds.samples = subsample(ds.samples, cap);
  return ds;
}

void write_dataset(const DatasetFile& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  for (const auto& s : dataset.samples) out << sample_to_json(s).dump() << '\n';
}

SourceFormat source_format_from_string(std::string_view s) {
  if (s == "mmlu-csv") return SourceFormat::MmluCsv;
  if (s == "mc-jsonl") return SourceFormat::McJsonl;
  throw Error(ErrorKind::Input, "unknown source format '" + std::string(s) + "'");
}

namespace {

std::string letter(std::size_t i) { return std::string(1, static_cast<char>('A' + i)); }

std::string format_question(const std::string& context, const std::string& question,
                            const std::vector<std::string>& choices) {
  std::string p;
  if (!context.empty()) p += context + "\n";
  p += question;
  for (std::size_t i = 0; i < choices.size(); ++i) p += "\n" + letter(i) + ". " + choices[i];
  return p;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace

DatasetFile convert_dataset(const std::filesystem::path& input, SourceFormat format,
                            const std::string& name) {
  std::ifstream in(input);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + input.string());
  DatasetFile ds;
  ds.name = name;
  ds.domain_group = default_domain(name);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::string where = input.string() + ":" + std::to_string(lineno) + ": ";
    QuerySample s;
    s.id = name + "-" + std::to_string(ds.samples.size());
    s.dataset = name;
    s.domain_group = ds.domain_group;
    if (format == SourceFormat::MmluCsv) {
      auto f = split_csv_line(line);
      if (f.size() < 4) throw Error(ErrorKind::Schema, where + "need question, >=2 options, answer");
      std::vector<std::string> choices(f.begin() + 1, f.end() - 1);
      s.prompt = format_question("", f.front(), choices);
      for (std::size_t i = 0; i < choices.size(); ++i) s.options.push_back(letter(i));
      s.references = {to_upper(trim(f.back()))};
      s.scenario = Scenario::Answerable;
    } else {
      json j;
      try {
        j = json::parse(line);
        const auto choices = j.at("choices").get<std::vector<std::string>>();
        s.prompt = format_question(j.value("context", std::string()),
                                   j.at("question").get<std::string>(), choices);
        for (std::size_t i = 0; i < choices.size(); ++i) s.options.push_back(letter(i));
        const auto& ans = j.contains("answer") ? j.at("answer") : json();
        s.answerable = j.value("answerable", !ans.is_null());
        if (s.answerable) {
          if (ans.is_number_integer()) {
            s.references = {letter(ans.get<std::size_t>())};
          } else if (ans.is_string()) {
            s.references = {to_upper(trim(ans.get<std::string>()))};
          }
        }
        if (auto it = j.find("scenario"); it != j.end() && !it->is_null()) {
          s.scenario = scenario_from_string(it->get<std::string>());
        } else {
          s.scenario = s.answerable ? Scenario::Answerable : Scenario::Unanswerable;
        }
      } catch (const json::exception& e) {
        throw Error(ErrorKind::Schema, where + e.what());
      }
    }
    try {
      s.validate();
    } catch (const Error& e) {
      throw Error(ErrorKind::Schema, where + e.what());
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace trinv
