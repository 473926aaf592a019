#include "trinv/tables.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace trinv {

std::string_view to_string(Metric m) {
  return m == Metric::AbstainAccuracy ? "abstain_accuracy" : "reliable_accuracy";
}

std::string TableColumn::header() const {
  if (grand) return "Overall";
  return std::string(to_string(domain)) + ":" + (dataset.empty() ? "Overall" : dataset);
}

std::size_t Table::column_index(const std::string& header) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].header() == header) return i;
  }
  throw Error(ErrorKind::Input, "no column '" + header + "'");
}

const Cell& Table::at(const std::string& label, const std::string& backend,
                      const std::string& header) const {
  const auto col = column_index(header);
  for (const auto& r : rows) {
    if (r.label == label && r.backend == backend) return r.cells.at(col);
  }
  throw Error(ErrorKind::Input, "no row '" + label + "' / '" + backend + "'");
}

namespace {

constexpr DomainGroup kDomainOrder[] = {DomainGroup::MathKnowledge, DomainGroup::Comprehension,
                                        DomainGroup::BiasesSafety, DomainGroup::Other};

int dataset_rank(const std::string& name) {
  const auto names = canonical_datasets();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return static_cast<int>(names.size());
}

std::vector<TableColumn> build_columns(std::span<const RunResult> results) {
  std::map<std::string, DomainGroup> domain_of;
  for (const auto& r : results) domain_of.emplace(r.dataset, r.domain_group);
  std::vector<TableColumn> cols;
  for (auto d : kDomainOrder) {
    std::vector<std::string> names;
    for (const auto& [name, dom] : domain_of) {
      if (dom == d) names.push_back(name);
    }
    if (names.empty()) continue;
    std::stable_sort(names.begin(), names.end(), [](const auto& a, const auto& b) {
      return dataset_rank(a) < dataset_rank(b);
    });
    for (auto& n : names) cols.push_back({n, d, false});
    cols.push_back({"", d, false});
  }
  cols.push_back({"", DomainGroup::Other, true});
  return cols;
}

struct RowKey {
  int method;
  bool cot;
  std::string backend;
  auto operator<=>(const RowKey&) const = default;
};

Cell seed_mean(const std::vector<const RunResult*>& runs, Metric metric) {
  double sum = 0.0;
  int n = 0;
  bool any_ok = false;
  for (const auto* r : runs) {
    if (r->status != RunStatus::Ok) continue;
    any_ok = true;
    const auto& v = metric == Metric::AbstainAccuracy ? r->a_acc : r->r_acc;
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n > 0) return Cell::of(sum / n);
  if (any_ok && metric == Metric::ReliableAccuracy) return Cell::all_abstain();
  return Cell::missing();
}

/// Mean of the cells, or missing when any of them lacks a value.
Cell mean_of(const std::vector<Cell>& cells) {
  if (cells.empty()) return Cell::missing();
  double sum = 0.0;
  for (const auto& c : cells) {
    if (!c.has_value()) return Cell::missing();
    sum += c.value;
  }
  return Cell::of(sum / static_cast<double>(cells.size()));
}

void fill_overalls(const std::vector<TableColumn>& cols, TableRow& row) {
  std::vector<Cell> all;
  std::vector<Cell> group;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    const auto& c = cols[i];
    if (c.grand) {
      row.cells[i] = mean_of(all);
    } else if (c.dataset.empty()) {
      row.cells[i] = mean_of(group);
      group.clear();
    } else {
      group.push_back(row.cells[i]);
      all.push_back(row.cells[i]);
    }
  }
}

std::string row_label(int method, bool cot) {
  std::string l(to_string(static_cast<Method>(method)));
  if (cot) l += "+CoT";
  return l;
}

}  // namespace

Table aggregate(std::span<const RunResult> results, Metric metric, Grouping grouping) {
  if (results.empty()) throw Error(ErrorKind::EmptyTable, "no results to aggregate");
  Table t;
  t.metric = metric;
  t.columns = build_columns(results);

  std::map<RowKey, std::map<std::string, std::vector<const RunResult*>>> by_row;
  for (const auto& r : results) {
    by_row[{static_cast<int>(r.method), r.cot_variant, r.backend}][r.dataset].push_back(&r);
  }

  std::map<RowKey, TableRow> rows;
  for (const auto& [key, per_dataset] : by_row) {
    TableRow row{row_label(key.method, key.cot), key.backend,
                 std::vector<Cell>(t.columns.size())};
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
      const auto& c = t.columns[i];
      if (c.dataset.empty()) continue;
      auto it = per_dataset.find(c.dataset);
      row.cells[i] = it == per_dataset.end() ? Cell::missing() : seed_mean(it->second, metric);
    }
    rows.emplace(key, std::move(row));
  }

  if (grouping == Grouping::AcrossBackends) {
    std::map<RowKey, std::vector<const TableRow*>> merged;
    for (const auto& [key, row] : rows) merged[{key.method, key.cot, "all"}].push_back(&row);
    std::map<RowKey, TableRow> averaged;
    for (const auto& [key, group] : merged) {
      TableRow row{row_label(key.method, key.cot), "all", std::vector<Cell>(t.columns.size())};
      for (std::size_t i = 0; i < t.columns.size(); ++i) {
        if (t.columns[i].dataset.empty()) continue;
        std::vector<Cell> cells;
        bool all_abstain = true;
        for (const auto* r : group) {
          const auto& c = r->cells[i];
          if (c.state == Cell::State::Missing) {
            all_abstain = false;
            cells.push_back(c);
          } else if (c.has_value()) {
            all_abstain = false;
            cells.push_back(c);
          }
        }
        row.cells[i] = all_abstain ? Cell::all_abstain() : mean_of(cells);
      }
      averaged.emplace(key, std::move(row));
    }
    rows = std::move(averaged);
  }

  for (auto& [key, row] : rows) {
    fill_overalls(t.columns, row);
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::span<const DomainGroup> gap_domains() {
  static constexpr DomainGroup kGap[] = {DomainGroup::MathKnowledge, DomainGroup::Comprehension,
                                         DomainGroup::BiasesSafety};
  return kGap;
}

double answerable_gap(std::span<const RunResult> results, DomainGroup domain, Metric metric) {
  const auto unans = unanswerable_dataset(domain);
  if (!unans) throw Error(ErrorKind::Input, "domain has no unanswerable dataset");
  if (results.empty()) throw Error(ErrorKind::Input, "gap unavailable: no results");
  const auto t = aggregate(results, metric, Grouping::PerBackend);
  if (t.rows.size() > 0) {
    std::set<std::string> labels;
    for (const auto& r : t.rows) labels.insert(r.label);
    if (labels.size() > 1) throw Error(ErrorKind::Input, "gap expects results of one method");
  }
  std::optional<std::size_t> unans_col;
  std::vector<std::size_t> ans_cols;
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    const auto& c = t.columns[i];
    if (c.grand || c.dataset.empty() || c.domain != domain) continue;
    if (c.dataset == *unans) {
      unans_col = i;
    } else {
      ans_cols.push_back(i);
    }
  }
  const std::string dom(to_string(domain));
  if (!unans_col) throw Error(ErrorKind::Input, "gap unavailable for " + dom + ": missing " + std::string(*unans));
  if (ans_cols.empty()) throw Error(ErrorKind::Input, "gap unavailable for " + dom + ": no answerable dataset");

  double total = 0.0;
  for (const auto& row : t.rows) {
    const auto& u = row.cells[*unans_col];
    double ans = 0.0;
    for (auto i : ans_cols) {
      if (!row.cells[i].has_value()) {
        throw Error(ErrorKind::Input, "gap unavailable for " + dom + ": backend '" + row.backend +
                                          "' lacks " + t.columns[i].dataset);
      }
      ans += row.cells[i].value;
    }
    if (!u.has_value()) {
      throw Error(ErrorKind::Input, "gap unavailable for " + dom + ": backend '" + row.backend +
                                        "' lacks " + std::string(*unans));
    }
    total += ans / static_cast<double>(ans_cols.size()) - u.value;
  }
  return total / static_cast<double>(t.rows.size());
}

std::vector<GapRow> gap_table(std::span<const RunResult> results, Metric metric) {
  std::map<std::pair<int, bool>, std::vector<RunResult>> by_label;
  for (const auto& r : results) by_label[{static_cast<int>(r.method), r.cot_variant}].push_back(r);
  std::vector<GapRow> rows;
  for (const auto& [key, rs] : by_label) {
    GapRow row{row_label(key.first, key.second), {}};
    for (auto d : gap_domains()) {
      try {
        row.gaps.push_back(answerable_gap(rs, d, metric));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Input) throw;
        row.gaps.push_back(std::nullopt);
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error(ErrorKind::Io, "number formatting failed");
  return std::string(buf, end);
}

namespace {

constexpr std::string_view kMissing = "NA";
constexpr std::string_view kAllAbstain = "all-abstain";

std::string cell_csv(const Cell& c) {
  switch (c.state) {
    case Cell::State::Value:
      return format_number(c.value);
    case Cell::State::AllAbstain:
      return std::string(kAllAbstain);
    case Cell::State::Missing:
      break;
  }
  return std::string(kMissing);
}

std::string cell_text(const Cell& c, int decimals) {
  if (!c.has_value()) return cell_csv(c);
  std::ostringstream os;
  os << std::fixed << std::setprecision(decimals) << c.value;
  return os.str();
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out;
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
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

Cell parse_cell(const std::string& s) {
  if (s == kMissing) return Cell::missing();
  if (s == kAllAbstain) return Cell::all_abstain();
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw Error(ErrorKind::Schema, "bad table cell '" + s + "'");
  }
  return Cell::of(v);
}

std::string render_aligned(const std::vector<std::vector<std::string>>& grid) {
  std::vector<std::size_t> width;
  for (const auto& row : grid) {
    if (width.size() < row.size()) width.resize(row.size(), 0);
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::ostringstream os;
  for (const auto& row : grid) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i == 0) {
        os << std::left << std::setw(static_cast<int>(width[i])) << row[i];
      } else {
        os << "  " << std::right << std::setw(static_cast<int>(width[i])) << row[i];
      }
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace

std::string table_to_csv(const Table& t) {
  std::ostringstream os;
  os << "method,backend";
  for (const auto& c : t.columns) os << ',' << csv_escape(c.header());
  os << '\n';
  for (const auto& r : t.rows) {
    os << csv_escape(r.label) << ',' << csv_escape(r.backend);
    for (const auto& c : r.cells) os << ',' << cell_csv(c);
    os << '\n';
  }
  return os.str();
}

Table table_from_csv(const std::string& csv, Metric metric) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::EmptyTable, "empty table CSV");
  const auto head = csv_split(line);
  if (head.size() < 3 || head[0] != "method" || head[1] != "backend") {
    throw Error(ErrorKind::Schema, "table CSV must start with method,backend");
  }
  Table t;
  t.metric = metric;
  for (std::size_t i = 2; i < head.size(); ++i) {
    const auto& h = head[i];
    if (h == "Overall") {
      t.columns.push_back({"", DomainGroup::Other, true});
      continue;
    }
    const auto colon = h.find(':');
    if (colon == std::string::npos) throw Error(ErrorKind::Schema, "bad column header '" + h + "'");
    const auto dom = domain_group_from_string(h.substr(0, colon));
    const auto name = h.substr(colon + 1);
    t.columns.push_back({name == "Overall" ? "" : name, dom, false});
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = csv_split(line);
    if (f.size() != head.size()) {
      throw Error(ErrorKind::Schema, "table CSV line " + std::to_string(lineno) + ": expected " +
                                         std::to_string(head.size()) + " fields");
    }
    TableRow row{f[0], f[1], {}};
    for (std::size_t i = 2; i < f.size(); ++i) row.cells.push_back(parse_cell(f[i]));
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string table_to_text(const Table& t, int decimals) {
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> head = {"Method", "Backend"};
  for (const auto& c : t.columns) {
    if (c.grand) {
      head.push_back("Overall");
    } else if (c.dataset.empty()) {
      head.push_back(std::string(to_string(c.domain)) + " Overall");
    } else {
      head.push_back(c.dataset);
    }
  }
  grid.push_back(std::move(head));
  for (const auto& r : t.rows) {
    std::vector<std::string> line = {r.label, r.backend};
    for (const auto& c : r.cells) line.push_back(cell_text(c, decimals));
    grid.push_back(std::move(line));
  }
  return render_aligned(grid);
}

std::string gap_to_csv(const std::vector<GapRow>& rows) {
  std::ostringstream os;
  os << "method";
  for (auto d : gap_domains()) os << ',' << to_string(d);
  os << '\n';
  for (const auto& r : rows) {
    os << csv_escape(r.label);
    for (const auto& g : r.gaps) os << ',' << (g ? format_number(*g) : std::string(kMissing));
    os << '\n';
  }
  return os.str();
}

std::string gap_to_text(const std::vector<GapRow>& rows, int decimals) {
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> head = {"Method"};
  for (auto d : gap_domains()) head.emplace_back(to_string(d));
  grid.push_back(std::move(head));
  for (const auto& r : rows) {
    std::vector<std::string> line = {r.label};
    for (const auto& g : r.gaps) {
      line.push_back(g ? cell_text(Cell::of(*g), decimals) : std::string(kMissing));
    }
    grid.push_back(std::move(line));
  }
  return render_aligned(grid);
}

TableFormat table_format_from_string(std::string_view s) {
  if (s == "csv") return TableFormat::Csv;
  if (s == "text" || s == "txt") return TableFormat::Text;
  if (s == "both") return TableFormat::Both;
  throw Error(ErrorKind::Input, "unknown table format '" + std::string(s) + "'");
}

std::vector<std::filesystem::path> emit_tables(std::span<const RunResult> results,
                                               const std::filesystem::path& out_dir,
                                               TableFormat format) {
  if (results.empty()) throw Error(ErrorKind::EmptyTable, "no results to emit");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<std::filesystem::path> written;
  auto write = [&](const std::string& name, const std::string& body) {
    const auto p = out_dir / name;
    std::ofstream out(p);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + p.string());
    out << body;
    if (!out) throw Error(ErrorKind::Io, "write failed: " + p.string());
    written.push_back(p);
  };
  auto emit = [&](const std::string& stem, const Table& t) {
    if (format != TableFormat::Text) write(stem + ".csv", table_to_csv(t));
    if (format != TableFormat::Csv) write(stem + ".txt", table_to_text(t));
  };

  emit("abstain_accuracy", aggregate(results, Metric::AbstainAccuracy, Grouping::PerBackend));
  emit("reliable_accuracy", aggregate(results, Metric::ReliableAccuracy, Grouping::PerBackend));
  emit("abstain_accuracy_mean",
       aggregate(results, Metric::AbstainAccuracy, Grouping::AcrossBackends));

  const auto gaps = gap_table(results);
  if (format != TableFormat::Text) write("gap.csv", gap_to_csv(gaps));
  if (format != TableFormat::Csv) write("gap.txt", gap_to_text(gaps));

  std::set<Method> with_cot;
  for (const auto& r : results) {
    if (r.cot_variant) with_cot.insert(r.method);
  }
  if (!with_cot.empty()) {
    std::vector<RunResult> cot;
    for (const auto& r : results) {
      if (with_cot.count(r.method)) cot.push_back(r);
    }
    emit("cot_comparison", aggregate(cot, Metric::AbstainAccuracy, Grouping::AcrossBackends));
  }
  return written;
}

}  // namespace trinv
