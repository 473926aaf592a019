#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trinv/evaluation.hpp"

namespace trinv {

enum class Metric { AbstainAccuracy, ReliableAccuracy };
enum class Grouping { PerBackend, AcrossBackends };

std::string_view to_string(Metric m);

struct Cell {
  enum class State { Value, Missing, AllAbstain };
  State state = State::Missing;
  double value = 0.0;

  static Cell of(double v) { return {State::Value, v}; }
  static Cell missing() { return {State::Missing, 0.0}; }
  static Cell all_abstain() { return {State::AllAbstain, 0.0}; }

  bool has_value() const { return state == State::Value; }
  bool operator==(const Cell&) const = default;
};

struct TableColumn {
  std::string dataset;  // empty for an overall column
  DomainGroup domain = DomainGroup::Other;
  bool grand = false;

  std::string header() const;
  bool operator==(const TableColumn&) const = default;
};

struct TableRow {
  std::string label;    // method, e.g. "Probs" or "Probs+CoT"
  std::string backend;  // "all" when averaged across backends
  std::vector<Cell> cells;
  bool operator==(const TableRow&) const = default;
};

/// Datasets grouped by domain, each group followed by its overall column,
/// then the grand overall.
struct Table {
  Metric metric = Metric::AbstainAccuracy;
  std::vector<TableColumn> columns;
  std::vector<TableRow> rows;

  std::size_t column_index(const std::string& header) const;
  const Cell& at(const std::string& label, const std::string& backend,
                 const std::string& header) const;
  bool operator==(const Table&) const = default;
};

/// Seed-mean per (method, backend, dataset); with AcrossBackends the
/// per-backend means are averaged again. A domain overall is the unweighted
/// mean of its dataset cells and the grand overall the unweighted mean of all
/// dataset cells; an overall over a missing cell is itself missing.
Table aggregate(std::span<const RunResult> results, Metric metric,
                Grouping grouping = Grouping::PerBackend);

/// Mean over backends of [mean of the domain's answerable datasets minus its
/// unanswerable dataset]. Throws Error(Input) when a backend lacks one of them.
double answerable_gap(std::span<const RunResult> results, DomainGroup domain,
                      Metric metric = Metric::AbstainAccuracy);

struct GapRow {
  std::string label;
  std::vector<std::optional<double>> gaps;  // one per gap_domains() entry
};

std::span<const DomainGroup> gap_domains();

/// One row per method label; unavailable gaps stay empty.
std::vector<GapRow> gap_table(std::span<const RunResult> results,
                              Metric metric = Metric::AbstainAccuracy);

/// Shortest text that parses back to exactly the same double.
std::string format_number(double v);

std::string table_to_csv(const Table& t);
Table table_from_csv(const std::string& csv, Metric metric = Metric::AbstainAccuracy);
std::string table_to_text(const Table& t, int decimals = 3);

std::string gap_to_csv(const std::vector<GapRow>& rows);
std::string gap_to_text(const std::vector<GapRow>& rows, int decimals = 4);

enum class TableFormat { Csv, Text, Both };
TableFormat table_format_from_string(std::string_view s);

/// Writes the per-backend A-Acc and R-Acc tables, the backend-averaged table,
/// the gap table and (when CoT runs are present) the CoT comparison into
/// out_dir. Returns the written paths. Throws Error(EmptyTable) on no results.
std::vector<std::filesystem::path> emit_tables(std::span<const RunResult> results,
                                               const std::filesystem::path& out_dir,
                                               TableFormat format = TableFormat::Both);

}  // namespace trinv
