#pragma once

// Typed tabular data read from header-first CSV files.

#include "cmpvc/irls.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <istream>
#include <map>
#include <string>
#include <vector>

namespace cmpvc {

enum class ColumnKind { numeric, categorical, count };
enum class ColumnRole { response, varying, global, smooth, moderator_lambda, moderator_nu, ignored };

std::string to_string(ColumnKind k);
std::string to_string(ColumnRole r);
ColumnKind column_kind_from_string(const std::string& s);
ColumnRole column_role_from_string(const std::string& s);

struct ColumnSchema {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    ColumnRole role = ColumnRole::global;
};

// Exactly one response, of count kind, and no repeated names.
void validate_schema(const std::vector<ColumnSchema>& schema);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> lines;  // source line of each row, header is line 1
};

// RFC-4180 quoting; CRLF and LF line ends; blank lines skipped.
CsvTable parse_csv(std::istream& in);

struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    ColumnRole role = ColumnRole::global;
    Eigen::VectorXd values;           // level codes 0, 1, ... for categorical columns
    std::vector<std::string> levels;  // categorical only, code order
};

struct Dataset {
    std::vector<Column> columns;  // schema order, ignored columns omitted
    std::size_t rows_read = 0;
    std::size_t rows_dropped = 0;  // rows with a missing value in a used column

    Eigen::Index rows() const;
    bool has(const std::string& name) const;
    const Column& column(const std::string& name) const;  // SchemaMismatch when absent
    const Column* response() const;                       // null without a response column
    Counts counts() const;
    std::map<std::string, std::vector<std::string>> level_dictionary() const;
};

// Empty cells and NA, NaN, ? count as missing.
bool is_missing(const std::string& cell);

// Categorical codes follow first appearance unless `known_levels` fixes the
// dictionary; unseen labels are then appended after the known ones. With
// response_optional a header without the response column is accepted.
Dataset ingest(std::istream& in, const std::vector<ColumnSchema>& schema,
               const std::map<std::string, std::vector<std::string>>& known_levels = {},
               bool response_optional = false);
Dataset ingest_csv(const std::string& path, const std::vector<ColumnSchema>& schema,
                   const std::map<std::string, std::vector<std::string>>& known_levels = {},
                   bool response_optional = false);

// Indicator columns for levels 1..L-1 (drop_first) or all L levels; names
// are "column=level".
Eigen::MatrixXd one_hot(const Column& column, bool drop_first, std::vector<std::string>* names = nullptr);

}  // namespace cmpvc
