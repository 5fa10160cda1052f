#include "cmpvc/dataset.hpp"

#include "cmpvc/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

namespace cmpvc {

std::string to_string(ColumnKind k) {
    switch (k) {
        case ColumnKind::numeric: return "numeric";
        case ColumnKind::categorical: return "categorical";
        case ColumnKind::count: return "count";
    }
    return "numeric";
}

std::string to_string(ColumnRole r) {
    switch (r) {
        case ColumnRole::response: return "response";
        case ColumnRole::varying: return "varying";
        case ColumnRole::global: return "global";
        case ColumnRole::smooth: return "smooth";
        case ColumnRole::moderator_lambda: return "moderator_lambda";
        case ColumnRole::moderator_nu: return "moderator_nu";
        case ColumnRole::ignored: return "ignored";
    }
    return "ignored";
}

ColumnKind column_kind_from_string(const std::string& s) {
    for (ColumnKind k : {ColumnKind::numeric, ColumnKind::categorical, ColumnKind::count}) {
        if (to_string(k) == s) return k;
    }
    throw SchemaMismatch("unknown column kind '" + s + "'");
}

ColumnRole column_role_from_string(const std::string& s) {
    for (ColumnRole r : {ColumnRole::response, ColumnRole::varying, ColumnRole::global, ColumnRole::smooth,
                         ColumnRole::moderator_lambda, ColumnRole::moderator_nu, ColumnRole::ignored}) {
        if (to_string(r) == s) return r;
    }
    throw SchemaMismatch("unknown column role '" + s + "'");
}

void validate_schema(const std::vector<ColumnSchema>& schema) {
    std::set<std::string> seen;
    int responses = 0;
    for (const auto& c : schema) {
        if (c.name.empty()) throw SchemaMismatch("schema column without a name");
        if (!seen.insert(c.name).second) throw SchemaMismatch("column '" + c.name + "' listed twice in the schema");
        if (c.role == ColumnRole::response) {
            ++responses;
            if (c.kind != ColumnKind::count) {
                throw SchemaMismatch("response column '" + c.name + "' must have kind count");
            }
        }
    }
    if (responses != 1) {
        throw SchemaMismatch("schema needs exactly one response column, found " + std::to_string(responses));
    }
}

CsvTable parse_csv(std::istream& in) {
    CsvTable t;
    bool have_header = false;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false, started = false, any = false;
    std::size_t line = 1, record_line = 1;
    auto end_field = [&] {
        record.push_back(field);
        field.clear();
        started = false;
    };
    auto end_record = [&] {
        if (any) {
            end_field();
            if (!have_header) {
                t.header = record;
                have_header = true;
            } else {
                t.rows.push_back(record);
                t.lines.push_back(record_line);
            }
        }
        record.clear();
        field.clear();
        any = started = false;
    };
    char c;
    while (in.get(c)) {
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
        } else if (c == '"' && !started) {
            quoted = started = any = true;
        } else if (c == ',') {
            any = true;
            end_field();
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && in.peek() == '\n') in.get(c);
            end_record();
            record_line = ++line;
        } else {
            field += c;
            started = any = true;
        }
    }
    if (quoted) {
        throw ParseError("unterminated quoted field starting on line " + std::to_string(record_line), record_line, "");
    }
    end_record();
    if (!have_header) throw ParseError("CSV input has no header row");
    return t;
}

bool is_missing(const std::string& cell) {
    std::size_t b = cell.find_first_not_of(" \t");
    if (b == std::string::npos) return true;
    std::size_t e = cell.find_last_not_of(" \t");
    const std::string s = cell.substr(b, e - b + 1);
    return s == "NA" || s == "NaN" || s == "nan" || s == "na" || s == "?";
}

namespace {

std::string trim(const std::string& s) {
    const std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

std::string where(std::size_t line, const std::string& col) {
    return "line " + std::to_string(line) + ", column '" + col + "'";
}

double parse_number(const std::string& cell, std::size_t line, const std::string& col) {
    const std::string s = trim(cell);
    double v = 0.0;
    const char* first = s.data();
    if (!s.empty() && s[0] == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw ParseError("non-numeric value '" + s + "' at " + where(line, col), line, col);
    }
    return v;
}

double parse_count(const std::string& cell, std::size_t line, const std::string& col) {
    const double v = parse_number(cell, line, col);
    if (v < 0.0 || v != std::floor(v) || v > 2147483647.0) {
        throw ParseError("count value '" + trim(cell) + "' at " + where(line, col) +
                             " is not a non-negative integer",
                         line, col);
    }
    return v;
}

}  // namespace

Eigen::Index Dataset::rows() const {
    return columns.empty() ? 0 : columns.front().values.size();
}

bool Dataset::has(const std::string& name) const {
    return std::any_of(columns.begin(), columns.end(), [&](const Column& c) { return c.name == name; });
}

const Column& Dataset::column(const std::string& name) const {
    for (const auto& c : columns) {
        if (c.name == name) return c;
    }
    throw SchemaMismatch("data set has no column '" + name + "'");
}

const Column* Dataset::response() const {
    for (const auto& c : columns) {
        if (c.role == ColumnRole::response) return &c;
    }
    return nullptr;
}

Counts Dataset::counts() const {
    const Column* r = response();
    if (!r) throw SchemaMismatch("data set has no response column");
    Counts y(static_cast<std::size_t>(r->values.size()));
    for (Eigen::Index i = 0; i < r->values.size(); ++i) y[static_cast<std::size_t>(i)] = static_cast<int>(r->values(i));
    return y;
}

std::map<std::string, std::vector<std::string>> Dataset::level_dictionary() const {
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& c : columns) {
        if (c.kind == ColumnKind::categorical) out[c.name] = c.levels;
    }
    return out;
}

Dataset ingest(std::istream& in, const std::vector<ColumnSchema>& schema,
               const std::map<std::string, std::vector<std::string>>& known_levels, bool response_optional) {
    std::set<std::string> names;
    for (const auto& c : schema) {
        if (!names.insert(c.name).second) throw SchemaMismatch("column '" + c.name + "' listed twice in the schema");
    }
    const CsvTable t = parse_csv(in);
    std::vector<std::size_t> at;
    std::vector<const ColumnSchema*> used;
    for (const auto& c : schema) {
        const auto it = std::find(t.header.begin(), t.header.end(), c.name);
        if (it == t.header.end() && response_optional && c.role == ColumnRole::response) continue;
        if (it == t.header.end()) throw SchemaMismatch("CSV header has no column '" + c.name + "'");
        if (std::find(it + 1, t.header.end(), c.name) != t.header.end()) {
            throw SchemaMismatch("CSV header repeats column '" + c.name + "'");
        }
        if (c.role == ColumnRole::ignored) continue;
        at.push_back(static_cast<std::size_t>(it - t.header.begin()));
        used.push_back(&c);
    }

    Dataset d;
    d.rows_read = t.rows.size();
    std::vector<std::vector<double>> values(used.size());
    std::vector<std::map<std::string, int>> codes(used.size());
    std::vector<std::vector<std::string>> levels(used.size());
    for (std::size_t j = 0; j < used.size(); ++j) {
        const auto k = known_levels.find(used[j]->name);
        if (used[j]->kind == ColumnKind::categorical && k != known_levels.end()) {
            levels[j] = k->second;
            for (std::size_t l = 0; l < levels[j].size(); ++l) codes[j][levels[j][l]] = static_cast<int>(l);
        }
    }
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::size_t line = t.lines[r];
        if (row.size() != t.header.size()) {
            throw ParseError("line " + std::to_string(line) + " has " + std::to_string(row.size()) +
                                 " fields, header has " + std::to_string(t.header.size()),
                             line, "");
        }
        bool missing = false;
        for (std::size_t j = 0; j < used.size() && !missing; ++j) missing = is_missing(row[at[j]]);
        if (missing) {
            ++d.rows_dropped;
            continue;
        }
        for (std::size_t j = 0; j < used.size(); ++j) {
            const std::string& cell = row[at[j]];
            const ColumnSchema& c = *used[j];
            double v = 0.0;
            if (c.kind == ColumnKind::categorical) {
                const std::string label = trim(cell);
                auto [it, added] = codes[j].emplace(label, static_cast<int>(levels[j].size()));
                if (added) levels[j].push_back(label);
                v = it->second;
            } else if (c.kind == ColumnKind::count) {
                v = parse_count(cell, line, c.name);
            } else {
                v = parse_number(cell, line, c.name);
            }
            values[j].push_back(v);
        }
    }
    for (std::size_t j = 0; j < used.size(); ++j) {
        Column col;
        col.name = used[j]->name;
        col.kind = used[j]->kind;
        col.role = used[j]->role;
        col.values = Eigen::Map<const Eigen::VectorXd>(values[j].data(), static_cast<Eigen::Index>(values[j].size()));
        col.levels = std::move(levels[j]);
        d.columns.push_back(std::move(col));
    }
    return d;
}

Dataset ingest_csv(const std::string& path, const std::vector<ColumnSchema>& schema,
                   const std::map<std::string, std::vector<std::string>>& known_levels, bool response_optional) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return ingest(in, schema, known_levels, response_optional);
}

Eigen::MatrixXd one_hot(const Column& column, bool drop_first, std::vector<std::string>* names) {
    if (column.kind != ColumnKind::categorical) {
        throw SchemaMismatch("column '" + column.name + "' is not categorical");
    }
    const Eigen::Index first = drop_first ? 1 : 0;
    const Eigen::Index L = static_cast<Eigen::Index>(column.levels.size());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(column.values.size(), std::max<Eigen::Index>(L - first, 0));
    for (Eigen::Index i = 0; i < column.values.size(); ++i) {
        const auto code = static_cast<Eigen::Index>(column.values(i));
        if (code >= first && code < L) out(i, code - first) = 1.0;
    }
    if (names) {
        names->clear();
        for (Eigen::Index l = first; l < L; ++l) {
            names->push_back(column.name + "=" + column.levels[static_cast<std::size_t>(l)]);
        }
    }
    return out;
}

}  // namespace cmpvc
