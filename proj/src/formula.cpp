#include "cmpvc/formula.hpp"

#include "cmpvc/errors.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace cmpvc {

namespace {

struct Token {
    enum Kind { name, number, symbol, end } kind = end;
    std::string text;
    std::size_t pos = 0;
};

std::vector<Token> tokenize(const std::string& s) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        const unsigned char c = static_cast<unsigned char>(s[i]);
        if (std::isspace(c)) {
            ++i;
        } else if (std::isalpha(c) || c == '_' || c == '.') {
            std::size_t j = i;
            while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_' || s[j] == '.')) ++j;
            out.push_back({Token::name, s.substr(i, j - i), i});
            i = j;
        } else if (std::isdigit(c)) {
            std::size_t j = i;
            while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
            out.push_back({Token::number, s.substr(i, j - i), i});
            i = j;
        } else if (std::string("()|,+=;").find(static_cast<char>(c)) != std::string::npos) {
            out.push_back({Token::symbol, std::string(1, static_cast<char>(c)), i});
            ++i;
        } else {
            throw ParseError("unexpected character '" + std::string(1, static_cast<char>(c)) +
                             "' at position " + std::to_string(i + 1) + " of the formula");
        }
    }
    out.push_back({Token::end, "", s.size()});
    return out;
}

class Parser {
public:
    explicit Parser(const std::string& text) : toks_(tokenize(text)) {}

    ModelSpec parse() {
        ModelSpec spec;
        bool seen_lambda = false, seen_nu = false;
        while (peek().kind != Token::end) {
            if (accept(";")) continue;
            const Token lhs = expect_name("'lambda' or 'nu'");
            expect("=");
            if (lhs.text == "lambda") {
                if (seen_lambda) fail(lhs, "lambda is defined twice");
                seen_lambda = true;
                spec.lambda = predictor();
            } else if (lhs.text == "nu") {
                if (seen_nu) fail(lhs, "nu is defined twice");
                seen_nu = true;
                spec.nu = predictor();
            } else {
                fail(lhs, "expected 'lambda' or 'nu', found '" + lhs.text + "'");
            }
            if (peek().kind != Token::end) expect(";");
        }
        if (!seen_lambda) throw ParseError("formula has no lambda statement");
        return spec;
    }

private:
    PredictorSpec predictor() {
        PredictorSpec p;
        do {
            const Token t = peek();
            if (t.kind == Token::number) {
                next();
                if (t.text == "0") {
                    p.intercept = false;
                } else if (t.text != "1") {
                    fail(t, "only 0 and 1 may appear as constants");
                }
                continue;
            }
            const Token id = expect_name("a term");
            if (id.text == "vc" && accept("(")) {
                if (p.has_vc) fail(id, "a predictor takes at most one vc() term");
                p.has_vc = true;
                if (!check("|")) {
                    do {
                        const Token v = peek();
                        if (v.kind == Token::number && v.text == "1") {
                            next();
                        } else {
                            p.varying.push_back(expect_name("a covariate").text);
                        }
                    } while (accept(","));
                }
                expect("|");
                do {
                    const Token m = expect_name("a moderator");
                    if (m.text == "onehot" && accept("(")) {
                        p.moderators.push_back({expect_name("a categorical moderator").text, true});
                        expect(")");
                    } else {
                        p.moderators.push_back({m.text, false});
                    }
                } while (accept(","));
                expect(")");
            } else if (id.text == "s" && accept("(")) {
                SmoothSpec s{expect_name("a smooth variable").text};
                if (accept(",")) {
                    const Token k = next();
                    if (k.kind != Token::number) fail(k, "smooth basis size must be an integer");
                    s.basis_size = std::stoi(k.text);
                    if (s.basis_size < 4) fail(k, "smooth basis size must be at least 4");
                }
                expect(")");
                p.smooths.push_back(s);
            } else {
                p.global.push_back(id.text);
            }
        } while (accept("+"));
        return p;
    }

    const Token& peek() const { return toks_[at_]; }
    Token next() { return toks_[at_ < toks_.size() - 1 ? at_++ : at_]; }
    bool check(const char* sym) const { return peek().kind == Token::symbol && peek().text == sym; }
    bool accept(const char* sym) {
        if (!check(sym)) return false;
        ++at_;
        return true;
    }
    void expect(const char* sym) {
        if (!accept(sym)) fail(peek(), std::string("expected '") + sym + "'");
    }
    Token expect_name(const std::string& what) {
        if (peek().kind != Token::name) fail(peek(), "expected " + what);
        return next();
    }
    [[noreturn]] void fail(const Token& t, const std::string& msg) const {
        const std::string found = t.kind == Token::end ? "end of formula" : "'" + t.text + "'";
        throw ParseError("formula position " + std::to_string(t.pos + 1) + ": " + msg + " (at " + found + ")");
    }

    std::vector<Token> toks_;
    std::size_t at_ = 0;
};

void add_unique(std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
}

void add_predictor_vars(const PredictorSpec& p, std::vector<std::string>& out) {
    for (const auto& v : p.varying) add_unique(out, v);
    for (const auto& m : p.moderators) add_unique(out, m.variable);
    for (const auto& v : p.global) add_unique(out, v);
    for (const auto& s : p.smooths) add_unique(out, s.variable);
}

std::string predictor_text(const PredictorSpec& p) {
    std::vector<std::string> terms;
    if (p.has_vc) {
        std::string t = "vc(";
        if (p.varying.empty()) t += "1";
        for (std::size_t i = 0; i < p.varying.size(); ++i) t += (i ? ", " : "") + p.varying[i];
        t += " | ";
        for (std::size_t i = 0; i < p.moderators.size(); ++i) {
            const auto& m = p.moderators[i];
            t += (i ? ", " : "") + (m.one_hot ? "onehot(" + m.variable + ")" : m.variable);
        }
        terms.push_back(t + ")");
    }
    if (!p.intercept) terms.push_back("0");
    for (const auto& g : p.global) terms.push_back(g);
    for (const auto& s : p.smooths) {
        terms.push_back("s(" + s.variable + (s.basis_size != 10 ? ", " + std::to_string(s.basis_size) : "") + ")");
    }
    if (terms.empty()) terms.push_back("1");
    std::string out;
    for (std::size_t i = 0; i < terms.size(); ++i) out += (i ? " + " : "") + terms[i];
    return out;
}

// Parametric columns for a list of covariates.
void append_covariates(const Dataset& data, const std::vector<std::string>& vars, std::vector<Eigen::VectorXd>& cols,
                       std::vector<std::string>& names) {
    for (const auto& v : vars) {
        const Column& c = data.column(v);
        if (c.kind == ColumnKind::categorical) {
            std::vector<std::string> dn;
            const Eigen::MatrixXd d = one_hot(c, true, &dn);
            for (Eigen::Index j = 0; j < d.cols(); ++j) {
                cols.push_back(d.col(j));
                names.push_back(dn[static_cast<std::size_t>(j)]);
            }
        } else {
            cols.push_back(c.values);
            names.push_back(v);
        }
    }
}

DesignBlock block(Eigen::Index n, bool intercept, const Dataset& data, const std::vector<std::string>& vars) {
    std::vector<Eigen::VectorXd> cols;
    std::vector<std::string> names;
    if (intercept) {
        cols.push_back(Eigen::VectorXd::Ones(n));
        names.push_back("(Intercept)");
    }
    append_covariates(data, vars, cols, names);
    DesignBlock b;
    b.matrix.resize(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) b.matrix.col(static_cast<Eigen::Index>(j)) = cols[j];
    b.column_names = std::move(names);
    return b;
}

std::vector<Moderator> moderators(const Dataset& data, const std::vector<ModeratorSpec>& specs) {
    std::vector<Moderator> out;
    for (const auto& m : specs) {
        const Column& c = data.column(m.variable);
        if (m.one_hot) {
            std::vector<std::string> dn;
            const Eigen::MatrixXd d = one_hot(c, c.levels.size() == 2, &dn);
            for (Eigen::Index j = 0; j < d.cols(); ++j) {
                out.push_back({dn[static_cast<std::size_t>(j)], d.col(j), ModeratorKind::continuous, {}});
            }
        } else if (c.kind == ColumnKind::categorical) {
            out.push_back({c.name, c.values, ModeratorKind::categorical, c.levels});
        } else {
            out.push_back({c.name, c.values, ModeratorKind::continuous, {}});
        }
    }
    return out;
}

std::vector<SmoothTerm> smooths(const Dataset& data, const std::vector<SmoothSpec>& specs) {
    std::vector<SmoothTerm> out;
    for (const auto& s : specs) {
        const Column& c = data.column(s.variable);
        if (c.kind == ColumnKind::categorical) {
            throw SchemaMismatch("smooth term s(" + s.variable + ") needs a numeric column");
        }
        SmoothTerm t;
        t.variable = s.variable;
        t.values = c.values;
        t.basis_size = s.basis_size;
        out.push_back(t);
    }
    return out;
}

}  // namespace

std::vector<std::string> ModelSpec::variables() const {
    std::vector<std::string> out;
    add_predictor_vars(lambda, out);
    add_predictor_vars(nu, out);
    return out;
}

ModelSpec parse_formula(const std::string& text) {
    ModelSpec spec = Parser(text).parse();
    spec.text = text;
    return spec;
}

std::string to_string(const ModelSpec& spec) {
    return "lambda = " + predictor_text(spec.lambda) + "; nu = " + predictor_text(spec.nu);
}

std::vector<Moderator> ModelFrame::all_moderators() const {
    std::vector<Moderator> out = z;
    for (const auto& m : u) {
        if (std::none_of(out.begin(), out.end(), [&](const Moderator& o) { return o.name == m.name; })) out.push_back(m);
    }
    return out;
}

MobData ModelFrame::mob() const {
    MobData d;
    d.y = y;
    d.x1 = x1;
    d.x2 = x2;
    d.w1 = w1;
    d.w2 = w2;
    d.smooths_lambda = smooths_lambda;
    d.smooths_nu = smooths_nu;
    d.moderators = all_moderators();
    return d;
}

BoostData ModelFrame::boost() const {
    BoostData d;
    d.y = y;
    d.x1 = x1;
    d.x2 = x2;
    d.w1 = w1;
    d.w2 = w2;
    d.smooths_lambda = smooths_lambda;
    d.smooths_nu = smooths_nu;
    d.z = z;
    d.u = u;
    return d;
}

ModelFrame build_frame(const Dataset& data, const ModelSpec& spec, FrameUse use) {
    const Eigen::Index n = data.rows();
    ModelFrame f;
    if (data.response()) f.y = data.counts();
    auto fill = [&](const PredictorSpec& p, DesignBlock& vary, DesignBlock& global, std::vector<SmoothTerm>& sm,
                    std::vector<Moderator>& mods) {
        if (use == FrameUse::glm || !p.has_vc) {
            std::vector<std::string> vars = p.varying;
            vars.insert(vars.end(), p.global.begin(), p.global.end());
            vary = block(n, false, data, {});
            global = block(n, p.intercept, data, vars);
        } else {
            vary = block(n, p.intercept, data, p.varying);
            global = block(n, false, data, p.global);
            mods = moderators(data, p.moderators);
        }
        sm = smooths(data, p.smooths);
    };
    fill(spec.lambda, f.x1, f.x2, f.smooths_lambda, f.z);
    fill(spec.nu, f.w1, f.w2, f.smooths_nu, f.u);
    if (use == FrameUse::glm) {
        f.x1 = f.x2;
        f.w1 = f.w2;
        f.x2 = block(n, false, data, {});
        f.w2 = block(n, false, data, {});
    }
    return f;
}

std::vector<ColumnSchema> schema_for(const ModelSpec& spec, const std::string& response,
                                     const std::vector<std::string>& categorical) {
    std::vector<ColumnSchema> out;
    out.push_back({response, ColumnKind::count, ColumnRole::response});
    auto role_of = [&](const std::string& v) {
        for (const PredictorSpec* p : {&spec.lambda, &spec.nu}) {
            const bool lam = p == &spec.lambda;
            if (std::find(p->varying.begin(), p->varying.end(), v) != p->varying.end()) return ColumnRole::varying;
            if (std::find(p->global.begin(), p->global.end(), v) != p->global.end()) return ColumnRole::global;
            for (const auto& s : p->smooths) {
                if (s.variable == v) return ColumnRole::smooth;
            }
            for (const auto& m : p->moderators) {
                if (m.variable == v) return lam ? ColumnRole::moderator_lambda : ColumnRole::moderator_nu;
            }
        }
        return ColumnRole::ignored;
    };
    for (const auto& v : spec.variables()) {
        if (v == response) throw SchemaMismatch("response '" + response + "' also appears on the right-hand side");
        const bool cat = std::find(categorical.begin(), categorical.end(), v) != categorical.end();
        out.push_back({v, cat ? ColumnKind::categorical : ColumnKind::numeric, role_of(v)});
    }
    for (const auto& c : categorical) {
        if (std::none_of(out.begin(), out.end(), [&](const ColumnSchema& s) { return s.name == c; })) {
            throw SchemaMismatch("categorical column '" + c + "' is not used by the formula");
        }
    }
    return out;
}

}  // namespace cmpvc
