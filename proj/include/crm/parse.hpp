#pragma once

#include <cctype>
#include <stdexcept>
#include <string>
#include <vector>

#include "term.hpp"

namespace crm {

struct ParseError : std::runtime_error {
    std::size_t position;
    ParseError(const std::string& what, std::size_t pos)
        : std::runtime_error(what + " (at offset " + std::to_string(pos) + ")"),
          position(pos) {}
};

// Recursive-descent reader over one string. Grammar (Prolog-flavoured):
//   term    := variable | constant | integer | functor '(' term {',' term} ')'
//            | '(' term {',' term} ')'                     (anonymous tuple)
//   literal := atomname [ '(' term {',' term} ')' ] | term '=' term
//   clause  := literal [ ':-' literal {',' literal} ] ['.']
// '%' starts a comment running to end of line.
class Parser {
public:
    explicit Parser(std::string text) : text_(std::move(text)) {}

    Term parse_term() {
        Term t = term();
        skip_ws();
        if (!done()) fail("trailing input after term");
        return t;
    }

    Literal parse_literal() {
        Literal l = literal();
        skip_ws();
        if (peek() == '.') { ++pos_; skip_ws(); }
        if (!done()) fail("trailing input after literal");
        return l;
    }

    // Returns {head, body}. A fact "head." has an empty body.
    std::pair<Literal, std::vector<Literal>> parse_clause() {
        Literal head = literal();
        if (head.is_equality()) fail("equality cannot head a clause");
        std::vector<Literal> body;
        skip_ws();
        if (peek() == ':') {
            expect(':'); expect('-');
            for (;;) {
                body.push_back(literal());
                skip_ws();
                if (peek() == ',') { ++pos_; continue; }
                break;
            }
        }
        skip_ws();
        if (peek() == '.') { ++pos_; skip_ws(); }
        if (!done()) fail("trailing input after clause");
        for (const Literal& l : body)
            if (l.predicate == head.predicate && l.arity() == head.arity())
                fail("head predicate must not occur in the body");
        return {std::move(head), std::move(body)};
    }

private:
    std::string text_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) { throw ParseError(msg, pos_); }

    bool done() const { return pos_ >= text_.size(); }
    char peek() const { return done() ? '\0' : text_[pos_]; }

    void skip_ws() {
        while (!done()) {
            char c = text_[pos_];
            if (c == '%') {
                while (!done() && text_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    void expect(char c) {
        skip_ws();
        if (peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    static bool is_name_char(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    }

    std::string name_token() {
        skip_ws();
        std::size_t start = pos_;
        while (!done() && is_name_char(text_[pos_])) ++pos_;
        if (pos_ == start) fail("expected a name");
        return text_.substr(start, pos_ - start);
    }

    std::vector<Term> arg_list() {
        std::vector<Term> args;
        expect('(');
        skip_ws();
        if (peek() == ')') fail("empty argument list");
        for (;;) {
            args.push_back(term());
            skip_ws();
            if (peek() == ',') { ++pos_; continue; }
            break;
        }
        expect(')');
        return args;
    }

    Term term() {
        skip_ws();
        char c = peek();
        if (c == '(') return Term::tuple(arg_list());
        if (!is_name_char(c)) fail("expected a term");
        std::string n = name_token();
        skip_ws();
        if (peek() == '(') {
            if (std::isupper(static_cast<unsigned char>(n[0])) || n[0] == '_')
                fail("variable cannot be a functor");
            return Term::cmp(n, arg_list());
        }
        if (std::isupper(static_cast<unsigned char>(n[0])) || n[0] == '_')
            return Term::var(n);
        return Term::cst(n);
    }

    Literal literal() {
        skip_ws();
        // A literal is either pred(args) / pred, or an infix equality between terms.
        // Parse a term first; promote to a predicate application when it is not
        // followed by '='.
        Term first = term();
        skip_ws();
        if (peek() == '=') {
            ++pos_;
            Term rhs = term();
            return Literal("=", {std::move(first), std::move(rhs)});
        }
        if (first.is_compound() && !first.name.empty())
            return Literal(first.name, std::move(first.args));
        if (first.is_const())
            return Literal(first.name, {});
        fail("expected a literal");
    }
};

inline Term parse_term(const std::string& s) { return Parser(s).parse_term(); }
inline Literal parse_literal(const std::string& s) { return Parser(s).parse_literal(); }

} // namespace crm
