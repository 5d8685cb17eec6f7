#pragma once

// Complex-valued arithmetic expressions used by the JSON "expr" kinds.
// Grammar: sum := term (('+'|'-') term)*, term := unary (('*'|'/') unary)*,
// unary := ('+'|'-') unary | power, power := atom ('^' unary)?,
// atom := number | name | name '(' args ')' | '(' sum ')'.

#include <cctype>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "qcbvp/core.hpp"

namespace qcbvp {

class Expression {
public:
    using Vars = std::map<std::string, Complex>;

    Expression() = default;
    explicit Expression(const std::string& text) : text_(text) {
        pos_ = 0;
        root_ = parse_sum();
        skip_ws();
        if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    }

    const std::string& text() const { return text_; }
    bool empty() const { return !root_; }

    Complex operator()(const Vars& vars) const {
        if (!root_) return 0.0;
        return root_->eval(vars);
    }

    /// Names referenced as variables, for validation.
    std::vector<std::string> variables() const {
        std::vector<std::string> out;
        if (root_) root_->collect(out);
        return out;
    }

private:
    struct Node {
        virtual ~Node() = default;
        virtual Complex eval(const Vars& v) const = 0;
        virtual void collect(std::vector<std::string>&) const {}
    };
    using Ptr = std::shared_ptr<const Node>;

    struct Number : Node {
        Complex value;
        explicit Number(Complex c) : value(c) {}
        Complex eval(const Vars&) const override { return value; }
    };
    struct Variable : Node {
        std::string name;
        explicit Variable(std::string n) : name(std::move(n)) {}
        Complex eval(const Vars& v) const override {
            auto it = v.find(name);
            if (it == v.end()) throw InputError("expression", "unknown variable '" + name + "'");
            return it->second;
        }
        void collect(std::vector<std::string>& out) const override { out.push_back(name); }
    };
    struct Binary : Node {
        char op;
        Ptr a, b;
        Binary(char o, Ptr x, Ptr y) : op(o), a(std::move(x)), b(std::move(y)) {}
        Complex eval(const Vars& v) const override {
            const Complex x = a->eval(v), y = b->eval(v);
            switch (op) {
                case '+': return x + y;
                case '-': return x - y;
                case '*': return x * y;
                case '/': return x / y;
                default: return power(x, y);
            }
        }
        void collect(std::vector<std::string>& out) const override {
            a->collect(out);
            b->collect(out);
        }
    };
    struct Negate : Node {
        Ptr a;
        explicit Negate(Ptr x) : a(std::move(x)) {}
        Complex eval(const Vars& v) const override { return -a->eval(v); }
        void collect(std::vector<std::string>& out) const override { a->collect(out); }
    };
    struct Call : Node {
        std::function<Complex(const std::vector<Complex>&)> fn;
        std::vector<Ptr> args;
        Complex eval(const Vars& v) const override {
            std::vector<Complex> x;
            x.reserve(args.size());
            for (const auto& a : args) x.push_back(a->eval(v));
            return fn(x);
        }
        void collect(std::vector<std::string>& out) const override {
            for (const auto& a : args) a->collect(out);
        }
    };

    static Complex power(Complex x, Complex y) {
        // integer exponents stay exact on the real axis
        if (y.imag() == 0.0 && y.real() == std::round(y.real()) && std::abs(y.real()) <= 64) {
            int n = static_cast<int>(y.real());
            Complex r = 1.0, b = x;
            unsigned m = static_cast<unsigned>(n < 0 ? -n : n);
            while (m) {
                if (m & 1u) r *= b;
                b *= b;
                m >>= 1u;
            }
            return n < 0 ? 1.0 / r : r;
        }
        if (x.imag() == 0.0 && x.real() > 0 && y.imag() == 0.0) return std::pow(x.real(), y.real());
        return std::pow(x, y);
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw InputError("expression", "in '" + text_ + "' at " + std::to_string(pos_) + ": " + msg);
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    Ptr parse_sum() {
        Ptr lhs = parse_term();
        for (;;) {
            if (accept('+')) lhs = std::make_shared<Binary>('+', lhs, parse_term());
            else if (accept('-')) lhs = std::make_shared<Binary>('-', lhs, parse_term());
            else return lhs;
        }
    }
    Ptr parse_term() {
        Ptr lhs = parse_unary();
        for (;;) {
            if (accept('*')) lhs = std::make_shared<Binary>('*', lhs, parse_unary());
            else if (accept('/')) lhs = std::make_shared<Binary>('/', lhs, parse_unary());
            else return lhs;
        }
    }
    Ptr parse_unary() {
        if (accept('-')) return std::make_shared<Negate>(parse_unary());
        if (accept('+')) return parse_unary();
        return parse_power();
    }
    Ptr parse_power() {
        Ptr base = parse_atom();
        if (accept('^')) return std::make_shared<Binary>('^', base, parse_unary());
        return base;
    }
    Ptr parse_atom() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end");
        const char c = text_[pos_];
        if (accept('(')) {
            Ptr e = parse_sum();
            if (!accept(')')) fail("expected ')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            std::size_t used = 0;
            double v = 0;
            try {
                v = std::stod(text_.substr(pos_), &used);
            } catch (...) {
                fail("bad number");
            }
            pos_ += used;
            return std::make_shared<Number>(Complex(v, 0.0));
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
                ++pos_;
            std::string name = text_.substr(start, pos_ - start);
            if (accept('(')) {
                auto call = std::make_shared<Call>();
                if (!accept(')')) {
                    do {
                        call->args.push_back(parse_sum());
                    } while (accept(','));
                    if (!accept(')')) fail("expected ')'");
                }
                call->fn = function(name, call->args.size());
                return call;
            }
            if (name == "pi") return std::make_shared<Number>(Complex(pi, 0.0));
            if (name == "e") return std::make_shared<Number>(Complex(std::exp(1.0), 0.0));
            if (name == "i" || name == "I") return std::make_shared<Number>(I);
            return std::make_shared<Variable>(name);
        }
        fail("unexpected '" + std::string(1, c) + "'");
    }

    std::function<Complex(const std::vector<Complex>&)> function(const std::string& name,
                                                                 std::size_t nargs) {
        using A = const std::vector<Complex>&;
        auto unary = [&](auto f) -> std::function<Complex(A)> {
            if (nargs != 1) fail(name + " takes one argument");
            return [f](A a) { return Complex(f(a[0])); };
        };
        if (name == "sin") return unary([](Complex x) { return std::sin(x); });
        if (name == "cos") return unary([](Complex x) { return std::cos(x); });
        if (name == "tan") return unary([](Complex x) { return std::tan(x); });
        if (name == "sinh") return unary([](Complex x) { return std::sinh(x); });
        if (name == "cosh") return unary([](Complex x) { return std::cosh(x); });
        if (name == "tanh") return unary([](Complex x) { return std::tanh(x); });
        if (name == "exp") return unary([](Complex x) { return std::exp(x); });
        if (name == "log") return unary([](Complex x) { return std::log(x); });
        if (name == "sqrt") return unary([](Complex x) { return std::sqrt(x); });
        if (name == "abs") return unary([](Complex x) { return Complex(std::abs(x)); });
        if (name == "arg") return unary([](Complex x) { return Complex(std::arg(x)); });
        if (name == "re" || name == "real") return unary([](Complex x) { return Complex(x.real()); });
        if (name == "im" || name == "imag") return unary([](Complex x) { return Complex(x.imag()); });
        if (name == "conj") return unary([](Complex x) { return std::conj(x); });
        if (name == "floor") return unary([](Complex x) { return Complex(std::floor(x.real())); });
        if (name == "sign")
            return unary([](Complex x) {
                return Complex(x.real() > 0 ? 1.0 : (x.real() < 0 ? -1.0 : 0.0));
            });
        if (name == "pow") {
            if (nargs != 2) fail("pow takes two arguments");
            return [](A a) { return power(a[0], a[1]); };
        }
        if (name == "atan2") {
            if (nargs != 2) fail("atan2 takes two arguments");
            return [](A a) { return Complex(std::atan2(a[0].real(), a[1].real())); };
        }
        if (name == "mod") {
            if (nargs != 2) fail("mod takes two arguments");
            return [](A a) {
                double r = std::fmod(a[0].real(), a[1].real());
                if (r < 0) r += a[1].real();
                return Complex(r);
            };
        }
        if (name == "min" || name == "max") {
            if (nargs != 2) fail(name + " takes two arguments");
            bool mx = name == "max";
            return [mx](A a) {
                return Complex(mx ? std::max(a[0].real(), a[1].real())
                                  : std::min(a[0].real(), a[1].real()));
            };
        }
        fail("unknown function '" + name + "'");
    }

    std::string text_;
    std::size_t pos_ = 0;
    Ptr root_;
};

}  // namespace qcbvp
