#include "finsler/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <vector>

namespace finsler::expr {

using jets::Jet;

// --- tokenizer -----------------------------------------------------------------

namespace {

struct Token {
    enum class Kind { Number, Ident, Op, LParen, RParen, End };
    Kind kind;
    double number = 0.0;
    std::string text;
    char op = 0;
    std::size_t offset = 0;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        Token t;
        t.offset = pos_;
        if (pos_ >= src_.size()) {
            t.kind = Token::Kind::End;
            return t;
        }
        char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t start = pos_;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            if (pos_ < src_.size() && src_[pos_] == '.') {
                ++pos_;
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            }
            if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
                std::size_t mark = pos_++;
                if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
                if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
                } else {
                    pos_ = mark;  // 'e' begins an identifier, not an exponent
                }
            }
            t.kind = Token::Kind::Number;
            t.text = std::string(src_.substr(start, pos_ - start));
            t.number = std::strtod(t.text.c_str(), nullptr);
            return t;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                ++pos_;
            t.kind = Token::Kind::Ident;
            t.text = std::string(src_.substr(start, pos_ - start));
            return t;
        }
        ++pos_;
        switch (c) {
            case '(': t.kind = Token::Kind::LParen; return t;
            case ')': t.kind = Token::Kind::RParen; return t;
            case '+': case '-': case '*': case '/': case '^':
                t.kind = Token::Kind::Op;
                t.op = c;
                return t;
        }
        throw SyntaxError(std::string("unexpected character '") + c + "'", t.offset);
    }

private:
    std::string_view src_;
    std::size_t pos_ = 0;
};

bool is_function(const std::string& name, UnaryFn* fn) {
    static const std::map<std::string, UnaryFn> table = {
        {"sin", UnaryFn::Sin}, {"cos", UnaryFn::Cos},  {"exp", UnaryFn::Exp},
        {"ln", UnaryFn::Ln},   {"sqrt", UnaryFn::Sqrt}, {"cbrt", UnaryFn::Cbrt},
        {"abs", UnaryFn::Abs},
    };
    auto it = table.find(name);
    if (it == table.end()) return false;
    if (fn) *fn = it->second;
    return true;
}

bool is_constant_name(const std::string& name) {
    return name.size() == 2 && name[0] == 'k' && name[1] >= '1' && name[1] <= '9';
}

class Parser {
public:
    explicit Parser(std::string_view src) : lexer_(src) { advance(); }

    NodePtr parse_all() {
        NodePtr e = expression();
        if (tok_.kind != Token::Kind::End) throw SyntaxError("trailing input", tok_.offset);
        return e;
    }

private:
    void advance() { tok_ = lexer_.next(); }

    NodePtr expression() {
        NodePtr lhs = term();
        while (tok_.kind == Token::Kind::Op && (tok_.op == '+' || tok_.op == '-')) {
            char op = tok_.op;
            advance();
            lhs = binary(op == '+' ? BinOp::Add : BinOp::Sub, lhs, term());
        }
        return lhs;
    }

    NodePtr term() {
        NodePtr lhs = unary();
        while (tok_.kind == Token::Kind::Op && (tok_.op == '*' || tok_.op == '/')) {
            char op = tok_.op;
            advance();
            lhs = binary(op == '*' ? BinOp::Mul : BinOp::Div, lhs, unary());
        }
        return lhs;
    }

    NodePtr unary() {
        if (tok_.kind == Token::Kind::Op && tok_.op == '-') {
            advance();
            auto n = std::make_shared<Node>();
            n->kind = Node::Kind::Unary;
            n->fn = UnaryFn::Neg;
            n->a = unary();
            return n;
        }
        if (tok_.kind == Token::Kind::Op && tok_.op == '+') {
            advance();
            return unary();
        }
        return power();
    }

    NodePtr power() {
        NodePtr base = atom();
        if (tok_.kind == Token::Kind::Op && tok_.op == '^') {
            advance();
            return binary(BinOp::Pow, base, unary());  // right-associative
        }
        return base;
    }

    NodePtr atom() {
        if (tok_.kind == Token::Kind::Number) {
            auto n = std::make_shared<Node>();
            n->kind = Node::Kind::Number;
            n->number = tok_.number;
            advance();
            return n;
        }
        if (tok_.kind == Token::Kind::Ident) {
            std::string name = tok_.text;
            std::size_t off = tok_.offset;
            advance();
            UnaryFn fn;
            if (is_function(name, &fn)) {
                if (tok_.kind != Token::Kind::LParen)
                    throw SyntaxError("function arguments require parentheses", tok_.offset);
                advance();
                NodePtr arg = expression();
                if (tok_.kind != Token::Kind::RParen)
                    throw SyntaxError("expected ')'", tok_.offset);
                advance();
                auto n = std::make_shared<Node>();
                n->kind = Node::Kind::Unary;
                n->fn = fn;
                n->a = arg;
                return n;
            }
            if (name == "x1" || name == "x2") {
                auto n = std::make_shared<Node>();
                n->kind = Node::Kind::Var;
                n->var = (name == "x1") ? 0 : 1;
                return n;
            }
            if (is_constant_name(name)) {
                auto n = std::make_shared<Node>();
                n->kind = Node::Kind::Const;
                n->cname = name;
                return n;
            }
            throw UnknownIdentifier(name, off);
        }
        if (tok_.kind == Token::Kind::LParen) {
            advance();
            NodePtr e = expression();
            if (tok_.kind != Token::Kind::RParen) throw SyntaxError("expected ')'", tok_.offset);
            advance();
            return e;
        }
        throw SyntaxError("expected a value", tok_.offset);
    }

    static NodePtr binary(BinOp op, NodePtr a, NodePtr b) {
        auto n = std::make_shared<Node>();
        n->kind = Node::Kind::Binary;
        n->op = op;
        n->a = std::move(a);
        n->b = std::move(b);
        return n;
    }

    Lexer lexer_;
    Token tok_;
};

}  // namespace

Expr Expr::parse(std::string_view source) {
    if (source.empty()) throw SyntaxError("empty expression", 0);
    return Expr(Parser(source).parse_all());
}

// --- printing ------------------------------------------------------------------

namespace {

// shortest decimal rendering that parses back to the same double
std::string render_number(double v) {
    char buf[40];
    if (v == static_cast<long long>(v) && std::fabs(v) < 1e15) {
        std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(v));
        return buf;
    }
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    return buf;
}

const char* fn_name(UnaryFn fn) {
    switch (fn) {
        case UnaryFn::Sin: return "sin";
        case UnaryFn::Cos: return "cos";
        case UnaryFn::Exp: return "exp";
        case UnaryFn::Ln: return "ln";
        case UnaryFn::Sqrt: return "sqrt";
        case UnaryFn::Cbrt: return "cbrt";
        case UnaryFn::Abs: return "abs";
        case UnaryFn::Neg: return "-";
    }
    return "?";
}

// precedence: additive 1, multiplicative 2, unary minus 3, power 4, atom 5
int node_prec(const Node& n) {
    switch (n.kind) {
        case Node::Kind::Number: return n.number < 0 ? 3 : 5;
        case Node::Kind::Var:
        case Node::Kind::Const: return 5;
        case Node::Kind::Unary: return n.fn == UnaryFn::Neg ? 3 : 5;
        case Node::Kind::Binary:
            switch (n.op) {
                case BinOp::Add: case BinOp::Sub: return 1;
                case BinOp::Mul: case BinOp::Div: return 2;
                case BinOp::Pow: return 4;
            }
    }
    return 5;
}

void print_node(const Node& n, int min_prec, std::string& out) {
    bool parens = node_prec(n) < min_prec;
    if (parens) out += '(';
    switch (n.kind) {
        case Node::Kind::Number: out += render_number(n.number); break;
        case Node::Kind::Var: out += (n.var == 0 ? "x1" : "x2"); break;
        case Node::Kind::Const: out += n.cname; break;
        case Node::Kind::Unary:
            if (n.fn == UnaryFn::Neg) {
                out += '-';
                print_node(*n.a, 3, out);
            } else {
                out += fn_name(n.fn);
                out += '(';
                print_node(*n.a, 0, out);
                out += ')';
            }
            break;
        case Node::Kind::Binary: {
            switch (n.op) {
                case BinOp::Add:
                    print_node(*n.a, 1, out); out += " + "; print_node(*n.b, 2, out); break;
                case BinOp::Sub:
                    print_node(*n.a, 1, out); out += " - "; print_node(*n.b, 2, out); break;
                case BinOp::Mul:
                    print_node(*n.a, 2, out); out += '*'; print_node(*n.b, 3, out); break;
                case BinOp::Div:
                    print_node(*n.a, 2, out); out += '/'; print_node(*n.b, 3, out); break;
                case BinOp::Pow:
                    print_node(*n.a, 5, out); out += '^'; print_node(*n.b, 3, out); break;
            }
            break;
        }
    }
    if (parens) out += ')';
}

}  // namespace

std::string Expr::str() const {
    std::string out;
    if (root_) print_node(*root_, 0, out);
    return out;
}

// --- evaluation ----------------------------------------------------------------

namespace {

bool integral_exponent(double v, long long* n) {
    if (std::floor(v) != v || std::fabs(v) > 1e9) return false;
    *n = static_cast<long long>(v);
    return true;
}

bool jet_is_constant(const Jet& j) {
    auto c = j.coeffs();
    for (std::size_t i = 1; i < c.size(); ++i)
        if (c[i] != 0.0) return false;
    return true;
}

Jet eval_node(const Node& n, const ConstEnv& env, const Jet& x1, const Jet& x2) {
    switch (n.kind) {
        case Node::Kind::Number: return Jet::constant(n.number, x1.order());
        case Node::Kind::Var: return n.var == 0 ? x1 : x2;
        case Node::Kind::Const: {
            auto it = env.find(n.cname);
            if (it == env.end()) throw UnboundConstant("constant '" + n.cname + "' is not bound");
            return Jet::constant(it->second, x1.order());
        }
        case Node::Kind::Unary: {
            if (n.fn == UnaryFn::Neg) return -eval_node(*n.a, env, x1, x2);
            Jet a = eval_node(*n.a, env, x1, x2);
            switch (n.fn) {
                case UnaryFn::Sin: return jets::sin(a);
                case UnaryFn::Cos: return jets::cos(a);
                case UnaryFn::Exp: return jets::exp(a);
                case UnaryFn::Ln: return jets::ln(a);
                case UnaryFn::Sqrt: return jets::sqrt(a);
                case UnaryFn::Cbrt: return jets::cbrt(a);
                case UnaryFn::Abs: return jets::abs(a);
                case UnaryFn::Neg: break;
            }
            throw DomainError("unhandled unary function");
        }
        case Node::Kind::Binary: {
            Jet a = eval_node(*n.a, env, x1, x2);
            if (n.op == BinOp::Pow) {
                long long k;
                if (n.b->kind == Node::Kind::Number && integral_exponent(n.b->number, &k))
                    return jets::pow_int(a, k);
                Jet b = eval_node(*n.b, env, x1, x2);
                if (jet_is_constant(b) && integral_exponent(b.value(), &k))
                    return jets::pow_int(a, k);
                // general power needs a positive base
                return jets::exp(b * jets::ln(a));
            }
            Jet b = eval_node(*n.b, env, x1, x2);
            switch (n.op) {
                case BinOp::Add: return a + b;
                case BinOp::Sub: return a - b;
                case BinOp::Mul: return a * b;
                case BinOp::Div: return a / b;
                case BinOp::Pow: break;
            }
            throw DomainError("unhandled binary op");
        }
    }
    throw DomainError("unhandled node kind");
}

double eval_scalar_node(const Node& n, const ConstEnv& env, double x1, double x2) {
    switch (n.kind) {
        case Node::Kind::Number: return n.number;
        case Node::Kind::Var: return n.var == 0 ? x1 : x2;
        case Node::Kind::Const: {
            auto it = env.find(n.cname);
            if (it == env.end()) throw UnboundConstant("constant '" + n.cname + "' is not bound");
            return it->second;
        }
        case Node::Kind::Unary: {
            double a = eval_scalar_node(*n.a, env, x1, x2);
            switch (n.fn) {
                case UnaryFn::Neg: return -a;
                case UnaryFn::Sin: return std::sin(a);
                case UnaryFn::Cos: return std::cos(a);
                case UnaryFn::Exp: return std::exp(a);
                case UnaryFn::Ln:
                    if (a <= 0.0) throw DomainError("ln of a non-positive value");
                    return std::log(a);
                case UnaryFn::Sqrt:
                    if (a <= 0.0) throw DomainError("sqrt of a non-positive value");
                    return std::sqrt(a);
                case UnaryFn::Cbrt: return std::cbrt(a);
                case UnaryFn::Abs: return std::fabs(a);
            }
            throw DomainError("unhandled unary function");
        }
        case Node::Kind::Binary: {
            double a = eval_scalar_node(*n.a, env, x1, x2);
            if (n.op == BinOp::Pow) {
                double b = eval_scalar_node(*n.b, env, x1, x2);
                long long k;
                if (integral_exponent(b, &k)) return std::pow(a, static_cast<double>(k));
                if (a <= 0.0) throw DomainError("pow with non-integer exponent requires a positive base");
                return std::pow(a, b);
            }
            double b = eval_scalar_node(*n.b, env, x1, x2);
            switch (n.op) {
                case BinOp::Add: return a + b;
                case BinOp::Sub: return a - b;
                case BinOp::Mul: return a * b;
                case BinOp::Div:
                    if (b == 0.0) throw DivisionByZeroValue("scalar division by zero");
                    return a / b;
                case BinOp::Pow: break;
            }
            throw DomainError("unhandled binary op");
        }
    }
    throw DomainError("unhandled node kind");
}

bool nodes_identical(const Node& a, const Node& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case Node::Kind::Number: return a.number == b.number;
        case Node::Kind::Var: return a.var == b.var;
        case Node::Kind::Const: return a.cname == b.cname;
        case Node::Kind::Unary: return a.fn == b.fn && nodes_identical(*a.a, *b.a);
        case Node::Kind::Binary:
            return a.op == b.op && nodes_identical(*a.a, *b.a) && nodes_identical(*a.b, *b.b);
    }
    return false;
}

bool node_uses_var(const Node& n, int var) {
    switch (n.kind) {
        case Node::Kind::Var: return n.var == var;
        case Node::Kind::Unary: return node_uses_var(*n.a, var);
        case Node::Kind::Binary: return node_uses_var(*n.a, var) || node_uses_var(*n.b, var);
        default: return false;
    }
}

}  // namespace

Jet Expr::eval(const ConstEnv& env, const Jet& x1, const Jet& x2) const {
    if (!root_) throw DomainError("evaluating an empty expression");
    if (x1.order() != x2.order()) throw OrderMismatch("x1 and x2 jets must share one order");
    return eval_node(*root_, env, x1, x2);
}

double Expr::eval_scalar(const ConstEnv& env, double x1, double x2) const {
    if (!root_) throw DomainError("evaluating an empty expression");
    return eval_scalar_node(*root_, env, x1, x2);
}

bool Expr::identical(const Expr& other) const {
    if (!root_ || !other.root_) return root_ == other.root_;
    return nodes_identical(*root_, *other.root_);
}

bool Expr::uses_var(int var) const { return root_ && node_uses_var(*root_, var); }

}  // namespace finsler::expr
