#pragma once

// Parser and jet evaluator for scalar fields over the base coordinates
// (x1, x2). Grammar: numeric literals, variables x1/x2, named constants
// k1..k9, functions sin cos exp ln sqrt cbrt abs, operators + - * / ^ with
// ^ right-associative and binding tighter than unary minus.

#include <map>
#include <memory>
#include <string>
#include <string_view>

#include "finsler/jet.hpp"

namespace finsler::expr {

using ConstEnv = std::map<std::string, double>;

enum class UnaryFn { Neg, Sin, Cos, Exp, Ln, Sqrt, Cbrt, Abs };
enum class BinOp { Add, Sub, Mul, Div, Pow };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    enum class Kind { Number, Var, Const, Unary, Binary };
    Kind kind;
    double number = 0.0;   // Kind::Number
    int var = 0;           // Kind::Var: 0 = x1, 1 = x2
    std::string cname;     // Kind::Const
    UnaryFn fn{};          // Kind::Unary
    BinOp op{};            // Kind::Binary
    NodePtr a, b;
};

class Expr {
public:
    Expr() = default;

    // throws SyntaxError (with byte offset) and UnknownIdentifier
    static Expr parse(std::string_view source);

    bool empty() const { return root_ == nullptr; }

    // minimal-parenthesis rendering; re-parsing yields a structurally identical tree
    std::string str() const;

    // evaluate onto jets; x1/x2 may be arbitrary jets of equal order
    jets::Jet eval(const ConstEnv& env, const jets::Jet& x1, const jets::Jet& x2) const;

    // plain scalar evaluation (independent of the jet path)
    double eval_scalar(const ConstEnv& env, double x1, double x2) const;

    bool identical(const Expr& other) const;
    bool uses_var(int var) const;

    const NodePtr& root() const { return root_; }

private:
    explicit Expr(NodePtr root) : root_(std::move(root)) {}
    NodePtr root_;
};

}  // namespace finsler::expr
