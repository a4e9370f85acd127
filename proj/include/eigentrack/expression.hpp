#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>

namespace eigentrack {

/// Immutable arithmetic expression over the parameter variables mu1..muD.
///
/// Grammar (whitespace ignored):
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*
///   unary   := ('+' | '-') unary | power
///   power   := primary ('^' exponent)?
///   exponent:= ['+' | '-'] integer | '(' ['+' | '-'] integer ')'
///   primary := number | 'mu' index | '(' expr ')'
///
/// Unary minus binds looser than '^', so -mu1^2 == -(mu1^2).
class Expression {
public:
    struct Node;

    Expression();

    /// Parses `text`; `dim` bounds the admissible variable indices.
    static Expression parse(std::string_view text, int dim);

    /// Constant expression.
    static Expression constant(double value);

    /// Evaluates at physical coordinates `mu`. Throws DomainError on division by zero.
    [[nodiscard]] double evaluate(std::span<const double> mu) const;

    /// Fully parenthesized canonical rendering; equal for syntactically identical trees.
    [[nodiscard]] std::string canonical() const;

    /// Source text as given to parse() (or the literal for constant()).
    [[nodiscard]] const std::string& source() const { return source_; }

private:
    std::shared_ptr<const Node> root_;
    std::string source_;
};

} // namespace eigentrack
