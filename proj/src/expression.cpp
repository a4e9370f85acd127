#include "eigentrack/expression.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>
#include <variant>

#include "eigentrack/error.hpp"

namespace eigentrack {

struct Expression::Node {
    struct Literal {
        double value;
    };
    struct Variable {
        int index; // zero-based
    };
    struct Negate {
        std::shared_ptr<const Node> operand;
    };
    struct Binary {
        char op;
        std::shared_ptr<const Node> lhs, rhs;
    };
    struct Power {
        std::shared_ptr<const Node> base;
        int exponent;
    };
    std::variant<Literal, Variable, Negate, Binary, Power> data;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;

template <typename T>
NodePtr make(T payload)
{
    return std::make_shared<const Expression::Node>(Expression::Node{std::move(payload)});
}

class Parser {
public:
    Parser(std::string_view text, int dim) : text_(text), dim_(dim) {}

    NodePtr run()
    {
        NodePtr node = expr();
        skip();
        if (pos_ != text_.size()) {
            fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
        }
        return node;
    }

private:
    std::string_view text_;
    int dim_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& what) const
    {
        std::ostringstream os;
        os << "expression \"" << text_ << "\": " << what << " at offset " << pos_;
        throw ParseError(os.str());
    }

    void skip()
    {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
    }

    bool accept(char c)
    {
        skip();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodePtr expr()
    {
        NodePtr lhs = term();
        for (;;) {
            if (accept('+')) {
                lhs = make(Expression::Node::Binary{'+', lhs, term()});
            } else if (accept('-')) {
                lhs = make(Expression::Node::Binary{'-', lhs, term()});
            } else {
                return lhs;
            }
        }
    }

    NodePtr term()
    {
        NodePtr lhs = unary();
        for (;;) {
            if (accept('*')) {
                lhs = make(Expression::Node::Binary{'*', lhs, unary()});
            } else if (accept('/')) {
                lhs = make(Expression::Node::Binary{'/', lhs, unary()});
            } else {
                return lhs;
            }
        }
    }

    NodePtr unary()
    {
        if (accept('-')) {
            return make(Expression::Node::Negate{unary()});
        }
        if (accept('+')) {
            return unary();
        }
        return power();
    }

    NodePtr power()
    {
        NodePtr base = primary();
        if (accept('^')) {
            bool parens = accept('(');
            int sign = 1;
            if (accept('-')) {
                sign = -1;
            } else {
                accept('+');
            }
            int exponent = integer();
            if (parens && !accept(')')) {
                fail("expected ')' after exponent");
            }
            return make(Expression::Node::Power{base, sign * exponent});
        }
        return base;
    }

    int integer()
    {
        skip();
        std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
        if (start == pos_) {
            fail("expected integer exponent");
        }
        int value = 0;
        auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, value);
        if (ec != std::errc{}) {
            fail("exponent out of range");
        }
        return value;
    }

    NodePtr primary()
    {
        skip();
        if (accept('(')) {
            NodePtr inner = expr();
            if (!accept(')')) {
                fail("expected ')'");
            }
            return inner;
        }
        if (pos_ + 2 <= text_.size() && text_.substr(pos_, 2) == "mu") {
            pos_ += 2;
            std::size_t start = pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                ++pos_;
            }
            if (start == pos_) {
                fail("variable needs an index, e.g. mu1");
            }
            int index = 0;
            std::from_chars(text_.data() + start, text_.data() + pos_, index);
            if (index < 1 || index > dim_) {
                fail("variable mu" + std::to_string(index) + " outside 1.." + std::to_string(dim_));
            }
            return make(Expression::Node::Variable{index - 1});
        }
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
                text_[pos_] == 'e' || text_[pos_] == 'E' ||
                ((text_[pos_] == '-' || text_[pos_] == '+') && pos_ > start &&
                 (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E')))) {
            ++pos_;
        }
        if (start == pos_) {
            fail("expected number, variable or '('");
        }
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, value);
        if (ec != std::errc{} || ptr != text_.data() + pos_) {
            pos_ = start;
            fail("malformed number");
        }
        return make(Expression::Node::Literal{value});
    }
};

double eval(const Expression::Node& node, std::span<const double> mu)
{
    return std::visit(
        [&](const auto& n) -> double {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Expression::Node::Literal>) {
                return n.value;
            } else if constexpr (std::is_same_v<T, Expression::Node::Variable>) {
                if (static_cast<std::size_t>(n.index) >= mu.size()) {
                    throw DomainError("expression references mu" + std::to_string(n.index + 1) +
                                      " but only " + std::to_string(mu.size()) +
                                      " coordinates were given");
                }
                return mu[static_cast<std::size_t>(n.index)];
            } else if constexpr (std::is_same_v<T, Expression::Node::Negate>) {
                return -eval(*n.operand, mu);
            } else if constexpr (std::is_same_v<T, Expression::Node::Binary>) {
                double a = eval(*n.lhs, mu);
                double b = eval(*n.rhs, mu);
                switch (n.op) {
                case '+':
                    return a + b;
                case '-':
                    return a - b;
                case '*':
                    return a * b;
                default:
                    if (b == 0.0) {
                        throw DomainError("division by zero in coefficient expression");
                    }
                    return a / b;
                }
            } else {
                double base = eval(*n.base, mu);
                if (n.exponent < 0 && base == 0.0) {
                    throw DomainError("division by zero in coefficient expression");
                }
                double result = 1.0;
                int e = n.exponent < 0 ? -n.exponent : n.exponent;
                for (int i = 0; i < e; ++i) {
                    result *= base;
                }
                return n.exponent < 0 ? 1.0 / result : result;
            }
        },
        node.data);
}

void render(const Expression::Node& node, std::ostream& os)
{
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Expression::Node::Literal>) {
                char buf[32];
                auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, n.value);
                os << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
            } else if constexpr (std::is_same_v<T, Expression::Node::Variable>) {
                os << "mu" << n.index + 1;
            } else if constexpr (std::is_same_v<T, Expression::Node::Negate>) {
                os << "(-";
                render(*n.operand, os);
                os << ')';
            } else if constexpr (std::is_same_v<T, Expression::Node::Binary>) {
                os << '(';
                render(*n.lhs, os);
                os << n.op;
                render(*n.rhs, os);
                os << ')';
            } else {
                os << '(';
                render(*n.base, os);
                os << '^' << n.exponent << ')';
            }
        },
        node.data);
}

} // namespace

Expression::Expression() : root_(make(Node::Literal{0.0})), source_("0") {}

Expression Expression::parse(std::string_view text, int dim)
{
    Expression e;
    e.root_ = Parser(text, dim).run();
    e.source_ = std::string(text);
    return e;
}

Expression Expression::constant(double value)
{
    Expression e;
    e.root_ = make(Node::Literal{value});
    e.source_ = e.canonical();
    return e;
}

double Expression::evaluate(std::span<const double> mu) const
{
    return eval(*root_, mu);
}

std::string Expression::canonical() const
{
    std::ostringstream os;
    render(*root_, os);
    return os.str();
}

} // namespace eigentrack
