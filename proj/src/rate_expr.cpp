#include "mfldp/rate_expr.hpp"

#include "mfldp/errors.hpp"
#include "format.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>

namespace mfldp {

struct RateExpr::Node {
  enum class Kind { Number, Variable, Neg, Add, Sub, Mul, Div, Pow, Exp, Log, Min, Max };
  Kind kind = Kind::Number;
  double value = 0.0;  // literal value, or the folded exponent for Pow
  int index = -1;
  std::vector<std::shared_ptr<const Node>> children;
};

namespace {

using Node = RateExpr::Node;
using NodePtr = std::shared_ptr<const Node>;

NodePtr make_node(Node::Kind kind, std::vector<NodePtr> children = {}, double value = 0.0, int index = -1) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->value = value;
  n->index = index;
  n->children = std::move(children);
  return n;
}

bool references_mu(const Node& n) {
  if (n.kind == Node::Kind::Variable) {
    return true;
  }
  return std::any_of(n.children.begin(), n.children.end(), [](const NodePtr& c) { return references_mu(*c); });
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  NodePtr parse_all() {
    skip_space();
    if (pos_ == text_.size()) {
      throw ParseError("empty expression", pos_);
    }
    auto e = parse_expr();
    skip_space();
    if (pos_ != text_.size()) {
      throw ParseError("unexpected character '" + std::string(1, text_[pos_]) + "'", pos_);
    }
    return e;
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      throw ParseError(std::string("expected '") + c + "'", pos_);
    }
  }

  NodePtr parse_expr() {
    auto lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = make_node(Node::Kind::Add, {lhs, parse_term()});
      } else if (accept('-')) {
        lhs = make_node(Node::Kind::Sub, {lhs, parse_term()});
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_term() {
    auto lhs = parse_power();
    for (;;) {
      if (accept('*')) {
        lhs = make_node(Node::Kind::Mul, {lhs, parse_power()});
      } else if (accept('/')) {
        lhs = make_node(Node::Kind::Div, {lhs, parse_power()});
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_power() {
    auto base = parse_unary();
    skip_space();
    const std::size_t caret = pos_;
    if (!accept('^')) {
      return base;
    }
    auto exponent = parse_power();
    if (references_mu(*exponent)) {
      throw ParseError("exponent must be constant", caret);
    }
    double folded = 0.0;
    try {
      folded = RateExpr::parse(print_subtree(*exponent)).evaluate({});
    } catch (const DomainError&) {
      throw ParseError("exponent evaluates outside its domain", caret);
    }
    return make_node(Node::Kind::Pow, {base, exponent}, folded);
  }

  NodePtr parse_unary() {
    if (accept('-')) {
      return make_node(Node::Kind::Neg, {parse_unary()});
    }
    if (accept('+')) {
      return parse_unary();
    }
    return parse_primary();
  }

  NodePtr parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) {
      throw ParseError("unexpected end of expression", pos_);
    }
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      return parse_number();
    }
    if (c == '(') {
      ++pos_;
      auto inner = parse_expr();
      expect(')');
      return inner;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
      }
      const std::string_view word = text_.substr(start, pos_ - start);
      if (word == "mu") {
        expect('[');
        skip_space();
        const std::size_t idx_start = pos_;
        int index = 0;
        auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), index);
        if (ec != std::errc() || index < 0) {
          throw ParseError("expected nonnegative state index", idx_start);
        }
        pos_ = static_cast<std::size_t>(ptr - text_.data());
        expect(']');
        return make_node(Node::Kind::Variable, {}, 0.0, index);
      }
      Node::Kind kind{};
      int arity = 1;
      if (word == "exp") {
        kind = Node::Kind::Exp;
      } else if (word == "log") {
        kind = Node::Kind::Log;
      } else if (word == "min") {
        kind = Node::Kind::Min;
        arity = 2;
      } else if (word == "max") {
        kind = Node::Kind::Max;
        arity = 2;
      } else {
        throw ParseError("unknown identifier '" + std::string(word) + "'", start);
      }
      expect('(');
      std::vector<NodePtr> args{parse_expr()};
      for (int k = 1; k < arity; ++k) {
        expect(',');
        args.push_back(parse_expr());
      }
      expect(')');
      return make_node(kind, std::move(args));
    }
    throw ParseError("unexpected character '" + std::string(1, c) + "'", pos_);
  }

  NodePtr parse_number() {
    const std::size_t start = pos_;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), value,
                                     std::chars_format::general);
    if (ec != std::errc() || !std::isfinite(value)) {
      throw ParseError("malformed number", start);
    }
    pos_ = static_cast<std::size_t>(ptr - text_.data());
    return make_node(Node::Kind::Number, {}, value);
  }

 public:
  static std::string print_subtree(const Node& n) {
    switch (n.kind) {
      case Node::Kind::Number:
        return n.value < 0.0 ? "(-" + detail::format_double(-n.value) + ")" : detail::format_double(n.value);
      case Node::Kind::Variable:
        return "mu[" + std::to_string(n.index) + "]";
      case Node::Kind::Neg:
        return "(-" + print_subtree(*n.children[0]) + ")";
      case Node::Kind::Add:
        return "(" + print_subtree(*n.children[0]) + " + " + print_subtree(*n.children[1]) + ")";
      case Node::Kind::Sub:
        return "(" + print_subtree(*n.children[0]) + " - " + print_subtree(*n.children[1]) + ")";
      case Node::Kind::Mul:
        return "(" + print_subtree(*n.children[0]) + " * " + print_subtree(*n.children[1]) + ")";
      case Node::Kind::Div:
        return "(" + print_subtree(*n.children[0]) + " / " + print_subtree(*n.children[1]) + ")";
      case Node::Kind::Pow:
        return "(" + print_subtree(*n.children[0]) + " ^ " + print_subtree(*n.children[1]) + ")";
      case Node::Kind::Exp:
        return "exp(" + print_subtree(*n.children[0]) + ")";
      case Node::Kind::Log:
        return "log(" + print_subtree(*n.children[0]) + ")";
      case Node::Kind::Min:
        return "min(" + print_subtree(*n.children[0]) + ", " + print_subtree(*n.children[1]) + ")";
      case Node::Kind::Max:
        return "max(" + print_subtree(*n.children[0]) + ", " + print_subtree(*n.children[1]) + ")";
    }
    return {};
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

constexpr int kInlineStack = 32;

}  // namespace

RateExpr::RateExpr() : RateExpr(make_node(Node::Kind::Number, {}, 0.0)) {}

RateExpr::RateExpr(std::shared_ptr<const Node> root) : root_(std::move(root)) { compile(); }

RateExpr RateExpr::parse(std::string_view text) { return RateExpr(Parser(text).parse_all()); }

RateExpr RateExpr::constant(double value) { return RateExpr(make_node(Node::Kind::Number, {}, value)); }

std::string RateExpr::print() const { return Parser::print_subtree(*root_); }

void RateExpr::compile() {
  program_.clear();
  max_index_ = -1;
  int depth = 0;
  int max_depth = 0;
  auto emit = [&](auto&& self, const Node& n) -> void {
    switch (n.kind) {
      case Node::Kind::Number:
        program_.push_back({Op::Push, -1, n.value});
        max_depth = std::max(max_depth, ++depth);
        return;
      case Node::Kind::Variable:
        program_.push_back({Op::Load, n.index, 0.0});
        max_index_ = std::max(max_index_, n.index);
        max_depth = std::max(max_depth, ++depth);
        return;
      case Node::Kind::Pow:
        // The exponent is folded at parse time; only the base is evaluated.
        self(self, *n.children[0]);
        program_.push_back({Op::Pow, -1, n.value});
        return;
      default:
        break;
    }
    for (const auto& c : n.children) {
      self(self, *c);
    }
    Op op{};
    switch (n.kind) {
      case Node::Kind::Neg: op = Op::Neg; break;
      case Node::Kind::Add: op = Op::Add; break;
      case Node::Kind::Sub: op = Op::Sub; break;
      case Node::Kind::Mul: op = Op::Mul; break;
      case Node::Kind::Div: op = Op::Div; break;
      case Node::Kind::Exp: op = Op::Exp; break;
      case Node::Kind::Log: op = Op::Log; break;
      case Node::Kind::Min: op = Op::Min; break;
      case Node::Kind::Max: op = Op::Max; break;
      default: break;
    }
    depth -= static_cast<int>(n.children.size()) - 1;
    program_.push_back({op, -1, 0.0});
  };
  emit(emit, *root_);
  stack_depth_ = max_depth;
}

double RateExpr::evaluate(std::span<const double> mu) const {
  std::array<double, kInlineStack> inline_stack{};
  std::vector<double> heap_stack;
  double* stack = inline_stack.data();
  if (stack_depth_ > kInlineStack) {
    heap_stack.resize(static_cast<std::size_t>(stack_depth_));
    stack = heap_stack.data();
  }
  int top = -1;
  for (const Instr& in : program_) {
    switch (in.op) {
      case Op::Push:
        stack[++top] = in.value;
        break;
      case Op::Load:
        if (static_cast<std::size_t>(in.index) >= mu.size()) {
          throw DomainError("mu[" + std::to_string(in.index) + "] referenced but measure has " +
                            std::to_string(mu.size()) + " states");
        }
        stack[++top] = mu[static_cast<std::size_t>(in.index)];
        break;
      case Op::Neg:
        stack[top] = -stack[top];
        break;
      case Op::Add:
        stack[top - 1] += stack[top];
        --top;
        break;
      case Op::Sub:
        stack[top - 1] -= stack[top];
        --top;
        break;
      case Op::Mul:
        stack[top - 1] *= stack[top];
        --top;
        break;
      case Op::Div:
        stack[top - 1] /= stack[top];
        --top;
        if (!std::isfinite(stack[top])) {
          throw DomainError("division produced a non-finite value");
        }
        break;
      case Op::Pow:
        stack[top] = std::pow(stack[top], in.value);
        if (!std::isfinite(stack[top])) {
          throw DomainError("power produced a non-finite value");
        }
        break;
      case Op::Exp:
        stack[top] = std::exp(stack[top]);
        if (!std::isfinite(stack[top])) {
          throw DomainError("exp overflow");
        }
        break;
      case Op::Log:
        if (!(stack[top] > 0.0)) {
          throw DomainError("log of nonpositive value");
        }
        stack[top] = std::log(stack[top]);
        break;
      case Op::Min:
        stack[top - 1] = std::min(stack[top - 1], stack[top]);
        --top;
        break;
      case Op::Max:
        stack[top - 1] = std::max(stack[top - 1], stack[top]);
        --top;
        break;
    }
  }
  const double result = stack[0];
  if (!std::isfinite(result)) {
    throw DomainError("expression evaluated to a non-finite value");
  }
  return result;
}

}  // namespace mfldp
