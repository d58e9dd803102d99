#pragma once

// Scalar computation graphs.
//
// A graph is recorded through `Ex` handles produced by a `GraphBuilder` and
// frozen into an immutable `Expr`. Constants are folded while recording, so
// multiplying by an exact zero never emits a node. Forward-mode tangents with
// respect to an input leaf are emitted as new graph nodes by
// `GraphBuilder::tangent`, which is how observables such as stress are built
// from a potential before reverse-mode differentiation in the parameters.

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

namespace sparsestein::diff {

enum class Op : std::uint8_t {
  Constant,
  Param,
  Input,
  Add,
  Mul,
  Neg,
  Recip,
  Exp,
  Log,
  Pow,
  Min,
  Max,
  Softplus,
  Sigmoid,
  StepGe,  // 1 if lhs >= rhs else 0; zero derivative. Emitted by tangents of min/max.
};

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Immutable, topologically ordered scalar graph with one or more outputs.
class Expr {
 public:
  Expr() = default;

  std::size_t size() const { return ops_.size(); }
  std::size_t num_params() const { return num_params_; }
  std::size_t num_inputs() const { return num_inputs_; }
  std::size_t num_outputs() const { return outputs_.size(); }
  std::int32_t output(std::size_t k) const { return outputs_.at(k); }

  Op op(std::size_t i) const { return ops_[i]; }
  std::int32_t lhs(std::size_t i) const { return lhs_[i]; }
  std::int32_t rhs(std::size_t i) const { return rhs_[i]; }
  double constant(std::size_t i) const { return consts_[i]; }

 private:
  friend class GraphBuilder;

  std::vector<Op> ops_;
  std::vector<std::int32_t> lhs_;
  std::vector<std::int32_t> rhs_;
  std::vector<double> consts_;  // value (Constant), leaf index (Param/Input), exponent (Pow)
  std::vector<std::int32_t> outputs_;
  std::size_t num_params_ = 0;
  std::size_t num_inputs_ = 0;
};

class GraphBuilder;

/// Handle to a node under construction, or a detached constant that is not
/// yet attached to any builder (so templated code can write `T(0.0)`).
class Ex {
 public:
  Ex(double value = 0.0) : builder_(nullptr), id_(-1), value_(value) {}  // NOLINT: implicit by intent

  bool detached() const { return builder_ == nullptr; }
  bool is_constant() const;
  double constant_value() const;
  std::int32_t id() const { return id_; }
  GraphBuilder* builder() const { return builder_; }

 private:
  friend class GraphBuilder;
  Ex(GraphBuilder* b, std::int32_t id) : builder_(b), id_(id), value_(0.0) {}

  GraphBuilder* builder_;
  std::int32_t id_;
  double value_;
};

class GraphBuilder {
 public:
  GraphBuilder() = default;
  GraphBuilder(const GraphBuilder&) = delete;
  GraphBuilder& operator=(const GraphBuilder&) = delete;

  Ex constant(double v) { return Ex(this, emit_constant(v)); }

  Ex param(std::size_t index) {
    auto [it, fresh] = params_.try_emplace(index, 0);
    if (fresh) it->second = emit(Op::Param, -1, -1, static_cast<double>(index));
    return Ex(this, it->second);
  }

  Ex input(std::size_t index) {
    auto [it, fresh] = inputs_.try_emplace(index, 0);
    if (fresh) it->second = emit(Op::Input, -1, -1, static_cast<double>(index));
    return Ex(this, it->second);
  }

  Op op(std::int32_t id) const { return ops_[id]; }
  double value_of_constant(std::int32_t id) const { return consts_[id]; }

  Ex add(const Ex& a, const Ex& b) {
    if (a.is_constant() && b.is_constant()) return constant(a.constant_value() + b.constant_value());
    if (is_zero(a)) return attach(b);
    if (is_zero(b)) return attach(a);
    return Ex(this, emit(Op::Add, id_of(a), id_of(b), 0.0));
  }

  Ex mul(const Ex& a, const Ex& b) {
    if (a.is_constant() && b.is_constant()) return constant(a.constant_value() * b.constant_value());
    if (is_zero(a) || is_zero(b)) return constant(0.0);
    if (is_one(a)) return attach(b);
    if (is_one(b)) return attach(a);
    return Ex(this, emit(Op::Mul, id_of(a), id_of(b), 0.0));
  }

  Ex neg(const Ex& a) {
    if (a.is_constant()) return constant(-a.constant_value());
    if (ops_[a.id()] == Op::Neg) return Ex(this, lhs_[a.id()]);
    return Ex(this, emit(Op::Neg, id_of(a), -1, 0.0));
  }

  Ex recip(const Ex& a) {
    if (a.is_constant() && a.constant_value() != 0.0) return constant(1.0 / a.constant_value());
    return Ex(this, emit(Op::Recip, id_of(a), -1, 0.0));
  }

  Ex exp(const Ex& a) {
    if (a.is_constant()) return constant(std::exp(a.constant_value()));
    return Ex(this, emit(Op::Exp, id_of(a), -1, 0.0));
  }

  Ex log(const Ex& a) {
    if (a.is_constant() && a.constant_value() > 0.0) return constant(std::log(a.constant_value()));
    return Ex(this, emit(Op::Log, id_of(a), -1, 0.0));
  }

  Ex pow(const Ex& a, double exponent) {
    if (exponent == 0.0) return constant(1.0);
    if (exponent == 1.0) return attach(a);
    if (a.is_constant() && a.constant_value() > 0.0)
      return constant(std::pow(a.constant_value(), exponent));
    return Ex(this, emit(Op::Pow, id_of(a), -1, exponent));
  }

  Ex softplus(const Ex& a) {
    if (a.is_constant()) return constant(diff::softplus(a.constant_value()));
    return Ex(this, emit(Op::Softplus, id_of(a), -1, 0.0));
  }

  Ex sigmoid(const Ex& a) {
    if (a.is_constant()) return constant(diff::sigmoid(a.constant_value()));
    return Ex(this, emit(Op::Sigmoid, id_of(a), -1, 0.0));
  }

  // The first operand is the pass-through side: ties route the derivative to it.
  Ex min(const Ex& a, const Ex& b) {
    if (a.is_constant() && b.is_constant())
      return constant(a.constant_value() <= b.constant_value() ? a.constant_value() : b.constant_value());
    return Ex(this, emit(Op::Min, id_of(a), id_of(b), 0.0));
  }

  Ex max(const Ex& a, const Ex& b) {
    if (a.is_constant() && b.is_constant())
      return constant(a.constant_value() >= b.constant_value() ? a.constant_value() : b.constant_value());
    return Ex(this, emit(Op::Max, id_of(a), id_of(b), 0.0));
  }

  Ex step_ge(const Ex& a, const Ex& b) {
    if (a.is_constant() && b.is_constant())
      return constant(a.constant_value() >= b.constant_value() ? 1.0 : 0.0);
    return Ex(this, emit(Op::StepGe, id_of(a), id_of(b), 0.0));
  }

  /// Emits the directional derivative of `f` along input leaf `input` as new
  /// nodes (forward mode over the recorded graph).
  Ex tangent(const Ex& f, std::size_t input_index) {
    if (f.detached() || f.is_constant()) return constant(0.0);
    const std::int32_t last = f.id();
    std::vector<Ex> t(static_cast<std::size_t>(last) + 1, Ex(0.0));
    for (std::int32_t i = 0; i <= last; ++i) {
      const Ex self(this, i);
      const Op o = ops_[i];
      const std::int32_t a = lhs_[i];
      const std::int32_t b = rhs_[i];
      auto ta = [&] { return t[a]; };
      auto tb = [&] { return t[b]; };
      switch (o) {
        case Op::Constant:
        case Op::Param:
        case Op::StepGe:
          break;
        case Op::Input:
          if (static_cast<std::size_t>(consts_[i]) == input_index) t[i] = constant(1.0);
          break;
        case Op::Add:
          t[i] = add(ta(), tb());
          break;
        case Op::Mul:
          t[i] = add(mul(ta(), Ex(this, b)), mul(Ex(this, a), tb()));
          break;
        case Op::Neg:
          t[i] = neg(ta());
          break;
        case Op::Recip:
          if (!is_zero(ta())) t[i] = neg(mul(ta(), mul(self, self)));
          break;
        case Op::Exp:
          t[i] = mul(ta(), self);
          break;
        case Op::Log:
          if (!is_zero(ta())) t[i] = mul(ta(), recip(Ex(this, a)));
          break;
        case Op::Pow:
          if (!is_zero(ta()))
            t[i] = mul(ta(), mul(constant(consts_[i]), pow(Ex(this, a), consts_[i] - 1.0)));
          break;
        case Op::Softplus:
          if (!is_zero(ta())) t[i] = mul(ta(), sigmoid(Ex(this, a)));
          break;
        case Op::Sigmoid:
          if (!is_zero(ta())) t[i] = mul(ta(), mul(self, add(constant(1.0), neg(self))));
          break;
        case Op::Max:
          if (!is_zero(ta()) || !is_zero(tb()))
            t[i] = add(tb(), mul(step_ge(Ex(this, a), Ex(this, b)), add(ta(), neg(tb()))));
          break;
        case Op::Min:
          if (!is_zero(ta()) || !is_zero(tb()))
            t[i] = add(tb(), mul(step_ge(Ex(this, b), Ex(this, a)), add(ta(), neg(tb()))));
          break;
      }
    }
    return attach(t[last]);
  }

  /// Freezes the graph. Nodes not reachable from `outputs` are dropped and the
  /// remaining ones renumbered in their original order.
  Expr finish(std::span<const Ex> outputs) {
    std::vector<std::int32_t> out_ids;
    out_ids.reserve(outputs.size());
    for (const Ex& o : outputs) out_ids.push_back(id_of(o));

    std::vector<char> live(ops_.size(), 0);
    for (std::int32_t id : out_ids) live[id] = 1;
    for (std::int32_t i = static_cast<std::int32_t>(ops_.size()) - 1; i >= 0; --i) {
      if (!live[i]) continue;
      if (lhs_[i] >= 0) live[lhs_[i]] = 1;
      if (rhs_[i] >= 0) live[rhs_[i]] = 1;
    }

    Expr e;
    std::vector<std::int32_t> remap(ops_.size(), -1);
    std::size_t max_param = 0, max_input = 0;
    for (std::size_t i = 0; i < ops_.size(); ++i) {
      if (!live[i]) continue;
      remap[i] = static_cast<std::int32_t>(e.ops_.size());
      e.ops_.push_back(ops_[i]);
      e.lhs_.push_back(lhs_[i] >= 0 ? remap[lhs_[i]] : -1);
      e.rhs_.push_back(rhs_[i] >= 0 ? remap[rhs_[i]] : -1);
      e.consts_.push_back(consts_[i]);
      if (ops_[i] == Op::Param) max_param = std::max(max_param, static_cast<std::size_t>(consts_[i]) + 1);
      if (ops_[i] == Op::Input) max_input = std::max(max_input, static_cast<std::size_t>(consts_[i]) + 1);
    }
    for (std::int32_t id : out_ids) e.outputs_.push_back(remap[id]);
    // Leaf counts come from every leaf ever declared, so bindings stay aligned
    // even when some leaf was folded away.
    for (const auto& [idx, id] : params_) max_param = std::max(max_param, idx + 1);
    for (const auto& [idx, id] : inputs_) max_input = std::max(max_input, idx + 1);
    e.num_params_ = max_param;
    e.num_inputs_ = max_input;
    return e;
  }

  Expr finish(std::initializer_list<Ex> outputs) {
    std::vector<Ex> v(outputs);
    return finish(std::span<const Ex>(v));
  }

 private:
  friend class Ex;

  struct NodeKey {
    Op op;
    std::int32_t a, b;
    double c;
    bool operator==(const NodeKey&) const = default;
  };
  struct NodeKeyHash {
    std::size_t operator()(const NodeKey& k) const {
      std::size_t h = std::hash<double>{}(k.c);
      h ^= (static_cast<std::size_t>(k.op) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
      h ^= (static_cast<std::size_t>(static_cast<std::uint32_t>(k.a)) * 0x100000001b3ULL) + (h << 6) + (h >> 2);
      h ^= (static_cast<std::size_t>(static_cast<std::uint32_t>(k.b)) * 0xc2b2ae3d27d4eb4fULL) + (h << 6) + (h >> 2);
      return h;
    }
  };

  // Interior nodes are hash-consed so repeated subexpressions (e.g. the same
  // sigmoid emitted by tangents along several inputs) share one node.
  std::int32_t emit(Op o, std::int32_t a, std::int32_t b, double c) {
    const bool leaf = o == Op::Constant || o == Op::Param || o == Op::Input;
    if (!leaf) {
      auto it = cse_.find(NodeKey{o, a, b, c});
      if (it != cse_.end()) return it->second;
    }
    const auto id = append(o, a, b, c);
    if (!leaf) cse_.emplace(NodeKey{o, a, b, c}, id);
    return id;
  }

  std::int32_t append(Op o, std::int32_t a, std::int32_t b, double c) {
    ops_.push_back(o);
    lhs_.push_back(a);
    rhs_.push_back(b);
    consts_.push_back(c);
    return static_cast<std::int32_t>(ops_.size() - 1);
  }

  std::int32_t emit_constant(double v) {
    if (v == 0.0 && !std::signbit(v)) {
      if (zero_ < 0) zero_ = emit(Op::Constant, -1, -1, 0.0);
      return zero_;
    }
    if (v == 1.0) {
      if (one_ < 0) one_ = emit(Op::Constant, -1, -1, 1.0);
      return one_;
    }
    return emit(Op::Constant, -1, -1, v);
  }

  std::int32_t id_of(const Ex& e) {
    if (e.detached()) return emit_constant(e.value_);
    if (e.builder_ != this) throw std::logic_error("expression belongs to another graph");
    return e.id_;
  }

  Ex attach(const Ex& e) { return Ex(this, id_of(e)); }

  static bool is_zero(const Ex& e) { return e.is_constant() && e.constant_value() == 0.0; }
  static bool is_one(const Ex& e) { return e.is_constant() && e.constant_value() == 1.0; }

  std::vector<Op> ops_;
  std::vector<std::int32_t> lhs_;
  std::vector<std::int32_t> rhs_;
  std::vector<double> consts_;
  std::unordered_map<std::size_t, std::int32_t> params_;
  std::unordered_map<std::size_t, std::int32_t> inputs_;
  std::unordered_map<NodeKey, std::int32_t, NodeKeyHash> cse_;
  std::int32_t zero_ = -1;
  std::int32_t one_ = -1;
};

inline bool Ex::is_constant() const { return detached() || builder_->op(id_) == Op::Constant; }

inline double Ex::constant_value() const {
  return detached() ? value_ : builder_->value_of_constant(id_);
}

namespace detail {
inline GraphBuilder& builder_of(const Ex& a, const Ex& b) {
  if (a.builder()) return *a.builder();
  return *b.builder();
}
}  // namespace detail

inline Ex operator+(const Ex& a, const Ex& b) {
  if (a.detached() && b.detached()) return Ex(a.constant_value() + b.constant_value());
  return detail::builder_of(a, b).add(a, b);
}
inline Ex operator*(const Ex& a, const Ex& b) {
  if (a.detached() && b.detached()) return Ex(a.constant_value() * b.constant_value());
  return detail::builder_of(a, b).mul(a, b);
}
inline Ex operator-(const Ex& a) {
  if (a.detached()) return Ex(-a.constant_value());
  return a.builder()->neg(a);
}
inline Ex operator-(const Ex& a, const Ex& b) { return a + (-b); }
inline Ex recip(const Ex& a) {
  if (a.detached() && a.constant_value() != 0.0) return Ex(1.0 / a.constant_value());
  if (a.detached()) throw std::domain_error("reciprocal of detached zero");
  return a.builder()->recip(a);
}
inline Ex operator/(const Ex& a, const Ex& b) { return a * recip(b); }
inline Ex& operator+=(Ex& a, const Ex& b) { return a = a + b; }
inline Ex& operator-=(Ex& a, const Ex& b) { return a = a - b; }
inline Ex& operator*=(Ex& a, const Ex& b) { return a = a * b; }

inline Ex exp(const Ex& a) { return a.detached() ? Ex(std::exp(a.constant_value())) : a.builder()->exp(a); }
inline Ex log(const Ex& a) {
  if (a.detached() && a.constant_value() > 0.0) return Ex(std::log(a.constant_value()));
  if (a.detached()) throw std::domain_error("log of non-positive detached constant");
  return a.builder()->log(a);
}
inline Ex pow(const Ex& a, double p) {
  if (a.detached() && a.constant_value() > 0.0) return Ex(std::pow(a.constant_value(), p));
  if (a.detached()) return Ex(std::pow(a.constant_value(), p));
  return a.builder()->pow(a, p);
}
inline Ex softplus(const Ex& a) {
  return a.detached() ? Ex(softplus(a.constant_value())) : a.builder()->softplus(a);
}
inline Ex sigmoid(const Ex& a) {
  return a.detached() ? Ex(sigmoid(a.constant_value())) : a.builder()->sigmoid(a);
}
inline Ex min(const Ex& a, const Ex& b) {
  if (a.detached() && b.detached())
    return Ex(a.constant_value() <= b.constant_value() ? a.constant_value() : b.constant_value());
  return detail::builder_of(a, b).min(a, b);
}
inline Ex max(const Ex& a, const Ex& b) {
  if (a.detached() && b.detached())
    return Ex(a.constant_value() >= b.constant_value() ? a.constant_value() : b.constant_value());
  return detail::builder_of(a, b).max(a, b);
}

// Plain-double counterparts so model code can be written once as a template.
inline double recip(double a) { return 1.0 / a; }

}  // namespace sparsestein::diff
