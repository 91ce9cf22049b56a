#pragma once

// Tape-based reverse-mode differentiation over dense double tensors.
//
// A Graph is an append-only record of executed operations. Every op appends a
// node after its inputs, so node ids are already a topological order and
// backward() is a single reverse sweep. Graphs are rebuilt per step and are
// confined to one thread; parameters are shared read-only between graphs and
// hand their gradients back through parameter_grads().

#include <cstdint>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "styleflow/tensor.hpp"

namespace styleflow::ad {

enum class OpKind : std::uint8_t {
    leaf,
    matmul,
    transpose,
    add,
    sub,
    mul,
    div,
    neg,
    scale,
    add_scalar,
    exp,
    log,
    sqrt,
    tanh,
    sigmoid,
    clamp,
    softmax,
    log_softmax,
    mean_last,
    var_last,
    sum,
    mean,
    gather_rows,
    scatter_rows,
    concat,
    slice,
    pick,
    reshape,
};

std::string_view to_string(OpKind kind);

/// Non-tensor arguments of an op (index lists, axis, slice bounds, scalars).
struct OpAttrs {
    std::vector<std::size_t> index;
    std::size_t axis = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
    double a = 0.0;
    double b = 0.0;
    Shape shape;
};

/// NaN/Inf rejection at op boundaries; on by default, process-wide.
void set_finite_checks(bool enabled) noexcept;
bool finite_checks_enabled() noexcept;

class Graph;

/// Handle to a node of a Graph.
struct Var {
    Graph* graph = nullptr;
    std::uint32_t id = 0;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    bool valid() const noexcept { return graph != nullptr; }
};

class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;
    Graph(Graph&&) = default;
    Graph& operator=(Graph&&) = default;

    /// Leaf that never receives a gradient.
    Var constant(Tensor value);
    /// Leaf that receives a gradient (readable via grad()).
    Var variable(Tensor value);
    /// Leaf bound to a shared parameter. Repeated calls return the same node.
    /// Parameters with requires_grad == false enter as constants.
    Var parameter(const Parameter& param);

    /// Generic entry point: run `kind` on `inputs` and record it.
    Var apply(OpKind kind, std::span<const Var> inputs, OpAttrs attrs = {});

    const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
    /// Gradient after backward(); zeros when the node was not reached.
    Tensor grad(Var v) const;

    /// Populate gradients of every reachable requires-grad node w.r.t. `loss`.
    /// `loss` must be a scalar (shape []).
    void backward(Var loss);

    /// Parameter gradients gathered from the last backward(), in first-use order.
    std::vector<std::pair<const Parameter*, Tensor>> parameter_grads() const;

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        OpKind kind = OpKind::leaf;
        std::vector<std::uint32_t> inputs;
        Tensor value;
        Tensor grad;
        OpAttrs attrs;
        bool requires_grad = false;
        const Parameter* param = nullptr;
    };

    Var push(Node node);
    Tensor& grad_buffer(std::uint32_t id);
    void propagate(const Node& node, const Tensor& g);

    std::vector<Node> nodes_;
    std::vector<std::pair<const Parameter*, std::uint32_t>> params_;
    std::unordered_map<const Parameter*, std::uint32_t> param_ids_;
};

// Binary ops broadcast `b` against `a` when b has shape equal to a, [cols],
// [rows, 1], or [] (scalar). Nothing else is broadcast.
Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var clamp(Var a, double lo, double hi);
Var softmax(Var a);      // over the last axis
Var log_softmax(Var a);  // over the last axis
Var mean_last(Var a);    // [m,n] -> [m,1]
Var var_last(Var a);     // population variance, [m,n] -> [m,1]
Var sum(Var a);          // -> []
Var mean(Var a);         // -> []
Var gather_rows(Var a, std::vector<std::size_t> index);
/// Copy of `base` with row index[i] replaced by row i of `rows`. Indices unique.
Var scatter_rows(Var base, Var rows, std::vector<std::size_t> index);
Var concat(std::span<const Var> parts, std::size_t axis);
Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);
/// out[i] = a[i, cols[i]], shape [m].
Var pick(Var a, std::vector<std::size_t> cols);
Var reshape(Var a, Shape shape);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }

}  // namespace styleflow::ad
