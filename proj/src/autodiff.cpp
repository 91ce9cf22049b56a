#include "styleflow/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>

#include "styleflow/error.hpp"

namespace styleflow::ad {

namespace {

std::atomic<bool> g_finite_checks{true};

enum class Bcast { same, row, col, scalar };

Bcast broadcast_kind(const Tensor& a, const Tensor& b, std::string_view op) {
    if (a.shape() == b.shape()) return Bcast::same;
    if (b.rank() == 0) return Bcast::scalar;
    if (a.rank() == 2 && b.rank() == 1 && b.dim(0) == a.dim(1)) return Bcast::row;
    if (a.rank() == 2 && b.rank() == 2 && b.dim(0) == a.dim(0) && b.dim(1) == 1) return Bcast::col;
    throw DimensionError(std::string(op) + ": cannot combine shapes " + shape_string(a.shape()) +
                         " and " + shape_string(b.shape()));
}

// Index into b for flat position i of a.
inline std::size_t bindex(Bcast k, std::size_t i, std::size_t cols) {
    switch (k) {
        case Bcast::same: return i;
        case Bcast::row: return i % cols;
        case Bcast::col: return i / cols;
        case Bcast::scalar: return 0;
    }
    return 0;
}

void require_rank2(const Tensor& t, std::string_view op) {
    if (t.rank() != 2) {
        throw DimensionError(std::string(op) + ": expected a matrix, got shape " +
                             shape_string(t.shape()));
    }
}

Tensor matmul_values(const Tensor& a, const Tensor& b) {
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out({m, n});
    double* o = out.data().data();
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = o + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = pa[i * k + p];
            if (av == 0.0) continue;
            const double* brow = pb + p * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

// out += a^T * g   (a: [m,k], g: [m,n], out: [k,n])
void accumulate_at_g(const Tensor& a, const Tensor& g, Tensor& out) {
    const std::size_t m = a.dim(0), k = a.dim(1), n = g.dim(1);
    for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g.data().data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a.data()[i * k + p];
            if (av == 0.0) continue;
            double* orow = out.data().data() + p * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * grow[j];
        }
    }
}

// out += g * b^T   (g: [m,n], b: [k,n], out: [m,k])
void accumulate_g_bt(const Tensor& g, const Tensor& b, Tensor& out) {
    const std::size_t m = g.dim(0), n = g.dim(1), k = b.dim(0);
    for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g.data().data() + i * n;
        double* orow = out.data().data() + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double* brow = b.data().data() + p * n;
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
            orow[p] += acc;
        }
    }
}

template <typename F>
Tensor map_values(const Tensor& a, F f) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
    return out;
}

Tensor last_axis_softmax(const Tensor& a, bool log_space) {
    Tensor out(a.shape());
    const std::size_t n = a.cols();
    const std::size_t m = n ? a.size() / n : 0;
    for (std::size_t r = 0; r < m; ++r) {
        const double* x = a.data().data() + r * n;
        double* y = out.data().data() + r * n;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, x[j]);
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) total += std::exp(x[j] - mx);
        if (log_space) {
            const double lse = mx + std::log(total);
            for (std::size_t j = 0; j < n; ++j) y[j] = x[j] - lse;
        } else {
            for (std::size_t j = 0; j < n; ++j) y[j] = std::exp(x[j] - mx) / total;
        }
    }
    return out;
}

}  // namespace

std::string_view to_string(OpKind kind) {
    switch (kind) {
        case OpKind::leaf: return "leaf";
        case OpKind::matmul: return "matmul";
        case OpKind::transpose: return "transpose";
        case OpKind::add: return "add";
        case OpKind::sub: return "sub";
        case OpKind::mul: return "mul";
        case OpKind::div: return "div";
        case OpKind::neg: return "neg";
        case OpKind::scale: return "scale";
        case OpKind::add_scalar: return "add_scalar";
        case OpKind::exp: return "exp";
        case OpKind::log: return "log";
        case OpKind::sqrt: return "sqrt";
        case OpKind::tanh: return "tanh";
        case OpKind::sigmoid: return "sigmoid";
        case OpKind::clamp: return "clamp";
        case OpKind::softmax: return "softmax";
        case OpKind::log_softmax: return "log_softmax";
        case OpKind::mean_last: return "mean_last";
        case OpKind::var_last: return "var_last";
        case OpKind::sum: return "sum";
        case OpKind::mean: return "mean";
        case OpKind::gather_rows: return "gather_rows";
        case OpKind::scatter_rows: return "scatter_rows";
        case OpKind::concat: return "concat";
        case OpKind::slice: return "slice";
        case OpKind::pick: return "pick";
        case OpKind::reshape: return "reshape";
    }
    return "unknown";
}

void set_finite_checks(bool enabled) noexcept { g_finite_checks.store(enabled); }
bool finite_checks_enabled() noexcept { return g_finite_checks.load(); }

const Tensor& Var::value() const { return graph->value(*this); }

Var Graph::push(Node node) {
    if (finite_checks_enabled() && !node.value.all_finite()) {
        throw NumericError(std::string("non-finite value produced by ") +
                           std::string(to_string(node.kind)));
    }
    nodes_.push_back(std::move(node));
    return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::constant(Tensor value) {
    Node n;
    n.value = std::move(value);
    return push(std::move(n));
}

Var Graph::variable(Tensor value) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = true;
    return push(std::move(n));
}

Var Graph::parameter(const Parameter& param) {
    if (auto it = param_ids_.find(&param); it != param_ids_.end()) return Var{this, it->second};
    Node n;
    n.value = param.value;
    n.requires_grad = param.requires_grad;
    n.param = &param;
    Var v = push(std::move(n));
    param_ids_.emplace(&param, v.id);
    if (param.requires_grad) params_.emplace_back(&param, v.id);
    return v;
}

Tensor Graph::grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    if (n.grad.shape() == n.value.shape() && n.grad.size() == n.value.size()) return n.grad;
    return Tensor::zeros_like(n.value);
}

Tensor& Graph::grad_buffer(std::uint32_t id) {
    Node& n = nodes_[id];
    if (n.grad.storage().size() != n.value.size() || n.grad.shape() != n.value.shape()) {
        n.grad = Tensor::zeros_like(n.value);
    }
    return n.grad;
}

std::vector<std::pair<const Parameter*, Tensor>> Graph::parameter_grads() const {
    std::vector<std::pair<const Parameter*, Tensor>> out;
    out.reserve(params_.size());
    for (const auto& [p, id] : params_) out.emplace_back(p, grad(Var{const_cast<Graph*>(this), id}));
    return out;
}

void Graph::backward(Var loss) {
    if (loss.graph != this) throw ContractError("backward: loss belongs to another graph");
    const Node& ln = nodes_.at(loss.id);
    if (ln.value.rank() != 0) {
        throw ContractError("backward: loss must be a scalar, got shape " +
                            shape_string(ln.value.shape()));
    }
    for (Node& n : nodes_) n.grad = Tensor();
    if (!ln.requires_grad) return;
    grad_buffer(loss.id)[0] = 1.0;
    for (std::int64_t id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.requires_grad || n.kind == OpKind::leaf || n.grad.storage().empty()) continue;
        propagate(n, n.grad);
    }
}

void Graph::propagate(const Node& node, const Tensor& g) {
    auto needs = [&](std::size_t k) { return nodes_[node.inputs[k]].requires_grad; };
    auto in = [&](std::size_t k) -> const Tensor& { return nodes_[node.inputs[k]].value; };
    const Tensor& y = node.value;

    switch (node.kind) {
        case OpKind::leaf: break;
        case OpKind::matmul: {
            if (needs(0)) accumulate_g_bt(g, in(1), grad_buffer(node.inputs[0]));
            if (needs(1)) accumulate_at_g(in(0), g, grad_buffer(node.inputs[1]));
            break;
        }
        case OpKind::transpose: {
            if (needs(0)) {
                Tensor& ga = grad_buffer(node.inputs[0]);
                const std::size_t m = g.dim(0), n = g.dim(1);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) ga(j, i) += g(i, j);
            }
            break;
        }
        case OpKind::add:
        case OpKind::sub:
        case OpKind::mul:
        case OpKind::div: {
            const Tensor& a = in(0);
            const Tensor& b = in(1);
            const Bcast k = broadcast_kind(a, b, to_string(node.kind));
            const std::size_t cols = a.cols();
            if (needs(0)) {
                Tensor& ga = grad_buffer(node.inputs[0]);
                for (std::size_t i = 0; i < a.size(); ++i) {
                    const double bv = b[bindex(k, i, cols)];
                    switch (node.kind) {
                        case OpKind::add:
                        case OpKind::sub: ga[i] += g[i]; break;
                        case OpKind::mul: ga[i] += g[i] * bv; break;
                        default: ga[i] += g[i] / bv; break;
                    }
                }
            }
            if (needs(1)) {
                Tensor& gb = grad_buffer(node.inputs[1]);
                for (std::size_t i = 0; i < a.size(); ++i) {
                    const std::size_t j = bindex(k, i, cols);
                    switch (node.kind) {
                        case OpKind::add: gb[j] += g[i]; break;
                        case OpKind::sub: gb[j] -= g[i]; break;
                        case OpKind::mul: gb[j] += g[i] * a[i]; break;
                        default: gb[j] -= g[i] * y[i] / b[j]; break;
                    }
                }
            }
            break;
        }
        case OpKind::neg: {
            Tensor& ga = grad_buffer(node.inputs[0]);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] -= g[i];
            break;
        }
        case OpKind::scale: {
            Tensor& ga = grad_buffer(node.inputs[0]);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * node.attrs.a;
            break;
        }
        case OpKind::add_scalar:
        case OpKind::reshape: {
            Tensor& ga = grad_buffer(node.inputs[0]);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            break;
        }
        case OpKind::exp: {
            Tensor& ga = grad_buffer(node.inputs[0]);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
            break;
        }
        case OpKind::log: {
            Tensor& ga = grad_buffer(node.inputs[0]);
            const Tensor& a = in(0);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / a[i];
            break;
        }
        case OpKind::sqrt: {
            Tensor& ga = grad_buffer(node.inputs[0]);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * 0.5 / y[i];
            break;
        }
        case OpKind::tanh: {
            Tensor& ga = grad_buffer(node.inputs[0]);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
            break;
        }
        case OpKind::sigmoid: {
            Tensor& ga = grad_buffer(node.inputs[0]);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
            break;
        }
        case OpKind::clamp: {
            Tensor& ga = grad_buffer(node.inputs[0]);
            const Tensor& a = in(0);
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (a[i] >= node.attrs.a && a[i] <= node.attrs.b) ga[i] += g[i];
            }
            break;
        }
        case OpKind::softmax: {
            Tensor& ga = grad_buffer(node.inputs[0]);
            const std::size_t n = y.cols();
            for (std::size_t r = 0; r < y.size() / n; ++r) {
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) dot += g[r * n + j] * y[r * n + j];
                for (std::size_t j = 0; j < n; ++j) ga[r * n + j] += y[r * n + j] * (g[r * n + j] - dot);
            }
            break;
        }
        case OpKind::log_softmax: {
            Tensor& ga = grad_buffer(node.inputs[0]);
            const std::size_t n = y.cols();
            for (std::size_t r = 0; r < y.size() / n; ++r) {
                double gs = 0.0;
                for (std::size_t j = 0; j < n; ++j) gs += g[r * n + j];
                for (std::size_t j = 0; j < n; ++j) ga[r * n + j] += g[r * n + j] - std::exp(y[r * n + j]) * gs;
            }
            break;
        }
        case OpKind::mean_last: {
            Tensor& ga = grad_buffer(node.inputs[0]);
            const std::size_t n = in(0).cols();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i / n] / static_cast<double>(n);
            break;
        }
        case OpKind::var_last: {
            Tensor& ga = grad_buffer(node.inputs[0]);
            const Tensor& a = in(0);
            const std::size_t n = a.cols();
            for (std::size_t r = 0; r < a.size() / n; ++r) {
                double mu = 0.0;
                for (std::size_t j = 0; j < n; ++j) mu += a[r * n + j];
                mu /= static_cast<double>(n);
                for (std::size_t j = 0; j < n; ++j)
                    ga[r * n + j] += g[r] * 2.0 * (a[r * n + j] - mu) / static_cast<double>(n);
            }
            break;
        }
        case OpKind::sum:
        case OpKind::mean: {
            Tensor& ga = grad_buffer(node.inputs[0]);
            const double f = node.kind == OpKind::sum ? g[0] : g[0] / static_cast<double>(ga.size());
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += f;
            break;
        }
        case OpKind::gather_rows: {
            Tensor& ga = grad_buffer(node.inputs[0]);
            const std::size_t n = ga.cols();
            for (std::size_t r = 0; r < node.attrs.index.size(); ++r) {
                const std::size_t src = node.attrs.index[r];
                for (std::size_t j = 0; j < n; ++j) ga[src * n + j] += g[r * n + j];
            }
            break;
        }
        case OpKind::scatter_rows: {
            const std::size_t n = g.cols();
            if (needs(0)) {
                Tensor& gb = grad_buffer(node.inputs[0]);
                std::vector<bool> replaced(g.rows(), false);
                for (std::size_t r : node.attrs.index) replaced[r] = true;
                for (std::size_t r = 0; r < g.rows(); ++r) {
                    if (replaced[r]) continue;
                    for (std::size_t j = 0; j < n; ++j) gb[r * n + j] += g[r * n + j];
                }
            }
            if (needs(1)) {
                Tensor& gr = grad_buffer(node.inputs[1]);
                for (std::size_t r = 0; r < node.attrs.index.size(); ++r) {
                    const std::size_t dst = node.attrs.index[r];
                    for (std::size_t j = 0; j < n; ++j) gr[r * n + j] += g[dst * n + j];
                }
            }
            break;
        }
        case OpKind::concat: {
            std::size_t offset = 0;
            for (std::size_t k = 0; k < node.inputs.size(); ++k) {
                const Tensor& part = in(k);
                const std::size_t extent = node.attrs.axis == 0 ? part.dim(0) : part.dim(1);
                if (needs(k)) {
                    Tensor& gp = grad_buffer(node.inputs[k]);
                    for (std::size_t i = 0; i < part.dim(0); ++i)
                        for (std::size_t j = 0; j < part.dim(1); ++j)
                            gp(i, j) += node.attrs.axis == 0 ? g(offset + i, j) : g(i, offset + j);
                }
                offset += extent;
            }
            break;
        }
        case OpKind::slice: {
            Tensor& ga = grad_buffer(node.inputs[0]);
            for (std::size_t i = 0; i < g.dim(0); ++i)
                for (std::size_t j = 0; j < g.dim(1); ++j) {
                    if (node.attrs.axis == 0) ga(node.attrs.begin + i, j) += g(i, j);
                    else ga(i, node.attrs.begin + j) += g(i, j);
                }
            break;
        }
        case OpKind::pick: {
            Tensor& ga = grad_buffer(node.inputs[0]);
            for (std::size_t r = 0; r < node.attrs.index.size(); ++r) ga(r, node.attrs.index[r]) += g[r];
            break;
        }
    }
}

Var Graph::apply(OpKind kind, std::span<const Var> inputs, OpAttrs attrs) {
    auto arity = [&](std::size_t n) {
        if (inputs.size() != n) {
            throw ContractError(std::string(to_string(kind)) + ": expected " + std::to_string(n) +
                                " inputs, got " + std::to_string(inputs.size()));
        }
    };
    for (const Var& v : inputs) {
        if (v.graph != this) throw ContractError("op input belongs to another graph");
    }
    auto val = [&](std::size_t k) -> const Tensor& { return nodes_.at(inputs[k].id).value; };

    Node node;
    node.kind = kind;
    for (const Var& v : inputs) {
        node.inputs.push_back(v.id);
        node.requires_grad = node.requires_grad || nodes_[v.id].requires_grad;
    }

    switch (kind) {
        case OpKind::leaf: throw ContractError("apply: leaf is not an operation");
        case OpKind::matmul: {
            arity(2);
            const Tensor& a = val(0);
            const Tensor& b = val(1);
            require_rank2(a, "matmul");
            require_rank2(b, "matmul");
            if (a.dim(1) != b.dim(0)) {
                throw DimensionError("matmul: shapes " + shape_string(a.shape()) + " and " +
                                     shape_string(b.shape()) + " do not conform");
            }
            node.value = matmul_values(a, b);
            break;
        }
        case OpKind::transpose: {
            arity(1);
            const Tensor& a = val(0);
            require_rank2(a, "transpose");
            Tensor out({a.dim(1), a.dim(0)});
            for (std::size_t i = 0; i < a.dim(0); ++i)
                for (std::size_t j = 0; j < a.dim(1); ++j) out(j, i) = a(i, j);
            node.value = std::move(out);
            break;
        }
        case OpKind::add:
        case OpKind::sub:
        case OpKind::mul:
        case OpKind::div: {
            arity(2);
            const Tensor& a = val(0);
            const Tensor& b = val(1);
            const Bcast k = broadcast_kind(a, b, to_string(kind));
            const std::size_t cols = a.cols();
            Tensor out(a.shape());
            for (std::size_t i = 0; i < a.size(); ++i) {
                const double bv = b[bindex(k, i, cols)];
                switch (kind) {
                    case OpKind::add: out[i] = a[i] + bv; break;
                    case OpKind::sub: out[i] = a[i] - bv; break;
                    case OpKind::mul: out[i] = a[i] * bv; break;
                    default: out[i] = a[i] / bv; break;
                }
            }
            node.value = std::move(out);
            break;
        }
        case OpKind::neg:
            arity(1);
            node.value = map_values(val(0), [](double x) { return -x; });
            break;
        case OpKind::scale: {
            arity(1);
            const double f = attrs.a;
            node.value = map_values(val(0), [f](double x) { return x * f; });
            break;
        }
        case OpKind::add_scalar: {
            arity(1);
            const double c = attrs.a;
            node.value = map_values(val(0), [c](double x) { return x + c; });
            break;
        }
        case OpKind::exp:
            arity(1);
            node.value = map_values(val(0), [](double x) { return std::exp(x); });
            break;
        case OpKind::log:
            arity(1);
            node.value = map_values(val(0), [](double x) { return std::log(x); });
            break;
        case OpKind::sqrt:
            arity(1);
            node.value = map_values(val(0), [](double x) { return std::sqrt(x); });
            break;
        case OpKind::tanh:
            arity(1);
            node.value = map_values(val(0), [](double x) { return std::tanh(x); });
            break;
        case OpKind::sigmoid:
            arity(1);
            node.value = map_values(val(0), [](double x) {
                if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
                const double e = std::exp(x);
                return e / (1.0 + e);
            });
            break;
        case OpKind::clamp: {
            arity(1);
            const double lo = attrs.a, hi = attrs.b;
            if (!(lo <= hi)) throw ContractError("clamp: lo must not exceed hi");
            node.value = map_values(val(0), [lo, hi](double x) { return std::clamp(x, lo, hi); });
            break;
        }
        case OpKind::softmax:
        case OpKind::log_softmax: {
            arity(1);
            if (val(0).rank() == 0 || val(0).cols() == 0) throw DimensionError("softmax of empty axis");
            node.value = last_axis_softmax(val(0), kind == OpKind::log_softmax);
            break;
        }
        case OpKind::mean_last:
        case OpKind::var_last: {
            arity(1);
            const Tensor& a = val(0);
            require_rank2(a, to_string(kind));
            const std::size_t m = a.dim(0), n = a.dim(1);
            if (n == 0) throw DimensionError("mean/var over an empty axis");
            Tensor out({m, 1});
            for (std::size_t r = 0; r < m; ++r) {
                double mu = 0.0;
                for (std::size_t j = 0; j < n; ++j) mu += a(r, j);
                mu /= static_cast<double>(n);
                if (kind == OpKind::mean_last) {
                    out[r] = mu;
                } else {
                    double v = 0.0;
                    for (std::size_t j = 0; j < n; ++j) v += (a(r, j) - mu) * (a(r, j) - mu);
                    out[r] = v / static_cast<double>(n);
                }
            }
            node.value = std::move(out);
            break;
        }
        case OpKind::sum:
        case OpKind::mean: {
            arity(1);
            const Tensor& a = val(0);
            double total = 0.0;
            for (double x : a.data()) total += x;
            if (kind == OpKind::mean) {
                if (a.size() == 0) throw DimensionError("mean of empty tensor");
                total /= static_cast<double>(a.size());
            }
            node.value = Tensor::scalar(total);
            break;
        }
        case OpKind::gather_rows: {
            arity(1);
            const Tensor& a = val(0);
            require_rank2(a, "gather_rows");
            const std::size_t n = a.dim(1);
            Tensor out({attrs.index.size(), n});
            for (std::size_t r = 0; r < attrs.index.size(); ++r) {
                if (attrs.index[r] >= a.dim(0)) {
                    throw DimensionError("gather_rows: row " + std::to_string(attrs.index[r]) +
                                         " out of range for shape " + shape_string(a.shape()));
                }
                std::copy_n(a.data().data() + attrs.index[r] * n, n, out.data().data() + r * n);
            }
            node.value = std::move(out);
            break;
        }
        case OpKind::scatter_rows: {
            arity(2);
            const Tensor& base = val(0);
            const Tensor& rows = val(1);
            require_rank2(base, "scatter_rows");
            require_rank2(rows, "scatter_rows");
            if (rows.dim(0) != attrs.index.size() || rows.dim(1) != base.dim(1)) {
                throw DimensionError("scatter_rows: rows " + shape_string(rows.shape()) +
                                     " do not fit base " + shape_string(base.shape()) + " at " +
                                     std::to_string(attrs.index.size()) + " positions");
            }
            Tensor out = base;
            std::vector<bool> seen(base.dim(0), false);
            const std::size_t n = base.dim(1);
            for (std::size_t r = 0; r < attrs.index.size(); ++r) {
                const std::size_t dst = attrs.index[r];
                if (dst >= base.dim(0)) throw DimensionError("scatter_rows: index out of range");
                if (seen[dst]) throw ContractError("scatter_rows: duplicate index");
                seen[dst] = true;
                std::copy_n(rows.data().data() + r * n, n, out.data().data() + dst * n);
            }
            node.value = std::move(out);
            break;
        }
        case OpKind::concat: {
            if (inputs.empty()) throw ContractError("concat: no inputs");
            const std::size_t axis = attrs.axis;
            if (axis > 1) throw DimensionError("concat: axis must be 0 or 1");
            std::size_t rows = 0, cols = 0;
            for (std::size_t k = 0; k < inputs.size(); ++k) {
                const Tensor& p = val(k);
                require_rank2(p, "concat");
                const std::size_t other = axis == 0 ? p.dim(1) : p.dim(0);
                const std::size_t ref = axis == 0 ? val(0).dim(1) : val(0).dim(0);
                if (other != ref) {
                    throw DimensionError("concat: shapes " + shape_string(val(0).shape()) + " and " +
                                         shape_string(p.shape()) + " do not conform");
                }
                if (axis == 0) { rows += p.dim(0); cols = p.dim(1); }
                else { cols += p.dim(1); rows = p.dim(0); }
            }
            Tensor out({rows, cols});
            std::size_t offset = 0;
            for (std::size_t k = 0; k < inputs.size(); ++k) {
                const Tensor& p = val(k);
                for (std::size_t i = 0; i < p.dim(0); ++i)
                    for (std::size_t j = 0; j < p.dim(1); ++j) {
                        if (axis == 0) out(offset + i, j) = p(i, j);
                        else out(i, offset + j) = p(i, j);
                    }
                offset += axis == 0 ? p.dim(0) : p.dim(1);
            }
            node.value = std::move(out);
            break;
        }
        case OpKind::slice: {
            arity(1);
            const Tensor& a = val(0);
            require_rank2(a, "slice");
            const std::size_t axis = attrs.axis;
            if (axis > 1 || attrs.begin > attrs.end || attrs.end > a.dim(axis)) {
                throw DimensionError("slice [" + std::to_string(attrs.begin) + "," +
                                     std::to_string(attrs.end) + ") on axis " + std::to_string(axis) +
                                     " of shape " + shape_string(a.shape()));
            }
            const std::size_t len = attrs.end - attrs.begin;
            Tensor out(axis == 0 ? Shape{len, a.dim(1)} : Shape{a.dim(0), len});
            for (std::size_t i = 0; i < out.dim(0); ++i)
                for (std::size_t j = 0; j < out.dim(1); ++j)
                    out(i, j) = axis == 0 ? a(attrs.begin + i, j) : a(i, attrs.begin + j);
            node.value = std::move(out);
            break;
        }
        case OpKind::pick: {
            arity(1);
            const Tensor& a = val(0);
            require_rank2(a, "pick");
            if (attrs.index.size() != a.dim(0)) {
                throw DimensionError("pick: " + std::to_string(attrs.index.size()) +
                                     " targets for shape " + shape_string(a.shape()));
            }
            Tensor out({a.dim(0)});
            for (std::size_t r = 0; r < a.dim(0); ++r) {
                if (attrs.index[r] >= a.dim(1)) throw DimensionError("pick: column out of range");
                out[r] = a(r, attrs.index[r]);
            }
            node.value = std::move(out);
            break;
        }
        case OpKind::reshape: {
            arity(1);
            const Tensor& a = val(0);
            if (shape_size(attrs.shape) != a.size()) {
                throw DimensionError("reshape " + shape_string(a.shape()) + " to " +
                                     shape_string(attrs.shape));
            }
            node.value = Tensor(attrs.shape, a.storage());
            break;
        }
    }
    node.attrs = std::move(attrs);
    if (!node.requires_grad) node.inputs.clear();
    return push(std::move(node));
}

namespace {

Var unary(OpKind kind, Var a, OpAttrs attrs = {}) {
    const Var in[] = {a};
    return a.graph->apply(kind, in, std::move(attrs));
}

Var binary(OpKind kind, Var a, Var b) {
    if (a.graph != b.graph) throw ContractError("operands belong to different graphs");
    const Var in[] = {a, b};
    return a.graph->apply(kind, in);
}

}  // namespace

Var matmul(Var a, Var b) { return binary(OpKind::matmul, a, b); }
Var transpose(Var a) { return unary(OpKind::transpose, a); }
Var add(Var a, Var b) { return binary(OpKind::add, a, b); }
Var sub(Var a, Var b) { return binary(OpKind::sub, a, b); }
Var mul(Var a, Var b) { return binary(OpKind::mul, a, b); }
Var div(Var a, Var b) { return binary(OpKind::div, a, b); }
Var neg(Var a) { return unary(OpKind::neg, a); }
Var scale(Var a, double factor) { return unary(OpKind::scale, a, {.a = factor}); }
Var add_scalar(Var a, double offset) { return unary(OpKind::add_scalar, a, {.a = offset}); }
Var exp(Var a) { return unary(OpKind::exp, a); }
Var log(Var a) { return unary(OpKind::log, a); }
Var sqrt(Var a) { return unary(OpKind::sqrt, a); }
Var tanh(Var a) { return unary(OpKind::tanh, a); }
Var sigmoid(Var a) { return unary(OpKind::sigmoid, a); }
Var clamp(Var a, double lo, double hi) { return unary(OpKind::clamp, a, {.a = lo, .b = hi}); }
Var softmax(Var a) { return unary(OpKind::softmax, a); }
Var log_softmax(Var a) { return unary(OpKind::log_softmax, a); }
Var mean_last(Var a) { return unary(OpKind::mean_last, a); }
Var var_last(Var a) { return unary(OpKind::var_last, a); }
Var sum(Var a) { return unary(OpKind::sum, a); }
Var mean(Var a) { return unary(OpKind::mean, a); }

Var gather_rows(Var a, std::vector<std::size_t> index) {
    return unary(OpKind::gather_rows, a, {.index = std::move(index)});
}

Var scatter_rows(Var base, Var rows, std::vector<std::size_t> index) {
    if (base.graph != rows.graph) throw ContractError("operands belong to different graphs");
    const Var in[] = {base, rows};
    return base.graph->apply(OpKind::scatter_rows, in, {.index = std::move(index)});
}

Var concat(std::span<const Var> parts, std::size_t axis) {
    if (parts.empty()) throw ContractError("concat: no inputs");
    return parts.front().graph->apply(OpKind::concat, parts, {.axis = axis});
}

Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
    return unary(OpKind::slice, a, {.axis = axis, .begin = begin, .end = end});
}

Var pick(Var a, std::vector<std::size_t> cols) {
    return unary(OpKind::pick, a, {.index = std::move(cols)});
}

Var reshape(Var a, Shape shape) { return unary(OpKind::reshape, a, {.shape = std::move(shape)}); }

}  // namespace styleflow::ad
