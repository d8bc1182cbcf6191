#include "emw/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace emw {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

int shape_size(const std::vector<int>& shape) {
    int n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor: non-positive dimension");
        n *= d;
    }
    return n;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape != b.shape)
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

void require_rank2(const Tensor& a, const char* op) {
    if (a.shape.size() != 2)
        throw std::invalid_argument(std::string(op) + ": rank-2 tensor required");
}

}  // namespace

int Tensor::size() const {
    int n = 1;
    for (int d : shape) n *= d;
    return n;
}

int Tensor::rows() const { return shape.at(0); }

int Tensor::cols() const { return shape.size() == 2 ? shape[1] : 1; }

double gelu_value(double x) {
    return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
}

double gelu_derivative(double x) {
    return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) +
           x * std::exp(-0.5 * x * x) * kInvSqrt2Pi;
}

Tensor Tape::leaf(std::vector<int> shape, std::vector<double> values,
                  bool needs_grad) {
    return leaf_shared(std::move(shape),
                       std::make_shared<std::vector<double>>(std::move(values)),
                       needs_grad);
}

Tensor Tape::leaf_shared(std::vector<int> shape,
                         std::shared_ptr<std::vector<double>> values,
                         bool needs_grad) {
    if (!values || shape_size(shape) != static_cast<int>(values->size()))
        throw std::invalid_argument("leaf: value count does not match shape");
    Tensor t;
    t.id = static_cast<int>(nodes_.size());
    t.shape = std::move(shape);
    t.data = std::move(values);
    t.needs_grad = needs_grad;
    nodes_.push_back({t, nullptr});
    grads_.emplace_back();
    return t;
}

Tensor Tape::node(std::vector<int> shape, std::vector<double> values,
                  const std::vector<const Tensor*>& parents,
                  std::function<void(const double*, Tape&)> pull) {
    if (shape_size(shape) != static_cast<int>(values.size()))
        throw std::invalid_argument("node: value count does not match shape");
    bool needs = false;
    for (const Tensor* p : parents) needs = needs || p->needs_grad;
    Tensor t;
    t.id = static_cast<int>(nodes_.size());
    t.shape = std::move(shape);
    t.data = std::make_shared<std::vector<double>>(std::move(values));
    t.needs_grad = needs;
    nodes_.push_back({t, needs ? std::move(pull) : nullptr});
    grads_.emplace_back();
    return t;
}

std::vector<double>* Tape::grad_buffer(int id) {
    if (id < 0 || id >= static_cast<int>(nodes_.size()))
        throw std::out_of_range("grad_buffer: unknown node");
    if (!nodes_[static_cast<std::size_t>(id)].value.needs_grad) return nullptr;
    auto& buf = grads_[static_cast<std::size_t>(id)];
    if (buf.empty())
        buf.assign(static_cast<std::size_t>(
                       nodes_[static_cast<std::size_t>(id)].value.size()),
                   0.0);
    return &buf;
}

void Tape::backward(const Tensor& loss) {
    if (loss.size() != 1)
        throw std::invalid_argument("backward: loss must be a scalar node");
    if (!loss.needs_grad)
        throw std::invalid_argument("backward: loss does not depend on any gradient leaf");
    auto* seed = grad_buffer(loss.id);
    (*seed)[0] += 1.0;
    for (int i = loss.id; i >= 0; --i) {
        auto& rec = nodes_[static_cast<std::size_t>(i)];
        if (!rec.pull) continue;
        auto& g = grads_[static_cast<std::size_t>(i)];
        if (g.empty()) continue;
        rec.pull(g.data(), *this);
    }
}

std::vector<double> Tape::grad(const Tensor& t) const {
    const auto& buf = grads_.at(static_cast<std::size_t>(t.id));
    if (buf.empty()) return std::vector<double>(static_cast<std::size_t>(t.size()), 0.0);
    return buf;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    const int n = a.size();
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[i] = a.at(i) + b.at(i);
    return node(a.shape, std::move(out), {&a, &b},
                [a, b, n](const double* g, Tape& tape) {
                    if (auto* ga = tape.grad_buffer(a.id))
                        for (int i = 0; i < n; ++i) (*ga)[i] += g[i];
                    if (auto* gb = tape.grad_buffer(b.id))
                        for (int i = 0; i < n; ++i) (*gb)[i] += g[i];
                });
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    const int n = a.size();
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[i] = a.at(i) - b.at(i);
    return node(a.shape, std::move(out), {&a, &b},
                [a, b, n](const double* g, Tape& tape) {
                    if (auto* ga = tape.grad_buffer(a.id))
                        for (int i = 0; i < n; ++i) (*ga)[i] += g[i];
                    if (auto* gb = tape.grad_buffer(b.id))
                        for (int i = 0; i < n; ++i) (*gb)[i] -= g[i];
                });
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    const int n = a.size();
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[i] = a.at(i) * b.at(i);
    return node(a.shape, std::move(out), {&a, &b},
                [a, b, n](const double* g, Tape& tape) {
                    if (auto* ga = tape.grad_buffer(a.id))
                        for (int i = 0; i < n; ++i) (*ga)[i] += g[i] * b.at(i);
                    if (auto* gb = tape.grad_buffer(b.id))
                        for (int i = 0; i < n; ++i) (*gb)[i] += g[i] * a.at(i);
                });
}

Tensor Tape::scale(const Tensor& a, double s) {
    const int n = a.size();
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[i] = s * a.at(i);
    return node(a.shape, std::move(out), {&a},
                [a, s, n](const double* g, Tape& tape) {
                    if (auto* ga = tape.grad_buffer(a.id))
                        for (int i = 0; i < n; ++i) (*ga)[i] += s * g[i];
                });
}

Tensor Tape::add_bias(const Tensor& a, const Tensor& bias) {
    require_rank2(a, "add_bias");
    if (bias.shape.size() != 1 || bias.shape[0] != a.cols())
        throw std::invalid_argument("add_bias: bias length must match columns");
    const int m = a.rows(), n = a.cols();
    std::vector<double> out(static_cast<std::size_t>(m) * n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[i * n + j] = a.at(i * n + j) + bias.at(j);
    return node(a.shape, std::move(out), {&a, &bias},
                [a, bias, m, n](const double* g, Tape& tape) {
                    if (auto* ga = tape.grad_buffer(a.id))
                        for (int i = 0; i < m * n; ++i) (*ga)[i] += g[i];
                    if (auto* gb = tape.grad_buffer(bias.id))
                        for (int i = 0; i < m; ++i)
                            for (int j = 0; j < n; ++j) (*gb)[j] += g[i * n + j];
                });
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: inner dimensions disagree");
    const int m = a.rows(), k = a.cols(), n = b.cols();
    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            const double av = a.at(i * k + p);
            for (int j = 0; j < n; ++j) out[i * n + j] += av * b.at(p * n + j);
        }
    return node({m, n}, std::move(out), {&a, &b},
                [a, b, m, k, n](const double* g, Tape& tape) {
                    if (auto* ga = tape.grad_buffer(a.id))
                        for (int i = 0; i < m; ++i)
                            for (int j = 0; j < n; ++j) {
                                const double gv = g[i * n + j];
                                for (int p = 0; p < k; ++p)
                                    (*ga)[i * k + p] += gv * b.at(p * n + j);
                            }
                    if (auto* gb = tape.grad_buffer(b.id))
                        for (int i = 0; i < m; ++i)
                            for (int p = 0; p < k; ++p) {
                                const double av = a.at(i * k + p);
                                for (int j = 0; j < n; ++j)
                                    (*gb)[p * n + j] += av * g[i * n + j];
                            }
                });
}

Tensor Tape::transpose(const Tensor& a) {
    require_rank2(a, "transpose");
    const int m = a.rows(), n = a.cols();
    std::vector<double> out(static_cast<std::size_t>(m) * n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[j * m + i] = a.at(i * n + j);
    return node({n, m}, std::move(out), {&a},
                [a, m, n](const double* g, Tape& tape) {
                    if (auto* ga = tape.grad_buffer(a.id))
                        for (int i = 0; i < m; ++i)
                            for (int j = 0; j < n; ++j) (*ga)[i * n + j] += g[j * m + i];
                });
}

Tensor Tape::narrow(const Tensor& a, int col0, int n_cols) {
    require_rank2(a, "narrow");
    if (col0 < 0 || n_cols <= 0 || col0 + n_cols > a.cols())
        throw std::invalid_argument("narrow: column range out of bounds");
    const int m = a.rows(), n = a.cols();
    std::vector<double> out(static_cast<std::size_t>(m) * n_cols);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n_cols; ++j) out[i * n_cols + j] = a.at(i * n + col0 + j);
    return node({m, n_cols}, std::move(out), {&a},
                [a, m, n, col0, n_cols](const double* g, Tape& tape) {
                    if (auto* ga = tape.grad_buffer(a.id))
                        for (int i = 0; i < m; ++i)
                            for (int j = 0; j < n_cols; ++j)
                                (*ga)[i * n + col0 + j] += g[i * n_cols + j];
                });
}

Tensor Tape::concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const int m = parts[0].rows();
    int total = 0;
    for (const auto& p : parts) {
        if (p.shape.size() != 2 || p.rows() != m)
            throw std::invalid_argument("concat_cols: row counts disagree");
        total += p.cols();
    }
    std::vector<double> out(static_cast<std::size_t>(m) * total);
    int off = 0;
    for (const auto& p : parts) {
        const int n = p.cols();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) out[i * total + off + j] = p.at(i * n + j);
        off += n;
    }
    std::vector<const Tensor*> ptrs;
    ptrs.reserve(parts.size());
    for (const auto& p : parts) ptrs.push_back(&p);
    std::vector<Tensor> captured = parts;
    return node({m, total}, std::move(out), ptrs,
                [captured, m, total](const double* g, Tape& tape) {
                    int off = 0;
                    for (const auto& p : captured) {
                        const int n = p.cols();
                        if (auto* gp = tape.grad_buffer(p.id))
                            for (int i = 0; i < m; ++i)
                                for (int j = 0; j < n; ++j)
                                    (*gp)[i * n + j] += g[i * total + off + j];
                        off += n;
                    }
                });
}

Tensor Tape::gelu(const Tensor& a) {
    const int n = a.size();
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[i] = gelu_value(a.at(i));
    return node(a.shape, std::move(out), {&a},
                [a, n](const double* g, Tape& tape) {
                    if (auto* ga = tape.grad_buffer(a.id))
                        for (int i = 0; i < n; ++i)
                            (*ga)[i] += g[i] * gelu_derivative(a.at(i));
                });
}

Tensor Tape::layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias) {
    require_rank2(a, "layer_norm");
    const int m = a.rows(), n = a.cols();
    if (gain.shape.size() != 1 || gain.shape[0] != n ||
        bias.shape.size() != 1 || bias.shape[0] != n)
        throw std::invalid_argument("layer_norm: gain/bias length must match columns");
    auto xhat = std::make_shared<std::vector<double>>(static_cast<std::size_t>(m) * n);
    auto inv_sd = std::make_shared<std::vector<double>>(static_cast<std::size_t>(m));
    std::vector<double> out(static_cast<std::size_t>(m) * n);
    for (int i = 0; i < m; ++i) {
        double mu = 0.0;
        for (int j = 0; j < n; ++j) mu += a.at(i * n + j);
        mu /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            const double d = a.at(i * n + j) - mu;
            var += d * d;
        }
        var /= n;
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        (*inv_sd)[i] = inv;
        for (int j = 0; j < n; ++j) {
            const double xh = (a.at(i * n + j) - mu) * inv;
            (*xhat)[i * n + j] = xh;
            out[i * n + j] = gain.at(j) * xh + bias.at(j);
        }
    }
    return node(a.shape, std::move(out), {&a, &gain, &bias},
                [a, gain, bias, xhat, inv_sd, m, n](const double* g, Tape& tape) {
                    auto* ga = tape.grad_buffer(a.id);
                    auto* gg = tape.grad_buffer(gain.id);
                    auto* gb = tape.grad_buffer(bias.id);
                    for (int i = 0; i < m; ++i) {
                        if (ga) {
                            double sum_gy = 0.0, sum_gyx = 0.0;
                            for (int j = 0; j < n; ++j) {
                                const double gy = g[i * n + j] * gain.at(j);
                                sum_gy += gy;
                                sum_gyx += gy * (*xhat)[i * n + j];
                            }
                            const double mg = sum_gy / n, mgx = sum_gyx / n;
                            for (int j = 0; j < n; ++j) {
                                const double gy = g[i * n + j] * gain.at(j);
                                (*ga)[i * n + j] +=
                                    (*inv_sd)[i] * (gy - mg - (*xhat)[i * n + j] * mgx);
                            }
                        }
                        if (gg)
                            for (int j = 0; j < n; ++j)
                                (*gg)[j] += g[i * n + j] * (*xhat)[i * n + j];
                        if (gb)
                            for (int j = 0; j < n; ++j) (*gb)[j] += g[i * n + j];
                    }
                });
}

Tensor Tape::softmax(const Tensor& a) {
    require_rank2(a, "softmax");
    const int m = a.rows(), n = a.cols();
    auto y = std::make_shared<std::vector<double>>(static_cast<std::size_t>(m) * n);
    for (int i = 0; i < m; ++i) {
        double mx = a.at(i * n);
        for (int j = 1; j < n; ++j) mx = std::max(mx, a.at(i * n + j));
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            const double e = std::exp(a.at(i * n + j) - mx);
            (*y)[i * n + j] = e;
            sum += e;
        }
        for (int j = 0; j < n; ++j) (*y)[i * n + j] /= sum;
    }
    std::vector<double> out(*y);
    return node(a.shape, std::move(out), {&a},
                [a, y, m, n](const double* g, Tape& tape) {
                    if (auto* ga = tape.grad_buffer(a.id))
                        for (int i = 0; i < m; ++i) {
                            double dot = 0.0;
                            for (int j = 0; j < n; ++j) dot += g[i * n + j] * (*y)[i * n + j];
                            for (int j = 0; j < n; ++j)
                                (*ga)[i * n + j] += (*y)[i * n + j] * (g[i * n + j] - dot);
                        }
                });
}

Tensor Tape::reshape(const Tensor& a, std::vector<int> shape) {
    if (shape_size(shape) != a.size())
        throw std::invalid_argument("reshape: element count changed");
    const int n = a.size();
    std::vector<double> out(a.data->begin(), a.data->end());
    return node(std::move(shape), std::move(out), {&a},
                [a, n](const double* g, Tape& tape) {
                    if (auto* ga = tape.grad_buffer(a.id))
                        for (int i = 0; i < n; ++i) (*ga)[i] += g[i];
                });
}

Tensor Tape::sum_all(const Tensor& a) {
    const int n = a.size();
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a.at(i);
    return node({1}, {s}, {&a}, [a, n](const double* g, Tape& tape) {
        if (auto* ga = tape.grad_buffer(a.id))
            for (int i = 0; i < n; ++i) (*ga)[i] += g[0];
    });
}

Tensor Tape::mean_all(const Tensor& a) {
    const int n = a.size();
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a.at(i);
    return node({1}, {s / n}, {&a}, [a, n](const double* g, Tape& tape) {
        if (auto* ga = tape.grad_buffer(a.id))
            for (int i = 0; i < n; ++i) (*ga)[i] += g[0] / n;
    });
}

Tensor Tape::linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    return add_bias(matmul(x, w), b);
}

}  // namespace emw
