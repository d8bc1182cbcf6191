#pragma once

#include <functional>
#include <memory>
#include <vector>

namespace emw {

// Value handle produced by a Tape. Data is shared, shapes are row-major,
// and rank is 1 or 2 for every built-in op.
struct Tensor {
    int id = -1;
    std::vector<int> shape;
    std::shared_ptr<std::vector<double>> data;
    bool needs_grad = false;

    int size() const;
    int rows() const;
    int cols() const;
    const double* ptr() const { return data->data(); }
    double* ptr() { return data->data(); }
    double at(int i) const { return (*data)[static_cast<std::size_t>(i)]; }
};

// Reverse-mode tape. Nodes are replayed strictly in reverse creation order
// and every accumulation loop has a fixed iteration order, so gradients are
// bitwise reproducible for identical inputs.
class Tape {
public:
    Tensor leaf(std::vector<int> shape, std::vector<double> values,
                bool needs_grad = false);

    // Leaf that aliases caller-owned storage instead of copying it. The
    // storage must stay unmodified while this tape is in use.
    Tensor leaf_shared(std::vector<int> shape,
                       std::shared_ptr<std::vector<double>> values,
                       bool needs_grad = false);

    Tensor add(const Tensor& a, const Tensor& b);
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor mul(const Tensor& a, const Tensor& b);
    Tensor scale(const Tensor& a, double s);
    Tensor add_bias(const Tensor& a, const Tensor& bias);
    Tensor matmul(const Tensor& a, const Tensor& b);
    Tensor transpose(const Tensor& a);
    Tensor narrow(const Tensor& a, int col0, int n_cols);
    Tensor concat_cols(const std::vector<Tensor>& parts);
    Tensor gelu(const Tensor& a);
    Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias);
    Tensor softmax(const Tensor& a);
    Tensor reshape(const Tensor& a, std::vector<int> shape);
    Tensor sum_all(const Tensor& a);
    Tensor mean_all(const Tensor& a);
    Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

    // Runs the backward sweep from a scalar node, seeding its gradient
    // with one.
    void backward(const Tensor& loss);

    // Gradient of a node after backward(); zeros if it was never reached.
    std::vector<double> grad(const Tensor& t) const;

    // Creates a node with explicit parents and a pull closure that routes an
    // upstream gradient into the parents. Extension point for ops defined
    // outside this class.
    Tensor node(std::vector<int> shape, std::vector<double> values,
                const std::vector<const Tensor*>& parents,
                std::function<void(const double*, Tape&)> pull);

    // Accumulation buffer for a node, or nullptr if it does not need
    // gradients. Allocated as zeros on first use.
    std::vector<double>* grad_buffer(int id);

    int n_nodes() const { return static_cast<int>(nodes_.size()); }

private:
    struct NodeRec {
        Tensor value;
        std::function<void(const double*, Tape&)> pull;
    };
    std::vector<NodeRec> nodes_;
    std::vector<std::vector<double>> grads_;
};

constexpr double kLayerNormEps = 1e-5;

double gelu_value(double x);
double gelu_derivative(double x);

}  // namespace emw
