#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pw/rng.hpp"

namespace pw {

// Dense row-major matrix of doubles.
struct Tensor {
    int rows = 0, cols = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}

    double* row(int r) { return v.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(int r) const { return v.data() + static_cast<std::size_t>(r) * cols; }
    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
    void zero() { std::fill(v.begin(), v.end(), 0.0); }
    std::size_t size() const { return v.size(); }
};

struct Linear {
    Tensor w;  // in x out
    Tensor b;  // 1 x out
};

// y = x*w + b. Row results are independent and accumulate in fixed k-order,
// so output bits do not depend on row ordering.
void linear_forward(const Linear& lin, const Tensor& x, Tensor& y);

// Accumulates dw/db and writes dx. x must be the forward input.
void linear_backward(const Linear& lin, const Tensor& x, const Tensor& dy, Linear& grad,
                     Tensor& dx);

void relu_inplace(Tensor& t);
// dpre = dpost gated by post > 0.
void relu_backward_inplace(const Tensor& post, Tensor& dpre);

// Feed-forward stack: depth linear layers with relu between them, linear output.
struct Mlp {
    std::vector<Linear> layers;

    int in_dim() const { return layers.front().w.rows; }
    int out_dim() const { return layers.back().w.cols; }
};

struct MlpCache {
    // acts[l] is the input to layer l; acts[depth] is the final output.
    std::vector<Tensor> acts;
};

Mlp make_mlp(int in_dim, int hidden_dim, int out_dim, int depth, Rng& rng,
             bool zero_last_layer = false);

// Gradient storage mirroring an Mlp (same shapes, zero-initialized).
Mlp make_mlp_grads(const Mlp& mlp);

Tensor mlp_forward(const Mlp& mlp, const Tensor& x, MlpCache* cache);
// Returns d/d(input); accumulates parameter gradients into grads.
Tensor mlp_backward(const Mlp& mlp, const MlpCache& cache, const Tensor& d_out, Mlp& grads);

// out[r] = src[index[r]].
Tensor gather_rows(const Tensor& src, const std::vector<int>& index);
// dst[index[r]] += src[r], accumulated in row order r = 0,1,...
void scatter_add_rows(Tensor& dst, const std::vector<int>& index, const Tensor& src);

// Adam-style optimizer: per-parameter step scaling from running first/second
// moment estimates.
struct AdamSettings {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
  public:
    Adam(AdamSettings settings, const std::vector<Tensor*>& params);
    void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads);

  private:
    AdamSettings settings_;
    std::vector<Tensor> m_, v_;
    int t_ = 0;
};

}  // namespace pw
