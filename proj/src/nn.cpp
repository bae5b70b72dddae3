#include "pw/nn.hpp"

#include <algorithm>
#include <cmath>

#include "pw/error.hpp"

namespace pw {

void linear_forward(const Linear& lin, const Tensor& x, Tensor& y) {
    const int in = lin.w.rows, out = lin.w.cols;
    if (x.cols != in) throw ParameterError("linear_forward: input width mismatch");
    y = Tensor(x.rows, out);
    const double* bias = lin.b.row(0);
    for (int r = 0; r < x.rows; ++r) {
        double* yr = y.row(r);
        for (int j = 0; j < out; ++j) yr[j] = bias[j];
        const double* xr = x.row(r);
        for (int k = 0; k < in; ++k) {
            const double xk = xr[k];
            if (xk == 0.0) continue;
            const double* wk = lin.w.row(k);
            for (int j = 0; j < out; ++j) yr[j] += xk * wk[j];
        }
    }
}

void linear_backward(const Linear& lin, const Tensor& x, const Tensor& dy, Linear& grad,
                     Tensor& dx) {
    const int in = lin.w.rows, out = lin.w.cols;
    // Transposed weights so the dx inner loop runs contiguous.
    Tensor wt(out, in);
    for (int k = 0; k < in; ++k)
        for (int j = 0; j < out; ++j) wt.at(j, k) = lin.w.at(k, j);

    dx = Tensor(x.rows, in);
    for (int r = 0; r < x.rows; ++r) {
        const double* dyr = dy.row(r);
        const double* xr = x.row(r);
        double* dxr = dx.row(r);
        double* db = grad.b.row(0);
        for (int j = 0; j < out; ++j) {
            const double g = dyr[j];
            if (g == 0.0) continue;
            db[j] += g;
            const double* wtj = wt.row(j);
            for (int k = 0; k < in; ++k) dxr[k] += g * wtj[k];
        }
        for (int k = 0; k < in; ++k) {
            const double xk = xr[k];
            if (xk == 0.0) continue;
            double* gwk = grad.w.row(k);
            for (int j = 0; j < out; ++j) gwk[j] += xk * dyr[j];
        }
    }
}

void relu_inplace(Tensor& t) {
    for (double& v : t.v) v = v > 0.0 ? v : 0.0;
}

void relu_backward_inplace(const Tensor& post, Tensor& dpre) {
    for (std::size_t i = 0; i < post.v.size(); ++i)
        if (!(post.v[i] > 0.0)) dpre.v[i] = 0.0;
}

Mlp make_mlp(int in_dim, int hidden_dim, int out_dim, int depth, Rng& rng, bool zero_last_layer) {
    if (depth < 1) throw ParameterError("make_mlp: depth must be >= 1");
    Mlp mlp;
    for (int l = 0; l < depth; ++l) {
        const int li = l == 0 ? in_dim : hidden_dim;
        const int lo = l == depth - 1 ? out_dim : hidden_dim;
        Linear lin;
        lin.w = Tensor(li, lo);
        lin.b = Tensor(1, lo);
        const bool zero = zero_last_layer && l == depth - 1;
        if (!zero) {
            const double scale = std::sqrt(2.0 / li);
            for (double& v : lin.w.v) v = rng.gauss(0.0, scale);
        }
        mlp.layers.push_back(std::move(lin));
    }
    return mlp;
}

Mlp make_mlp_grads(const Mlp& mlp) {
    Mlp g;
    for (const Linear& lin : mlp.layers) {
        Linear zero;
        zero.w = Tensor(lin.w.rows, lin.w.cols);
        zero.b = Tensor(1, lin.b.cols);
        g.layers.push_back(std::move(zero));
    }
    return g;
}

Tensor mlp_forward(const Mlp& mlp, const Tensor& x, MlpCache* cache) {
    const int depth = static_cast<int>(mlp.layers.size());
    if (cache) {
        cache->acts.clear();
        cache->acts.reserve(depth + 1);
        cache->acts.push_back(x);
    }
    Tensor cur = x, next;
    for (int l = 0; l < depth; ++l) {
        linear_forward(mlp.layers[l], cur, next);
        if (l < depth - 1) relu_inplace(next);
        cur = std::move(next);
        if (cache) cache->acts.push_back(cur);
    }
    return cur;
}

Tensor mlp_backward(const Mlp& mlp, const MlpCache& cache, const Tensor& d_out, Mlp& grads) {
    const int depth = static_cast<int>(mlp.layers.size());
    Tensor d = d_out;
    for (int l = depth - 1; l >= 0; --l) {
        if (l < depth - 1) relu_backward_inplace(cache.acts[l + 1], d);
        Tensor dx;
        linear_backward(mlp.layers[l], cache.acts[l], d, grads.layers[l], dx);
        d = std::move(dx);
    }
    return d;
}

Tensor gather_rows(const Tensor& src, const std::vector<int>& index) {
    Tensor out(static_cast<int>(index.size()), src.cols);
    for (std::size_t r = 0; r < index.size(); ++r) {
        const double* s = src.row(index[r]);
        std::copy(s, s + src.cols, out.row(static_cast<int>(r)));
    }
    return out;
}

void scatter_add_rows(Tensor& dst, const std::vector<int>& index, const Tensor& src) {
    for (std::size_t r = 0; r < index.size(); ++r) {
        double* d = dst.row(index[r]);
        const double* s = src.row(static_cast<int>(r));
        for (int c = 0; c < src.cols; ++c) d[c] += s[c];
    }
}

Adam::Adam(AdamSettings settings, const std::vector<Tensor*>& params) : settings_(settings) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Tensor* p : params) {
        m_.emplace_back(p->rows, p->cols);
        v_.emplace_back(p->rows, p->cols);
    }
}

void Adam::step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
        throw ParameterError("Adam::step: parameter list changed size");
    ++t_;
    const double bc1 = 1.0 - std::pow(settings_.beta1, t_);
    const double bc2 = 1.0 - std::pow(settings_.beta2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = *grads[i];
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (std::size_t k = 0; k < p.v.size(); ++k) {
            m.v[k] = settings_.beta1 * m.v[k] + (1.0 - settings_.beta1) * g.v[k];
            v.v[k] = settings_.beta2 * v.v[k] + (1.0 - settings_.beta2) * g.v[k] * g.v[k];
            const double mhat = m.v[k] / bc1;
            const double vhat = v.v[k] / bc2;
            p.v[k] -= settings_.lr * mhat / (std::sqrt(vhat) + settings_.eps);
        }
    }
}

}  // namespace pw
